//! End-to-end commands: simulate, learn, refute, effects and path.
//!
//! Each command writes its primary output plus a `<output>.manifest.json` run manifest.
//! Primary outputs contain no timings or paths, so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bn::bic_score;
use crate::causal::{
    do_distribution, effect, refute_edge, update_network, AdjustmentPolicy, CausalAnnotation,
    InterventionQuery, RefuteConfig,
};
use crate::data::{read_performance_csv, transform_performance, MasteryDataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::io::{annotated_dot, plan_dot, plan_records, read_mastery_state, NetworkFile};
use crate::path::{plan, Plan, Weighting};
use crate::search::{search_until_stable, SearchConfig, TraceStep};
use crate::simulate::sample;

/// Default mastery threshold for score-to-mastery transformation.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub threshold: f64,
    pub search: SearchConfig,
    pub refute: RefuteConfig,
    pub weighting: Weighting,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            threshold: DEFAULT_THRESHOLD,
            search: SearchConfig::default(),
            refute: RefuteConfig::default(),
            weighting: Weighting::Uniform,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} not in (0, 1)", self.threshold)));
        }
        self.search.validate()?;
        self.refute.validate()
    }
}

/// Seed for one stage, derived from the top-level seed and the stage name.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{stage}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_owned(),
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    fn time<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let r = f();
        self.timings_ms
            .insert(stage.to_owned(), start.elapsed().as_secs_f64() * 1e3);
        r
    }

    fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs
            .insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn output(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        self.outputs
            .insert(path.display().to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn finish(self, primary: &Path) -> Result<RunManifest> {
        let path = manifest_path(primary);
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(self)
    }
}

pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn config_json<C: Serialize>(c: &C) -> serde_json::Value {
    serde_json::to_value(c).expect("config types serialize")
}

fn csv_bytes(data: &MasteryDataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    Ok(buf)
}

fn load_dataset(manifest: &mut RunManifest, path: &Path) -> Result<MasteryDataset> {
    let bytes = manifest.input(path)?;
    crate::data::read_mastery_csv(bytes.as_slice(), None)
}

fn load_network(manifest: &mut RunManifest, path: &Path) -> Result<NetworkFile> {
    let bytes = manifest.input(path)?;
    NetworkFile::read(bytes.as_slice())
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub truth: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
}

/// Samples a cohort from a ground-truth network file and writes it as mastery CSV.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<RunManifest> {
    if args.n == 0 {
        return Err(Error::Argument("--n must be at least 1".into()));
    }
    let mut m = RunManifest::new(
        "simulate",
        args.seed,
        serde_json::json!({ "n": args.n, "seed": args.seed }),
    );
    let truth_file = load_network(&mut m, &args.truth).map_err(|e| e.in_stage("load truth"))?;
    let truth = truth_file
        .ground_truth::<f64>(stage_seed(args.seed, "simulate"))
        .map_err(|e| e.in_stage("load truth"))?;
    let data = m.time("sample", || sample(&truth, args.n))?;
    m.output(&args.out, &csv_bytes(&data)?)?;
    m.finish(&args.out)
}

#[derive(Debug, Clone)]
pub struct LearnArgs {
    pub data: PathBuf,
    /// Treat `data` as `student_id,component_name,score` records and threshold them first.
    pub performance: bool,
    pub out: PathBuf,
    pub verbose: bool,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Serialize)]
struct TraceRecord {
    iter: usize,
    #[serde(rename = "move")]
    mv: String,
    bic: f64,
}

pub fn trace_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".trace.jsonl");
    PathBuf::from(s)
}

fn trace_jsonl(dag: &Dag, steps: &[TraceStep<f64>]) -> Result<String> {
    let mut out = String::new();
    for (i, s) in steps.iter().enumerate() {
        out.push_str(&serde_json::to_string(&TraceRecord {
            iter: i + 1,
            mv: s.mv.describe(dag),
            bic: s.bic,
        })?);
        out.push('\n');
    }
    Ok(out)
}

/// Hill climbing from the empty graph, repeated until the score is stable.
pub fn cmd_learn(args: &LearnArgs) -> Result<RunManifest> {
    args.config.validate()?;
    let mut m = RunManifest::new("learn", args.config.seed, config_json(&args.config));
    let data = if args.performance {
        let bytes = m.input(&args.data)?;
        let records = read_performance_csv(bytes.as_slice()).map_err(|e| e.in_stage("ingest"))?;
        let outcome = transform_performance(&records, args.config.threshold)
            .map_err(|e| e.in_stage("transform"))?;
        if !outcome.dropped.is_empty() {
            eprintln!(
                "dropped {} incomplete student(s): {}",
                outcome.dropped.len(),
                outcome.dropped.join(", ")
            );
        }
        outcome.dataset
    } else {
        load_dataset(&mut m, &args.data).map_err(|e| e.in_stage("ingest"))?
    };
    let search = SearchConfig {
        seed: stage_seed(args.config.seed, "learn"),
        ..args.config.search.clone()
    };
    let initial = Dag::empty(data.variables().to_vec());
    let trace = m
        .time("search", || search_until_stable::<f64>(&data, &initial, &search))
        .map_err(|e| e.in_stage("search"))?;
    if trace.truncated {
        eprintln!("warning: search stopped at max_iterations before converging");
    }
    let json = NetworkFile::from_scored(&trace.network).to_json()?;
    m.output(&args.out, json.as_bytes())?;
    if args.verbose {
        let lines = trace_jsonl(trace.network.dag(), &trace.steps)?;
        m.output(&trace_path(&args.out), lines.as_bytes())?;
    }
    m.finish(&args.out)
}

#[derive(Debug, Clone)]
pub struct RefuteArgs {
    pub data: PathBuf,
    pub network: PathBuf,
    pub out: PathBuf,
    pub dot: Option<PathBuf>,
    pub config: PipelineConfig,
}

/// Refutes every edge, drops Removed edges and writes the annotated causal network.
pub fn cmd_refute(args: &RefuteArgs) -> Result<RunManifest> {
    args.config.validate()?;
    let mut m = RunManifest::new("refute", args.config.seed, config_json(&args.config));
    let data = load_dataset(&mut m, &args.data).map_err(|e| e.in_stage("ingest"))?;
    let file = load_network(&mut m, &args.network).map_err(|e| e.in_stage("load network"))?;
    let dag = file.dag().map_err(|e| e.in_stage("load network"))?;
    if dag.nodes() != data.variables() {
        return Err(Error::Schema(
            "network nodes do not match dataset columns (names, order, cardinalities)".into(),
        ));
    }
    let refute = RefuteConfig {
        seed: stage_seed(args.config.seed, "refute"),
        ..args.config.refute.clone()
    };
    let reports = m
        .time("refute", || {
            dag.edges()
                .into_iter()
                .map(|e| refute_edge::<f64>(&data, &dag, e, &refute))
                .collect::<Result<Vec<_>>>()
        })
        .map_err(|e| e.in_stage("refute"))?;
    let annotations: Vec<CausalAnnotation<f64>> = reports.iter().map(Into::into).collect();
    let warnings: Vec<String> = reports
        .iter()
        .filter(|r| r.positivity_fallback)
        .map(|r| {
            format!(
                "positivity fallback used for {} -> {}",
                dag.name(r.edge.0),
                dag.name(r.edge.1)
            )
        })
        .collect();
    let scored = bic_score::<f64>(&dag, &data)?;
    let mut annotated = update_network(&scored, &data, annotations)?;
    annotated.reports = reports;
    annotated.warnings = warnings;
    let json = NetworkFile::from_scored(&annotated.scored)
        .with_annotations(&dag, &annotated.annotations, &annotated.reports, &annotated.warnings)
        .to_json()?;
    m.output(&args.out, json.as_bytes())?;
    if let Some(dot) = &args.dot {
        m.output(dot, annotated_dot(&dag, &annotated.annotations).as_bytes())?;
    }
    m.finish(&args.out)
}

#[derive(Debug, Clone)]
pub struct EffectsArgs {
    pub network: PathBuf,
    pub treatment: String,
    pub value: usize,
    pub outcome: String,
    pub policy: AdjustmentPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsOutput {
    pub treatment: String,
    pub value: usize,
    pub outcome: String,
    pub policy: AdjustmentPolicy,
    pub distribution: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ate: Option<f64>,
    pub positivity_fallback: bool,
}

/// `P(outcome | do(treatment = value))` from the CPTs stored in a network file.
pub fn cmd_effects(args: &EffectsArgs) -> Result<EffectsOutput> {
    let file = NetworkFile::load(&args.network)?;
    let dag = file.dag()?;
    let treatment = dag.require(&args.treatment)?;
    let outcome = dag.require(&args.outcome)?;
    if treatment == outcome {
        return Err(Error::Argument(format!(
            "treatment and outcome are both {}",
            args.treatment
        )));
    }
    if !file.has_cpts() {
        return Err(Error::Schema("network file has no \"cpts\"".into()));
    }
    let net = file.bayes_net::<f64>()?;
    let dist = do_distribution(
        &net,
        &InterventionQuery {
            treatment,
            value: args.value,
            outcome,
            policy: args.policy,
        },
    )?;
    let binary = [treatment, outcome]
        .iter()
        .all(|&i| dag.nodes()[i].cardinality == 2);
    let ate = if binary {
        Some(effect(&net, treatment, outcome, args.policy)?.ate)
    } else {
        None
    };
    Ok(EffectsOutput {
        treatment: args.treatment.clone(),
        value: args.value,
        outcome: args.outcome.clone(),
        policy: args.policy,
        distribution: dist.probabilities,
        ate,
        positivity_fallback: dist.positivity_fallback,
    })
}

#[derive(Debug, Clone)]
pub struct PathArgs {
    pub network: PathBuf,
    pub mastery: PathBuf,
    pub weighting: Weighting,
    pub out: PathBuf,
    pub dot: Option<PathBuf>,
}

/// Plans root-first learning paths for one student's mastery row.
pub fn cmd_path(args: &PathArgs) -> Result<(Plan<f64>, RunManifest)> {
    let mut m = RunManifest::new(
        "path",
        0,
        serde_json::json!({ "weighting": args.weighting }),
    );
    let file = load_network(&mut m, &args.network).map_err(|e| e.in_stage("load network"))?;
    let dag = file.dag()?;
    let annotations = file.causal_annotations::<f64>(&dag)?;
    let mastery = m.input(&args.mastery)?;
    let state = read_mastery_state(mastery.as_slice(), &dag)?;
    let planned = m.time("plan", || plan(&dag, &annotations, &state, args.weighting))?;
    let mut json = serde_json::to_string_pretty(&plan_records(&dag, &planned))?;
    json.push('\n');
    m.output(&args.out, json.as_bytes())?;
    if let Some(dot) = &args.dot {
        m.output(dot, plan_dot(&dag, &annotations, &planned).as_bytes())?;
    }
    Ok((planned, m.finish(&args.out)?))
}
