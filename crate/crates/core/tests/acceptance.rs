//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and exits non-zero if
//! any criterion fails.
#![allow(clippy::needless_range_loop)]

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use causal_kc::bn::{family_score, BayesNet, Cpt, CptSet};
use causal_kc::graph::enumerate_dags;
use causal_kc::io::NetworkFile;
use causal_kc::path::shortest_paths_from;
use causal_kc::pipeline::{
    cmd_learn, cmd_path, cmd_refute, cmd_simulate, sha256_hex, trace_path, LearnArgs, PathArgs, PipelineConfig,
    RefuteArgs, SimulateArgs,
};
use causal_kc::search::random_dag;
use causal_kc::simulate::random_ground_truth;
use causal_kc::{
    ate, bic_score, do_distribution, fit_mle, hill_climb, plan, refute_edge, sample, true_ate, AdjustmentPolicy,
    CausalAnnotation, Dag, GroundTruth, InterventionQuery, MasteryDataset, MasteryState, RefuteConfig,
    SearchConfig, Tie, Variable, WeightedDigraph, Weighting,
};
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const POLICIES: [AdjustmentPolicy; 2] = [AdjustmentPolicy::Parents, AdjustmentPolicy::NonDescendants];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn c1_bic_oracle() -> Outcome {
    let datasets: Vec<MasteryDataset> = (0..20).map(|s| random_three_node_data(s, 500)).collect();
    let dags = enumerate_dags(datasets[0].variables());
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checks = 0;
    for data in &datasets {
        for dag in enumerate_dags(data.variables()) {
            let got = bic_score::<f64>(&dag, data).unwrap().bic;
            worst = worst.max((got - brute_force_bic(&dag, data)).abs());
            checks += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        dags.len() == 25 && worst < 1e-9 && t < Duration::from_secs(1),
        format!("{checks} checks over {} DAGs, max |diff| {worst:.2e}, {:.3} s", dags.len(), secs(t)),
    )
}

fn c2_structure_recovery() -> Outcome {
    let mut hits = 0;
    let mut slowest = Duration::ZERO;
    for seed in 0..20u64 {
        let dir = TempDir::new().unwrap();
        let data = dir.path().join("data.csv");
        cmd_simulate(&SimulateArgs { truth: fixture("chain_truth.json"), n: 2000, seed, out: data.clone() }).unwrap();
        let out = dir.path().join("net.json");
        let start = Instant::now();
        cmd_learn(&LearnArgs {
            data,
            performance: false,
            out: out.clone(),
            verbose: false,
            config: PipelineConfig { seed, ..Default::default() },
        })
        .unwrap();
        slowest = slowest.max(start.elapsed());
        let mut skel = NetworkFile::load(&out).unwrap().dag().unwrap().skeleton();
        skel.sort();
        if skel == [(0, 1), (1, 2)] {
            hits += 1;
        }
    }
    outcome(
        hits >= 19 && slowest < Duration::from_secs(5),
        format!("{hits}/20 exact skeletons, slowest run {:.3} s", secs(slowest)),
    )
}

fn c3_global_optimum() -> Outcome {
    let mut hits = 0;
    for seed in 0..20u64 {
        let data = random_three_node_data(1000 + seed, 500);
        let (best, _) = exhaustive_best_bic(&data);
        let cfg = SearchConfig { restarts: 5, seed, ..Default::default() };
        let trace = hill_climb::<f64>(&data, &Dag::empty(data.variables().to_vec()), &cfg).unwrap();
        if (trace.network.bic - best).abs() < 1e-9 {
            hits += 1;
        }
    }
    outcome(hits >= 18, format!("{hits}/20 reach the exhaustive maximum"))
}

fn c4_interventional_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut exact_worst = 0.0f64;
    let mut fitted_worst = 0.0f64;
    let mut edges = 0;
    for seed in 0..50u64 {
        let n = rng.gen_range(2..=6);
        let truth = random_ground_truth::<f64, _>(n, 0.5, 3, seed, &mut rng);
        let data = sample(&truth, 5000).unwrap();
        let fitted: BayesNet<f64> = BayesNet::fit(truth.net.dag.clone(), &data, 1.0).unwrap();
        for (x, y) in truth.net.dag.edges() {
            edges += 1;
            let oracle = true_ate(&truth, x, y).unwrap();
            for p in POLICIES {
                exact_worst = exact_worst.max((ate(&truth.net, x, y, p).unwrap() - oracle).abs());
                fitted_worst = fitted_worst.max((ate(&fitted, x, y, p).unwrap() - oracle).abs());
            }
        }
    }
    outcome(
        exact_worst < 1e-9 && fitted_worst < 0.05,
        format!("{edges} edges, true CPTs max |diff| {exact_worst:.2e}, fitted max |diff| {fitted_worst:.4}"),
    )
}

/// Six binary nodes: A -> B (ATE 0.8), C -> D (ATE 0.7), E and F independent fair coins.
fn planted_truth(seed: u64) -> GroundTruth<f64> {
    let vars: Vec<Variable> = ["A", "B", "C", "D", "E", "F"].iter().map(|n| Variable::binary(*n)).collect();
    let dag = Dag::from_edges(vars, &[(0, 1), (2, 3)]).unwrap();
    let coin = || Cpt::from_rows(vec![], vec![], 2, &[vec![0.5, 0.5]]).unwrap();
    let child = |p, lo: f64, hi: f64| Cpt::from_rows(vec![p], vec![2], 2, &[vec![1.0 - lo, lo], vec![1.0 - hi, hi]]).unwrap();
    let cpts = CptSet { tables: vec![coin(), child(0, 0.1, 0.9), coin(), child(2, 0.15, 0.85), coin(), coin()] };
    GroundTruth { net: BayesNet::new(dag, cpts).unwrap(), seed }
}

fn c5_refutation_discrimination() -> Outcome {
    let mut hits = 0;
    let mut slowest = Duration::ZERO;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let truth = planted_truth(seed);
        let data = sample(&truth, 2000).unwrap();
        let mut dag = truth.net.dag.clone();
        dag.add_edge(4, 5).unwrap();
        let cfg = RefuteConfig { bootstrap: 200, seed, ..Default::default() };
        let start = Instant::now();
        let reports: Vec<_> = dag.edges().into_iter().map(|e| refute_edge::<f64>(&data, &dag, e, &cfg).unwrap()).collect();
        slowest = slowest.max(start.elapsed());
        let ok = reports.iter().all(|r| match r.edge {
            (4, 5) => r.verdict == Tie::Removed && r.original_effect.abs() < 0.05,
            _ => r.verdict == Tie::Strong && r.credibility >= 0.95,
        });
        if ok {
            hits += 1;
        } else {
            misses.push(seed);
        }
    }
    outcome(
        hits >= 19 && slowest < Duration::from_secs(30),
        format!("{hits}/20 seeds classify all three edges correctly (misses {misses:?}), slowest pass {:.3} s", secs(slowest)),
    )
}

fn c6_placebo() -> Outcome {
    let mut total = 0.0;
    let mut count = 0;
    for seed in 0..20u64 {
        let truth = chain_truth(seed);
        let data = sample(&truth, 2000).unwrap();
        let cfg = RefuteConfig { seed, ..Default::default() };
        for e in truth.net.dag.edges() {
            total += refute_edge::<f64>(&data, &truth.net.dag, e, &cfg).unwrap().placebo_effect.abs();
            count += 1;
        }
    }
    let mean = total / count as f64;
    outcome(mean < 0.05, format!("mean |placebo| {mean:.4} over {count} edge refutations"))
}

fn c7_shortest_paths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let graphs: Vec<_> = (0..100).map(|_| random_digraph(&mut rng, 20)).collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let mut pairs = 0;
    for (n, edges) in &graphs {
        let names = (0..*n).map(|i| format!("N{i}")).collect();
        let g = WeightedDigraph::new(names, edges).unwrap();
        let fw = floyd_warshall(*n, edges);
        for s in 0..*n {
            let sp = shortest_paths_from(&g, s);
            for t in 0..*n {
                pairs += 1;
                let (a, b) = (sp.dist[t], fw[s][t]);
                if a.is_infinite() || b.is_infinite() {
                    if a != b {
                        mismatched += 1;
                    }
                } else {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    let t = start.elapsed();
    outcome(
        mismatched == 0 && worst < 1e-9 && t < Duration::from_secs(2),
        format!("{pairs} pairs, {mismatched} reachability mismatches, max |diff| {worst:.2e}, {:.3} s", secs(t)),
    )
}

fn c8_plan_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut paths = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=10);
        let vars: Vec<Variable> = (0..n).map(|i| Variable::binary(format!("K{i}"))).collect();
        let dag = random_dag(&Dag::empty(vars), 0.4, 3, &mut rng);
        let state = MasteryState::new((0..n).map(|_| rng.gen_bool(0.4)).collect());
        let anns: Vec<CausalAnnotation<f64>> = dag
            .edges()
            .into_iter()
            .map(|e| CausalAnnotation { edge: e, effect: rng.gen_range(-1.0..1.0), credibility: 1.0, tie: Tie::Strong })
            .collect();
        let weighting = if rng.gen_bool(0.5) { Weighting::Uniform } else { Weighting::EffectInverse };
        let p = plan(&dag, &anns, &state, weighting).unwrap();
        let open = |i: usize| !state.mastered[i];
        let source = |i: usize| dag.parents(i).iter().all(|&q| !open(q));
        let sink = |i: usize| dag.children(i).iter().all(|&c| !open(c));
        for lp in &p.paths {
            paths += 1;
            let seq = &lp.sequence;
            let ok = !seq.is_empty()
                && seq.iter().all(|&i| open(i))
                && seq.windows(2).all(|w| dag.has_edge(w[0], w[1]))
                && source(seq[0])
                && sink(*seq.last().unwrap());
            if !ok {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{paths} paths checked, {violations} violations"))
}

const GOLDEN: &str = "golden_seed7.sha256";

fn run_pipeline(dir: &Path) -> Vec<(String, String)> {
    let config = PipelineConfig { seed: 7, ..Default::default() };
    let data = dir.join("data.csv");
    let learned = dir.join("learned.json");
    let causal = dir.join("causal.json");
    let plan_out = dir.join("plan.json");
    cmd_simulate(&SimulateArgs { truth: fixture("chain_truth.json"), n: 2000, seed: 7, out: data.clone() }).unwrap();
    cmd_learn(&LearnArgs { data: data.clone(), performance: false, out: learned.clone(), verbose: true, config: config.clone() })
        .unwrap();
    cmd_refute(&RefuteArgs {
        data,
        network: learned.clone(),
        out: causal.clone(),
        dot: Some(dir.join("causal.dot")),
        config,
    })
    .unwrap();
    cmd_path(&PathArgs {
        network: causal,
        mastery: fixture("chain_unmastered.csv"),
        weighting: Weighting::Uniform,
        out: plan_out,
        dot: Some(dir.join("plan.dot")),
    })
    .unwrap();
    let trace = trace_path(&learned);
    let trace_name = trace.file_name().unwrap().to_string_lossy().into_owned();
    ["data.csv", "learned.json", trace_name.as_str(), "causal.json", "causal.dot", "plan.json", "plan.dot"]
        .iter()
        .map(|name| (name.to_string(), sha256_hex(&fs::read(dir.join(name)).unwrap())))
        .collect()
}

fn c9_determinism() -> Outcome {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let first = run_pipeline(a.path());
    let second = run_pipeline(b.path());
    let golden: Vec<(String, String)> = fs::read_to_string(fixture(GOLDEN))
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.split_once("  ").map(|(d, n)| (n.to_string(), d.to_string())))
        .collect();
    let identical = first == second;
    let matches = golden == first;
    let mut detail = format!("{} outputs, reruns identical: {identical}, golden match: {matches}", first.len());
    if !matches {
        for (name, digest) in &first {
            detail += &format!("\n    {digest}  {name}");
        }
    }
    outcome(identical && matches, detail)
}

fn random_case(rng: &mut ChaCha8Rng, min_rows: usize) -> (MasteryDataset, Dag) {
    let n_vars = rng.gen_range(2..=5);
    let vars: Vec<Variable> = (0..n_vars)
        .map(|v| Variable::new(format!("V{v}"), rng.gen_range(2..=3)).unwrap())
        .collect();
    let rows = (0..rng.gen_range(min_rows..120))
        .map(|_| vars.iter().map(|v| rng.gen_range(0..v.cardinality)).collect())
        .collect();
    let data = MasteryDataset::new(vars.clone(), rows).unwrap();
    let dag = random_dag(&Dag::empty(vars), 0.5, 3, rng);
    (data, dag)
}

fn c10_properties() -> Outcome {
    const CASES: u32 = 1000;
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    let mut failures = Vec::new();

    let r = runner.run(&any::<u64>(), |seed| {
        let (data, dag) = random_case(&mut ChaCha8Rng::seed_from_u64(seed), 1);
        for smoothing in [0.0, 1.0] {
            for cpt in &fit_mle::<f64>(&dag, &data, smoothing).unwrap().tables {
                for row in cpt.rows() {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
        Ok(())
    });
    if let Err(e) = r {
        failures.push(format!("CPT rows: {e}"));
    }

    let r = runner.run(&any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=6);
        let truth = random_ground_truth::<f64, _>(n, 0.5, 3, seed, &mut rng);
        let treatment = rng.gen_range(0..n);
        let outcome = (treatment + rng.gen_range(1..n)) % n;
        for policy in POLICIES {
            let q = InterventionQuery { treatment, value: rng.gen_range(0..2), outcome, policy };
            let d = do_distribution(&truth.net, &q).unwrap();
            prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(d.probabilities.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
        }
        Ok(())
    });
    if let Err(e) = r {
        failures.push(format!("do-distribution: {e}"));
    }

    // relabelling the treatment's two states negates the effect
    let r = runner.run(&any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=5);
        let truth = random_ground_truth::<f64, _>(n, 0.5, 3, seed, &mut rng);
        let data = sample(&truth, rng.gen_range(20..300)).unwrap();
        let dag = truth.net.dag.clone();
        let x = rng.gen_range(0..n);
        let y = (x + rng.gen_range(1..n)) % n;
        let flipped: Vec<usize> = data.column(x).iter().map(|v| 1 - v).collect();
        let relabelled = data.with_column(x, &flipped).unwrap();
        let a: BayesNet<f64> = BayesNet::fit(dag.clone(), &data, 1.0).unwrap();
        let b: BayesNet<f64> = BayesNet::fit(dag, &relabelled, 1.0).unwrap();
        for policy in POLICIES {
            let fwd = ate(&a, x, y, policy).unwrap();
            let back = ate(&b, x, y, policy).unwrap();
            prop_assert!((fwd + back).abs() < 1e-9, "{} vs {}", fwd, back);
        }
        Ok(())
    });
    if let Err(e) = r {
        failures.push(format!("ATE antisymmetry: {e}"));
    }

    let r = runner.run(&any::<u64>(), |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, mut dag) = random_case(&mut rng, 2);
        let before = bic_score::<f64>(&dag, &data).unwrap();
        let candidates: Vec<(usize, usize)> = (0..dag.len())
            .flat_map(|p| (0..dag.len()).map(move |c| (p, c)))
            .filter(|&(p, c)| p != c && (dag.has_edge(p, c) || !dag.reaches(c, p)))
            .collect();
        let (p, c) = candidates[rng.gen_range(0..candidates.len())];
        if dag.has_edge(p, c) {
            dag.remove_edge(p, c).unwrap();
        } else {
            dag.add_edge(p, c).unwrap();
        }
        let after = bic_score::<f64>(&dag, &data).unwrap();
        for i in 0..dag.len() {
            if i == c {
                prop_assert_ne!(before.family_scores[i], after.family_scores[i]);
                let fresh: f64 = family_score(&data, c, dag.parents(c)).unwrap();
                prop_assert_eq!(fresh, after.family_scores[i]);
            } else {
                prop_assert_eq!(before.family_scores[i], after.family_scores[i]);
            }
        }
        Ok(())
    });
    if let Err(e) = r {
        failures.push(format!("decomposability: {e}"));
    }

    let detail = if failures.is_empty() {
        format!("4 properties x {CASES} cases")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("BIC oracle equivalence", c1_bic_oracle),
        ("structure recovery", c2_structure_recovery),
        ("hill-climb global optimality at n=3", c3_global_optimum),
        ("interventional oracle", c4_interventional_oracle),
        ("refutation discrimination", c5_refutation_discrimination),
        ("placebo soundness", c6_placebo),
        ("shortest-path oracle", c7_shortest_paths),
        ("path-planning invariants", c8_plan_invariants),
        ("end-to-end determinism", c9_determinism),
        ("distribution and CPT invariants", c10_properties),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| outcome(false, format!("panicked: {:?}", e.downcast_ref::<String>())));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!("[{tag}] criterion {}: {name} ({})", i + 1, result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
