//! Network JSON, plan JSON, mastery-state CSV and Graphviz DOT.
//!
//! CPT rows in the network JSON follow the mixed-radix order of the node's parents, where
//! parents are listed in node order and the first parent is the most significant digit.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bn::{BayesNet, Cpt, CptSet, ScoredNetwork};
use crate::causal::{CausalAnnotation, RefutationReport, Tie};
use crate::data::Variable;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::path::{MasteryState, Plan};
use crate::scalar::Scalar;
use crate::simulate::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub edge: [String; 2],
    pub effect: f64,
    pub credibility: f64,
    pub tie: Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub edge: [String; 2],
    pub original_effect: f64,
    pub placebo_effect: f64,
    pub credibility: f64,
    pub verdict: Tie,
    pub bootstrap_effects: Vec<f64>,
}

/// On-disk network: structure, optional CPTs and score, optional causal annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: Vec<Variable>,
    pub edges: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub cpts: IndexMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<AnnotationRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reports: Option<Vec<ReportRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warnings: Option<Vec<String>>,
}

fn edge_names(dag: &Dag, (p, c): (usize, usize)) -> [String; 2] {
    [dag.name(p).to_owned(), dag.name(c).to_owned()]
}

impl NetworkFile {
    pub fn from_dag(dag: &Dag) -> Self {
        NetworkFile {
            nodes: dag.nodes().to_vec(),
            edges: dag.edges().into_iter().map(|e| edge_names(dag, e)).collect(),
            cpts: IndexMap::new(),
            bic: None,
            annotations: None,
            reports: None,
            warnings: None,
        }
    }

    pub fn from_net<T: Scalar>(net: &BayesNet<T>) -> Self {
        let mut file = Self::from_dag(&net.dag);
        for (i, t) in net.cpts.tables.iter().enumerate() {
            let rows = t.rows().map(|r| r.iter().map(|p| p.as_f64()).collect()).collect();
            file.cpts.insert(net.dag.name(i).to_owned(), rows);
        }
        file
    }

    pub fn from_scored<T: Scalar>(scored: &ScoredNetwork<T>) -> Self {
        let mut file = Self::from_net(&scored.network);
        file.bic = Some(scored.bic.as_f64());
        file
    }

    pub fn with_annotations<T: Scalar>(
        mut self,
        dag: &Dag,
        annotations: &[CausalAnnotation<T>],
        reports: &[RefutationReport<T>],
        warnings: &[String],
    ) -> Self {
        self.annotations = Some(
            annotations
                .iter()
                .map(|a| AnnotationRecord {
                    edge: edge_names(dag, a.edge),
                    effect: a.effect.as_f64(),
                    credibility: a.credibility,
                    tie: a.tie,
                })
                .collect(),
        );
        self.reports = Some(
            reports
                .iter()
                .map(|r| ReportRecord {
                    edge: edge_names(dag, r.edge),
                    original_effect: r.original_effect.as_f64(),
                    placebo_effect: r.placebo_effect.as_f64(),
                    credibility: r.credibility,
                    verdict: r.verdict,
                    bootstrap_effects: r.bootstrap_effects.iter().map(|e| e.as_f64()).collect(),
                })
                .collect(),
        );
        self.warnings = Some(warnings.to_vec());
        self
    }

    pub fn dag(&self) -> Result<Dag> {
        for v in &self.nodes {
            Variable::new(v.name.clone(), v.cardinality)?;
        }
        let mut dag = Dag::empty(self.nodes.clone());
        if dag.nodes().iter().enumerate().any(|(i, v)| dag.index_of(&v.name) != Some(i)) {
            return Err(Error::Schema("duplicate node name in network file".into()));
        }
        for [p, c] in &self.edges {
            let (p, c) = (dag.require(p)?, dag.require(c)?);
            dag.add_edge(p, c)?;
        }
        Ok(dag)
    }

    pub fn has_cpts(&self) -> bool {
        !self.cpts.is_empty()
    }

    pub fn bayes_net<T: Scalar>(&self) -> Result<BayesNet<T>> {
        let dag = self.dag()?;
        if let Some(extra) = self.cpts.keys().find(|k| dag.index_of(k).is_none()) {
            return Err(Error::Schema(format!("CPT given for unknown node {extra}")));
        }
        let mut tables = Vec::with_capacity(dag.len());
        for (i, v) in dag.nodes().iter().enumerate() {
            let rows = self
                .cpts
                .get(&v.name)
                .ok_or_else(|| Error::Schema(format!("missing CPT for node {}", v.name)))?;
            let rows: Vec<Vec<T>> = rows
                .iter()
                .map(|r| r.iter().map(|&p| T::lit(p)).collect())
                .collect();
            let parents = dag.parents(i).to_vec();
            let cards = parents.iter().map(|&p| dag.nodes()[p].cardinality).collect();
            let cpt = Cpt::from_rows(parents, cards, v.cardinality, &rows)
                .map_err(|e| Error::Schema(format!("CPT for {}: {e}", v.name)))?;
            tables.push(cpt);
        }
        BayesNet::new(dag, CptSet { tables })
    }

    /// Annotations resolved to node indices.
    pub fn causal_annotations<T: Scalar>(&self, dag: &Dag) -> Result<Vec<CausalAnnotation<T>>> {
        self.annotations
            .iter()
            .flatten()
            .map(|a| {
                Ok(CausalAnnotation {
                    edge: (dag.require(&a.edge[0])?, dag.require(&a.edge[1])?),
                    effect: T::lit(a.effect),
                    credibility: a.credibility,
                    tie: a.tie,
                })
            })
            .collect()
    }

    pub fn ground_truth<T: Scalar>(&self, seed: u64) -> Result<GroundTruth<T>> {
        if !self.has_cpts() {
            return Err(Error::Schema("ground-truth file must include \"cpts\"".into()));
        }
        Ok(GroundTruth {
            net: self.bayes_net()?,
            seed,
        })
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub target: String,
    pub root: String,
    pub path: Vec<String>,
    pub total_weight: f64,
    pub highlighted: Vec<String>,
}

pub fn plan_records<T: Scalar>(dag: &Dag, plan: &Plan<T>) -> Vec<PlanRecord> {
    let names = |v: &[usize]| v.iter().map(|&i| dag.name(i).to_owned()).collect();
    plan.paths
        .iter()
        .map(|p| PlanRecord {
            target: dag.name(p.target).to_owned(),
            root: dag.name(p.root).to_owned(),
            path: names(&p.sequence),
            total_weight: p.total_weight.as_f64(),
            highlighted: names(&p.highlighted),
        })
        .collect()
}

/// Reads a single-row `name,...` / `0|1,...` CSV and aligns it with the network's nodes.
pub fn read_mastery_state(reader: impl Read, dag: &Dag) -> Result<MasteryState> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let missing: Vec<&str> = dag
        .nodes()
        .iter()
        .map(|v| v.name.as_str())
        .filter(|n| !header.iter().any(|h| h == n))
        .collect();
    let extra: Vec<&str> = header
        .iter()
        .map(String::as_str)
        .filter(|h| dag.index_of(h).is_none())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Schema(format!(
            "mastery columns do not match network nodes (missing: [{}], extra: [{}])",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let mut records = rdr.records();
    let row = records
        .next()
        .ok_or_else(|| Error::EmptyDataset("mastery file has no data row".into()))??;
    if records.next().is_some() {
        return Err(Error::Schema("mastery file must contain exactly one data row".into()));
    }
    let mut mastered = vec![false; dag.len()];
    for (col, cell) in header.iter().zip(row.iter()) {
        let flag = match cell {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    row: 1,
                    column: col.clone(),
                    message: format!("mastery flag must be 0 or 1, got {other:?}"),
                })
            }
        };
        mastered[dag.index_of(col).expect("checked above")] = flag;
    }
    Ok(MasteryState::new(mastered))
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Causal network as DOT: Strong edges solid, Weak dashed, Removed omitted.
pub fn annotated_dot<T: Scalar>(dag: &Dag, annotations: &[CausalAnnotation<T>]) -> String {
    let mut out = String::from("digraph causal_network {\n  rankdir=LR;\n");
    for v in dag.nodes() {
        let _ = writeln!(out, "  {};", dot_id(&v.name));
    }
    for (p, c) in dag.edges() {
        let ann = annotations.iter().find(|a| a.edge == (p, c));
        let attrs = match ann {
            Some(a) if a.tie == Tie::Removed => continue,
            Some(a) => format!(
                " [style={}, label=\"{:.2} / {:.2}\"]",
                if a.tie == Tie::Strong { "solid" } else { "dashed" },
                a.effect.as_f64(),
                a.credibility
            ),
            None => String::new(),
        };
        let _ = writeln!(out, "  {} -> {}{};", dot_id(dag.name(p)), dot_id(dag.name(c)), attrs);
    }
    out.push_str("}\n");
    out
}

/// Plan as DOT: unmastered nodes filled, root problems double-circled, path edges bold.
pub fn plan_dot<T: Scalar>(dag: &Dag, annotations: &[CausalAnnotation<T>], plan: &Plan<T>) -> String {
    let mut on_path = std::collections::BTreeSet::new();
    for p in &plan.paths {
        for w in p.sequence.windows(2) {
            on_path.insert((w[0], w[1]));
        }
    }
    let mut out = String::from("digraph learning_plan {\n  rankdir=LR;\n");
    for (i, v) in dag.nodes().iter().enumerate() {
        let mut attrs = Vec::new();
        if plan.unmastered.contains(&i) {
            attrs.push("style=filled, fillcolor=\"#f4cccc\"".to_owned());
        }
        if plan.roots.contains(&i) {
            attrs.push("shape=doublecircle".to_owned());
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        let _ = writeln!(out, "  {}{};", dot_id(&v.name), attrs);
    }
    for (p, c) in dag.edges() {
        let ann = annotations.iter().find(|a| a.edge == (p, c));
        if ann.is_some_and(|a| a.tie == Tie::Removed) {
            continue;
        }
        let mut attrs = Vec::new();
        if ann.is_some_and(|a| a.tie == Tie::Weak) {
            attrs.push("style=dashed");
        }
        if on_path.contains(&(p, c)) {
            attrs.push("color=red, penwidth=2.5");
        }
        let attrs = if attrs.is_empty() {
            String::new()
        } else {
            format!(" [{}]", attrs.join(", "))
        };
        let _ = writeln!(out, "  {} -> {}{};", dot_id(dag.name(p)), dot_id(dag.name(c)), attrs);
    }
    out.push_str("}\n");
    out
}
