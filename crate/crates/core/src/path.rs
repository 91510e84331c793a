//! Learning-path planning over an annotated causal network.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::causal::{CausalAnnotation, Tie};
use crate::graph::Dag;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-node mastery flags, aligned with the network's node order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasteryState {
    pub mastered: Vec<bool>,
}

impl MasteryState {
    pub fn new(mastered: Vec<bool>) -> Self {
        MasteryState { mastered }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// `max(1 − |effect|, 1e-6)`: strong ties are cheap to traverse.
    EffectInverse,
}

pub const MIN_EDGE_WEIGHT: f64 = 1e-6;

/// Directed graph with non-negative finite edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph<T> {
    names: Vec<String>,
    adjacency: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> WeightedDigraph<T> {
    pub fn new(names: Vec<String>, edges: &[(usize, usize, T)]) -> Result<Self> {
        let n = names.len();
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::Argument("edge endpoint out of range".into()));
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::Argument(format!(
                    "edge {} -> {} has weight {w}; weights must be finite and non-negative",
                    names[u], names[v]
                )));
            }
            adjacency[u].push((v, w));
        }
        for out in &mut adjacency {
            out.sort_by_key(|&(v, _)| v);
        }
        Ok(WeightedDigraph { names, adjacency })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn out_edges(&self, u: usize) -> &[(usize, T)] {
        &self.adjacency[u]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, out)| out.iter().map(move |&(v, w)| (u, v, w)))
    }

    /// Subgraph keeping only edges whose endpoints are both in `keep`.
    pub fn induced(&self, keep: &[bool]) -> Self {
        let adjacency = self
            .adjacency
            .iter()
            .enumerate()
            .map(|(u, out)| {
                if keep[u] {
                    out.iter().copied().filter(|&(v, _)| keep[v]).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        WeightedDigraph {
            names: self.names.clone(),
            adjacency,
        }
    }
}

/// Weighted view of an annotated causal graph; Removed edges are left out.
pub fn to_weighted<T: Scalar>(
    dag: &Dag,
    annotations: &[CausalAnnotation<T>],
    weighting: Weighting,
) -> Result<WeightedDigraph<T>> {
    let names = dag.nodes().iter().map(|v| v.name.clone()).collect();
    let mut edges = Vec::new();
    for (p, c) in dag.edges() {
        let ann = annotations.iter().find(|a| a.edge == (p, c));
        if ann.is_some_and(|a| a.tie == Tie::Removed) {
            continue;
        }
        let w = match weighting {
            Weighting::Uniform => T::one(),
            Weighting::EffectInverse => {
                let a = ann.ok_or_else(|| {
                    Error::Argument(format!(
                        "edge {} -> {} has no causal annotation",
                        dag.name(p),
                        dag.name(c)
                    ))
                })?;
                effect_inverse_weight(a.effect)
            }
        };
        edges.push((p, c, w));
    }
    WeightedDigraph::new(names, &edges)
}

pub fn effect_inverse_weight<T: Scalar>(effect: T) -> T {
    (T::one() - effect.abs()).max(T::lit(MIN_EDGE_WEIGHT))
}

/// Distances and predecessors from one source.
#[derive(Debug, Clone)]
pub struct ShortestPaths<T> {
    pub source: usize,
    pub dist: Vec<T>,
    pub pred: Vec<Option<usize>>,
}

impl<T: Scalar> ShortestPaths<T> {
    /// Node sequence from the source to `t`, or `None` when unreachable.
    pub fn path_to(&self, t: usize) -> Option<Vec<usize>> {
        if self.dist[t].is_infinite() {
            return None;
        }
        let mut path = vec![t];
        let mut cur = t;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// FIFO label-correcting relaxation: a node is re-enqueued whenever its label improves.
pub fn shortest_paths_from<T: Scalar>(graph: &WeightedDigraph<T>, s: usize) -> ShortestPaths<T> {
    let mut dist = vec![T::infinity(); graph.len()];
    let mut pred = vec![None; graph.len()];
    let mut queue = VecDeque::from([s]);
    dist[s] = T::zero();
    while let Some(u) = queue.pop_front() {
        for &(v, w) in graph.out_edges(u) {
            let alt = dist[u] + w;
            if alt < dist[v] {
                dist[v] = alt;
                pred[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    ShortestPaths { source: s, dist, pred }
}

/// Shortest `s → t` distance and route, or `None` when `t` is unreachable.
pub fn shortest_path<T: Scalar>(graph: &WeightedDigraph<T>, s: usize, t: usize) -> Option<(T, Vec<usize>)> {
    let sp = shortest_paths_from(graph, s);
    sp.path_to(t).map(|p| (sp.dist[t], p))
}

pub fn unmastered_set(state: &MasteryState) -> Vec<usize> {
    state
        .mastered
        .iter()
        .enumerate()
        .filter(|(_, &m)| !m)
        .map(|(i, _)| i)
        .collect()
}

fn membership(n: usize, nodes: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &i in nodes {
        mask[i] = true;
    }
    mask
}

/// Sources of the subgraph induced on `unmastered`.
pub fn root_problems<T: Scalar>(graph: &WeightedDigraph<T>, unmastered: &[usize]) -> Vec<usize> {
    let inside = membership(graph.len(), unmastered);
    let mut has_parent = vec![false; graph.len()];
    for (u, v, _) in graph.edges() {
        if inside[u] && inside[v] {
            has_parent[v] = true;
        }
    }
    unmastered.iter().copied().filter(|&i| !has_parent[i]).collect()
}

/// Sinks of the subgraph induced on `unmastered`.
pub fn surface_problems<T: Scalar>(graph: &WeightedDigraph<T>, unmastered: &[usize]) -> Vec<usize> {
    let inside = membership(graph.len(), unmastered);
    unmastered
        .iter()
        .copied()
        .filter(|&u| !graph.out_edges(u).iter().any(|&(v, _)| inside[v]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningPath<T> {
    pub root: usize,
    pub target: usize,
    pub sequence: Vec<usize>,
    pub total_weight: T,
    pub highlighted: Vec<usize>,
}

/// The full outcome of planning for one student.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan<T> {
    pub unmastered: Vec<usize>,
    pub roots: Vec<usize>,
    pub surfaces: Vec<usize>,
    pub paths: Vec<LearningPath<T>>,
}

/// For each surface problem, the cheapest route from any root problem through unmastered
/// nodes only. Paths are ordered by target name; equal-weight roots resolve by name.
pub fn plan<T: Scalar>(
    dag: &Dag,
    annotations: &[CausalAnnotation<T>],
    state: &MasteryState,
    weighting: Weighting,
) -> Result<Plan<T>> {
    if state.mastered.len() != dag.len() {
        return Err(Error::Schema(format!(
            "mastery state has {} entries for {} nodes",
            state.mastered.len(),
            dag.len()
        )));
    }
    let graph = to_weighted(dag, annotations, weighting)?;
    let unmastered = unmastered_set(state);
    let induced = graph.induced(&membership(graph.len(), &unmastered));
    let by_name = |v: &mut Vec<usize>| v.sort_by(|&a, &b| graph.name(a).cmp(graph.name(b)));

    let mut roots = root_problems(&induced, &unmastered);
    let mut surfaces = surface_problems(&induced, &unmastered);
    by_name(&mut roots);
    by_name(&mut surfaces);

    let from_roots: Vec<ShortestPaths<T>> = roots.iter().map(|&r| shortest_paths_from(&induced, r)).collect();
    let mut paths = Vec::with_capacity(surfaces.len());
    for &target in &surfaces {
        let mut best: Option<(&ShortestPaths<T>, T)> = None;
        for sp in &from_roots {
            let d = sp.dist[target];
            if d.is_finite() && best.is_none_or(|(_, b)| d < b) {
                best = Some((sp, d));
            }
        }
        let (sp, total_weight) = best.expect("every node of a finite DAG is reachable from a source");
        let sequence = sp.path_to(target).expect("finite distance");
        paths.push(LearningPath {
            root: sp.source,
            target,
            highlighted: sequence.clone(),
            sequence,
            total_weight,
        });
    }
    Ok(Plan {
        unmastered,
        roots,
        surfaces,
        paths,
    })
}
