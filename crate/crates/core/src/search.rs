//! Steepest-ascent hill climbing over DAG space, maximizing BIC.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bn::{bic_score, ScoreCache, ScoredNetwork};
use crate::data::MasteryDataset;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    AddEdge,
    DeleteEdge,
    ReverseEdge,
}

/// A single-edge modification of a DAG, by node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    pub kind: MoveKind,
    pub parent: usize,
    pub child: usize,
}

impl Move {
    pub fn apply(&self, dag: &mut Dag) -> Result<()> {
        match self.kind {
            MoveKind::AddEdge => dag.add_edge(self.parent, self.child),
            MoveKind::DeleteEdge => dag.remove_edge(self.parent, self.child),
            MoveKind::ReverseEdge => dag.reverse_edge(self.parent, self.child),
        }
    }

    pub fn describe(&self, dag: &Dag) -> String {
        format!("{:?}({} -> {})", self.kind, dag.name(self.parent), dag.name(self.child))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub max_in_degree: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_in_degree: 4,
            max_iterations: 1000,
            seed: 0,
            restarts: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_in_degree == 0 || self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::Config(
                "max_in_degree, max_iterations and restarts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One accepted move and the network score after it.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep<T> {
    pub mv: Move,
    pub bic: T,
}

#[derive(Debug, Clone)]
pub struct SearchTrace<T> {
    pub steps: Vec<TraceStep<T>>,
    pub network: ScoredNetwork<T>,
    /// Stopped at `max_iterations` while an improving move still existed.
    pub truncated: bool,
    /// Which start produced `network`: 0 is the supplied initial graph.
    pub start_index: usize,
}

fn move_order(dag: &Dag, a: &Move, b: &Move) -> Ordering {
    a.kind
        .cmp(&b.kind)
        .then_with(|| dag.name(a.parent).cmp(dag.name(b.parent)))
        .then_with(|| dag.name(a.child).cmp(dag.name(b.child)))
}

/// All acyclic single-edge additions, deletions and reversals within the in-degree cap,
/// ordered by kind, then parent name, then child name.
#[allow(clippy::needless_range_loop)]
pub fn neighbors(dag: &Dag, config: &SearchConfig) -> Vec<Move> {
    let n = dag.len();
    let mut moves = Vec::new();
    let reach: Vec<Vec<bool>> = (0..n).map(|u| dag.descendants(u)).collect();
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            if dag.has_edge(u, v) {
                moves.push(Move {
                    kind: MoveKind::DeleteEdge,
                    parent: u,
                    child: v,
                });
                // u -> v can flip unless another directed route u ~> v exists.
                if dag.parents(u).len() < config.max_in_degree && !reaches_without_edge(dag, u, v) {
                    moves.push(Move {
                        kind: MoveKind::ReverseEdge,
                        parent: u,
                        child: v,
                    });
                }
            } else if !reach[v][u] && dag.parents(v).len() < config.max_in_degree {
                moves.push(Move {
                    kind: MoveKind::AddEdge,
                    parent: u,
                    child: v,
                });
            }
        }
    }
    moves.sort_by(|a, b| move_order(dag, a, b));
    moves
}

fn reaches_without_edge(dag: &Dag, from: usize, to: usize) -> bool {
    let n = dag.len();
    let children: Vec<Vec<usize>> = (0..n).map(|u| dag.children(u)).collect();
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = children[from].iter().copied().filter(|&c| c != to).collect();
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if !std::mem::replace(&mut seen[u], true) {
            stack.extend(children[u].iter().copied());
        }
    }
    false
}

/// Score change of `mv`, read from the family cache. Only the touched families change.
fn move_delta<T: Scalar>(
    cache: &mut ScoreCache<'_, T>,
    dag: &Dag,
    fams: &[T],
    mv: &Move,
) -> Result<T> {
    let (u, v) = (mv.parent, mv.child);
    let with = |ps: &[usize], x: usize| {
        let mut p = ps.to_vec();
        p.push(x);
        p
    };
    let without = |ps: &[usize], x: usize| ps.iter().copied().filter(|&p| p != x).collect::<Vec<_>>();
    Ok(match mv.kind {
        MoveKind::AddEdge => cache.family(v, &with(dag.parents(v), u))? - fams[v],
        MoveKind::DeleteEdge => cache.family(v, &without(dag.parents(v), u))? - fams[v],
        MoveKind::ReverseEdge => {
            cache.family(v, &without(dag.parents(v), u))? - fams[v]
                + cache.family(u, &with(dag.parents(u), v))?
                - fams[u]
        }
    })
}

fn improvement_tolerance<T: Scalar>(bic: T) -> T {
    T::epsilon() * T::lit(16.0) * bic.abs().max(T::one())
}

struct Climb<T> {
    steps: Vec<TraceStep<T>>,
    dag: Dag,
    bic: T,
    truncated: bool,
}

fn climb<T: Scalar>(cache: &mut ScoreCache<'_, T>, start: Dag, config: &SearchConfig) -> Result<Climb<T>> {
    let mut dag = start;
    let mut fams: Vec<T> = (0..dag.len())
        .map(|i| cache.family(i, dag.parents(i)))
        .collect::<Result<_>>()?;
    let mut bic: T = fams.iter().copied().sum();
    let mut steps = Vec::new();
    let mut truncated = false;
    loop {
        let mut best: Option<(Move, T)> = None;
        let tol = improvement_tolerance(bic);
        for mv in neighbors(&dag, config) {
            let delta = move_delta(cache, &dag, &fams, &mv)?;
            if delta > tol && best.is_none_or(|(_, d)| delta > d) {
                best = Some((mv, delta));
            }
        }
        let Some((mv, _)) = best else { break };
        if steps.len() >= config.max_iterations {
            truncated = true;
            break;
        }
        mv.apply(&mut dag)?;
        for i in [mv.parent, mv.child] {
            fams[i] = cache.family(i, dag.parents(i))?;
        }
        bic = fams.iter().copied().sum();
        steps.push(TraceStep { mv, bic });
    }
    Ok(Climb {
        steps,
        dag,
        bic,
        truncated,
    })
}

/// Random DAG by triangular sampling: shuffle the nodes, then keep each forward pair with
/// probability `density`, respecting the in-degree cap.
pub fn random_dag<R: Rng>(template: &Dag, density: f64, max_in_degree: usize, rng: &mut R) -> Dag {
    let mut order: Vec<usize> = (0..template.len()).collect();
    order.shuffle(rng);
    let mut dag = Dag::empty(template.nodes().to_vec());
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            let (p, c) = (order[a], order[b]);
            if rng.gen_bool(density) && dag.parents(c).len() < max_in_degree {
                dag.add_edge(p, c).expect("forward edge in a fixed order");
            }
        }
    }
    dag
}

const RESTART_DENSITY: f64 = 0.3;

/// Hill climbing from `initial`, plus `restarts − 1` seeded random starts; keeps the best.
pub fn hill_climb<T: Scalar>(
    data: &MasteryDataset,
    initial: &Dag,
    config: &SearchConfig,
) -> Result<SearchTrace<T>> {
    config.validate()?;
    if initial.nodes() != data.variables() {
        return Err(Error::Schema("initial graph does not match dataset variables".into()));
    }
    if initial.parents_exceed(config.max_in_degree) {
        return Err(Error::Config("initial graph violates max_in_degree".into()));
    }
    let mut cache = ScoreCache::new(data);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(usize, Climb<T>)> = None;
    for start_index in 0..config.restarts {
        let start = if start_index == 0 {
            initial.clone()
        } else {
            random_dag(initial, RESTART_DENSITY, config.max_in_degree, &mut rng)
        };
        let run = climb(&mut cache, start, config)?;
        if best.as_ref().is_none_or(|(_, b)| run.bic > b.bic) {
            best = Some((start_index, run));
        }
    }
    let (start_index, run) = best.expect("restarts ≥ 1");
    let network = bic_score(&run.dag, data)?;
    Ok(SearchTrace {
        steps: run.steps,
        network,
        truncated: run.truncated,
        start_index,
    })
}

/// Re-runs [`hill_climb`] from its own result until the score changes by less than `1e-9`.
pub fn search_until_stable<T: Scalar>(
    data: &MasteryDataset,
    initial: &Dag,
    config: &SearchConfig,
) -> Result<SearchTrace<T>> {
    let mut trace = hill_climb::<T>(data, initial, config)?;
    let stable = T::lit(1e-9);
    for round in 1..=config.max_iterations {
        let next_config = SearchConfig {
            seed: config.seed.wrapping_add(round as u64),
            ..config.clone()
        };
        let next = hill_climb::<T>(data, trace.network.dag(), &next_config)?;
        let change = next.network.bic - trace.network.bic;
        let done = change.abs() < stable;
        if change > T::zero() {
            trace.steps.extend(next.steps);
            trace.network = next.network;
            trace.truncated = next.truncated;
        }
        if done || change <= T::zero() {
            break;
        }
    }
    Ok(trace)
}

impl Dag {
    fn parents_exceed(&self, cap: usize) -> bool {
        (0..self.len()).any(|i| self.parents(i).len() > cap)
    }
}
