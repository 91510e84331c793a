//! Conditional probability tables, maximum-likelihood fitting and the BIC score.

use std::collections::HashMap;

use crate::data::{contingency, ContingencyTable, MasteryDataset};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::{xlogx_ratio, Scalar};

/// `P(X_i = k | Pa(X_i) = j)` for one node, `q_i` rows of `r_i` entries.
///
/// Rows follow the mixed-radix order of the node's parents (sorted by node index,
/// first parent most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt<T> {
    pub parents: Vec<usize>,
    pub parent_cards: Vec<usize>,
    pub cardinality: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Cpt<T> {
    /// Builds a table from explicit rows, checking shape and normalization.
    pub fn from_rows(
        parents: Vec<usize>,
        parent_cards: Vec<usize>,
        cardinality: usize,
        rows: &[Vec<T>],
    ) -> Result<Self> {
        let q: usize = parent_cards.iter().product();
        if rows.len() != q {
            return Err(Error::Schema(format!(
                "CPT has {} rows, expected {q} parent configurations",
                rows.len()
            )));
        }
        let tol = T::lit(1e-6).max(T::epsilon() * T::lit(64.0));
        let mut probs = Vec::with_capacity(q * cardinality);
        for row in rows {
            if row.len() != cardinality {
                return Err(Error::Schema(format!(
                    "CPT row has {} entries, expected {cardinality}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::Schema("CPT entry outside [0, 1]".into()));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::Schema(format!("CPT row sums to {s}, not 1")));
            }
            probs.extend_from_slice(row);
        }
        Ok(Cpt {
            parents,
            parent_cards,
            cardinality,
            probs,
        })
    }

    pub fn n_configs(&self) -> usize {
        self.parent_cards.iter().product()
    }

    pub fn prob(&self, config: usize, state: usize) -> T {
        self.probs[config * self.cardinality + state]
    }

    pub fn row(&self, config: usize) -> &[T] {
        &self.probs[config * self.cardinality..(config + 1) * self.cardinality]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.probs.chunks_exact(self.cardinality)
    }

    /// Row index for a full assignment of all variables.
    pub fn config_of(&self, assignment: &[usize]) -> usize {
        self.parents
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&p, &r)| acc * r + assignment[p])
    }

    fn from_counts(table: &ContingencyTable, smoothing: T) -> Self {
        let r = table.child_card;
        let mut probs = Vec::with_capacity(table.n_configs() * r);
        let uniform = T::one() / T::from_usize(r).expect("cardinality");
        for counts in table.rows() {
            let n_j: u64 = counts.iter().sum();
            let denom = T::from_count(n_j) + T::from_usize(r).expect("cardinality") * smoothing;
            if denom > T::zero() {
                probs.extend(counts.iter().map(|&c| (T::from_count(c) + smoothing) / denom));
            } else {
                probs.extend(std::iter::repeat_n(uniform, r));
            }
        }
        Cpt {
            parents: table.parents.clone(),
            parent_cards: table.parent_cards.clone(),
            cardinality: r,
            probs,
        }
    }
}

/// Parameters θ: one [`Cpt`] per node, indexed like the DAG's nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CptSet<T> {
    pub tables: Vec<Cpt<T>>,
}

impl<T: Scalar> CptSet<T> {
    /// Joint probability of a full assignment, `Π_i P(x_i | pa_i)`.
    pub fn joint(&self, assignment: &[usize]) -> T {
        self.tables
            .iter()
            .enumerate()
            .map(|(i, t)| t.prob(t.config_of(assignment), assignment[i]))
            .fold(T::one(), |a, b| a * b)
    }

    /// Checks that every table's parent set matches the DAG.
    pub fn check_against(&self, dag: &Dag) -> Result<()> {
        if self.tables.len() != dag.len() {
            return Err(Error::Schema(format!(
                "{} CPTs for {} nodes",
                self.tables.len(),
                dag.len()
            )));
        }
        for (i, t) in self.tables.iter().enumerate() {
            if t.parents != dag.parents(i) || t.cardinality != dag.nodes()[i].cardinality {
                return Err(Error::Schema(format!(
                    "CPT for {} does not match its parent set",
                    dag.name(i)
                )));
            }
        }
        Ok(())
    }
}

/// A DAG together with its CPTs: a fully specified Bayesian network.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet<T> {
    pub dag: Dag,
    pub cpts: CptSet<T>,
}

impl<T: Scalar> BayesNet<T> {
    pub fn new(dag: Dag, cpts: CptSet<T>) -> Result<Self> {
        cpts.check_against(&dag)?;
        Ok(BayesNet { dag, cpts })
    }

    pub fn fit(dag: Dag, data: &MasteryDataset, smoothing: T) -> Result<Self> {
        let cpts = fit_mle(&dag, data, smoothing)?;
        Ok(BayesNet { dag, cpts })
    }
}

/// Scored structure: MLE parameters, BIC, and per-node contributions summing to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredNetwork<T> {
    pub network: BayesNet<T>,
    pub bic: T,
    pub family_scores: Vec<T>,
}

impl<T> ScoredNetwork<T> {
    pub fn dag(&self) -> &Dag {
        &self.network.dag
    }
}

fn check_matches(dag: &Dag, data: &MasteryDataset) -> Result<()> {
    if dag.nodes() != data.variables() {
        return Err(Error::Schema(
            "network nodes do not match dataset variables (names, order, cardinalities)".into(),
        ));
    }
    Ok(())
}

/// Fits `P(X_i=k | j) = (N_ijk + s) / (N_ij + r_i·s)`, uniform for unobserved configurations when `s = 0`.
pub fn fit_mle<T: Scalar>(dag: &Dag, data: &MasteryDataset, smoothing: T) -> Result<CptSet<T>> {
    check_matches(dag, data)?;
    if smoothing.is_nan() || smoothing < T::zero() {
        return Err(Error::Config("smoothing must be ≥ 0".into()));
    }
    let tables = (0..dag.len())
        .map(|i| contingency(data, i, dag.parents(i)).map(|t| Cpt::from_counts(&t, smoothing)))
        .collect::<Result<_>>()?;
    Ok(CptSet { tables })
}

/// Node-wise log-likelihood `Σ_j Σ_k N_ijk ln(N_ijk / N_ij)` under the MLE.
fn family_log_likelihood<T: Scalar>(table: &ContingencyTable) -> T {
    table
        .rows()
        .map(|counts| {
            let n_j: u64 = counts.iter().sum();
            counts.iter().map(|&c| xlogx_ratio::<T>(c, n_j)).sum::<T>()
        })
        .sum()
}

/// `ln P(D | G, θ̂)` with θ̂ the unsmoothed MLE; natural log, `0·ln 0 = 0`.
pub fn log_likelihood<T: Scalar>(dag: &Dag, data: &MasteryDataset) -> Result<T> {
    check_matches(dag, data)?;
    (0..dag.len())
        .map(|i| contingency(data, i, dag.parents(i)).map(|t| family_log_likelihood::<T>(&t)))
        .sum()
}

/// `|θ| = Σ_i q_i (r_i − 1)`.
pub fn param_count(dag: &Dag) -> usize {
    (0..dag.len())
        .map(|i| family_param_count(dag, i, dag.parents(i)))
        .sum()
}

fn family_param_count(dag: &Dag, child: usize, parents: &[usize]) -> usize {
    let q: usize = parents.iter().map(|&p| dag.nodes()[p].cardinality).product();
    q * (dag.nodes()[child].cardinality - 1)
}

/// BIC contribution of one family: its likelihood terms minus `q_i(r_i−1)/2 · ln N`.
pub fn family_score<T: Scalar>(data: &MasteryDataset, child: usize, parents: &[usize]) -> Result<T> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset("BIC needs N ≥ 1".into()));
    }
    let table = contingency(data, child, parents)?;
    let k = table.n_configs() * (table.child_card - 1);
    let penalty = T::from_usize(k).expect("param count") / T::lit(2.0)
        * T::from_usize(n).expect("row count").ln();
    Ok(family_log_likelihood::<T>(&table) - penalty)
}

/// `BIC(G, θ̂, D) = ln P(D | G, θ̂) − |θ|/2 · ln N`; higher is better.
pub fn bic_score<T: Scalar>(dag: &Dag, data: &MasteryDataset) -> Result<ScoredNetwork<T>> {
    check_matches(dag, data)?;
    let family_scores: Vec<T> = (0..dag.len())
        .map(|i| family_score(data, i, dag.parents(i)))
        .collect::<Result<_>>()?;
    let bic = family_scores.iter().copied().sum();
    let cpts = fit_mle(dag, data, T::zero())?;
    Ok(ScoredNetwork {
        network: BayesNet {
            dag: dag.clone(),
            cpts,
        },
        bic,
        family_scores,
    })
}

/// Memoized family scores over one dataset, keyed by (child, sorted parent set).
pub struct ScoreCache<'a, T> {
    data: &'a MasteryDataset,
    cache: HashMap<(usize, Vec<usize>), T>,
}

impl<'a, T: Scalar> ScoreCache<'a, T> {
    pub fn new(data: &'a MasteryDataset) -> Self {
        ScoreCache {
            data,
            cache: HashMap::new(),
        }
    }

    pub fn data(&self) -> &'a MasteryDataset {
        self.data
    }

    pub fn family(&mut self, child: usize, parents: &[usize]) -> Result<T> {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(&s) = self.cache.get(&(child, key.clone())) {
            return Ok(s);
        }
        let s = family_score(self.data, child, &key)?;
        self.cache.insert((child, key), s);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}
