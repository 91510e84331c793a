//! Interventional inference by back-door adjustment, edge refutation and tie classification.
//!
//! All probabilities are computed by exact enumeration of the joint distribution the CPTs
//! define, so networks are limited to [`ENUMERATION_LIMIT`] nodes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bn::{bic_score, BayesNet, ScoredNetwork};
use crate::data::MasteryDataset;
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::Scalar;

pub const ENUMERATION_LIMIT: usize = 20;
const MAX_JOINT_STATES: usize = 1 << 24;

/// Which variables to condition on when adjusting for confounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustmentPolicy {
    /// `Pa(X)`: a valid back-door set when there are no latent confounders.
    #[default]
    Parents,
    /// Every node that is neither `X` nor one of its descendants.
    #[serde(rename = "nondescendants")]
    NonDescendants,
}

pub fn adjustment_set(dag: &Dag, treatment: usize, policy: AdjustmentPolicy) -> Vec<usize> {
    match policy {
        AdjustmentPolicy::Parents => dag.parents(treatment).to_vec(),
        AdjustmentPolicy::NonDescendants => {
            let desc = dag.descendants(treatment);
            (0..dag.len())
                .filter(|&i| i != treatment && !desc[i])
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterventionQuery {
    pub treatment: usize,
    pub value: usize,
    pub outcome: usize,
    pub policy: AdjustmentPolicy,
}

/// `P(outcome | do(treatment = value))`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterventionalDistribution<T> {
    pub outcome: usize,
    pub probabilities: Vec<T>,
    /// Some adjustment stratum had `P(z, x') = 0` and fell back to `P(y | z)`.
    pub positivity_fallback: bool,
}

pub(crate) fn check_capacity(dag: &Dag) -> Result<()> {
    if dag.len() > ENUMERATION_LIMIT {
        return Err(Error::Capacity {
            nodes: dag.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    let states = dag
        .nodes()
        .iter()
        .try_fold(1usize, |acc, v| acc.checked_mul(v.cardinality));
    match states {
        Some(s) if s <= MAX_JOINT_STATES => Ok(()),
        _ => Err(Error::Capacity {
            nodes: dag.len(),
            limit: ENUMERATION_LIMIT,
        }),
    }
}

/// Visits every full assignment in mixed-radix order (last variable fastest).
pub(crate) fn for_each_assignment(cards: &[usize], mut visit: impl FnMut(&[usize])) {
    let mut state = vec![0usize; cards.len()];
    loop {
        visit(&state);
        let mut i = cards.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            state[i] += 1;
            if state[i] < cards[i] {
                break;
            }
            state[i] = 0;
        }
    }
}

/// Back-door adjustment: `Σ_z P(Y | X = x', Z = z) · P(Z = z)`, exact over the joint.
pub fn do_distribution<T: Scalar>(
    net: &BayesNet<T>,
    query: &InterventionQuery,
) -> Result<InterventionalDistribution<T>> {
    let dag = &net.dag;
    let n = dag.len();
    let InterventionQuery {
        treatment,
        value,
        outcome,
        policy,
    } = *query;
    if treatment >= n || outcome >= n {
        return Err(Error::Argument("query variable out of range".into()));
    }
    if treatment == outcome {
        return Err(Error::Argument(format!(
            "treatment and outcome are both {}",
            dag.name(treatment)
        )));
    }
    if value >= dag.nodes()[treatment].cardinality {
        return Err(Error::Argument(format!(
            "state {value} out of range for {}",
            dag.name(treatment)
        )));
    }
    check_capacity(dag)?;

    let cards: Vec<usize> = dag.nodes().iter().map(|v| v.cardinality).collect();
    let z = adjustment_set(dag, treatment, policy);
    let z_cards: Vec<usize> = z.iter().map(|&i| cards[i]).collect();
    let nz: usize = z_cards.iter().product();
    let ry = cards[outcome];

    let mut p_z = vec![T::zero(); nz];
    let mut p_zy = vec![T::zero(); nz * ry];
    let mut p_zx = vec![T::zero(); nz];
    let mut p_zxy = vec![T::zero(); nz * ry];
    for_each_assignment(&cards, |a| {
        let p = net.cpts.joint(a);
        let j = z.iter().zip(&z_cards).fold(0, |acc, (&i, &r)| acc * r + a[i]);
        let y = a[outcome];
        p_z[j] = p_z[j] + p;
        p_zy[j * ry + y] = p_zy[j * ry + y] + p;
        if a[treatment] == value {
            p_zx[j] = p_zx[j] + p;
            p_zxy[j * ry + y] = p_zxy[j * ry + y] + p;
        }
    });

    let mut probabilities = vec![T::zero(); ry];
    let mut positivity_fallback = false;
    for j in 0..nz {
        if p_z[j] <= T::zero() {
            continue;
        }
        let (num, den) = if p_zx[j] > T::zero() {
            (&p_zxy[j * ry..(j + 1) * ry], p_zx[j])
        } else {
            positivity_fallback = true;
            (&p_zy[j * ry..(j + 1) * ry], p_z[j])
        };
        for (out, &c) in probabilities.iter_mut().zip(num) {
            *out = *out + p_z[j] * c / den;
        }
    }
    // Enumeration sums drift by a few ulps; renormalize so the result is a distribution.
    let total: T = probabilities.iter().copied().sum();
    if total > T::zero() {
        for p in &mut probabilities {
            *p = *p / total;
        }
    }
    Ok(InterventionalDistribution {
        outcome,
        probabilities,
        positivity_fallback,
    })
}

fn require_binary(dag: &Dag, i: usize) -> Result<()> {
    let v = &dag.nodes()[i];
    if v.cardinality != 2 {
        return Err(Error::UnsupportedCardinality {
            name: v.name.clone(),
            cardinality: v.cardinality,
        });
    }
    Ok(())
}

/// Average treatment effect plus whether either arm used the positivity fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effect<T> {
    pub ate: T,
    pub positivity_fallback: bool,
}

/// `P(Y=1 | do(X=1)) − P(Y=1 | do(X=0))` for binary `X`, `Y`.
pub fn ate<T: Scalar>(
    net: &BayesNet<T>,
    treatment: usize,
    outcome: usize,
    policy: AdjustmentPolicy,
) -> Result<T> {
    effect(net, treatment, outcome, policy).map(|e| e.ate)
}

pub fn effect<T: Scalar>(
    net: &BayesNet<T>,
    treatment: usize,
    outcome: usize,
    policy: AdjustmentPolicy,
) -> Result<Effect<T>> {
    if treatment >= net.dag.len() || outcome >= net.dag.len() {
        return Err(Error::Argument("query variable out of range".into()));
    }
    require_binary(&net.dag, treatment)?;
    require_binary(&net.dag, outcome)?;
    let arm = |value| {
        do_distribution(
            net,
            &InterventionQuery {
                treatment,
                value,
                outcome,
                policy,
            },
        )
    };
    let treated = arm(1)?;
    let control = arm(0)?;
    Ok(Effect {
        ate: treated.probabilities[1] - control.probabilities[1],
        positivity_fallback: treated.positivity_fallback || control.positivity_fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tie {
    Strong,
    Weak,
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieThresholds {
    pub tau_effect: f64,
    pub tau_cred: f64,
    pub tau_removal: f64,
    pub eps_effect: f64,
}

impl Default for TieThresholds {
    fn default() -> Self {
        TieThresholds {
            tau_effect: 0.2,
            tau_cred: 0.95,
            tau_removal: 0.5,
            eps_effect: 0.05,
        }
    }
}

impl TieThresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.tau_effect) && unit(self.tau_cred) && unit(self.tau_removal) && unit(self.eps_effect)) {
            return Err(Error::Config("tie thresholds must lie in [0, 1]".into()));
        }
        if self.eps_effect > self.tau_effect || self.tau_removal > self.tau_cred {
            return Err(Error::Config(
                "need eps_effect ≤ tau_effect and tau_removal ≤ tau_cred".into(),
            ));
        }
        Ok(())
    }
}

/// Strong when both the effect and its credibility clear the upper thresholds; Removed when
/// either falls below the lower ones; Weak in between.
pub fn classify_edge(effect: f64, credibility: f64, th: &TieThresholds) -> Tie {
    let magnitude = effect.abs();
    if magnitude >= th.tau_effect && credibility >= th.tau_cred {
        Tie::Strong
    } else if magnitude < th.eps_effect || credibility < th.tau_removal {
        Tie::Removed
    } else {
        Tie::Weak
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefuteConfig {
    pub bootstrap: usize,
    pub thresholds: TieThresholds,
    pub seed: u64,
    pub policy: AdjustmentPolicy,
    /// Additive smoothing for inference-time CPTs.
    pub smoothing: f64,
}

impl Default for RefuteConfig {
    fn default() -> Self {
        RefuteConfig {
            bootstrap: 200,
            thresholds: TieThresholds::default(),
            seed: 0,
            policy: AdjustmentPolicy::Parents,
            smoothing: 1.0,
        }
    }
}

impl RefuteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bootstrap < 10 {
            return Err(Error::Config(format!(
                "bootstrap count {} below the minimum of 10",
                self.bootstrap
            )));
        }
        if self.smoothing.is_nan() || self.smoothing < 0.0 {
            return Err(Error::Config("smoothing must be ≥ 0".into()));
        }
        self.thresholds.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefutationReport<T> {
    pub edge: (usize, usize),
    pub original_effect: T,
    pub placebo_effect: T,
    pub bootstrap_effects: Vec<T>,
    pub credibility: f64,
    pub verdict: Tie,
    pub positivity_fallback: bool,
}

const PLACEBO_STREAM: u64 = u64::MAX;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fraction of resampled effects that share the original's sign and reach `eps`.
pub fn sign_stability<T: Scalar>(original: T, resampled: &[T], eps: f64) -> f64 {
    if resampled.is_empty() {
        return 0.0;
    }
    let sign = |x: T| if x > T::zero() { 1 } else if x < T::zero() { -1 } else { 0 };
    let s0 = sign(original);
    let agree = resampled
        .iter()
        .filter(|&&e| sign(e) == s0 && s0 != 0 && e.abs().as_f64() >= eps)
        .count();
    agree as f64 / resampled.len() as f64
}

/// Re-estimates the effect of `edge` under row bootstrap and a permuted-treatment placebo.
///
/// Resample `b` draws from its own ChaCha stream, so the report is identical however the
/// resamples are scheduled.
pub fn refute_edge<T: Scalar>(
    data: &MasteryDataset,
    dag: &Dag,
    edge: (usize, usize),
    config: &RefuteConfig,
) -> Result<RefutationReport<T>> {
    config.validate()?;
    let (treatment, outcome) = edge;
    if treatment >= dag.len() || outcome >= dag.len() || !dag.has_edge(treatment, outcome) {
        return Err(Error::Argument("edge not present in network".into()));
    }
    let smoothing = T::lit(config.smoothing);
    let fitted = BayesNet::fit(dag.clone(), data, smoothing)?;
    let original = effect(&fitted, treatment, outcome, config.policy)?;

    let n = data.n_rows();
    let bootstrap_effects: Vec<T> = (0..config.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(config.seed, b as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let resampled = data.select_rows(&idx);
            let net = BayesNet::fit(dag.clone(), &resampled, smoothing)?;
            ate(&net, treatment, outcome, config.policy)
        })
        .collect::<Result<_>>()?;

    let mut rng = stream_rng(config.seed, PLACEBO_STREAM);
    let mut column = data.column(treatment);
    column.shuffle(&mut rng);
    let placebo_data = data.with_column(treatment, &column)?;
    let placebo_net = BayesNet::fit(dag.clone(), &placebo_data, smoothing)?;
    let placebo_effect = ate(&placebo_net, treatment, outcome, config.policy)?;

    let credibility = sign_stability(original.ate, &bootstrap_effects, config.thresholds.eps_effect);
    let verdict = classify_edge(original.ate.as_f64(), credibility, &config.thresholds);
    Ok(RefutationReport {
        edge,
        original_effect: original.ate,
        placebo_effect,
        bootstrap_effects,
        credibility,
        verdict,
        positivity_fallback: original.positivity_fallback,
    })
}

/// Per-edge causal verdict attached to a network.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalAnnotation<T> {
    pub edge: (usize, usize),
    pub effect: T,
    pub credibility: f64,
    pub tie: Tie,
}

impl<T: Copy> From<&RefutationReport<T>> for CausalAnnotation<T> {
    fn from(r: &RefutationReport<T>) -> Self {
        CausalAnnotation {
            edge: r.edge,
            effect: r.original_effect,
            credibility: r.credibility,
            tie: r.verdict,
        }
    }
}

/// A scored network after causal analysis. `annotations` keeps Removed edges for the record
/// even though they are no longer in the graph.
#[derive(Debug, Clone)]
pub struct AnnotatedNetwork<T> {
    pub scored: ScoredNetwork<T>,
    pub annotations: Vec<CausalAnnotation<T>>,
    pub reports: Vec<RefutationReport<T>>,
    pub warnings: Vec<String>,
}

impl<T> AnnotatedNetwork<T> {
    pub fn dag(&self) -> &Dag {
        self.scored.dag()
    }

    /// Annotation for an edge still present in the graph.
    pub fn annotation(&self, parent: usize, child: usize) -> Option<&CausalAnnotation<T>> {
        self.annotations
            .iter()
            .find(|a| a.edge == (parent, child) && a.tie != Tie::Removed)
    }
}

/// Drops Removed edges, refits the CPTs on the reduced structure and attaches the annotations.
pub fn update_network<T: Scalar>(
    scored: &ScoredNetwork<T>,
    data: &MasteryDataset,
    annotations: Vec<CausalAnnotation<T>>,
) -> Result<AnnotatedNetwork<T>> {
    let mut dag = scored.dag().clone();
    for a in &annotations {
        let (p, c) = a.edge;
        if p >= dag.len() || c >= dag.len() || !scored.dag().has_edge(p, c) {
            return Err(Error::Argument(format!(
                "annotation references absent edge {p} -> {c}"
            )));
        }
        if a.tie == Tie::Removed {
            dag.remove_edge(p, c)?;
        }
    }
    let rescored = if dag == *scored.dag() {
        scored.clone()
    } else {
        bic_score(&dag, data)?
    };
    Ok(AnnotatedNetwork {
        scored: rescored,
        annotations,
        reports: Vec::new(),
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeEdit {
    Add(usize, usize),
    Remove(usize, usize),
}

/// Interventional distributions on the original structure and on an edited copy, each with
/// CPTs fitted from `data`.
pub fn counterfactual_experiment<T: Scalar>(
    dag: &Dag,
    edits: &[EdgeEdit],
    query: &InterventionQuery,
    data: &MasteryDataset,
    smoothing: T,
) -> Result<(InterventionalDistribution<T>, InterventionalDistribution<T>)> {
    let mut edited = dag.clone();
    for edit in edits {
        match *edit {
            EdgeEdit::Add(p, c) => edited.add_edge(p, c)?,
            EdgeEdit::Remove(p, c) => edited.remove_edge(p, c)?,
        }
    }
    let original = do_distribution(&BayesNet::fit(dag.clone(), data, smoothing)?, query)?;
    let changed = do_distribution(&BayesNet::fit(edited, data, smoothing)?, query)?;
    Ok((original, changed))
}
