//! Ground-truth networks, ancestral sampling, and exact interventions on a mutilated graph.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bn::{BayesNet, Cpt, CptSet};
use crate::causal::{check_capacity, for_each_assignment};
use crate::data::{MasteryDataset, Provenance, Variable};
use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::scalar::Scalar;
use crate::search::random_dag;

/// Identity of the sampling generator, recorded in dataset provenance.
pub const GENERATOR_ID: &str = "rand_chacha-0.3/ChaCha8Rng/u53-uniform/v1";

/// A network with specified (not fitted) parameters, used to synthesize cohorts.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    pub net: BayesNet<T>,
    pub seed: u64,
}

/// Uniform in [0, 1) from the top 53 bits of one `u64`, independent of `rand`'s distribution code.
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Ancestral sampling in topological order; identical `(truth, n)` gives identical rows.
pub fn sample<T: Scalar>(truth: &GroundTruth<T>, n: usize) -> Result<MasteryDataset> {
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    let dag = &truth.net.dag;
    let order = dag.topological_order();
    let width = dag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    let mut cells = vec![0usize; n * width];
    for row in cells.chunks_exact_mut(width) {
        for &i in &order {
            let cpt = &truth.net.cpts.tables[i];
            let probs = cpt.row(cpt.config_of(row));
            let u = unit_uniform(&mut rng);
            let mut acc = 0.0;
            let mut state = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p.as_f64();
                if u < acc {
                    state = k;
                    break;
                }
            }
            row[i] = state;
        }
    }
    Ok(MasteryDataset::from_cells(dag.nodes().to_vec(), cells)?.with_provenance(Provenance {
        generator: GENERATOR_ID.to_owned(),
        seed: truth.seed,
    }))
}

/// `P(outcome | do(treatment = value))` by deleting the treatment's incoming edges, clamping
/// it, and marginalizing the resulting joint.
pub fn interventional_by_mutilation<T: Scalar>(
    net: &BayesNet<T>,
    treatment: usize,
    value: usize,
    outcome: usize,
) -> Result<Vec<T>> {
    let dag = &net.dag;
    check_capacity(dag)?;
    if treatment >= dag.len() || outcome >= dag.len() {
        return Err(Error::Argument("query variable out of range".into()));
    }
    let cards: Vec<usize> = dag.nodes().iter().map(|v| v.cardinality).collect();
    let mut out = vec![T::zero(); cards[outcome]];
    for_each_assignment(&cards, |a| {
        if a[treatment] != value {
            return;
        }
        let p = net
            .cpts
            .tables
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != treatment)
            .map(|(i, t)| t.prob(t.config_of(a), a[i]))
            .fold(T::one(), |x, y| x * y);
        out[a[outcome]] = out[a[outcome]] + p;
    });
    Ok(out)
}

/// Exact ATE on the true parameters via the mutilated graph.
pub fn true_ate<T: Scalar>(truth: &GroundTruth<T>, treatment: usize, outcome: usize) -> Result<T> {
    for &i in &[treatment, outcome] {
        let v = truth
            .net
            .dag
            .nodes()
            .get(i)
            .ok_or_else(|| Error::Argument("query variable out of range".into()))?;
        if v.cardinality != 2 {
            return Err(Error::UnsupportedCardinality {
                name: v.name.clone(),
                cardinality: v.cardinality,
            });
        }
    }
    let treated = interventional_by_mutilation(&truth.net, treatment, 1, outcome)?;
    let control = interventional_by_mutilation(&truth.net, treatment, 0, outcome)?;
    Ok(treated[1] - control[1])
}

/// Random binary ground truth: triangular DAG with the given edge density and CPT rows whose
/// success probability is drawn from `[0.05, 0.95]`.
pub fn random_ground_truth<T: Scalar, R: Rng>(
    n_nodes: usize,
    density: f64,
    max_in_degree: usize,
    seed: u64,
    rng: &mut R,
) -> GroundTruth<T> {
    let vars: Vec<Variable> = (0..n_nodes).map(|i| Variable::binary(format!("K{i}"))).collect();
    let dag = random_dag(&Dag::empty(vars), density, max_in_degree, rng);
    let tables = (0..n_nodes)
        .map(|i| {
            let parents = dag.parents(i).to_vec();
            let cards = vec![2; parents.len()];
            let rows: Vec<Vec<T>> = (0..1usize << parents.len())
                .map(|_| {
                    let p1 = T::lit(rng.gen_range(0.05..0.95));
                    vec![T::one() - p1, p1]
                })
                .collect();
            Cpt::from_rows(parents, cards, 2, &rows).expect("well-formed random CPT")
        })
        .collect();
    GroundTruth {
        net: BayesNet::new(dag, CptSet { tables }).expect("CPTs built from the DAG"),
        seed,
    }
}
