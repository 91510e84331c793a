//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use causal_kc::graph::enumerate_dags;
use causal_kc::io::NetworkFile;
use causal_kc::simulate::random_ground_truth;
use causal_kc::{sample, Dag, GroundTruth, MasteryDataset, Variable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn binary_vars(names: &[&str]) -> Vec<Variable> {
    names.iter().map(|n| Variable::binary(*n)).collect()
}

pub fn chain_truth(seed: u64) -> GroundTruth<f64> {
    NetworkFile::load(fixture("chain_truth.json"))
        .unwrap()
        .ground_truth(seed)
        .unwrap()
}

pub fn chain_data(seed: u64, n: usize) -> MasteryDataset {
    sample(&chain_truth(seed), n).unwrap()
}

/// A random 3-node binary ground truth and an n-row sample from it.
pub fn random_three_node_data(seed: u64, n: usize) -> MasteryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = random_ground_truth::<f64, _>(3, 0.5, 2, seed, &mut rng);
    sample(&truth, n).unwrap()
}

/// Brute-force BIC: count each family with a hash map, then sum per-row log-probabilities
/// of the plug-in MLE and subtract `Σ q_i (r_i − 1) / 2 · ln N`.
pub fn brute_force_bic(dag: &Dag, data: &MasteryDataset) -> f64 {
    let n = data.n_rows();
    let k = dag.len();
    let mut joint: Vec<HashMap<(Vec<usize>, usize), usize>> = vec![HashMap::new(); k];
    let mut marg: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); k];
    for row in data.rows() {
        for i in 0..k {
            let pa: Vec<usize> = dag.parents(i).iter().map(|&p| row[p]).collect();
            *joint[i].entry((pa.clone(), row[i])).or_default() += 1;
            *marg[i].entry(pa).or_default() += 1;
        }
    }
    let mut ll = 0.0;
    for row in data.rows() {
        for i in 0..k {
            let pa: Vec<usize> = dag.parents(i).iter().map(|&p| row[p]).collect();
            let nijk = joint[i][&(pa.clone(), row[i])] as f64;
            let nij = marg[i][&pa] as f64;
            ll += (nijk / nij).ln();
        }
    }
    let mut params = 0usize;
    for i in 0..k {
        let mut q = 1;
        for &p in dag.parents(i) {
            q *= dag.nodes()[p].cardinality;
        }
        params += q * (dag.nodes()[i].cardinality - 1);
    }
    ll - params as f64 / 2.0 * (n as f64).ln()
}

/// Best BIC over every DAG on the dataset's variables, by the brute-force scorer.
pub fn exhaustive_best_bic(data: &MasteryDataset) -> (f64, Dag) {
    enumerate_dags(data.variables())
        .into_iter()
        .map(|d| (brute_force_bic(&d, data), d))
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .unwrap()
}

/// All-pairs shortest distances; `f64::INFINITY` when unreachable.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(u, v, w) in edges {
        if w < d[u][v] {
            d[u][v] = w;
        }
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][m] + d[m][j] < d[i][j] {
                    d[i][j] = d[i][m] + d[m][j];
                }
            }
        }
    }
    d
}

/// Random digraph (cycles allowed) with weights in [0, 1].
pub fn random_digraph(rng: &mut ChaCha8Rng, max_n: usize) -> (usize, Vec<(usize, usize, f64)>) {
    use rand::Rng;
    let n = rng.gen_range(1..=max_n);
    let p = rng.gen_range(0.05..0.5);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(p) {
                edges.push((u, v, rng.gen_range(0.0..=1.0)));
            }
        }
    }
    (n, edges)
}
