mod common;

use causal_kc::bn::family_score;
use causal_kc::graph::enumerate_dags;
use causal_kc::{bic_score, fit_mle, log_likelihood, Dag, MasteryDataset};
use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Σ over rows of ln P(row) under the fitted smoothing-0 CPTs.
fn row_log_likelihood(dag: &Dag, data: &MasteryDataset) -> f64 {
    let cpts = fit_mle::<f64>(dag, data, 0.0).unwrap();
    data.rows().map(|r| cpts.joint(r).ln()).sum()
}

#[test]
fn log_likelihood_matches_per_row_joint() {
    for seed in 0..10 {
        let data = random_three_node_data(seed, 300);
        for dag in enumerate_dags(data.variables()) {
            let ll: f64 = log_likelihood(&dag, &data).unwrap();
            let oracle = row_log_likelihood(&dag, &data);
            assert!((ll - oracle).abs() < 1e-9, "{ll} vs {oracle}");
            assert!(ll <= 0.0);
        }
    }
}

#[test]
fn empty_dag_wins_on_independent_uniform_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let vars = binary_vars(&["A", "B", "C"]);
    let rows = (0..20_000)
        .map(|_| (0..3).map(|_| rng.gen_range(0..2)).collect())
        .collect();
    let data = MasteryDataset::new(vars.clone(), rows).unwrap();
    let empty = bic_score::<f64>(&Dag::empty(vars.clone()), &data).unwrap().bic;
    let dags = enumerate_dags(&vars);
    assert_eq!(dags.len(), 25);
    for dag in dags.iter().filter(|d| d.n_edges() > 0) {
        let s = bic_score::<f64>(dag, &data).unwrap().bic;
        assert!(empty > s, "empty {empty} vs {s} for {:?}", dag.edges());
    }
}

#[test]
fn family_scores_sum_to_bic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let n_vars = rng.gen_range(2..=5);
        let vars: Vec<_> = (0..n_vars)
            .map(|v| causal_kc::Variable::new(format!("V{v}"), rng.gen_range(2..=3)).unwrap())
            .collect();
        let rows = (0..rng.gen_range(20..200))
            .map(|_| vars.iter().map(|v| rng.gen_range(0..v.cardinality)).collect())
            .collect();
        let data = MasteryDataset::new(vars.clone(), rows).unwrap();
        let dag = causal_kc::search::random_dag(&Dag::empty(vars), 0.5, 3, &mut rng);
        let s = bic_score::<f64>(&dag, &data).unwrap();
        let total: f64 = s.family_scores.iter().sum();
        assert!((total - s.bic).abs() < 1e-9, "case {i}");
        let recomputed: f64 = (0..dag.len())
            .map(|c| family_score::<f64>(&data, c, dag.parents(c)).unwrap())
            .sum();
        assert!((recomputed - s.bic).abs() < 1e-9);
        assert!((brute_force_bic(&dag, &data) - s.bic).abs() < 1e-8);
    }
}

#[test]
fn two_variable_score_equivalence() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vars = binary_vars(&["A", "B"]);
        let rows = (0..rng.gen_range(5..400))
            .map(|_| vec![rng.gen_range(0..2), rng.gen_range(0..2)])
            .collect();
        let data = MasteryDataset::new(vars.clone(), rows).unwrap();
        let ab = bic_score::<f64>(&Dag::from_edges(vars.clone(), &[(0, 1)]).unwrap(), &data).unwrap();
        let ba = bic_score::<f64>(&Dag::from_edges(vars, &[(1, 0)]).unwrap(), &data).unwrap();
        assert!((ab.bic - ba.bic).abs() < 1e-9);
    }
}

#[test]
fn bic_invariant_to_row_order() {
    let data = chain_data(3, 500);
    let dag = Dag::from_edges(data.variables().to_vec(), &[(0, 1), (1, 2)]).unwrap();
    let base = bic_score::<f64>(&dag, &data).unwrap().bic;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut idx: Vec<usize> = (0..data.n_rows()).collect();
    idx.shuffle(&mut rng);
    let shuffled = data.select_rows(&idx);
    let again = bic_score::<f64>(&dag, &shuffled).unwrap().bic;
    assert!((base - again).abs() < 1e-9);
}

#[test]
fn single_edge_change_alters_only_child_family() {
    let data = chain_data(4, 800);
    let vars = data.variables().to_vec();
    let before = bic_score::<f64>(&Dag::from_edges(vars.clone(), &[(0, 1)]).unwrap(), &data).unwrap();
    let after = bic_score::<f64>(&Dag::from_edges(vars, &[(0, 1), (1, 2)]).unwrap(), &data).unwrap();
    assert_eq!(before.family_scores[0], after.family_scores[0]);
    assert_eq!(before.family_scores[1], after.family_scores[1]);
    assert_ne!(before.family_scores[2], after.family_scores[2]);
    let delta = after.family_scores[2] - before.family_scores[2];
    assert!((after.bic - before.bic - delta).abs() < 1e-9);
}

#[test]
fn f32_scores_track_f64() {
    let data = chain_data(8, 400);
    for dag in enumerate_dags(data.variables()) {
        let a = bic_score::<f64>(&dag, &data).unwrap().bic;
        let b = bic_score::<f32>(&dag, &data).unwrap().bic;
        assert!(((b as f64) - a).abs() < 1e-3 * a.abs().max(1.0));
    }
}
