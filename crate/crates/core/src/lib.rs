//! Causal knowledge-component networks.
//!
//! Learns a Bayesian network over knowledge components from student mastery data by
//! BIC-scored hill climbing, estimates interventional effects along its edges with back-door
//! adjustment, classifies each edge as a strong tie, weak tie or removed by bootstrap and
//! placebo refutation, and plans root-cause-first learning paths over the result.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! it to `f64`, which is what the command pipeline uses.

pub mod bn;
pub mod causal;
pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod path;
pub mod pipeline;
pub mod scalar;
pub mod search;
pub mod simulate;

pub use bn::{bic_score, fit_mle, log_likelihood, param_count, BayesNet, Cpt, CptSet, ScoredNetwork};
pub use causal::{
    adjustment_set, ate, classify_edge, counterfactual_experiment, do_distribution, refute_edge,
    update_network, AdjustmentPolicy, AnnotatedNetwork, CausalAnnotation, EdgeEdit,
    InterventionQuery, InterventionalDistribution, RefutationReport, RefuteConfig, Tie,
    TieThresholds,
};
pub use data::{contingency, ContingencyTable, MasteryDataset, PerformanceRecord, Variable};
pub use error::{Error, ErrorKind, Result};
pub use graph::{is_acyclic, Dag};
pub use path::{plan, shortest_path, LearningPath, MasteryState, Plan, WeightedDigraph, Weighting};
pub use scalar::Scalar;
pub use search::{hill_climb, neighbors, Move, MoveKind, SearchConfig, SearchTrace};
pub use simulate::{sample, true_ate, GroundTruth};

pub type Network = BayesNet<f64>;
pub type Cpts = CptSet<f64>;
pub type Scored = ScoredNetwork<f64>;
pub type Annotated = AnnotatedNetwork<f64>;
pub type Annotation = CausalAnnotation<f64>;
pub type Report = RefutationReport<f64>;
pub type Distribution = InterventionalDistribution<f64>;
pub type Truth = GroundTruth<f64>;
pub type Trace = SearchTrace<f64>;
pub type Path = LearningPath<f64>;
pub type Digraph = WeightedDigraph<f64>;
