//! Soft edit distance: a smooth, differentiable approximation of the
//! Levenshtein distance between symbol sequences, with analytic gradients,
//! gradient-based consensus search and minibatch k-means clustering.

pub mod alphabet;
pub mod consensus;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradient;
mod kernel;
pub mod kmeans;
pub mod metric;

pub use alphabet::{decode_argmax, encode_one_hot, soften, Alphabet, SequenceEncoding};
pub use error::{Error, Result};
pub use metric::{
    distance_matrix, levenshtein, mismatch_cost, sed, sed_brute_force, sed_tables, sed_unbiased,
    SedParams, SedTables,
};
pub use consensus::{consensus_objective, optimize_consensus, CentroidLogits, ConsensusResult, OptimizerConfig};
pub use gradient::{finite_diff_grad, sed_value_grad, SedGradient};
pub use eval::{clustering_accuracy, consensus_quality, r_squared, EvalSummary};
pub use kmeans::{assign, kmeans, ClusterReport, KMeansConfig};
