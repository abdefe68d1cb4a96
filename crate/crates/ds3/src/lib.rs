//! Selecting representative source elements for a target set from pairwise
//! dissimilarities.
//!
//! Given an M×N matrix whose entry (i, j) scores how badly source element i
//! represents target element j, the library picks a small subset of source
//! rows that jointly encode every target column. Selection is cast as a
//! row-sparsity-regularized convex program over column-stochastic coefficient
//! matrices and solved with an alternating-direction method; utilities cover
//! regularization thresholds, outlier-tolerant variants, representative
//! extraction, target assignment, and an independent verification testbed.

pub mod error;
pub mod io;
pub mod matrix;
pub mod outlier;
pub mod prox;
pub mod regpath;
pub mod selection;
pub mod solver;
pub mod testbed;

pub use error::{Error, Result};
pub use io::{load_matrix, save_matrix, MatrixFormat};
pub use matrix::{DenseMatrix, DissimilarityMatrix, NormP};
pub use outlier::{outlier_weights, solve_with_outliers, OutlierConfig, OutlierSolution};
pub use regpath::{
    check_joint_partition, lambda_g, lambda_max, lambda_min, medoid, sweep, LambdaMaxResult,
    MedoidResult, PartitionCheck, PartitionSpec, PartitionViolation,
};
pub use selection::{
    assign, clustering_error, extract_representatives, hard_assign, soft_assign, Assignment,
    RepresentativeSet, DEFAULT_REP_THRESHOLD,
};
pub use solver::{objective, solve, step, Init, Solution, SolverSettings, SolverState};
pub use testbed::{
    brute_force_facility, certificate_check, certificate_check_rows, euclidean_dissimilarity,
    gen_gaussian_mixture, reference_solve, OracleReport, SyntheticScene,
    DEFAULT_REFERENCE_ITERATIONS,
};
