//! Clustering nonnegative data drawn from disjoint low-dimensional subspaces
//! through NMF, and block-wise completion of partially observed matrices
//! with that structure.
//!
//! * [`nmf`]: multiplicative-update NMF and its masked completion variant.
//! * [`cluster`]: k-means on the rows of the NMF weight matrix.
//! * [`completion`]: block completion and its row bookkeeping.
//! * [`subspace`]: synthetic two-subspace data and the correlation measure.
//! * [`experiment`]: seeded Monte Carlo sweeps behind the `nmf-subspace` CLI.

// `!(x >= 0.0)` is how NaN inputs get rejected alongside negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod completion;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod mask;
pub mod matrix;
pub mod nmf;
pub mod seed;
pub mod subspace;

pub use cluster::{cluster_via_nmf, clustering_error, ClusterAssignment};
pub use completion::{block_completion, derive_submask, reassemble, BlockCompletion, CompletionReport};
pub use error::{Error, Result};
pub use kmeans::{kmeans, KMeansSettings};
pub use linalg::matrix_exponential;
pub use mask::{bernoulli_mask, Mask};
pub use matrix::{frobenius_norm, relative_error, uniform_random_matrix, DataMatrix};
pub use nmf::{basic_completion, mc_nmf, nmf_factorize, Factorization, SolverSettings};
pub use seed::SeedSpec;
pub use subspace::{
    correlation_measure, generate_block_dataset, orthogonal_projector, random_skew_symmetric, rotate_subspace,
    BlockModel, NegativeEntries, Subspace, SyntheticDataset,
};
