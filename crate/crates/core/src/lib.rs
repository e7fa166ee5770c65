//! Meter-to-transformer mapping from smart-meter voltage time series.
//!
//! The pipeline builds a Gaussian similarity graph over meter voltage
//! profiles, embeds the meters with the eigenvectors of the unnormalized
//! graph Laplacian, labels the embedded rows with k-means++, and maps every
//! cluster to its nearest service transformer. A second, geographic view can
//! be fused in through co-regularized spectral clustering, and the
//! [`guarantee`] module certifies a result numerically via eigengap and
//! invariant-subspace perturbation bounds.

pub mod cli;
pub mod cluster;
pub mod error;
pub mod feeder_sim;
pub mod geo;
pub mod graph;
pub mod guarantee;
pub mod ingest;
pub mod linalg;
pub mod multiview;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};

/// Tool version embedded into every JSON output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
