//! Histogram construction, least-squares fitting of the closed-form
//! `f^(k)` to block-time histograms, transfer-time inference and
//! goodness-of-fit statistics.

mod fit;
mod gof;
mod histogram;
pub mod optimize;
mod transfer;

use thiserror::Error;

use crate::distributions::DistError;
use crate::kv::KvError;

pub use fit::{
    fit_fk, model_cdf_table, moment_initial_guess, AmplitudeMode, FitOptions, FitResult, LossWeighting,
};
pub use gof::{ks_statistic, ks_statistic_sorted, sample_skewness};
pub use histogram::{build_histogram, BinSpec, Histogram};
pub use optimize::Method;
pub use transfer::{derive_transfer_time, quorum_adjust, TransferEstimate, QUORUM_FACTOR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("histogram: {0}")]
    Histogram(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("cannot fit: {0}")]
    Unfittable(String),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Kv(#[from] KvError),
}

pub type Result<T, E = FitError> = std::result::Result<T, E>;
