// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("truncation budget insufficient: need N_trunc >= {required}, have {available}")]
    TruncationBudget { required: usize, available: usize },

    #[error("random series tail bound {tail_bound:.3e} exceeds tolerance {tolerance:.3e}; try prime cutoff {suggested_cutoff}")]
    Truncation {
        tail_bound: f64,
        tolerance: f64,
        suggested_cutoff: u64,
    },

    #[error("ill-conditioned evaluation: {0}")]
    Conditioning(String),

    /// `|L(s)|` fell below the conditioning floor, so `-L'/L` is not trustworthy.
    #[error("|L(s)| = {abs_l:.3e} is below the floor {floor:.3e} (zero of L nearby)")]
    NearZero { abs_l: f64, floor: f64 },

    #[error("contour passes within {min_abs:.3e} of a zero (margin {margin:.3e})")]
    ContourProximity { min_abs: f64, margin: f64 },

    #[error("accuracy target missed: {0}")]
    Accuracy(String),

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("cache entry {path} is corrupt: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit code reported by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Domain(_) => 1,
            Error::Indeterminate(_)
            | Error::ContourProximity { .. }
            | Error::Accuracy(_)
            | Error::NearZero { .. }
            | Error::Conditioning(_) => 2,
            Error::Resource(_) | Error::TruncationBudget { .. } | Error::Truncation { .. } => 3,
            Error::Cache { .. } | Error::Io(_) | Error::Json(_) => 3,
        }
    }

    /// True for numerical outcomes that could not be decided, as opposed to
    /// usage or resource failures.
    pub fn is_indeterminate(&self) -> bool {
        self.exit_code() == 2
    }
}

/// What to do with inputs outside the range where a bound is stated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangePolicy {
    /// Refuse with a domain error.
    #[default]
    Enforce,
    /// Compute anyway and mark the result as out of range.
    Report,
}
