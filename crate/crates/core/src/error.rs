// Copyright 2026 The nvphase Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown level `{0}` (expected one of G0, GM, GP, A2, EY)")]
    UnknownLevel(String),

    #[error("unknown transition `{0}` (allowed: G0-GM, G0-GP, GM-A2, GP-A2, G0-EY)")]
    UnknownTransition(String),

    #[error("transition {lower}-{upper} is not allowed (allowed: G0-GM, G0-GP, GM-A2, GP-A2, G0-EY)")]
    DisallowedTransition { lower: String, upper: String },

    #[error("more than one field drives transition {0}")]
    DuplicateTransition(String),

    #[error("fields on a closed loop of transitions have inconsistent detunings (mismatch {0:.3e} MHz)")]
    InconsistentFrame(f64),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("trace drift {drift:.3e} exceeds tolerance {tol:.1e} in segment {segment}")]
    TraceDrift { segment: usize, drift: f64, tol: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("sequence format: {0}")]
    SequenceFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (integration drift, fits,
    /// calibration) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TraceDrift { .. } | Error::Fit(_) | Error::Calibration(_)
        )
    }
}
