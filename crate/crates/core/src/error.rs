// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coincident spins")]
    CoincidentSpins,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("site {site} out of range for {spins} spins")]
    SiteOutOfRange { site: usize, spins: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{spins} spins exceeds the dense-matrix cap of {cap}")]
    DimensionCap { spins: usize, cap: usize },
    #[error("operator is not Hermitian (asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },
    #[error("operator is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("no spherical tensor T({l},{m}) for label {label}")]
    InvalidTensor { l: i32, m: i32, label: String },
    #[error("singular timing system (condition number {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("chain positions are not strictly monotone along the chain axis")]
    NonMonotone,
    #[error("candidate rotation set is empty")]
    EmptyCandidates,
    #[error("network has no stored geometry; couplings cannot be recomputed")]
    NoGeometry,
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularSystem { .. } | Error::DimensionCap { .. } | Error::Linalg(_)
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
