//! Exact and numerical Bergman-function computations for radial potentials on
//! ball and line-bundle models over a Kähler base.
//!
//! The pipeline runs bottom-up: Taylor jets of the profile, fibre
//! coordinates, the curvature terms of the first two expansion coefficients,
//! moment integrals and kernel series, and brute-force Gram oracles that
//! check the series without its factorization.

pub mod bergman;
pub mod curvature;
pub mod jets;
pub mod oracle;
pub mod profiles;
pub mod quadrature;
pub mod special;

pub use bergman::{BergmanError, PsiMethod, QuantizationSetup, SeriesOptions};
pub use curvature::{BaseGeometry, Branch, CurvatureError};
pub use jets::{JetError, TaylorJet};
pub use oracle::OracleError;
pub use profiles::{DomainKind, ProfileError, RadialProfile};
pub use quadrature::QuadError;
pub use special::SpecialError;

use thiserror::Error;

/// Any failure from the library, for frontends that need one type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Bergman(#[from] BergmanError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters, out-of-domain points, or an invalid branch.
    Input,
    /// A quadrature, series or truncation tolerance was not met.
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use ErrorClass::*;
        match self {
            Error::Quad(_) => Numerical,
            Error::Bergman(e) => match e {
                BergmanError::SeriesNonConvergent { .. } | BergmanError::QuadratureNonConvergent(_) => Numerical,
                _ => Input,
            },
            Error::Oracle(e) => match e {
                OracleError::TruncationInsufficient { .. }
                | OracleError::QuadratureNonConvergent { .. }
                | OracleError::Quadrature(_) => Numerical,
                OracleError::Bergman(b) => Error::Bergman(b.clone()).class(),
                _ => Input,
            },
            _ => Input,
        }
    }
}
