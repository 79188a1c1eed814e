use core::fmt;

/// Failures raised by estimation, inference and evaluation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the routine.
    Domain(&'static str),
    /// Two shapes that must agree do not.
    DimensionMismatch { expected: usize, found: usize },
    /// The data set is empty or too small for the requested fit.
    InsufficientData { needed: usize, found: usize },
    /// A covariance matrix could not be factorised even after flooring.
    Singular,
    /// A set of directions has a vanishing resultant, so no mean direction exists.
    ZeroResultant,
    /// A component lost (almost) all of its membership during EM.
    Collapse { component: usize, n_eff: f64 },
    /// A weight update removed every component.
    AllAnnihilated,
    /// A computed quantity became non-finite.
    NonFinite(&'static str),
    /// Every component density underflowed at this datum.
    Underflow { row: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InsufficientData { needed, found } => {
                write!(f, "insufficient data: need at least {needed} points, got {found}")
            }
            Error::Singular => write!(f, "covariance matrix is not positive definite"),
            Error::ZeroResultant => write!(f, "resultant vector is zero"),
            Error::Collapse { component, n_eff } => {
                write!(f, "component {component} collapsed (effective size {n_eff:.3})")
            }
            Error::AllAnnihilated => write!(f, "all components were annihilated"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::Underflow { row } => write!(f, "all component densities underflow at datum {row}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
