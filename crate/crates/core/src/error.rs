use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("unstable matrix: spectral abscissa {abscissa:e} is not negative")]
    UnstableMatrix { abscissa: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("non-dissipative escape: |x| = {norm:e} exceeded the guard at t = {time}")]
    NonDissipativeEscape { time: f64, norm: f64 },

    #[error("numerical blow-up at t = {time}")]
    NumericalBlowUp { time: f64 },

    #[error("degenerate diffusion: condition number {condition:e}")]
    DegenerateDiffusion { condition: f64 },

    #[error("degenerate LIF: endpoints coincide")]
    DegenerateLif,

    #[error("no Hopf point: m = {m} is below the threshold {threshold}")]
    NoHopfPoint { m: f64, threshold: f64 },

    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
