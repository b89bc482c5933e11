use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{matrix} violates its symmetry requirement (relative defect {defect:.3e})")]
    SymmetryViolation { matrix: &'static str, defect: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid phase chart: {0}")]
    InvalidChart(String),

    #[error("kinetic matrix T is singular (smallest/largest singular value {ratio:.3e})")]
    SingularT { ratio: f64 },

    #[error("Lagrange bracket is singular (smallest/largest singular value {ratio:.3e}); the Lagrangian is degenerate")]
    SingularSigma { ratio: f64 },

    #[error("Poisson matrix is singular (smallest/largest singular value {ratio:.3e})")]
    SingularPoissonMatrix { ratio: f64 },

    #[error("the {{q,v}} structure requires V = T (relative defect {defect:.3e})")]
    RequiresVEqualsT { defect: f64 },

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    #[error("non-finite state at t = {}; integration aborted after {} samples", .0.time, .0.partial.len())]
    NonFiniteState(Box<PartialTrajectory>),

    #[error("mode frequency Ω - |λ|/2 = {0:.6e} is not positive")]
    NegativeModeFrequency(f64),

    #[error("spectrum is not discrete: {0}")]
    UnstableSpectrum(String),

    #[error("realization requires θ > 0 and Bθ > 1 (θ = {theta}, Bθ = {b_theta})")]
    RealizationDomain { theta: f64, b_theta: f64 },

    #[error("Hamiltonian is not positive definite in the canonical frame (min/max eigenvalue {ratio:.3e})")]
    NotPositiveDefinite { ratio: f64 },

    #[error("Fock spectrum did not converge: lowest levels shifted by {shift:.3e} between cutoffs {cutoff} and {next}")]
    NoConvergence { shift: f64, cutoff: usize, next: usize },

    #[error("Fock cutoff {0} is below the minimum of 4 quanta per mode")]
    CutoffTooSmall(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

/// Samples produced before an integration hit a non-finite state.
#[derive(Debug)]
pub struct PartialTrajectory {
    pub time: f64,
    pub partial: Trajectory,
}
