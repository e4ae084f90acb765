use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("degenerate joint: all weights are zero")]
    DegenerateJoint,

    #[error("detector sees nothing: total fixed-detector response is zero")]
    DetectorSeesNothing,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid acceptance: {0}")]
    InvalidAcceptance(String),

    #[error("invalid kernel spec: {0}")]
    InvalidKernel(String),

    #[error(
        "slit grid under-resolves the Fresnel phase: step {step:.3} rad exceeds pi; \
         use at least {required} slit samples"
    )]
    PhaseUnderResolved { step: f64, required: usize },

    #[error("support violation: {0}")]
    Support(String),

    #[error("score singular at null: response is zero but its derivative is {derivative:e} at index {index}")]
    SingularScore { index: usize, derivative: f64 },

    #[error("degenerate detection channel: P_det = {0}")]
    DegenerateChannel(f64),

    #[error("parameter {theta} outside model domain [{lo}, {hi}]")]
    Domain { theta: f64, lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation of U^H U from I is {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("nonpositive trace {0:e}")]
    NonPositiveTrace(f64),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("malformed table: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
