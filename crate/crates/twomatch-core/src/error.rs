use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible degree equation: pi = {pi} must exceed 3y + 2z = {floor}")]
    InfeasiblePi { pi: f64, floor: f64 },

    #[error("lambda out of guard range: pi/(y+z) = {ratio} exceeds 200")]
    LambdaGuard { ratio: f64 },

    #[error("root finder did not converge; residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: u32 },

    #[error("degree sampling failed after {attempts} rejection attempts")]
    SamplingFailure { attempts: u64 },

    #[error("no simple pairing found in {attempts} attempts (observed simplicity rate {rate})")]
    SimplicityFailure { attempts: u64, rate: f64 },

    #[error("invalid degree profile: {0}")]
    BadProfile(String),

    #[error("no live half-edge matches the requested vertex class")]
    EmptySupport,

    #[error("quadrature failed to reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },

    #[error("weights infeasible: 2A + B = {q} exceeds 1")]
    InfeasibleWeights { q: f64 },

    #[error("not enough booster-eligible edges: need {need}, have {have}")]
    InsufficientEligibleEdges { need: usize, have: usize },

    #[error("booster split left a vertex below degree 3 in {attempts} attempts")]
    BoosterSplitFailure { attempts: u64 },

    #[error("state audit failed: {0}")]
    AuditFailure(String),

    #[error("graph file malformed: {0}")]
    BadGraphFile(String),

    #[error("union of matchings gave a vertex of degree > 2: vertex {0}")]
    NotATwoMatching(u32),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
