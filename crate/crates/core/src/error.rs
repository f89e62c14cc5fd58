use thiserror::Error;

/// Errors raised anywhere in the transform pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cohomology classes live on different spaces ({left} vs {right})")]
    SpaceMismatch { left: String, right: String },

    #[error("curvature too large for this lattice: plaquette at site {site:?} in plane ({mu},{nu}) has an eigenvalue at the log branch cut")]
    CurvatureTooLarge { site: [usize; 4], mu: usize, nu: usize },

    #[error("dual grid too coarse: Berry plaquette at {site:?} in plane ({mu},{nu}) reaches the log branch cut")]
    DualGridTooCoarse { site: [usize; 4], mu: usize, nu: usize },

    #[error("not IT1: {0}")]
    NotIt1(String),

    #[error("singular frame overlap at dual site {site:?} direction {mu}: smallest singular value {sigma:.3e}")]
    SingularOverlap { site: [usize; 4], mu: usize, sigma: f64 },

    #[error("eigensolver did not converge at xi={xi:?} degree {degree}: {detail}")]
    SolverFailure { xi: [f64; 4], degree: usize, detail: String },

    #[error("resolution insufficient: {0}")]
    ResolutionInsufficient(String),

    #[error("theorem violation: {0}")]
    TheoremViolation(String),

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("config: {0}")]
    Config(String),

    #[error("file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
