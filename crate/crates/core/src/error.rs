use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("IRLS weight degenerated at eta={eta} (psi={psi}); an observation's mean is converging to the boundary, run separation detection")]
    DegenerateWeight { eta: f64, psi: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("empty model: every column was dropped as collinear and there are no factors")]
    EmptyModel,

    #[error("within-transformation did not converge after {sweeps} sweeps (last delta {last_delta})")]
    ProjectionDiverged { sweeps: usize, last_delta: f64 },

    #[error("separation detector hit the iteration cap ({0})")]
    DetectorIterationCap(usize),

    #[error("detector requires a family with a bounded likelihood; use the existence checks for {0}")]
    UnboundedLikelihoodFamily(&'static str),

    #[error("K overflow: too many boundary observations for epsilon={epsilon}; increase epsilon")]
    KOverflow { epsilon: f64 },

    #[error("problem too large for the LP oracle (columns={columns}, rows={rows}); use the iterative rectifier")]
    LpDimensionCap { columns: usize, rows: usize },

    #[error("simplex cycling guard tripped")]
    SimplexCycle,

    #[error("complete separation: every observation is separated, meaningful estimation is impossible")]
    CompleteSeparation,

    #[error("estimates do not exist for this {family} model: {reason}")]
    NonExistence { family: &'static str, reason: String },

    #[error("IRLS failed to converge: {0}")]
    IrlsDiverged(String),
}
