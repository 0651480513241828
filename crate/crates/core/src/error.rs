use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("disconnected graph: {0}")]
    Disconnected(String),

    #[error("infeasible generator request: {0}")]
    Infeasible(String),

    #[error("no synchronous state: Newton iteration did not converge ({0})")]
    NoSynchronousState(String),

    #[error("equilibrium not solved; call solve_equilibrium first")]
    EquilibriumUnset,

    #[error("no qualifying mode: {0}")]
    NoQualifyingMode(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("simulation diverged at step {step} (t = {time:.4} s): |state| exceeded {limit:.0}")]
    Divergence { step: usize, time: f64, limit: f64 },

    #[error("loss of synchrony at node {node} from step {step} (t = {time:.4} s)")]
    LossOfSynchrony { node: usize, step: usize, time: f64 },

    #[error("singular system: drive frequency {freq} Hz coincides with an eigenvalue of the state matrix")]
    Resonant { freq: f64 },

    #[error("series too short: need T > {need}, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("degenerate motif: zero variance at start index {0}")]
    DegenerateMotif(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
