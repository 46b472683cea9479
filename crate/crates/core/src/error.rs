use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigen-solver failure: {0}")]
    Eigen(String),

    #[error("aliasing guard: {samples} samples per period cannot resolve {harmonics} harmonics (need at least {required})")]
    Aliasing {
        samples: usize,
        harmonics: usize,
        required: usize,
    },

    #[error("hysteresis did not reach a periodic state within {cycles} cycles (last change {change:e})")]
    HysteresisNotSteady { cycles: usize, change: f64 },

    #[error("internal consistency: {0}")]
    Consistency(String),

    #[error("Newton solver did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("phase anchor violated: |u_1[{coord}]| = {magnitude:e} is below the anchor value {anchor:e}; lower the anchor")]
    AnchorViolation {
        coord: usize,
        magnitude: f64,
        anchor: f64,
    },

    #[error("continuation aborted at amplitude {amplitude:e}: {reason}")]
    Continuation { amplitude: f64, reason: String },

    #[error("amplitude {value:e} outside [{min:e}, {max:e}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("fluid provider reached its iteration cap ({iterations}) with residual {residual:e}")]
    FluidIterationCap { iterations: usize, residual: f64 },

    #[error("coupled solver reached the outer iteration cap ({iterations}); last deltas: omega {delta_omega:e}, displacement {delta_u:e}")]
    OuterIterationCap {
        iterations: usize,
        delta_omega: f64,
        delta_u: f64,
    },

    #[error("structural solve failed in outer iteration {iteration}: {source}")]
    Structural {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time integration: {0}")]
    Integration(String),

    #[error("signal is not stationary: amplitude drift {drift:.3e} exceeds {limit:.1e}")]
    NonStationary { drift: f64, limit: f64 },

    #[error("bracket does not straddle a stability limit: {0}")]
    NoStraddle(String),

    #[error("grid must start in the stick regime: contact slips at amplitude {0:e}")]
    GridNotSticking(f64),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
