use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its mathematical domain (p <= 1, r >= 1, ...).
    #[error("parameter out of domain: {0}")]
    Domain(String),

    /// A required piece of caller-supplied data is missing (sup bound,
    /// analytic derivatives, far-field bound).
    #[error("missing contract data: {0}")]
    Contract(String),

    /// Adaptive quadrature failed to reach the requested tolerance. The best
    /// estimate and its error bound are carried along.
    #[error("quadrature did not converge after {subdivisions} subdivisions: estimate {estimate:e}, error bound {error:e}, target {target:e}")]
    Quadrature {
        estimate: f64,
        error: f64,
        target: f64,
        subdivisions: usize,
    },

    /// A precondition on discretization parameters is violated; the message
    /// names the inequality.
    #[error("configuration error: {0}")]
    Config(String),

    /// A lattice evaluation needed a sample the field cannot provide.
    #[error("lattice point not resolvable under the extension rule: alpha = {alpha:?}")]
    Coverage { alpha: Vec<i64> },

    /// Too few usable data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// NaN or overflow during time stepping.
    #[error("numerical failure at step {step}, lattice index {index}: {what}")]
    Numerical {
        step: usize,
        index: usize,
        what: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
