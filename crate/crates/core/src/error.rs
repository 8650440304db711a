use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Malformed law or kernel specification string.
    #[error("cannot parse {what} `{input}`: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("{law} is a discrete law; hazard quantities are defined for continuous laws only")]
    DiscreteLaw { law: &'static str },

    #[error("time {t} lies outside the simulated horizon [0, {horizon}]")]
    BeyondHorizon { t: f64, horizon: f64 },

    /// Evaluation at a point where the kernel is singular or undefined.
    #[error("kernel evaluated outside its domain at t={t}, r={r}: {reason}")]
    KernelDomain {
        t: f64,
        r: f64,
        reason: &'static str,
    },

    #[error(
        "quadrature on [{a}, {b}] did not reach tolerance {tol:e} (estimated error {estimate:e})"
    )]
    Quadrature {
        a: f64,
        b: f64,
        tol: f64,
        estimate: f64,
    },

    #[error("covariance matrix is not positive definite at row {row} after regularisation")]
    NotPositiveDefinite { row: usize },

    #[error("{0}")]
    Degenerate(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
