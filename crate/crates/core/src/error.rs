use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("{what} must be {expected}, got {value}")]
    Domain {
        what: &'static str,
        expected: &'static str,
        value: f64,
    },

    #[error("off-time distribution has zero mean; there is no off-period to be inside")]
    ZeroMean,

    #[error("off-time distribution has no finite mean")]
    InfiniteMean,

    #[error("transform value is zero at theta = {theta}; cannot invert")]
    DivisionByZero { theta: f64 },

    #[error("Laplace inversion did not converge{}: {detail}", at_t(.t))]
    ConvergenceFailure { t: Option<f64>, detail: String },

    #[error("sample is empty")]
    EmptySample,

    #[error("check `{check}` failed to run: {source}")]
    Check {
        check: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_check(self, check: &str) -> Self {
        Error::Check {
            check: check.to_string(),
            source: Box::new(self),
        }
    }
}

fn at_t(t: &Option<f64>) -> String {
    t.map(|t| format!(" at t = {t}")).unwrap_or_default()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
