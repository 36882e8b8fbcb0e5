use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// The y*-block of an adjoint subspace basis is (numerically) singular.
    #[error("subspace is not regular (condition number of y*-block {condition:e})")]
    NotRegular { condition: f64 },

    #[error("point {point:?} lies outside the declared domain")]
    DomainViolation { point: Vec<f64> },

    #[error("chart Jacobian is singular (condition number {condition:e})")]
    SingularChart { condition: f64 },

    #[error("derivative evaluation failed at {point:?}: {source}")]
    Evaluation {
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("starting point violates the constraints by {violation:e}")]
    InfeasibleStart { violation: f64 },

    #[error("oracle failed: {0}")]
    OracleFailure(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("only {accepted} usable samples, at least {required} required")]
    TooFewSamples { accepted: usize, required: usize },

    #[error("lower-level solve disagrees with the analytic branch by {gap:e}")]
    InnerSolve { gap: f64 },

    #[error("quadratic subproblem is unbounded")]
    UnboundedSubproblem,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn at(point: &[f64], source: Error) -> Self {
        Error::Evaluation {
            point: point.to_vec(),
            source: Box::new(source),
        }
    }
}
