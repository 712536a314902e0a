use thiserror::Error;

/// Failure while turning expression text into a tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { pos: usize, name: String },
}

impl ParseError {
    pub fn pos(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::UnknownIdentifier { pos, .. } => *pos,
        }
    }
}

/// Failure while evaluating an expression tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error at {pos}: {message}")]
    Domain { pos: usize, message: String },
    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("parameter `{0}` has no value")]
    UnboundParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("degenerate frame at the requested point: {0}")]
    DegenerateFrame(String),
    #[error("rescaling function unavailable: {0}")]
    NuUnavailable(String),
    #[error("not a regular non-degenerate equilibrium: {0}")]
    NotNonDegenerate(String),
    #[error("newton iteration failed: {0}")]
    Newton(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("integration failed at t = {t}: {message}")]
    Integration { t: f64, message: String },
    #[error("projection failed: {0}")]
    Projection(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
