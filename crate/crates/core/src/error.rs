use std::fmt;

use crate::model::{Anchor, AuxKind};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("invalid machine description: {0}")]
    InvalidMachine(String),

    #[error("invalid dataflow spec: {0}")]
    InvalidSpec(String),

    #[error("{spec} exceeds the register budget: needs {needed} vector variables, {available} available")]
    RegisterBudget {
        spec: String,
        needed: usize,
        available: usize,
    },

    #[error("{aux:?} cannot be auxiliary under {anchor:?} anchoring")]
    IncompatibleAux { anchor: Anchor, aux: AuxKind },

    #[error("no table entry: {0}")]
    OutsideTableRange(String),

    #[error("coordinate out of range: {0}")]
    OutOfRange(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty candidate set: {0}")]
    EmptyCandidates(String),

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl Error {
    pub fn at_layer(self, layer: usize) -> Error {
        Error::Layer {
            layer,
            source: Box::new(self),
        }
    }
}

/// Failure raised by the vector machine, pinned to the offending instruction.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("instruction {position} (`{instr}`): {kind}")]
pub struct ExecError {
    pub position: usize,
    pub instr: String,
    pub kind: ExecErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecErrorKind {
    UnwrittenVar(u16),
    VarOutOfRange { var: u16, available: usize },
    IndexOutOfBounds { index: usize, len: usize },
    NoScalar,
    LaneMismatch,
    BudgetExceeded { live: usize, available: usize },
}

impl fmt::Display for ExecErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecErrorKind::UnwrittenVar(v) => write!(f, "read of unwritten variable v{v}"),
            ExecErrorKind::VarOutOfRange { var, available } => {
                write!(f, "variable v{var} outside the {available} available")
            }
            ExecErrorKind::IndexOutOfBounds { index, len } => {
                write!(f, "memory index {index} out of bounds (len {len})")
            }
            ExecErrorKind::NoScalar => write!(f, "scalar accumulate without a reduced value"),
            ExecErrorKind::LaneMismatch => write!(f, "operand lane counts differ"),
            ExecErrorKind::BudgetExceeded { live, available } => {
                write!(f, "{live} live variables exceed the {available} available")
            }
        }
    }
}
