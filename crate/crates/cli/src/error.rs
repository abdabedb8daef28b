use std::fmt;

use routefit::{DataError, EvalError, PredictorError, RouterError, TensorError};

/// Failure classes with stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: Kind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { kind: Kind::Data, message: message.into() }
    }

    pub fn missing_key(key: &str, flag: &str) -> Self {
        Self::config(format!("missing required key `{key}` (set it in the config file or pass {flag})"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn tensor_kind(e: &TensorError) -> Kind {
    match e {
        TensorError::NonFiniteLoss { .. } | TensorError::NonFinite { .. } => Kind::Numeric,
        TensorError::InvalidConfig(_) | TensorError::InvalidLayers(_) => Kind::Config,
        _ => Kind::Data,
    }
}

fn data_kind(e: &DataError) -> Kind {
    match e {
        DataError::InvalidSplit(_) | DataError::InvalidSynth(_) | DataError::SplitOverflow { .. } => Kind::Config,
        _ => Kind::Data,
    }
}

fn predictor_kind(e: &PredictorError) -> Kind {
    match e {
        PredictorError::Tensor(t) => tensor_kind(t),
        PredictorError::Data(d) => data_kind(d),
        PredictorError::NoModels | PredictorError::DuplicateModel(_) => Kind::Config,
        _ => Kind::Data,
    }
}

fn router_kind(e: &RouterError) -> Kind {
    match e {
        RouterError::NonFiniteScore(_) => Kind::Numeric,
        RouterError::ThresholdOutOfRange(_)
        | RouterError::LambdaOutOfRange(_)
        | RouterError::BadOrder { .. }
        | RouterError::EmptyPool
        | RouterError::DuplicateRank(_)
        | RouterError::DuplicateModel(_) => Kind::Config,
        _ => Kind::Data,
    }
}

fn eval_kind(e: &EvalError) -> Kind {
    match e {
        EvalError::Data(d) => data_kind(d),
        EvalError::Router(r) => router_kind(r),
        EvalError::Predictor(p) => predictor_kind(p),
        EvalError::BadGrid(_) | EvalError::UnsortedThresholds | EvalError::MissingThreshold(_) => Kind::Config,
        _ => Kind::Data,
    }
}

macro_rules! from_core {
    ($t:ty, $f:ident) => {
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self { kind: $f(&e), message: e.to_string() }
            }
        }
    };
}

from_core!(TensorError, tensor_kind);
from_core!(DataError, data_kind);
from_core!(PredictorError, predictor_kind);
from_core!(RouterError, router_kind);
from_core!(EvalError, eval_kind);
