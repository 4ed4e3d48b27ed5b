use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),

    #[error("unknown point `{0}`")]
    UnknownPoint(String),

    #[error("point `{0}` has no numeric coordinate")]
    NoCoordinate(String),

    #[error("table has no entry for ({0})")]
    TableMiss(String),

    #[error("non-finite value {value} while evaluating {what}")]
    NonFinite { what: String, value: f64 },

    #[error("image {image} of `{point}` lies outside the universe")]
    OutsideUniverse { point: String, image: String },

    #[error("metric axiom `{axiom}` fails at ({witness}): {detail}")]
    MetricAxiom {
        axiom: &'static str,
        witness: String,
        detail: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sequence `{id}` does not converge to {target}")]
    NotConvergent { id: String, target: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("at ({tuple}): {source}")]
    AtTuple {
        tuple: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at<I, P>(tuple: I, source: Error) -> Self
    where
        I: IntoIterator<Item = P>,
        P: std::fmt::Display,
    {
        let tuple = tuple.into_iter().map(|p| p.to_string()).collect::<Vec<_>>().join(", ");
        Error::AtTuple {
            tuple,
            source: Box::new(source),
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
