use thiserror::Error;

/// Every failure names the module and the operation that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}::{op}: domain error: {msg}")]
    Domain {
        module: &'static str,
        op: &'static str,
        msg: String,
    },
    #[error("{module}::{op}: precondition violated: {msg}")]
    Precondition {
        module: &'static str,
        op: &'static str,
        msg: String,
    },
    #[error("{module}::{op}: invalid construction: {msg}")]
    Construction {
        module: &'static str,
        op: &'static str,
        msg: String,
    },
    #[error("{module}::{op}: integral diverges: {msg}")]
    Divergence {
        module: &'static str,
        op: &'static str,
        msg: String,
    },
    #[error("{module}::{op}: numerical failure: {msg} (achieved error estimate {achieved:e})")]
    Numeric {
        module: &'static str,
        op: &'static str,
        msg: String,
        achieved: f64,
    },
    #[error("{module}::{op}: resource limit: {msg}")]
    Resource {
        module: &'static str,
        op: &'static str,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(module: &'static str, op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            module,
            op,
            msg: msg.into(),
        }
    }

    pub fn precondition(module: &'static str, op: &'static str, msg: impl Into<String>) -> Self {
        Error::Precondition {
            module,
            op,
            msg: msg.into(),
        }
    }

    pub fn construction(module: &'static str, op: &'static str, msg: impl Into<String>) -> Self {
        Error::Construction {
            module,
            op,
            msg: msg.into(),
        }
    }

    pub fn numeric(
        module: &'static str,
        op: &'static str,
        msg: impl Into<String>,
        achieved: f64,
    ) -> Self {
        Error::Numeric {
            module,
            op,
            msg: msg.into(),
            achieved,
        }
    }

    pub fn resource(module: &'static str, op: &'static str, msg: impl Into<String>) -> Self {
        Error::Resource {
            module,
            op,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
