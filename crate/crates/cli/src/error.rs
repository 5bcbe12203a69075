//! Exit-code classification.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Config,
    Validation,
    Numeric,
    Io,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Config => 2,
            Kind::Validation => 3,
            Kind::Numeric => 4,
            Kind::Io => 5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Kind::Config => "E_CONFIG",
            Kind::Validation => "E_VALIDATION",
            Kind::Numeric => "E_NUMERIC",
            Kind::Io => "E_IO",
        }
    }
}

/// An error whose exit code was decided where it was raised.
#[derive(Debug)]
pub struct Coded {
    pub kind: Kind,
    pub message: String,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Coded {}

pub fn config(message: impl Into<String>) -> anyhow::Error {
    Coded { kind: Kind::Config, message: message.into() }.into()
}

pub fn validation(message: impl Into<String>) -> anyhow::Error {
    Coded { kind: Kind::Validation, message: message.into() }.into()
}

pub fn numeric(message: impl Into<String>) -> anyhow::Error {
    Coded { kind: Kind::Numeric, message: message.into() }.into()
}

/// First recognizable cause in the chain decides the kind.
pub fn classify(err: &anyhow::Error) -> Kind {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Coded>() {
            return c.kind;
        }
        if cause.is::<std::io::Error>() {
            return Kind::Io;
        }
        if cause.is::<toml::de::Error>() {
            return Kind::Config;
        }
        if cause.is::<serde_json::Error>() {
            return Kind::Validation;
        }
        if let Some(e) = cause.downcast_ref::<combtomo_core::Error>() {
            return match e {
                combtomo_core::Error::Numeric(_) => Kind::Numeric,
                _ => Kind::Validation,
            };
        }
    }
    Kind::Validation
}

/// `error[E_KIND]: outer: inner: ...` on one line.
pub fn render(err: &anyhow::Error) -> String {
    let kind = classify(err);
    let detail = err.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ");
    format!("error[{}]: {}", kind.label(), detail.replace('\n', " "))
}
