pub mod fileio;
pub mod hfs;
pub mod logic;
pub mod models;
pub mod scheme;
pub mod symmetry;

use thiserror::Error;

/// A resource budget: either a finite count or no bound at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bound {
    Finite(u64),
    Infinite,
}

impl Bound {
    /// Whether `v` strictly exceeds the bound. Nothing exceeds `Infinite`.
    pub fn exceeded_by(self, v: u64) -> bool {
        match self {
            Bound::Finite(b) => v > b,
            Bound::Infinite => false,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v}"),
            Bound::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
