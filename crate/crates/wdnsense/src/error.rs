use std::path::PathBuf;

use thiserror::Error;
use wdnsense_core::{AnnealError, NetworkError, PlacementError, QuboError};

use crate::formats::FormatError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Document { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Anneal(#[from] AnnealError),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Short category used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Document { .. } | Error::Format(_) => "document",
            Error::Network(_) => "network",
            Error::Qubo(_) => "qubo",
            Error::Placement(_) => "placement",
            Error::Anneal(_) => "solver",
            Error::Usage(_) => "usage",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
