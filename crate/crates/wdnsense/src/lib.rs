//! File formats, command-line driver and HTTP service around
//! [`wdnsense_core`].

pub mod cli;
pub mod error;
pub mod files;
pub mod formats;
pub mod parallel;
pub mod pipeline;
pub mod service;

pub use error::{Error, Result};
pub use wdnsense_core as core;
