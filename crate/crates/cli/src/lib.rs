//! Command-line front end and HTTP service for stem mask generation and
//! evaluation.

pub mod cli;
pub mod request;
pub mod service;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
