//! Command-line front end and HTTP service for `cultsim`.

pub mod args;
pub mod service;
