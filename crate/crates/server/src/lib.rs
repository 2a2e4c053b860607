//! HTTP service, background tasks and command-line entry point for the
//! vocabulary registry.

pub mod api;
pub mod cli;
pub mod config;
pub mod tasks;
