//! Command-line front end and HTTP server for the grounding engine.

pub mod repl;
pub mod server;
