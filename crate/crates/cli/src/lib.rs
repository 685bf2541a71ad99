//! Command-line workbench and HTTP JSON API for cqk corpora.

pub mod cli;
pub mod history;
pub mod http;

pub use cli::{run, Cli};
