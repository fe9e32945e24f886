pub mod cli;
pub mod config;
pub mod error;
pub mod fock;
pub mod ingest;
pub mod interference;
pub mod optimizer;
pub mod oracle;
pub mod phase_ref;
pub mod rates;
pub mod sim;
pub mod source;
pub mod stats;

pub use error::{Error, Result};
