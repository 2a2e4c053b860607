//! Community vocabulary registry: terms, consensus scoring, persistent
//! identifiers, and schema/record ingest.

pub mod ark;
pub mod clock;
pub mod consensus;
pub mod error;
pub mod graph;
pub mod ids;
pub mod ingest;
pub mod model;
pub mod notify;
pub mod queue;
pub mod registry;
pub mod text;

pub use error::{Error, Result};
pub use registry::Registry;
