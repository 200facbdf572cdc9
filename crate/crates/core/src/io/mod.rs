//! File formats and run configuration.

pub mod config;
pub mod embeddings;
pub mod properties;
pub mod sequences;

pub use config::{ConfigError, IterativeRun, OutputFormat, OutputSpec, PrepareOptions, Run, RunConfig};
pub use embeddings::{load_embeddings, save_binary, save_csv};
pub use properties::{load_properties, save_properties};
pub use sequences::{load_sequences, parse_records, parse_sequences, SequenceRecord};
