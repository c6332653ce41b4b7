//! Orchestration of the screening, metamodeling, validation and mapping
//! stages behind the `critmap` binary.

pub mod config;
pub mod study;

pub use config::StudyConfig;
pub use study::Study;
