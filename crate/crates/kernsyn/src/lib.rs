//! File formats, synthetic scenarios, the task pipeline and the benchmark
//! driver around [`kernsyn_core`]. The `kernsyn` binary exposes them as
//! subcommands; see [`cli`].

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod generate;
pub mod io;
pub mod perception;
pub mod pipeline;
pub mod scenario;
pub mod sim;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use scenario::Task;
