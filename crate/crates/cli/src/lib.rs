//! Experiment orchestration: sweep configs, ε-sweeps with rate fits,
//! spectrum tables and report export.

pub mod config;
pub mod fit;
pub mod report;
pub mod spectrum;
pub mod sweep;

pub use config::{Claim, ConfigError, ModelSource, SweepConfig};
pub use fit::{fit_rate, FitError, RateFit, NOISE_FLOOR};
pub use report::{export_report, read_report, ReportError};
pub use spectrum::{spectrum_command, SpectrumTable};
pub use sweep::{run_sweep, ClaimReport, ClaimStatus, SweepContext, SweepError, SweepReport};
