//! Monte Carlo harness: detection curves, ROC, feature stability and the
//! Property-2 demonstration. Every trial draws from its own derived seed and
//! results are collected in trial order, so output does not depend on the
//! number of worker threads.

mod config;
mod demos;
mod output;
mod pd;
mod stability;

pub use config::{fmt_f64, parse_grid, ExperimentConfig, SignalParams};
pub use demos::{
    robustness_sweep, run_feature_robustness, run_property2_demo, Prop2Report, Prop2Row, RobustnessReport,
    RobustnessRow,
};
pub use output::{to_csv, write_csv, CsvRow, Manifest, TOOL_NAME};
pub use pd::{
    calibrate_all, learn_template, min_snr_for_pd, roc_curve, run_pd_vs_snr, run_roc, PdRow, PdSnrReport,
    RocReport, RocRow, PD_TARGET,
};
pub use stability::{run_stability, StabilityReport, StabilityRow};
