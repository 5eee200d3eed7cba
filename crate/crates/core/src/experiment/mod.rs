//! Run configuration, output layout and the pipeline commands behind the CLI.

mod commands;
mod config;
mod report;

pub use commands::{
    cmd_consistency, cmd_evaluate, cmd_generate, cmd_import_external, cmd_oracle_analysis, cmd_rerank, cmd_score,
    cmd_train, oracle_analysis, Layout, Manifest, RerankSummary, RunLock, TrainSummary,
};
pub use config::{BaselineConfig, DataConfig, GeneratorConfig, InferenceMode, Overrides, RunConfig, Seeds};
pub use report::{ReportRow, TableReport, CELL_DECIMALS};
