//! Experiment configuration, checkpoints, CSV output and commands.

pub mod checkpoint;
pub mod checks;
pub mod commands;
pub mod config;
pub mod output;

pub use checkpoint::{Checkpoint, EnvSnapshot, TrainedPolicy};
pub use checks::{bound_checks, oracle_checks, variance_checks, CheckLine, CheckReport};
pub use commands::{
    apply_overrides, cmd_bound_check, cmd_evaluate, cmd_oracle_check, cmd_sweep, cmd_train, cmd_variance_check, default_check_dir,
    environments, eval_environment, evaluate_policy, output_root, sweep_points, train_policy, EvaluateReport, Overrides, RunSummary,
    SweepReport, TrainReport, OUT_DIR_ENV,
};
pub use config::{builtin_config_names, builtin_layout, CriticConfig, EnvConfig, EvalStart, EvaluationConfig, ExperimentConfig, ExperimentEnv, OutputConfig, PolicyConfig, SweepConfig};
pub use output::{read_metrics_csv, read_sweep_csv, MetricsRow, RunManifest, SweepCsvRow};
