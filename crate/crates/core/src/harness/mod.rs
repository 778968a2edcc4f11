//! Experiment drivers behind the command-line tool: scratch training,
//! fine-tuning under a freeze spec, freeze sweeps, evaluation and synthetic
//! corpus generation. Every command writes its outputs and a `config.txt`
//! snapshot under the configured output directory.

mod commands;
mod config;
mod run;

pub use commands::{
    cmd_evaluate, cmd_finetune, cmd_pretrain, cmd_sweep, cmd_synth, finetune, pretrain, seeded_subset,
    sweep_cell_dir, EvaluateOutcome,
};
pub use config::RunConfig;
pub use run::{
    check_trainable, curve_csv, evaluate_model, partition_trainable, train_run, CurvePoint, Evaluation, Splits,
    TrainOutcome, CURVE_HEADER,
};
