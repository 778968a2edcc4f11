//! `htr`: train, fine-tune, sweep and evaluate line recognizers.
//!
//! Every flag may also come from `--config <file>` (one `key = value` per
//! line, keys spelled like the long flags); flags on the command line win.
//! Failures print a single `ERROR <code>: <message>` line to stderr and exit
//! with status 1 (2 for usage errors).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htr_core::harness::{cmd_evaluate, cmd_finetune, cmd_pretrain, cmd_sweep, cmd_synth, RunConfig};
use htr_core::metrics::report_table;
use htr_core::Error;

#[derive(Parser)]
#[command(name = "htr", version, about = "CNN-BLSTM-CTC handwriting recognition with layer-freezing transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a fresh initialization.
    Pretrain(Flags),
    /// Replace the output layer of a checkpoint and retrain selected layers.
    Finetune(Flags),
    /// Fine-tune once per (training-set size, freeze spec) and tabulate.
    Sweep(Flags),
    /// Greedy-decode manifests with a checkpoint and report CER.
    Evaluate(Flags),
    /// Render a synthetic source/target corpus pair.
    Synth(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    valid: Option<String>,
    #[arg(long)]
    test: Option<String>,
    /// Source checkpoint (finetune, sweep) or model to evaluate.
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    /// paper | reduced
    #[arg(long)]
    profile: Option<String>,
    /// Input height, overriding the profile's.
    #[arg(long)]
    height: Option<String>,
    /// f32 | f64
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    /// Stop after this many epochs without validation improvement.
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    /// Trainable layers, e.g. "BLSTM[4,5], FC".
    #[arg(long)]
    freeze: Option<String>,
    /// Train on a seeded random subset of this many lines.
    #[arg(long)]
    train_lines: Option<String>,
    /// Freeze specs for a sweep, separated by `;`.
    #[arg(long)]
    specs: Option<String>,
    /// Training-set sizes for a sweep, separated by `,`.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "on")]
    augment: Option<String>,
    #[arg(long)]
    aug_rotation: Option<String>,
    #[arg(long)]
    aug_shear: Option<String>,
    #[arg(long)]
    aug_translate: Option<String>,
    #[arg(long)]
    aug_scale_min: Option<String>,
    #[arg(long)]
    aug_scale_max: Option<String>,
    #[arg(long)]
    aug_radius: Option<String>,
    /// Write per-line transcriptions when evaluating.
    #[arg(long, num_args = 0..=1, default_missing_value = "on")]
    dump: Option<String>,
    /// Fail evaluation on characters outside the model's alphabet.
    #[arg(long, num_args = 0..=1, default_missing_value = "on")]
    strict: Option<String>,
    #[arg(long)]
    source_lines: Option<String>,
    #[arg(long)]
    target_lines: Option<String>,
    /// Report per-epoch progress on stderr.
    #[arg(long, num_args = 0..=1, default_missing_value = "on")]
    progress: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let all = [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("checkpoint", &self.checkpoint),
            ("out_dir", &self.out_dir),
            ("profile", &self.profile),
            ("height", &self.height),
            ("precision", &self.precision),
            ("seed", &self.seed),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("batch_size", &self.batch_size),
            ("lr", &self.lr),
            ("freeze", &self.freeze),
            ("train_lines", &self.train_lines),
            ("specs", &self.specs),
            ("sizes", &self.sizes),
            ("augment", &self.augment),
            ("aug_rotation", &self.aug_rotation),
            ("aug_shear", &self.aug_shear),
            ("aug_translate", &self.aug_translate),
            ("aug_scale_min", &self.aug_scale_min),
            ("aug_scale_max", &self.aug_scale_max),
            ("aug_radius", &self.aug_radius),
            ("dump", &self.dump),
            ("strict", &self.strict),
            ("source_lines", &self.source_lines),
            ("target_lines", &self.target_lines),
            ("progress", &self.progress),
        ];
        all.into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }

    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for (k, v) in self.overrides() {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Pretrain(f) => print!("{}", report_table(&[cmd_pretrain(&f.resolve()?)?])),
        Command::Finetune(f) => print!("{}", report_table(&[cmd_finetune(&f.resolve()?)?])),
        Command::Sweep(f) => print!("{}", report_table(&cmd_sweep(&f.resolve()?)?)),
        Command::Evaluate(f) => {
            let out = cmd_evaluate(&f.resolve()?)?;
            if !out.unknown.is_empty() {
                let list: String = out.unknown.iter().collect();
                eprintln!("warning: characters outside the model alphabet scored as errors: {list:?}");
            }
            print!("{}", report_table(&[out.report]));
        }
        Command::Synth(f) => {
            for d in cmd_synth(&f.resolve()?)? {
                println!("{}\t{}\t{}\t{}", d.name, d.train.display(), d.valid.display(), d.test.display());
            }
        }
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid usage");
            eprintln!("ERROR E_USAGE: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
