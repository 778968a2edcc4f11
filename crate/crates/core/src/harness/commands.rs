use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;

use crate::data::{load_dataset, synth_generate, Alphabet, DomainFiles, Sample, SynthSpec};
use crate::error::{Error, Result};
use crate::metrics::{report_table, EvalReport};
use crate::model::{load_checkpoint, peek_config, FreezeSpec, Model, Profile, Trainer};
use crate::par::Exec;
use crate::rng::{stream, Stream};
use crate::scalar::{Precision, Scalar};

use super::run::{evaluate_model, train_run, Splits, TrainOutcome};
use super::RunConfig;

fn load_split(path: &Option<PathBuf>, height: usize) -> Result<Vec<Sample>> {
    match path {
        Some(p) => load_dataset(p, height),
        None => Ok(Vec::new()),
    }
}

/// `n` lines drawn without replacement by a stream keyed on `(seed, n)`,
/// kept in manifest order.
pub fn seeded_subset(samples: Vec<Sample>, n: usize, seed: u64) -> Result<Vec<Sample>> {
    if n > samples.len() {
        return Err(Error::Config(format!(
            "asked for {n} training lines but only {} are available",
            samples.len()
        )));
    }
    let mut rng = stream(seed, Stream::Subset, n as u64);
    let mut picked = index::sample(&mut rng, samples.len(), n).into_vec();
    picked.sort_unstable();
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    Ok(picked.into_iter().filter_map(|i| slots[i].take()).collect())
}

fn load_splits(cfg: &RunConfig, height: usize) -> Result<Splits> {
    let train = load_split(&cfg.train, height)?;
    let train = match cfg.train_lines {
        Some(n) => seeded_subset(train, n, cfg.seed)?,
        None => train,
    };
    Ok(Splits {
        train,
        valid: load_split(&cfg.valid, height)?,
        test: load_split(&cfg.test, height)?,
    })
}

/// Alphabet over every transcript of every split, so that validation and
/// test characters are representable.
fn corpus_alphabet(data: &Splits) -> Alphabet {
    Alphabet::from_transcripts(
        data.train
            .iter()
            .chain(&data.valid)
            .chain(&data.test)
            .map(|s| s.transcript.as_str()),
    )
}

/// Scratch training from a fresh initialization.
pub fn pretrain<F: Scalar>(cfg: &RunConfig) -> Result<TrainOutcome<F>> {
    cfg.require(&cfg.train, "train")?;
    let profile = cfg.profile.unwrap_or(Profile::Reduced);
    let mut config = profile.config(1);
    if let Some(h) = cfg.height {
        config.input_height = h;
    }
    let data = load_splits(cfg, config.input_height)?;
    let alphabet = corpus_alphabet(&data);
    let model = Model::<F>::new(config, alphabet, cfg.seed)?;
    let trainer = Trainer::new(model, cfg.hyper(), FreezeSpec::all(), cfg.seed)?;
    train_run(trainer, data, cfg, "scratch", &cfg.out_dir)
}

/// Load the source checkpoint, replace its head for the target alphabet and
/// train the layers named by `cfg.freeze`.
pub fn finetune<F: Scalar>(cfg: &RunConfig) -> Result<TrainOutcome<F>> {
    cfg.require(&cfg.train, "train")?;
    let ckpt = cfg.require(&cfg.checkpoint, "checkpoint")?;
    let freeze = FreezeSpec::parse(&cfg.freeze)?;
    if !freeze.is_trainable("fc") {
        return Err(Error::FreezeSpec {
            spec: cfg.freeze.clone(),
            reason: "the new output layer `FC` must be trainable".into(),
        });
    }
    let source = load_checkpoint::<F>(ckpt)?;
    if let Some(p) = cfg.profile {
        if source.config.profile() != Some(p) {
            return Err(Error::Config(format!(
                "checkpoint {} does not hold a `{}` model",
                ckpt.display(),
                p.as_str()
            )));
        }
    }
    let height = source.config.input_height;
    if cfg.height.is_some_and(|h| h != height) {
        return Err(Error::Config(format!("checkpoint expects input height {height}")));
    }
    freeze.validate_for(&source.config)?;
    let data = load_splits(cfg, height)?;
    let model = source.swap_head(corpus_alphabet(&data), cfg.seed)?;
    let trainer = Trainer::new(model, cfg.hyper(), freeze, cfg.seed)?;
    train_run(trainer, data, cfg, &cfg.freeze, &cfg.out_dir)
}

pub fn cmd_pretrain(cfg: &RunConfig) -> Result<EvalReport> {
    Ok(match cfg.precision {
        Precision::F32 => pretrain::<f32>(cfg)?.report,
        Precision::F64 => pretrain::<f64>(cfg)?.report,
    })
}

/// Runs in the precision stored in the source checkpoint.
pub fn cmd_finetune(cfg: &RunConfig) -> Result<EvalReport> {
    let ckpt = cfg.require(&cfg.checkpoint, "checkpoint")?;
    Ok(match peek_config(ckpt)?.precision {
        Precision::F32 => finetune::<f32>(cfg)?.report,
        Precision::F64 => finetune::<f64>(cfg)?.report,
    })
}

/// Output directory of one sweep cell.
pub fn sweep_cell_dir(out_dir: &Path, size: Option<usize>, spec_index: usize) -> PathBuf {
    let size = size.map_or("all".to_string(), |n| n.to_string());
    out_dir.join(format!("lines{size}_spec{spec_index}"))
}

/// Fine-tune every `(size, spec)` cell in order and write `sweep.csv`.
/// A failing cell becomes a row carrying its error and the sweep goes on.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    if cfg.specs.is_empty() {
        return Err(Error::Config("`specs` is required for a sweep".into()));
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    cfg.write_snapshot(&cfg.out_dir)?;
    let sizes: Vec<Option<usize>> = if cfg.sizes.is_empty() {
        vec![cfg.train_lines]
    } else {
        cfg.sizes.iter().copied().map(Some).collect()
    };
    let mut rows = Vec::new();
    for &size in &sizes {
        for (j, spec) in cfg.specs.iter().enumerate() {
            let cell = RunConfig {
                freeze: spec.clone(),
                train_lines: size,
                out_dir: sweep_cell_dir(&cfg.out_dir, size, j),
                specs: Vec::new(),
                sizes: Vec::new(),
                ..cfg.clone()
            };
            let row = cmd_finetune(&cell).unwrap_or_else(|e| EvalReport {
                label: spec.clone(),
                train_lines: size.unwrap_or(0),
                seed: cfg.seed,
                error: Some(format!("{}: {e}", e.code())),
                ..EvalReport::default()
            });
            if cfg.progress {
                eprintln!("sweep cell `{spec}` lines {size:?} done");
            }
            rows.push(row);
        }
    }
    let path = cfg.out_dir.join("sweep.csv");
    fs::write(&path, report_table(&rows)).map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct EvaluateOutcome {
    pub report: EvalReport,
    /// Characters present in the data but absent from the model's alphabet.
    pub unknown: Vec<char>,
}

fn evaluate_with<F: Scalar>(cfg: &RunConfig, ckpt: &Path) -> Result<EvaluateOutcome> {
    let model = load_checkpoint::<F>(ckpt)?;
    let height = model.config.input_height;
    let mut report = EvalReport {
        label: ckpt.file_name().map_or(String::new(), |n| n.to_string_lossy().into_owned()),
        seed: cfg.seed,
        ..EvalReport::default()
    };
    let mut unknown: Vec<char> = Vec::new();
    let mut any = false;
    for (name, path) in [("train", &cfg.train), ("valid", &cfg.valid), ("test", &cfg.test)] {
        let Some(path) = path else { continue };
        any = true;
        let samples = load_dataset(path, height)?;
        let found = model.alphabet.unknown_chars(samples.iter().map(|s| s.transcript.as_str()));
        if cfg.strict && !found.is_empty() {
            return Err(Error::UnknownChars(found));
        }
        unknown.extend(found);
        if samples.is_empty() {
            continue;
        }
        let ev = evaluate_model(&model, &samples, Exec::default())?;
        if cfg.dump {
            let mut s = String::new();
            for (sample, hyp) in samples.iter().zip(&ev.hypotheses) {
                let _ = writeln!(s, "{}\t{}\t{}", sample.id, sample.transcript, hyp);
            }
            let p = cfg.out_dir.join(format!("decode_{name}.tsv"));
            fs::write(&p, s).map_err(|e| Error::io(&p, e))?;
        }
        match name {
            "train" => {
                report.train_lines = samples.len();
                report.train = Some(ev.result);
            }
            "valid" => report.valid = Some(ev.result),
            _ => report.test = Some(ev.result),
        }
    }
    if !any {
        return Err(Error::Config("evaluate needs at least one of `train`, `valid`, `test`".into()));
    }
    unknown.sort_unstable();
    unknown.dedup();
    let p = cfg.out_dir.join("eval.csv");
    fs::write(&p, report_table(std::slice::from_ref(&report))).map_err(|e| Error::io(&p, e))?;
    Ok(EvaluateOutcome { report, unknown })
}

/// Greedy-decode the given manifests with a checkpoint and write `eval.csv`
/// (plus `decode_<split>.tsv` with `dump`). Unknown characters are listed
/// and, unless `strict`, scored as errors.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateOutcome> {
    let ckpt = cfg.require(&cfg.checkpoint, "checkpoint")?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    cfg.write_snapshot(&cfg.out_dir)?;
    match peek_config(ckpt)?.precision {
        Precision::F32 => evaluate_with::<f32>(cfg, ckpt),
        Precision::F64 => evaluate_with::<f64>(cfg, ckpt),
    }
}

/// Source/target synthetic corpus pair under `out_dir/source` and
/// `out_dir/target`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<DomainFiles>> {
    let height = cfg
        .height
        .unwrap_or_else(|| cfg.profile.unwrap_or(Profile::Reduced).config(1).input_height);
    let spec = SynthSpec::source_target(cfg.source_lines, cfg.target_lines, height);
    let files = synth_generate(&spec, cfg.seed, &cfg.out_dir)?;
    cfg.write_snapshot(&cfg.out_dir)?;
    Ok(files)
}
