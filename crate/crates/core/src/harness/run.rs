//! The epoch loop shared by scratch training and fine-tuning, plus corpus
//! evaluation.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::{augment, make_batches, Alphabet, Sample};
use crate::error::{Error, Result};
use crate::metrics::{report_table, ErrorCounts, EvalReport, SplitResult};
use crate::model::{save_checkpoint, Model, ModelConfig, Trainer};
use crate::par::Exec;
use crate::rng::{mix, stream, Stream};
use crate::scalar::Scalar;

use super::RunConfig;

pub const CURVE_HEADER: &str = "epoch,split,cer";

/// One point of a learning curve; `cer` is a ratio in `[0, ..)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub split: &'static str,
    pub cer: f64,
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.epoch, p.split, p.cer);
    }
    s
}

/// Greedy transcriptions of a corpus and their error totals.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub result: SplitResult,
    pub hypotheses: Vec<String>,
    /// Reference characters the model cannot emit. They are scored as
    /// ordinary errors.
    pub unknown: Vec<char>,
}

/// Transcribe `samples` and score them. Images too narrow to produce a
/// single frame transcribe as the empty string.
pub fn evaluate_model<F: Scalar>(model: &Model<F>, samples: &[Sample], exec: Exec) -> Result<Evaluation> {
    let min_width = model.config.downsampling();
    let wide: Vec<usize> = (0..samples.len())
        .filter(|&i| samples[i].image.width() >= min_width)
        .collect();
    let images: Vec<_> = wide.iter().map(|&i| &samples[i].image).collect();
    let decoded = model.transcribe(&images, exec)?;
    let mut hypotheses = vec![String::new(); samples.len()];
    for (i, h) in wide.into_iter().zip(decoded) {
        hypotheses[i] = h;
    }
    let pairs: Vec<(&str, &str)> = samples
        .iter()
        .zip(&hypotheses)
        .map(|(s, h)| (s.transcript.as_str(), h.as_str()))
        .collect();
    let counts = ErrorCounts::from_pairs(&pairs);
    Ok(Evaluation {
        result: SplitResult {
            cer: counts.cer()?,
            counts,
        },
        hypotheses,
        unknown: model.alphabet.unknown_chars(samples.iter().map(|s| s.transcript.as_str())),
    })
}

/// Whether `sample` can be trained on: encodable, wide enough, and with a
/// CTC-feasible target.
pub fn check_trainable(config: &ModelConfig, alphabet: &Alphabet, sample: &Sample) -> Result<()> {
    let labels = alphabet.encode(&sample.transcript, &sample.id)?;
    let frames = config.sequence_len(sample.image.width());
    let required = labels.min_frames().max(1);
    if frames < required {
        return Err(Error::CtcInfeasible {
            label_len: labels.len(),
            repeats: labels.repeats(),
            required,
            available: frames,
        }
        .in_sample(&sample.id));
    }
    Ok(())
}

/// Split into trainable samples and `(id, reason)` for the rest.
pub fn partition_trainable(
    config: &ModelConfig,
    alphabet: &Alphabet,
    samples: Vec<Sample>,
) -> (Vec<Sample>, Vec<(String, String)>) {
    let mut keep = Vec::with_capacity(samples.len());
    let mut excluded = Vec::new();
    for s in samples {
        match check_trainable(config, alphabet, &s) {
            Ok(()) => keep.push(s),
            Err(e) => excluded.push((s.id.clone(), e.to_string())),
        }
    }
    (keep, excluded)
}

#[derive(Clone, Debug, Default)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub struct TrainOutcome<F: Scalar> {
    /// CERs of the selected (best) model.
    pub report: EvalReport,
    pub curve: Vec<CurvePoint>,
    pub excluded: Vec<(String, String)>,
    pub best: Model<F>,
    pub last: Model<F>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Train for `cfg.epochs` passes over `data.train` (or until `cfg.patience`
/// epochs pass without improvement), evaluating after every epoch.
///
/// The selected model is the one with the lowest validation CER, or the
/// lowest training CER when there is no validation data; ties keep the
/// earlier epoch. Writes `best.ckpt`, `final.ckpt`, `curve.csv`,
/// `report.csv`, `config.txt` and, when samples were dropped,
/// `excluded.tsv` under `out_dir`.
pub fn train_run<F: Scalar>(
    mut trainer: Trainer<F>,
    data: Splits,
    cfg: &RunConfig,
    label: &str,
    out_dir: &Path,
) -> Result<TrainOutcome<F>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    cfg.write_snapshot(out_dir)?;
    let config = trainer.model.config.clone();
    let alphabet = trainer.model.alphabet.clone();
    let (train, excluded) = partition_trainable(&config, &alphabet, data.train);
    if !excluded.is_empty() {
        let mut s = String::new();
        for (id, why) in &excluded {
            let _ = writeln!(s, "{id}\t{why}");
        }
        write(&out_dir.join("excluded.tsv"), &s)?;
        if cfg.progress {
            eprintln!("excluded {} infeasible training samples", excluded.len());
        }
    }
    if train.is_empty() {
        return Err(Error::Invalid("no trainable samples left".into()));
    }
    let exec = trainer.exec;

    let mut curve = Vec::new();
    let mut best: Option<(f64, SplitResult, Option<SplitResult>, Model<F>)> = None;
    let mut stale = 0;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.epochs {
        let epoch_set: Vec<Sample> = if cfg.augment {
            exec.map(&train, |i, s| -> Result<Sample> {
                let mut rng = stream(cfg.seed, Stream::Augment, mix(&[epoch as u64, i as u64]));
                let p = cfg.ranges.sample(&mut rng);
                Ok(Sample {
                    image: augment(&s.image, &p, &cfg.ranges)?,
                    ..s.clone()
                })
            })
            .into_iter()
            .collect::<Result<_>>()?
        } else {
            train.clone()
        };
        let mut rng = stream(cfg.seed, Stream::Shuffle, epoch as u64);
        for batch in make_batches::<F, _>(&epoch_set, &alphabet, cfg.batch_size, &mut rng)? {
            trainer.train_step(&batch)?;
        }
        epochs_run = epoch;

        let train_eval = evaluate_model(&trainer.model, &train, exec)?.result;
        curve.push(CurvePoint { epoch, split: "train", cer: train_eval.cer });
        let valid_eval = if data.valid.is_empty() {
            None
        } else {
            let v = evaluate_model(&trainer.model, &data.valid, exec)?.result;
            curve.push(CurvePoint { epoch, split: "valid", cer: v.cer });
            Some(v)
        };
        if cfg.progress {
            eprintln!(
                "epoch {epoch}: train CER {:.4}{}",
                train_eval.cer,
                valid_eval.as_ref().map_or(String::new(), |v| format!(", valid CER {:.4}", v.cer))
            );
        }
        let score = valid_eval.as_ref().map_or(train_eval.cer, |v| v.cer);
        if best.as_ref().is_none_or(|b| score < b.0) {
            save_checkpoint(&trainer.model, &out_dir.join("best.ckpt"))?;
            best = Some((score, train_eval, valid_eval, trainer.model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience.is_some_and(|p| stale >= p) {
                break;
            }
        }
    }
    save_checkpoint(&trainer.model, &out_dir.join("final.ckpt"))?;
    write(&out_dir.join("curve.csv"), &curve_csv(&curve))?;

    let last = trainer.model;
    let (train_res, valid_res, best_model) = match best {
        Some((_, t, v, m)) => (Some(t), v, m),
        None => (None, None, last.clone()),
    };
    let test_res = if data.test.is_empty() {
        None
    } else {
        Some(evaluate_model(&best_model, &data.test, exec)?.result)
    };
    let report = EvalReport {
        label: label.to_string(),
        train: train_res,
        valid: valid_res,
        test: test_res,
        train_lines: train.len(),
        seed: cfg.seed,
        epochs: epochs_run,
        error: None,
    };
    write(&out_dir.join("report.csv"), &report_table(std::slice::from_ref(&report)))?;
    Ok(TrainOutcome {
        report,
        curve,
        excluded,
        best: best_model,
        last,
    })
}
