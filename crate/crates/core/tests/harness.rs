//! End-to-end runs of the experiment commands on a tiny synthetic corpus.

use std::fs;
use std::path::{Path, PathBuf};

use htr_core::data::{load_manifest, write_manifest, LineImage};
use htr_core::harness::*;
use htr_core::model::{load_checkpoint, Model};
use htr_core::optim::{layer_of, ParamSet};
use htr_core::Error;
use tempfile::TempDir;

struct Corpus {
    _dir: TempDir,
    root: PathBuf,
}

impl Corpus {
    fn new(source: usize, target: usize) -> Self {
        let dir = TempDir::new().unwrap();
        let root = dir.path().to_path_buf();
        let cfg = RunConfig {
            out_dir: root.join("corpus"),
            source_lines: source,
            target_lines: target,
            seed: 4,
            ..RunConfig::default()
        };
        cmd_synth(&cfg).unwrap();
        Corpus { _dir: dir, root }
    }

    fn manifest(&self, domain: &str, split: &str) -> PathBuf {
        self.root.join("corpus").join(domain).join(format!("{split}.tsv"))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn source_cfg(&self, out: &str) -> RunConfig {
        RunConfig {
            train: Some(self.manifest("source", "train")),
            valid: Some(self.manifest("source", "valid")),
            out_dir: self.out(out),
            epochs: 2,
            batch_size: 8,
            ..RunConfig::default()
        }
    }

    fn target_cfg(&self, out: &str, ckpt: &Path, freeze: &str) -> RunConfig {
        RunConfig {
            train: Some(self.manifest("target", "train")),
            valid: Some(self.manifest("target", "valid")),
            test: Some(self.manifest("target", "test")),
            checkpoint: Some(ckpt.to_path_buf()),
            freeze: freeze.into(),
            out_dir: self.out(out),
            epochs: 1,
            batch_size: 4,
            ..RunConfig::default()
        }
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn synth_is_deterministic_and_round_trips() {
    let a = Corpus::new(12, 5);
    let b = Corpus::new(12, 5);
    for domain in ["source", "target"] {
        for split in ["train", "valid", "test"] {
            let (ma, mb) = (a.manifest(domain, split), b.manifest(domain, split));
            assert_eq!(read(&ma), read(&mb));
            let samples = load_manifest(&ma).unwrap();
            for s in &samples {
                let rel = Path::new(&s.id).strip_prefix(a.root.join("corpus").join(domain)).unwrap();
                assert_eq!(read(Path::new(&s.id)), read(&b.root.join("corpus").join(domain).join(rel)));
            }
        }
    }
    assert_eq!(load_manifest(&a.manifest("source", "train")).unwrap().len(), 12);
    assert_eq!(load_manifest(&a.manifest("target", "train")).unwrap().len(), 5);
    let target_chars: Vec<char> = "ghijklmnopqrstuvwxyz ".chars().collect();
    for s in load_manifest(&a.manifest("target", "test")).unwrap() {
        assert!(s.transcript.chars().all(|c| target_chars.contains(&c)), "{}", s.transcript);
    }
    assert!(a.root.join("corpus/config.txt").exists());
}

#[test]
fn pretrain_outputs_and_reproducibility() {
    let c = Corpus::new(16, 4);
    let cfg = c.source_cfg("run1");
    let report = cmd_pretrain(&cfg).unwrap();
    assert_eq!(report.label, "scratch");
    assert_eq!(report.epochs, 2);
    for f in ["best.ckpt", "final.ckpt", "curve.csv", "report.csv", "config.txt"] {
        assert!(cfg.out_dir.join(f).exists(), "missing {f}");
    }
    let curve = fs::read_to_string(cfg.out_dir.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some(CURVE_HEADER));
    assert_eq!(curve.lines().count(), 1 + 2 * 2);

    // regenerate from the snapshot alone
    let mut again = RunConfig::from_file(&cfg.out_dir.join("config.txt")).unwrap();
    assert_eq!(again, cfg);
    again.out_dir = c.out("run2");
    cmd_pretrain(&again).unwrap();
    for f in ["best.ckpt", "final.ckpt", "curve.csv", "report.csv"] {
        assert_eq!(read(&cfg.out_dir.join(f)), read(&again.out_dir.join(f)), "{f} differs");
    }
}

#[test]
fn finetune_respects_freeze_and_validates_inputs() {
    let c = Corpus::new(16, 6);
    cmd_pretrain(&c.source_cfg("pre")).unwrap();
    let ckpt = c.out("pre").join("final.ckpt");
    let source: Model<f64> = load_checkpoint(&ckpt).unwrap();

    let cfg = c.target_cfg("fc_only", &ckpt, "FC");
    let report = cmd_finetune(&cfg).unwrap();
    assert_eq!(report.label, "FC");
    assert!(report.test.is_some());
    let tuned: Model<f64> = load_checkpoint(&cfg.out_dir.join("final.ckpt")).unwrap();
    assert_ne!(tuned.alphabet, source.alphabet);
    for ((name, a), (_, b)) in source.params.named_tensors().iter().zip(tuned.params.named_tensors()) {
        if layer_of(name) != "fc" {
            assert_eq!(*a, b, "{name} changed under `FC`");
        }
    }

    let all = cmd_finetune(&c.target_cfg("all", &ckpt, "Conv[1,2,3], BLSTM[1,2], FC")).unwrap();
    assert!(all.error.is_none());
    let tuned: Model<f64> = load_checkpoint(&c.out("all").join("final.ckpt")).unwrap();
    assert_ne!(tuned.params.conv[0], source.params.conv[0]);

    let err = cmd_finetune(&c.target_cfg("nofc", &ckpt, "BLSTM[2]")).unwrap_err();
    assert!(matches!(err, Error::FreezeSpec { .. }), "{err}");
    let err = cmd_finetune(&c.target_cfg("deep", &ckpt, "BLSTM[5], FC")).unwrap_err();
    assert_eq!(err.code(), "E_FREEZE_SPEC");
    let mut wrong = c.target_cfg("paper", &ckpt, "FC");
    wrong.profile = Some(htr_core::model::Profile::Paper);
    assert_eq!(cmd_finetune(&wrong).unwrap_err().code(), "E_CONFIG");
    let missing = c.target_cfg("missing", &c.out("nope.ckpt"), "FC");
    assert_eq!(cmd_finetune(&missing).unwrap_err().code(), "E_IO");
}

#[test]
fn sweep_rows_equal_individual_runs() {
    let c = Corpus::new(16, 8);
    cmd_pretrain(&c.source_cfg("pre")).unwrap();
    let ckpt = c.out("pre").join("final.ckpt");
    let specs = ["FC", "BLSTM[2], FC", "BLSTM[4], FC", "Conv[1, 2, 3], BLSTM[1,2], FC"];
    let mut cfg = c.target_cfg("sweep", &ckpt, "ALL");
    cfg.specs = specs.iter().map(|s| s.to_string()).collect();
    cfg.sizes = vec![6];
    let rows = cmd_sweep(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    for (row, spec) in rows.iter().zip(specs) {
        assert_eq!(row.label, spec);
    }
    assert!(rows[2].error.as_deref().is_some_and(|e| e.starts_with("E_FREEZE_SPEC")));
    let csv = fs::read_to_string(c.out("sweep").join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let mut single = c.target_cfg("single", &ckpt, specs[1]);
    single.train_lines = Some(6);
    let report = cmd_finetune(&single).unwrap();
    assert_eq!(report, rows[1]);
    assert_eq!(
        read(&single.out_dir.join("final.ckpt")),
        read(&sweep_cell_dir(&cfg.out_dir, Some(6), 1).join("final.ckpt"))
    );
}

#[test]
fn evaluate_dump_and_unknown_characters() {
    let c = Corpus::new(16, 6);
    cmd_pretrain(&c.source_cfg("pre")).unwrap();
    let ckpt = c.out("pre").join("best.ckpt");
    let cfg = RunConfig {
        checkpoint: Some(ckpt.clone()),
        test: Some(c.manifest("target", "test")),
        out_dir: c.out("eval"),
        dump: true,
        ..RunConfig::default()
    };
    let out = cmd_evaluate(&cfg).unwrap();
    // the target alphabet reaches past the source one
    assert!(out.unknown.contains(&'z') || out.unknown.contains(&'s'), "{:?}", out.unknown);
    let dump = fs::read_to_string(c.out("eval").join("decode_test.tsv")).unwrap();
    assert_eq!(dump.lines().count(), 6);
    assert!(out.report.test.is_some());
    assert!(c.out("eval").join("eval.csv").exists());

    let strict = RunConfig { strict: true, ..cfg.clone() };
    assert!(matches!(cmd_evaluate(&strict), Err(Error::UnknownChars(_))));
    let none = RunConfig { test: None, ..cfg };
    assert_eq!(cmd_evaluate(&none).unwrap_err().code(), "E_CONFIG");
}

#[test]
fn infeasible_samples_are_excluded_and_listed() {
    let c = Corpus::new(10, 3);
    let dir = c.root.join("mixed");
    fs::create_dir_all(&dir).unwrap();
    let mut entries: Vec<(String, String)> = fs::read_to_string(c.manifest("source", "train"))
        .unwrap()
        .lines()
        .map(|l| {
            let (p, t) = l.split_once('\t').unwrap();
            (c.root.join("corpus/source").join(p).display().to_string(), t.to_string())
        })
        .collect();
    // a 9-pixel-wide line cannot hold 6 labels after 8x downsampling
    LineImage::filled(9, 32, 255.0).unwrap().write_raw_png(&dir.join("narrow.png")).unwrap();
    entries.push(("narrow.png".into(), "abcdef".into()));
    write_manifest(&dir.join("train.tsv"), &entries).unwrap();

    let cfg = RunConfig {
        train: Some(dir.join("train.tsv")),
        out_dir: c.out("run"),
        epochs: 1,
        ..RunConfig::default()
    };
    let report = cmd_pretrain(&cfg).unwrap();
    assert_eq!(report.train_lines, 10);
    let excluded = fs::read_to_string(c.out("run").join("excluded.tsv")).unwrap();
    assert_eq!(excluded.lines().count(), 1);
    assert!(excluded.contains("narrow.png") && excluded.contains("infeasible"));
}
