//! Runs the built binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use textcnn::checkpoint::Checkpoint;
use textcnn_core::text::{build_vocab, TokenizeOptions};
use textcnn_core::{Arch, Model, ModelConfig, Rng};

fn textcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_textcnn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_dataset(dir: &Path) -> PathBuf {
    let path = dir.join("data.csv");
    let mut text = String::from("label,text\n");
    for i in 0..40 {
        if i % 2 == 0 {
            text.push_str(&format!("1,great lovely day number {i}\n"));
        } else {
            text.push_str(&format!("0,awful sad day number {i}\n"));
        }
    }
    fs::write(&path, text).unwrap();
    path
}

fn write_config(dir: &Path, data: &Path, model_extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    let text = format!(
        "output_dir = {:?}\n[data]\npath = {:?}\n[model]\narch = \"kim_cnn\"\nnum_filters = 3\nemb_dim = 6\n\
         max_len = 8\n{model_extra}\n[train]\nepochs = 2\nbatch_size = 8\n",
        dir.join("out"),
        data,
    );
    fs::write(&path, text).unwrap();
    path
}

/// Trains on the tiny dataset and returns the checkpoint path.
fn trained(dir: &TempDir) -> PathBuf {
    let data = tiny_dataset(dir.path());
    let config = write_config(dir.path(), &data, "");
    let out = textcnn(&["train", "--config", s(&config)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.path().join("out/model.txcn")
}

#[test]
fn train_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(&dir);
    let out = dir.path().join("out");
    for name in ["model.txcn", "history.csv", "config.toml"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,val_accuracy\n"));
    assert_eq!(history.lines().count(), 3);
    assert!(ck.is_file());
}

#[test]
fn train_reports_missing_data_and_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &dir.path().join("absent.csv"), "");
    assert_eq!(code(&textcnn(&["train", "--config", s(&config)])), 2);

    let data = tiny_dataset(dir.path());
    let config = write_config(dir.path(), &data, "filter_sizes = [10]\nmax_len = 5");
    let config_text = fs::read_to_string(&config).unwrap().replace("max_len = 8\n", "");
    fs::write(&config, config_text).unwrap();
    let out = textcnn(&["train", "--config", s(&config)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_len"));
}

#[test]
fn eval_prints_metrics_and_roc() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(&dir);
    let data = dir.path().join("data.csv");
    let roc = dir.path().join("roc.csv");
    let out = textcnn(&["eval", "--checkpoint", s(&ck), "--data", s(&data), "--roc", s(&roc)]);
    assert_eq!(code(&out), 0);
    let line = stdout(&out);
    assert!(line.starts_with("accuracy=") && line.contains(" auc="), "{line}");
    assert!(fs::read_to_string(&roc).unwrap().starts_with("fpr,tpr\n"));
    assert!(fs::read_to_string(dir.path().join("roc.svg")).unwrap().contains("AUC = "));
}

#[test]
fn eval_rejects_corrupted_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ck = trained(&dir);
    let mut bytes = fs::read(&ck).unwrap();
    bytes.truncate(bytes.len() / 2);
    fs::write(&ck, bytes).unwrap();
    let data = dir.path().join("data.csv");
    assert_eq!(code(&textcnn(&["eval", "--checkpoint", s(&ck), "--data", s(&data)])), 1);
}

#[test]
fn baseline_on_separable_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sep.csv");
    let rows = ["1,great lovely", "0,awful sad"].repeat(4).join("\n");
    fs::write(&data, rows).unwrap();
    let run = || textcnn(&["baseline", "--kind", "nb", "--data", s(&data), "--holdout", "0.25", "--seed", "3"]);
    let first = run();
    assert_eq!(code(&first), 0);
    assert_eq!(stdout(&first), "accuracy=1.000000\n");
    assert_eq!(stdout(&run()), stdout(&first));
    assert_eq!(code(&textcnn(&["baseline", "--kind", "forest", "--data", s(&data)])), 1);
}

#[test]
fn gradcheck_exit_codes() {
    assert_eq!(code(&textcnn(&["gradcheck", "dense"])), 0);
    let deep = textcnn(&["gradcheck", "deep_cnn"]);
    assert_eq!(code(&deep), 0);
    assert!(stdout(&deep).contains("PASS deep_cnn"));
    assert_eq!(code(&textcnn(&["gradcheck", "dense", "--corrupt-backward"])), 3);
    assert_eq!(code(&textcnn(&["gradcheck", "nonsense"])), 1);
}

#[test]
fn predict_with_zero_weights_is_undecided() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = build_vocab(&[vec!["café", "day"]], 1).unwrap();
    let mut cfg = ModelConfig::new(Arch::KimCnn);
    cfg.max_len = 6;
    cfg.emb_dim = 4;
    cfg.num_filters = 2;
    let mut model = Model::build(cfg, vocab.len(), &mut Rng::new(1)).unwrap();
    for t in model.params_mut() {
        t.data_mut().fill(0.0);
    }
    let path = dir.path().join("zero.txcn");
    Checkpoint { model, vocab, tokenize: TokenizeOptions::default() }.save(&path).unwrap();

    let out = textcnn(&["predict", "--checkpoint", s(&path), "--text", "café ☕ naïve day"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "label=0 p=0.5000\n");
    assert_eq!(code(&textcnn(&["predict", "--checkpoint", s(&path), "--text", "  "])), 1);
}
