//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 numeric failure (non-finite training, failed gradient check).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use textcnn_core::metrics::{accuracy, label_from_logit, EvalReport};
use textcnn_core::models::IdBatch;
use textcnn_core::text::TokenizedExample;
use textcnn_core::training::{
    fit_with, grad_check, predict_logits, GradCase, GradCheckOptions, LAYER_CASES, MODEL_CASES,
};
use textcnn_core::{Model, Rng};

use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, CHECKPOINT_FILE, HISTORY_FILE, RESOLVED_CONFIG};
use crate::dataset::{load_dataset, load_pretrained, DataFormat};
use crate::error::{AppError, AppResult};
use crate::pipeline::{encode_text, prepare, run_baseline, subsample, BaselineKind};
use crate::report::{history_csv, roc_csv, roc_svg, write_text};

const EMBEDDING_STREAM: u64 = 0x5eed_e3b0;
const EVAL_BATCH: usize = 256;

#[derive(Debug, Parser)]
#[command(
    name = "textcnn",
    version,
    about = "Train and evaluate TextCNN, Bi-LSTM and bag-of-words sentiment classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a TOML run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report accuracy and AUC of a checkpoint on a labelled dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "two-col")]
        format: DataFormat,
        /// Write the ROC curve as CSV here, plus an SVG next to it.
        #[arg(long)]
        roc: Option<PathBuf>,
    },
    /// Fit a bag-of-words baseline and report held-out accuracy.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "two-col")]
        format: DataFormat,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Fraction of records held out for scoring.
        #[arg(long, default_value_t = 0.1)]
        holdout: f64,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        /// A layer case, an architecture, or `all`.
        name: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Double every analytic gradient (debugging aid; the check must fail).
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
    /// Classify one piece of text with a checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        text: String,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> AppResult<()> {
    match command {
        Command::Train { config, seed } => {
            let outcome = cmd_train(&config, seed)?;
            emit(out, &format!("checkpoint={}", outcome.checkpoint.display()))
        }
        Command::Eval { checkpoint, data, format, roc } => cmd_eval(&checkpoint, &data, format, roc.as_deref(), out),
        Command::Baseline { kind, data, format, seed, holdout } => {
            if !(0.0..1.0).contains(&holdout) {
                return Err(AppError::Config(format!("--holdout {holdout} is outside [0, 1)")));
            }
            let records = load_dataset(&data, format)?;
            let acc = run_baseline(kind, &records, holdout, seed)?;
            emit(out, &format!("accuracy={acc:.6}"))
        }
        Command::Gradcheck { name, seed, corrupt_backward } => cmd_gradcheck(&name, seed, corrupt_backward, out),
        Command::Predict { checkpoint, text } => cmd_predict(&checkpoint, &text, out),
    }
}

fn emit(out: &mut dyn Write, line: &str) -> AppResult<()> {
    writeln!(out, "{line}").map_err(|e| AppError::io(Path::new("<stdout>"), e))
}

/// Paths written by a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub config: PathBuf,
}

pub fn cmd_train(config_path: &Path, seed: Option<u64>) -> AppResult<TrainOutcome> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let records = load_dataset(&cfg.data.path, cfg.data.format)?;
    let records = subsample(records, cfg.data.limit, cfg.seed);
    if records.is_empty() {
        return Err(AppError::Data(format!("{} contains no records", cfg.data.path.display())));
    }
    let prepared =
        prepare(&records, cfg.data.tokenize, cfg.data.min_count, cfg.model.max_len, cfg.train.val_fraction, cfg.seed)?;
    info!(
        "{} training and {} validation examples, vocabulary of {}",
        prepared.train.len(),
        prepared.held_out.len(),
        prepared.vocab.len()
    );
    let mut model = Model::build(cfg.model.clone(), prepared.vocab.len(), &mut Rng::new(cfg.seed))?;
    if let Some(path) = &cfg.embeddings {
        let mut rng = Rng::with_stream(cfg.seed, EMBEDDING_STREAM);
        let (matrix, covered) = load_pretrained(path, &prepared.vocab, cfg.model.emb_dim, &mut rng)?;
        info!("pretrained vectors cover {covered} of {} vocabulary entries", prepared.vocab.len());
        model.set_embeddings(&matrix.table)?;
    }
    let history = fit_with(&mut model, &prepared.train, &prepared.held_out, &cfg.train, |r| {
        info!(
            "epoch {} train_loss {:.6} train_acc {:.4} val_loss {} val_acc {}",
            r.epoch,
            r.train_loss,
            r.train_accuracy,
            r.val_loss.map_or("-".into(), |v| format!("{v:.6}")),
            r.val_accuracy.map_or("-".into(), |v| format!("{v:.4}")),
        );
    })?;

    fs::create_dir_all(&cfg.output_dir).map_err(|e| AppError::io(&cfg.output_dir, e))?;
    let outcome = TrainOutcome {
        checkpoint: cfg.output_dir.join(CHECKPOINT_FILE),
        history: cfg.output_dir.join(HISTORY_FILE),
        config: cfg.output_dir.join(RESOLVED_CONFIG),
    };
    let ck = Checkpoint { model, vocab: prepared.vocab, tokenize: cfg.data.tokenize };
    ck.save(&outcome.checkpoint)?;
    write_text(&outcome.history, &history_csv(&history))?;
    write_text(&outcome.config, &cfg.to_toml())?;
    Ok(outcome)
}

fn cmd_eval(
    checkpoint: &Path,
    data: &Path,
    format: DataFormat,
    roc: Option<&Path>,
    out: &mut dyn Write,
) -> AppResult<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let records = load_dataset(data, format)?;
    if records.is_empty() {
        return Err(AppError::Data(format!("{} contains no records", data.display())));
    }
    let max_len = ck.model.config().max_len;
    let examples: Vec<TokenizedExample> = records
        .iter()
        .map(|r| TokenizedExample { ids: encode_text(&r.text, &ck.vocab, ck.tokenize, max_len), label: r.label })
        .collect();
    let logits = predict_logits(&ck.model, &examples, EVAL_BATCH)?;
    let labels: Vec<u8> = examples.iter().map(|e| e.label).collect();
    let both_classes = labels.contains(&0) && labels.contains(&1);
    if !both_classes {
        let preds: Vec<u8> = logits.iter().map(|&z| label_from_logit(z)).collect();
        let acc = accuracy(&preds, &labels)?;
        if roc.is_some() {
            return Err(AppError::Data("a ROC curve needs both classes in the dataset".into()));
        }
        warn!("only one class present; AUC is undefined");
        return emit(out, &format!("accuracy={acc:.6} auc=nan"));
    }
    let report = EvalReport::from_logits(&logits, &labels)?;
    info!("confusion [[TN, FP], [FN, TP]] = {:?}", report.confusion);
    if let Some(path) = roc {
        write_text(path, &roc_csv(&report.roc))?;
        write_text(&path.with_extension("svg"), &roc_svg(&report.roc, report.auc))?;
    }
    emit(out, &format!("accuracy={:.6} auc={:.6}", report.accuracy, report.auc))
}

fn cmd_gradcheck(name: &str, seed: u64, corrupt: bool, out: &mut dyn Write) -> AppResult<()> {
    let names: Vec<&str> = if name == "all" {
        LAYER_CASES.iter().chain(MODEL_CASES).copied().collect()
    } else if LAYER_CASES.contains(&name) || MODEL_CASES.contains(&name) {
        vec![name]
    } else {
        return Err(AppError::Config(format!(
            "unknown gradient check {name:?}; expected `all`, one of {LAYER_CASES:?} or one of {MODEL_CASES:?}"
        )));
    };
    let opts = GradCheckOptions { seed, corrupt, ..GradCheckOptions::default() };
    let mut failed = Vec::new();
    for case_name in names {
        let case = GradCase::named(case_name, seed)?;
        let report = grad_check(&case, &opts)?;
        for t in &report.tensors {
            let mut line = format!("  {:<28} checked={:<4} max_rel_err={:.3e}", t.name, t.checked, t.max_rel_err);
            if t.roundoff_limited > 0 {
                line.push_str(&format!(" roundoff_limited={}", t.roundoff_limited));
            }
            if t.kinks > 0 {
                line.push_str(&format!(" kinks={}", t.kinks));
            }
            if !t.pinned_zero {
                line.push_str(" pad_row_gradient_nonzero");
            }
            emit(out, &line)?;
        }
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        emit(out, &format!("{verdict} {case_name} max_rel_err={:.3e} tol={:.0e}", report.max_rel_err(), report.tol))?;
        if !report.passed() {
            failed.push(case_name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn cmd_predict(checkpoint: &Path, text: &str, out: &mut dyn Write) -> AppResult<()> {
    if text.trim().is_empty() {
        return Err(AppError::Config("--text is empty".into()));
    }
    let ck = Checkpoint::load(checkpoint)?;
    let ids = encode_text(text, &ck.vocab, ck.tokenize, ck.model.config().max_len);
    let logit = ck.model.forward(&IdBatch::from_rows(&[ids])?)?.data()[0];
    let p = 1.0 / (1.0 + (-logit).exp());
    emit(out, &format!("label={} p={p:.4}", label_from_logit(logit)))
}
