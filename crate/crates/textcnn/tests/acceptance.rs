//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Criterion 5 reads Sentiment140 from `SENTIMENT140_PATH` or
//! `data/sentiment140.csv` when present and falls back to the bundled
//! substitute corpus otherwise.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use support::sweeps;
use textcnn::checkpoint::Checkpoint;
use textcnn::cli;
use textcnn::dataset::{load_dataset, DataFormat};
use textcnn::pipeline::{prepare, run_baseline, subsample, BaselineKind};
use textcnn_core::layers::{conv_out_len, Pooling};
use textcnn_core::models::IdBatch;
use textcnn_core::text::{build_vocab, TokenizeOptions, TokenizedExample};
use textcnn_core::training::{evaluate, fit, TrainConfig};
use textcnn_core::{Arch, Model, ModelConfig, Rng};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail())
    }
}

fn within(elapsed: Duration, budget: Duration, detail: String) -> Outcome {
    check(elapsed <= budget, detail.clone(), || format!("{detail}; over the {}s budget", budget.as_secs()))
}

fn c1_gradients() -> Outcome {
    let start = Instant::now();
    let mut out = Vec::new();
    let code = cli::run(["textcnn", "gradcheck", "all"], &mut out);
    let text = String::from_utf8_lossy(&out);
    let verdicts: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    if code != 0 {
        let failed: Vec<&str> = verdicts.iter().filter(|l| l.starts_with("FAIL")).copied().collect();
        return Err(format!("exit {code}: {}", failed.join("; ")));
    }
    within(start.elapsed(), Duration::from_secs(120), format!("{} cases passed", verdicts.len()))
}

fn c2_shapes() -> Outcome {
    let mut cfg = ModelConfig::new(Arch::KimCnn);
    cfg.max_len = 7;
    cfg.emb_dim = 5;
    cfg.filter_sizes = vec![2, 3, 4];
    cfg.num_filters = 2;
    cfg.pool = Pooling::Max1;
    let model = Model::build(cfg, 10, &mut Rng::new(0)).map_err(|e| e.to_string())?;
    let trace = model.shape_trace(&IdBatch::from_rows(&[vec![1usize; 7]]).unwrap()).map_err(|e| e.to_string())?;
    let shape = |name: &str| trace.iter().find(|(n, _)| n == name).map(|(_, s)| s.clone()).unwrap_or_default();
    let pre: Vec<usize> = (0..3).map(|i| shape(&format!("branch{i}.conv")).last().copied().unwrap_or(0)).collect();
    let post: Vec<usize> = (0..3).map(|i| shape(&format!("branch{i}.pool")).iter().skip(1).product()).collect();
    let concat = shape("concat").last().copied().unwrap_or(0);
    let single = conv_out_len(8, 0, 1, 5, 1).map_err(|e| e.to_string())?;
    check(
        pre == [6, 5, 4] && post == [2, 2, 2] && concat == 6 && single == 4,
        format!("pre-pool {pre:?}, post-pool {post:?}, concat {concat}, L=8 k=5 -> {single}"),
        || format!("pre-pool {pre:?}, post-pool {post:?}, concat {concat}, L=8 k=5 -> {single}"),
    )
}

/// Label 1 iff the marker token (id 2) appears somewhere in the row.
fn marker_dataset(n: usize, len: usize, vocab: usize, seed: u64) -> Vec<TokenizedExample> {
    let mut rng = Rng::new(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let mut ids: Vec<usize> = (0..len).map(|_| 3 + rng.below(vocab - 3)).collect();
            if label == 1 {
                ids[rng.below(len)] = 2;
            }
            TokenizedExample { ids, label }
        })
        .collect()
}

fn c3_overfit() -> Outcome {
    let start = Instant::now();
    let data = marker_dataset(64, 10, 20, 42);
    let mut cfg = ModelConfig::new(Arch::DeepCnn);
    cfg.filter_sizes = vec![1, 2, 3];
    cfg.num_filters = 8;
    cfg.emb_dim = 8;
    cfg.max_len = 10;
    cfg.fc_hidden = 16;
    let mut model = Model::build(cfg, 20, &mut Rng::new(42)).map_err(|e| e.to_string())?;
    let train = TrainConfig { epochs: 200, batch_size: 16, lr: 1e-2, seed: 42, ..TrainConfig::default() };
    fit(&mut model, &data, &[], &train).map_err(|e| e.to_string())?;
    let acc = evaluate(&model, &data, 64).map_err(|e| e.to_string())?.accuracy;
    if acc < 1.0 {
        return Err(format!("training accuracy {acc:.4} after 200 epochs"));
    }
    within(start.elapsed(), Duration::from_secs(60), format!("training accuracy {acc:.4}"))
}

fn c4_oracles() -> Outcome {
    let (nb, corpora) = sweeps::nb_exhaustive(4, 1.0);
    let auc = sweeps::auc_sweep(50, 200, 5);
    let conv = sweeps::conv_sweep(20, 11);
    let detail = format!("nb {nb:.1e} over {corpora} corpora, auc {auc:.1e}, conv {conv:.1e}");
    check(nb <= 1e-12 && auc <= 1e-12 && conv <= 1e-12, detail.clone(), || detail)
}

fn corpus() -> (PathBuf, DataFormat, Option<usize>) {
    let public =
        std::env::var_os("SENTIMENT140_PATH").map(PathBuf::from).unwrap_or_else(|| workspace("data/sentiment140.csv"));
    if public.exists() {
        (public, DataFormat::Sentiment140, Some(20_000))
    } else {
        (workspace("data/substitute_corpus.csv"), DataFormat::TwoCol, None)
    }
}

fn workspace(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn c5_bands() -> Outcome {
    let start = Instant::now();
    let (path, format, limit) = corpus();
    let records = load_dataset(&path, format).map_err(|e| e.to_string())?;
    let records = subsample(records, limit, 42);
    let nb = run_baseline(BaselineKind::Nb, &records, 0.1, 42).map_err(|e| e.to_string())?;
    let svm = run_baseline(BaselineKind::Svm, &records, 0.1, 42).map_err(|e| e.to_string())?;
    let model_cfg = ModelConfig::new(Arch::KimCnn);
    let prepared =
        prepare(&records, TokenizeOptions::default(), 1, model_cfg.max_len, 0.1, 42).map_err(|e| e.to_string())?;
    let mut model = Model::build(model_cfg, prepared.vocab.len(), &mut Rng::new(42)).map_err(|e| e.to_string())?;
    let train = TrainConfig { epochs: 5, batch_size: 32, ..TrainConfig::default() };
    fit(&mut model, &prepared.train, &prepared.held_out, &train).map_err(|e| e.to_string())?;
    let cnn = evaluate(&model, &prepared.held_out, 256).map_err(|e| e.to_string())?.accuracy;
    let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
    let detail = format!("{name} ({} records): nb {nb:.4}, svm {svm:.4}, kim_cnn {cnn:.4}", records.len());
    let ok = (0.70..=0.84).contains(&nb) && (0.66..=0.80).contains(&svm) && (cnn - nb).abs() <= 0.05;
    if !ok {
        return Err(detail);
    }
    within(start.elapsed(), Duration::from_secs(30 * 60), detail)
}

fn c6_determinism() -> Outcome {
    let data = workspace("data/substitute_corpus.csv");
    let run = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = dir.path().join("run.toml");
        let text = format!(
            "seed = 9\noutput_dir = {:?}\n[data]\npath = {:?}\nlimit = 400\n[model]\narch = \"kim_cnn\"\n\
             num_filters = 4\nemb_dim = 8\nmax_len = 20\n[train]\nepochs = 2\n",
            dir.path().join("out"),
            data,
        );
        std::fs::write(&config, text).map_err(|e| e.to_string())?;
        let outcome = cli::cmd_train(&config, None).map_err(|e| e.to_string())?;
        let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
        Ok((read(&outcome.checkpoint)?, read(&outcome.history)?))
    };
    let a = run()?;
    let b = run()?;
    check(a == b, format!("checkpoint {} bytes, history {} bytes identical", a.0.len(), a.1.len()), || {
        "artifacts differ between runs".into()
    })
}

fn c7_round_trip() -> Outcome {
    let docs: Vec<Vec<String>> = (0..30).map(|i| vec![format!("w{i}"), format!("v{}", i % 7)]).collect();
    let vocab = build_vocab(&docs, 1).map_err(|e| e.to_string())?;
    let mut rng = Rng::new(77);
    let mut checked = 0;
    for arch in Arch::ALL {
        let mut cfg = ModelConfig::new(arch);
        cfg.max_len = 12;
        cfg.emb_dim = 6;
        cfg.num_filters = 3;
        cfg.hidden = 5;
        cfg.fc_hidden = 7;
        cfg.filter_sizes = match arch {
            Arch::Bilstm => vec![],
            Arch::DeepCnn => vec![1, 2, 3],
            Arch::CnnBilstm => vec![1, 3],
            Arch::KimCnn => vec![2, 3],
        };
        let model = Model::build(cfg, vocab.len(), &mut Rng::new(arch as u64)).map_err(|e| e.to_string())?;
        let ck = Checkpoint { model, vocab: vocab.clone(), tokenize: TokenizeOptions::default() };
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("m.txcn");
        ck.save(&path).map_err(|e| e.to_string())?;
        let back = Checkpoint::load(&path).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let rows: Vec<Vec<usize>> =
                (0..1 + rng.below(4)).map(|_| (0..12).map(|_| rng.below(vocab.len())).collect()).collect();
            let ids = IdBatch::from_rows(&rows).map_err(|e| e.to_string())?;
            let bits = |m: &Model| -> Result<Vec<u64>, String> {
                Ok(m.forward(&ids).map_err(|e| e.to_string())?.data().iter().map(|v| v.to_bits()).collect())
            };
            if bits(&ck.model)? != bits(&back.model)? {
                return Err(format!("{arch:?} forward differs after reload"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} forwards bitwise equal across {} architectures", Arch::ALL.len()))
}

fn c8_bilstm() -> Outcome {
    let matched = sweeps::reversal_duality(20, 13);
    let widths = sweeps::merge_widths(&[1, 2, 8]);
    let widths_ok = widths.iter().all(|&(h, c, w)| c == 2 * h && w == h);
    check(matched == 20 && widths_ok, format!("duality 20/20, widths {widths:?}"), || {
        format!("duality {matched}/20, widths (H, concat, weighted) {widths:?}")
    })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient integrity", c1_gradients),
        ("shape conformance", c2_shapes),
        ("overfit capacity", c3_overfit),
        ("oracle equivalences", c4_oracles),
        ("accuracy bands", c5_bands),
        ("determinism", c6_determinism),
        ("checkpoint round trip", c7_round_trip),
        ("bi-lstm contracts", c8_bilstm),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
