//! Dataset → vocabulary → padded examples, and the bag-of-words baselines.

use textcnn_core::baselines::{nb_fit, nb_predict, svm_fit, BowVector, Chi2LogReg, DEFAULT_C_GRID};
use textcnn_core::metrics::accuracy;
use textcnn_core::text::{build_vocab, encode, tokenize, TokenizeOptions, TokenizedExample, Vocabulary, UNK_ID};
use textcnn_core::training::train_val_split;
use textcnn_core::Rng;

use crate::dataset::Record;
use crate::error::{AppError, AppResult};

const SUBSAMPLE_STREAM: u64 = 0x5eed_5ab5;
const SVM_STREAM: u64 = 0x5eed_5f30;

pub const NB_ALPHA: f64 = 1.0;
pub const SVM_LAMBDA: f64 = 1e-4;
pub const SVM_EPOCHS: usize = 5;
pub const CHI2_K: usize = 1000;
pub const CV_FOLDS: usize = 3;

/// Keeps `limit` records chosen uniformly with the seed, in file order.
pub fn subsample(records: Vec<Record>, limit: Option<usize>, seed: u64) -> Vec<Record> {
    match limit {
        Some(k) if k < records.len() => {
            let mut picked = Rng::with_stream(seed, SUBSAMPLE_STREAM).permutation(records.len());
            picked.truncate(k);
            picked.sort_unstable();
            let mut keep = vec![false; records.len()];
            for i in picked {
                keep[i] = true;
            }
            records.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect()
        }
        _ => records,
    }
}

/// Tokenized training and held-out examples with a vocabulary built from the
/// training part only.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub train: Vec<TokenizedExample>,
    pub held_out: Vec<TokenizedExample>,
}

pub fn prepare(
    records: &[Record],
    options: TokenizeOptions,
    min_count: usize,
    max_len: usize,
    held_out_fraction: f64,
    seed: u64,
) -> AppResult<Prepared> {
    let (train_idx, held_idx) = train_val_split(records.len(), held_out_fraction, seed)?;
    let tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text, options)).collect();
    let train_tokens: Vec<Vec<String>> = train_idx.iter().map(|&i| tokens[i].clone()).collect();
    let vocab = build_vocab(&train_tokens, min_count)?;
    let example = |i: usize| TokenizedExample { ids: encode(&tokens[i], &vocab, max_len), label: records[i].label };
    Ok(Prepared {
        train: train_idx.iter().map(|&i| example(i)).collect(),
        held_out: held_idx.iter().map(|&i| example(i)).collect(),
        vocab,
    })
}

/// Encodes raw text for a trained model.
pub fn encode_text(text: &str, vocab: &Vocabulary, options: TokenizeOptions, max_len: usize) -> Vec<usize> {
    encode(&tokenize(text, options), vocab, max_len)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineKind {
    Nb,
    Svm,
    #[value(name = "chi2logreg")]
    Chi2LogReg,
}

/// Token counts, ignoring padding and out-of-vocabulary tokens.
pub fn bag_of_words(tokens: &[String], vocab: &Vocabulary) -> BowVector {
    let ids: Vec<usize> = tokens.iter().map(|t| vocab.id(t)).filter(|&id| id != UNK_ID).collect();
    BowVector::from_ids(&ids)
}

/// Fits a baseline on a seeded split and returns its held-out accuracy.
/// Stopwords are removed for bag-of-words features.
pub fn run_baseline(kind: BaselineKind, records: &[Record], held_out_fraction: f64, seed: u64) -> AppResult<f64> {
    let options = TokenizeOptions { lowercase: true, strip_stopwords: true };
    let (train_idx, test_idx) = train_val_split(records.len(), held_out_fraction, seed)?;
    if test_idx.is_empty() {
        return Err(AppError::Data("the held-out split is empty; use more data or a larger fraction".into()));
    }
    let tokens: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text, options)).collect();
    let train_tokens: Vec<Vec<String>> = train_idx.iter().map(|&i| tokens[i].clone()).collect();
    let vocab = build_vocab(&train_tokens, 1)?;
    let bows = |idx: &[usize]| -> (Vec<BowVector>, Vec<u8>) {
        idx.iter().map(|&i| (bag_of_words(&tokens[i], &vocab), records[i].label)).unzip()
    };
    let (train_docs, train_labels) = bows(&train_idx);
    let (test_docs, test_labels) = bows(&test_idx);
    let v = vocab.len();
    let preds: Vec<u8> = match kind {
        BaselineKind::Nb => {
            let m = nb_fit(&train_docs, &train_labels, v, NB_ALPHA)?;
            test_docs.iter().map(|d| nb_predict(&m, d).0).collect()
        }
        BaselineKind::Svm => {
            let mut rng = Rng::with_stream(seed, SVM_STREAM);
            let m = svm_fit(&train_docs, &train_labels, v, SVM_LAMBDA, SVM_EPOCHS, &mut rng)?;
            test_docs.iter().map(|d| m.predict(d)).collect()
        }
        BaselineKind::Chi2LogReg => {
            let m = Chi2LogReg::fit(&train_docs, &train_labels, v, CHI2_K.min(v), &DEFAULT_C_GRID, CV_FOLDS, seed)?;
            test_docs.iter().map(|d| m.predict(d)).collect()
        }
    };
    Ok(accuracy(&preds, &test_labels)?)
}
