//! Labelled text files and pretrained word vectors.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use textcnn_core::text::{EmbeddingMatrix, Vocabulary};
use textcnn_core::Rng;

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    /// `label,text` with label 0 or 1.
    #[default]
    TwoCol,
    /// Six quoted fields: target (0 or 4), id, date, query, user, text.
    Sentiment140,
}

/// One labelled document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub label: u8,
    pub text: String,
}

/// Reads a comma-separated dataset, preserving record order.
///
/// Fields are decoded as UTF-8 with invalid bytes replaced, since the public
/// Sentiment140 dump is not clean UTF-8. A `two_col` file may begin with a
/// `label,text` header.
pub fn load_dataset(path: &Path, format: DataFormat) -> AppResult<Vec<Record>> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    parse_dataset(&bytes, format).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

pub fn parse_dataset(bytes: &[u8], format: DataFormat) -> Result<Vec<Record>, String> {
    check_quotes(bytes)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
    let mut out = Vec::new();
    for (idx, rec) in reader.byte_records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| format!("row {row}: {e}"))?;
        let field = |i: usize| String::from_utf8_lossy(rec.get(i).unwrap_or_default()).into_owned();
        let (target, text) = match format {
            DataFormat::TwoCol => {
                if rec.len() != 2 {
                    return Err(format!("row {row}: expected 2 fields, found {}", rec.len()));
                }
                if row == 1 && field(0).trim() == "label" {
                    continue;
                }
                (field(0), field(1))
            }
            DataFormat::Sentiment140 => {
                if rec.len() != 6 {
                    return Err(format!("row {row}: expected 6 fields, found {}", rec.len()));
                }
                (field(0), field(5))
            }
        };
        let label = match (format, target.trim()) {
            (DataFormat::TwoCol, "0") | (DataFormat::Sentiment140, "0") => 0,
            (DataFormat::TwoCol, "1") | (DataFormat::Sentiment140, "4") => 1,
            (_, other) => return Err(format!("row {row}: unknown target value {other:?}")),
        };
        out.push(Record { label, text });
    }
    Ok(out)
}

/// The csv reader accepts a quoted field that runs to end of file; reject
/// it instead. Only a quote at the start of a field opens one.
fn check_quotes(bytes: &[u8]) -> Result<(), String> {
    let mut open_at = None;
    let mut field_start = true;
    let mut line = 1;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'\n' {
            line += 1;
        }
        if open_at.is_some() {
            if b == b'"' {
                if bytes.get(i + 1) == Some(&b'"') {
                    i += 1;
                } else {
                    open_at = None;
                }
            }
        } else if b == b'"' && field_start {
            open_at = Some(line);
        }
        field_start = open_at.is_none() && matches!(b, b',' | b'\n' | b'\r');
        i += 1;
    }
    match open_at {
        Some(l) => Err(format!("unbalanced quote opened on line {l}")),
        None => Ok(()),
    }
}

/// Loads `token v1 .. v_d` lines into a table for `vocab`, returning the
/// matrix and the number of vocabulary rows the file covered.
pub fn load_pretrained(
    path: &Path,
    vocab: &Vocabulary,
    emb_dim: usize,
    rng: &mut Rng,
) -> AppResult<(EmbeddingMatrix, usize)> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    EmbeddingMatrix::from_pretrained_text(&text, vocab, emb_dim, rng)
        .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}
