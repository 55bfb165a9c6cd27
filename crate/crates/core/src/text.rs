//! Tokenizer, vocabulary, id encoding and embedding tables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rng, Tensor};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

/// Stopword list, version 1. Negations are deliberately absent.
pub const STOPWORDS: [&str; 25] = [
    "the", "a", "an", "and", "or", "but", "of", "to", "in", "on", "at", "for", "with", "is", "are", "was", "were",
    "be", "been", "it", "this", "that", "as", "by", "from",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeOptions {
    pub lowercase: bool,
    pub strip_stopwords: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        Self { lowercase: true, strip_stopwords: false }
    }
}

fn is_url(word: &str) -> bool {
    let w = word.to_lowercase();
    w.starts_with("http://") || w.starts_with("https://") || w.starts_with("www.")
}

fn is_mention(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next() == Some('@') && chars.any(|c| c.is_alphanumeric() || c == '_')
}

/// Splits raw text into tokens.
///
/// URLs become `<url>`, @-mentions become `<user>`; everything else is
/// lowercased (when requested), apostrophes are dropped, other punctuation
/// separates words.
pub fn tokenize(text: &str, options: TokenizeOptions) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        if is_url(word) {
            tokens.push(URL_TOKEN.to_string());
            continue;
        }
        if is_mention(word) {
            tokens.push(USER_TOKEN.to_string());
            continue;
        }
        let cleaned: String = word
            .chars()
            .filter(|&c| c != '\'' && c != '\u{2019}')
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        let cleaned = if options.lowercase { cleaned.to_lowercase() } else { cleaned };
        for piece in cleaned.split_whitespace() {
            if options.strip_stopwords && STOPWORDS.contains(&piece.to_lowercase().as_str()) {
                continue;
            }
            tokens.push(piece.to_string());
        }
    }
    tokens
}

/// Token to id mapping. Ids 0 and 1 are reserved for padding and unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self { token_to_id: BTreeMap::new(), id_to_token: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()] }
    }
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its id-ordered token list (as stored in checkpoints).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD_TOKEN || tokens[UNK_ID] != UNK_TOKEN {
            return Err(Error::Format("vocabulary must start with <pad>, <unk>".into()));
        }
        let mut token_to_id = BTreeMap::new();
        for (id, tok) in tokens.iter().enumerate().skip(2) {
            if token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Self { token_to_id, id_to_token: tokens })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 2
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Builds a vocabulary from tokenized documents.
///
/// Tokens seen at least `min_count` times get ids from 2 upward in descending
/// frequency, ties broken lexicographically.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::Argument("min_count must be at least 1".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for tok in doc {
            *counts.entry(tok.as_ref()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> =
        counts.into_iter().filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = Vocabulary::default().id_to_token;
    tokens.extend(kept.into_iter().map(|(t, _)| t.to_string()));
    Vocabulary::from_tokens(tokens)
}

/// Padded id sequence with a binary label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedExample {
    pub ids: Vec<usize>,
    pub label: u8,
}

/// Maps the first `max_len` tokens to ids and right-pads with `PAD_ID`.
pub fn encode<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = tokens.iter().take(max_len).map(|t| vocab.id(t.as_ref())).collect();
    ids.resize(max_len, PAD_ID);
    ids
}

/// Tokens for every non-pad id.
pub fn decode(ids: &[usize], vocab: &Vocabulary) -> Vec<String> {
    ids.iter().filter(|&&id| id != PAD_ID).map(|&id| vocab.token(id).unwrap_or(UNK_TOKEN).to_string()).collect()
}

/// Word-vector table; row `PAD_ID` is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub table: Tensor,
    pub trainable: bool,
}

pub const EMBEDDING_INIT_RANGE: f64 = 0.25;

impl EmbeddingMatrix {
    pub fn random(vocab_size: usize, emb_dim: usize, rng: &mut Rng) -> Result<Self> {
        let mut table = rng.uniform(&[vocab_size, emb_dim], -EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE)?;
        table.data_mut()[..emb_dim].fill(0.0);
        Ok(Self { table, trainable: true })
    }

    pub fn emb_dim(&self) -> usize {
        self.table.dim(1)
    }

    /// Parses whitespace-separated `token v1 .. v_emb_dim` lines.
    ///
    /// Rows for tokens in both the file and `vocab` are copied; every other
    /// row is random. Returns the table and how many vocabulary rows were
    /// covered.
    pub fn from_pretrained_text(
        text: &str,
        vocab: &Vocabulary,
        emb_dim: usize,
        rng: &mut Rng,
    ) -> Result<(Self, usize)> {
        let mut matrix = Self::random(vocab.len(), emb_dim, rng)?;
        let mut covered = vec![false; vocab.len()];
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse { line: line_no, msg: format!("{f:?} is not a decimal number") })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != emb_dim {
                return Err(Error::Format(format!(
                    "line {line_no}: vector for {token:?} has width {}, expected {emb_dim}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { line: line_no, msg: "non-finite value".into() });
            }
            match vocab.get(token) {
                Some(id) if id >= 2 => {
                    matrix.table.data_mut()[id * emb_dim..(id + 1) * emb_dim].copy_from_slice(&values);
                    covered[id] = true;
                }
                _ => {}
            }
        }
        let coverage = covered.iter().filter(|&&c| c).count();
        Ok((matrix, coverage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn tokenize_cases() {
        let opts = TokenizeOptions::default();
        assert_eq!(tokenize("I love this!", opts), toks(&["i", "love", "this"]));
        let strip = TokenizeOptions { strip_stopwords: true, ..opts };
        assert!(tokenize("the a the", strip).is_empty());
        assert_eq!(tokenize("see http://x.co @bob", opts), toks(&["see", "<url>", "<user>"]));
        assert!(tokenize("", opts).is_empty());
        assert_eq!(tokenize("don't stop,now", opts), toks(&["dont", "stop", "now"]));
        assert_eq!(tokenize("Café ÜBER 😀", opts), toks(&["café", "über"]));
    }

    #[test]
    fn vocab_frequency_order_and_threshold() {
        let corpus = alloc::vec![toks(&["a", "a", "b"])];
        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!((v.id("a"), v.id("b")), (2, 3));
        let v2 = build_vocab(&corpus, 2).unwrap();
        assert_eq!(v2.len(), 3);
        assert_eq!(v2.id("b"), UNK_ID);
        let tie = build_vocab(&[toks(&["z", "y", "x"])], 1).unwrap();
        assert_eq!(tie.tokens()[2..], toks(&["x", "y", "z"])[..]);
        assert!(build_vocab::<String>(&[], 1).unwrap().is_empty());
        assert!(build_vocab(&corpus, 0).is_err());
    }

    #[test]
    fn encode_pads_truncates_and_maps_unknowns() {
        let v = build_vocab(&[toks(&["a"])], 1).unwrap();
        assert_eq!(encode(&["a"], &v, 4), [2, 0, 0, 0]);
        let long: Vec<&str> = core::iter::repeat("a").take(50).collect();
        assert_eq!(encode(&long, &v, 40).len(), 40);
        assert_eq!(encode(&["zzz"], &v, 3), [UNK_ID, 0, 0]);
    }

    #[test]
    fn pretrained_copy_and_errors() {
        let v = build_vocab(&[toks(&["good", "bad"])], 1).unwrap();
        let mut rng = Rng::new(1);
        let (m, cov) = EmbeddingMatrix::from_pretrained_text("good 0.1 0.2\nother 1 1\n", &v, 2, &mut rng).unwrap();
        assert_eq!(cov, 1);
        let id = v.id("good");
        assert_eq!(&m.table.data()[id * 2..id * 2 + 2], &[0.1, 0.2]);
        assert_eq!(&m.table.data()[..2], &[0.0, 0.0]);

        let (_, cov0) = EmbeddingMatrix::from_pretrained_text("", &v, 2, &mut rng).unwrap();
        assert_eq!(cov0, 0);
        let bad = EmbeddingMatrix::from_pretrained_text("good 0.1\nbad x 1\n", &v, 2, &mut rng);
        assert!(matches!(bad, Err(Error::Format(_))));
        let bad = EmbeddingMatrix::from_pretrained_text("good 0.1 0.2\nbad x 1\n", &v, 2, &mut rng);
        assert_eq!(bad.unwrap_err(), Error::Parse { line: 2, msg: "\"x\" is not a decimal number".into() });
    }
}
