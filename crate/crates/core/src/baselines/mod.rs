//! Bag-of-words baselines: multinomial Naive Bayes, a linear SVM trained
//! with Pegasos, and χ² feature selection feeding cross-validated logistic
//! regression.

mod logreg;
mod nb;
mod svm;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::text::PAD_ID;
use crate::{Error, Result};

pub use logreg::{
    chi2_scores, chi2_select, logreg_cv_fit, logreg_fit, logreg_gradient, logreg_objective, Chi2LogReg, LogReg,
    DEFAULT_C_GRID,
};
pub use nb::{nb_fit, nb_posterior, nb_predict, NbModel};
pub use svm::{svm_fit, svm_objective, SvmModel};

/// Sparse token counts of one document, sorted by id. Every count is at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BowVector {
    entries: Vec<(usize, u32)>,
}

impl BowVector {
    /// Counts ids, ignoring the padding id.
    pub fn from_ids(ids: &[usize]) -> Self {
        let mut counts = BTreeMap::new();
        for &id in ids.iter().filter(|&&id| id != PAD_ID) {
            *counts.entry(id).or_insert(0u32) += 1;
        }
        Self { entries: counts.into_iter().collect() }
    }

    /// Builds from `(id, count)` pairs; zero counts are dropped, repeated ids summed.
    pub fn from_counts(pairs: &[(usize, u32)]) -> Self {
        let mut counts = BTreeMap::new();
        for &(id, c) in pairs.iter().filter(|(_, c)| *c > 0) {
            *counts.entry(id).or_insert(0u32) += c;
        }
        Self { entries: counts.into_iter().collect() }
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn max_id(&self) -> Option<usize> {
        self.entries.last().map(|&(id, _)| id)
    }
}

/// Checks matching lengths, binary labels and the presence of both classes.
fn check_two_class(n_docs: usize, labels: &[u8]) -> Result<[usize; 2]> {
    if n_docs != labels.len() {
        return Err(Error::Argument(format!("{n_docs} documents for {} labels", labels.len())));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Argument(format!("label {l} is not binary")));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let counts = [labels.len() - pos, pos];
    if counts.contains(&0) {
        return Err(Error::Argument("training data must contain both classes".into()));
    }
    Ok(counts)
}

fn check_vocab(docs: &[BowVector], vocab_size: usize) -> Result<()> {
    if let Some(id) = docs.iter().filter_map(BowVector::max_id).find(|&id| id >= vocab_size) {
        return Err(Error::Argument(format!("token id {id} is outside the vocabulary of {vocab_size}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bow_counts_skip_padding() {
        let b = BowVector::from_ids(&[3, 0, 2, 3, 0]);
        assert_eq!(b.entries(), [(2, 1), (3, 2)]);
        assert_eq!(b.total(), 3);
        assert_eq!(BowVector::from_counts(&[(4, 0), (1, 2), (1, 1)]).entries(), [(1, 3)]);
    }
}
