//! TF-IDF vectorization.
//!
//! The default weighting is the literal count-times-log form
//! `tf(t, d) * ln(|D| / (1 + df(t)))`: raw term counts, natural log, no
//! smoothing and no row normalization. Terms present in nearly every training
//! document therefore get zero or negative weights; they are not clipped.
//! [`TfidfVariant::SmoothedL2`] offers the common smoothed, L2-normalized
//! alternative `tf * (ln((1 + |D|) / (1 + df)) + 1)` for comparison.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedDoc;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TfidfError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfidfVariant {
    /// `tf * ln(N / (1 + df))`, unsmoothed and unnormalized.
    #[default]
    LogRatio,
    SmoothedL2,
}

/// Fitted term index with document frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawVocabulary", into = "RawVocabulary")]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    max_features: usize,
    min_df: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawVocabulary {
    n_docs: usize,
    max_features: usize,
    min_df: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
}

impl TryFrom<RawVocabulary> for Vocabulary {
    type Error = TfidfError;

    fn try_from(raw: RawVocabulary) -> Result<Self, Self::Error> {
        if raw.terms.len() != raw.doc_freq.len() {
            return Err(TfidfError::Corrupt("terms and doc_freq differ in length".into()));
        }
        let index: HashMap<String, usize> = raw
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != raw.terms.len() {
            return Err(TfidfError::Corrupt("duplicate terms".into()));
        }
        Ok(Self {
            terms: raw.terms,
            doc_freq: raw.doc_freq,
            n_docs: raw.n_docs,
            max_features: raw.max_features,
            min_df: raw.min_df,
            index,
        })
    }
}

impl From<Vocabulary> for RawVocabulary {
    fn from(v: Vocabulary) -> Self {
        RawVocabulary {
            n_docs: v.n_docs,
            max_features: v.max_features,
            min_df: v.min_df,
            terms: v.terms,
            doc_freq: v.doc_freq,
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
            && self.doc_freq == other.doc_freq
            && self.n_docs == other.n_docs
            && self.max_features == other.max_features
            && self.min_df == other.min_df
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of training documents, `|D|`.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn min_df(&self) -> usize {
        self.min_df
    }

    pub fn idf(&self, index: usize, variant: TfidfVariant) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_freq[index] as f64;
        match variant {
            TfidfVariant::LogRatio => (n / (1.0 + df)).ln(),
            TfidfVariant::SmoothedL2 => ((1.0 + n) / (1.0 + df)).ln() + 1.0,
        }
    }
}

/// Fits a vocabulary: terms with document frequency below `min_df` are
/// dropped, then at most `max_features` terms are kept, ranked by total
/// corpus frequency (descending) with lexicographic tie-breaking. Retained
/// terms are indexed in lexicographic order.
pub fn fit_vocabulary(
    train: &[TokenizedDoc],
    max_features: usize,
    min_df: usize,
) -> Result<Vocabulary, TfidfError> {
    if train.is_empty() {
        return Err(TfidfError::EmptyCorpus);
    }
    // term -> (df, total count)
    let mut stats: HashMap<&str, (usize, usize)> = HashMap::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (d, doc) in train.iter().enumerate() {
        for tok in &doc.tokens {
            let entry = stats.entry(tok.as_str()).or_insert((0, 0));
            entry.1 += 1;
            let last = seen.entry(tok.as_str()).or_insert(usize::MAX);
            if *last != d {
                *last = d;
                entry.0 += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize, usize)> = stats
        .into_iter()
        .filter(|(_, (df, _))| *df >= min_df)
        .map(|(t, (df, tf))| (t, df, tf))
        .collect();
    ranked.sort_unstable_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_features);

    let kept: BTreeMap<&str, usize> = ranked.into_iter().map(|(t, df, _)| (t, df)).collect();
    let terms: Vec<String> = kept.keys().map(|t| t.to_string()).collect();
    let doc_freq: Vec<usize> = kept.values().copied().collect();
    Vocabulary::try_from(RawVocabulary {
        n_docs: train.len(),
        max_features,
        min_df,
        terms,
        doc_freq,
    })
}

/// Transforms documents with the literal weighting (see module docs).
pub fn transform(docs: &[TokenizedDoc], vocab: &Vocabulary) -> FeatureMatrix {
    transform_with(docs, vocab, TfidfVariant::LogRatio)
}

pub fn transform_with(docs: &[TokenizedDoc], vocab: &Vocabulary, variant: TfidfVariant) -> FeatureMatrix {
    let idf: Vec<f64> = (0..vocab.len()).map(|i| vocab.idf(i, variant)).collect();
    FeatureMatrix::from_fn_rows(docs.len(), vocab.len(), |i, row| {
        for tok in &docs[i].tokens {
            if let Some(j) = vocab.index_of(tok) {
                row[j] += 1.0;
            }
        }
        for (v, w) in row.iter_mut().zip(&idf) {
            if *v != 0.0 {
                *v *= w;
            }
        }
        if variant == TfidfVariant::SmoothedL2 {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
    })
}
