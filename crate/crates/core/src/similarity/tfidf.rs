//! Character n-gram TF-IDF with smoothed idf and L2-normalised rows.

use crate::identity::whitespace_collapse;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub ngram_range: (usize, usize),
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub fitted_on: usize,
}

/// Lowercased, whitespace-collapsed character n-grams for every `n` in the
/// inclusive range.
fn ngrams(text: &str, (lo, hi): (usize, usize)) -> Vec<String> {
    let chars: Vec<char> = whitespace_collapse(&text.to_lowercase()).chars().collect();
    let mut out = Vec::new();
    for n in lo..=hi {
        if chars.len() >= n {
            out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
        }
    }
    out
}

pub fn fit_tfidf(texts: &[String]) -> TfidfModel {
    fit_tfidf_range(texts, (3, 5))
}

pub fn fit_tfidf_range(texts: &[String], ngram_range: (usize, usize)) -> TfidfModel {
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        let distinct: BTreeSet<String> = ngrams(text, ngram_range).into_iter().collect();
        for gram in distinct {
            *df.entry(gram).or_default() += 1;
        }
    }
    let n = texts.len() as f64;
    let mut vocabulary = BTreeMap::new();
    let mut idf = Vec::with_capacity(df.len());
    for (index, (gram, count)) in df.into_iter().enumerate() {
        vocabulary.insert(gram, index);
        idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
    }
    TfidfModel {
        ngram_range,
        vocabulary,
        idf,
        fitted_on: texts.len(),
    }
}

impl TfidfModel {
    /// Sparse L2-normalised row; empty when no n-gram is in vocabulary.
    pub fn transform(&self, text: &str) -> BTreeMap<usize, f64> {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for gram in ngrams(text, self.ngram_range) {
            if let Some(&idx) = self.vocabulary.get(&gram) {
                *row.entry(idx).or_default() += 1.0;
            }
        }
        for (idx, v) in row.iter_mut() {
            *v *= self.idf[*idx];
        }
        let norm = row.values().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.values_mut().for_each(|v| *v /= norm);
        }
        row
    }
}

pub fn tfidf_cosine(model: &TfidfModel, a: &str, b: &str) -> f64 {
    let (ra, rb) = (model.transform(a), model.transform(b));
    let (small, large) = if ra.len() <= rb.len() {
        (&ra, &rb)
    } else {
        (&rb, &ra)
    };
    let dot: f64 = small
        .iter()
        .filter_map(|(i, v)| large.get(i).map(|w| v * w))
        .sum();
    dot.clamp(0.0, 1.0)
}
