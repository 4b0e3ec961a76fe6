//! Evaluation of detectors against labelled step pairs.

pub mod agreement;
pub mod metrics;
pub mod pairs;
pub mod stats;

use crate::detect::{Strategy, StrategyConfig};
use crate::error::{Error, Result};
use crate::identity::{tokenize, whitespace_collapse, ParamMode, SynonymTable};
use crate::relabel::{relabel_benchmark, RelabelSummary, RuleLists};
use crate::similarity::embedding::{cosine, embed_batch, EmbeddingProvider};
use crate::similarity::levenshtein::levenshtein_ratio_with;
use crate::similarity::tfidf::{fit_tfidf, tfidf_cosine};
use crate::similarity::token::token_jaccard;
use agreement::{cohen_kappa, Agreement};
use metrics::{
    bootstrap_ci, default_grid, kfold_cv, threshold_sweep, CvSummary, MetricPoint,
    DEFAULT_RESAMPLES,
};
use pairs::{LabelCounts, LabeledPair};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

/// A pair scorer: one of the detection strategies or a lexical baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    Exact,
    NearExact,
    Semantic,
    Hybrid,
    TokenJaccard,
    Tfidf,
}

impl Scorer {
    pub const ALL: [Scorer; 6] = [
        Scorer::Exact,
        Scorer::NearExact,
        Scorer::Semantic,
        Scorer::Hybrid,
        Scorer::TokenJaccard,
        Scorer::Tfidf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scorer::Exact => "exact",
            Scorer::NearExact => "near_exact",
            Scorer::Semantic => "semantic",
            Scorer::Hybrid => "hybrid",
            Scorer::TokenJaccard => "token_jaccard",
            Scorer::Tfidf => "tfidf",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Scorer::TokenJaccard | Scorer::Tfidf)
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Scorer::Semantic | Scorer::Hybrid)
    }
}

impl From<Strategy> for Scorer {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Exact => Scorer::Exact,
            Strategy::NearExact => Scorer::NearExact,
            Strategy::Semantic => Scorer::Semantic,
            Strategy::Hybrid => Scorer::Hybrid,
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == key)
            .ok_or_else(|| Error::Invalid(format!("unknown scorer `{s}`")))
    }
}

/// Similarity score in [0, 1] for every pair under `scorer`.
///
/// Exact scores 1 for identical collapsed texts. Hybrid scores the cosine
/// when the edit ratio falls inside the configured band and 0 otherwise;
/// identical texts score 1. The TF-IDF baseline is fitted on the distinct
/// texts of the pair set.
pub fn score_pairs(
    scorer: Scorer,
    pairs: &[LabeledPair],
    config: &StrategyConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<f64>> {
    let texts: Vec<(String, String)> = pairs
        .iter()
        .map(|p| {
            (
                whitespace_collapse(&p.text_a),
                whitespace_collapse(&p.text_b),
            )
        })
        .collect();
    let ratio = |a: &str, b: &str| levenshtein_ratio_with(a, b, config.ratio_variant);
    match scorer {
        Scorer::Exact => Ok(texts
            .iter()
            .map(|(a, b)| f64::from(u8::from(a == b)))
            .collect()),
        Scorer::NearExact => Ok(texts.iter().map(|(a, b)| ratio(a, b)).collect()),
        Scorer::TokenJaccard => Ok(texts
            .iter()
            .map(|(a, b)| {
                token_jaccard(
                    &tokenize(a, ParamMode::QuotedOnly),
                    &tokenize(b, ParamMode::QuotedOnly),
                )
            })
            .collect()),
        Scorer::Tfidf => {
            let corpus: Vec<String> = texts
                .iter()
                .flat_map(|(a, b)| [a.clone(), b.clone()])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let model = fit_tfidf(&corpus);
            Ok(texts
                .iter()
                .map(|(a, b)| tfidf_cosine(&model, a, b))
                .collect())
        }
        Scorer::Semantic | Scorer::Hybrid => {
            let provider = provider.ok_or_else(|| {
                Error::Invalid(format!("scorer {scorer} needs an embedding provider"))
            })?;
            let flat: Vec<String> = texts
                .iter()
                .flat_map(|(a, b)| [a.clone(), b.clone()])
                .collect();
            let vectors = embed_batch(provider, &flat)?;
            texts
                .iter()
                .enumerate()
                .map(|(i, (a, b))| {
                    let cos = cosine(&vectors[2 * i], &vectors[2 * i + 1])?.max(0.0);
                    Ok(match scorer {
                        Scorer::Semantic => cos,
                        _ if a == b => 1.0,
                        _ if config.hybrid_band.contains(ratio(a, b)) => cos,
                        _ => 0.0,
                    })
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub resamples: usize,
    pub bootstrap_seed: u64,
    pub folds: usize,
    pub cv_seed: u64,
    pub grid: Vec<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            resamples: DEFAULT_RESAMPLES,
            bootstrap_seed: 20_240_601,
            folds: 5,
            cv_seed: 20_240_601,
            grid: default_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerReport {
    pub scorer: Scorer,
    pub baseline: bool,
    /// Sweep against the primary labels.
    pub sweep: Vec<MetricPoint>,
    /// Best primary operating point with bootstrap intervals.
    pub primary: MetricPoint,
    /// Score-free labels evaluated at the primary best threshold.
    pub score_free: MetricPoint,
    pub cv: Option<CvSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub pair_count: usize,
    pub primary_counts: LabelCounts,
    pub score_free_counts: LabelCounts,
    pub config: CalibrationConfig,
    pub scorers: Vec<ScorerReport>,
    /// Agreement between the primary and score-free labelings.
    pub protocol_agreement: Option<Agreement>,
    pub relabel: RelabelSummary,
}

/// Evaluate one score vector under both label protocols.
pub fn evaluate_scores(
    scorer: Scorer,
    scores: &[f64],
    primary: &[bool],
    score_free: &[bool],
    config: &CalibrationConfig,
) -> Result<ScorerReport> {
    let sweep = threshold_sweep(scores, primary, &config.grid)?;
    let t = sweep.best.threshold;
    let primary_point = bootstrap_ci(scores, primary, t, config.resamples, config.bootstrap_seed)?;
    let free_point = bootstrap_ci(
        scores,
        score_free,
        t,
        config.resamples,
        config.bootstrap_seed,
    )?;
    let (cv, cv_error) = match kfold_cv(scores, primary, config.folds, config.cv_seed, &config.grid)
    {
        Ok(s) => (Some(s), None),
        Err(e @ Error::SingleClassFold { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    Ok(ScorerReport {
        scorer,
        baseline: scorer.is_baseline(),
        sweep: sweep.points,
        primary: primary_point,
        score_free: free_point,
        cv,
        cv_error,
    })
}

/// Full calibration run: relabel under the score-free protocol, then sweep,
/// bootstrap and cross-validate every requested scorer.
pub fn calibrate(
    pairs: &[LabeledPair],
    scorers: &[Scorer],
    strategy_config: &StrategyConfig,
    config: &CalibrationConfig,
    provider: Option<&dyn EmbeddingProvider>,
    synonyms: &SynonymTable,
    rules: &RuleLists,
) -> Result<CalibrationReport> {
    if pairs.is_empty() {
        return Err(Error::Invalid(
            "no labelled pairs to calibrate against".into(),
        ));
    }
    let (relabelled, relabel) = relabel_benchmark(pairs, synonyms, rules);
    let primary: Vec<bool> = pairs.iter().map(|p| p.label.is_duplicate()).collect();
    let score_free: Vec<bool> = relabelled.iter().map(|p| p.label.is_duplicate()).collect();
    let mut reports = Vec::with_capacity(scorers.len());
    for &scorer in scorers {
        let scores = score_pairs(scorer, pairs, strategy_config, provider)?;
        reports.push(evaluate_scores(
            scorer,
            &scores,
            &primary,
            &score_free,
            config,
        )?);
    }
    Ok(CalibrationReport {
        pair_count: pairs.len(),
        primary_counts: LabelCounts::of(pairs),
        score_free_counts: LabelCounts::of(&relabelled),
        config: config.clone(),
        scorers: reports,
        protocol_agreement: Some(cohen_kappa(&primary, &score_free)?),
        relabel,
    })
}
