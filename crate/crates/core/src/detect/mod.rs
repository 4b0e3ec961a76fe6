//! Duplicate detection strategies and clustering.
//!
//! Every strategy first buckets occurrences by identity digest. The
//! near-exact, semantic and hybrid strategies then compare one
//! representative text per bucket, union matching pairs, and expand the
//! resulting components back to occurrences.

mod union_find;

pub use union_find::UnionFind;

use crate::calibration::stats::{median, spearman_rho};
use crate::error::{Error, Result};
use crate::identity::{StepDigest, StepOccurrence};
use crate::similarity::embedding::{cosine, embed_batch, EmbeddingProvider, EmbeddingVector};
use crate::similarity::levenshtein::{
    levenshtein_ratio_with, levenshtein_within_with, max_distance, RatioVariant,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Exact,
    NearExact,
    Semantic,
    Hybrid,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Exact,
        Strategy::NearExact,
        Strategy::Semantic,
        Strategy::Hybrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Exact => "exact",
            Strategy::NearExact => "near_exact",
            Strategy::Semantic => "semantic",
            Strategy::Hybrid => "hybrid",
        }
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Strategy::Semantic | Strategy::Hybrid)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "exact" => Ok(Strategy::Exact),
            "near_exact" => Ok(Strategy::NearExact),
            "semantic" => Ok(Strategy::Semantic),
            "hybrid" => Ok(Strategy::Hybrid),
            _ => Err(Error::Invalid(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Inclusive Levenshtein-ratio band for the hybrid strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub cosine_threshold: f64,
    pub levenshtein_threshold: f64,
    pub hybrid_band: Band,
    /// Savings confidence per strategy. Semantic has no default.
    pub confidence: BTreeMap<Strategy, f64>,
    pub ratio_variant: RatioVariant,
    /// Unique-text count above which embedding strategies refuse to run
    /// all-pairs unless `allow_large` is set.
    pub all_pairs_limit: usize,
    pub allow_large: bool,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            cosine_threshold: 0.82,
            levenshtein_threshold: 0.80,
            hybrid_band: Band {
                low: 0.3,
                high: 0.95,
            },
            confidence: BTreeMap::from([
                (Strategy::Exact, 1.00),
                (Strategy::NearExact, 0.83),
                (Strategy::Hybrid, 0.57),
            ]),
            ratio_variant: RatioVariant::MaxLen,
            all_pairs_limit: 50_000,
            allow_large: false,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        unit("cosine_threshold", self.cosine_threshold)?;
        unit("levenshtein_threshold", self.levenshtein_threshold)?;
        unit("hybrid_band.low", self.hybrid_band.low)?;
        unit("hybrid_band.high", self.hybrid_band.high)?;
        if self.hybrid_band.low >= self.hybrid_band.high {
            return Err(Error::Invalid(format!(
                "hybrid band [{}, {}] must have low < high",
                self.hybrid_band.low, self.hybrid_band.high
            )));
        }
        for (s, c) in &self.confidence {
            unit(&format!("confidence.{s}"), *c)?;
        }
        Ok(())
    }

    pub fn confidence_for(&self, strategy: Strategy) -> Option<f64> {
        self.confidence.get(&strategy).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub strategy: Strategy,
    /// Indices into the occurrence slice the cluster was built from,
    /// ascending.
    pub members: Vec<usize>,
    pub canonical_text: String,
    pub occurrence_count: usize,
    pub distinct_files: usize,
    pub distinct_repos: usize,
}

impl Cluster {
    /// Assemble a cluster, deriving the canonical text and distinct counts
    /// from its members.
    pub fn from_members(
        strategy: Strategy,
        mut members: Vec<usize>,
        occurrences: &[StepOccurrence],
    ) -> Self {
        assert!(!members.is_empty(), "a cluster has at least one member");
        members.sort_unstable();
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        let mut files: BTreeSet<(&str, &str)> = BTreeSet::new();
        let mut repos: BTreeSet<&str> = BTreeSet::new();
        for &m in &members {
            let o = &occurrences[m];
            *freq.entry(o.normalized_text.as_str()).or_default() += 1;
            files.insert((o.repo_id.as_str(), o.path.as_str()));
            repos.insert(o.repo_id.as_str());
        }
        // BTreeMap iterates in text order, so the first maximum wins ties.
        let mut canonical = "";
        let mut best = 0;
        for (text, n) in freq {
            if n > best {
                best = n;
                canonical = text;
            }
        }
        Cluster {
            strategy,
            occurrence_count: members.len(),
            canonical_text: canonical.to_string(),
            distinct_files: files.len(),
            distinct_repos: repos.len(),
            members,
        }
    }
}

/// Order clusters by descending size, then canonical text, then first
/// member.
pub fn sort_clusters(clusters: &mut [Cluster]) {
    clusters.sort_by(|a, b| {
        b.occurrence_count
            .cmp(&a.occurrence_count)
            .then_with(|| a.canonical_text.cmp(&b.canonical_text))
            .then_with(|| a.members.first().cmp(&b.members.first()))
    });
}

fn require_provider(provider: Option<&dyn EmbeddingProvider>) -> Result<&dyn EmbeddingProvider> {
    provider.ok_or_else(|| Error::Invalid("this strategy needs an embedding provider".into()))
}

/// Decide whether two whitespace-collapsed texts match under `strategy`.
pub fn match_pair(
    strategy: Strategy,
    a: &str,
    b: &str,
    config: &StrategyConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<bool> {
    if a == b {
        // Identical texts share a digest; every strategy subsumes exact.
        return Ok(true);
    }
    match strategy {
        Strategy::Exact => Ok(false),
        Strategy::NearExact => Ok(levenshtein_within_with(
            a,
            b,
            config.levenshtein_threshold,
            config.ratio_variant,
        )),
        Strategy::Semantic | Strategy::Hybrid => {
            let provider = require_provider(provider)?;
            let v = embed_batch(provider, &[a.to_string(), b.to_string()])?;
            let cos = cosine(&v[0], &v[1])?;
            Ok(pair_passes(strategy, a, b, cos, config))
        }
    }
}

fn pair_passes(strategy: Strategy, a: &str, b: &str, cos: f64, config: &StrategyConfig) -> bool {
    if cos < config.cosine_threshold {
        return false;
    }
    match strategy {
        Strategy::Hybrid => {
            config
                .hybrid_band
                .contains(levenshtein_ratio_with(a, b, config.ratio_variant))
        }
        _ => true,
    }
}

/// One representative per digest, in digest order, with the occurrence
/// indices it stands for.
fn unique_texts(occurrences: &[StepOccurrence]) -> Vec<(&str, Vec<usize>)> {
    let mut by_digest: BTreeMap<StepDigest, (&str, Vec<usize>)> = BTreeMap::new();
    for (i, o) in occurrences.iter().enumerate() {
        by_digest
            .entry(o.identity_digest)
            .or_insert_with(|| (o.normalized_text.as_str(), Vec::new()))
            .1
            .push(i);
    }
    by_digest.into_values().collect()
}

fn near_exact_pairs(texts: &[&str], config: &StrategyConfig) -> Vec<(usize, usize)> {
    let theta = config.levenshtein_threshold;
    let variant = config.ratio_variant;
    let lens: Vec<usize> = texts.iter().map(|t| t.chars().count()).collect();
    let mut order: Vec<usize> = (0..texts.len()).collect();
    order.sort_by_key(|&i| (lens[i], i));
    (0..order.len())
        .into_par_iter()
        .flat_map_iter(|pos| {
            let i = order[pos];
            let mut hits = Vec::new();
            for &j in &order[pos + 1..] {
                // Lengths ascend; once the gap exceeds the admissible
                // distance it only grows, so the scan can stop.
                let gap = lens[j] - lens[i];
                match max_distance(lens[i], lens[j], theta, variant) {
                    Some(limit) if gap <= limit => {}
                    _ => break,
                }
                if levenshtein_within_with(texts[i], texts[j], theta, variant) {
                    hits.push((i.min(j), i.max(j)));
                }
            }
            hits
        })
        .collect()
}

fn embedding_pairs(
    strategy: Strategy,
    texts: &[&str],
    config: &StrategyConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(usize, usize)>> {
    if texts.len() > config.all_pairs_limit && !config.allow_large {
        return Err(Error::TooLarge {
            count: texts.len(),
            limit: config.all_pairs_limit,
        });
    }
    let owned: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
    let vectors: Vec<EmbeddingVector> = embed_batch(provider, &owned)?;
    Ok((0..texts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let vectors = &vectors;
            (i + 1..texts.len()).filter_map(move |j| {
                let cos = cosine(&vectors[i], &vectors[j]).unwrap_or(f64::NEG_INFINITY);
                pair_passes(strategy, texts[i], texts[j], cos, config).then_some((i, j))
            })
        })
        .collect())
}

/// Cluster `occurrences` under `strategy`. Output is ordered by descending
/// occurrence count, then canonical text.
pub fn detect(
    occurrences: &[StepOccurrence],
    strategy: Strategy,
    config: &StrategyConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<Cluster>> {
    config.validate()?;
    let uniques = unique_texts(occurrences);
    let texts: Vec<&str> = uniques.iter().map(|(t, _)| *t).collect();

    let pairs = match strategy {
        Strategy::Exact => Vec::new(),
        Strategy::NearExact => near_exact_pairs(&texts, config),
        Strategy::Semantic | Strategy::Hybrid => {
            embedding_pairs(strategy, &texts, config, require_provider(provider)?)?
        }
    };

    let mut uf = UnionFind::new(texts.len());
    for (a, b) in pairs {
        uf.union(a, b);
    }
    let mut clusters: Vec<Cluster> = uf
        .components()
        .into_iter()
        .map(|component| {
            let members: Vec<usize> = component
                .into_iter()
                .flat_map(|u| uniques[u].1.iter().copied())
                .collect();
            Cluster::from_members(strategy, members, occurrences)
        })
        .collect();
    sort_clusters(&mut clusters);
    Ok(clusters)
}

/// Fraction of steps that are non-first members of their cluster.
pub fn duplication_rate(clusters: &[Cluster], total_steps: usize) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::Invalid("duplication rate of an empty corpus".into()));
    }
    let redundant: usize = clusters.iter().map(|c| c.occurrence_count - 1).sum();
    Ok(redundant as f64 / total_steps as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoRates {
    pub strategy: Strategy,
    pub rates: BTreeMap<String, f64>,
    pub steps: BTreeMap<String, usize>,
    pub median: Option<f64>,
    /// Rank correlation between repository step count and rate; undefined
    /// with fewer than two repositories or a constant column.
    pub spearman_size_rate: Option<f64>,
}

/// Duplication rate of each repository, with clusters recomputed on that
/// repository's occurrences alone.
pub fn per_repo_rates(
    occurrences: &[StepOccurrence],
    strategy: Strategy,
    config: &StrategyConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<RepoRates> {
    let mut by_repo: BTreeMap<&str, Vec<StepOccurrence>> = BTreeMap::new();
    for o in occurrences {
        by_repo
            .entry(o.repo_id.as_str())
            .or_default()
            .push(o.clone());
    }
    let mut rates = BTreeMap::new();
    let mut steps = BTreeMap::new();
    for (repo, occs) in by_repo {
        let clusters = detect(&occs, strategy, config, provider)?;
        rates.insert(repo.to_string(), duplication_rate(&clusters, occs.len())?);
        steps.insert(repo.to_string(), occs.len());
    }
    let rate_values: Vec<f64> = rates.values().copied().collect();
    let size_values: Vec<f64> = steps.values().map(|&n| n as f64).collect();
    Ok(RepoRates {
        strategy,
        median: median(&rate_values).ok(),
        spearman_size_rate: spearman_rho(&size_values, &rate_values).ok(),
        rates,
        steps,
    })
}
