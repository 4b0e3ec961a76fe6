//! Threshold classification metrics: point estimates, percentile
//! bootstrap intervals, grid sweeps and stratified cross-validation.

use crate::calibration::stats::percentile_nearest_rank;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Interval { low: x, high: x }
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_ci: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall_ci: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1_ci: Option<Interval>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    /// `(precision, recall, f1)`. With no predicted positives, precision is
    /// 1 if there was nothing to find and 0 otherwise; with no actual
    /// positives, recall is 1.
    fn rates(self) -> (f64, f64, f64) {
        let predicted = self.tp + self.fp;
        let actual = self.tp + self.fn_;
        let precision = if predicted > 0 {
            self.tp as f64 / predicted as f64
        } else if actual == 0 {
            1.0
        } else {
            0.0
        };
        let recall = if actual > 0 {
            self.tp as f64 / actual as f64
        } else {
            1.0
        };
        (precision, recall, f1_score(precision, recall))
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Invalid("metrics of an empty sample".into()));
    }
    Ok(())
}

fn point(threshold: f64, c: Confusion) -> MetricPoint {
    let (precision, recall, f1) = c.rates();
    MetricPoint {
        threshold,
        precision,
        recall,
        f1,
        precision_ci: None,
        recall_ci: None,
        f1_ci: None,
    }
}

/// Precision, recall and F1 of the rule `score >= threshold`.
pub fn prf(scores: &[f64], labels: &[bool], threshold: f64) -> Result<MetricPoint> {
    check_inputs(scores, labels)?;
    let mut c = Confusion::default();
    for (s, &l) in scores.iter().zip(labels) {
        c.add(*s >= threshold, l);
    }
    Ok(point(threshold, c))
}

pub const DEFAULT_RESAMPLES: usize = 10_000;
pub const MIN_RESAMPLES: usize = 1_000;

/// Point estimate plus 95% percentile-bootstrap intervals from `resamples`
/// draws with replacement. Resample `b` uses stream `b` of a ChaCha8
/// generator seeded with `seed`, so results do not depend on thread count.
pub fn bootstrap_ci(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    resamples: usize,
    seed: u64,
) -> Result<MetricPoint> {
    let mut out = prf(scores, labels, threshold)?;
    if resamples < MIN_RESAMPLES {
        return Err(Error::Invalid(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
        )));
    }
    let predicted: Vec<bool> = scores.iter().map(|s| *s >= threshold).collect();
    let n = scores.len();
    let draws: Vec<(f64, f64, f64)> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut c = Confusion::default();
            for _ in 0..n {
                let i = rng.random_range(0..n);
                c.add(predicted[i], labels[i]);
            }
            c.rates()
        })
        .collect();

    let interval = |pick: fn(&(f64, f64, f64)) -> f64, estimate: f64| {
        let mut v: Vec<f64> = draws.iter().map(pick).collect();
        v.sort_by(f64::total_cmp);
        // Percentile intervals can miss a skewed point estimate; widen to
        // include it so low <= point <= high always holds.
        Interval {
            low: percentile_nearest_rank(&v, 2.5).min(estimate),
            high: percentile_nearest_rank(&v, 97.5).max(estimate),
        }
    };
    out.precision_ci = Some(interval(|d| d.0, out.precision));
    out.recall_ci = Some(interval(|d| d.1, out.recall));
    out.f1_ci = Some(interval(|d| d.2, out.f1));
    Ok(out)
}

/// Thresholds 0.50, 0.51, ..., 1.00.
pub fn default_grid() -> Vec<f64> {
    (50..=100).map(|i| f64::from(i) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub points: Vec<MetricPoint>,
    pub best: MetricPoint,
}

/// Evaluate every grid threshold; the best point maximises F1 with ties
/// going to the lowest threshold.
pub fn threshold_sweep(scores: &[f64], labels: &[bool], grid: &[f64]) -> Result<Sweep> {
    check_inputs(scores, labels)?;
    if grid.is_empty() {
        return Err(Error::Invalid("empty threshold grid".into()));
    }
    let mut sorted_grid = grid.to_vec();
    sorted_grid.sort_by(f64::total_cmp);
    let points = sorted_grid
        .iter()
        .map(|&t| prf(scores, labels, t))
        .collect::<Result<Vec<_>>>()?;
    let mut best = points[0];
    for p in &points[1..] {
        if p.f1 > best.f1 {
            best = *p;
        }
    }
    Ok(Sweep { points, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub threshold: f64,
    pub train_f1: f64,
    pub held_out: MetricPoint,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult>,
    pub mean_f1: f64,
    /// Population standard deviation across folds.
    pub sd_f1: f64,
    pub min_f1: f64,
    pub max_f1: f64,
}

/// Fold assignment stratified by label: each class is shuffled and dealt
/// round-robin, the negatives continuing where the positives stopped.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (slot, &i) in pos.iter().chain(neg.iter()).enumerate() {
        fold[i] = slot % k;
    }
    fold
}

/// Stratified k-fold cross-validation of threshold selection: each fold's
/// threshold maximises F1 on the other folds and is scored on the fold.
pub fn kfold_cv(
    scores: &[f64],
    labels: &[bool],
    k: usize,
    seed: u64,
    grid: &[f64],
) -> Result<CvSummary> {
    check_inputs(scores, labels)?;
    if k < 2 {
        return Err(Error::Invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    let assignment = stratified_folds(labels, k, seed);
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let (mut tr_s, mut tr_l, mut te_s, mut te_l) = (vec![], vec![], vec![], vec![]);
        for i in 0..scores.len() {
            if assignment[i] == fold {
                te_s.push(scores[i]);
                te_l.push(labels[i]);
            } else {
                tr_s.push(scores[i]);
                tr_l.push(labels[i]);
            }
        }
        let single_class = |l: &[bool]| l.iter().all(|&x| x) || l.iter().all(|&x| !x);
        if te_l.is_empty() || single_class(&te_l) || single_class(&tr_l) {
            return Err(Error::SingleClassFold { fold });
        }
        let train = threshold_sweep(&tr_s, &tr_l, grid)?;
        let held_out = prf(&te_s, &te_l, train.best.threshold)?;
        folds.push(FoldResult {
            fold,
            threshold: train.best.threshold,
            train_f1: train.best.f1,
            held_out,
            test_size: te_s.len(),
        });
    }
    let f1s: Vec<f64> = folds.iter().map(|f| f.held_out.f1).collect();
    let mean = f1s.iter().sum::<f64>() / k as f64;
    let var = f1s.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / k as f64;
    Ok(CvSummary {
        k,
        seed,
        mean_f1: mean,
        sd_f1: var.sqrt(),
        min_f1: f1s.iter().copied().fold(f64::INFINITY, f64::min),
        max_f1: f1s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        folds,
    })
}
