//! Chance-corrected agreement between raters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Fleiss' kappa for a table of per-item category counts where every item
/// was rated by the same number of raters (at least two).
///
/// When chance agreement is already 1 (every rating fell in one category)
/// the statistic is 0/0; observed agreement is then also perfect and 1.0 is
/// returned.
pub fn fleiss_kappa(ratings: &[Vec<u32>]) -> Result<f64> {
    let first = ratings
        .first()
        .ok_or_else(|| Error::Invalid("fleiss kappa of an empty table".into()))?;
    let categories = first.len();
    if categories == 0 {
        return Err(Error::Invalid(
            "fleiss kappa needs at least one category".into(),
        ));
    }
    let n: u32 = first.iter().sum();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "fleiss kappa needs at least 2 raters per item, got {n}"
        )));
    }
    let mut totals = vec![0u64; categories];
    let mut p_bar = 0.0;
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != categories {
            return Err(Error::Invalid(format!(
                "item {i} has {} categories, expected {categories}",
                row.len()
            )));
        }
        let sum: u32 = row.iter().sum();
        if sum != n {
            return Err(Error::Invalid(format!(
                "item {i} has {sum} ratings, expected {n}"
            )));
        }
        let agree: u64 = row
            .iter()
            .map(|&c| u64::from(c) * u64::from(c.saturating_sub(1)))
            .sum();
        p_bar += agree as f64 / (f64::from(n) * f64::from(n - 1));
        for (t, &c) in totals.iter_mut().zip(row) {
            *t += u64::from(c);
        }
    }
    let items = ratings.len() as f64;
    p_bar /= items;
    let all = items * f64::from(n);
    let p_e: f64 = totals.iter().map(|&t| (t as f64 / all).powi(2)).sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Per-item category counts from a list of binary ratings per item.
pub fn binary_table(ratings: &[Vec<bool>]) -> Vec<Vec<u32>> {
    ratings
        .iter()
        .map(|r| {
            let yes = r.iter().filter(|&&x| x).count() as u32;
            vec![yes, r.len() as u32 - yes]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub kappa: f64,
    /// Fraction of items where the two labelings agree.
    pub observed: f64,
    /// Agreement expected from the marginals alone.
    pub expected: f64,
    pub disagreements: usize,
    pub n: usize,
}

impl Agreement {
    pub fn chance_disagreement(&self) -> f64 {
        1.0 - self.expected
    }
}

/// Cohen's kappa for two boolean labelings of the same items. Identical
/// labelings score 1 even when both are constant.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<Agreement> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!(
            "cohen kappa over {} and {} labels",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Invalid("cohen kappa of empty labelings".into()));
    }
    let n = a.len();
    let disagreements = a.iter().zip(b).filter(|(x, y)| x != y).count();
    let observed = (n - disagreements) as f64 / n as f64;
    let pa = a.iter().filter(|&&x| x).count() as f64 / n as f64;
    let pb = b.iter().filter(|&&x| x).count() as f64 / n as f64;
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    let kappa = if (1.0 - expected).abs() < f64::EPSILON {
        1.0
    } else {
        (observed - expected) / (1.0 - expected)
    };
    Ok(Agreement {
        kappa,
        observed,
        expected,
        disagreements,
        n,
    })
}
