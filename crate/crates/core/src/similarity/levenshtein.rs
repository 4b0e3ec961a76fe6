//! Unit-cost edit distance and the normalised ratio built on it.

use serde::{Deserialize, Serialize};

/// How an edit distance is turned into a similarity in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioVariant {
    /// `1 - d / max(|a|, |b|)`
    #[default]
    MaxLen,
    /// `1 - d / (|a| + |b|)`
    SumLen,
}

impl RatioVariant {
    fn denominator(self, la: usize, lb: usize) -> usize {
        match self {
            RatioVariant::MaxLen => la.max(lb),
            RatioVariant::SumLen => la + lb,
        }
    }
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let (a, b) = (chars(a), chars(b));
    distance_chars(&a, &b)
}

fn distance_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn ratio_from(distance: usize, denom: usize) -> f64 {
    if denom == 0 {
        1.0
    } else {
        (denom - distance) as f64 / denom as f64
    }
}

pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    levenshtein_ratio_with(a, b, RatioVariant::MaxLen)
}

pub fn levenshtein_ratio_with(a: &str, b: &str, variant: RatioVariant) -> f64 {
    let (a, b) = (chars(a), chars(b));
    let d = distance_chars(&a, &b);
    ratio_from(d, variant.denominator(a.len(), b.len()))
}

/// Largest distance whose ratio still reaches `theta` for strings of the
/// given lengths, or `None` when even distance 0 falls short.
///
/// Evaluated with the same float expression as the ratio itself so the
/// accept/reject decision is identical to `ratio >= theta`.
pub fn max_distance(la: usize, lb: usize, theta: f64, variant: RatioVariant) -> Option<usize> {
    let denom = variant.denominator(la, lb);
    if ratio_from(0, denom) < theta {
        return None;
    }
    if denom == 0 {
        return Some(0);
    }
    let estimate = ((1.0 - theta) * denom as f64)
        .floor()
        .clamp(0.0, denom as f64) as usize;
    let mut d = estimate;
    while d > 0 && ratio_from(d, denom) < theta {
        d -= 1;
    }
    while d < denom && ratio_from(d + 1, denom) >= theta {
        d += 1;
    }
    Some(d)
}

/// Edit distance if it is at most `limit`, computed on a diagonal band of
/// width `2 * limit + 1` and abandoned as soon as every cell of a row
/// exceeds the limit.
pub fn bounded_distance(a: &str, b: &str, limit: usize) -> Option<usize> {
    let (a, b) = (chars(a), chars(b));
    bounded_chars(&a, &b, limit)
}

fn bounded_chars(a: &[char], b: &[char], limit: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > limit {
        return None;
    }
    if n == 0 || m == 0 {
        return Some(n.max(m));
    }
    let over = limit + 1;
    let mut prev: Vec<usize> = (0..=m).map(|j| j.min(over)).collect();
    let mut cur = vec![over; m + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(limit).max(1);
        let hi = (i + limit).min(m);
        cur[0] = i.min(over);
        if lo > 1 {
            cur[lo - 1] = over;
        }
        let mut row_min = cur[0];
        for j in lo..=hi {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            let v = sub.min(prev[j] + 1).min(cur[j - 1] + 1).min(over);
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < m {
            cur[hi + 1] = over;
        }
        if row_min > limit {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= limit).then_some(d)
}

/// `levenshtein_ratio(a, b) >= theta`, decided with the banded early-exit
/// computation.
pub fn levenshtein_within(a: &str, b: &str, theta: f64) -> bool {
    levenshtein_within_with(a, b, theta, RatioVariant::MaxLen)
}

pub fn levenshtein_within_with(a: &str, b: &str, theta: f64, variant: RatioVariant) -> bool {
    let (a, b) = (chars(a), chars(b));
    match max_distance(a.len(), b.len(), theta, variant) {
        Some(limit) => bounded_chars(&a, &b, limit).is_some(),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full (n+1)x(m+1) matrix, written independently of the two-row form.
    fn oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in dp.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in dp[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                dp[i][j] = (dp[i - 1][j] + 1)
                    .min(dp[i][j - 1] + 1)
                    .min(dp[i - 1][j - 1] + cost);
            }
        }
        dp[a.len()][b.len()]
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(levenshtein_ratio("abc", "abc"), 1.0);
        assert_eq!(levenshtein_ratio("abc", ""), 0.0);
        assert_eq!(levenshtein_ratio("", ""), 1.0);
        assert_eq!(oracle("kitten", "sitting"), 3);
        assert!((levenshtein_ratio("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert!((levenshtein_ratio("abc", "abd") - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sum_len_variant() {
        assert!(
            (levenshtein_ratio_with("kitten", "sitting", RatioVariant::SumLen) - 10.0 / 13.0).abs()
                < 1e-12
        );
        assert_eq!(levenshtein_ratio_with("", "", RatioVariant::SumLen), 1.0);
    }

    #[test]
    fn unicode_counts_scalars() {
        assert_eq!(edit_distance("café", "cafe"), 1);
        assert_eq!(levenshtein_ratio("ü", "u"), 0.0);
    }

    #[test]
    fn max_distance_boundaries() {
        assert_eq!(max_distance(10, 10, 0.7, RatioVariant::MaxLen), Some(3));
        assert_eq!(max_distance(5, 3, 0.8, RatioVariant::MaxLen), Some(1));
        assert_eq!(max_distance(0, 0, 0.9, RatioVariant::MaxLen), Some(0));
        assert_eq!(max_distance(4, 4, 1.5, RatioVariant::MaxLen), None);
        assert_eq!(max_distance(4, 4, 0.0, RatioVariant::MaxLen), Some(4));
    }

    #[test]
    fn bounded_examples() {
        assert_eq!(bounded_distance("kitten", "sitting", 3), Some(3));
        assert_eq!(bounded_distance("kitten", "sitting", 2), None);
        assert_eq!(bounded_distance("", "abc", 3), Some(3));
        assert_eq!(bounded_distance("abc", "", 2), None);
        assert!(!levenshtein_within("abc", "abd", 0.8));
        assert!(levenshtein_within("abcde", "abcdx", 0.8));
    }

    proptest! {
        #[test]
        fn distance_matches_oracle(a in "[abc ]{0,30}", b in "[abc ]{0,30}") {
            prop_assert_eq!(edit_distance(&a, &b), oracle(&a, &b));
        }

        #[test]
        fn ratio_symmetric_and_identity(a in "[ab]{0,12}", b in "[ab]{0,12}") {
            prop_assert_eq!(levenshtein_ratio(&a, &b), levenshtein_ratio(&b, &a));
            prop_assert_eq!(levenshtein_ratio(&a, &b) == 1.0, a == b);
        }

        #[test]
        fn triangle(a in "[abc]{0,15}", b in "[abc]{0,15}", c in "[abc]{0,15}") {
            prop_assert!(edit_distance(&a, &c) <= edit_distance(&a, &b) + edit_distance(&b, &c));
        }

        #[test]
        fn banded_agrees(a in "[abcd]{0,30}", b in "[abcd]{0,30}", k in 0usize..12) {
            let d = oracle(&a, &b);
            prop_assert_eq!(bounded_distance(&a, &b, k), (d <= k).then_some(d));
            for theta in [0.7, 0.8, 0.9] {
                prop_assert_eq!(levenshtein_within(&a, &b, theta), levenshtein_ratio(&a, &b) >= theta);
                prop_assert_eq!(
                    levenshtein_within_with(&a, &b, theta, RatioVariant::SumLen),
                    levenshtein_ratio_with(&a, &b, RatioVariant::SumLen) >= theta
                );
            }
        }
    }
}
