//! Set and sequence overlap between token sequences.

use crate::identity::TokenSequence;
use std::collections::BTreeSet;

/// `|A ∩ B| / |A ∪ B|` over token sets; two empty sequences score 1.
pub fn token_jaccard(a: &TokenSequence, b: &TokenSequence) -> f64 {
    let sa: BTreeSet<&str> = a.iter().collect();
    let sb: BTreeSet<&str> = b.iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Fraction of the shorter sequence that appears, in order but not
/// necessarily contiguously, in the longer one.
pub fn subsequence_containment(a: &TokenSequence, b: &TokenSequence) -> f64 {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 1.0;
    }
    lcs_len(&short.tokens, &long.tokens) as f64 / short.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{tokenize, ParamMode};
    use proptest::prelude::*;

    fn t(v: &[&str]) -> TokenSequence {
        v.iter().copied().collect()
    }

    /// Exponential oracle: longest common subsequence by trying every
    /// subsequence of the shorter sequence.
    fn lcs_brute(short: &[String], long: &[String]) -> usize {
        let n = short.len();
        let mut best = 0;
        for mask in 0u32..(1 << n) {
            let sub: Vec<&String> = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| &short[i])
                .collect();
            let mut it = long.iter();
            if sub.iter().all(|s| it.any(|x| x == *s)) {
                best = best.max(sub.len());
            }
        }
        best
    }

    #[test]
    fn jaccard_examples() {
        let a = tokenize("the response status is 200", ParamMode::QuotedOnly);
        let b = tokenize("the response status is 404", ParamMode::QuotedOnly);
        assert!((token_jaccard(&a, &b) - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(token_jaccard(&a, &a), 1.0);
        assert_eq!(token_jaccard(&t(&["x"]), &t(&["y"])), 0.0);
        assert_eq!(token_jaccard(&t(&[]), &t(&[])), 1.0);
    }

    #[test]
    fn containment_examples() {
        let x = t(&["a", "b", "c"]);
        assert_eq!(subsequence_containment(&x, &x), 1.0);
        assert_eq!(
            subsequence_containment(&x, &t(&["a", "z", "b", "z", "c", "z"])),
            1.0
        );
        assert_eq!(subsequence_containment(&x, &t(&["p", "q"])), 0.0);
        assert_eq!(subsequence_containment(&t(&[]), &x), 1.0);
        assert!((subsequence_containment(&t(&["c", "b", "a"]), &x) - 1.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn lcs_matches_brute_force(
            a in proptest::collection::vec("[abc]", 0..9),
            b in proptest::collection::vec("[abc]", 0..12),
        ) {
            let (short, long) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
            prop_assert_eq!(lcs_len(short, long), lcs_brute(short, long));
        }

        #[test]
        fn symmetric(
            a in proptest::collection::vec("[abcd]", 0..10),
            b in proptest::collection::vec("[abcd]", 0..10),
        ) {
            let (a, b): (TokenSequence, TokenSequence) = (a.into_iter().collect(), b.into_iter().collect());
            prop_assert_eq!(token_jaccard(&a, &b), token_jaccard(&b, &a));
            prop_assert_eq!(subsequence_containment(&a, &b), subsequence_containment(&b, &a));
        }
    }
}
