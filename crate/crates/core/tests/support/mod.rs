//! Reference oracles and fixture builders shared by the integration tests
//! and the acceptance harness. Oracles here are deliberately naive and do
//! not call the code they check.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use stepdedup_core::detect::{Cluster, Strategy};
use stepdedup_core::gherkin::StepKeyword;
use stepdedup_core::identity::StepOccurrence;
use stepdedup_core::similarity::RatioVariant;

/// Full-matrix edit distance over chars.
pub fn reference_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn reference_ratio(a: &str, b: &str, variant: RatioVariant) -> f64 {
    let (la, lb) = (a.chars().count(), b.chars().count());
    let m = match variant {
        RatioVariant::MaxLen => la.max(lb),
        RatioVariant::SumLen => la + lb,
    };
    if m == 0 {
        return 1.0;
    }
    (m - reference_distance(a, b)) as f64 / m as f64
}

/// Connected components of `n` nodes under `edge`, by repeated flooding.
/// Components are sorted, and listed by smallest member.
pub fn brute_components(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start].is_some() {
            continue;
        }
        let id = out.len();
        let mut comp = vec![start];
        label[start] = Some(id);
        let mut k = 0;
        while k < comp.len() {
            let u = comp[k];
            for (v, slot) in label.iter_mut().enumerate() {
                if slot.is_none() && edge(u, v) {
                    *slot = Some(id);
                    comp.push(v);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Partition of occurrence indices as sorted member lists, sorted.
pub fn partition_of(clusters: &[Cluster]) -> Vec<Vec<usize>> {
    let mut p: Vec<Vec<usize>> = clusters.iter().map(|c| c.members.clone()).collect();
    for m in &mut p {
        m.sort_unstable();
    }
    p.sort();
    p
}

/// Brute-force near-exact partition: all pairs of occurrences compared
/// with the reference ratio, then transitive closure.
pub fn brute_near_exact(
    occ: &[StepOccurrence],
    theta: f64,
    variant: RatioVariant,
) -> Vec<Vec<usize>> {
    let texts: Vec<&str> = occ.iter().map(|o| o.normalized_text.as_str()).collect();
    let mut p = brute_components(texts.len(), |i, j| {
        texts[i] == texts[j] || reference_ratio(texts[i], texts[j], variant) >= theta
    });
    p.sort();
    p
}

/// True when every block of `fine` lies inside one block of `coarse`.
pub fn refines(fine: &[Vec<usize>], coarse: &[Vec<usize>]) -> bool {
    let n = coarse.iter().map(Vec::len).sum::<usize>();
    let mut owner = vec![usize::MAX; n.max(fine.iter().flatten().max().map_or(0, |m| m + 1))];
    for (b, block) in coarse.iter().enumerate() {
        for &m in block {
            owner[m] = b;
        }
    }
    fine.iter().all(|block| {
        let first = owner[block[0]];
        first != usize::MAX && block.iter().all(|&m| owner[m] == first)
    })
}

const WORDS: &[&str] = &[
    "the",
    "user",
    "clicks",
    "button",
    "login",
    "page",
    "is",
    "displayed",
    "i",
    "enter",
    "password",
    "should",
    "see",
    "error",
    "message",
    "account",
    "open",
    "settings",
    "a",
    "valid",
];

fn mutate<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let edits = rng.random_range(1..=3);
    for _ in 0..edits {
        let pos = rng.random_range(0..=chars.len());
        match rng.random_range(0..3) {
            0 => chars.insert(pos, *b"abcdexyz ".choose(rng).unwrap() as char),
            1 if pos < chars.len() => {
                chars.remove(pos);
            }
            _ if pos < chars.len() => chars[pos] = *b"abcdexyz".choose(rng).unwrap() as char,
            _ => chars.push('s'),
        }
    }
    chars.into_iter().collect()
}

/// A random step corpus: short sentences from a small vocabulary, many
/// near-duplicate mutations of them, and exact repeats. At most
/// `max_unique` distinct texts.
pub fn random_corpus<R: Rng>(rng: &mut R, max_unique: usize) -> Vec<StepOccurrence> {
    let mut uniques: Vec<String> = Vec::new();
    let bases = rng.random_range(3..=12);
    for _ in 0..bases {
        let n = rng.random_range(2..=7);
        let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
        uniques.push(words.join(" "));
    }
    let target = rng.random_range(bases..=max_unique);
    while uniques.len() < target {
        let parent = uniques.choose(rng).unwrap().clone();
        let child = mutate(rng, &parent);
        if !child.trim().is_empty()
            && !uniques.contains(&child)
            && child == child.trim()
            && !child.contains("  ")
        {
            uniques.push(child);
        }
    }
    let mut occ = Vec::new();
    for (i, text) in uniques.iter().enumerate() {
        let repeats = if rng.random_bool(0.3) {
            rng.random_range(2..=4)
        } else {
            1
        };
        for r in 0..repeats {
            let repo = format!("repo{}", (i + r) % 3);
            occ.push(StepOccurrence::new(
                &repo,
                "f.feature",
                occ.len() + 1,
                StepKeyword::Given,
                text,
            ));
        }
    }
    occ
}

/// Random string over a small alphabet, length `0..=max_len`.
pub fn random_string<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| *b"abcde ".choose(rng).unwrap() as char)
        .collect()
}

/// String pair that is either independent or a light mutation.
pub fn random_pair<R: Rng>(rng: &mut R, max_len: usize) -> (String, String) {
    let a = random_string(rng, max_len);
    let b = if rng.random_bool(0.5) {
        random_string(rng, max_len)
    } else {
        let mut m = mutate(rng, &a);
        m.truncate(max_len);
        m
    };
    (a, b)
}

pub const EXACT_CLUSTERS: usize = 82_545;
pub const EXACT_OCCURRENCES: usize = 975_902;
pub const HYBRID_CLUSTERS: usize = 65_242;
pub const HYBRID_OCCURRENCES: usize = 1_031_454;
pub const TOTAL_STEPS: usize = 1_113_616;
pub const ABSORBED_SINGLETONS: usize = HYBRID_OCCURRENCES - EXACT_OCCURRENCES;

/// Table of repository-size tiers: (repos, steps, eliminable).
pub const TIER_TABLE: [(usize, usize, usize); 4] = [
    (240, 64_181, 38_742),
    (82, 247_828, 175_706),
    (24, 624_000, 504_455),
    (1, 177_607, 174_453),
];

fn raw_cluster(strategy: Strategy, members: Vec<usize>) -> Cluster {
    Cluster {
        strategy,
        occurrence_count: members.len(),
        canonical_text: String::new(),
        distinct_files: 1,
        distinct_repos: 1,
        members,
    }
}

/// Split `total` into `parts` near-equal integers.
pub fn spread(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Corpus-scale cluster fixture: exact clusters over the first
/// `EXACT_OCCURRENCES` indices, the rest singletons; hybrid clusters merge
/// pairs of exact clusters and absorb singletons.
pub fn savings_fixture() -> (Vec<Cluster>, Vec<Cluster>) {
    let sizes = spread(EXACT_OCCURRENCES, EXACT_CLUSTERS);
    let mut exact = Vec::with_capacity(EXACT_CLUSTERS);
    let mut next = 0;
    for s in sizes {
        exact.push(raw_cluster(Strategy::Exact, (next..next + s).collect()));
        next += s;
    }
    let merges = EXACT_CLUSTERS - HYBRID_CLUSTERS;
    let mut hybrid: Vec<Vec<usize>> = Vec::with_capacity(HYBRID_CLUSTERS);
    for i in 0..merges {
        let mut m = exact[2 * i].members.clone();
        m.extend_from_slice(&exact[2 * i + 1].members);
        hybrid.push(m);
    }
    for c in &exact[2 * merges..] {
        hybrid.push(c.members.clone());
    }
    for k in 0..ABSORBED_SINGLETONS {
        hybrid[k % HYBRID_CLUSTERS].push(EXACT_OCCURRENCES + k);
    }
    let hybrid = hybrid
        .into_iter()
        .map(|m| raw_cluster(Strategy::Hybrid, m))
        .collect();
    (exact, hybrid)
}

/// Per-repository step counts laid out like the tier table.
pub fn tier_repo_steps() -> Vec<usize> {
    TIER_TABLE
        .iter()
        .flat_map(|&(repos, steps, _)| spread(steps, repos))
        .collect()
}

/// Repository id of every occurrence index, contiguous per repository.
pub fn tier_repo_labels() -> Vec<String> {
    tier_repo_steps()
        .iter()
        .enumerate()
        .flat_map(|(r, &n)| std::iter::repeat_n(format!("repo{r:03}"), n))
        .collect()
}

/// Two labelings of 1,020 items: 494 vs 565 positives, 271 disagreements.
pub fn protocol_label_vectors() -> (Vec<bool>, Vec<bool>) {
    let (both, a_only, b_only, neither) = (394, 100, 171, 355);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (n, x, y) in [
        (both, true, true),
        (a_only, true, false),
        (b_only, false, true),
        (neither, false, false),
    ] {
        a.extend(std::iter::repeat_n(x, n));
        b.extend(std::iter::repeat_n(y, n));
    }
    (a, b)
}

/// Fleiss' kappa written out term by term for a binary table.
pub fn hand_fleiss(table: &[[u32; 2]]) -> f64 {
    let n = f64::from(table[0][0] + table[0][1]);
    let items = table.len() as f64;
    let mut p_i_sum = 0.0;
    let mut col = [0.0f64; 2];
    for row in table {
        let a = f64::from(row[0]);
        let b = f64::from(row[1]);
        p_i_sum += (a * (a - 1.0) + b * (b - 1.0)) / (n * (n - 1.0));
        col[0] += a;
        col[1] += b;
    }
    let p_bar = p_i_sum / items;
    let pj0 = col[0] / (items * n);
    let pj1 = col[1] / (items * n);
    let pe = pj0 * pj0 + pj1 * pj1;
    (p_bar - pe) / (1.0 - pe)
}

/// Ten items, three raters, two categories.
pub const FLEISS_TABLE: [[u32; 2]; 10] = [
    [3, 0],
    [2, 1],
    [0, 3],
    [1, 2],
    [3, 0],
    [3, 0],
    [0, 3],
    [2, 1],
    [1, 2],
    [3, 0],
];
