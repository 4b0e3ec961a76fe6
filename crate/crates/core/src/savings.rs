//! Consolidation savings: how many step occurrences could be removed if
//! every cluster were merged into one canonical step.

use crate::detect::{Cluster, Strategy, StrategyConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// `(occurrences − 1) · conf`: one canonical occurrence is kept.
pub fn savings_for_count(occurrences: usize, conf: f64) -> f64 {
    occurrences.saturating_sub(1) as f64 * conf
}

pub fn cluster_savings(cluster: &Cluster, conf: f64) -> f64 {
    savings_for_count(cluster.occurrence_count, conf)
}

/// How a cluster that spans repositories is credited to each of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// Each repository keeps its own canonical occurrence: a cluster with
    /// `n_r` members in repository `r` credits it `n_r − 1`.
    #[default]
    RepoLocal,
    /// The global saving `n − 1` is split by member share `n_r / n`.
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SavingsConfig {
    pub conf_exact: f64,
    pub conf_hybrid: f64,
    pub attribution: Attribution,
}

impl Default for SavingsConfig {
    fn default() -> Self {
        SavingsConfig::from_strategy(&StrategyConfig::default())
            .expect("defaults carry confidences")
    }
}

impl SavingsConfig {
    pub fn from_strategy(config: &StrategyConfig) -> Result<Self> {
        let get = |s: Strategy| {
            config.confidence_for(s).ok_or_else(|| {
                Error::Invalid(format!(
                    "no savings confidence configured for {}",
                    s.as_str()
                ))
            })
        };
        Ok(SavingsConfig {
            conf_exact: get(Strategy::Exact)?,
            conf_hybrid: get(Strategy::Hybrid)?,
            attribution: Attribution::default(),
        })
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("exact", self.conf_exact), ("hybrid", self.conf_hybrid)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Invalid(format!(
                    "{name} confidence {v} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoSavings {
    pub steps: usize,
    /// Exact-cluster savings at the exact confidence.
    pub eliminable: f64,
    pub rate: f64,
    /// Exact savings plus the hybrid surplus at the hybrid confidence.
    pub eliminable_combined: f64,
    pub rate_combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Small,
    Medium,
    Large,
    Enterprise,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Small, Tier::Medium, Tier::Large, Tier::Enterprise];

    /// Small below 1,000 steps, medium below 10,000, large below 100,000.
    pub fn of(steps: usize) -> Tier {
        match steps {
            0..=999 => Tier::Small,
            1_000..=9_999 => Tier::Medium,
            10_000..=99_999 => Tier::Large,
            _ => Tier::Enterprise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub tier: Tier,
    pub repo_count: usize,
    pub tier_steps: usize,
    pub tier_eliminable: f64,
}

/// One row per tier in tier order; empty tiers are zero rows.
pub fn tier_breakdown<I>(repos: I) -> Vec<TierRow>
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut rows: Vec<TierRow> = Tier::ALL
        .iter()
        .map(|&tier| TierRow {
            tier,
            repo_count: 0,
            tier_steps: 0,
            tier_eliminable: 0.0,
        })
        .collect();
    for (steps, eliminable) in repos {
        let row = &mut rows[Tier::of(steps) as usize];
        row.repo_count += 1;
        row.tier_steps += steps;
        row.tier_eliminable += eliminable;
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub conf_hybrid: f64,
    pub aggregate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IsoTag {
    pub characteristic: &'static str,
    pub sub_characteristic: &'static str,
    pub report_section: &'static str,
    pub note: &'static str,
}

/// Report sections and the ISO/IEC 25010 quality sub-characteristics they
/// inform.
pub const ISO_TAGS: [IsoTag; 6] = [
    IsoTag {
        characteristic: "Maintainability",
        sub_characteristic: "Modifiability",
        report_section: "savings",
        note: "a cluster can be renamed once instead of at every occurrence",
    },
    IsoTag {
        characteristic: "Maintainability",
        sub_characteristic: "Modularity",
        report_section: "clusters_hybrid",
        note: "large clusters are candidates for a shared step library",
    },
    IsoTag {
        characteristic: "Maintainability",
        sub_characteristic: "Reusability",
        report_section: "clusters_hybrid",
        note: "clusters spanning repositories show phrasing reused across projects",
    },
    IsoTag {
        characteristic: "Maintainability",
        sub_characteristic: "Analysability",
        report_section: "summary",
        note: "cluster reports expose suite structure hidden in individual scenarios",
    },
    IsoTag {
        characteristic: "Maintainability",
        sub_characteristic: "Testability",
        report_section: "calibration",
        note: "labelled pairs allow detectors to be compared on equal terms",
    },
    IsoTag {
        characteristic: "Reliability",
        sub_characteristic: "Maturity",
        report_section: "clusters_hybrid",
        note: "paraphrase clusters flag phrasing that may drift from its glue code",
    },
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsReport {
    pub config: SavingsConfig,
    pub total_steps: usize,
    pub per_repo: BTreeMap<String, RepoSavings>,
    pub aggregate_exact: f64,
    /// `Σ hybrid (occ − 1) − Σ exact (occ − 1)`.
    pub hybrid_surplus: f64,
    pub aggregate_combined: f64,
    pub sensitivity: Vec<SensitivityPoint>,
    /// Tiers always split the global saving proportionally, so their sum
    /// matches `aggregate_exact` whatever the per-repo attribution.
    pub tiers: Vec<TierRow>,
    pub iso_tags: Vec<IsoTag>,
}

fn redundant(clusters: &[Cluster]) -> usize {
    clusters
        .iter()
        .map(|c| c.occurrence_count.saturating_sub(1))
        .sum()
}

/// Per-repository savings of `clusters` at confidence `conf`.
fn attribute(
    clusters: &[Cluster],
    repo_index: &[usize],
    repos: usize,
    conf: f64,
    mode: Attribution,
) -> Vec<f64> {
    let mut out = vec![0.0; repos];
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for c in clusters {
        if c.occurrence_count < 2 {
            continue;
        }
        counts.clear();
        for &m in &c.members {
            *counts.entry(repo_index[m]).or_insert(0) += 1;
        }
        let n = c.members.len() as f64;
        for (&r, &nr) in &counts {
            out[r] += match mode {
                Attribution::RepoLocal => savings_for_count(nr, conf),
                Attribution::Proportional => (n - 1.0) * conf * nr as f64 / n,
            };
        }
    }
    out
}

fn check_members(name: &str, clusters: &[Cluster], total: usize) -> Result<()> {
    for c in clusters {
        if c.members.len() != c.occurrence_count {
            return Err(Error::Invalid(format!(
                "{name} cluster `{}` lists {} members but counts {}",
                c.canonical_text,
                c.members.len(),
                c.occurrence_count
            )));
        }
        if let Some(&m) = c.members.iter().find(|&&m| m >= total) {
            return Err(Error::Invalid(format!(
                "{name} cluster references occurrence {m} of {total}"
            )));
        }
    }
    Ok(())
}

/// Savings under the exact strategy, widened by the hybrid surplus.
/// `occurrence_repos[i]` is the repository of occurrence `i`; both cluster
/// sets must index that same table.
pub fn aggregate_savings<S: AsRef<str>>(
    exact: &[Cluster],
    hybrid: &[Cluster],
    occurrence_repos: &[S],
    config: &SavingsConfig,
) -> Result<SavingsReport> {
    config.validate()?;
    let total = occurrence_repos.len();
    check_members("exact", exact, total)?;
    check_members("hybrid", hybrid, total)?;

    let exact_redundant = redundant(exact) as f64;
    let aggregate_exact = exact_redundant * config.conf_exact;
    let hybrid_surplus = redundant(hybrid) as f64 - exact_redundant;
    let combined = |conf: f64| aggregate_exact + hybrid_surplus * conf;

    let mut names: Vec<&str> = occurrence_repos.iter().map(AsRef::as_ref).collect();
    names.sort_unstable();
    names.dedup();
    let repo_index: Vec<usize> = occurrence_repos
        .iter()
        .map(|r| names.binary_search(&r.as_ref()).expect("name present"))
        .collect();
    let mut steps = vec![0usize; names.len()];
    for &r in &repo_index {
        steps[r] += 1;
    }

    let mode = config.attribution;
    let e = attribute(exact, &repo_index, names.len(), config.conf_exact, mode);
    let e_unit = attribute(exact, &repo_index, names.len(), 1.0, mode);
    let h_unit = attribute(hybrid, &repo_index, names.len(), 1.0, mode);
    let per_repo = names
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let combined = e[r] + (h_unit[r] - e_unit[r]) * config.conf_hybrid;
            let n = steps[r] as f64;
            (
                name.to_string(),
                RepoSavings {
                    steps: steps[r],
                    eliminable: e[r],
                    rate: e[r] / n,
                    eliminable_combined: combined,
                    rate_combined: (combined / n).clamp(0.0, 1.0),
                },
            )
        })
        .collect();

    let proportional = attribute(
        exact,
        &repo_index,
        names.len(),
        config.conf_exact,
        Attribution::Proportional,
    );
    let tiers = tier_breakdown((0..names.len()).map(|r| (steps[r], proportional[r])));

    Ok(SavingsReport {
        config: config.clone(),
        total_steps: total,
        per_repo,
        aggregate_exact,
        hybrid_surplus,
        aggregate_combined: combined(config.conf_hybrid),
        sensitivity: (0..=10)
            .map(|i| {
                let conf = f64::from(i) / 10.0;
                SensitivityPoint {
                    conf_hybrid: conf,
                    aggregate: combined(conf),
                }
            })
            .collect(),
        tiers,
        iso_tags: ISO_TAGS.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cluster(strategy: Strategy, members: Vec<usize>) -> Cluster {
        Cluster {
            strategy,
            occurrence_count: members.len(),
            canonical_text: format!("c{}", members[0]),
            distinct_files: 1,
            distinct_repos: 1,
            members,
        }
    }

    #[test]
    fn per_cluster_examples() {
        assert_eq!(savings_for_count(20_737, 1.0), 20_736.0);
        assert_eq!(savings_for_count(1_389, 1.0), 1_388.0);
        assert_eq!(savings_for_count(1, 0.7), 0.0);
        assert_eq!(savings_for_count(0, 1.0), 0.0);
        assert_eq!(
            cluster_savings(&cluster(Strategy::Exact, vec![0, 1, 2]), 0.5),
            1.0
        );
    }

    #[test]
    fn tier_boundaries() {
        assert_eq!(Tier::of(999), Tier::Small);
        assert_eq!(Tier::of(1_000), Tier::Medium);
        assert_eq!(Tier::of(9_999), Tier::Medium);
        assert_eq!(Tier::of(10_000), Tier::Large);
        assert_eq!(Tier::of(100_000), Tier::Enterprise);
        let rows = tier_breakdown([(500, 1.0), (5_000, 2.0), (50_000, 3.0), (150_000, 4.0)]);
        assert!(rows.iter().all(|r| r.repo_count == 1));
        let empty = tier_breakdown([]);
        assert_eq!(empty.len(), 4);
        assert!(empty
            .iter()
            .all(|r| r.repo_count == 0 && r.tier_eliminable == 0.0));
    }

    fn fixture() -> (Vec<Cluster>, Vec<Cluster>, Vec<&'static str>) {
        // a: 0..4, b: 4..7. Exact {0,1,4}, {2,3}; hybrid merges in 5.
        let repos = vec!["a", "a", "a", "a", "b", "b", "b"];
        let exact = vec![
            cluster(Strategy::Exact, vec![0, 1, 4]),
            cluster(Strategy::Exact, vec![2, 3]),
            cluster(Strategy::Exact, vec![5]),
            cluster(Strategy::Exact, vec![6]),
        ];
        let hybrid = vec![
            cluster(Strategy::Hybrid, vec![0, 1, 4, 5]),
            cluster(Strategy::Hybrid, vec![2, 3]),
            cluster(Strategy::Hybrid, vec![6]),
        ];
        (exact, hybrid, repos)
    }

    #[test]
    fn aggregates_and_sensitivity() {
        let (exact, hybrid, repos) = fixture();
        let r = aggregate_savings(&exact, &hybrid, &repos, &SavingsConfig::default()).unwrap();
        assert_eq!(r.aggregate_exact, 3.0);
        assert_eq!(r.hybrid_surplus, 1.0);
        assert!((r.aggregate_combined - 3.57).abs() < 1e-12);
        assert_eq!(r.sensitivity.len(), 11);
        assert_eq!(r.sensitivity[0].aggregate, r.aggregate_exact);
        assert_eq!(r.sensitivity[10].aggregate, 4.0);
        assert!(r
            .sensitivity
            .windows(2)
            .all(|w| w[0].aggregate <= w[1].aggregate));
        assert_eq!(r.iso_tags.len(), 6);
    }

    #[test]
    fn attribution_modes() {
        let (exact, hybrid, repos) = fixture();
        let local = aggregate_savings(&exact, &hybrid, &repos, &SavingsConfig::default()).unwrap();
        // Repo a keeps one of {0,1} and one of {2,3}; repo b keeps its 4.
        assert_eq!(local.per_repo["a"].eliminable, 2.0);
        assert_eq!(local.per_repo["b"].eliminable, 0.0);
        assert_eq!(local.per_repo["a"].rate, 0.5);
        // Repo b gains 5 joining 4 under hybrid.
        assert!((local.per_repo["b"].eliminable_combined - 0.57).abs() < 1e-12);

        let prop = SavingsConfig {
            attribution: Attribution::Proportional,
            ..SavingsConfig::default()
        };
        let p = aggregate_savings(&exact, &hybrid, &repos, &prop).unwrap();
        assert!((p.per_repo["a"].eliminable - (2.0 * 2.0 / 3.0 + 1.0)).abs() < 1e-12);
        assert!((p.per_repo["b"].eliminable - 2.0 / 3.0).abs() < 1e-12);
        // Tiers use the proportional split either way.
        assert_eq!(local.tiers, p.tiers);
        let tier_sum: f64 = p.tiers.iter().map(|t| t.tier_eliminable).sum();
        assert!((tier_sum - p.aggregate_exact).abs() < 1e-9);
    }

    #[test]
    fn singletons_only() {
        let repos = vec!["a", "b"];
        let exact = vec![
            cluster(Strategy::Exact, vec![0]),
            cluster(Strategy::Exact, vec![1]),
        ];
        let r = aggregate_savings(&exact, &exact, &repos, &SavingsConfig::default()).unwrap();
        assert_eq!((r.aggregate_exact, r.aggregate_combined), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let (exact, hybrid, repos) = fixture();
        let bad = SavingsConfig {
            conf_hybrid: 1.5,
            ..SavingsConfig::default()
        };
        assert!(aggregate_savings(&exact, &hybrid, &repos, &bad).is_err());
        assert!(
            aggregate_savings(&exact, &hybrid, &repos[..3], &SavingsConfig::default()).is_err()
        );
        let mut no_hybrid = StrategyConfig::default();
        no_hybrid.confidence.remove(&Strategy::Hybrid);
        assert!(SavingsConfig::from_strategy(&no_hybrid).is_err());
    }
}
