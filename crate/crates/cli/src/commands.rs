//! The four subcommands. Each returns the structured document it wrote so
//! callers and tests can inspect it without re-reading files.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::html::{self, Page};
use crate::output::{
    read_json, read_steps_csv, write_json, write_steps_csv, write_steps_parquet, write_text,
    Envelope, Format, StepRow,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};
use stepdedup_core::calibration::agreement::{binary_table, fleiss_kappa};
use stepdedup_core::calibration::metrics::MetricPoint;
use stepdedup_core::calibration::pairs::{load_pairs, write_pairs, Label};
use stepdedup_core::calibration::stats::{descriptive_stats, Descriptive};
use stepdedup_core::calibration::{calibrate, CalibrationReport};
use stepdedup_core::detect::{
    detect, duplication_rate, per_repo_rates, Cluster, RepoRates, Strategy,
};
use stepdedup_core::identity::{occurrences_from_files, LicenseClass};
use stepdedup_core::relabel::{relabel_benchmark, RelabelSummary};
use stepdedup_core::savings::{aggregate_savings, SavingsReport};
use stepdedup_core::scan::{repo_licenses, scan_tree};
use stepdedup_core::similarity::EmbeddingProvider;

/// Shared state for one invocation.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub formats: BTreeSet<Format>,
    pub provider: Box<dyn EmbeddingProvider>,
}

impl Context {
    pub fn new(config: RunConfig, out: PathBuf, formats: &[Format]) -> CliResult<Self> {
        std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
        let provider = config.build_provider();
        let formats = if formats.is_empty() {
            Format::ALL.into_iter().collect()
        } else {
            formats.iter().copied().collect()
        };
        Ok(Context {
            config,
            out,
            formats,
            provider,
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn envelope<T>(&self, kind: &str, data: T) -> Envelope<T> {
        Envelope::new(kind, &self.config, self.provider.name(), data)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn provenance(&self) -> Vec<(&'static str, String)> {
        vec![
            ("version", crate::output::VERSION.to_string()),
            ("config", self.config.hash()),
            (
                "provider",
                format!("{} ({})", self.provider.name(), self.provider.dim()),
            ),
            ("seed", self.config.seed.to_string()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileError {
    pub repo: String,
    pub path: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopCluster {
    pub canonical_text: String,
    pub occurrence_count: usize,
    pub distinct_files: usize,
    pub distinct_repos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    /// Clusters with at least two members.
    pub clusters: usize,
    pub clustered_steps: usize,
    pub duplication_rate: f64,
    pub per_repo: RepoRates,
    pub top_clusters: Vec<TopCluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub files: usize,
    pub repos: usize,
    pub total_steps: usize,
    pub unique_texts: usize,
    pub parse_errors: Vec<FileError>,
    pub licenses: BTreeMap<String, LicenseClass>,
    /// Character length of the normalised step texts.
    pub step_length: Descriptive,
    pub strategies: Vec<StrategySummary>,
}

/// Non-singleton clusters of one strategy. `members` index the rows of
/// `steps.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersDoc {
    pub strategy: Strategy,
    pub total_steps: usize,
    pub singletons: usize,
    pub clusters: Vec<Cluster>,
}

const TOP_CLUSTERS: usize = 20;

pub fn clusters_file(strategy: Strategy) -> String {
    format!("clusters_{}.json", strategy.as_str())
}

pub fn scan(root: &Path, ctx: &Context) -> CliResult<Envelope<ScanSummary>> {
    let files = scan_tree(root)?;
    let licenses = repo_licenses(root, &files);
    let occurrences = occurrences_from_files(&files, |repo| {
        licenses.get(repo).copied().unwrap_or(LicenseClass::Unknown)
    });
    if occurrences.is_empty() {
        return Err(CliError::Data(format!(
            "no steps found under {}",
            root.display()
        )));
    }
    let parse_errors: Vec<FileError> = files
        .iter()
        .flat_map(|f| {
            f.parse_errors.iter().map(|e| FileError {
                repo: f.repo_id.clone(),
                path: f.path.clone(),
                line: e.line_no,
                message: e.message.clone(),
            })
        })
        .collect();

    let rows: Vec<StepRow> = occurrences.iter().map(StepRow::from).collect();
    if ctx.wants(Format::Csv) {
        write_steps_csv(&ctx.path("steps.csv"), &rows)?;
    }
    if ctx.wants(Format::Columnar) {
        write_steps_parquet(&ctx.path("steps.parquet"), &rows)?;
    }

    let config = &ctx.config;
    let provider = Some(ctx.provider.as_ref());
    let mut strategies = Vec::new();
    for &strategy in &config.strategies {
        let clusters = detect(&occurrences, strategy, &config.detection, provider)?;
        let rate = duplication_rate(&clusters, occurrences.len())?;
        let per_repo = per_repo_rates(&occurrences, strategy, &config.detection, provider)?;
        let (multi, single): (Vec<Cluster>, Vec<Cluster>) =
            clusters.into_iter().partition(|c| c.occurrence_count > 1);
        strategies.push(StrategySummary {
            strategy,
            clusters: multi.len(),
            clustered_steps: multi.iter().map(|c| c.occurrence_count).sum(),
            duplication_rate: rate,
            per_repo,
            top_clusters: multi
                .iter()
                .take(TOP_CLUSTERS)
                .map(|c| TopCluster {
                    canonical_text: c.canonical_text.clone(),
                    occurrence_count: c.occurrence_count,
                    distinct_files: c.distinct_files,
                    distinct_repos: c.distinct_repos,
                })
                .collect(),
        });
        if ctx.wants(Format::Json) {
            let doc = ClustersDoc {
                strategy,
                total_steps: occurrences.len(),
                singletons: single.len(),
                clusters: multi,
            };
            write_json(
                &ctx.path(&clusters_file(strategy)),
                &ctx.envelope("clusters", doc),
            )?;
        }
    }

    let lengths: Vec<f64> = occurrences
        .iter()
        .map(|o| o.normalized_text.chars().count() as f64)
        .collect();
    let unique: BTreeSet<_> = occurrences.iter().map(|o| o.identity_digest).collect();
    let summary = ScanSummary {
        files: files.len(),
        repos: licenses.len(),
        total_steps: occurrences.len(),
        unique_texts: unique.len(),
        parse_errors,
        step_length: descriptive_stats(&lengths)?,
        licenses,
        strategies,
    };
    let doc = ctx.envelope("scan_summary", summary);
    if ctx.wants(Format::Json) {
        write_json(&ctx.path("summary.json"), &doc)?;
    }
    if ctx.wants(Format::Html) {
        write_text(&ctx.path("report.html"), &scan_html(&doc.data, ctx))?;
    }
    Ok(doc)
}

fn scan_html(s: &ScanSummary, ctx: &Context) -> String {
    let mut page = Page::new("Duplicate step report");
    page.meta(&ctx.provenance());
    page.table(
        &[
            "Files",
            "Repositories",
            "Steps",
            "Unique texts",
            "Parse errors",
            "Median length",
        ],
        &[vec![
            s.files.to_string(),
            s.repos.to_string(),
            s.total_steps.to_string(),
            s.unique_texts.to_string(),
            s.parse_errors.len().to_string(),
            s.step_length.median.to_string(),
        ]],
    );
    page.heading("Strategies");
    let rows: Vec<Vec<String>> = s
        .strategies
        .iter()
        .map(|st| {
            vec![
                st.strategy.as_str().to_string(),
                st.clusters.to_string(),
                st.clustered_steps.to_string(),
                html::pct(st.duplication_rate),
                st.per_repo.median.map(html::pct).unwrap_or_default(),
            ]
        })
        .collect();
    page.table(
        &[
            "Strategy",
            "Clusters",
            "Clustered steps",
            "Duplication %",
            "Median repo %",
        ],
        &rows,
    );
    for st in &s.strategies {
        page.heading(&format!("Largest {} clusters", st.strategy.as_str()));
        let rows: Vec<Vec<String>> = st
            .top_clusters
            .iter()
            .map(|c| {
                vec![
                    c.canonical_text.clone(),
                    c.occurrence_count.to_string(),
                    c.distinct_files.to_string(),
                    c.distinct_repos.to_string(),
                ]
            })
            .collect();
        page.table(
            &["Canonical text", "Occurrences", "Files", "Repositories"],
            &rows,
        );
    }
    if !s.parse_errors.is_empty() {
        page.heading("Parse errors");
        let rows: Vec<Vec<String>> = s
            .parse_errors
            .iter()
            .map(|e| {
                vec![
                    e.repo.clone(),
                    e.path.clone(),
                    e.line.to_string(),
                    e.message.clone(),
                ]
            })
            .collect();
        page.table(&["Repository", "Path", "Line", "Message"], &rows);
    }
    page.render()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelDoc {
    pub output: String,
    pub summary: RelabelSummary,
}

pub const RELABELLED_FILE: &str = "pairs_score_free.jsonl";

pub fn relabel(pairs_path: &Path, ctx: &Context) -> CliResult<Envelope<RelabelDoc>> {
    let pairs = load_pairs(pairs_path)?;
    let synonyms = ctx.config.synonyms()?;
    let (out, summary) = relabel_benchmark(&pairs, &synonyms, &ctx.config.relabel.rules);
    let path = ctx.path(RELABELLED_FILE);
    let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_pairs(std::io::BufWriter::new(file), &out).map_err(|e| CliError::io(&path, e))?;
    let doc = ctx.envelope(
        "relabel",
        RelabelDoc {
            output: RELABELLED_FILE.to_string(),
            summary,
        },
    );
    if ctx.wants(Format::Json) {
        write_json(&ctx.path("relabel_summary.json"), &doc)?;
    }
    if ctx.wants(Format::Html) {
        let s = &doc.data.summary;
        let mut page = Page::new("Score-free relabelling");
        page.meta(&ctx.provenance());
        page.table(
            &["Pairs", "Duplicate", "Not duplicate", "Kappa vs input"],
            &[vec![
                s.pairs.to_string(),
                s.positives.to_string(),
                s.negatives.to_string(),
                s.agreement.map(|a| html::num(a.kappa)).unwrap_or_default(),
            ]],
        );
        let rows: Vec<Vec<String>> = s
            .rule_counts
            .iter()
            .map(|(r, n)| vec![r.to_string(), n.to_string()])
            .collect();
        page.table(&["Rule", "Pairs"], &rows);
        write_text(&ctx.path("relabel.html"), &page.render())?;
    }
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleissResult {
    pub items: usize,
    pub raters: usize,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDoc {
    pub report: CalibrationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleiss: Option<FleissResult>,
}

#[derive(Deserialize)]
struct OverlapRow {
    ratings: Vec<Label>,
}

/// Items rated by several annotators: one JSON object per line with a
/// `ratings` array of labels.
pub fn load_overlap(path: &Path) -> CliResult<FleissResult> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut ratings = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: OverlapRow = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        ratings.push(
            row.ratings
                .into_iter()
                .map(Label::is_duplicate)
                .collect::<Vec<_>>(),
        );
    }
    let kappa = fleiss_kappa(&binary_table(&ratings))?;
    Ok(FleissResult {
        items: ratings.len(),
        raters: ratings.first().map_or(0, Vec::len),
        kappa,
    })
}

pub fn calibrate_cmd(
    pairs_path: &Path,
    overlap: Option<&Path>,
    ctx: &Context,
) -> CliResult<Envelope<CalibrationDoc>> {
    let pairs = load_pairs(pairs_path)?;
    let config = &ctx.config;
    let report = calibrate(
        &pairs,
        &config.calibrate.scorers,
        &config.detection,
        &config.calibration_config(),
        Some(ctx.provider.as_ref()),
        &config.synonyms()?,
        &config.relabel.rules,
    )?;
    let fleiss = overlap.map(load_overlap).transpose()?;
    let doc = ctx.envelope("calibration", CalibrationDoc { report, fleiss });
    if ctx.wants(Format::Json) {
        write_json(&ctx.path("calibration.json"), &doc)?;
    }
    if ctx.wants(Format::Csv) {
        write_calibration_csv(&ctx.path("calibration.csv"), &doc.data.report)?;
    }
    if ctx.wants(Format::Html) {
        write_text(
            &ctx.path("calibration.html"),
            &calibration_html(&doc.data, ctx),
        )?;
    }
    Ok(doc)
}

fn ci(p: &MetricPoint) -> [(f64, Option<(f64, f64)>); 3] {
    let pair =
        |i: Option<stepdedup_core::calibration::metrics::Interval>| i.map(|i| (i.low, i.high));
    [
        (p.precision, pair(p.precision_ci)),
        (p.recall, pair(p.recall_ci)),
        (p.f1, pair(p.f1_ci)),
    ]
}

fn write_calibration_csv(path: &Path, report: &CalibrationReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record([
        "scorer",
        "baseline",
        "protocol",
        "threshold",
        "precision",
        "precision_low",
        "precision_high",
        "recall",
        "recall_low",
        "recall_high",
        "f1",
        "f1_low",
        "f1_high",
        "cv_mean_f1",
        "cv_sd_f1",
    ])
    .map_err(|e| CliError::io(path, e))?;
    for s in &report.scorers {
        for (protocol, point) in [("primary", &s.primary), ("score_free", &s.score_free)] {
            let mut rec = vec![
                s.scorer.to_string(),
                s.baseline.to_string(),
                protocol.to_string(),
                point.threshold.to_string(),
            ];
            for (v, interval) in ci(point) {
                let (lo, hi) = interval.unwrap_or((v, v));
                rec.extend([v.to_string(), lo.to_string(), hi.to_string()]);
            }
            let cv = s.cv.as_ref();
            rec.push(cv.map(|c| c.mean_f1.to_string()).unwrap_or_default());
            rec.push(cv.map(|c| c.sd_f1.to_string()).unwrap_or_default());
            w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn with_ci(v: f64, interval: Option<(f64, f64)>) -> String {
    match interval {
        Some((lo, hi)) => format!("{} [{}, {}]", html::num(v), html::num(lo), html::num(hi)),
        None => html::num(v),
    }
}

fn calibration_html(doc: &CalibrationDoc, ctx: &Context) -> String {
    let r = &doc.report;
    let mut page = Page::new("Detector calibration");
    page.meta(&ctx.provenance());
    page.table(
        &[
            "Pairs",
            "Primary +",
            "Primary −",
            "Score-free +",
            "Score-free −",
            "Protocol kappa",
        ],
        &[vec![
            r.pair_count.to_string(),
            r.primary_counts.positive.to_string(),
            r.primary_counts.negative.to_string(),
            r.score_free_counts.positive.to_string(),
            r.score_free_counts.negative.to_string(),
            r.protocol_agreement
                .map(|a| html::num(a.kappa))
                .unwrap_or_default(),
        ]],
    );
    if let Some(f) = &doc.fleiss {
        page.paragraph(&format!(
            "Fleiss kappa over {} items with {} raters each: {}",
            f.items,
            f.raters,
            html::num(f.kappa)
        ));
    }
    let rows: Vec<Vec<String>> = r
        .scorers
        .iter()
        .map(|s| {
            let [p, rc, f] = ci(&s.primary);
            let [fp, frc, ff] = ci(&s.score_free);
            vec![
                format!(
                    "{}{}",
                    s.scorer,
                    if s.baseline { " (baseline)" } else { "" }
                ),
                html::num(s.primary.threshold),
                with_ci(p.0, p.1),
                with_ci(rc.0, rc.1),
                with_ci(f.0, f.1),
                with_ci(fp.0, fp.1),
                with_ci(frc.0, frc.1),
                with_ci(ff.0, ff.1),
                s.cv.as_ref()
                    .map(|c| format!("{} ± {}", html::num(c.mean_f1), html::num(c.sd_f1)))
                    .unwrap_or_else(|| s.cv_error.clone().unwrap_or_default()),
            ]
        })
        .collect();
    page.heading("Best-F1 operating points");
    page.table(
        &[
            "Scorer",
            "Threshold",
            "P (primary)",
            "R (primary)",
            "F1 (primary)",
            "P (score-free)",
            "R (score-free)",
            "F1 (score-free)",
            "CV F1",
        ],
        &rows,
    );
    page.render()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsDoc {
    pub scan_config_hash: String,
    pub report: SavingsReport,
    pub roster_file: String,
}

pub const ROSTER_FILE: &str = "rosters.csv";

fn load_clusters(dir: &Path, strategy: Strategy, steps: usize) -> CliResult<Envelope<ClustersDoc>> {
    let path = dir.join(clusters_file(strategy));
    let doc: Envelope<ClustersDoc> = read_json(&path)?;
    if doc.data.total_steps != steps {
        return Err(CliError::Data(format!(
            "{} was built from {} steps but steps.csv has {steps}",
            path.display(),
            doc.data.total_steps
        )));
    }
    Ok(doc)
}

pub fn savings(artifacts: &Path, ctx: &Context) -> CliResult<Envelope<SavingsDoc>> {
    let rows = read_steps_csv(&artifacts.join("steps.csv"))?;
    let exact = load_clusters(artifacts, Strategy::Exact, rows.len())?;
    let hybrid = load_clusters(artifacts, Strategy::Hybrid, rows.len())?;
    let repos: Vec<&str> = rows.iter().map(|r| r.repo.as_str()).collect();
    let report = aggregate_savings(
        &exact.data.clusters,
        &hybrid.data.clusters,
        &repos,
        &ctx.config.savings_config()?,
    )?;

    if ctx.wants(Format::Csv) {
        let path = ctx.path(ROSTER_FILE);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
        w.write_record([
            "strategy",
            "cluster",
            "canonical_text",
            "occurrence_count",
            "repo",
            "path",
            "line",
        ])
        .map_err(|e| CliError::io(&path, e))?;
        for doc in [&exact.data, &hybrid.data] {
            for (id, c) in doc.clusters.iter().enumerate() {
                for &m in &c.members {
                    let r = &rows[m];
                    w.write_record([
                        doc.strategy.as_str(),
                        &id.to_string(),
                        &c.canonical_text,
                        &c.occurrence_count.to_string(),
                        &r.repo,
                        &r.path,
                        &r.line.to_string(),
                    ])
                    .map_err(|e| CliError::io(&path, e))?;
                }
            }
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
    }

    let doc = ctx.envelope(
        "savings",
        SavingsDoc {
            scan_config_hash: exact.config_hash.clone(),
            report,
            roster_file: ROSTER_FILE.to_string(),
        },
    );
    if ctx.wants(Format::Json) {
        write_json(&ctx.path("savings.json"), &doc)?;
    }
    if ctx.wants(Format::Html) {
        write_text(
            &ctx.path("savings.html"),
            &savings_html(&doc.data.report, ctx),
        )?;
    }
    Ok(doc)
}

fn savings_html(r: &SavingsReport, ctx: &Context) -> String {
    let mut page = Page::new("Consolidation savings");
    page.meta(&ctx.provenance());
    page.table(
        &[
            "Steps",
            "Eliminable (exact)",
            "Hybrid surplus",
            "Combined",
            "Hybrid confidence",
        ],
        &[vec![
            r.total_steps.to_string(),
            html::num(r.aggregate_exact),
            html::num(r.hybrid_surplus),
            html::num(r.aggregate_combined),
            r.config.conf_hybrid.to_string(),
        ]],
    );
    page.paragraph("Counts are step occurrences that merging each cluster into one canonical step would remove. No effort or cost conversion is applied.");
    page.heading("Sensitivity to the hybrid confidence");
    let rows: Vec<Vec<String>> = r
        .sensitivity
        .iter()
        .map(|p| vec![format!("{:.1}", p.conf_hybrid), html::num(p.aggregate)])
        .collect();
    page.table(&["Hybrid confidence", "Eliminable"], &rows);
    page.heading("Repository size tiers");
    let rows: Vec<Vec<String>> = r
        .tiers
        .iter()
        .map(|t| {
            vec![
                format!("{:?}", t.tier),
                t.repo_count.to_string(),
                t.tier_steps.to_string(),
                html::num(t.tier_eliminable),
            ]
        })
        .collect();
    page.table(&["Tier", "Repositories", "Steps", "Eliminable"], &rows);
    page.heading("Repositories");
    let rows: Vec<Vec<String>> = r
        .per_repo
        .iter()
        .map(|(name, s)| {
            vec![
                name.clone(),
                s.steps.to_string(),
                html::num(s.eliminable),
                html::pct(s.rate),
                html::pct(s.rate_combined),
            ]
        })
        .collect();
    page.table(
        &[
            "Repository",
            "Steps",
            "Eliminable",
            "Rate %",
            "Combined rate %",
        ],
        &rows,
    );
    page.heading("Quality characteristics");
    let rows: Vec<Vec<String>> = r
        .iso_tags
        .iter()
        .map(|t| {
            vec![
                t.characteristic.to_string(),
                t.sub_characteristic.to_string(),
                t.report_section.to_string(),
                t.note.to_string(),
            ]
        })
        .collect();
    page.table(
        &[
            "ISO/IEC 25010",
            "Sub-characteristic",
            "Section",
            "Relevance",
        ],
        &rows,
    );
    page.render()
}
