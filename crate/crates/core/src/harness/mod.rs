//! End-to-end evaluation of one model from a manifest, plus report output
//! and cross-model ranking.

pub mod json;
mod manifest;
mod report;

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{CvcInputs, EvaluationManifest, MaskPair};
pub use report::{
    emit_report, ConfigEcho, DatasetMetrics, MetricReport, PairMetrics, ReportFormat,
    FLAG_BOTH_EMPTY, FLAG_EMPTY_GENERATED, FLAG_EMPTY_REFERENCE, FLAG_EXCLUDED,
};

use crate::distribution::{cvc_evaluate, DistributionError, DEFAULT_EPSILON};
use crate::embedding::{read_embeddings, EmbeddingError};
use crate::mask::{extract_contour, load_mask, overlap, MaskError};
use crate::scoring::{aggregate_overall, RawMetricVector, ScoringError};
use crate::surface::{surface_distances, SurfaceError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest: {0}")]
    ManifestParse(String),
    #[error("report: {0}")]
    ReportParse(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} pair(s) failed: {}", .0.len(), summarize(.0))]
    Pairs(Vec<PairFailure>),
    #[error("embeddings: {0}")]
    Embedding(#[from] EmbeddingError),
    #[error("CVC: {0}")]
    Distribution(#[from] DistributionError),
    #[error("scoring: {0}")]
    Scoring(#[from] ScoringError),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("nothing to rank")]
    EmptyInput,
}

fn summarize(failures: &[PairFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("[{}] {}", f.id, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl EvalError {
    /// True when the failure came from reading or writing files.
    pub fn is_io(&self) -> bool {
        match self {
            EvalError::File { .. } | EvalError::Write { .. } => true,
            EvalError::Embedding(EmbeddingError::Io { .. }) => true,
            EvalError::Pairs(failures) => failures.iter().any(|f| f.io),
            _ => false,
        }
    }

    /// 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            2
        } else {
            1
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairFailure {
    pub id: String,
    pub message: String,
    pub io: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalOptions {
    /// Exclude and flag pairs with an empty contour instead of failing.
    #[serde(alias = "skip_empty")]
    pub skip_empty: bool,
    pub epsilon: f64,
    /// Divide surface distances by the mask diagonal.
    #[serde(alias = "normalize_distances")]
    pub normalize_distances: bool,
    /// Worker threads for per-pair metrics; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            skip_empty: false,
            epsilon: DEFAULT_EPSILON,
            normalize_distances: false,
            threads: None,
        }
    }
}

impl EvalOptions {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Options(e.to_string()))
    }

    fn validate(&self) -> Result<(), EvalError> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(EvalError::Options(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if self.threads == Some(0) {
            return Err(EvalError::Options("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn echo(&self, from_raw: Option<&Path>) -> ConfigEcho {
        ConfigEcho {
            skip_empty: self.skip_empty,
            epsilon: self.epsilon,
            normalize_distances: self.normalize_distances,
            from_raw: from_raw.map(Path::to_path_buf),
        }
    }
}

enum PairOutcome {
    Scored(PairMetrics, Option<String>),
    Failed(PairFailure),
}

fn evaluate_pair(pair: &MaskPair, options: &EvalOptions) -> PairOutcome {
    let fail = |message: String, io: bool| {
        PairOutcome::Failed(PairFailure {
            id: pair.id.clone(),
            message,
            io,
        })
    };
    // (message, is_io) on failure
    let load = |path: &Path| -> Result<_, (String, bool)> {
        let bytes = fs::read(path).map_err(|e| (format!("{}: {e}", path.display()), true))?;
        load_mask(&bytes).map_err(|e: MaskError| (format!("{}: {e}", path.display()), false))
    };
    let generated = match load(&pair.generated_mask) {
        Ok(m) => m,
        Err((message, io)) => return fail(message, io),
    };
    let reference = match load(&pair.reference_mask) {
        Ok(m) => m,
        Err((message, io)) => return fail(message, io),
    };
    let scores = match overlap(&generated, &reference) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string(), false),
    };

    let mut flags = Vec::new();
    let mut warning = None;
    if scores.both_empty() {
        flags.push(FLAG_BOTH_EMPTY.to_string());
        warning = Some(format!(
            "pair {}: both masks are empty; Dice and IoU scored as 1",
            pair.id
        ));
    }

    let gen_contour = extract_contour(&generated);
    let ref_contour = extract_contour(&reference);
    let distances = match surface_distances(&gen_contour, &ref_contour) {
        Ok(d) => Some(d),
        Err(SurfaceError::EmptyContour(_)) => {
            if gen_contour.is_empty() {
                flags.push(FLAG_EMPTY_GENERATED.to_string());
            }
            if ref_contour.is_empty() {
                flags.push(FLAG_EMPTY_REFERENCE.to_string());
            }
            if !options.skip_empty {
                return fail(
                    format!(
                        "empty contour ({}); rerun with --skip-empty to exclude",
                        flags.join(", ")
                    ),
                    false,
                );
            }
            flags.push(FLAG_EXCLUDED.to_string());
            None
        }
    };
    let distances = distances.map(|d| {
        if options.normalize_distances {
            let (w, h) = (generated.width() as f64, generated.height() as f64);
            d.scaled(1.0 / (w * w + h * h).sqrt())
        } else {
            d
        }
    });

    PairOutcome::Scored(
        PairMetrics {
            id: pair.id.clone(),
            dice: scores.dice,
            iou: scores.iou,
            hausdorff: distances.map(|d| d.hausdorff),
            modified_hausdorff: distances.map(|d| d.modified_hausdorff),
            asd: distances.map(|d| d.average_surface_distance),
            flags,
        },
        warning,
    )
}

/// Sequential mean over pairs that were not excluded.
fn dataset_means(per_pair: &[PairMetrics]) -> DatasetMetrics {
    let used: Vec<&PairMetrics> = per_pair.iter().filter(|p| !p.excluded()).collect();
    if used.is_empty() {
        return DatasetMetrics::default();
    }
    let n = used.len() as f64;
    let mean = |f: &dyn Fn(&PairMetrics) -> f64| {
        let mut sum = 0.0;
        for p in &used {
            sum += f(p);
        }
        sum / n
    };
    DatasetMetrics {
        cn: None,
        sr: Some(mean(&|p| p.dice)),
        la: Some(mean(&|p| p.iou)),
        bdp: Some(mean(&|p| {
            p.hausdorff.expect("included pairs have distances")
        })),
        mc: Some(mean(&|p| {
            p.modified_hausdorff.expect("included pairs have distances")
        })),
        ads: Some(mean(&|p| p.asd.expect("included pairs have distances"))),
        pairs_used: used.len(),
        cn_regularized: None,
    }
}

fn score_pairs(pairs: &[MaskPair], options: &EvalOptions) -> Result<Vec<PairOutcome>, EvalError> {
    let run = || {
        pairs
            .par_iter()
            .map(|p| evaluate_pair(p, options))
            .collect()
    };
    match options.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EvalError::Options(e.to_string()))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// Runs every metric the manifest has inputs for.
///
/// Per-pair work may run in parallel; all reductions happen afterwards in
/// manifest order, so the report does not depend on the thread count.
pub fn run_evaluation(
    manifest: &EvaluationManifest,
    options: &EvalOptions,
) -> Result<MetricReport, EvalError> {
    options.validate()?;
    manifest.validate()?;
    let mut warnings = Vec::new();

    let outcomes = score_pairs(&manifest.pairs, options)?;
    let mut per_pair = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            PairOutcome::Scored(metrics, warning) => {
                warnings.extend(warning);
                per_pair.push(metrics);
            }
            PairOutcome::Failed(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(EvalError::Pairs(failures));
    }
    for p in per_pair.iter().filter(|p| p.excluded()) {
        warnings.push(format!("pair {}: excluded ({})", p.id, p.flags.join(", ")));
    }

    let mut dataset = dataset_means(&per_pair);
    if !manifest.pairs.is_empty() && dataset.pairs_used == 0 {
        warnings.push("every pair was excluded; SR, LA, BDP, MC and ADS are absent".into());
    }

    match &manifest.cvc {
        Some(cvc) => {
            let generated = read_embeddings(&cvc.generated_embeddings)?;
            let reference = read_embeddings(&cvc.reference_embeddings)?;
            let result = cvc_evaluate(&generated, &reference, options.epsilon)?;
            warnings.extend(result.warnings);
            dataset.cn = Some(result.frechet.fid);
            dataset.cn_regularized = Some(result.frechet.regularization_applied);
        }
        None => warnings.push(
            "WARNING: no CVC embeddings supplied; CN is absent and Overall is omitted".into(),
        ),
    }

    let overall = dataset
        .raw()
        .map(|raw| aggregate_overall(&raw))
        .transpose()?;
    Ok(MetricReport {
        model_name: manifest.model_name.clone(),
        tool_version: TOOL_VERSION.to_string(),
        config_echo: options.echo(None),
        per_pair,
        dataset,
        overall,
        warnings,
        human_scores: manifest.human_scores.clone(),
    })
}

/// Raw dataset metrics supplied directly, for reproducing published rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawFixture {
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(flatten)]
    pub metrics: RawMetricVector,
}

impl RawFixture {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path).map_err(|source| EvalError::File {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| EvalError::ManifestParse(format!("{}: {e}", path.display())))
    }
}

pub fn report_from_raw(
    model_name: &str,
    raw: &RawMetricVector,
    options: &EvalOptions,
    source: Option<&Path>,
) -> Result<MetricReport, EvalError> {
    options.validate()?;
    let overall = aggregate_overall(raw)?;
    Ok(MetricReport {
        model_name: model_name.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        config_echo: options.echo(source),
        per_pair: Vec::new(),
        dataset: DatasetMetrics::from_raw(raw),
        overall: Some(overall),
        warnings: Vec::new(),
        human_scores: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankingRow {
    pub rank: usize,
    pub model_name: String,
    pub dataset: DatasetMetrics,
    pub overall: Option<f64>,
}

/// Orders reports by overall score, highest first; equal scores fall back to
/// model name. Reports without an overall score are listed last.
pub fn compare_models(reports: &[MetricReport]) -> Result<Vec<RankingRow>, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut rows: Vec<RankingRow> = reports
        .iter()
        .map(|r| RankingRow {
            rank: 0,
            model_name: r.model_name.clone(),
            dataset: r.dataset,
            overall: r.overall.map(|o| o.overall),
        })
        .collect();
    rows.sort_by(|a, b| {
        let by_score = match (a.overall, b.overall) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_score.then_with(|| a.model_name.cmp(&b.model_name))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.rank = i + 1;
    }
    Ok(rows)
}

/// Plain-text table; metric values rounded the way published tables print them.
pub fn render_ranking(rows: &[RankingRow]) -> String {
    let name_width = rows
        .iter()
        .map(|r| r.model_name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let int = |v: Option<f64>| v.map(|v| format!("{v:.0}")).unwrap_or_else(|| "-".into());
    let two = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4}  {:<name_width$}  {:>6}  {:>5}  {:>5}  {:>6}  {:>6}  {:>6}  {:>7}",
        "rank", "model", "CN", "SR", "LA", "BDP", "MC", "ADS", "Overall"
    );
    for r in rows {
        let d = &r.dataset;
        let _ = writeln!(
            out,
            "{:>4}  {:<name_width$}  {:>6}  {:>5}  {:>5}  {:>6}  {:>6}  {:>6}  {:>7}",
            r.rank,
            r.model_name,
            int(d.cn),
            two(d.sr),
            two(d.la),
            int(d.bdp),
            int(d.mc),
            int(d.ads),
            two(r.overall),
        );
    }
    out
}
