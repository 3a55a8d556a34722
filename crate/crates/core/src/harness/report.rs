use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{json, EvalError};
use crate::scoring::{OverallScore, RawMetricVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub id: String,
    pub dice: f64,
    pub iou: f64,
    pub hausdorff: Option<f64>,
    pub modified_hausdorff: Option<f64>,
    pub asd: Option<f64>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl PairMetrics {
    pub fn excluded(&self) -> bool {
        self.flags.iter().any(|f| f == FLAG_EXCLUDED)
    }
}

pub const FLAG_EXCLUDED: &str = "excluded";
pub const FLAG_EMPTY_GENERATED: &str = "empty_generated_contour";
pub const FLAG_EMPTY_REFERENCE: &str = "empty_reference_contour";
pub const FLAG_BOTH_EMPTY: &str = "both_masks_empty";

/// Dataset-level metric values. A field is `None` when its inputs were not
/// supplied (no embeddings for `cn`, no usable pairs for the rest).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetrics {
    pub cn: Option<f64>,
    pub sr: Option<f64>,
    pub la: Option<f64>,
    pub bdp: Option<f64>,
    pub mc: Option<f64>,
    pub ads: Option<f64>,
    /// Pairs that contributed to the means.
    pub pairs_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn_regularized: Option<bool>,
}

impl DatasetMetrics {
    pub fn from_raw(raw: &RawMetricVector) -> Self {
        Self {
            cn: Some(raw.cn),
            sr: Some(raw.sr),
            la: Some(raw.la),
            bdp: Some(raw.bdp),
            mc: Some(raw.mc),
            ads: Some(raw.ads),
            pairs_used: 0,
            cn_regularized: None,
        }
    }

    /// All six values, if every one is present.
    pub fn raw(&self) -> Option<RawMetricVector> {
        Some(RawMetricVector {
            cn: self.cn?,
            sr: self.sr?,
            la: self.la?,
            bdp: self.bdp?,
            mc: self.mc?,
            ads: self.ads?,
        })
    }
}

/// Options that shaped a report, echoed into it. Thread count is left out so
/// reports do not depend on how they were computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub skip_empty: bool,
    pub epsilon: f64,
    pub normalize_distances: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_raw: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model_name: String,
    pub tool_version: String,
    pub config_echo: ConfigEcho,
    pub per_pair: Vec<PairMetrics>,
    pub dataset: DatasetMetrics,
    pub overall: Option<OverallScore>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_scores: Option<serde_json::Value>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut text = json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::ReportParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            EvalError::ReportParse(msg) => {
                EvalError::ReportParse(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    /// One row per pair, then a `dataset` summary row; four decimals.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let row = |w: &mut csv::Writer<Vec<u8>>, fields: [String; 10]| {
            w.write_record(&fields).expect("in-memory CSV write");
        };
        row(
            &mut writer,
            [
                "row",
                "id",
                "cn",
                "dice",
                "iou",
                "hausdorff",
                "modified_hausdorff",
                "asd",
                "overall",
                "flags",
            ]
            .map(String::from),
        );
        for p in &self.per_pair {
            row(
                &mut writer,
                [
                    "pair".into(),
                    p.id.clone(),
                    String::new(),
                    fixed4(Some(p.dice)),
                    fixed4(Some(p.iou)),
                    fixed4(p.hausdorff),
                    fixed4(p.modified_hausdorff),
                    fixed4(p.asd),
                    String::new(),
                    p.flags.join(";"),
                ],
            );
        }
        let d = &self.dataset;
        row(
            &mut writer,
            [
                "dataset".into(),
                self.model_name.clone(),
                fixed4(d.cn),
                fixed4(d.sr),
                fixed4(d.la),
                fixed4(d.bdp),
                fixed4(d.mc),
                fixed4(d.ads),
                fixed4(self.overall.map(|o| o.overall)),
                String::new(),
            ],
        );
        String::from_utf8(writer.into_inner().expect("flush to Vec")).expect("CSV is UTF-8")
    }
}

fn fixed4(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Writes the report to `destination`, or standard output when `None`.
pub fn emit_report(
    report: &MetricReport,
    format: ReportFormat,
    destination: Option<&Path>,
) -> Result<(), EvalError> {
    let text = match format {
        ReportFormat::Json => report.to_json(),
        ReportFormat::Csv => report.to_csv(),
    };
    let write_err = |path: &Path, source: io::Error| EvalError::Write {
        path: path.to_path_buf(),
        source,
    };
    match destination {
        Some(path) => {
            let file = File::create(path).map_err(|e| write_err(path, e))?;
            let mut out = BufWriter::new(file);
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| write_err(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())
                .and_then(|_| lock.flush())
                .map_err(|e| write_err(Path::new("<stdout>"), e))
        }
    }
}
