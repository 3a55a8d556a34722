//! Score transformation and aggregation.
//!
//! Lower-is-better metrics (FID, Hausdorff, Modified Hausdorff, ASD) are
//! mapped into `(0, 1]` with `f1(x) = exp(-x / 200)` and summed with the
//! raw Dice and mIoU values, giving an overall score in `[0, 6]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper end of the range over which the candidates are compared.
pub const OPERATIVE_RANGE: f64 = 400.0;
/// Grid spacing for the sampled desiderata checks.
pub const GRID_STEP: f64 = 0.5;
/// Largest accepted ratio of max to min derivative magnitude on the grid.
pub const UNIFORM_RATE_LIMIT: f64 = 10.0;
const DERIVATIVE_STEP: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("negative input {0}")]
    NegativeInput(f64),
    #[error("{0} is outside the candidate's domain")]
    DomainError(f64),
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("unknown candidate function {0:?}")]
    UnknownCandidate(String),
}

fn check_nonnegative(x: f64) -> Result<f64, ScoringError> {
    if x.is_nan() || x < 0.0 {
        return Err(ScoringError::NegativeInput(x));
    }
    Ok(x)
}

/// `exp(-x / 200)`
pub fn f1(x: f64) -> Result<f64, ScoringError> {
    check_nonnegative(x).map(|x| (-x / 200.0).exp())
}

/// `1 / (x + 1)`
pub fn f2(x: f64) -> Result<f64, ScoringError> {
    check_nonnegative(x).map(|x| 1.0 / (x + 1.0))
}

/// `1 / sqrt(x + 1)`
pub fn f3(x: f64) -> Result<f64, ScoringError> {
    check_nonnegative(x).map(|x| 1.0 / (x + 1.0).sqrt())
}

/// `1 - x / 400`, defined on `[0, 400]` only.
pub fn f4(x: f64) -> Result<f64, ScoringError> {
    let x = check_nonnegative(x)?;
    if x > OPERATIVE_RANGE {
        return Err(ScoringError::DomainError(x));
    }
    Ok(1.0 - x / 400.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Candidate {
    F1,
    F2,
    F3,
    F4,
}

impl Candidate {
    pub const ALL: [Candidate; 4] = [Candidate::F1, Candidate::F2, Candidate::F3, Candidate::F4];

    pub fn eval(self, x: f64) -> Result<f64, ScoringError> {
        match self {
            Candidate::F1 => f1(x),
            Candidate::F2 => f2(x),
            Candidate::F3 => f3(x),
            Candidate::F4 => f4(x),
        }
    }

    /// Closed-form expression without domain checks, for difference stencils
    /// that step just outside the grid.
    fn formula(self, x: f64) -> f64 {
        match self {
            Candidate::F1 => (-x / 200.0).exp(),
            Candidate::F2 => 1.0 / (x + 1.0),
            Candidate::F3 => 1.0 / (x + 1.0).sqrt(),
            Candidate::F4 => 1.0 - x / 400.0,
        }
    }

    pub fn expression(self) -> &'static str {
        match self {
            Candidate::F1 => "exp(-x/200)",
            Candidate::F2 => "1/(x+1)",
            Candidate::F3 => "1/sqrt(x+1)",
            Candidate::F4 => "1 - x/400",
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Candidate::F1 => "f1",
            Candidate::F2 => "f2",
            Candidate::F3 => "f3",
            Candidate::F4 => "f4",
        };
        f.write_str(name)
    }
}

impl FromStr for Candidate {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" => Ok(Candidate::F1),
            "f2" => Ok(Candidate::F2),
            "f3" => Ok(Candidate::F3),
            "f4" => Ok(Candidate::F4),
            _ => Err(ScoringError::UnknownCandidate(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMethod {
    Sampled,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub method: CheckMethod,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesiderataReport {
    pub candidate: Candidate,
    pub criteria: Vec<CriterionResult>,
    /// max |f'| / min |f'| over the grid.
    pub derivative_ratio: f64,
}

impl DesiderataReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn criterion(&self, id: &str) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

fn grid() -> impl Iterator<Item = f64> {
    let steps = (OPERATIVE_RANGE / GRID_STEP) as usize;
    (0..=steps).map(|i| i as f64 * GRID_STEP)
}

/// Evaluates criteria (i)-(vi) for one candidate on `[0, 400]`.
///
/// Domain, codomain, monotonicity and uniform rate are sampled on the grid.
/// Continuity, uniform continuity and differentiability hold in closed form
/// for all four candidates (each is smooth with a bounded derivative on
/// `[0, inf)`, or on `[0, 400]` for `f4`) and are reported as analytic.
pub fn check_desiderata(candidate: Candidate) -> DesiderataReport {
    let values: Vec<Option<f64>> = grid()
        .map(|x| candidate.eval(x).ok().filter(|v| v.is_finite()))
        .collect();

    let undefined = values.iter().filter(|v| v.is_none()).count();
    let domain = CriterionResult {
        id: "i",
        name: "domain x >= 0",
        passed: undefined == 0,
        method: CheckMethod::Sampled,
        detail: format!("{undefined} undefined grid points"),
    };

    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let outside = defined.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
    let codomain = CriterionResult {
        id: "ii",
        name: "codomain [0, 1]",
        passed: undefined == 0 && outside == 0,
        method: CheckMethod::Sampled,
        detail: format!("{outside} grid values outside [0, 1]"),
    };

    let violations = defined.windows(2).filter(|w| w[1] >= w[0]).count();
    let decreasing = CriterionResult {
        id: "iii",
        name: "strictly decreasing",
        passed: undefined == 0 && violations == 0,
        method: CheckMethod::Sampled,
        detail: format!("{violations} non-decreasing steps"),
    };

    let (mut max_slope, mut min_slope) = (0.0f64, f64::INFINITY);
    for x in grid() {
        let slope = ((candidate.formula(x + DERIVATIVE_STEP)
            - candidate.formula(x - DERIVATIVE_STEP))
            / (2.0 * DERIVATIVE_STEP))
            .abs();
        max_slope = max_slope.max(slope);
        min_slope = min_slope.min(slope);
    }
    let ratio = max_slope / min_slope;
    let uniform = CriterionResult {
        id: "iv",
        name: "uniform rate of decrease",
        passed: ratio <= UNIFORM_RATE_LIMIT,
        method: CheckMethod::Sampled,
        detail: format!("max|f'|/min|f'| = {ratio:.4} (limit {UNIFORM_RATE_LIMIT})"),
    };

    let continuity = CriterionResult {
        id: "v",
        name: "continuous, uniformly continuous",
        passed: true,
        method: CheckMethod::Analytic,
        detail: "Lipschitz on its domain".into(),
    };
    let differentiable = CriterionResult {
        id: "vi",
        name: "differentiable",
        passed: true,
        method: CheckMethod::Analytic,
        detail: "smooth closed form".into(),
    };

    DesiderataReport {
        candidate,
        criteria: vec![
            domain,
            codomain,
            decreasing,
            uniform,
            continuity,
            differentiable,
        ],
        derivative_ratio: ratio,
    }
}

/// Dataset-level values of the six metrics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawMetricVector {
    /// Fréchet distance (CN)
    pub cn: f64,
    /// Dice (SR)
    pub sr: f64,
    /// mIoU (LA)
    pub la: f64,
    /// Hausdorff distance (BDP)
    pub bdp: f64,
    /// Modified Hausdorff distance (MC)
    pub mc: f64,
    /// Average surface distance (ADS)
    pub ads: f64,
}

impl RawMetricVector {
    pub fn validate(&self) -> Result<(), ScoringError> {
        let fields = [
            ("cn", self.cn),
            ("sr", self.sr),
            ("la", self.la),
            ("bdp", self.bdp),
            ("mc", self.mc),
            ("ads", self.ads),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(ScoringError::OutOfRange { field, value });
            }
        }
        for (field, value) in [("sr", self.sr), ("la", self.la)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ScoringError::OutOfRange { field, value });
            }
        }
        for (_, value) in [fields[0], fields[3], fields[4], fields[5]] {
            check_nonnegative(value)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformedTerms {
    pub cn: f64,
    pub bdp: f64,
    pub mc: f64,
    pub ads: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetainedTerms {
    pub sr: f64,
    pub la: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverallScore {
    pub transformed: TransformedTerms,
    pub retained: RetainedTerms,
    pub overall: f64,
}

/// `f1(cn) + f1(bdp) + f1(mc) + f1(ads) + sr + la`, summed in that order.
pub fn aggregate_overall(v: &RawMetricVector) -> Result<OverallScore, ScoringError> {
    v.validate()?;
    let transformed = TransformedTerms {
        cn: f1(v.cn)?,
        bdp: f1(v.bdp)?,
        mc: f1(v.mc)?,
        ads: f1(v.ads)?,
    };
    let overall = transformed.cn + transformed.bdp + transformed.mc + transformed.ads + v.sr + v.la;
    Ok(OverallScore {
        transformed,
        retained: RetainedTerms { sr: v.sr, la: v.la },
        overall,
    })
}
