//! Evaluation metrics for character consistency in generated story frames.
//!
//! Three dimensions are scored against reference data:
//!
//! * visual consistency: Fréchet distance between embedding distributions
//!   ([`distribution`]),
//! * spatial consistency: Dice and IoU of character masks ([`mask`]),
//! * form consistency: Hausdorff, Modified Hausdorff and Average Surface
//!   Distance between mask contours ([`surface`]).
//!
//! [`scoring`] maps the six values onto a single overall score, and
//! [`harness`] drives a full evaluation from a JSON manifest. [`attention`]
//! holds the mask cross-attention loss and constant-map arithmetic used when
//! training layout-controlled generators.

pub mod attention;
pub mod distribution;
pub mod embedding;
pub mod harness;
pub mod mask;
pub mod scoring;
pub mod surface;

pub use distribution::{EmbeddingSet, FrechetResult, GaussianStats};
pub use harness::{EvalOptions, EvaluationManifest, MetricReport};
pub use mask::{BinaryMask, ContourPointSet, OverlapResult};
pub use scoring::{OverallScore, RawMetricVector};
pub use surface::{DistanceField, SurfaceDistances};
