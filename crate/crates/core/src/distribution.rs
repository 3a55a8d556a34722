//! Fréchet distance between Gaussians fitted to feature embeddings, and
//! cosine similarity scores over paired embeddings.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Default diagonal load applied when a covariance is near-singular.
pub const DEFAULT_EPSILON: f64 = 1e-6;

const SYMMETRY_TOLERANCE: f64 = 1e-8;
const EIGEN_TOLERANCE: f64 = 1e-8;
const NEGATIVE_FID_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("embedding set must have at least one row and one column")]
    EmptyEmbeddings,
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },
    #[error("feature dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is indefinite (eigenvalue {0:e})")]
    IndefiniteMatrix(f64),
    #[error("Fréchet distance evaluated to {0:e}, below the clamping tolerance")]
    NegativeDistance(f64),
    #[error("pair {index} contains a zero vector")]
    ZeroVector { index: usize },
    #[error("empty input")]
    EmptyInput,
}

/// `n` feature vectors of dimension `d`, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    rows: DMatrix<f64>,
}

impl EmbeddingSet {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DistributionError> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if n == 0 || d == 0 {
            return Err(DistributionError::EmptyEmbeddings);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(DistributionError::DimensionMismatch {
                left: d,
                right: bad.len(),
            });
        }
        Self::from_matrix(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
    }

    /// `values` is row-major with `n * d` entries.
    pub fn from_row_major(n: usize, d: usize, values: &[f64]) -> Result<Self, DistributionError> {
        if n == 0 || d == 0 {
            return Err(DistributionError::EmptyEmbeddings);
        }
        if values.len() != n * d {
            return Err(DistributionError::DimensionMismatch {
                left: n * d,
                right: values.len(),
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(n, d, values))
    }

    pub fn from_matrix(rows: DMatrix<f64>) -> Result<Self, DistributionError> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(DistributionError::EmptyEmbeddings);
        }
        for i in 0..rows.nrows() {
            for j in 0..rows.ncols() {
                if !rows[(i, j)].is_finite() {
                    return Err(DistributionError::NonFiniteInput { row: i, col: j });
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Number of samples the statistics were fitted to.
    pub samples: usize,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            mean,
            cov,
            samples: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fewer than two samples: the covariance is the zero matrix.
    pub fn single_sample(&self) -> bool {
        self.samples == 1
    }
}

/// Column means and the unbiased (n - 1) covariance, symmetrized.
pub fn fit_gaussian(e: &EmbeddingSet) -> GaussianStats {
    let (n, d) = (e.n(), e.d());
    let x = e.matrix();
    let mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let cov = if n < 2 {
        DMatrix::zeros(d, d)
    } else {
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let c = centered.transpose() * &centered / (n - 1) as f64;
        (&c + c.transpose()) * 0.5
    };
    GaussianStats {
        mean,
        cov,
        samples: n,
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), DistributionError> {
    if !m.is_square() {
        return Err(DistributionError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(DistributionError::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues clamped at zero; fails if one is clearly negative.
fn psd_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, DistributionError> {
    check_symmetric(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let mut eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    for lambda in eig.eigenvalues.iter_mut() {
        if *lambda < -EIGEN_TOLERANCE * scale {
            return Err(DistributionError::IndefiniteMatrix(*lambda));
        }
        *lambda = lambda.max(0.0);
    }
    Ok(eig)
}

/// Principal square root `V diag(sqrt(l)) V^T` of a symmetric PSD matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, DistributionError> {
    let eig = psd_eigen(m)?;
    let roots = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrechetResult {
    pub fid: f64,
    /// `|mu1 - mu2|^2`
    pub mean_term: f64,
    /// `Tr(S1 + S2 - 2 (S1 S2)^(1/2))`
    pub trace_term: f64,
    pub regularization_applied: bool,
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

/// Fréchet distance between two Gaussians.
///
/// The cross term uses `Tr sqrt(S1^(1/2) S2 S1^(1/2))`, which equals
/// `Tr sqrt(S1 S2)` and stays symmetric. When either covariance has an
/// eigenvalue below `epsilon`, `epsilon * I` is added to both.
pub fn frechet_distance(
    g1: &GaussianStats,
    g2: &GaussianStats,
    epsilon: f64,
) -> Result<FrechetResult, DistributionError> {
    if g1.dim() != g2.dim() {
        return Err(DistributionError::DimensionMismatch {
            left: g1.dim(),
            right: g2.dim(),
        });
    }
    check_symmetric(&g1.cov)?;
    check_symmetric(&g2.cov)?;
    let d = g1.dim();

    let diff = &g1.mean - &g2.mean;
    let mean_term = diff.dot(&diff);

    let mut s1 = g1.cov.clone();
    let mut s2 = g2.cov.clone();
    let regularize = min_eigenvalue(&s1) < epsilon || min_eigenvalue(&s2) < epsilon;
    if regularize {
        let load = DMatrix::<f64>::identity(d, d) * epsilon;
        s1 += &load;
        s2 += &load;
    }

    let root1 = sqrtm_psd(&s1)?;
    let inner = &root1 * &s2 * &root1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = psd_eigen(&inner)?
        .eigenvalues
        .iter()
        .map(|l| l.sqrt())
        .sum();

    let mut trace_term = s1.trace() + s2.trace() - 2.0 * cross;
    let mut fid = mean_term + trace_term;
    if fid < 0.0 {
        let scale = (s1.trace() + s2.trace()).max(1.0);
        if fid < -NEGATIVE_FID_TOLERANCE * scale {
            return Err(DistributionError::NegativeDistance(fid));
        }
        fid = 0.0;
        trace_term = -mean_term;
    }
    Ok(FrechetResult {
        fid,
        mean_term,
        trace_term,
        regularization_applied: regularize,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvcEvaluation {
    pub frechet: FrechetResult,
    pub warnings: Vec<String>,
}

/// Fréchet distance between generated and reference embeddings, with the
/// warnings a caller should surface.
pub fn cvc_evaluate(
    generated: &EmbeddingSet,
    reference: &EmbeddingSet,
    epsilon: f64,
) -> Result<CvcEvaluation, DistributionError> {
    if generated.d() != reference.d() {
        return Err(DistributionError::DimensionMismatch {
            left: generated.d(),
            right: reference.d(),
        });
    }
    let mut warnings = Vec::new();
    for (label, set) in [("generated", generated), ("reference", reference)] {
        if set.n() == 1 {
            warnings.push(format!(
                "{label} embeddings have a single sample; covariance is zero"
            ));
        } else if set.n() < set.d() {
            warnings.push(format!(
                "{label} embeddings have n={} < d={}; covariance is rank-deficient",
                set.n(),
                set.d()
            ));
        }
    }
    let frechet = frechet_distance(&fit_gaussian(generated), &fit_gaussian(reference), epsilon)?;
    if frechet.regularization_applied {
        warnings.push(format!(
            "near-singular covariance; added {epsilon:e}*I to both covariances"
        ));
    }
    Ok(CvcEvaluation { frechet, warnings })
}

pub fn cvc_score(
    generated: &EmbeddingSet,
    reference: &EmbeddingSet,
) -> Result<f64, DistributionError> {
    cvc_evaluate(generated, reference, DEFAULT_EPSILON).map(|r| r.frechet.fid)
}

/// Mean cosine similarity over vector pairs, summed in order.
pub fn mean_cosine_similarity<A, B>(pairs: &[(A, B)]) -> Result<f64, DistributionError>
where
    A: AsRef<[f64]>,
    B: AsRef<[f64]>,
{
    if pairs.is_empty() {
        return Err(DistributionError::EmptyInput);
    }
    let mut total = 0.0;
    for (index, (a, b)) in pairs.iter().enumerate() {
        let (a, b) = (a.as_ref(), b.as_ref());
        if a.len() != b.len() {
            return Err(DistributionError::DimensionMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for (x, y) in a.iter().zip(b) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        if na == 0.0 || nb == 0.0 {
            return Err(DistributionError::ZeroVector { index });
        }
        total += (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_1d(mu: f64, var: f64) -> GaussianStats {
        GaussianStats::new(
            DVector::from_element(1, mu),
            DMatrix::from_element(1, 1, var),
        )
    }

    #[test]
    fn two_point_covariance() {
        let e = EmbeddingSet::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let g = fit_gaussian(&e);
        assert_eq!(g.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(g.cov, DMatrix::from_element(2, 2, 2.0));
    }

    #[test]
    fn identical_rows_zero_cov() {
        let e = EmbeddingSet::from_rows(&vec![vec![1.5, -2.0, 3.0]; 5]).unwrap();
        assert_eq!(fit_gaussian(&e).cov, DMatrix::zeros(3, 3));
        let one = EmbeddingSet::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let g = fit_gaussian(&one);
        assert!(g.single_sample());
        assert_eq!(g.cov, DMatrix::zeros(2, 2));
    }

    #[test]
    fn rejects_bad_embeddings() {
        assert!(matches!(
            EmbeddingSet::from_rows(&[vec![1.0, f64::NAN]]),
            Err(DistributionError::NonFiniteInput { row: 0, col: 1 })
        ));
        assert!(EmbeddingSet::from_rows(&[]).is_err());
        assert!(EmbeddingSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn sqrtm_examples() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert!((sqrtm_psd(&i).unwrap() - &i).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]));
        let s = sqrtm_psd(&d).unwrap();
        assert!((s - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-14);
    }

    #[test]
    fn sqrtm_errors() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            sqrtm_psd(&asym),
            Err(DistributionError::NotSymmetric(_))
        ));
        let indef = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(
            sqrtm_psd(&indef),
            Err(DistributionError::IndefiniteMatrix(_))
        ));
        let tiny_neg = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-12]));
        let s = sqrtm_psd(&tiny_neg).unwrap();
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn identical_gaussians_zero() {
        let g = stats_1d(2.0, 3.0);
        let r = frechet_distance(&g, &g, DEFAULT_EPSILON).unwrap();
        assert!(r.fid <= 1e-6);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let r =
            frechet_distance(&stats_1d(0.0, 1.0), &stats_1d(3.0, 1.0), DEFAULT_EPSILON).unwrap();
        assert!((r.fid - 9.0).abs() < 1e-12);
        assert!(!r.regularization_applied);
        assert_eq!(r.fid, r.mean_term + r.trace_term);
    }

    #[test]
    fn dimension_mismatch() {
        let a = stats_1d(0.0, 1.0);
        let b = GaussianStats::new(DVector::zeros(2), DMatrix::identity(2, 2));
        assert!(matches!(
            frechet_distance(&a, &b, DEFAULT_EPSILON),
            Err(DistributionError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn singular_covariance_regularized() {
        let a = GaussianStats::new(DVector::zeros(2), DMatrix::from_element(2, 2, 1.0));
        let b = GaussianStats::new(DVector::zeros(2), DMatrix::identity(2, 2));
        let r = frechet_distance(&a, &b, DEFAULT_EPSILON).unwrap();
        assert!(r.regularization_applied);
        assert!(r.fid > 0.0);
    }

    #[test]
    fn cosine_examples() {
        let same = vec![(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]); 3];
        assert!((mean_cosine_similarity(&same).unwrap() - 1.0).abs() < 1e-15);
        let orth = vec![
            (vec![1.0, 0.0], vec![0.0, 5.0]),
            (vec![0.0, 2.0], vec![3.0, 0.0]),
        ];
        assert_eq!(mean_cosine_similarity(&orth).unwrap(), 0.0);
        let zero = vec![
            (vec![1.0, 0.0], vec![1.0, 0.0]),
            (vec![0.0, 0.0], vec![1.0, 0.0]),
        ];
        assert!(matches!(
            mean_cosine_similarity(&zero),
            Err(DistributionError::ZeroVector { index: 1 })
        ));
        let empty: Vec<(Vec<f64>, Vec<f64>)> = vec![];
        assert!(matches!(
            mean_cosine_similarity(&empty),
            Err(DistributionError::EmptyInput)
        ));
    }
}
