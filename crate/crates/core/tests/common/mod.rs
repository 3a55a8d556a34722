//! Independent reference implementations and random input generators shared
//! by the integration and acceptance suites. Nothing here calls into the
//! metric code paths it is used to check.

#![allow(dead_code)]

use narrative_eval::mask::{BinaryMask, ContourPointSet};
use rand::Rng;
use serde::Deserialize;

pub const REFERENCE_SCORES: &str = include_str!("../fixtures/reference_scores.json");

#[derive(Clone, Debug, Deserialize)]
pub struct ReferenceRow {
    pub table: String,
    pub model: String,
    pub cn: f64,
    pub sr: f64,
    pub la: f64,
    pub bdp: f64,
    pub mc: f64,
    pub ads: f64,
    pub overall: f64,
}

pub fn reference_rows() -> Vec<ReferenceRow> {
    serde_json::from_str(REFERENCE_SCORES).expect("fixture parses")
}

/// Union of random rectangles and ellipses, never empty.
pub fn random_mask<R: Rng>(rng: &mut R, max_side: usize) -> BinaryMask {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    random_mask_sized(rng, w, h)
}

pub fn random_mask_sized<R: Rng>(rng: &mut R, w: usize, h: usize) -> BinaryMask {
    let mut data = vec![false; w * h];
    for _ in 0..rng.random_range(1..=3) {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(0.0..h as f64);
        let rx = rng.random_range(0.5..=(w as f64 / 2.0).max(0.5));
        let ry = rng.random_range(0.5..=(h as f64 / 2.0).max(0.5));
        let ellipse = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 - cx) / rx;
                let dy = (y as f64 - cy) / ry;
                let inside = if ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                data[y * w + x] |= inside;
            }
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let i = rng.random_range(0..w * h);
        data[i] = true;
    }
    if !data.iter().any(|&v| v) {
        let i = rng.random_range(0..w * h);
        data[i] = true;
    }
    BinaryMask::new(w, h, data).unwrap()
}

pub fn random_points<R: Rng>(rng: &mut R, count: usize, w: usize, h: usize) -> ContourPointSet {
    let pts = (0..count)
        .map(|_| (rng.random_range(0..w), rng.random_range(0..h)))
        .collect();
    ContourPointSet::new(pts, w, h).unwrap()
}

/// Boundary pixels by direct neighbor inspection.
pub fn contour_oracle(m: &BinaryMask) -> Vec<(usize, usize)> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let fg = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && m.get(x as usize, y as usize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if fg(x, y) && !(fg(x - 1, y) && fg(x + 1, y) && fg(x, y - 1) && fg(x, y + 1)) {
                out.push((x as usize, y as usize));
            }
        }
    }
    out
}

fn dist(p: (usize, usize), q: (usize, usize)) -> f64 {
    let dx = p.0 as f64 - q.0 as f64;
    let dy = p.1 as f64 - q.1 as f64;
    (dx * dx + dy * dy).sqrt()
}

pub fn nearest(p: (usize, usize), set: &[(usize, usize)]) -> f64 {
    let mut best = f64::INFINITY;
    for &q in set {
        let d = dist(p, q);
        if d < best {
            best = d;
        }
    }
    best
}

pub struct BruteSurface {
    pub hausdorff: f64,
    pub modified_hausdorff: f64,
    pub asd: f64,
}

/// O(|a| |b|) double loop.
pub fn surface_oracle(a: &[(usize, usize)], b: &[(usize, usize)]) -> BruteSurface {
    let ab: Vec<f64> = a.iter().map(|&p| nearest(p, b)).collect();
    let ba: Vec<f64> = b.iter().map(|&q| nearest(q, a)).collect();
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    BruteSurface {
        hausdorff: max(&ab).max(max(&ba)),
        modified_hausdorff: (sum(&ab) / ab.len() as f64).max(sum(&ba) / ba.len() as f64),
        asd: (sum(&ab) + sum(&ba)) / (ab.len() + ba.len()) as f64,
    }
}

/// Per-cell nearest distance by exhaustive search.
pub fn distance_field_oracle(points: &[(usize, usize)], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(nearest((x, y), points));
        }
    }
    out
}

/// (dice, iou) by scalar counting; both-empty scores as 1.
pub fn overlap_oracle(a: &BinaryMask, b: &BinaryMask) -> (f64, f64) {
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (pa, pb) = (a.get(x, y), b.get(x, y));
            na += pa as usize;
            nb += pb as usize;
            inter += (pa && pb) as usize;
        }
    }
    let union = na + nb - inter;
    if union == 0 {
        (1.0, 1.0)
    } else {
        (
            2.0 * inter as f64 / (na + nb) as f64,
            inter as f64 / union as f64,
        )
    }
}

/// Two-pass mean and unbiased covariance.
pub fn covariance_oracle(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    (mean, cov)
}

/// Fréchet distance for 2-D Gaussians from the eigenvalues of the
/// non-symmetric product `S1 S2`: `Tr sqrt(S1 S2) = sqrt(l1) + sqrt(l2)
/// = sqrt(tr + 2 sqrt(det))`.
pub fn frechet_2d_oracle(m1: [f64; 2], s1: [[f64; 2]; 2], m2: [f64; 2], s2: [[f64; 2]; 2]) -> f64 {
    let p = [
        [
            s1[0][0] * s2[0][0] + s1[0][1] * s2[1][0],
            s1[0][0] * s2[0][1] + s1[0][1] * s2[1][1],
        ],
        [
            s1[1][0] * s2[0][0] + s1[1][1] * s2[1][0],
            s1[1][0] * s2[0][1] + s1[1][1] * s2[1][1],
        ],
    ];
    let tr = p[0][0] + p[1][1];
    let det = p[0][0] * p[1][1] - p[0][1] * p[1][0];
    let cross = (tr + 2.0 * det.max(0.0).sqrt()).sqrt();
    let mean = (m1[0] - m2[0]).powi(2) + (m1[1] - m2[1]).powi(2);
    mean + s1[0][0] + s1[1][1] + s2[0][0] + s2[1][1] - 2.0 * cross
}

/// Random SPD 2x2 matrix with eigenvalues well above any regularization
/// threshold.
pub fn random_spd2<R: Rng>(rng: &mut R) -> [[f64; 2]; 2] {
    let a = [
        [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
        [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
    ];
    let mut s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = a[0][i] * a[0][j] + a[1][i] * a[1][j];
        }
        s[i][i] += 0.1;
    }
    s
}

/// Naive triple loop over characters, words and pixels.
pub fn attention_loss_oracle(
    values: &[f64],
    words: usize,
    characters: &[(Vec<usize>, Vec<bool>)],
    lambda: f64,
) -> f64 {
    let pixels = values.len() / words;
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (cw, target) in characters {
        for &w in cw {
            for p in 0..pixels {
                let v = values[p * words + w];
                if target[p] {
                    inside += v;
                } else {
                    outside += v;
                }
            }
        }
    }
    inside + lambda * outside
}

/// Writes `count` random mask pairs and two random embedding sets into
/// `dir`, plus a manifest referencing them by relative path. Returns the
/// manifest path.
pub fn write_random_manifest(dir: &std::path::Path, seed: u64, count: usize) -> std::path::PathBuf {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for i in 0..count {
        let (w, h) = (rng.random_range(8..=64), rng.random_range(8..=64));
        let gen_name = format!("gen_{i}.png");
        let ref_name = format!("ref_{i}.png");
        std::fs::write(
            dir.join(&gen_name),
            random_mask_sized(&mut rng, w, h).to_png(),
        )
        .unwrap();
        std::fs::write(
            dir.join(&ref_name),
            random_mask_sized(&mut rng, w, h).to_png(),
        )
        .unwrap();
        pairs.push(serde_json::json!({
            "id": format!("p{i:03}"),
            "generated_mask": gen_name,
            "reference_mask": ref_name,
        }));
    }
    for name in ["gen.csv", "ref.csv"] {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        write_embedding_csv(&dir.join(name), &rows);
    }
    let manifest = serde_json::json!({
        "model_name": "random",
        "cvc": {"generated_embeddings": "gen.csv", "reference_embeddings": "ref.csv"},
        "pairs": pairs,
    });
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    path
}

pub fn write_embedding_csv(path: &std::path::Path, rows: &[Vec<f64>]) {
    let text: String = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(",")
                + "\n"
        })
        .collect();
    std::fs::write(path, text).unwrap();
}
