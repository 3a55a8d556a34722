//! Boundary distance metrics: Hausdorff, Modified Hausdorff (Dubuisson-Jain)
//! and Average Surface Distance, evaluated through an exact Euclidean
//! distance transform of the target contour.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::ContourPointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("{0:?} contour is empty")]
    EmptyContour(Side),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDistances {
    pub hausdorff: f64,
    pub modified_hausdorff: f64,
    pub average_surface_distance: f64,
}

impl SurfaceDistances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            hausdorff: self.hausdorff * factor,
            modified_hausdorff: self.modified_hausdorff * factor,
            average_surface_distance: self.average_surface_distance * factor,
        }
    }
}

/// Exact Euclidean distance to the nearest source point, for every cell.
#[derive(Clone, Debug)]
pub struct DistanceField {
    width: usize,
    height: usize,
    squared: Vec<f64>,
}

impl DistanceField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn squared_at(&self, x: usize, y: usize) -> f64 {
        self.squared[y * self.width + x]
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.squared_at(x, y).sqrt()
    }

    pub fn values(&self) -> Vec<f64> {
        self.squared.iter().map(|v| v.sqrt()).collect()
    }
}

/// Distance field over the contour's own source grid.
pub fn build_distance_field(points: &ContourPointSet) -> Result<DistanceField, SurfaceError> {
    build_distance_field_sized(points, points.source_width(), points.source_height())
}

/// Felzenszwalb-Huttenlocher separable transform on squared distances.
///
/// Squared distances are integers well inside f64's exact range, so the
/// stored values are exact and `sqrt` matches a direct evaluation bit for bit.
fn build_distance_field_sized(
    points: &ContourPointSet,
    width: usize,
    height: usize,
) -> Result<DistanceField, SurfaceError> {
    if points.is_empty() {
        return Err(SurfaceError::EmptyContour(Side::First));
    }
    debug_assert!(width >= points.source_width() && height >= points.source_height());

    // Column pass: vertical distance to the nearest source in the same column.
    let mut source = vec![false; width * height];
    for &(x, y) in points.points() {
        source[y * width + x] = true;
    }
    let mut column = vec![f64::INFINITY; width * height];
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if source[y * width + x] {
                last = Some(y);
            }
            if let Some(ly) = last {
                column[y * width + x] = (y - ly) as f64;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..height).rev() {
            if source[y * width + x] {
                next = Some(y);
            }
            if let Some(ny) = next {
                let d = (ny - y) as f64;
                if d < column[y * width + x] {
                    column[y * width + x] = d;
                }
            }
        }
    }

    // Row pass: lower envelope of parabolas g(q)^2 + (x - q)^2 over finite q.
    let mut squared = vec![0.0; width * height];
    let mut vertices: Vec<usize> = Vec::with_capacity(width);
    let mut bounds: Vec<f64> = Vec::with_capacity(width + 1);
    for y in 0..height {
        let row = &column[y * width..(y + 1) * width];
        let f = |q: usize| row[q] * row[q];
        vertices.clear();
        bounds.clear();
        for q in (0..width).filter(|&q| row[q].is_finite()) {
            loop {
                match vertices.last() {
                    None => {
                        vertices.push(q);
                        bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&v) => {
                        let (qf, vf) = (q as f64, v as f64);
                        let s = ((f(q) + qf * qf) - (f(v) + vf * vf)) / (2.0 * (qf - vf));
                        if s <= *bounds.last().unwrap() {
                            vertices.pop();
                            bounds.pop();
                        } else {
                            vertices.push(q);
                            bounds.push(s);
                            break;
                        }
                    }
                }
            }
        }
        let mut k = 0;
        for x in 0..width {
            let xf = x as f64;
            while k + 1 < vertices.len() && bounds[k + 1] < xf {
                k += 1;
            }
            let v = vertices[k];
            let dx = xf - v as f64;
            squared[y * width + x] = dx * dx + f(v);
        }
    }

    Ok(DistanceField {
        width,
        height,
        squared,
    })
}

/// Per-point nearest distances from every point of `from` to `field`'s source.
fn nearest_distances<'a>(
    from: &'a ContourPointSet,
    field: &'a DistanceField,
) -> impl Iterator<Item = f64> + 'a {
    from.points().iter().map(move |&(x, y)| field.at(x, y))
}

fn shared_field(a: &ContourPointSet, b: &ContourPointSet) -> Result<DistanceField, SurfaceError> {
    let width = a.source_width().max(b.source_width());
    let height = a.source_height().max(b.source_height());
    build_distance_field_sized(b, width, height)
}

fn check_nonempty(a: &ContourPointSet, b: &ContourPointSet) -> Result<(), SurfaceError> {
    if a.is_empty() {
        return Err(SurfaceError::EmptyContour(Side::First));
    }
    if b.is_empty() {
        return Err(SurfaceError::EmptyContour(Side::Second));
    }
    Ok(())
}

/// Directed Hausdorff distance `max_{p in a} min_{q in b} |p - q|`.
pub fn directed_max_distance(
    a: &ContourPointSet,
    b: &ContourPointSet,
) -> Result<f64, SurfaceError> {
    check_nonempty(a, b)?;
    let field = shared_field(a, b)?;
    Ok(nearest_distances(a, &field).fold(0.0, f64::max))
}

/// Mean over `a` of the distance to the nearest point of `b`.
pub fn directed_mean_distance(
    a: &ContourPointSet,
    b: &ContourPointSet,
) -> Result<f64, SurfaceError> {
    check_nonempty(a, b)?;
    let field = shared_field(a, b)?;
    let sum: f64 = nearest_distances(a, &field).fold(0.0, |acc, d| acc + d);
    Ok(sum / a.len() as f64)
}

struct Directed {
    max: f64,
    sum: f64,
    count: usize,
}

fn directed(from: &ContourPointSet, field: &DistanceField) -> Directed {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for d in nearest_distances(from, field) {
        max = max.max(d);
        sum += d;
    }
    Directed {
        max,
        sum,
        count: from.len(),
    }
}

pub fn surface_distances(
    a: &ContourPointSet,
    b: &ContourPointSet,
) -> Result<SurfaceDistances, SurfaceError> {
    check_nonempty(a, b)?;
    let to_b = shared_field(a, b)?;
    let to_a = shared_field(b, a)?;
    let ab = directed(a, &to_b);
    let ba = directed(b, &to_a);
    Ok(SurfaceDistances {
        hausdorff: ab.max.max(ba.max),
        modified_hausdorff: (ab.sum / ab.count as f64).max(ba.sum / ba.count as f64),
        average_surface_distance: (ab.sum + ba.sum) / (ab.count + ba.count) as f64,
    })
}
