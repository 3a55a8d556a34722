//! Embedding file formats and a deterministic pixel embedder for tests.
//!
//! Two on-disk formats are accepted:
//!
//! * CSV, one row per sample. A first line that does not parse as numbers
//!   is treated as a header.
//! * Binary: the magic `EMB1`, then `n` and `d` as little-endian `u32`,
//!   then `n * d` little-endian `f32` values in row-major order. The file
//!   length must match exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::distribution::{DistributionError, EmbeddingSet};
use crate::mask::{BinaryMask, LumaImage};

pub const BINARY_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

/// Side length of the naive embedder's output grid; `d = 64`.
pub const NAIVE_GRID: usize = 8;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Invalid(#[from] DistributionError),
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet, EmbeddingError> {
    let bytes = fs::read(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_embeddings(&bytes)
}

/// Detects the format from the leading bytes.
pub fn parse_embeddings(bytes: &[u8]) -> Result<EmbeddingSet, EmbeddingError> {
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(bytes)
    } else {
        parse_csv(bytes)
    }
}

pub fn parse_binary(bytes: &[u8]) -> Result<EmbeddingSet, EmbeddingError> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != BINARY_MAGIC {
        return Err(EmbeddingError::Format("missing EMB1 header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| EmbeddingError::Format(format!("n={n}, d={d} overflows")))?;
    if bytes.len() != expected {
        return Err(EmbeddingError::Format(format!(
            "expected {expected} bytes for n={n}, d={d}, found {}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(EmbeddingSet::from_row_major(n, d, &values)?)
}

pub fn parse_csv(bytes: &[u8]) -> Result<EmbeddingSet, EmbeddingError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EmbeddingError::Format(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(EmbeddingError::Format(format!("line {}: {e}", line + 1)));
            }
        }
    }
    Ok(EmbeddingSet::from_rows(&rows)?)
}

pub fn encode_binary(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + set.n() * set.d() * 4);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(set.n() as u32).to_le_bytes());
    out.extend_from_slice(&(set.d() as u32).to_le_bytes());
    for i in 0..set.n() {
        for j in 0..set.d() {
            out.extend_from_slice(&(set.matrix()[(i, j)] as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_csv<W: Write>(set: &EmbeddingSet, out: W) -> Result<(), EmbeddingError> {
    let mut writer = csv::Writer::from_writer(out);
    for i in 0..set.n() {
        writer
            .write_record(set.row(i).iter().map(|v| format!("{v:?}")))
            .map_err(|e| EmbeddingError::Format(e.to_string()))?;
    }
    writer.flush().map_err(|source| EmbeddingError::Io {
        path: "<csv writer>".into(),
        source,
    })
}

/// Embeds a masked character crop as 64 grayscale intensities.
///
/// The image is cropped to the mask's bounding box, background pixels are
/// zeroed, and the crop is bilinearly resampled to 8x8 with values in
/// `[0, 1]`. Only meant for hermetic pipeline tests: the output is not
/// comparable to learned features. Returns `None` for an empty mask.
pub fn naive_embed(image: &LumaImage, mask: &BinaryMask) -> Option<Vec<f64>> {
    assert_eq!(
        (image.width, image.height),
        (mask.width(), mask.height()),
        "image and mask sizes differ"
    );
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == usize::MAX {
        return None;
    }
    let (cw, ch) = (x1 - x0 + 1, y1 - y0 + 1);
    let px = |x: usize, y: usize| -> f64 {
        let (ix, iy) = (x0 + x, y0 + y);
        if mask.get(ix, iy) {
            image.get(ix, iy) as f64 / 255.0
        } else {
            0.0
        }
    };

    let mut out = Vec::with_capacity(NAIVE_GRID * NAIVE_GRID);
    for gy in 0..NAIVE_GRID {
        let sy =
            ((gy as f64 + 0.5) * ch as f64 / NAIVE_GRID as f64 - 0.5).clamp(0.0, (ch - 1) as f64);
        let (ya, ty) = (sy.floor() as usize, sy.fract());
        let yb = (ya + 1).min(ch - 1);
        for gx in 0..NAIVE_GRID {
            let sx = ((gx as f64 + 0.5) * cw as f64 / NAIVE_GRID as f64 - 0.5)
                .clamp(0.0, (cw - 1) as f64);
            let (xa, tx) = (sx.floor() as usize, sx.fract());
            let xb = (xa + 1).min(cw - 1);
            let top = px(xa, ya) * (1.0 - tx) + px(xb, ya) * tx;
            let bottom = px(xa, yb) * (1.0 - tx) + px(xb, yb) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    Some(out)
}
