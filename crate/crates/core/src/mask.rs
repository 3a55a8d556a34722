//! Binary character masks: PNG loading, boundary extraction and overlap
//! scores (Dice, IoU and their dataset means).

use std::io::Cursor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Luminance strictly above this value is foreground.
pub const FOREGROUND_THRESHOLD: u8 = 127;

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("failed to decode PNG: {0}")]
    Decode(String),
    #[error("unsupported PNG color type {0}")]
    UnsupportedFormat(String),
    #[error("invalid mask shape: {0}")]
    InvalidShape(String),
    #[error("mask dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },
    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<MaskError>,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("point ({x}, {y}) outside {width}x{height} grid")]
    PointOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },
}

/// A row-major boolean foreground grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::InvalidShape(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(MaskError::InvalidShape(format!(
                "expected {} cells for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, MaskError> {
        Self::new(width, height, vec![false; width * height])
    }

    /// Builds a mask from a predicate over `(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, MaskError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.width != other.width || self.height != other.height {
            return Err(MaskError::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }

    /// Encodes as an 8-bit grayscale PNG with foreground 255 and background 0.
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder
                .write_header()
                .expect("writing to a Vec cannot fail");
            let pixels: Vec<u8> = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
            writer
                .write_image_data(&pixels)
                .expect("pixel buffer matches header");
        }
        out
    }
}

/// An 8-bit luminance image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LumaImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl LumaImage {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Decodes a PNG into 8-bit luminance.
///
/// Color images use the integer mean of R, G and B; 16-bit samples are
/// reduced to their high byte. Alpha is ignored. Palette images are rejected.
pub fn load_luma(png_bytes: &[u8]) -> Result<LumaImage, MaskError> {
    let mut decoder = png::Decoder::new(Cursor::new(png_bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| MaskError::Decode(e.to_string()))?;
    let info = reader.info();
    let (color, depth) = (info.color_type, info.bit_depth);
    let (width, height) = (info.width as usize, info.height as usize);

    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(MaskError::UnsupportedFormat("indexed (palette)".into()))
        }
    };
    let bytes_per_sample = match depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => {
            return Err(MaskError::UnsupportedFormat(format!(
                "{color:?} at bit depth {other:?}"
            )))
        }
    };

    let size = reader
        .output_buffer_size()
        .ok_or_else(|| MaskError::Decode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| MaskError::Decode(e.to_string()))?;
    let stride = frame.line_size;

    // 16-bit samples are big-endian; the first byte is the 8-bit scaled value
    let sample = |row: &[u8], idx: usize| row[idx * bytes_per_sample] as u32;

    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &buf[y * stride..(y + 1) * stride];
        for x in 0..width {
            let base = x * channels;
            let luma = if channels >= 3 {
                (sample(row, base) + sample(row, base + 1) + sample(row, base + 2)) / 3
            } else {
                sample(row, base)
            };
            pixels.push(luma as u8);
        }
    }
    Ok(LumaImage {
        width,
        height,
        pixels,
    })
}

/// Decodes a PNG and marks pixels with luminance above
/// [`FOREGROUND_THRESHOLD`] as foreground.
pub fn load_mask(png_bytes: &[u8]) -> Result<BinaryMask, MaskError> {
    let img = load_luma(png_bytes)?;
    let data = img
        .pixels
        .iter()
        .map(|&v| v > FOREGROUND_THRESHOLD)
        .collect();
    BinaryMask::new(img.width, img.height, data)
}

/// Integer pixel coordinates of a mask boundary, kept in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContourPointSet {
    points: Vec<(usize, usize)>,
    source_width: usize,
    source_height: usize,
}

impl ContourPointSet {
    /// Builds a point set on a `width`x`height` grid. Points are sorted
    /// row-major and deduplicated.
    pub fn new(
        mut points: Vec<(usize, usize)>,
        source_width: usize,
        source_height: usize,
    ) -> Result<Self, MaskError> {
        if source_width == 0 || source_height == 0 {
            return Err(MaskError::InvalidShape(format!(
                "dimensions must be positive, got {source_width}x{source_height}"
            )));
        }
        if let Some(&(x, y)) = points
            .iter()
            .find(|&&(x, y)| x >= source_width || y >= source_height)
        {
            return Err(MaskError::PointOutOfBounds {
                x,
                y,
                width: source_width,
                height: source_height,
            });
        }
        points.sort_unstable_by_key(|&(x, y)| (y, x));
        points.dedup();
        Ok(Self {
            points,
            source_width,
            source_height,
        })
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }

    /// Same points shifted by a non-negative offset on an enlarged grid.
    pub fn translated(&self, dx: usize, dy: usize) -> Self {
        Self {
            points: self.points.iter().map(|&(x, y)| (x + dx, y + dy)).collect(),
            source_width: self.source_width + dx,
            source_height: self.source_height + dy,
        }
    }
}

/// Foreground pixels with at least one 4-neighbor that is background or
/// outside the image.
pub fn extract_contour(mask: &BinaryMask) -> ContourPointSet {
    let (w, h) = (mask.width, mask.height);
    let mut points = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let interior = x > 0
                && y > 0
                && x + 1 < w
                && y + 1 < h
                && mask.get(x - 1, y)
                && mask.get(x + 1, y)
                && mask.get(x, y - 1)
                && mask.get(x, y + 1);
            if !interior {
                points.push((x, y));
            }
        }
    }
    ContourPointSet {
        points,
        source_width: w,
        source_height: h,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapResult {
    pub intersection: usize,
    pub union: usize,
    pub size_a: usize,
    pub size_b: usize,
    pub dice: f64,
    pub iou: f64,
}

impl OverlapResult {
    /// Both masks empty; scored as perfect agreement.
    pub fn both_empty(&self) -> bool {
        self.union == 0
    }
}

pub fn overlap(a: &BinaryMask, b: &BinaryMask) -> Result<OverlapResult, MaskError> {
    a.same_shape(b)?;
    let mut intersection = 0;
    let mut size_a = 0;
    let mut size_b = 0;
    for (&pa, &pb) in a.data.iter().zip(&b.data) {
        size_a += pa as usize;
        size_b += pb as usize;
        intersection += (pa && pb) as usize;
    }
    let union = size_a + size_b - intersection;
    let (dice, iou) = if union == 0 {
        (1.0, 1.0)
    } else {
        (
            2.0 * intersection as f64 / (size_a + size_b) as f64,
            intersection as f64 / union as f64,
        )
    };
    Ok(OverlapResult {
        intersection,
        union,
        size_a,
        size_b,
        dice,
        iou,
    })
}

/// Per-pair mean of Dice and IoU, summed left to right.
pub fn mean_overlap(pairs: &[(BinaryMask, BinaryMask)]) -> Result<(f64, f64), MaskError> {
    if pairs.is_empty() {
        return Err(MaskError::EmptyInput);
    }
    let mut dice_sum = 0.0;
    let mut iou_sum = 0.0;
    for (index, (a, b)) in pairs.iter().enumerate() {
        let r = overlap(a, b).map_err(|e| MaskError::Pair {
            index,
            source: Box::new(e),
        })?;
        dice_sum += r.dice;
        iou_sum += r.iou;
    }
    let n = pairs.len() as f64;
    Ok((dice_sum / n, iou_sum / n))
}
