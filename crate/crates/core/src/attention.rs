//! Mask cross-attention arithmetic on dense pixel-by-word maps: the region
//! loss that rewards attention inside each character's mask, and the
//! constant target map built by addition and multiplication only.

use thiserror::Error;

use crate::mask::BinaryMask;

/// Balancing weight on the out-of-region term used in training.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum AttentionError {
    #[error("{axis} index {index} out of range 0..{len}")]
    IndexOutOfRange {
        axis: &'static str,
        index: usize,
        len: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(
        "attention values must be finite and non-negative, found {value} at ({pixel}, {word})"
    )]
    InvalidValue {
        pixel: usize,
        word: usize,
        value: f64,
    },
    #[error("base map must be all zeros")]
    NonZeroBase,
    #[error("word count must be at least 1")]
    ZeroWordCount,
    #[error("balancing weight must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
}

/// Pixel-by-word attention values, stored row-major (`pixels` rows).
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMap {
    pixels: usize,
    words: usize,
    values: Vec<f64>,
}

impl AttentionMap {
    pub fn new(pixels: usize, words: usize, values: Vec<f64>) -> Result<Self, AttentionError> {
        if pixels == 0 || words == 0 || values.len() != pixels * words {
            return Err(AttentionError::ShapeMismatch(format!(
                "{} values for a {pixels}x{words} map",
                values.len()
            )));
        }
        for (i, &value) in values.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(AttentionError::InvalidValue {
                    pixel: i / words,
                    word: i % words,
                    value,
                });
            }
        }
        Ok(Self {
            pixels,
            words,
            values,
        })
    }

    pub fn zeros(pixels: usize, words: usize) -> Result<Self, AttentionError> {
        Self::new(pixels, words, vec![0.0; pixels * words])
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, pixel: usize, word: usize) -> f64 {
        self.values[pixel * self.words + word]
    }

    /// Total attention a word receives across all pixels.
    pub fn word_mass(&self, word: usize) -> f64 {
        (0..self.pixels).map(|p| self.get(p, word)).sum()
    }
}

/// One character: its prompt word indices and its target pixel region.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacterRegion {
    words: Vec<usize>,
    target: Vec<bool>,
}

impl CharacterRegion {
    /// `target_pixels` index the flattened pixel axis of a map with
    /// `pixel_count` pixels.
    pub fn new(
        words: impl IntoIterator<Item = usize>,
        target_pixels: impl IntoIterator<Item = usize>,
        pixel_count: usize,
    ) -> Result<Self, AttentionError> {
        let mut target = vec![false; pixel_count];
        for p in target_pixels {
            if p >= pixel_count {
                return Err(AttentionError::IndexOutOfRange {
                    axis: "pixel",
                    index: p,
                    len: pixel_count,
                });
            }
            target[p] = true;
        }
        let mut words: Vec<usize> = words.into_iter().collect();
        words.sort_unstable();
        words.dedup();
        Ok(Self { words, target })
    }

    /// Target region from a mask flattened row-major.
    pub fn from_mask(words: impl IntoIterator<Item = usize>, mask: &BinaryMask) -> Self {
        let mut words: Vec<usize> = words.into_iter().collect();
        words.sort_unstable();
        words.dedup();
        Self {
            words,
            target: mask.data().to_vec(),
        }
    }

    pub fn words(&self) -> &[usize] {
        &self.words
    }

    pub fn in_target(&self, pixel: usize) -> bool {
        self.target[pixel]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionSpec {
    pub characters: Vec<CharacterRegion>,
}

impl RegionSpec {
    pub fn new(characters: Vec<CharacterRegion>) -> Self {
        Self { characters }
    }

    fn validate(&self, map: &AttentionMap) -> Result<(), AttentionError> {
        for c in &self.characters {
            if c.target.len() != map.pixels {
                return Err(AttentionError::IndexOutOfRange {
                    axis: "pixel",
                    index: c.target.len().saturating_sub(1),
                    len: map.pixels,
                });
            }
            if let Some(&w) = c.words.iter().find(|&&w| w >= map.words) {
                return Err(AttentionError::IndexOutOfRange {
                    axis: "word",
                    index: w,
                    len: map.words,
                });
            }
        }
        Ok(())
    }
}

/// Attention inside each character's region plus `lambda` times attention
/// outside it, over that character's words.
///
/// Overlapping characters contribute independently. Sums run in character,
/// word, pixel index order.
pub fn mask_attention_loss(
    map: &AttentionMap,
    regions: &RegionSpec,
    lambda: f64,
) -> Result<f64, AttentionError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(AttentionError::InvalidLambda(lambda));
    }
    regions.validate(map)?;
    let mut inside = 0.0;
    let mut outside = 0.0;
    for c in &regions.characters {
        for &w in &c.words {
            for p in 0..map.pixels {
                if c.target[p] {
                    inside += map.get(p, w);
                }
            }
        }
    }
    for c in &regions.characters {
        for &w in &c.words {
            for p in 0..map.pixels {
                if !c.target[p] {
                    outside += map.get(p, w);
                }
            }
        }
    }
    Ok(inside + lambda * outside)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstantMapParams {
    /// Number of words in the prompt.
    pub word_count_sum: usize,
    pub mask: BinaryMask,
}

/// `zero_base + mask x (1 / word_count_sum)` over the selected words.
pub fn build_constant_map(
    zero_base: &AttentionMap,
    params: &ConstantMapParams,
    word_indices: &[usize],
) -> Result<AttentionMap, AttentionError> {
    let mask: Vec<f64> = params
        .mask
        .data()
        .iter()
        .map(|&v| if v { 1.0 } else { 0.0 })
        .collect();
    build_constant_map_relaxed(zero_base, params.word_count_sum, &mask, word_indices)
}

/// Same construction with a real-valued mask in `[0, 1]`, so the result is
/// linear in the mask values.
pub fn build_constant_map_relaxed(
    zero_base: &AttentionMap,
    word_count_sum: usize,
    mask: &[f64],
    word_indices: &[usize],
) -> Result<AttentionMap, AttentionError> {
    if word_count_sum == 0 {
        return Err(AttentionError::ZeroWordCount);
    }
    if mask.len() != zero_base.pixels {
        return Err(AttentionError::ShapeMismatch(format!(
            "mask has {} pixels, map has {}",
            mask.len(),
            zero_base.pixels
        )));
    }
    if let Some(p) = mask.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(AttentionError::InvalidValue {
            pixel: p,
            word: 0,
            value: mask[p],
        });
    }
    if zero_base.values.iter().any(|&v| v != 0.0) {
        return Err(AttentionError::NonZeroBase);
    }
    let mut selected = vec![0.0; zero_base.words];
    for &w in word_indices {
        if w >= zero_base.words {
            return Err(AttentionError::IndexOutOfRange {
                axis: "word",
                index: w,
                len: zero_base.words,
            });
        }
        selected[w] = 1.0;
    }

    let scale = 1.0 / word_count_sum as f64;
    let words = zero_base.words;
    let values = zero_base
        .values
        .iter()
        .enumerate()
        .map(|(i, &z)| z + mask[i / words] * selected[i % words] * scale)
        .collect();
    Ok(AttentionMap {
        pixels: zero_base.pixels,
        words,
        values,
    })
}
