//! Bit-packed binary masks.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: u32, height: u32 },
    #[error("expected {expected} pixels for the given dimensions, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// A `width x height` bitmap, one bit per pixel, rows stored top to bottom.
///
/// Each row occupies a whole number of 64-bit words; pixel `x` lives in word
/// `x / 64` at bit `x % 64`. Bits past `width` in the last word of a row are
/// always zero, so derived equality and popcounts are exact.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::ZeroDimension { width, height });
        }
        let words_per_row = (width as usize).div_ceil(64);
        Ok(Self {
            width,
            height,
            words_per_row,
            words: vec![0; words_per_row * height as usize],
        })
    }

    /// Builds a mask from row-major booleans.
    pub fn from_bools(width: u32, height: u32, bits: &[bool]) -> Result<Self, MaskError> {
        let mut mask = Self::new(width, height)?;
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(MaskError::LengthMismatch {
                expected,
                got: bits.len(),
            });
        }
        for (i, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            mask.set(i as u32 % width, i as u32 / width, true);
        }
        Ok(mask)
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, MaskError> {
        let mut mask = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    mask.set(x, y, true);
                }
            }
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// # Panics
    ///
    /// If `(x, y)` is outside the mask.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let word = self.words[y as usize * self.words_per_row + x as usize / 64];
        word >> (x % 64) & 1 == 1
    }

    /// # Panics
    ///
    /// If `(x, y)` is outside the mask.
    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        let word = &mut self.words[y as usize * self.words_per_row + x as usize / 64];
        let bit = 1u64 << (x % 64);
        if value {
            *word |= bit;
        } else {
            *word &= !bit;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn row_words(&self, y: u32) -> &[u64] {
        let start = y as usize * self.words_per_row;
        &self.words[start..start + self.words_per_row]
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    /// Mask for the valid bits of the last word in each row.
    pub(crate) fn tail_mask(&self) -> u64 {
        match self.width % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// In-place union. Dimensions must match.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.dimensions() != other.dimensions() {
            return Err(MaskError::LengthMismatch {
                expected: self.pixel_count() as usize,
                got: other.pixel_count() as usize,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// Row-major booleans, one per pixel.
    pub fn to_bools(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.pixel_count() as usize);
        for y in 0..self.height {
            out.extend((0..self.width).map(|x| self.get(x, y)));
        }
        out
    }

    /// Coordinates of set pixels in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.height).flat_map(move |y| {
            self.row_words(y)
                .iter()
                .enumerate()
                .flat_map(move |(wi, &word)| {
                    let mut w = word;
                    std::iter::from_fn(move || {
                        if w == 0 {
                            return None;
                        }
                        let bit = w.trailing_zeros();
                        w &= w - 1;
                        Some((wi as u32 * 64 + bit, y))
                    })
                })
        })
    }
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("ones", &self.count_ones())
            .finish()
    }
}
