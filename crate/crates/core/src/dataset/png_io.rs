//! Masks as 8-bit grayscale PNG files with values {0, 255}.
//!
//! Reading accepts grayscale at any bit depth and paletted images whose
//! palette entries are all gray; a sample counts as stem when its 8-bit
//! gray value is at least 128. Color images are refused rather than reduced
//! to one channel.

use std::io::Cursor;

use png::{BitDepth, ColorType, Transformations};
use thiserror::Error;

use crate::mask::{BinaryMask, MaskError};

/// Gray values at or above this are stem.
pub const STEM_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum PngError {
    #[error("not a readable PNG: {0}")]
    Format(#[from] png::DecodingError),
    #[error("{0:?} PNG masks are not supported; convert the mask to 8-bit grayscale (values 0 and 255) first")]
    UnsupportedColor(ColorType),
    #[error("paletted PNG has a non-gray palette entry {index} = ({r}, {g}, {b}); convert the mask to grayscale first")]
    ColorPalette { index: usize, r: u8, g: u8, b: u8 },
    #[error("paletted PNG has no palette")]
    MissingPalette,
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("PNG encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
}

fn sample(row: &[u8], x: usize, depth: BitDepth) -> u16 {
    match depth {
        BitDepth::Sixteen => u16::from_be_bytes([row[2 * x], row[2 * x + 1]]),
        BitDepth::Eight => row[x] as u16,
        d => {
            let bits = d as usize;
            let per_byte = 8 / bits;
            let byte = row[x / per_byte];
            let shift = 8 - bits * (x % per_byte + 1);
            ((byte >> shift) & ((1u8 << bits) - 1)) as u16
        }
    }
}

fn gray_to_u8(value: u16, depth: BitDepth) -> u8 {
    match depth {
        BitDepth::Sixteen => (value >> 8) as u8,
        BitDepth::Eight => value as u8,
        d => {
            let max = (1u32 << d as u32) - 1;
            (value as u32 * 255 / max) as u8
        }
    }
}

pub fn read_mask_png(bytes: &[u8]) -> Result<BinaryMask, PngError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let info = reader.info();
    let (width, height, depth, color) = (info.width, info.height, info.bit_depth, info.color_type);

    // Stem decision per raw sample value.
    let lookup: Option<Vec<bool>> = match color {
        ColorType::Grayscale => None,
        ColorType::Indexed => {
            let palette = info.palette.as_deref().ok_or(PngError::MissingPalette)?;
            let table = palette
                .chunks_exact(3)
                .enumerate()
                .map(|(index, rgb)| {
                    if rgb[0] == rgb[1] && rgb[1] == rgb[2] {
                        Ok(rgb[0] >= STEM_THRESHOLD)
                    } else {
                        Err(PngError::ColorPalette {
                            index,
                            r: rgb[0],
                            g: rgb[1],
                            b: rgb[2],
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(table)
        }
        other => return Err(PngError::UnsupportedColor(other)),
    };

    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader.next_frame(&mut buf)?;
    let mut mask = BinaryMask::new(width, height)?;
    for (y, row) in buf.chunks(frame.line_size).take(height as usize).enumerate() {
        for x in 0..width as usize {
            let v = sample(row, x, depth);
            let stem = match &lookup {
                None => gray_to_u8(v, depth) >= STEM_THRESHOLD,
                Some(table) => table.get(v as usize).copied().unwrap_or(false),
            };
            if stem {
                mask.set(x as u32, y as u32, true);
            }
        }
    }
    Ok(mask)
}

/// 8-bit grayscale, values {0, 255}, no ancillary chunks. Output is a pure
/// function of the mask bits.
pub fn write_mask_png(mask: &BinaryMask) -> Result<Vec<u8>, PngError> {
    let (width, height) = mask.dimensions();
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width, height);
        encoder.set_color(ColorType::Grayscale);
        encoder.set_depth(BitDepth::Eight);
        encoder.set_compression(png::Compression::Fast);
        let mut writer = encoder.write_header()?;
        let mut stream = writer.stream_writer()?;
        let mut row = vec![0u8; width as usize];
        for y in 0..height {
            row.fill(0);
            for (wi, &word) in mask.row_words(y).iter().enumerate() {
                let mut w = word;
                while w != 0 {
                    let bit = w.trailing_zeros() as usize;
                    row[wi * 64 + bit] = 255;
                    w &= w - 1;
                }
            }
            std::io::Write::write_all(&mut stream, &row).map_err(png::EncodingError::from)?;
        }
        stream.finish()?;
    }
    Ok(out)
}
