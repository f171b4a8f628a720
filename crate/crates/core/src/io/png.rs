//! 8-bit PNG masks and RGB images.
//!
//! Masks are single-channel grayscale holding only 0 (background) and 255
//! (foreground). Anything else is rejected rather than guessed.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Decoder, Encoder};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, Grid, RgbImage};

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    pixels: Vec<u8>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let unsupported = |reason: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| match e {
            png::DecodingError::IoError(e) => Error::io(path, e),
            other => unsupported(other.to_string()),
        })?;
    let info = reader.info();
    if info.bit_depth != BitDepth::Eight {
        return Err(unsupported(format!("bit depth {:?}, expected 8", info.bit_depth)));
    }
    if info.interlaced {
        return Err(unsupported("interlaced PNGs are not supported".into()));
    }
    let (width, height, color) = (info.width as usize, info.height as usize, info.color_type);
    let mut pixels = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader
        .next_frame(&mut pixels)
        .map_err(|e| unsupported(e.to_string()))?;
    pixels.truncate(frame.buffer_size());
    Ok(Decoded {
        width,
        height,
        color,
        pixels,
    })
}

pub fn read_mask_png(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = decode(path)?;
    if img.color != ColorType::Grayscale {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("color type {:?}, masks must be 8-bit grayscale", img.color),
        });
    }
    let mut data = Vec::with_capacity(img.pixels.len());
    for (i, &v) in img.pixels.iter().enumerate() {
        match v {
            0 => data.push(false),
            255 => data.push(true),
            value => {
                return Err(Error::InvalidMask {
                    path: path.to_path_buf(),
                    row: i / img.width,
                    col: i % img.width,
                    value,
                })
            }
        }
    }
    Ok(BinaryMask(Grid::from_vec(img.height, img.width, data)?))
}

/// Reads an 8-bit grayscale PNG without the {0,255} restriction.
pub fn read_gray_png(path: impl AsRef<Path>) -> Result<Grid<u8>> {
    let path = path.as_ref();
    let img = decode(path)?;
    if img.color != ColorType::Grayscale {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("color type {:?}, expected 8-bit grayscale", img.color),
        });
    }
    Grid::from_vec(img.height, img.width, img.pixels)
}

pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    if img.color != ColorType::Rgb {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("color type {:?}, expected 8-bit RGB", img.color),
        });
    }
    let data = img
        .pixels
        .chunks_exact(3)
        .map(|p| [p[0], p[1], p[2]])
        .collect();
    Ok(RgbImage(Grid::from_vec(img.height, img.width, data)?))
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, pixels: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(BitDepth::Eight);
    let to_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(e) => Error::io(path, e),
        other => Error::InvalidInput(format!("{}: {other}", path.display())),
    };
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(pixels).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    let pixels: Vec<u8> = mask.values().iter().map(|&v| if v { 255 } else { 0 }).collect();
    encode(path.as_ref(), mask.width(), mask.height(), ColorType::Grayscale, &pixels)
}

pub fn write_gray_png(path: impl AsRef<Path>, gray: &Grid<u8>) -> Result<()> {
    encode(path.as_ref(), gray.width(), gray.height(), ColorType::Grayscale, gray.as_slice())
}

pub fn write_rgb_png(path: impl AsRef<Path>, image: &RgbImage) -> Result<()> {
    let (h, w) = image.dims();
    let pixels: Vec<u8> = image.grid().as_slice().iter().flatten().copied().collect();
    encode(path.as_ref(), w, h, ColorType::Rgb, &pixels)
}
