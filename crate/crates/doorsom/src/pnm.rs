//! Binary Netpbm: P5 (grayscale) and P6 (RGB), maxval up to 255.

use std::fs;
use std::path::Path;

use doorsom_core::{GrayImage, RgbImage};
use thiserror::Error;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("byte {offset}: {msg}")]
pub struct PnmError {
    pub offset: usize,
    pub msg: String,
}

fn fail<T>(offset: usize, msg: impl Into<String>) -> std::result::Result<T, PnmError> {
    Err(PnmError {
        offset,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pnm {
    Gray(GrayImage),
    Rgb(RgbImage),
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, PnmError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return fail(start, format!("expected {what}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map_or_else(|| fail(start, format!("{what} out of range")), Ok)
    }
}

/// Decodes a P5 or P6 image.
pub fn load_pnm(bytes: &[u8]) -> std::result::Result<Pnm, PnmError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return fail(0, "bad magic, expected P5 or P6"),
    };
    let mut h = Header { bytes, pos: 2 };
    if !h
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return fail(2, "expected whitespace after magic");
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return fail(maxval_at, "zero image dimension");
    }
    if maxval == 0 || maxval > 255 {
        return fail(maxval_at, format!("maxval {maxval} outside 1..=255"));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return fail(h.pos, "expected one whitespace byte before the raster");
    }
    let body = h.pos + 1;
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .map_or_else(|| fail(0, "image dimensions overflow"), Ok)?;
    let available = bytes.len() - body;
    if available < len {
        return fail(
            bytes.len(),
            format!("raster truncated: declared {len} bytes from offset {body}, found {available}"),
        );
    }
    if available > len {
        return fail(body + len, "trailing bytes after raster");
    }
    let data = bytes[body..].to_vec();
    if let Some(i) = data.iter().position(|&v| usize::from(v) > maxval) {
        return fail(body + i, format!("sample exceeds maxval {maxval}"));
    }
    let img = if channels == 1 {
        Pnm::Gray(GrayImage::from_raw(width, height, data).expect("length checked"))
    } else {
        Pnm::Rgb(RgbImage::from_raw(width, height, data).expect("length checked"))
    };
    Ok(img)
}

pub fn save_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_raw());
    out
}

pub fn save_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.as_raw());
    out
}

/// Reads a P5 file.
pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    match load_pnm(&bytes) {
        Ok(Pnm::Gray(img)) => Ok(img),
        Ok(Pnm::Rgb(_)) => Err(Error::Pnm {
            path: path.into(),
            source: PnmError {
                offset: 0,
                msg: "expected a P5 grayscale image, found P6".into(),
            },
        }),
        Err(source) => Err(Error::Pnm {
            path: path.into(),
            source,
        }),
    }
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, save_pgm(img)).map_err(io_err(path))
}

pub fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    fs::write(path, save_ppm(img)).map_err(io_err(path))
}
