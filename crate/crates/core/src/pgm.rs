//! Binary portable graymap (`P5`) codec.
//!
//! Samples are 8-bit for maxval 255 and big-endian 16-bit for maxval 65535;
//! other maxvals are rejected. Intensities map linearly onto `[0, 1]`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PgmDepth {
    #[default]
    Eight,
    Sixteen,
}

impl PgmDepth {
    pub fn maxval(self) -> u32 {
        match self {
            PgmDepth::Eight => 255,
            PgmDepth::Sixteen => 65535,
        }
    }

    pub fn from_maxval(maxval: u32) -> Option<Self> {
        match maxval {
            255 => Some(PgmDepth::Eight),
            65535 => Some(PgmDepth::Sixteen),
            _ => None,
        }
    }
}

fn format_err<T>(offset: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Format { offset: offset as u64, message: message.into() })
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return format_err(start, format!("expected {what}"));
        }
        match std::str::from_utf8(&self.bytes[start..self.pos]).ok().and_then(|s| s.parse().ok()) {
            Some(v) => Ok(v),
            None => format_err(start, format!("{what} out of range")),
        }
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return format_err(0, "missing P5 magic");
    }
    let mut hdr = Header { bytes, pos: 2 };
    let width = hdr.number("width")? as usize;
    let height = hdr.number("height")? as usize;
    hdr.skip_space_and_comments();
    let maxval_at = hdr.pos;
    let maxval = hdr.number("maxval")?;
    let Some(depth) = PgmDepth::from_maxval(maxval) else {
        return format_err(maxval_at, format!("unsupported maxval {maxval}; expected 255 or 65535"));
    };
    if width == 0 || height == 0 {
        return format_err(2, format!("image extents must be positive, got {width}x{height}"));
    }
    if hdr.pos >= bytes.len() || !bytes[hdr.pos].is_ascii_whitespace() {
        return format_err(hdr.pos, "expected a single whitespace byte before the raster");
    }
    let start = hdr.pos + 1;
    let sample_bytes = if depth == PgmDepth::Eight { 1 } else { 2 };
    let need = width * height * sample_bytes;
    let raster = &bytes[start..];
    if raster.len() < need {
        return format_err(bytes.len(), format!("raster truncated: need {need} bytes, found {}", raster.len()));
    }
    if raster.len() > need {
        return format_err(start + need, "trailing bytes after raster");
    }
    let scale = f64::from(maxval);
    let pixels = match depth {
        PgmDepth::Eight => raster.iter().map(|&b| f64::from(b) / scale).collect(),
        PgmDepth::Sixteen => raster
            .chunks_exact(2)
            .map(|p| f64::from(u16::from_be_bytes([p[0], p[1]])) / scale)
            .collect(),
    };
    GrayImage::new(width, height, pixels)
}

pub fn encode_pgm(image: &GrayImage, depth: PgmDepth) -> Vec<u8> {
    let maxval = depth.maxval();
    let mut out = format!("P5\n{} {}\n{}\n", image.width(), image.height(), maxval).into_bytes();
    let scale = f64::from(maxval);
    for &p in image.pixels() {
        let q = (p * scale).round() as u32;
        match depth {
            PgmDepth::Eight => out.push(q as u8),
            PgmDepth::Sixteen => out.extend_from_slice(&(q as u16).to_be_bytes()),
        }
    }
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>, depth: PgmDepth) -> Result<()> {
    fs::write(path, encode_pgm(image, depth))?;
    Ok(())
}
