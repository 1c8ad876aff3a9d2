//! Single-channel images with intensities in [0, 1], and PGM I/O.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    /// Row-major pixels; every value must be finite.
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(Error::ShapeMismatch {
                expected: height * width,
                actual: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("image has non-finite pixels".into()));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }

    pub fn clamped(mut self) -> Self {
        for p in &mut self.pixels {
            *p = p.clamp(0.0, 1.0);
        }
        self
    }

    /// Mean intensity of rows `[start, end)`.
    pub fn row_mean(&self, start: usize, end: usize) -> f64 {
        let rows = &self.pixels[start * self.width..end * self.width];
        rows.iter().sum::<f64>() / rows.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BitDepth {
    Eight,
    #[default]
    Sixteen,
}

/// Reads a binary (`P5`) or plain (`P2`) PGM with any maxval up to 65535.
pub fn read_pgm_from<R: Read>(mut input: R) -> Result<Image> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let magic = header_token(&bytes, &mut pos)?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(Error::format("pgm", format!("unsupported magic {other:?}"))),
    };
    let width = header_number(&bytes, &mut pos)?;
    let height = header_number(&bytes, &mut pos)?;
    let maxval = header_number(&bytes, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format("pgm", format!("bad maxval {maxval}")));
    }
    let n = width * height;
    let scale = maxval as f64;
    let raw: Vec<u32> = if binary {
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let wide = maxval > 255;
        let need = n * if wide { 2 } else { 1 };
        let data = bytes
            .get(pos..pos + need)
            .ok_or_else(|| Error::format("pgm", "truncated raster"))?;
        if wide {
            data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
        } else {
            data.iter().map(|&b| b as u32).collect()
        }
    } else {
        (0..n)
            .map(|_| header_number(&bytes, &mut pos).map(|v| v as u32))
            .collect::<Result<_>>()?
    };
    if raw.iter().any(|&v| v as usize > maxval) {
        return Err(Error::format("pgm", "sample exceeds maxval"));
    }
    Image::new(height, width, raw.into_iter().map(|v| v as f64 / scale).collect())
}

fn header_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("pgm", "truncated header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = header_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| Error::format("pgm", format!("expected a number, got {tok:?}")))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    read_pgm_from(std::fs::File::open(path)?)
}

/// Writes a binary PGM; 16-bit samples are big-endian as the format requires.
pub fn write_pgm_to<W: Write>(img: &Image, depth: BitDepth, mut out: W) -> Result<()> {
    let maxval: u32 = match depth {
        BitDepth::Eight => 255,
        BitDepth::Sixteen => 65535,
    };
    write!(out, "P5\n{} {}\n{}\n", img.width, img.height, maxval)?;
    let mut raster = Vec::with_capacity(img.len() * 2);
    for &p in &img.pixels {
        let v = (p.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        match depth {
            BitDepth::Eight => raster.push(v as u8),
            BitDepth::Sixteen => raster.extend_from_slice(&v.to_be_bytes()),
        }
    }
    out.write_all(&raster)?;
    Ok(())
}

pub fn write_pgm(path: impl AsRef<Path>, img: &Image, depth: BitDepth) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_pgm_to(img, depth, &mut out)?;
    out.flush()?;
    Ok(())
}
