//! Grayscale frames and their on-disk containers (binary PGM and `.seq`).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MIN_SIDE: usize = 16;
const SEQ_MAGIC: &[u8; 4] = b"PNSQ";

/// One 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    pub timestamp_ms: Option<u64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "{} pixels for a {width}x{height} frame",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
            timestamp_ms: None,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Lossless 90 degree clockwise rotation (y-down screen orientation).
    pub fn rotate90(&self) -> Frame {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0u8; w * h];
        // (x, y) -> (h - 1 - y, x) in a frame of size h x w
        for y in 0..h {
            for x in 0..w {
                out[x * h + (h - 1 - y)] = self.pixels[y * w + x];
            }
        }
        Frame {
            width: h,
            height: w,
            pixels: out,
            timestamp_ms: self.timestamp_ms,
        }
    }

    /// Nearest-neighbor enlargement by an integer factor.
    pub fn upscale(&self, factor: usize) -> Frame {
        let (w, h) = (self.width * factor, self.height * factor);
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                out.push(self.get(x / factor, y / factor));
            }
        }
        Frame {
            width: w,
            height: h,
            pixels: out,
            timestamp_ms: self.timestamp_ms,
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PGM header".into()));
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        if tokens[0] != "P5" {
            return Err(Error::Format(format!("expected P5 magic, got {}", tokens[0])));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Format(format!("bad PGM header field {s:?}")))
        };
        let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        let end = pos + w * h;
        if bytes.len() < end {
            return Err(Error::Format("truncated PGM raster".into()));
        }
        Frame::new(w, h, bytes[pos..end].to_vec())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_pgm(&fs::read(path)?)
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_pgm())?;
        Ok(())
    }
}

/// Writes frames into the `.seq` container: `PNSQ`, u32 width, u32 height,
/// u32 frame count (little-endian), then the raw frames back to back.
pub fn write_seq(mut out: impl Write, frames: &[Frame]) -> Result<()> {
    let (w, h) = match frames.first() {
        Some(f) => (f.width, f.height),
        None => (0, 0),
    };
    if frames.iter().any(|f| f.width != w || f.height != h) {
        return Err(Error::Format("all frames in a sequence must share one size".into()));
    }
    out.write_all(SEQ_MAGIC)?;
    for v in [w as u32, h as u32, frames.len() as u32] {
        out.write_all(&v.to_le_bytes())?;
    }
    for f in frames {
        out.write_all(&f.pixels)?;
    }
    Ok(())
}

pub fn read_seq(mut input: impl Read) -> Result<Vec<Frame>> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != SEQ_MAGIC {
        return Err(Error::Format("missing PNSQ magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, n) = (word(4), word(8), word(12));
    let mut frames = Vec::with_capacity(n);
    for _ in 0..n {
        let mut px = vec![0u8; w * h];
        input.read_exact(&mut px)?;
        frames.push(Frame::new(w, h, px)?);
    }
    Ok(frames)
}

pub fn read_seq_file(path: impl AsRef<Path>) -> Result<Vec<Frame>> {
    read_seq(std::io::BufReader::new(fs::File::open(path)?))
}

pub fn write_seq_file(path: impl AsRef<Path>, frames: &[Frame]) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_seq(&mut w, frames)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Frame {
        Frame::from_fn(20, 17, |x, y| (x * 7 + y * 3) as u8).unwrap()
    }

    #[test]
    fn rejects_small_or_mismatched() {
        assert!(Frame::new(15, 20, vec![0; 300]).is_err());
        assert!(Frame::new(16, 16, vec![0; 10]).is_err());
    }

    #[test]
    fn pgm_round_trip_with_comment() {
        let f = sample();
        assert_eq!(Frame::from_pgm(&f.to_pgm()).unwrap(), f);
        let mut commented = b"P5\n# made by hand\n20 17\n255\n".to_vec();
        commented.extend_from_slice(f.pixels());
        assert_eq!(Frame::from_pgm(&commented).unwrap(), f);
    }

    #[test]
    fn seq_header_layout() {
        let f = sample();
        let mut buf = Vec::new();
        write_seq(&mut buf, &[f.clone(), f.clone()]).unwrap();
        assert_eq!(&buf[..4], b"PNSQ");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 20);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 17);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 16 + 2 * 20 * 17);
        assert_eq!(read_seq(&buf[..]).unwrap(), vec![f.clone(), f]);
    }

    #[test]
    fn rotate_four_times_is_identity() {
        let f = sample();
        let r = f.rotate90();
        assert_eq!((r.width(), r.height()), (17, 20));
        assert_eq!(r.get(16, 0), f.get(0, 0));
        assert_eq!(r.rotate90().rotate90().rotate90(), f);
    }
}
