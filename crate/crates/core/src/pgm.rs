//! Binary PGM (P5) with maxval up to 255.

use crate::error::{Error, Result};
use crate::image::Image;

fn err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Pgm { offset, reason: reason.into() }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    /// Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<(usize, u64)> {
        self.skip_space();
        let start = self.pos;
        let mut value: u64 = 0;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u64::from(self.bytes[self.pos] - b'0')))
                .ok_or_else(|| err(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(err(start, format!("expected {what}")));
        }
        Ok((start, value))
    }
}

/// Decodes a P5 image. Sample values are kept as-is (no rescaling by maxval).
pub fn load_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(err(0, "truncated header"));
    }
    if &bytes[..2] != b"P5" {
        return Err(err(0, "unsupported magic"));
    }
    let mut h = Header { bytes, pos: 2 };
    let (w_at, width) = h.number("width")?;
    let (h_at, height) = h.number("height")?;
    let (m_at, maxval) = h.number("maxval")?;
    if width == 0 {
        return Err(err(w_at, "width must be positive"));
    }
    if height == 0 {
        return Err(err(h_at, "height must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(err(m_at, "unsupported maxval"));
    }
    match bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(err(h.pos, "expected single whitespace after maxval")),
    }
    let n = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| err(w_at, "image size overflows"))?;
    let payload = &bytes[h.pos..];
    if payload.len() < n {
        return Err(err(bytes.len(), format!("truncated payload: need {n} bytes, have {}", payload.len())));
    }
    if let Some(i) = payload[..n].iter().position(|&b| u64::from(b) > maxval) {
        return Err(err(h.pos + i, "sample exceeds maxval"));
    }
    let data = payload[..n].iter().map(|&b| f64::from(b)).collect();
    Image::new(width as usize, height as usize, data)
}

/// Encodes as P5 with maxval 255, clamping to `[0, 255]` and rounding half
/// away from zero.
pub fn save_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| v.clamp(0.0, 255.0).round() as u8));
    out
}
