//! Deterministic synthetic test images.

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::noise::standard_normal;

/// The four corpus images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CorpusImage {
    /// Piecewise-constant 4x4 grid of blocks.
    Blocks,
    /// Horizontal linear ramp from 32 to 224.
    Ramp,
    /// Product of two sinusoids with 16 and 12 pixel periods.
    Sinusoid,
    /// Smoothed seeded Gaussian noise around 128.
    NoiseTexture,
}

impl CorpusImage {
    pub const ALL: [CorpusImage; 4] =
        [CorpusImage::Blocks, CorpusImage::Ramp, CorpusImage::Sinusoid, CorpusImage::NoiseTexture];

    pub fn name(self) -> &'static str {
        match self {
            CorpusImage::Blocks => "blocks",
            CorpusImage::Ramp => "ramp",
            CorpusImage::Sinusoid => "sinusoid",
            CorpusImage::NoiseTexture => "noise-texture",
        }
    }

    /// A `size x size` image. Only `NoiseTexture` depends on `seed`.
    pub fn generate(self, size: usize, seed: u64) -> Image {
        assert!(size > 0, "corpus size must be positive");
        let n = size as f64;
        match self {
            CorpusImage::Blocks => {
                const LEVELS: [f64; 16] = [
                    40.0, 200.0, 120.0, 80.0, 160.0, 60.0, 220.0, 100.0, 90.0, 180.0, 30.0, 140.0,
                    210.0, 110.0, 70.0, 170.0,
                ];
                Image::from_fn(size, size, |r, c| {
                    let br = (4 * r / size).min(3);
                    let bc = (4 * c / size).min(3);
                    LEVELS[4 * br + bc]
                })
            }
            CorpusImage::Ramp => Image::from_fn(size, size, |_, c| {
                if size == 1 {
                    128.0
                } else {
                    32.0 + 192.0 * c as f64 / (n - 1.0)
                }
            }),
            CorpusImage::Sinusoid => Image::from_fn(size, size, |r, c| {
                let tau = 2.0 * std::f64::consts::PI;
                128.0 + 64.0 * (tau * c as f64 / 16.0).sin() * (tau * r as f64 / 12.0).cos()
            }),
            CorpusImage::NoiseTexture => {
                let z = standard_normal(size * size, seed);
                // 3x3 periodic box blur; the blurred field has std 1/3.
                let at = |r: isize, c: isize| {
                    let rr = r.rem_euclid(size as isize) as usize;
                    let cc = c.rem_euclid(size as isize) as usize;
                    z[rr * size + cc]
                };
                Image::from_fn(size, size, |r, c| {
                    let (r, c) = (r as isize, c as isize);
                    let mut s = 0.0;
                    for dr in -1..=1 {
                        for dc in -1..=1 {
                            s += at(r + dr, c + dc);
                        }
                    }
                    128.0 + 40.0 * s / 3.0
                })
            }
        }
    }
}

impl std::str::FromStr for CorpusImage {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        CorpusImage::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| invalid(format!("unknown corpus image {s:?} (blocks|ramp|sinusoid|noise-texture)")))
    }
}

impl std::fmt::Display for CorpusImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
