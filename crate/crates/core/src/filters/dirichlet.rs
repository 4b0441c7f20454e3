//! Closed-form 1D periodic Dirichlet filters.
//!
//! Convention: the MAP problem is `(I + 2 sigma^2 L0) u = x` with `L0` the
//! circulant second difference `[-1, 2, -1]`. Its one-shot approximation is
//! the 3-tap filter `[2 sigma^2, 1 - 4 sigma^2, 2 sigma^2]`.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::image::Image;

/// Largest sigma for which the 3-tap filter keeps a non-negative Nyquist gain.
pub const DIRICHLET_BREAKDOWN_SIGMA: f64 = 0.353_553_390_593_273_73;

/// Impulse response of a cyclic convolution of length `n = taps.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFilter1D {
    taps: Vec<f64>,
}

impl PeriodicFilter1D {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(invalid("periodic filter needs at least one tap"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(invalid("periodic filter taps must be finite"));
        }
        Ok(Self { taps })
    }

    pub fn n(&self) -> usize {
        self.taps.len()
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Sum of taps, the response at frequency 0.
    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// `y_n = sum_m w_m x_(n-m mod N)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(invalid(format!("signal length {} does not match filter length {n}", x.len())));
        }
        Ok((0..n)
            .map(|i| self.taps.iter().enumerate().map(|(m, w)| w * x[(i + n - m) % n]).sum())
            .collect())
    }

    /// Applies the filter along every row of `img` (width must equal `n`).
    pub fn apply_rows(&self, img: &Image) -> Result<Image> {
        let mut out = Vec::with_capacity(img.len());
        for row in img.data().chunks(img.width()) {
            out.extend(self.apply(row)?);
        }
        Ok(img.with_data(out))
    }

    /// Real part of the DFT of the taps at bin `k`.
    pub fn frequency_response(&self, k: usize) -> f64 {
        let n = self.n();
        self.taps.iter().enumerate().map(|(m, w)| w * (2.0 * PI * ((k * m) % n) as f64 / n as f64).cos()).sum()
    }

    /// Sum of absolute tap differences.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        if self.n() != other.n() {
            return Err(invalid("filters have different lengths"));
        }
        Ok(self.taps.iter().zip(&other.taps).map(|(a, b)| (a - b).abs()).sum())
    }
}

/// Tap scale of the 3-tap filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TapConvention {
    /// `[2 s^2, 1 - 4 s^2, 2 s^2]`, consistent with the exact filter.
    #[default]
    Matched,
    /// `[s^2, 1 - 2 s^2, s^2]`, from `phi = 1/2 sum |u_(n+1) - u_n|^2`; comparison only.
    Halved,
}

/// 3-tap approximate filter as a length-`n` impulse response.
pub fn dirichlet_approx_taps(n: usize, sigma: f64, convention: TapConvention) -> Result<PeriodicFilter1D> {
    if n < 3 {
        return Err(invalid(format!("3-tap periodic filter needs n >= 3, got {n}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let s2 = match convention {
        TapConvention::Matched => 2.0 * sigma * sigma,
        TapConvention::Halved => sigma * sigma,
    };
    let mut taps = vec![0.0; n];
    taps[0] = 1.0 - 2.0 * s2;
    taps[1] = s2;
    taps[n - 1] = s2;
    PeriodicFilter1D::new(taps)
}

/// `2 s^2 x_(n+1) + (1 - 4 s^2) x_n + 2 s^2 x_(n-1)` on a periodic sequence.
pub fn dirichlet_approx_1d(x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    dirichlet_approx_1d_with(x, sigma, TapConvention::Matched)
}

pub fn dirichlet_approx_1d_with(x: &[f64], sigma: f64, convention: TapConvention) -> Result<Vec<f64>> {
    if convention == TapConvention::Matched && sigma > DIRICHLET_BREAKDOWN_SIGMA {
        log::warn!("sigma {sigma} exceeds the 3-tap breakdown point {DIRICHLET_BREAKDOWN_SIGMA}");
    }
    dirichlet_approx_taps(x.len(), sigma, convention)?.apply(x)
}

/// Stable form of the pole `r = 1 + (1 - sqrt(1 + 8 s^2)) / (4 s^2)`.
pub fn dirichlet_pole(sigma: f64) -> f64 {
    1.0 - 2.0 / (1.0 + (1.0 + 8.0 * sigma * sigma).sqrt())
}

fn check_exact(n: usize, sigma: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("exact Dirichlet filter needs n >= 2, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("exact Dirichlet filter needs sigma > 0, got {sigma}")));
    }
    Ok(())
}

/// `w_n = (1 - r) / ((1 + r)(1 - r^N)) (r^n + r^(N-n))`.
pub fn dirichlet_exact_1d(n: usize, sigma: f64) -> Result<PeriodicFilter1D> {
    check_exact(n, sigma)?;
    let r = dirichlet_pole(sigma);
    let c = (1.0 - r) / ((1.0 + r) * (1.0 - r.powi(n as i32)));
    PeriodicFilter1D::new((0..n).map(|i| c * (r.powi(i as i32) + r.powi((n - i) as i32))).collect())
}

/// `W_k = 1 / (1 + 4 s^2 (1 - cos(2 pi k / N)))`.
pub fn dirichlet_spectral_gain(k: usize, n: usize, sigma: f64) -> f64 {
    let theta = 2.0 * PI * (k % n) as f64 / n as f64;
    1.0 / (1.0 + 4.0 * sigma * sigma * (1.0 - theta.cos()))
}

/// Inverse DFT of `W_k`.
pub fn dirichlet_exact_spectral(n: usize, sigma: f64) -> Result<PeriodicFilter1D> {
    check_exact(n, sigma)?;
    let gains: Vec<f64> = (0..n).map(|k| dirichlet_spectral_gain(k, n, sigma)).collect();
    let taps = (0..n)
        .map(|m| {
            let s: f64 = gains.iter().enumerate().map(|(k, g)| g * (2.0 * PI * ((k * m) % n) as f64 / n as f64).cos()).sum();
            s / n as f64
        })
        .collect();
    PeriodicFilter1D::new(taps)
}
