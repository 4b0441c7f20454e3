//! One-shot local filters.
//!
//! All difference filters share one form,
//! `x_k - strength * sum_o h_o w(|x_k - x_nb|) (x_k - x_nb)`, evaluated as a
//! pure gather over stencil offsets:
//!
//! | filter | strength | `w(t)` |
//! |---|---|---|
//! | [`division_free_bilateral`] | `alpha` | `k(t)` |
//! | [`first_order_filter`] | `sigma^2` | `rho'(t)/t` |
//! | [`second_order_filter`] | `sigma^2` | `rho''(t)` |

mod dirichlet;

pub use dirichlet::{
    dirichlet_approx_1d, dirichlet_approx_1d_with, dirichlet_approx_taps, dirichlet_exact_1d, dirichlet_exact_spectral,
    dirichlet_pole, dirichlet_spectral_gain, PeriodicFilter1D, TapConvention, DIRICHLET_BREAKDOWN_SIGMA,
};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::kernels::ScalarKernel;
use crate::losses::ScalarLoss;
use crate::stencil::{Boundary, Offset, Stencil};

/// Parameters shared by the one-shot filters. The kernel or loss parameter
/// (gamma) lives in the [`ScalarKernel`] / [`ScalarLoss`] value.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    /// MAP noise level; difference filters scale by `sigma^2`.
    pub sigma: f64,
    /// Strength of the division-free bilateral.
    pub alpha: f64,
    pub stencil: Stencil,
    /// Patch radius for the normalized kernel filter (0 = pixel differences).
    pub patch_radius: usize,
    pub boundary: Boundary,
}

impl FilterConfig {
    /// `alpha` defaults to `sigma^2`, reflective boundary, pixel differences.
    pub fn new(sigma: f64, stencil: Stencil) -> Result<Self> {
        let cfg = Self { sigma, alpha: sigma * sigma, stencil, patch_radius: 0, boundary: Boundary::Reflect };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn with_patch_radius(mut self, patch_radius: usize) -> Self {
        self.patch_radius = patch_radius;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("filter sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!("filter alpha must be finite and >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Neighbour index of `(r, c)` shifted by `o`.
#[inline]
fn neighbour(r: usize, c: usize, o: &Offset, w: usize, h: usize, boundary: Boundary) -> usize {
    boundary.resolve(r as isize + o.di, h) * w + boundary.resolve(c as isize + o.dj, w)
}

/// `x_k - strength * sum_o h_o w(|d|) d` with `d = x_k - x_nb(k,o)`.
pub(crate) fn difference_filter<F>(x: &Image, stencil: &Stencil, boundary: Boundary, strength: f64, weight: F) -> Image
where
    F: Fn(f64) -> f64 + Sync,
{
    let (w, h) = (x.width(), x.height());
    let data = x.data();
    let offsets = stencil.offsets();
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        for (c, o_px) in row.iter_mut().enumerate() {
            let xk = data[r * w + c];
            let mut acc = 0.0;
            for o in &offsets {
                let d = xk - data[neighbour(r, c, o, w, h, boundary)];
                acc += o.weight * weight(d.abs()) * d;
            }
            *o_px = xk - strength * acc;
        }
    });
    x.with_data(out)
}

/// Classic normalized kernel filter `sum_j K_ij x_j / sum_j K_ij` with
/// `K_ij = h_(i-j) k(patch distance)`, self term included.
pub fn kernel_filter_normalized(x: &Image, k: &ScalarKernel, cfg: &FilterConfig) -> Result<Image> {
    cfg.validate()?;
    let (w, h) = (x.width(), x.height());
    let data = x.data();
    let p = cfg.patch_radius as isize;
    let b = cfg.boundary;
    let mut window = cfg.stencil.offsets();
    window.push(Offset { di: 0, dj: 0, weight: cfg.stencil.weight(0, 0) });
    let at = |r: isize, c: isize| data[b.resolve(r, h) * w + b.resolve(c, w)];
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(r, row)| {
        let r = r as isize;
        for (c, o_px) in row.iter_mut().enumerate() {
            let c = c as isize;
            let mut num = 0.0;
            let mut den = 0.0;
            for o in &window {
                if o.weight == 0.0 {
                    continue;
                }
                let (nr, nc) = (r + o.di, c + o.dj);
                let dist = if p == 0 {
                    (at(r, c) - at(nr, nc)).abs()
                } else {
                    let mut s = 0.0;
                    for pr in -p..=p {
                        for pc in -p..=p {
                            let d = at(r + pr, c + pc) - at(nr + pr, nc + pc);
                            s += d * d;
                        }
                    }
                    s.sqrt()
                };
                let kw = o.weight * k.eval(dist);
                num += kw * at(nr, nc);
                den += kw;
            }
            *o_px = if den > 0.0 { num / den } else { at(r, c) };
        }
    });
    Ok(x.with_data(out))
}

/// `x_i - alpha sum_j h_ij k(|x_i - x_j|)(x_i - x_j)`.
pub fn division_free_bilateral(x: &Image, k: &ScalarKernel, cfg: &FilterConfig) -> Result<Image> {
    cfg.validate()?;
    Ok(difference_filter(x, &cfg.stencil, cfg.boundary, cfg.alpha, |t| k.eval(t)))
}

/// `x_k - sigma^2 sum_j h_kj rho'(|d|)/|d| d`, the first-order approximation
/// of the MAP estimate.
pub fn first_order_filter(x: &Image, loss: &ScalarLoss, cfg: &FilterConfig) -> Result<Image> {
    cfg.validate()?;
    Ok(difference_filter(x, &cfg.stencil, cfg.boundary, cfg.sigma * cfg.sigma, |t| loss.influence(t)))
}

/// `x_k - sigma^2 sum_j h_kj rho''(|d|) d`, the second-order approximation.
pub fn second_order_filter(x: &Image, loss: &ScalarLoss, cfg: &FilterConfig) -> Result<Image> {
    cfg.validate()?;
    Ok(difference_filter(x, &cfg.stencil, cfg.boundary, cfg.sigma * cfg.sigma, |t| loss.rho_second(t)))
}

/// `(1 - sigma^2) x`, the one-shot map for `phi(u) = |u|^2 / 2`.
pub fn l2_shrinkage(x: &Image, sigma: f64) -> Image {
    let f = 1.0 - sigma * sigma;
    x.map(|v| f * v)
}

/// `x / (1 + sigma^2)`, the exact MAP estimate for `phi(u) = |u|^2 / 2`.
pub fn l2_map_exact(x: &Image, sigma: f64) -> Image {
    let f = 1.0 + sigma * sigma;
    x.map(|v| v / f)
}

/// Terms of `|exact - approx| <= sigma^2 M |exact - x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relative slack on `lhs <= rhs` covering rounding when the bound is tight.
const BOUND_SLACK: f64 = 1e-12;

/// Euclidean-norm check of the MAP approximation bound.
pub fn filter_error_bound_report(x: &Image, exact: &Image, approx: &Image, sigma: f64, lipschitz: f64) -> Result<BoundReport> {
    x.check_same_shape(exact, "error bound")?;
    x.check_same_shape(approx, "error bound")?;
    let norm = |a: &Image, b: &Image| a.data().iter().zip(b.data()).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let lhs = norm(exact, approx);
    let rhs = sigma * sigma * lipschitz * norm(exact, x);
    Ok(BoundReport { lhs, rhs, holds: lhs <= rhs * (1.0 + BOUND_SLACK) })
}
