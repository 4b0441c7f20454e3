//! Dense affinity and Laplacian machinery for small instances.
//!
//! This is a verification oracle for the production filters: it builds
//! `K`, `D`, `W = D^-1 K`, `L_norm = I - W`, `L_unnorm = D - K` explicitly and
//! evaluates the alpha estimates, energies and assembled pairwise Laplacians.
//! All identities hold with the weights frozen at the evaluation point.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::kernels::ScalarKernel;
use crate::losses::ScalarLoss;
use crate::stencil::{Boundary, Stencil};

/// Largest instance the dense routines accept.
pub const MAX_DENSE_PIXELS: usize = 4096;

/// Dense symmetric affinity with unit diagonal.
#[derive(Debug, Clone)]
pub struct AffinityMatrix {
    k: DMatrix<f64>,
    degrees: DVector<f64>,
    gamma: Option<f64>,
    patch_radius: usize,
}

/// `W`, both Laplacians and the alpha attached to them.
#[derive(Debug, Clone)]
pub struct LaplacianBundle {
    pub filter: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
    pub unnormalized: DMatrix<f64>,
    pub alpha: f64,
}

fn guard(n: usize) -> Result<()> {
    if n > MAX_DENSE_PIXELS {
        return Err(Error::TooLarge { n, limit: MAX_DENSE_PIXELS });
    }
    Ok(())
}

/// Pixel indices of the `(2p+1)^2` patch around `(r, c)`, reflected at the
/// border.
fn patch_indices(img: &Image, r: usize, c: usize, p: usize, boundary: Boundary) -> Vec<usize> {
    let (w, h) = (img.width(), img.height());
    let p = p as isize;
    let mut out = Vec::with_capacity(((2 * p + 1) * (2 * p + 1)) as usize);
    for dr in -p..=p {
        for dc in -p..=p {
            let rr = boundary.resolve(r as isize + dr, h);
            let cc = boundary.resolve(c as isize + dc, w);
            out.push(rr * w + cc);
        }
    }
    out
}

fn patch_distance(x: &[f64], pi: &[usize], pj: &[usize]) -> f64 {
    pi.iter().zip(pj).map(|(&a, &b)| (x[a] - x[b]).powi(2)).sum::<f64>().sqrt()
}

impl AffinityMatrix {
    /// Wraps a dense matrix, checking symmetry, unit diagonal and signs.
    pub fn from_dense(k: DMatrix<f64>) -> Result<Self> {
        let n = k.nrows();
        if n == 0 || k.ncols() != n {
            return Err(Error::DimensionMismatch(format!("affinity must be square, got {}x{}", n, k.ncols())));
        }
        guard(n)?;
        for i in 0..n {
            if k[(i, i)] != 1.0 {
                return Err(invalid(format!("affinity diagonal must be 1, K[{i},{i}] = {}", k[(i, i)])));
            }
            for j in 0..i {
                if k[(i, j)] != k[(j, i)] {
                    return Err(invalid(format!("affinity not symmetric at ({i},{j})")));
                }
                if !(k[(i, j)] >= 0.0 && k[(i, j)].is_finite()) {
                    return Err(invalid(format!("affinity entry ({i},{j}) must be finite and >= 0")));
                }
            }
        }
        let degrees = DVector::from_iterator(n, k.row_iter().map(|r| r.sum()));
        Ok(Self { k, degrees, gamma: None, patch_radius: 0 })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn kernel_matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn patch_radius(&self) -> usize {
        self.patch_radius
    }
}

/// `K_ij = h_(i-j) k(||R_i x - R_j x||)` for in-image neighbours in the
/// stencil window, 0 elsewhere, 1 on the diagonal. Patches are reflected at
/// the border.
pub fn build_affinity(signal: &Image, k: &ScalarKernel, stencil: &Stencil, patch_radius: usize) -> Result<AffinityMatrix> {
    let n = signal.len();
    guard(n)?;
    let (w, h) = (signal.width(), signal.height());
    let x = signal.data();
    let patches: Vec<Vec<usize>> = (0..n).map(|i| patch_indices(signal, i / w, i % w, patch_radius, Boundary::Reflect)).collect();
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for o in stencil.offsets() {
            let (rr, cc) = (r + o.di, c + o.dj);
            if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                continue;
            }
            let j = rr as usize * w + cc as usize;
            if j <= i {
                continue;
            }
            let v = o.weight * k.eval(patch_distance(x, &patches[i], &patches[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let mut a = AffinityMatrix::from_dense(m)?;
    a.gamma = k.gamma();
    a.patch_radius = patch_radius;
    Ok(a)
}

/// `W = D^-1 K` with both Laplacians. `alpha` is the trace-optimal value, or
/// the mean-degree estimate when the affinity is diagonal.
pub fn normalized_filter(a: &AffinityMatrix) -> LaplacianBundle {
    let n = a.n();
    let d = a.degrees();
    assert!(d.iter().all(|&v| v > 0.0), "degrees are >= 1 by construction");
    let mut filter = a.kernel_matrix().clone();
    for (i, mut row) in filter.row_iter_mut().enumerate() {
        row /= d[i];
    }
    let normalized = DMatrix::<f64>::identity(n, n) - &filter;
    let unnormalized = DMatrix::from_diagonal(d) - a.kernel_matrix();
    let alpha = alpha_exact(a).unwrap_or_else(|_| alpha_mean_degree(a));
    LaplacianBundle { filter, normalized, unnormalized, alpha }
}

/// Frobenius-optimal alpha for `I - D^-1 K ~ alpha (D - K)`:
/// `[tr(K D^-1 K) - 2 tr(K) + tr(D)] / [tr(K^2) - 2 tr(KD) + tr(D^2)]`.
pub fn alpha_exact(a: &AffinityMatrix) -> Result<f64> {
    let k = a.kernel_matrix();
    let d = a.degrees();
    let n = a.n();
    let mut tr_kdk = 0.0;
    let mut tr_k2 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = k[(i, j)] * k[(i, j)];
            tr_kdk += v / d[j];
            tr_k2 += v;
        }
    }
    let tr_k: f64 = k.diagonal().sum();
    let tr_d: f64 = d.sum();
    let tr_kd: f64 = (0..n).map(|i| k[(i, i)] * d[i]).sum();
    let tr_d2: f64 = d.iter().map(|v| v * v).sum();
    let den = tr_k2 - 2.0 * tr_kd + tr_d2;
    if den <= 0.0 {
        return Err(Error::AlphaUndefined);
    }
    Ok((tr_kdk - 2.0 * tr_k + tr_d) / den)
}

/// `N / sum d_i`.
pub fn alpha_mean_degree(a: &AffinityMatrix) -> f64 {
    a.n() as f64 / a.degrees().sum()
}

/// `||(I - D^-1 K) - alpha (D - K)||_F`.
pub fn frobenius_residual(a: &AffinityMatrix, alpha: f64) -> f64 {
    let b = normalized_filter(a);
    (&b.normalized - &b.unnormalized * alpha).norm()
}

fn as_vector(x: &Image, n: usize) -> Result<DVector<f64>> {
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!("signal has {} samples, operator is {n}x{n}", x.len())));
    }
    Ok(DVector::from_column_slice(x.data()))
}

/// `(1 / 2 s^2) x^T (I - W) x` with `W` frozen.
pub fn pseudo_quadratic_energy(x: &Image, b: &LaplacianBundle, sigma: f64) -> Result<f64> {
    let v = as_vector(x, b.normalized.nrows())?;
    Ok(v.dot(&(&b.normalized * &v)) / (2.0 * sigma * sigma))
}

/// `(alpha / 2 s^2) x^T (D - K) x` with weights frozen.
pub fn unnormalized_energy(x: &Image, a: &AffinityMatrix, alpha: f64, sigma: f64) -> Result<f64> {
    let b = normalized_filter(a);
    let v = as_vector(x, a.n())?;
    Ok(alpha * v.dot(&(&b.unnormalized * &v)) / (2.0 * sigma * sigma))
}

/// `(alpha / s^2) (D - K) x`.
pub fn unnormalized_energy_gradient(x: &Image, a: &AffinityMatrix, alpha: f64, sigma: f64) -> Result<DVector<f64>> {
    let b = normalized_filter(a);
    let v = as_vector(x, a.n())?;
    Ok(&b.unnormalized * &v * (alpha / (sigma * sigma)))
}

/// Largest violation of `(alpha / 2 s^2)(d_i - 1) = h_00` over the nodes.
/// Reported only; nothing enforces it.
pub fn self_weight_mismatch(a: &AffinityMatrix, alpha: f64, sigma: f64, stencil: &Stencil) -> f64 {
    let h00 = stencil.weight(0, 0);
    a.degrees()
        .iter()
        .map(|d| (alpha / (2.0 * sigma * sigma) * (d - 1.0) - h00).abs())
        .fold(0.0, f64::max)
}

/// `1/2 sum_i sum_o h_o c(||R_i x - R_nb x||) R_io^T R_io` assembled from
/// patch extractors, where `R_io = R_i - R_nb(i,o)` and `c` is `weight`.
pub fn assemble_pairwise_laplacian(
    x: &Image,
    stencil: &Stencil,
    patch_radius: usize,
    boundary: Boundary,
    weight: &dyn Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    guard(n)?;
    let (w, h) = (x.width(), x.height());
    let data = x.data();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (r, c) = (i / w, i % w);
        let pi = patch_indices(x, r, c, patch_radius, boundary);
        for o in stencil.offsets() {
            let nr = boundary.resolve(r as isize + o.di, h);
            let nc = boundary.resolve(c as isize + o.dj, w);
            let pj = patch_indices(x, nr, nc, patch_radius, boundary);
            let cw = 0.5 * o.weight * weight(patch_distance(data, &pi, &pj));
            for (&a, &b) in pi.iter().zip(&pj) {
                m[(a, a)] += cw;
                m[(b, b)] += cw;
                m[(a, b)] -= cw;
                m[(b, a)] -= cw;
            }
        }
    }
    Ok(m)
}

/// Pixelwise stencil Laplacian: `L_kk = sum_o h_o c_ko`, `L_k,nb -= h_o c_ko`.
pub fn direct_pairwise_laplacian(
    x: &Image,
    stencil: &Stencil,
    boundary: Boundary,
    weight: &dyn Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    guard(n)?;
    let (w, h) = (x.width(), x.height());
    let data = x.data();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let (r, c) = (k / w, k % w);
        for o in stencil.offsets() {
            let nb = boundary.resolve(r as isize + o.di, h) * w + boundary.resolve(c as isize + o.dj, w);
            let cw = o.weight * weight((data[k] - data[nb]).abs());
            m[(k, k)] += cw;
            m[(k, nb)] -= cw;
        }
    }
    Ok(m)
}

/// Output of [`hessian_isotropic_check`].
#[derive(Debug, Clone)]
pub struct HessianReport {
    pub fd_hessian: DMatrix<f64>,
    pub analytic_hessian: DMatrix<f64>,
    /// `H x` from the analytic Hessian.
    pub contraction: DVector<f64>,
    /// `rho''(||Ax||) A^T A x`.
    pub contraction_reference: DVector<f64>,
    /// `max |H_fd - H| / max |H|`.
    pub hessian_rel_error: f64,
    /// `max |H_fd x - rho'' A^T A x| / (max |H| max |x|)`.
    pub fd_contraction_rel_error: f64,
    /// `max |H x - rho'' A^T A x| / (max |H| max |x|)`.
    pub contraction_rel_error: f64,
    /// `||H x|| / ||x||`.
    pub contraction_gain: f64,
    /// Spectral norm of `A^T A`.
    pub ata_norm: f64,
}

/// Compares the analytic Hessian of `phi(x) = rho(||A x||)` against central
/// differences of the analytic gradient (step `1e-5 max(1, |x|_inf)`).
pub fn hessian_isotropic_check(a_op: &DMatrix<f64>, loss: &ScalarLoss, x: &DVector<f64>) -> Result<HessianReport> {
    if a_op.ncols() != x.len() {
        return Err(Error::DimensionMismatch(format!("A has {} columns, x has {}", a_op.ncols(), x.len())));
    }
    let ata = a_op.transpose() * a_op;
    let grad = |v: &DVector<f64>| -> DVector<f64> {
        let ax = a_op * v;
        let t = ax.norm();
        if t == 0.0 {
            return DVector::zeros(v.len());
        }
        a_op.transpose() * ax * (loss.rho_prime(t) / t)
    };
    let ax = a_op * x;
    let t = ax.norm();
    if t == 0.0 {
        return Err(Error::ZeroNorm("||A x|| = 0".into()));
    }
    let n = x.len();
    let u = &ax / t;
    let v = a_op.transpose() * &u;
    let rp = loss.rho_prime(t);
    let rs = loss.rho_second(t);
    let analytic = (&ata - &v * v.transpose()) * (rp / t) + &v * v.transpose() * rs;

    let h = 1e-5 * x.amax().max(1.0);
    let mut fd = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        fd.set_column(j, &((grad(&xp) - grad(&xm)) / (2.0 * h)));
    }
    let contraction = &analytic * x;
    let contraction_reference = &ata * x * rs;
    let scale = analytic.amax().max(f64::MIN_POSITIVE);
    let cscale = scale * x.amax().max(f64::MIN_POSITIVE);
    let ata_norm = ata.clone().symmetric_eigenvalues().amax();
    Ok(HessianReport {
        hessian_rel_error: (&fd - &analytic).amax() / scale,
        fd_contraction_rel_error: (&fd * x - &contraction_reference).amax() / cscale,
        contraction_rel_error: (&contraction - &contraction_reference).amax() / cscale,
        contraction_gain: contraction.norm() / x.norm(),
        ata_norm,
        fd_hessian: fd,
        analytic_hessian: analytic,
        contraction,
        contraction_reference,
    })
}
