//! Iterative MAP solvers for `1/(2 sigma^2) |u - x|^2 + phi(u)`.
//!
//! The pairwise prior is `phi(u) = 1/2 sum_i sum_o h_o rho(|u_i - u_nb(i,o)|)`
//! with neighbours resolved by the boundary rule. The pointwise prior is
//! `phi(u) = sum_i rho(|u_i|)`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::filters::{first_order_filter, second_order_filter, FilterConfig};
use crate::image::Image;
use crate::losses::ScalarLoss;
use crate::metrics::{psnr, DEFAULT_PEAK};
use crate::stencil::{Boundary, Offset, Stencil};

#[derive(Debug, Clone)]
pub enum Prior {
    Pairwise { stencil: Stencil, boundary: Boundary },
    Pointwise,
}

#[derive(Debug, Clone)]
pub struct MapProblem {
    pub observed: Image,
    pub loss: ScalarLoss,
    pub sigma: f64,
    pub prior: Prior,
}

impl MapProblem {
    /// Pairwise prior over `stencil` with reflective boundary.
    pub fn pairwise(observed: Image, loss: ScalarLoss, stencil: Stencil, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { observed, loss, sigma, prior: Prior::Pairwise { stencil, boundary: Boundary::Reflect } })
    }

    /// `phi(u) = sum_i rho(|u_i|)`; with the quadratic loss this is `|u|^2 / 2`.
    pub fn pointwise(observed: Image, loss: ScalarLoss, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { observed, loss, sigma, prior: Prior::Pointwise })
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        if let Prior::Pairwise { boundary: b, .. } = &mut self.prior {
            *b = boundary;
        }
        self
    }

    pub fn objective(&self, u: &Image) -> Result<f64> {
        self.observed.check_same_shape(u, "objective")?;
        Ok(Evaluator::new(self).objective(u))
    }

    pub fn gradient(&self, u: &Image) -> Result<Image> {
        self.observed.check_same_shape(u, "gradient")?;
        Ok(u.with_data(Evaluator::new(self).gradient(u)))
    }

    /// `(1 / sigma^2, L_hat)` with `L_hat = max degree * max rho''`. The
    /// gradient of `phi` is `2 L_hat` Lipschitz for the pairwise prior and
    /// `L_hat` for the pointwise one.
    pub fn curvature_estimates(&self) -> (f64, f64) {
        let ev = Evaluator::new(self);
        (1.0 / (self.sigma * self.sigma), ev.max_degree * self.loss.max_curvature())
    }

    fn lipschitz_bound(&self) -> f64 {
        let (mu, l_hat) = self.curvature_estimates();
        match self.prior {
            Prior::Pairwise { .. } => mu + 2.0 * l_hat,
            Prior::Pointwise => mu + l_hat,
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("MAP sigma must be finite and > 0, got {sigma}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// `None`: `sigma^2 / (1 + sigma^2 L_hat)`.
    pub step: Option<f64>,
    /// `None`: `(1 - sqrt(step / sigma^2))^2`, tuned to the strong convexity
    /// of the data term.
    pub momentum: Option<f64>,
    /// `None`: `1e-6 * (1 / sigma^2) * dynamic range of the observation`.
    pub grad_tol: Option<f64>,
    pub objective_log: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 5000, step: None, momentum: Some(0.9), grad_tol: None, objective_log: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be positive"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("step must be finite and > 0, got {s}")));
            }
        }
        if let Some(m) = self.momentum {
            if !(0.0..1.0).contains(&m) {
                return Err(invalid(format!("momentum must be in [0, 1), got {m}")));
            }
        }
        if let Some(t) = self.grad_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!("grad_tol must be finite and >= 0, got {t}")));
            }
        }
        Ok(())
    }

    pub fn resolved_step(&self, p: &MapProblem) -> f64 {
        self.step.unwrap_or_else(|| {
            let (mu, l_hat) = p.curvature_estimates();
            1.0 / (mu + l_hat)
        })
    }

    pub fn resolved_momentum(&self, p: &MapProblem) -> f64 {
        self.momentum.unwrap_or_else(|| {
            let a = (self.resolved_step(p) / (p.sigma * p.sigma)).min(1.0);
            (1.0 - a.sqrt()).powi(2)
        })
    }

    pub fn resolved_grad_tol(&self, p: &MapProblem) -> f64 {
        self.grad_tol.unwrap_or_else(|| 1e-6 / (p.sigma * p.sigma) * p.observed.dynamic_range())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    /// NaN when objective logging is off.
    pub objective: f64,
    /// Infinity norm of the gradient.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: Image,
    pub trace: Vec<TraceEntry>,
    /// Number of gradient evaluations.
    pub iterations: usize,
    pub converged: bool,
    pub step: f64,
    pub momentum: f64,
}

/// Plain gradient descent initialised at the observation.
pub fn solve_gd(p: &MapProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    run(p, cfg, 0.0)
}

/// Heavy-ball momentum; non-convex losses fall back to plain descent.
pub fn solve_heavy_ball(p: &MapProblem, cfg: &SolverConfig) -> Result<SolveOutcome> {
    cfg.validate()?;
    if !p.loss.is_convex() {
        log::warn!("loss {} is not convex; heavy-ball falls back to gradient descent", p.loss);
        return run(p, cfg, 0.0);
    }
    run(p, cfg, cfg.resolved_momentum(p))
}

fn run(p: &MapProblem, cfg: &SolverConfig, momentum: f64) -> Result<SolveOutcome> {
    cfg.validate()?;
    let step = cfg.resolved_step(p);
    let tol = cfg.resolved_grad_tol(p);
    let lip = p.lipschitz_bound();
    if step * lip > 2.0 {
        log::warn!("step {step} exceeds the stability bound 2/{lip}");
    }
    let ev = Evaluator::new(p);
    let mut u = p.observed.data().to_vec();
    let mut prev: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 0..cfg.max_iters {
        let img = p.observed.with_data(u);
        let g = ev.gradient(&img);
        let grad_norm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let objective = if cfg.objective_log { ev.objective(&img) } else { f64::NAN };
        if !grad_norm.is_finite() || (cfg.objective_log && !objective.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        trace.push(TraceEntry { iter, objective, grad_norm });
        u = img.into_data();
        if grad_norm <= tol {
            converged = true;
            break;
        }
        let next: Vec<f64> = if momentum == 0.0 {
            u.iter().zip(&g).map(|(a, d)| a - step * d).collect()
        } else {
            match &prev {
                Some(pv) => u.iter().zip(&g).zip(pv).map(|((a, d), b)| a - step * d + momentum * (a - b)).collect(),
                None => u.iter().zip(&g).map(|(a, d)| a - step * d).collect(),
            }
        };
        prev = Some(std::mem::replace(&mut u, next));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration: trace.len() });
    }
    Ok(SolveOutcome { solution: p.observed.with_data(u), iterations: trace.len(), trace, converged, step, momentum })
}

/// CSV bytes with header `iter,objective,grad_norm`.
pub fn trace_csv(trace: &[TraceEntry]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "objective", "grad_norm"])?;
    for t in trace {
        w.write_record([t.iter.to_string(), format!("{:.16e}", t.objective), format!("{:.16e}", t.grad_norm)])?;
    }
    w.into_inner().map_err(|e| invalid(format!("csv flush failed: {e}")))
}

#[derive(Debug, Clone)]
pub struct MapVsOneshotReport {
    pub psnr_first: f64,
    pub psnr_second: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reference: Image,
    pub first: Image,
    pub second: Image,
}

/// Converged MAP estimate against both one-shot filters, PSNR relative to
/// the converged estimate (peak 255).
pub fn map_vs_oneshot_report(p: &MapProblem, cfg: &SolverConfig) -> Result<MapVsOneshotReport> {
    let (stencil, boundary) = match &p.prior {
        Prior::Pairwise { stencil, boundary } => (stencil.clone(), *boundary),
        Prior::Pointwise => return Err(invalid("one-shot filters need a pairwise prior")),
    };
    let out = solve_heavy_ball(p, cfg)?;
    if !out.converged {
        log::warn!("reference solve stopped at max_iters={} without reaching grad_tol", cfg.max_iters);
    }
    let fcfg = FilterConfig::new(p.sigma, stencil)?.with_boundary(boundary);
    let first = first_order_filter(&p.observed, &p.loss, &fcfg)?;
    let second = second_order_filter(&p.observed, &p.loss, &fcfg)?;
    Ok(MapVsOneshotReport {
        psnr_first: psnr(&first, &out.solution, DEFAULT_PEAK)?,
        psnr_second: psnr(&second, &out.solution, DEFAULT_PEAK)?,
        iterations: out.iterations,
        converged: out.converged,
        reference: out.solution,
        first,
        second,
    })
}

/// Precomputed neighbour structure for objective and gradient.
///
/// Every ordered term `(i, o)` carries weight `h_o / 2` and contributes to the
/// gradient at both of its endpoints. Pixels at least one radius from the
/// border see exactly the terms `(k, o)` and `(k - o, o)`, so their gradient
/// is a gather with full weights over linear index offsets. Pixels in the
/// border band keep an explicit list of `(neighbour, weight)` entries.
struct Evaluator<'p> {
    p: &'p MapProblem,
    offsets: Vec<Offset>,
    /// One offset of each `+-o` pair, as `(linear offset, di, dj, h)`.
    half: Vec<(isize, isize, isize, f64)>,
    boundary: Boundary,
    explicit: Vec<Option<Vec<(usize, f64)>>>,
    max_degree: f64,
    inv_s2: f64,
}

impl<'p> Evaluator<'p> {
    fn new(p: &'p MapProblem) -> Self {
        let inv_s2 = 1.0 / (p.sigma * p.sigma);
        let (w, h) = (p.observed.width(), p.observed.height());
        let Prior::Pairwise { stencil, boundary } = &p.prior else {
            return Self {
                p,
                offsets: Vec::new(),
                half: Vec::new(),
                boundary: Boundary::Reflect,
                explicit: Vec::new(),
                max_degree: 1.0,
                inv_s2,
            };
        };
        let offsets = stencil.offsets();
        let half = offsets
            .iter()
            .filter(|o| o.di > 0 || (o.di == 0 && o.dj > 0))
            .map(|o| (o.di * w as isize + o.dj, o.di, o.dj, o.weight))
            .collect();
        let r = stencil.radius();
        let interior = |k: usize| {
            let (row, col) = (k / w, k % w);
            row >= r && col >= r && row + r < h && col + r < w
        };
        let mut explicit: Vec<Option<Vec<(usize, f64)>>> =
            (0..w * h).map(|k| if interior(k) { None } else { Some(Vec::new()) }).collect();
        for i in 0..w * h {
            for o in &offsets {
                let j = nb(i, o, w, h, *boundary);
                if j == i {
                    continue;
                }
                if let Some(list) = &mut explicit[i] {
                    list.push((j, 0.5 * o.weight));
                }
                if let Some(list) = &mut explicit[j] {
                    list.push((i, 0.5 * o.weight));
                }
            }
        }
        let full = stencil.difference_weight_sum();
        let max_degree = explicit
            .iter()
            .map(|e| e.as_ref().map_or(full, |list| list.iter().map(|t| t.1).sum()))
            .fold(0.0, f64::max);
        Self { p, offsets, half, boundary: *boundary, explicit, max_degree, inv_s2 }
    }

    fn objective(&self, u: &Image) -> f64 {
        let (w, h) = (u.width(), u.height());
        let x = self.p.observed.data();
        let ud = u.data();
        let loss = &self.p.loss;
        let pointwise = matches!(self.p.prior, Prior::Pointwise);
        let rows: Vec<f64> = (0..h)
            .into_par_iter()
            .map(|row| {
                let mut s = 0.0;
                for k in row * w..(row + 1) * w {
                    let d = ud[k] - x[k];
                    s += 0.5 * self.inv_s2 * d * d;
                    if pointwise {
                        s += loss.rho(ud[k].abs());
                    }
                    for o in &self.offsets {
                        s += 0.5 * o.weight * loss.rho((ud[k] - ud[nb(k, o, w, h, self.boundary)]).abs());
                    }
                }
                s
            })
            .collect();
        rows.iter().sum()
    }

    /// Interior pixels: for each pair offset `o`, `e_j = psi(u_j - u_(j+o))`
    /// is evaluated once and enters as `h_o (e_k - e_(k-o))`.
    fn gradient(&self, u: &Image) -> Vec<f64> {
        let (w, h) = (u.width(), u.height());
        let x = self.p.observed.data();
        let ud = u.data();
        let loss = &self.p.loss;
        let psi = |d: f64| loss.influence(d.abs()) * d;
        let pointwise = matches!(self.p.prior, Prior::Pointwise);
        let mut g: Vec<f64> = ud
            .par_iter()
            .zip(x.par_iter())
            .map(|(&uk, &xk)| {
                let s = (uk - xk) * self.inv_s2;
                if pointwise {
                    s + psi(uk)
                } else {
                    s
                }
            })
            .collect();
        if self.explicit.is_empty() {
            return g;
        }
        let mut e = vec![0.0; ud.len()];
        for &(lin, di, dj, wt) in &self.half {
            e.par_chunks_mut(w).enumerate().for_each(|(row, er)| {
                let r2 = row as isize + di;
                if r2 < 0 || r2 >= h as isize {
                    return;
                }
                for (c, ej) in er.iter_mut().enumerate() {
                    let c2 = c as isize + dj;
                    if c2 >= 0 && c2 < w as isize {
                        let k = row * w + c;
                        *ej = psi(ud[k] - ud[(k as isize + lin) as usize]);
                    }
                }
            });
            let e = &e;
            g.par_chunks_mut(w).enumerate().for_each(|(row, gr)| {
                for (c, gk) in gr.iter_mut().enumerate() {
                    let k = row * w + c;
                    if self.explicit[k].is_none() {
                        *gk += wt * (e[k] - e[(k as isize - lin) as usize]);
                    }
                }
            });
        }
        g.par_chunks_mut(w).enumerate().for_each(|(row, gr)| {
            for (c, gk) in gr.iter_mut().enumerate() {
                let k = row * w + c;
                if let Some(list) = &self.explicit[k] {
                    let uk = ud[k];
                    for &(j, wt) in list {
                        *gk += wt * psi(uk - ud[j]);
                    }
                }
            }
        });
        g
    }
}

#[inline]
fn nb(k: usize, o: &Offset, w: usize, h: usize, boundary: Boundary) -> usize {
    let (r, c) = ((k / w) as isize, (k % w) as isize);
    boundary.resolve(r + o.di, h) * w + boundary.resolve(c + o.dj, w)
}
