//! Radial affinity kernels `k(t)` and the translation between kernels and
//! losses.
//!
//! Loss to kernel:
//! - first order: `k(t) = (2 s^2 / a) h rho'(t) / t`
//! - second order: `k(t) = (2 s^2 / a) h rho''(t)`
//!
//! Kernel to loss (unit prefactor, `rho(0) = rho'(0) = 0`):
//! - first order: `rho(t) = int_0^t tau k(tau) dtau`
//! - second order: `rho(t) = int_0^t int_0^s k(tau) dtau ds`
//!
//! Named kernels map to closed-form losses. Anything else goes through a
//! [`LossTable`], which memoizes the integrals on a uniform grid.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::losses::{param, split_family, ScalarLoss};
use crate::quadrature;

/// Which bridge a derived kernel or table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BridgeOrder {
    First,
    Second,
}

impl FromStr for BridgeOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "first" => Ok(BridgeOrder::First),
            "2" | "second" => Ok(BridgeOrder::Second),
            _ => Err(invalid(format!("unknown bridge order {s:?} (expected 1|2)"))),
        }
    }
}

/// The factor `2 s^2 h / a` relating a loss to its kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationScale {
    pub sigma: f64,
    pub alpha: f64,
    pub h_weight: f64,
}

impl TranslationScale {
    pub fn new(sigma: f64, alpha: f64, h_weight: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("translation sigma must be positive, got {sigma}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("translation alpha must be positive, got {alpha}")));
        }
        if !(h_weight >= 0.0 && h_weight.is_finite()) {
            return Err(invalid(format!("translation h_weight must be >= 0, got {h_weight}")));
        }
        Ok(Self { sigma, alpha, h_weight })
    }

    /// `sigma = 1/2, alpha = 1/2, h = 1`, for which the factor is exactly 1.
    pub fn unit() -> Self {
        Self { sigma: 0.5, alpha: 0.5, h_weight: 1.0 }
    }

    pub fn factor(&self) -> f64 {
        2.0 * self.sigma * self.sigma * self.h_weight / self.alpha
    }
}

#[derive(Debug, Clone)]
pub enum ScalarKernel {
    /// `1` for `abs(t) <= gamma`, else `0`.
    Boxcar { gamma: f64 },
    /// `exp(-t^2 / (2 gamma^2))`.
    Gaussian { gamma: f64 },
    /// `1 / (1 + t^2 / (2 gamma^2))`.
    Cauchy { gamma: f64 },
    /// `exp(-abs(t) / (sqrt(2) gamma))`.
    Exponential { gamma: f64 },
    /// `factor * rho'(t)/t` (first order) or `factor * rho''(t)` (second order).
    FromLoss {
        order: BridgeOrder,
        loss: ScalarLoss,
        factor: f64,
        negative_lobe: bool,
    },
}

fn gamma_ok(gamma: f64) -> Result<f64> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(gamma)
    } else {
        Err(invalid(format!("kernel gamma must be positive, got {gamma}")))
    }
}

impl ScalarKernel {
    pub fn boxcar(gamma: f64) -> Result<Self> {
        Ok(ScalarKernel::Boxcar { gamma: gamma_ok(gamma)? })
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Ok(ScalarKernel::Gaussian { gamma: gamma_ok(gamma)? })
    }

    pub fn cauchy(gamma: f64) -> Result<Self> {
        Ok(ScalarKernel::Cauchy { gamma: gamma_ok(gamma)? })
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        Ok(ScalarKernel::Exponential { gamma: gamma_ok(gamma)? })
    }

    /// `k == 1`, the first-order kernel of the quadratic loss.
    pub fn constant() -> Self {
        ScalarKernel::FromLoss {
            order: BridgeOrder::First,
            loss: ScalarLoss::Quadratic,
            factor: 1.0,
            negative_lobe: false,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ScalarKernel::Boxcar { .. } => "boxcar",
            ScalarKernel::Gaussian { .. } => "gaussian",
            ScalarKernel::Cauchy { .. } => "cauchy",
            ScalarKernel::Exponential { .. } => "exponential",
            ScalarKernel::FromLoss { order: BridgeOrder::First, .. } => "from-loss-first-order",
            ScalarKernel::FromLoss { order: BridgeOrder::Second, .. } => "from-loss-second-order",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            ScalarKernel::Boxcar { gamma }
            | ScalarKernel::Gaussian { gamma }
            | ScalarKernel::Cauchy { gamma }
            | ScalarKernel::Exponential { gamma } => Some(*gamma),
            ScalarKernel::FromLoss { loss, .. } => loss.gamma(),
        }
    }

    pub fn scale_hint(&self) -> f64 {
        self.gamma().unwrap_or(1.0)
    }

    /// True when a second-order kernel takes negative values somewhere.
    pub fn negative_lobe(&self) -> bool {
        matches!(self, ScalarKernel::FromLoss { negative_lobe: true, .. })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            ScalarKernel::Boxcar { gamma } => {
                if a <= gamma {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarKernel::Gaussian { gamma } => (-(t * t) / (2.0 * gamma * gamma)).exp(),
            ScalarKernel::Cauchy { gamma } => 1.0 / (1.0 + t * t / (2.0 * gamma * gamma)),
            ScalarKernel::Exponential { gamma } => (-a / (std::f64::consts::SQRT_2 * gamma)).exp(),
            ScalarKernel::FromLoss { order, ref loss, factor, .. } => match order {
                BridgeOrder::First => factor * loss.influence(t),
                BridgeOrder::Second => factor * loss.rho_second(t),
            },
        }
    }

    /// Points on `t > 0` where `k` or `k'` jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarKernel::Boxcar { gamma } => vec![*gamma],
            ScalarKernel::FromLoss { loss, .. } => match *loss {
                ScalarLoss::Huber { gamma } | ScalarLoss::ClippedQuadratic { gamma } => vec![gamma],
                ScalarLoss::TotalVariation { epsilon } => vec![epsilon],
                ScalarLoss::NumericFromKernel(ref t) => t.kernel().breakpoints(),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// `k'(t)`. Derived kernels use a central difference.
    pub fn derivative(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            ScalarKernel::Boxcar { .. } => 0.0,
            ScalarKernel::Gaussian { gamma } => -t / (gamma * gamma) * self.eval(t),
            ScalarKernel::Cauchy { gamma } => {
                let q = 1.0 + t * t / (2.0 * gamma * gamma);
                -t / (gamma * gamma) / (q * q)
            }
            ScalarKernel::Exponential { gamma } => {
                if t == 0.0 {
                    0.0
                } else {
                    -t.signum() / (std::f64::consts::SQRT_2 * gamma) * self.eval(t)
                }
            }
            ScalarKernel::FromLoss { .. } => {
                let h = 1e-6 * a.max(self.scale_hint());
                (self.eval(t + h) - self.eval(t - h)) / (2.0 * h)
            }
        }
    }
}

impl FromStr for ScalarKernel {
    type Err = Error;

    /// Grammar: `family[:gamma=value]` with family one of `boxcar`,
    /// `gaussian`, `cauchy`, `exponential`, `constant`. `gamma` defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split_family(s, &["gamma"])?;
        let gamma = param(&params, "gamma", 1.0);
        let wrap = |r: Result<ScalarKernel>| r.map_err(|e| Error::Family { input: s.into(), reason: e.to_string() });
        match name {
            "boxcar" => wrap(ScalarKernel::boxcar(gamma)),
            "gaussian" => wrap(ScalarKernel::gaussian(gamma)),
            "cauchy" => wrap(ScalarKernel::cauchy(gamma)),
            "exponential" => wrap(ScalarKernel::exponential(gamma)),
            "constant" if params.is_empty() => Ok(ScalarKernel::constant()),
            _ => Err(Error::Family {
                input: s.into(),
                reason: "unknown kernel family (boxcar|gaussian|cauchy|exponential|constant)".into(),
            }),
        }
    }
}

impl fmt::Display for ScalarKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarKernel::FromLoss { order, loss, factor, .. } => {
                let o = if *order == BridgeOrder::First { 1 } else { 2 };
                write!(f, "from-loss[{loss},order={o},factor={factor}]")
            }
            other => write!(f, "{}:gamma={}", other.family(), other.scale_hint()),
        }
    }
}

/// `k.eval(t)`.
pub fn kernel_eval(k: &ScalarKernel, t: f64) -> f64 {
    k.eval(t)
}

/// Samples used to detect negative second-order kernels and to summarise
/// numeric tables.
const SCAN_POINTS: usize = 4096;

/// First-order bridge: `k = (2 s^2 / a) h rho'(t)/t`.
pub fn kernel_from_loss_first_order(loss: &ScalarLoss, scale: TranslationScale) -> ScalarKernel {
    ScalarKernel::FromLoss { order: BridgeOrder::First, loss: loss.clone(), factor: scale.factor(), negative_lobe: false }
}

/// Second-order bridge: `k = (2 s^2 / a) h rho''(t)`. Negative values are
/// kept and flagged.
pub fn kernel_from_loss_second_order(loss: &ScalarLoss, scale: TranslationScale) -> ScalarKernel {
    let t_max = TABLE_SPAN * loss.scale_hint();
    let negative_lobe = (0..SCAN_POINTS)
        .map(|i| t_max * i as f64 / (SCAN_POINTS - 1) as f64)
        .any(|t| loss.rho_second(t) < 0.0);
    if negative_lobe {
        log::warn!("second-order kernel of {loss} has a negative lobe (not positive definite)");
    }
    ScalarKernel::FromLoss { order: BridgeOrder::Second, loss: loss.clone(), factor: scale.factor(), negative_lobe }
}

/// `rho(t) = int_0^t tau k(tau)`. Closed forms for the named families.
pub fn loss_from_kernel_first_order(k: &ScalarKernel) -> Result<ScalarLoss> {
    match *k {
        ScalarKernel::Boxcar { gamma } => ScalarLoss::clipped_quadratic(gamma),
        ScalarKernel::Gaussian { gamma } => ScalarLoss::welsch(gamma),
        ScalarKernel::Cauchy { gamma } => ScalarLoss::lorentzian(gamma),
        ScalarKernel::Exponential { gamma } => ScalarLoss::exponential_induced(gamma),
        ScalarKernel::FromLoss { .. } => numeric_loss_from_kernel(k, BridgeOrder::First),
    }
}

/// `rho(t) = int_0^t int_0^s k`. The boxcar integrates to Huber in closed form.
pub fn loss_from_kernel_second_order(k: &ScalarKernel) -> Result<ScalarLoss> {
    match *k {
        ScalarKernel::Boxcar { gamma } => ScalarLoss::huber(gamma),
        _ => numeric_loss_from_kernel(k, BridgeOrder::Second),
    }
}

/// Kernel-to-loss by quadrature regardless of closed forms.
pub fn numeric_loss_from_kernel(k: &ScalarKernel, order: BridgeOrder) -> Result<ScalarLoss> {
    Ok(ScalarLoss::NumericFromKernel(Arc::new(LossTable::build(k.clone(), order)?)))
}

/// Points in the round-trip grid over `[0, 10 gamma]`.
const ROUNDTRIP_POINTS: usize = 1001;

/// Max over `t in [0, 10 gamma]` of `abs(rho_back(t) / factor - rho(t))`,
/// where `rho_back` integrates the first-order kernel of `loss`.
pub fn roundtrip_check(loss: &ScalarLoss, scale: TranslationScale) -> Result<f64> {
    let factor = scale.factor();
    if factor == 0.0 {
        return Err(invalid("round trip needs a nonzero translation factor"));
    }
    let kernel = kernel_from_loss_first_order(loss, scale);
    let back = loss_from_kernel_first_order(&kernel)?;
    let span = 10.0 * loss.scale_hint();
    let mut worst = 0.0f64;
    for i in 0..ROUNDTRIP_POINTS {
        let t = span * i as f64 / (ROUNDTRIP_POINTS - 1) as f64;
        worst = worst.max((back.rho(t) / factor - loss.rho(t)).abs());
    }
    Ok(worst)
}

/// Number of memo nodes.
pub const TABLE_NODES: usize = 4096;
/// Table range in units of the kernel's gamma.
pub const TABLE_SPAN: f64 = 32.0;
/// Tolerance for partial-cell and out-of-range integrals.
const CELL_TOL: f64 = 1e-13;

/// Compensated running sum.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Adaptive Simpson on `[a, b]`, split at any breakpoint strictly inside.
/// Splitting keeps jumps on cell edges, where Simpson cannot be fooled.
fn integrate_split(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, breaks: &[f64]) -> Result<f64> {
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| a < p && p < b).collect();
    if inner.is_empty() {
        return quadrature::integrate(f, a, b, tol);
    }
    inner.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut lo = a;
    for p in inner.into_iter().chain(std::iter::once(b)) {
        total += quadrature::integrate(f, lo, p, tol)?;
        lo = p;
    }
    Ok(total)
}

/// A loss integrated from a kernel, memoized at `TABLE_NODES` points on
/// `[0, 32 gamma]`.
///
/// Between nodes, `rho` adds an adaptive-Simpson integral over the partial
/// cell to the node value. For the second-order table `rho'` is a cubic
/// Hermite interpolant with exact end slopes `k(t_i)`. Past the last node
/// both are continued by quadrature.
#[derive(Debug)]
pub struct LossTable {
    kernel: ScalarKernel,
    order: BridgeOrder,
    breaks: Vec<f64>,
    t_max: f64,
    step: f64,
    rho: Vec<f64>,
    slope: Vec<f64>,
    node_kernel: Vec<f64>,
    max_curvature: f64,
    min_curvature: f64,
    max_slope: f64,
}

impl LossTable {
    pub fn build(kernel: ScalarKernel, order: BridgeOrder) -> Result<Self> {
        let t_max = TABLE_SPAN * kernel.scale_hint();
        let breaks = kernel.breakpoints();
        let integrate = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64| integrate_split(f, a, b, tol, &breaks);
        let last = TABLE_NODES - 1;
        let node = |i: usize| t_max * i as f64 / last as f64;
        let cell_tol = quadrature::DEFAULT_TOL / last as f64;
        let k = |t: f64| kernel.eval(t);
        let mut rho = Vec::with_capacity(TABLE_NODES);
        let mut slope = Vec::with_capacity(TABLE_NODES);
        let node_kernel: Vec<f64> = (0..TABLE_NODES).map(|i| k(node(i))).collect();
        if node_kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature { a: 0.0, b: t_max });
        }
        let mut acc_rho = Neumaier::default();
        let mut acc_slope = Neumaier::default();
        rho.push(0.0);
        match order {
            BridgeOrder::First => {
                slope.push(0.0);
                for i in 1..TABLE_NODES {
                    let (a, b) = (node(i - 1), node(i));
                    acc_rho.add(integrate(&|t| t * k(t), a, b, cell_tol)?);
                    rho.push(acc_rho.value());
                    slope.push(b * node_kernel[i]);
                }
            }
            BridgeOrder::Second => {
                slope.push(0.0);
                for i in 1..TABLE_NODES {
                    let (a, b) = (node(i - 1), node(i));
                    let prev_slope = slope[i - 1];
                    acc_rho.add((b - a) * prev_slope);
                    acc_rho.add(integrate(&|t| (b - t) * k(t), a, b, cell_tol)?);
                    acc_slope.add(integrate(&k, a, b, cell_tol)?);
                    rho.push(acc_rho.value());
                    slope.push(acc_slope.value());
                }
            }
        }
        let step = t_max / last as f64;
        let mut table = Self {
            kernel,
            order,
            breaks,
            t_max,
            step,
            rho,
            slope,
            node_kernel,
            max_curvature: f64::NEG_INFINITY,
            min_curvature: f64::INFINITY,
            max_slope: 0.0,
        };
        for i in 0..TABLE_NODES {
            let c = table.rho_second(node(i));
            table.max_curvature = table.max_curvature.max(c);
            table.min_curvature = table.min_curvature.min(c);
            table.max_slope = table.max_slope.max(table.slope[i].abs());
        }
        Ok(table)
    }

    pub fn kernel(&self) -> &ScalarKernel {
        &self.kernel
    }

    pub fn order(&self) -> BridgeOrder {
        self.order
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `(t_i, rho_i, rho'_i)` at the memo nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let last = (TABLE_NODES - 1) as f64;
        (0..TABLE_NODES).map(move |i| (self.t_max * i as f64 / last, self.rho[i], self.slope[i]))
    }

    fn cell(&self, a: f64) -> (usize, f64) {
        let i = ((a / self.step) as usize).min(TABLE_NODES - 1);
        let t_i = self.t_max * i as f64 / (TABLE_NODES - 1) as f64;
        if t_i > a {
            // Guard against rounding in the division.
            let j = i - 1;
            (j, self.t_max * j as f64 / (TABLE_NODES - 1) as f64)
        } else {
            (i, t_i)
        }
    }

    /// Loss at `abs(a)`. Returns NaN if a continuation integral fails.
    pub fn rho(&self, a: f64) -> f64 {
        let a = a.abs();
        if a == 0.0 {
            return 0.0;
        }
        let (i, t_i) = self.cell(a);
        let k = |t: f64| self.kernel.eval(t);
        let tol = CELL_TOL.max(1e-15 * self.rho[i].abs());
        let partial = match self.order {
            BridgeOrder::First => integrate_split(&|t| t * k(t), t_i, a, tol, &self.breaks),
            BridgeOrder::Second => integrate_split(&|t| (a - t) * k(t), t_i, a, tol, &self.breaks)
                .map(|v| v + (a - t_i) * self.slope[i]),
        };
        partial.map_or(f64::NAN, |p| self.rho[i] + p)
    }

    /// `rho'(abs(a))`, non-negative side.
    pub fn rho_prime(&self, a: f64) -> f64 {
        let a = a.abs();
        match self.order {
            BridgeOrder::First => a * self.kernel.eval(a),
            BridgeOrder::Second => {
                if a >= self.t_max {
                    let last = TABLE_NODES - 1;
                    return integrate_split(&|t| self.kernel.eval(t), self.t_max, a, CELL_TOL, &self.breaks)
                        .map_or(f64::NAN, |v| self.slope[last] + v);
                }
                let (i, t_i) = self.cell(a);
                let h = self.step;
                let s = (a - t_i) / h;
                let (p0, p1) = (self.slope[i], self.slope[i + 1]);
                let (m0, m1) = (self.node_kernel[i] * h, self.node_kernel[i + 1] * h);
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * p0
                    + (s3 - 2.0 * s2 + s) * m0
                    + (-2.0 * s3 + 3.0 * s2) * p1
                    + (s3 - s2) * m1
            }
        }
    }

    pub fn rho_second(&self, a: f64) -> f64 {
        let a = a.abs();
        match self.order {
            BridgeOrder::First => self.kernel.eval(a) + a * self.kernel.derivative(a),
            BridgeOrder::Second => self.kernel.eval(a),
        }
    }

    pub fn influence(&self, a: f64) -> f64 {
        let a = a.abs();
        match self.order {
            BridgeOrder::First => self.kernel.eval(a),
            BridgeOrder::Second => {
                if a == 0.0 {
                    self.kernel.eval(0.0)
                } else {
                    self.rho_prime(a) / a
                }
            }
        }
    }

    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }

    pub fn is_convex(&self) -> bool {
        self.min_curvature >= -1e-12 * self.max_curvature.abs().max(1e-300)
    }

    pub fn is_redescending(&self) -> bool {
        self.slope[TABLE_NODES - 1].abs() <= 1e-3 * self.max_slope
    }
}
