//! Scalar robust losses `rho(t)` with analytic `rho'`, `rho''` and the
//! influence factor `rho'(t) / t`.
//!
//! Losses are stored in natural form without scale prefactors:
//!
//! | family | `rho(t)` |
//! |---|---|
//! | Quadratic | `t^2 / 2` |
//! | TotalVariation | `abs(t)` |
//! | Huber | `t^2/2` for `abs(t) <= g`, else `g abs(t) - g^2/2` |
//! | Welsch | `g^2 (1 - exp(-t^2 / (2 g^2)))` |
//! | Lorentzian | `g^2 ln(1 + t^2 / (2 g^2))` |
//! | ClippedQuadratic | `min(t^2, g^2) / 2` |
//! | ExponentialInduced | `c^2 (1 - (1 + abs(t)/c) exp(-abs(t)/c))`, `c = sqrt(2) g` |
//! | Barron | `(z/b) ((s/z + 1)^(b/2) - 1)`, `s = (t/g)^2`, `z = max(1, 2 - b)` |
//!
//! The first-order kernel of each family is `rho'(t)/t`: constant, `1/abs(t)`,
//! Huber weights, Gaussian, Cauchy, boxcar and exponential respectively.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::kernels::LossTable;

/// Default lower clamp on `abs(t)` in the TV influence.
pub const DEFAULT_TV_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
pub enum ScalarLoss {
    Quadratic,
    TotalVariation { epsilon: f64 },
    Huber { gamma: f64 },
    Welsch { gamma: f64 },
    Lorentzian { gamma: f64 },
    ClippedQuadratic { gamma: f64 },
    ExponentialInduced { gamma: f64 },
    /// `beta` may be `f64::NEG_INFINITY`; must be `<= 2`.
    Barron { beta: f64, gamma: f64 },
    /// Loss integrated from a kernel, see [`crate::kernels`].
    NumericFromKernel(Arc<LossTable>),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ScalarLoss {
    pub fn quadratic() -> Self {
        ScalarLoss::Quadratic
    }

    pub fn tv() -> Self {
        ScalarLoss::TotalVariation { epsilon: DEFAULT_TV_EPSILON }
    }

    pub fn tv_with_epsilon(epsilon: f64) -> Result<Self> {
        Ok(ScalarLoss::TotalVariation { epsilon: positive("epsilon", epsilon)? })
    }

    pub fn huber(gamma: f64) -> Result<Self> {
        Ok(ScalarLoss::Huber { gamma: positive("gamma", gamma)? })
    }

    pub fn welsch(gamma: f64) -> Result<Self> {
        Ok(ScalarLoss::Welsch { gamma: positive("gamma", gamma)? })
    }

    pub fn lorentzian(gamma: f64) -> Result<Self> {
        Ok(ScalarLoss::Lorentzian { gamma: positive("gamma", gamma)? })
    }

    pub fn clipped_quadratic(gamma: f64) -> Result<Self> {
        Ok(ScalarLoss::ClippedQuadratic { gamma: positive("gamma", gamma)? })
    }

    pub fn exponential_induced(gamma: f64) -> Result<Self> {
        Ok(ScalarLoss::ExponentialInduced { gamma: positive("gamma", gamma)? })
    }

    pub fn barron(beta: f64, gamma: f64) -> Result<Self> {
        if beta.is_nan() || beta > 2.0 {
            return Err(invalid(format!("barron beta must be <= 2 or -inf, got {beta}")));
        }
        Ok(ScalarLoss::Barron { beta, gamma: positive("gamma", gamma)? })
    }

    /// Family name as used in the CLI grammar.
    pub fn family(&self) -> &'static str {
        match self {
            ScalarLoss::Quadratic => "quadratic",
            ScalarLoss::TotalVariation { .. } => "tv",
            ScalarLoss::Huber { .. } => "huber",
            ScalarLoss::Welsch { .. } => "welsch",
            ScalarLoss::Lorentzian { .. } => "lorentzian",
            ScalarLoss::ClippedQuadratic { .. } => "clipped-quadratic",
            ScalarLoss::ExponentialInduced { .. } => "exponential",
            ScalarLoss::Barron { .. } => "barron",
            ScalarLoss::NumericFromKernel(_) => "numeric",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            ScalarLoss::Huber { gamma }
            | ScalarLoss::Welsch { gamma }
            | ScalarLoss::Lorentzian { gamma }
            | ScalarLoss::ClippedQuadratic { gamma }
            | ScalarLoss::ExponentialInduced { gamma }
            | ScalarLoss::Barron { gamma, .. } => Some(gamma),
            ScalarLoss::NumericFromKernel(ref t) => t.kernel().gamma(),
            ScalarLoss::Quadratic | ScalarLoss::TotalVariation { .. } => None,
        }
    }

    /// Natural length scale: gamma when defined, else 1.
    pub fn scale_hint(&self) -> f64 {
        self.gamma().unwrap_or(1.0)
    }

    pub fn rho(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            ScalarLoss::Quadratic => 0.5 * t * t,
            ScalarLoss::TotalVariation { .. } => a,
            ScalarLoss::Huber { gamma } => {
                if a <= gamma {
                    0.5 * t * t
                } else {
                    gamma * a - 0.5 * gamma * gamma
                }
            }
            ScalarLoss::Welsch { gamma } => -gamma * gamma * (-(t * t) / (2.0 * gamma * gamma)).exp_m1(),
            ScalarLoss::Lorentzian { gamma } => gamma * gamma * (t * t / (2.0 * gamma * gamma)).ln_1p(),
            ScalarLoss::ClippedQuadratic { gamma } => 0.5 * a.min(gamma).powi(2),
            ScalarLoss::ExponentialInduced { gamma } => {
                let c = std::f64::consts::SQRT_2 * gamma;
                c * c * one_minus_one_plus_u_exp(a / c)
            }
            ScalarLoss::Barron { beta, gamma } => {
                let s = (t / gamma).powi(2);
                if beta == f64::NEG_INFINITY {
                    -(-0.5 * s).exp_m1()
                } else if beta == 0.0 {
                    (0.5 * s).ln_1p()
                } else {
                    let z = barron_z(beta);
                    z / beta * ((0.5 * beta) * (s / z).ln_1p()).exp_m1()
                }
            }
            ScalarLoss::NumericFromKernel(ref table) => table.rho(a),
        }
    }

    pub fn rho_prime(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            ScalarLoss::Quadratic => t,
            ScalarLoss::TotalVariation { .. } => {
                if t == 0.0 {
                    0.0
                } else {
                    t.signum()
                }
            }
            ScalarLoss::Huber { gamma } => t.clamp(-gamma, gamma),
            ScalarLoss::Welsch { gamma } => t * (-(t * t) / (2.0 * gamma * gamma)).exp(),
            ScalarLoss::Lorentzian { gamma } => t / (1.0 + t * t / (2.0 * gamma * gamma)),
            ScalarLoss::ClippedQuadratic { gamma } => {
                if a <= gamma {
                    t
                } else {
                    0.0
                }
            }
            ScalarLoss::ExponentialInduced { gamma } => {
                t * (-a / (std::f64::consts::SQRT_2 * gamma)).exp()
            }
            ScalarLoss::Barron { .. } => t * self.influence(t),
            ScalarLoss::NumericFromKernel(ref table) => t.signum() * table.rho_prime(a),
        }
    }

    /// Second derivative. At kinks (Huber and clipped quadratic at `abs(t) =
    /// gamma`, TV at 0) the right limit is returned; see [`ScalarLoss::is_kink`].
    pub fn rho_second(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            ScalarLoss::Quadratic => 1.0,
            ScalarLoss::TotalVariation { .. } => 0.0,
            ScalarLoss::Huber { gamma } | ScalarLoss::ClippedQuadratic { gamma } => {
                if a < gamma {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarLoss::Welsch { gamma } => {
                let u = t * t / (gamma * gamma);
                (1.0 - u) * (-0.5 * u).exp()
            }
            ScalarLoss::Lorentzian { gamma } => {
                let v = t * t / (2.0 * gamma * gamma);
                (1.0 - v) / ((1.0 + v) * (1.0 + v))
            }
            ScalarLoss::ExponentialInduced { gamma } => {
                let u = a / (std::f64::consts::SQRT_2 * gamma);
                (1.0 - u) * (-u).exp()
            }
            ScalarLoss::Barron { beta, gamma } => {
                let s = (t / gamma).powi(2);
                let g2 = gamma * gamma;
                if beta == f64::NEG_INFINITY {
                    (1.0 - s) * (-0.5 * s).exp() / g2
                } else {
                    let z = barron_z(beta);
                    let q = s / z + 1.0;
                    q.powf(0.5 * beta - 2.0) * (1.0 + (beta - 1.0) * s / z) / g2
                }
            }
            ScalarLoss::NumericFromKernel(ref table) => table.rho_second(a),
        }
    }

    /// `rho'(t)/t`, with the value at 0 filled by `rho''(0+)` and the TV
    /// singularity clamped at `1/epsilon`.
    pub fn influence(&self, t: f64) -> f64 {
        let a = t.abs();
        match *self {
            ScalarLoss::Quadratic => 1.0,
            ScalarLoss::TotalVariation { epsilon } => 1.0 / a.max(epsilon),
            ScalarLoss::Huber { gamma } => {
                if a <= gamma {
                    1.0
                } else {
                    gamma / a
                }
            }
            ScalarLoss::Welsch { gamma } => (-(t * t) / (2.0 * gamma * gamma)).exp(),
            ScalarLoss::Lorentzian { gamma } => 1.0 / (1.0 + t * t / (2.0 * gamma * gamma)),
            ScalarLoss::ClippedQuadratic { gamma } => {
                if a <= gamma {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarLoss::ExponentialInduced { gamma } => (-a / (std::f64::consts::SQRT_2 * gamma)).exp(),
            ScalarLoss::Barron { beta, gamma } => {
                let s = (t / gamma).powi(2);
                let g2 = gamma * gamma;
                if beta == f64::NEG_INFINITY {
                    (-0.5 * s).exp() / g2
                } else {
                    let z = barron_z(beta);
                    (s / z + 1.0).powf(0.5 * beta - 1.0) / g2
                }
            }
            ScalarLoss::NumericFromKernel(ref table) => table.influence(a),
        }
    }

    /// True when `rho'(t) -> 0` as `t -> inf`.
    pub fn is_redescending(&self) -> bool {
        match *self {
            ScalarLoss::Quadratic | ScalarLoss::TotalVariation { .. } | ScalarLoss::Huber { .. } => false,
            ScalarLoss::Welsch { .. }
            | ScalarLoss::Lorentzian { .. }
            | ScalarLoss::ClippedQuadratic { .. }
            | ScalarLoss::ExponentialInduced { .. } => true,
            ScalarLoss::Barron { beta, .. } => beta < 1.0,
            ScalarLoss::NumericFromKernel(ref table) => table.is_redescending(),
        }
    }

    /// Whether `rho''` is non-negative everywhere.
    pub fn is_convex(&self) -> bool {
        match *self {
            ScalarLoss::Quadratic
            | ScalarLoss::TotalVariation { .. }
            | ScalarLoss::Huber { .. } => true,
            ScalarLoss::Welsch { .. }
            | ScalarLoss::Lorentzian { .. }
            | ScalarLoss::ClippedQuadratic { .. }
            | ScalarLoss::ExponentialInduced { .. } => false,
            ScalarLoss::Barron { beta, .. } => beta >= 1.0,
            ScalarLoss::NumericFromKernel(ref table) => table.is_convex(),
        }
    }

    /// Whether `rho''` is discontinuous at `t`.
    pub fn is_kink(&self, t: f64) -> bool {
        match *self {
            ScalarLoss::TotalVariation { .. } => t == 0.0,
            ScalarLoss::Huber { gamma } | ScalarLoss::ClippedQuadratic { gamma } => t.abs() == gamma,
            _ => false,
        }
    }

    /// `sup_t rho''(t)`, used for step-size rules.
    pub fn max_curvature(&self) -> f64 {
        match *self {
            ScalarLoss::Quadratic
            | ScalarLoss::Huber { .. }
            | ScalarLoss::Welsch { .. }
            | ScalarLoss::Lorentzian { .. }
            | ScalarLoss::ClippedQuadratic { .. }
            | ScalarLoss::ExponentialInduced { .. } => 1.0,
            ScalarLoss::TotalVariation { epsilon } => 1.0 / epsilon,
            ScalarLoss::Barron { gamma, .. } => 1.0 / (gamma * gamma),
            ScalarLoss::NumericFromKernel(ref table) => table.max_curvature(),
        }
    }
}

/// `max(1, 2 - beta)`.
fn barron_z(beta: f64) -> f64 {
    (2.0 - beta).max(1.0)
}

/// `1 - (1 + u) exp(-u)` without cancellation near 0.
fn one_minus_one_plus_u_exp(u: f64) -> f64 {
    if u < 0.5 {
        // sum_{k>=2} (-1)^k (k-1) u^k / k!
        let mut term = u; // u^k / k! at k = 1
        let mut sum = 0.0;
        for k in 2..30 {
            term *= u / k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (k - 1) as f64 * term;
        }
        sum
    } else {
        -(-u).exp_m1() - u * (-u).exp()
    }
}

fn parse_params(input: &str, body: &str, allowed: &[&str]) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    if body.is_empty() {
        return Ok(out);
    }
    for part in body.split(',') {
        let (k, v) = part.split_once('=').ok_or_else(|| Error::Family {
            input: input.into(),
            reason: format!("expected key=value, got {part:?}"),
        })?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Error::Family {
                input: input.into(),
                reason: format!("unknown parameter {k:?} (allowed: {})", allowed.join(", ")),
            });
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Family { input: input.into(), reason: format!("duplicate parameter {k:?}") });
        }
        let v = v.trim();
        let value = match v {
            "-inf" | "-infinity" => f64::NEG_INFINITY,
            _ => v.parse::<f64>().map_err(|_| Error::Family {
                input: input.into(),
                reason: format!("parameter {k} is not a number: {v:?}"),
            })?,
        };
        out.push((k.to_string(), value));
    }
    Ok(out)
}

/// Splits `name:key=value,...` into a family name and its parameters.
pub(crate) fn split_family<'a>(input: &'a str, allowed: &[&str]) -> Result<(&'a str, Vec<(String, f64)>)> {
    let (name, body) = input.split_once(':').unwrap_or((input, ""));
    let params = parse_params(input, body.trim(), allowed)?;
    Ok((name.trim(), params))
}

pub(crate) fn param(params: &[(String, f64)], key: &str, default: f64) -> f64 {
    params.iter().find(|(k, _)| k == key).map_or(default, |(_, v)| *v)
}

impl FromStr for ScalarLoss {
    type Err = Error;

    /// Grammar: `family[:key=value[,key=value]]`, for example `huber:gamma=5`,
    /// `barron:beta=0,gamma=1`, `tv`, `tv:eps=1e-3`. `gamma` defaults to 1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = split_family(s, &["gamma", "beta", "eps"])?;
        let gamma = param(&params, "gamma", 1.0);
        let wrap = |r: Result<ScalarLoss>| {
            r.map_err(|e| Error::Family { input: s.into(), reason: e.to_string() })
        };
        let reject = |keys: &[&str]| -> Result<()> {
            for (k, _) in &params {
                if !keys.contains(&k.as_str()) {
                    return Err(Error::Family {
                        input: s.into(),
                        reason: format!("family {name} does not take {k}"),
                    });
                }
            }
            Ok(())
        };
        match name {
            "quadratic" | "l2" | "dirichlet" => {
                reject(&[])?;
                Ok(ScalarLoss::Quadratic)
            }
            "tv" | "l1" => {
                reject(&["eps"])?;
                wrap(ScalarLoss::tv_with_epsilon(param(&params, "eps", DEFAULT_TV_EPSILON)))
            }
            "huber" => reject(&["gamma"]).and_then(|_| wrap(ScalarLoss::huber(gamma))),
            "welsch" => reject(&["gamma"]).and_then(|_| wrap(ScalarLoss::welsch(gamma))),
            "lorentzian" => reject(&["gamma"]).and_then(|_| wrap(ScalarLoss::lorentzian(gamma))),
            "clipped-quadratic" => reject(&["gamma"]).and_then(|_| wrap(ScalarLoss::clipped_quadratic(gamma))),
            "exponential" => reject(&["gamma"]).and_then(|_| wrap(ScalarLoss::exponential_induced(gamma))),
            "barron" => {
                reject(&["gamma", "beta"])?;
                if !params.iter().any(|(k, _)| k == "beta") {
                    return Err(Error::Family { input: s.into(), reason: "barron needs beta".into() });
                }
                wrap(ScalarLoss::barron(param(&params, "beta", 0.0), gamma))
            }
            _ => Err(Error::Family {
                input: s.into(),
                reason: "unknown loss family (quadratic|tv|huber|welsch|lorentzian|clipped-quadratic|exponential|barron)"
                    .into(),
            }),
        }
    }
}

impl fmt::Display for ScalarLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarLoss::Quadratic => write!(f, "quadratic"),
            ScalarLoss::TotalVariation { epsilon } => write!(f, "tv:eps={epsilon}"),
            ScalarLoss::Barron { beta, gamma } => write!(f, "barron:beta={beta},gamma={gamma}"),
            ScalarLoss::NumericFromKernel(t) => write!(f, "numeric[{}]", t.kernel()),
            other => write!(f, "{}:gamma={}", other.family(), other.scale_hint()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn analytic_families() -> Vec<ScalarLoss> {
        vec![
            ScalarLoss::Quadratic,
            ScalarLoss::tv(),
            ScalarLoss::huber(5.0).unwrap(),
            ScalarLoss::welsch(2.0).unwrap(),
            ScalarLoss::lorentzian(1.5).unwrap(),
            ScalarLoss::clipped_quadratic(3.0).unwrap(),
            ScalarLoss::exponential_induced(1.0).unwrap(),
            ScalarLoss::barron(-2.0, 1.0).unwrap(),
            ScalarLoss::barron(0.0, 1.0).unwrap(),
            ScalarLoss::barron(1.0, 2.0).unwrap(),
            ScalarLoss::barron(2.0, 1.0).unwrap(),
            ScalarLoss::barron(f64::NEG_INFINITY, 1.0).unwrap(),
        ]
    }

    #[test]
    fn huber_values() {
        let h = ScalarLoss::huber(5.0).unwrap();
        assert_eq!(h.rho(3.0), 4.5);
        assert_eq!(h.rho(10.0), 37.5);
        assert_eq!(h.rho_prime(3.0), 3.0);
        assert_eq!(h.rho_prime(-10.0), -5.0);
        assert_eq!(h.rho_second(3.0), 1.0);
        assert_eq!(h.rho_second(10.0), 0.0);
        assert_eq!(h.rho_second(5.0), 0.0);
        assert!(h.is_kink(5.0) && !h.is_kink(4.0));
        assert_eq!(h.influence(10.0), 0.5);
        // C1 at the knee
        assert_eq!(h.rho_prime(5.0), 5.0);
        assert!((h.rho(5.0 + 1e-9) - h.rho(5.0)).abs() < 1e-8);
    }

    #[test]
    fn closed_form_values() {
        let b = ScalarLoss::barron(2.0, 1.0).unwrap();
        assert!((b.rho(3.0) - 4.5).abs() < 1e-12);
        let w = ScalarLoss::welsch(1.0).unwrap();
        assert!((w.rho(1.0) - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
        assert!((w.rho(1.0) - 0.393469).abs() < 1e-6);
        assert_eq!(w.rho_second(0.0), 1.0);
        let l = ScalarLoss::lorentzian(1.0).unwrap();
        assert!(l.rho_second(3.0) < 0.0);
        assert_eq!(ScalarLoss::Quadratic.influence(123.0), 1.0);
        assert_eq!(ScalarLoss::tv().influence(0.0), 1e4);
    }

    #[test]
    fn welsch_cross_checked_by_quadrature() {
        let q = crate::quadrature::integrate(|t| t * (-0.5 * t * t).exp(), 0.0, 1.0, 1e-13).unwrap();
        assert!((ScalarLoss::welsch(1.0).unwrap().rho(1.0) - q).abs() < 1e-12);
    }

    #[test]
    fn exponential_series_branch_is_continuous() {
        let e = ScalarLoss::exponential_induced(1.0).unwrap();
        let c = std::f64::consts::SQRT_2;
        let below = e.rho(0.5 * c * (1.0 - 1e-12));
        let above = e.rho(0.5 * c * (1.0 + 1e-12));
        assert!((below - above).abs() < 1e-11);
        let u: f64 = 1e-3;
        let direct = c * c * (1.0 - (1.0 + u) * (-u).exp());
        assert!((e.rho(u * c) - direct).abs() < 1e-12);
    }

    #[test]
    fn redescending_classification() {
        assert!(ScalarLoss::welsch(1.0).unwrap().is_redescending());
        assert!(ScalarLoss::lorentzian(1.0).unwrap().is_redescending());
        assert!(ScalarLoss::clipped_quadratic(1.0).unwrap().is_redescending());
        assert!(ScalarLoss::exponential_induced(1.0).unwrap().is_redescending());
        assert!(ScalarLoss::barron(0.5, 1.0).unwrap().is_redescending());
        assert!(!ScalarLoss::barron(1.0, 1.0).unwrap().is_redescending());
        assert!(!ScalarLoss::Quadratic.is_redescending());
        assert!(!ScalarLoss::huber(5.0).unwrap().is_redescending());
        assert!(!ScalarLoss::tv().is_redescending());
    }

    #[test]
    fn derivatives_match_finite_differences_on_grid() {
        for loss in analytic_families() {
            let g = loss.scale_hint();
            for i in -400..=400 {
                let t = 20.0 * g * i as f64 / 400.0 + 0.013 * g;
                let h = 1e-6 * g.max(t.abs()).max(1.0);
                if (loss.is_kink(t - h) || loss.is_kink(t + h))
                    || [-g, g, 0.0].iter().any(|k| (t - k).abs() < 2.0 * h && loss.gamma().is_some())
                    || (matches!(loss, ScalarLoss::TotalVariation { .. }) && t.abs() < 2.0 * h)
                {
                    continue;
                }
                let fd1 = (loss.rho(t + h) - loss.rho(t - h)) / (2.0 * h);
                let d1 = loss.rho_prime(t);
                assert!((fd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0), "{loss} rho' at {t}: {d1} vs {fd1}");
                let fd2 = (loss.rho_prime(t + h) - loss.rho_prime(t - h)) / (2.0 * h);
                let d2 = loss.rho_second(t);
                assert!((fd2 - d2).abs() <= 1e-6 * d2.abs().max(1.0), "{loss} rho'' at {t}: {d2} vs {fd2}");
            }
        }
    }

    #[test]
    fn influence_continuous_at_zero() {
        for loss in analytic_families() {
            if matches!(loss, ScalarLoss::TotalVariation { .. }) {
                continue;
            }
            assert!((loss.influence(1e-8) - loss.rho_second(0.0)).abs() < 1e-7, "{loss}");
            assert_eq!(loss.influence(0.0), loss.rho_second(0.0), "{loss}");
        }
    }

    #[test]
    fn barron_limits() {
        let zero = ScalarLoss::barron(0.0, 1.0).unwrap();
        let near = ScalarLoss::barron(1e-6, 1.0).unwrap();
        let welsch_like = |beta: f64| {
            let b = ScalarLoss::barron(beta, 1.0).unwrap();
            let w = ScalarLoss::barron(f64::NEG_INFINITY, 1.0).unwrap();
            (0..=300).map(|i| 3.0 * i as f64 / 300.0).map(|t| (b.rho(t) - w.rho(t)).abs()).fold(0.0, f64::max)
        };
        for i in 0..=300 {
            let t = 3.0 * i as f64 / 300.0;
            assert!((near.rho(t) - zero.rho(t)).abs() <= 1e-5);
        }
        // The beta -> -inf limit is Welsch with gamma = 1 and unit scale.
        let w = ScalarLoss::welsch(1.0).unwrap();
        let minf = ScalarLoss::barron(f64::NEG_INFINITY, 1.0).unwrap();
        assert!((minf.rho(2.0) - w.rho(2.0)).abs() < 1e-15);
        let gaps: Vec<f64> = [-10.0, -100.0, -1000.0].iter().map(|&b| welsch_like(b)).collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        assert!(gaps[2] <= 1e-2);
    }

    #[test]
    fn barron_minus_hundred_gap_is_pinned() {
        let b = ScalarLoss::barron(-100.0, 1.0).unwrap();
        let w = ScalarLoss::welsch(1.0).unwrap();
        let gap = (0..=3000).map(|i| 3.0 * i as f64 / 3000.0).map(|t| (b.rho(t) - w.rho(t)).abs()).fold(0.0, f64::max);
        assert!((0.016..0.017).contains(&gap), "gap {gap}");
    }

    #[test]
    fn parse_and_display() {
        let h: ScalarLoss = "huber:gamma=5".parse().unwrap();
        assert!(matches!(h, ScalarLoss::Huber { gamma } if gamma == 5.0));
        let b: ScalarLoss = "barron:beta=0,gamma=1".parse().unwrap();
        assert!(matches!(b, ScalarLoss::Barron { beta, gamma } if beta == 0.0 && gamma == 1.0));
        let b: ScalarLoss = "barron:beta=-inf,gamma=2".parse().unwrap();
        assert!(matches!(b, ScalarLoss::Barron { beta, .. } if beta == f64::NEG_INFINITY));
        assert!(matches!("tv".parse::<ScalarLoss>().unwrap(), ScalarLoss::TotalVariation { epsilon } if epsilon == 1e-4));
        assert!(matches!("welsch:gamma=2".parse::<ScalarLoss>().unwrap(), ScalarLoss::Welsch { gamma } if gamma == 2.0));
        for bad in ["bogus", "huber:gamma", "huber:gamma=x", "huber:beta=1", "huber:gamma=-1", "barron:gamma=1", "barron:beta=3"] {
            assert!(bad.parse::<ScalarLoss>().is_err(), "{bad}");
        }
        for loss in analytic_families() {
            let again: ScalarLoss = loss.to_string().parse().unwrap();
            assert_eq!(again.to_string(), loss.to_string());
        }
    }

    proptest! {
        #[test]
        fn symmetry(t in -50.0f64..50.0) {
            for loss in analytic_families() {
                prop_assert_eq!(loss.rho(t), loss.rho(-t));
                prop_assert_eq!(loss.rho_prime(t), -loss.rho_prime(-t));
                prop_assert_eq!(loss.rho_second(t), loss.rho_second(-t));
                prop_assert!(loss.rho(t) >= 0.0);
            }
        }

        #[test]
        fn monotone_on_positive_axis(a in 0.0f64..40.0, b in 0.0f64..40.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for loss in analytic_families() {
                prop_assert!(loss.rho(lo) <= loss.rho(hi));
                prop_assert_eq!(loss.rho(0.0), 0.0);
            }
        }
    }
}
