//! Spatial weights `h(di, dj)` over a square window and boundary rules.

use crate::error::{invalid, Result};

/// How neighbour indices outside the image are mapped back inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Half-sample symmetric reflection: `-1 -> 0`, `n -> n-1`.
    #[default]
    Reflect,
    /// Wrap around.
    Periodic,
}

impl Boundary {
    /// Maps a possibly out-of-range index into `0..n`.
    #[inline]
    pub fn resolve(self, i: isize, n: usize) -> usize {
        let n_i = n as isize;
        if (0..n_i).contains(&i) {
            return i as usize;
        }
        match self {
            Boundary::Periodic => i.rem_euclid(n_i) as usize,
            Boundary::Reflect => {
                let p = 2 * n_i;
                let m = i.rem_euclid(p);
                (if m < n_i { m } else { p - 1 - m }) as usize
            }
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflect" => Ok(Boundary::Reflect),
            "periodic" => Ok(Boundary::Periodic),
            _ => Err(invalid(format!("unknown boundary {s:?} (expected reflect|periodic)"))),
        }
    }
}

/// One off-centre stencil entry with a nonzero weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offset {
    pub di: isize,
    pub dj: isize,
    pub weight: f64,
}

/// Symmetric non-negative weights on `[-r, r]^2`.
///
/// The centre weight is kept (the normalized kernel filter uses it as the
/// self term) but it never enters difference sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    radius: usize,
    weights: Vec<f64>,
}

impl Stencil {
    /// Weights in row-major order over the `(2r+1)^2` window, `di` outer.
    pub fn new(radius: usize, weights: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(invalid(format!(
                "stencil of radius {radius} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("stencil weights must be finite and non-negative"));
        }
        let n = weights.len();
        for (i, w) in weights.iter().enumerate() {
            if *w != weights[n - 1 - i] {
                return Err(invalid("stencil weights must satisfy h(d) = h(-d)"));
            }
        }
        Ok(Self { radius, weights })
    }

    pub fn from_fn(radius: usize, f: impl Fn(isize, isize) -> f64) -> Result<Self> {
        let r = radius as isize;
        let mut w = Vec::with_capacity((2 * radius + 1).pow(2));
        for di in -r..=r {
            for dj in -r..=r {
                w.push(f(di, dj));
            }
        }
        Self::new(radius, w)
    }

    /// `exp(-(di^2 + dj^2) / (2 s^2))` on the window.
    pub fn gaussian(radius: usize, spatial_sigma: f64) -> Result<Self> {
        if !(spatial_sigma > 0.0 && spatial_sigma.is_finite()) {
            return Err(invalid("spatial_sigma must be positive"));
        }
        let s2 = 2.0 * spatial_sigma * spatial_sigma;
        Self::from_fn(radius, |di, dj| (-((di * di + dj * dj) as f64) / s2).exp())
    }

    /// All weights one.
    pub fn boxed(radius: usize) -> Self {
        Self { radius, weights: vec![1.0; (2 * radius + 1).pow(2)] }
    }

    /// 1D window along rows: weight `w` at `(0, ±1..=±radius)`, 1 at the centre.
    pub fn horizontal(radius: usize, w: f64) -> Result<Self> {
        Self::from_fn(radius, |di, dj| match (di, dj) {
            (0, 0) => 1.0,
            (0, _) => w,
            _ => 0.0,
        })
    }

    /// Dirichlet stencil matching `(I + 2 s^2 L0)^-1`: `h = 2` at horizontal offsets ±1.
    pub fn dirichlet_1d() -> Self {
        Self::horizontal(1, 2.0).expect("valid constant stencil")
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Weight at an offset, zero outside the window.
    pub fn weight(&self, di: isize, dj: isize) -> f64 {
        let r = self.radius as isize;
        if di.abs() > r || dj.abs() > r {
            return 0.0;
        }
        let side = 2 * r + 1;
        self.weights[((di + r) * side + (dj + r)) as usize]
    }

    /// Off-centre offsets with nonzero weight, in row-major window order.
    pub fn offsets(&self) -> Vec<Offset> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for di in -r..=r {
            for dj in -r..=r {
                let weight = self.weight(di, dj);
                if (di, dj) != (0, 0) && weight != 0.0 {
                    out.push(Offset { di, dj, weight });
                }
            }
        }
        out
    }

    /// `sum_{o != 0} h_o`.
    pub fn difference_weight_sum(&self) -> f64 {
        self.offsets().iter().map(|o| o.weight).sum()
    }
}

/// Gaussian spatial stencil.
pub fn make_gaussian_stencil(radius: usize, spatial_sigma: f64) -> Result<Stencil> {
    Stencil::gaussian(radius, spatial_sigma)
}

/// Uniform box stencil.
pub fn make_box_stencil(radius: usize) -> Stencil {
    Stencil::boxed(radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_values() {
        let s = make_gaussian_stencil(5, 10.0).unwrap();
        assert_eq!(s.weight(0, 0), 1.0);
        assert_eq!(s.weight(5, 5), (-0.25f64).exp());
        assert_eq!(s.weight(3, 4), s.weight(-3, -4));
        assert_eq!(s.weight(6, 0), 0.0);
        assert!(make_gaussian_stencil(2, 0.0).is_err());
    }

    #[test]
    fn box_counts() {
        let s = make_box_stencil(5);
        assert_eq!(s.offsets().len(), 120);
        assert_eq!(s.weight(2, -1), 1.0);
        assert!(make_box_stencil(0).offsets().is_empty());
    }

    #[test]
    fn dirichlet_stencil() {
        let s = Stencil::dirichlet_1d();
        let offs = s.offsets();
        assert_eq!(offs.len(), 2);
        assert!(offs.iter().all(|o| o.di == 0 && o.dj.abs() == 1 && o.weight == 2.0));
    }

    #[test]
    fn asymmetric_rejected() {
        assert!(Stencil::from_fn(1, |di, dj| if (di, dj) == (0, 1) { 1.0 } else { 0.0 }).is_err());
    }

    #[test]
    fn boundary_resolution() {
        assert_eq!(Boundary::Reflect.resolve(-1, 4), 0);
        assert_eq!(Boundary::Reflect.resolve(-2, 4), 1);
        assert_eq!(Boundary::Reflect.resolve(4, 4), 3);
        assert_eq!(Boundary::Reflect.resolve(5, 4), 2);
        assert_eq!(Boundary::Reflect.resolve(-3, 1), 0);
        assert_eq!(Boundary::Periodic.resolve(-1, 4), 3);
        assert_eq!(Boundary::Periodic.resolve(9, 4), 1);
    }

    proptest! {
        #[test]
        fn constructors_are_symmetric(radius in 0usize..7, sigma in 0.1f64..20.0) {
            for s in [make_gaussian_stencil(radius, sigma).unwrap(), make_box_stencil(radius)] {
                let r = radius as isize;
                for di in -r..=r {
                    for dj in -r..=r {
                        prop_assert_eq!(s.weight(di, dj), s.weight(-di, -dj));
                    }
                }
            }
        }

        #[test]
        fn resolve_stays_in_range(i in -50isize..50, n in 1usize..9) {
            prop_assert!(Boundary::Reflect.resolve(i, n) < n);
            prop_assert!(Boundary::Periodic.resolve(i, n) < n);
        }
    }
}
