//! Sweep harness: noise, filter or solve, PSNR, CSV.
//!
//! Sweep parameters `sigma` are in 8-bit intensity units; the MAP weight is
//! `sigma / 255`. CSV schemas (header row first, one row per grid point):
//!
//! | experiment | columns |
//! |---|---|
//! | `huber-tv` | `sigma,psnr_first,psnr_second,reference_iterations,reference_converged` |
//! | `bilateral-inversion` | `sigma,psnr_first,psnr_second,best_alpha_first,best_alpha_second` |
//! | `dirichlet` | `sigma,l1_distance,nyquist_gain_approx,nyquist_gain_exact,pole,w_exact_0..w_exact_4,w_approx_0,w_approx_1` |
//!
//! The bilateral alpha scan has its own table,
//! `sigma,alpha_multiplier,alpha,psnr_first,psnr_second,best_first,best_second`.
//! With timings enabled, `runtime_ms_*` columns are appended.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::corpus::CorpusImage;
use crate::error::{invalid, Result};
use crate::filters::{
    dirichlet_approx_taps, dirichlet_exact_1d, division_free_bilateral, first_order_filter, second_order_filter,
    FilterConfig, TapConvention,
};
use crate::image::Image;
use crate::io::write_atomic;
use crate::kernels::{loss_from_kernel_first_order, loss_from_kernel_second_order, ScalarKernel};
use crate::losses::ScalarLoss;
use crate::metrics::{psnr, DEFAULT_PEAK};
use crate::noise::{add_gaussian_noise, NoiseSpec};
use crate::pgm::load_pgm;
use crate::solvers::{solve_gd, solve_heavy_ball, MapProblem, SolverConfig};
use crate::stencil::Stencil;

/// Default sigma grid for the PSNR sweeps.
pub const SIGMA_GRID: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 50.0];
/// Default MAP sigma grid for the Dirichlet figure.
pub const DIRICHLET_GRID: [f64; 6] = [0.05, 0.1, 0.2, 0.35, crate::filters::DIRICHLET_BREAKDOWN_SIGMA, 0.5];
/// Huber threshold and box radius of the Huber-TV experiment.
pub const HUBER_GAMMA: f64 = 5.0;
pub const HUBER_RADIUS: usize = 5;
/// Spatial stencil of the bilateral experiment.
pub const BILATERAL_RADIUS: usize = 5;
pub const BILATERAL_SPATIAL_SIGMA: f64 = 10.0;

#[derive(Debug, Clone)]
pub enum ImageSource {
    Corpus(CorpusImage),
    Path(PathBuf),
    Image(Image),
}

/// How the alpha grid is scanned for the best PSNR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaSearch {
    /// Solve at every grid point.
    Exhaustive,
    /// Golden-section search over grid indices; exact when PSNR is unimodal
    /// in alpha. Unvisited grid points report NaN.
    #[default]
    Unimodal,
}

impl std::str::FromStr for AlphaSearch {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(AlphaSearch::Exhaustive),
            "unimodal" => Ok(AlphaSearch::Unimodal),
            other => Err(invalid(format!("alpha search must be exhaustive or unimodal, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub input: ImageSource,
    /// Side length for corpus images.
    pub size: usize,
    pub noise_sigma: f64,
    /// Sweep grid, strictly increasing.
    pub sigmas: Vec<f64>,
    pub seed: u64,
    /// Range kernel parameter of the bilateral experiment (intensity units).
    pub range_gamma: f64,
    /// Alpha scan `alpha = m sigma^2`, `m` log-spaced on `alpha_span`.
    pub alpha_points: usize,
    pub alpha_span: (f64, f64),
    pub alpha_search: AlphaSearch,
    /// Huber-TV reference solves stop at `reference_rel_tol * (1 / s^2) * range`.
    pub reference_rel_tol: f64,
    /// Bilateral-inversion MAP solves stop at `map_rel_tol * (1 / s^2) * range`.
    pub map_rel_tol: f64,
    /// Signal length of the Dirichlet figure.
    pub dirichlet_n: usize,
    pub solver: SolverConfig,
}

impl ExperimentSpec {
    pub fn new(input: ImageSource) -> Self {
        Self {
            input,
            size: 64,
            noise_sigma: 10.0,
            sigmas: SIGMA_GRID.to_vec(),
            seed: 0,
            range_gamma: 20.0,
            alpha_points: 32,
            alpha_span: (0.1, 10.0),
            alpha_search: AlphaSearch::Unimodal,
            reference_rel_tol: 1e-12,
            map_rel_tol: 1e-6,
            dirichlet_n: 256,
            solver: SolverConfig { momentum: None, objective_log: false, ..SolverConfig::default() },
        }
    }

    pub fn corpus(image: CorpusImage) -> Self {
        Self::new(ImageSource::Corpus(image))
    }

    /// Dirichlet figure defaults (the image source is unused).
    pub fn dirichlet() -> Self {
        Self { sigmas: DIRICHLET_GRID.to_vec(), ..Self::new(ImageSource::Corpus(CorpusImage::Blocks)) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(invalid("sweep grid is empty"));
        }
        if self.sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("sweep grid values must be finite and > 0"));
        }
        if self.sigmas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("sweep grid must be strictly increasing"));
        }
        for t in [self.reference_rel_tol, self.map_rel_tol] {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid("relative tolerances must be finite and >= 0"));
            }
        }
        if self.alpha_points == 0 || !(self.alpha_span.0 > 0.0 && self.alpha_span.1 >= self.alpha_span.0) {
            return Err(invalid("alpha scan needs at least one point on a positive span"));
        }
        NoiseSpec::new(self.noise_sigma, self.seed)?;
        self.solver.validate()
    }

    /// Clean input image.
    pub fn load(&self) -> Result<Image> {
        match &self.input {
            ImageSource::Corpus(c) => Ok(c.generate(self.size, self.seed)),
            ImageSource::Path(p) => {
                let bytes = std::fs::read(p).map_err(|source| crate::Error::Io { path: p.clone(), source })?;
                load_pgm(&bytes)
            }
            ImageSource::Image(img) => Ok(img.clone()),
        }
    }

    fn noisy(&self) -> Result<Image> {
        add_gaussian_noise(&self.load()?, NoiseSpec::new(self.noise_sigma, self.seed)?)
    }

    /// `m` values of the alpha scan.
    pub fn alpha_multipliers(&self) -> Vec<f64> {
        let (lo, hi) = self.alpha_span;
        let n = self.alpha_points;
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub runtime_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaRow {
    pub sigma: f64,
    pub multiplier: f64,
    pub alpha: f64,
    pub psnr_first: f64,
    pub psnr_second: f64,
    pub best_first: bool,
    pub best_second: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: String,
    pub columns: Vec<String>,
    pub timing_columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub alpha_rows: Vec<AlphaRow>,
    /// `key=value` facts about the run (grids, fixed parameters).
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn psnr_first(&self) -> Vec<f64> {
        self.column("psnr_first").unwrap_or_default()
    }

    pub fn psnr_second(&self) -> Vec<f64> {
        self.column("psnr_second").unwrap_or_default()
    }

    /// Row for sweep value `param`, if present.
    pub fn row_at(&self, param: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.values[0] == param)
    }
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn map_sigma(sigma: f64) -> f64 {
    sigma / DEFAULT_PEAK
}

fn solver_for(spec: &ExperimentSpec, rel_tol: f64, s: f64, observed: &Image) -> SolverConfig {
    let grad_tol = spec.solver.grad_tol.unwrap_or(rel_tol / (s * s) * observed.dynamic_range());
    SolverConfig { grad_tol: Some(grad_tol), ..spec.solver }
}

/// Huber-TV: converged MAP estimate against first- and second-order filters.
pub fn run_huber_tv_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let noisy = spec.noisy()?;
    let loss = ScalarLoss::huber(HUBER_GAMMA)?;
    let stencil = Stencil::boxed(HUBER_RADIUS);
    let rows = spec
        .sigmas
        .par_iter()
        .map(|&sigma| {
            let s = map_sigma(sigma);
            let problem = MapProblem::pairwise(noisy.clone(), loss.clone(), stencil.clone(), s)?;
            let t = Instant::now();
            let reference = solve_heavy_ball(&problem, &solver_for(spec, spec.reference_rel_tol, s, &noisy))?;
            let t_ref = ms(t);
            let cfg = FilterConfig::new(s, stencil.clone())?;
            let t = Instant::now();
            let first = first_order_filter(&noisy, &loss, &cfg)?;
            let t_first = ms(t);
            let t = Instant::now();
            let second = second_order_filter(&noisy, &loss, &cfg)?;
            let t_second = ms(t);
            Ok(SweepRow {
                values: vec![
                    sigma,
                    psnr(&first, &reference.solution, DEFAULT_PEAK)?,
                    psnr(&second, &reference.solution, DEFAULT_PEAK)?,
                    reference.iterations as f64,
                    f64::from(u8::from(reference.converged)),
                ],
                runtime_ms: vec![t_ref, t_first, t_second],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        experiment: "huber-tv".into(),
        columns: columns(&["sigma", "psnr_first", "psnr_second", "reference_iterations", "reference_converged"]),
        timing_columns: columns(&["runtime_ms_reference", "runtime_ms_first", "runtime_ms_second"]),
        rows,
        alpha_rows: Vec::new(),
        metadata: vec![
            ("loss".into(), loss.to_string()),
            ("stencil".into(), format!("box radius {HUBER_RADIUS}")),
            ("noise_sigma".into(), spec.noise_sigma.to_string()),
            ("seed".into(), spec.seed.to_string()),
        ],
    })
}

/// Kernel of the bilateral experiment for `family` in {gaussian, boxcar, exponential}.
pub fn bilateral_kernel(family: &str, gamma: f64) -> Result<ScalarKernel> {
    match family {
        "gaussian" => ScalarKernel::gaussian(gamma),
        "boxcar" => ScalarKernel::boxcar(gamma),
        "exponential" => ScalarKernel::exponential(gamma),
        other => Err(invalid(format!("bilateral family must be one of gaussian, boxcar, exponential; got {other:?}"))),
    }
}

fn solve_map(problem: &MapProblem, cfg: &SolverConfig) -> Result<Image> {
    let out = if problem.loss.is_convex() { solve_heavy_ball(problem, cfg)? } else { solve_gd(problem, cfg)? };
    if !out.converged {
        log::debug!("MAP solve stopped at max_iters={} (sigma={})", cfg.max_iters, problem.sigma);
    }
    Ok(out.solution)
}

/// Index of the largest value; ties go to the smaller index, NaN never wins.
fn best_index(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] || v[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Values of `f` on `0..n` (NaN where not evaluated) and the index of the max.
fn grid_argmax(n: usize, mode: AlphaSearch, f: impl Fn(usize) -> Result<f64> + Sync) -> Result<(Vec<f64>, usize)> {
    if mode == AlphaSearch::Exhaustive || n <= 4 {
        let v = (0..n).into_par_iter().map(&f).collect::<Result<Vec<_>>>()?;
        let b = best_index(&v);
        return Ok((v, b));
    }
    let mut v = vec![f64::NAN; n];
    let at = |i: usize, v: &mut Vec<f64>| -> Result<f64> {
        if v[i].is_nan() {
            v[i] = f(i)?;
        }
        Ok(v[i])
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0usize, n - 1);
    while b - a > 3 {
        let span = (b - a) as f64;
        let c = b - (span * inv_phi).round() as usize;
        let d = a + (span * inv_phi).round() as usize;
        let (c, d) = if c < d { (c, d) } else { (a + (b - a) / 3, b - (b - a) / 3) };
        if at(c, &mut v)? >= at(d, &mut v)? {
            b = d;
        } else {
            a = c;
        }
    }
    for i in a..=b {
        at(i, &mut v)?;
    }
    let mut best = a;
    for i in a..=b {
        if v[i] > v[best] {
            best = i;
        }
    }
    Ok((v, best))
}

/// Division-free bilateral (reference, `alpha = s^2`) against MAP solves whose
/// losses come from the kernel by the first- and second-order bridges. Each
/// order scans `alpha' = m s^2` and keeps the best PSNR.
pub fn run_bilateral_inversion_experiment(spec: &ExperimentSpec, family: &str) -> Result<SweepResult> {
    spec.validate()?;
    let kernel = bilateral_kernel(family, spec.range_gamma)?;
    let loss_first = loss_from_kernel_first_order(&kernel)?;
    let loss_second = loss_from_kernel_second_order(&kernel)?;
    let noisy = spec.noisy()?;
    let stencil = Stencil::gaussian(BILATERAL_RADIUS, BILATERAL_SPATIAL_SIGMA)?;
    let multipliers = spec.alpha_multipliers();
    let mut rows = Vec::with_capacity(spec.sigmas.len());
    let mut alpha_rows = Vec::new();
    for &sigma in &spec.sigmas {
        let s = map_sigma(sigma);
        let cfg = FilterConfig::new(s, stencil.clone())?;
        let t = Instant::now();
        let reference = division_free_bilateral(&noisy, &kernel, &cfg)?;
        let t_ref = ms(t);
        let scan = |loss: &ScalarLoss| -> Result<((Vec<f64>, usize), f64)> {
            let t = Instant::now();
            let r = grid_argmax(multipliers.len(), spec.alpha_search, |i| {
                let sp = (multipliers[i] * s * s).sqrt();
                let p = MapProblem::pairwise(noisy.clone(), loss.clone(), stencil.clone(), sp)?;
                psnr(&solve_map(&p, &solver_for(spec, spec.map_rel_tol, sp, &noisy))?, &reference, DEFAULT_PEAK)
            })?;
            Ok((r, ms(t)))
        };
        let ((first, bf), t_first) = scan(&loss_first)?;
        let ((second, bs), t_second) = scan(&loss_second)?;
        for (i, m) in multipliers.iter().enumerate() {
            alpha_rows.push(AlphaRow {
                sigma,
                multiplier: *m,
                alpha: m * s * s,
                psnr_first: first[i],
                psnr_second: second[i],
                best_first: i == bf,
                best_second: i == bs,
            });
        }
        rows.push(SweepRow {
            values: vec![sigma, first[bf], second[bs], multipliers[bf] * s * s, multipliers[bs] * s * s],
            runtime_ms: vec![t_ref, t_first, t_second],
        });
    }
    Ok(SweepResult {
        experiment: format!("bilateral-inversion-{family}"),
        columns: columns(&["sigma", "psnr_first", "psnr_second", "best_alpha_first", "best_alpha_second"]),
        timing_columns: columns(&["runtime_ms_reference", "runtime_ms_first", "runtime_ms_second"]),
        rows,
        alpha_rows,
        metadata: vec![
            ("kernel".into(), kernel.to_string()),
            ("loss_first".into(), loss_first.to_string()),
            ("loss_second".into(), loss_second.to_string()),
            ("stencil".into(), format!("gaussian radius {BILATERAL_RADIUS} spatial_sigma {BILATERAL_SPATIAL_SIGMA}")),
            (
                "alpha_grid".into(),
                format!("{} log-spaced multipliers of sigma^2 on [{}, {}]", spec.alpha_points, spec.alpha_span.0, spec.alpha_span.1),
            ),
            ("alpha_search".into(), format!("{:?}", spec.alpha_search).to_lowercase()),
            ("noise_sigma".into(), spec.noise_sigma.to_string()),
            ("seed".into(), spec.seed.to_string()),
        ],
    })
}

/// Exact against 3-tap Dirichlet filters over the MAP sigma grid.
pub fn run_dirichlet_figure(spec: &ExperimentSpec) -> Result<SweepResult> {
    if spec.sigmas.is_empty() || spec.sigmas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("sweep grid must be non-empty and strictly increasing"));
    }
    let n = spec.dirichlet_n;
    if n < 10 || n % 2 != 0 {
        return Err(invalid(format!("dirichlet_n must be even and >= 10, got {n}")));
    }
    let rows = spec
        .sigmas
        .iter()
        .map(|&s| {
            let t = Instant::now();
            let exact = dirichlet_exact_1d(n, s)?;
            let approx = dirichlet_approx_taps(n, s, TapConvention::Matched)?;
            let mut values = vec![
                s,
                exact.l1_distance(&approx)?,
                approx.frequency_response(n / 2),
                exact.frequency_response(n / 2),
                crate::filters::dirichlet_pole(s),
            ];
            values.extend_from_slice(&exact.taps()[..5]);
            values.extend_from_slice(&approx.taps()[..2]);
            Ok(SweepRow { values, runtime_ms: vec![ms(t)] })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        experiment: "dirichlet".into(),
        columns: columns(&[
            "sigma",
            "l1_distance",
            "nyquist_gain_approx",
            "nyquist_gain_exact",
            "pole",
            "w_exact_0",
            "w_exact_1",
            "w_exact_2",
            "w_exact_3",
            "w_exact_4",
            "w_approx_0",
            "w_approx_1",
        ]),
        timing_columns: columns(&["runtime_ms"]),
        rows,
        alpha_rows: Vec::new(),
        metadata: vec![("n".into(), n.to_string()), ("taps".into(), "[2s^2, 1-4s^2, 2s^2]".into())],
    })
}

/// 17 significant digits; `inf`, `-inf` and `nan` spelled out.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| invalid(format!("csv flush failed: {e}")))
}

/// CSV of the main table.
pub fn to_csv(result: &SweepResult, timings: bool) -> Result<Vec<u8>> {
    let mut header = result.columns.clone();
    if timings {
        header.extend(result.timing_columns.iter().cloned());
    }
    csv_bytes(
        &header,
        result.rows.iter().map(|r| {
            let mut v: Vec<String> = r.values.iter().map(|x| format_value(*x)).collect();
            if timings {
                v.extend(r.runtime_ms.iter().map(|x| format_value(*x)));
            }
            v
        }),
    )
}

/// CSV of the alpha scan of the bilateral experiment.
pub fn alpha_csv(result: &SweepResult) -> Result<Vec<u8>> {
    let header = columns(&["sigma", "alpha_multiplier", "alpha", "psnr_first", "psnr_second", "best_first", "best_second"]);
    csv_bytes(
        &header,
        result.alpha_rows.iter().map(|r| {
            vec![
                format_value(r.sigma),
                format_value(r.multiplier),
                format_value(r.alpha),
                format_value(r.psnr_first),
                format_value(r.psnr_second),
                u8::from(r.best_first).to_string(),
                u8::from(r.best_second).to_string(),
            ]
        }),
    )
}

/// Writes the main table atomically, without runtime columns.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_atomic(path, &to_csv(result, false)?)
}

/// As [`emit_csv`] with the `runtime_ms_*` columns (not byte-reproducible).
pub fn emit_csv_with_timings(result: &SweepResult, path: &Path) -> Result<()> {
    write_atomic(path, &to_csv(result, true)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(image: CorpusImage) -> ExperimentSpec {
        ExperimentSpec { size: 24, sigmas: vec![5.0, 30.0], alpha_points: 5, ..ExperimentSpec::corpus(image) }
    }

    #[test]
    fn spec_validation() {
        let mut s = small(CorpusImage::Ramp);
        assert!(s.validate().is_ok());
        s.sigmas = vec![];
        assert!(s.validate().is_err());
        s.sigmas = vec![2.0, 1.0];
        assert!(s.validate().is_err());
        s.sigmas = vec![1.0, 1.0];
        assert!(s.validate().is_err());
        assert!(bilateral_kernel("cauchy", 1.0).is_err());
    }

    #[test]
    fn alpha_grid() {
        let s = ExperimentSpec::corpus(CorpusImage::Ramp);
        let m = s.alpha_multipliers();
        assert_eq!(m.len(), 32);
        assert!((m[0] - 0.1).abs() < 1e-15 && (m[31] - 10.0).abs() < 1e-12);
        assert!(m.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn best_index_ties_to_smaller() {
        assert_eq!(best_index(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(best_index(&[f64::INFINITY, f64::INFINITY]), 0);
    }

    #[test]
    fn unimodal_search_finds_grid_max() {
        for peak in 0..32 {
            let f = |i: usize| Ok(-((i as f64) - peak as f64).powi(2));
            let (v, b) = grid_argmax(32, AlphaSearch::Unimodal, f).unwrap();
            assert_eq!(b, peak);
            assert!(v.iter().filter(|x| !x.is_nan()).count() <= 12);
        }
        let flat = |_: usize| Ok(1.0);
        assert_eq!(grid_argmax(32, AlphaSearch::Unimodal, flat).unwrap().1, 0);
        assert_eq!(grid_argmax(32, AlphaSearch::Exhaustive, flat).unwrap().1, 0);
    }

    #[test]
    fn unimodal_matches_exhaustive_on_bilateral() {
        let base = ExperimentSpec { alpha_points: 12, sigmas: vec![10.0], ..small(CorpusImage::Blocks) };
        let a = run_bilateral_inversion_experiment(&base, "gaussian").unwrap();
        let b = run_bilateral_inversion_experiment(&ExperimentSpec { alpha_search: AlphaSearch::Exhaustive, ..base }, "gaussian").unwrap();
        assert_eq!(a.rows[0].values, b.rows[0].values);
    }

    #[test]
    fn huber_tv_small() {
        let r = run_huber_tv_experiment(&small(CorpusImage::Blocks)).unwrap();
        assert_eq!(r.rows.len(), 2);
        let (f, s) = (r.psnr_first(), r.psnr_second());
        assert!(f[0] >= s[0] && f[1] >= s[1]);
        assert!(f[0] >= f[1]);
    }

    #[test]
    fn noiseless_tiny_sigma_is_accurate() {
        let spec = ExperimentSpec { noise_sigma: 0.0, sigmas: vec![0.01 * 255.0], ..small(CorpusImage::Sinusoid) };
        let r = run_huber_tv_experiment(&spec).unwrap();
        assert!(r.psnr_first()[0] > 60.0 && r.psnr_second()[0] > 60.0);
    }

    #[test]
    fn bilateral_small_is_deterministic() {
        let spec = small(CorpusImage::Ramp);
        let a = run_bilateral_inversion_experiment(&spec, "boxcar").unwrap();
        let b = run_bilateral_inversion_experiment(&spec, "boxcar").unwrap();
        assert_eq!(to_csv(&a, false).unwrap(), to_csv(&b, false).unwrap());
        assert_eq!(alpha_csv(&a).unwrap(), alpha_csv(&b).unwrap());
        assert_eq!(a.alpha_rows.len(), 10);
        assert_eq!(a.alpha_rows.iter().filter(|r| r.best_first).count(), 2);
        assert!(a.metadata.iter().any(|(k, v)| k == "loss_second" && v.starts_with("huber")));
    }

    #[test]
    fn dirichlet_figure_shape() {
        let r = run_dirichlet_figure(&ExperimentSpec::dirichlet()).unwrap();
        let d = r.column("l1_distance").unwrap();
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        let nyq = r.column("nyquist_gain_approx").unwrap();
        assert!(nyq[4].abs() < 1e-12);
    }

    #[test]
    fn csv_format() {
        let r = run_dirichlet_figure(&ExperimentSpec { sigmas: vec![0.2], ..ExperimentSpec::dirichlet() }).unwrap();
        let text = String::from_utf8(to_csv(&r, false).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), r.columns.join(","));
        assert!(lines.next().unwrap().starts_with("2.0000000000000001e-1,"));
        assert_eq!(format_value(f64::INFINITY), "inf");
        let timed = String::from_utf8(to_csv(&r, true).unwrap()).unwrap();
        assert!(timed.lines().next().unwrap().ends_with(",runtime_ms"));
        assert!(emit_csv(&r, Path::new("")).is_err());
    }

    #[test]
    fn emit_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(CorpusImage::NoiseTexture);
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        emit_csv(&run_huber_tv_experiment(&spec).unwrap(), &p1).unwrap();
        emit_csv(&run_huber_tv_experiment(&spec).unwrap(), &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }
}
