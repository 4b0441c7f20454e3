//! Subcommand bodies. Flags are resolved and validated before any input is
//! read; failures after that point are runtime failures tagged with a stage.

use std::fmt::Display;
use std::path::Path;

use proxkern::experiments::{
    alpha_csv, bilateral_kernel, emit_csv, emit_csv_with_timings, format_value, run_bilateral_inversion_experiment,
    run_dirichlet_figure, run_huber_tv_experiment, ExperimentSpec, ImageSource, DIRICHLET_GRID,
};
use proxkern::filters::{
    dirichlet_approx_taps, dirichlet_exact_1d, division_free_bilateral, first_order_filter, kernel_filter_normalized,
    l2_shrinkage, second_order_filter, TapConvention,
};
use proxkern::graph::{alpha_exact, alpha_mean_degree, build_affinity, frobenius_residual, normalized_filter, self_weight_mismatch};
use proxkern::io::write_atomic;
use proxkern::kernels::{kernel_from_loss_first_order, kernel_from_loss_second_order, loss_from_kernel_first_order, loss_from_kernel_second_order};
use proxkern::solvers::{solve_gd, solve_heavy_ball, trace_csv};
use proxkern::{
    add_gaussian_noise, load_pgm, save_pgm, Boundary, CorpusImage, FilterConfig, Image, MapProblem, NoiseSpec,
    ScalarKernel, ScalarLoss, SolverConfig, Stencil, TranslationScale,
};

use crate::{
    AddNoiseArgs, Command, DenoiseArgs, Direction, ExperimentArgs, ExperimentKind, GraphCheckArgs, Method, OrderArg,
    TranslateArgs,
};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime { stage: &'static str, message: String },
}

trait At<T> {
    fn at(self, stage: &'static str) -> Result<T, Failure>;
    fn usage(self) -> Result<T, Failure>;
}

impl<T, E: Display> At<T> for Result<T, E> {
    fn at(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime { stage, message: e.to_string() })
    }

    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.to_string()))
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

/// Machine-readable summary line on stderr.
fn report(pairs: &[(&str, String)]) {
    let line: Vec<String> = pairs.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!("{}", line.join(" "));
}

pub fn dispatch(cmd: &Command) -> Result<(), Failure> {
    match cmd {
        Command::AddNoise(a) => add_noise(a),
        Command::Denoise(a) => denoise(a),
        Command::Translate(a) => translate(a),
        Command::GraphCheck(a) => graph_check(a),
        Command::Experiment(a) => experiment(a),
    }
}

enum Source {
    Corpus(CorpusImage),
    File(String),
}

impl Source {
    fn parse(s: &str) -> Result<Self, Failure> {
        match s.strip_prefix("corpus:") {
            Some(name) => name.parse().map(Source::Corpus).usage(),
            None => Ok(Source::File(s.to_string())),
        }
    }

    fn load(&self, size: usize, seed: u64) -> Result<Image, Failure> {
        match self {
            Source::Corpus(c) => Ok(c.generate(size, seed)),
            Source::File(p) => {
                let bytes = std::fs::read(p).map_err(|e| format!("{p}: {e}")).at("load")?;
                load_pgm(&bytes).at("load")
            }
        }
    }
}

fn check_size(size: usize) -> Result<(), Failure> {
    if size == 0 {
        return usage("--size must be positive");
    }
    Ok(())
}

fn finite_nonneg(name: &str, v: f64) -> Result<f64, Failure> {
    if !(v.is_finite() && v >= 0.0) {
        return usage(format!("--{name} must be finite and >= 0, got {v}"));
    }
    Ok(v)
}

fn finite_pos(name: &str, v: f64) -> Result<f64, Failure> {
    if !(v.is_finite() && v > 0.0) {
        return usage(format!("--{name} must be finite and > 0, got {v}"));
    }
    Ok(v)
}

/// Adds `gamma=` / `beta=` to a family string when the family takes them and
/// the string does not set them.
fn with_params(family: &str, gamma: Option<f64>, beta: Option<f64>) -> String {
    let name = family.split(':').next().unwrap_or("").trim();
    let takes_gamma = !matches!(name, "quadratic" | "l2" | "dirichlet" | "tv" | "l1" | "constant");
    let mut s = family.to_string();
    let mut add = |key: &str, v: Option<f64>| {
        if let Some(v) = v {
            if !s.contains(&format!("{key}=")) {
                s.push(if s.contains(':') { ',' } else { ':' });
                s.push_str(&format!("{key}={v}"));
            }
        }
    };
    if takes_gamma {
        add("gamma", gamma);
    }
    if name == "barron" {
        add("beta", beta);
    }
    s
}

fn parse_loss(s: Option<&str>, gamma: Option<f64>, beta: Option<f64>, method: &str) -> Result<ScalarLoss, Failure> {
    match s {
        Some(s) => with_params(s, gamma, beta).parse().usage(),
        None => usage(format!("--loss is required for {method}")),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).at("write")
}

fn add_noise(a: &AddNoiseArgs) -> Result<(), Failure> {
    let spec = NoiseSpec::new(finite_nonneg("sigma", a.sigma)?, a.input.seed).usage()?;
    let src = Source::parse(&a.image)?;
    check_size(a.input.size)?;
    let img = src.load(a.input.size, a.input.seed)?;
    let out = add_gaussian_noise(&img, spec).at("noise")?;
    write_output(&a.output, &save_pgm(&out))?;
    report(&[("subcommand", "add-noise".into()), ("sigma", a.sigma.to_string()), ("seed", a.input.seed.to_string())]);
    Ok(())
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Nlm => "nlm",
        Method::BilateralDf => "bilateral-df",
        Method::FirstOrder => "first-order",
        Method::SecondOrder => "second-order",
        Method::L2Shrink => "l2-shrink",
        Method::DirichletExact => "dirichlet-exact",
        Method::DirichletApprox => "dirichlet-approx",
        Method::MapGd => "map-gd",
        Method::MapHeavyBall => "map-heavy-ball",
    }
}

enum Plan {
    Normalized(ScalarKernel, FilterConfig),
    Bilateral(ScalarKernel, FilterConfig),
    First(ScalarLoss, FilterConfig),
    Second(ScalarLoss, FilterConfig),
    L2(f64),
    DirichletExact(f64),
    DirichletApprox(f64, TapConvention),
    Map { loss: ScalarLoss, stencil: Stencil, sigma: f64, cfg: SolverConfig, heavy_ball: bool },
}

fn denoise_plan(a: &DenoiseArgs) -> Result<Plan, Failure> {
    let name = method_name(a.method);
    let scale = finite_pos("sigma-scale", a.sigma_scale)?;
    let sigma = a.sigma.map(|s| finite_nonneg("sigma", s).map(|s| s / scale)).transpose()?;
    let needs_sigma = !matches!(a.method, Method::Nlm | Method::BilateralDf);
    let s = match sigma {
        Some(s) => s,
        None if needs_sigma => return usage(format!("--sigma is required for {name}")),
        None => 0.0,
    };
    let stencil = match a.spatial_sigma {
        Some(ss) => Stencil::gaussian(a.radius, finite_pos("spatial-sigma", ss)?).usage()?,
        None => Stencil::boxed(a.radius),
    };
    let boundary: Boundary = a.boundary.into();
    let filter_cfg = || -> Result<FilterConfig, Failure> {
        Ok(FilterConfig::new(s, stencil.clone()).usage()?.with_boundary(boundary))
    };
    let kernel = || -> Result<ScalarKernel, Failure> { with_params(&a.kernel, a.gamma, None).parse().usage() };
    let positive_sigma = || -> Result<f64, Failure> {
        if s > 0.0 {
            Ok(s)
        } else {
            usage(format!("--sigma must be > 0 for {name}"))
        }
    };
    Ok(match a.method {
        Method::Nlm => Plan::Normalized(kernel()?, filter_cfg()?.with_patch_radius(a.patch_radius)),
        Method::BilateralDf => {
            let alpha = match (a.alpha, sigma) {
                (Some(al), _) => finite_nonneg("alpha", al)?,
                (None, Some(s)) => s * s,
                (None, None) => return usage("bilateral-df needs --alpha or --sigma"),
            };
            Plan::Bilateral(kernel()?, filter_cfg()?.with_alpha(alpha).usage()?)
        }
        Method::FirstOrder => Plan::First(parse_loss(a.loss.as_deref(), a.gamma, a.beta, name)?, filter_cfg()?),
        Method::SecondOrder => Plan::Second(parse_loss(a.loss.as_deref(), a.gamma, a.beta, name)?, filter_cfg()?),
        Method::L2Shrink => Plan::L2(s),
        Method::DirichletExact => Plan::DirichletExact(positive_sigma()?),
        Method::DirichletApprox => {
            let conv = if a.halved_taps { TapConvention::Halved } else { TapConvention::Matched };
            Plan::DirichletApprox(s, conv)
        }
        Method::MapGd | Method::MapHeavyBall => {
            let cfg = SolverConfig {
                max_iters: a.solver.max_iters,
                step: a.solver.step,
                momentum: a.solver.momentum.0,
                grad_tol: a.solver.grad_tol,
                objective_log: true,
            };
            cfg.validate().usage()?;
            Plan::Map {
                loss: parse_loss(a.loss.as_deref(), a.gamma, a.beta, name)?,
                stencil: stencil.clone(),
                sigma: positive_sigma()?,
                cfg,
                heavy_ball: a.method == Method::MapHeavyBall,
            }
        }
    })
}

fn denoise(a: &DenoiseArgs) -> Result<(), Failure> {
    let plan = denoise_plan(a)?;
    let src = Source::parse(&a.image)?;
    check_size(a.input.size)?;
    let img = src.load(a.input.size, a.input.seed)?;
    let mut extra: Vec<(&str, String)> = Vec::new();
    let out = match plan {
        Plan::Normalized(k, cfg) => kernel_filter_normalized(&img, &k, &cfg).at("filter")?,
        Plan::Bilateral(k, cfg) => division_free_bilateral(&img, &k, &cfg).at("filter")?,
        Plan::First(loss, cfg) => first_order_filter(&img, &loss, &cfg).at("filter")?,
        Plan::Second(loss, cfg) => second_order_filter(&img, &loss, &cfg).at("filter")?,
        Plan::L2(s) => l2_shrinkage(&img, s),
        Plan::DirichletExact(s) => dirichlet_exact_1d(img.width(), s).and_then(|f| f.apply_rows(&img)).at("filter")?,
        Plan::DirichletApprox(s, conv) => {
            dirichlet_approx_taps(img.width(), s, conv).and_then(|f| f.apply_rows(&img)).at("filter")?
        }
        Plan::Map { loss, stencil, sigma, cfg, heavy_ball } => {
            let boundary: Boundary = a.boundary.into();
            let problem = MapProblem::pairwise(img.clone(), loss, stencil, sigma).at("setup")?.with_boundary(boundary);
            let outcome = if heavy_ball { solve_heavy_ball(&problem, &cfg) } else { solve_gd(&problem, &cfg) }.at("solve")?;
            if let Some(p) = &a.trace {
                write_output(p, &trace_csv(&outcome.trace).at("write")?)?;
            }
            extra.push(("iterations", outcome.iterations.to_string()));
            extra.push(("converged", outcome.converged.to_string()));
            extra.push(("step", format_value(outcome.step)));
            extra.push(("momentum", format_value(outcome.momentum)));
            log::info!("solver stopped after {} gradient evaluations", outcome.iterations);
            outcome.solution
        }
    };
    write_output(&a.output, &save_pgm(&out))?;
    let mut pairs = vec![("subcommand", "denoise".to_string()), ("method", method_name(a.method).to_string())];
    pairs.extend(extra);
    report(&pairs);
    Ok(())
}

fn translate(a: &TranslateArgs) -> Result<(), Failure> {
    if a.points < 2 {
        return usage("--points must be at least 2");
    }
    let scale = match (a.sigma, a.alpha) {
        (None, None) => TranslationScale::unit(),
        (Some(s), Some(al)) => TranslationScale::new(s, al, a.h).usage()?,
        _ => return usage("--sigma and --alpha must be given together"),
    };
    let first = a.order != OrderArg::Second;
    let second = a.order != OrderArg::First;
    type Column = Box<dyn Fn(f64) -> f64>;
    let nan: fn(f64) -> f64 = |_| f64::NAN;
    let (hint, k1, k2, r1, r2): (f64, Column, Column, Column, Column) = match a.direction {
        Direction::LossToKernel => {
            if a.kernel.is_some() {
                return usage("loss-to-kernel takes --loss, not --kernel");
            }
            let loss = parse_loss(a.loss.as_deref(), a.gamma, a.beta, "loss-to-kernel")?;
            let kf = kernel_from_loss_first_order(&loss, scale);
            let ks = kernel_from_loss_second_order(&loss, scale);
            let (l1, l2) = (loss.clone(), loss.clone());
            (
                loss.scale_hint(),
                if first { Box::new(move |t| kf.eval(t)) } else { Box::new(nan) },
                if second { Box::new(move |t| ks.eval(t)) } else { Box::new(nan) },
                if first { Box::new(move |t| l1.rho(t)) } else { Box::new(nan) },
                if second { Box::new(move |t| l2.rho(t)) } else { Box::new(nan) },
            )
        }
        Direction::KernelToLoss => {
            if a.loss.is_some() {
                return usage("kernel-to-loss takes --kernel, not --loss");
            }
            let Some(ks) = &a.kernel else { return usage("--kernel is required for kernel-to-loss") };
            let k: ScalarKernel = with_params(ks, a.gamma, None).parse().usage()?;
            let f = scale.factor();
            let lf = if first { Some(loss_from_kernel_first_order(&k).at("translate")?) } else { None };
            let ls = if second { Some(loss_from_kernel_second_order(&k).at("translate")?) } else { None };
            let (ka, kb) = (k.clone(), k.clone());
            (
                k.scale_hint(),
                if first { Box::new(move |t| ka.eval(t)) } else { Box::new(nan) },
                if second { Box::new(move |t| kb.eval(t)) } else { Box::new(nan) },
                match lf {
                    Some(l) => Box::new(move |t| l.rho(t) / f),
                    None => Box::new(nan),
                },
                match ls {
                    Some(l) => Box::new(move |t| l.rho(t) / f),
                    None => Box::new(nan),
                },
            )
        }
    };
    let t_max = finite_pos("t-max", a.t_max.unwrap_or(10.0 * hint))?;
    let mut csv = String::from("t,k_first,k_second,rho_first,rho_second\n");
    for i in 0..a.points {
        let t = t_max * i as f64 / (a.points - 1) as f64;
        let row = [t, k1(t), k2(t), r1(t), r2(t)].map(format_value);
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    match &a.out {
        Some(p) => write_output(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    report(&[("subcommand", "translate".into()), ("points", a.points.to_string())]);
    Ok(())
}

fn graph_check(a: &GraphCheckArgs) -> Result<(), Failure> {
    let kernel: ScalarKernel = with_params(&a.kernel, a.gamma, None).parse().usage()?;
    let scale = finite_pos("sigma-scale", a.sigma_scale)?;
    let sigma = a.sigma.map(|s| finite_pos("sigma", s).map(|s| s / scale)).transpose()?;
    let src = Source::parse(&a.image)?;
    check_size(a.size)?;
    let img = src.load(a.size, a.seed)?;
    let stencil = Stencil::boxed(a.radius);
    let aff = build_affinity(&img, &kernel, &stencil, a.patch_radius).at("affinity")?;
    let bundle = normalized_filter(&aff);
    let exact = alpha_exact(&aff).unwrap_or(f64::NAN);
    let mean = alpha_mean_degree(&aff);
    let row_sum = bundle.filter.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
    let null_norm = bundle.normalized.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    let null_unnorm = bundle.unnormalized.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max);
    let mismatch = sigma.map_or(f64::NAN, |s| self_weight_mismatch(&aff, exact, s, &stencil));
    let residual_exact = if exact.is_nan() { f64::NAN } else { frobenius_residual(&aff, exact) };
    let values = [
        aff.n() as f64,
        exact,
        mean,
        (exact - mean).abs() / exact,
        residual_exact,
        frobenius_residual(&aff, mean),
        row_sum,
        null_norm,
        null_unnorm,
        mismatch,
    ];
    let mut csv = String::from(
        "n,alpha_exact,alpha_mean_degree,alpha_rel_gap,residual_exact,residual_mean_degree,\
         row_sum_error,null_space_error_normalized,null_space_error_unnormalized,self_weight_mismatch\n",
    );
    csv.push_str(&values.map(format_value).join(","));
    csv.push('\n');
    match &a.out {
        Some(p) => write_output(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    report(&[("subcommand", "graph-check".into()), ("n", aff.n().to_string())]);
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<(), Failure> {
    let input = match Source::parse(&a.image)? {
        Source::Corpus(c) => ImageSource::Corpus(c),
        Source::File(p) => ImageSource::Path(p.into()),
    };
    check_size(a.size)?;
    let mut spec = ExperimentSpec::new(input);
    spec.size = a.size;
    spec.seed = a.seed;
    spec.noise_sigma = a.noise_sigma;
    spec.range_gamma = finite_pos("range-gamma", a.range_gamma)?;
    spec.alpha_points = a.alpha_points;
    spec.alpha_search = a.alpha_search;
    spec.dirichlet_n = a.dirichlet_n;
    spec.solver.max_iters = a.max_iters;
    if !a.sigmas.is_empty() {
        spec.sigmas = a.sigmas.clone();
    } else if a.kind == ExperimentKind::Dirichlet {
        spec.sigmas = DIRICHLET_GRID.to_vec();
    }
    spec.validate().usage()?;
    if a.kind == ExperimentKind::BilateralInversion {
        bilateral_kernel(&a.family, 1.0).usage()?;
    }
    if a.alpha_out.is_some() && a.kind != ExperimentKind::BilateralInversion {
        return usage("--alpha-out applies to bilateral-inversion only");
    }
    let (name, result) = match a.kind {
        ExperimentKind::HuberTv => ("huber-tv", run_huber_tv_experiment(&spec)),
        ExperimentKind::BilateralInversion => ("bilateral-inversion", run_bilateral_inversion_experiment(&spec, &a.family)),
        ExperimentKind::Dirichlet => ("dirichlet", run_dirichlet_figure(&spec)),
    };
    let result = result.at("run")?;
    if a.timings { emit_csv_with_timings(&result, &a.out) } else { emit_csv(&result, &a.out) }.at("write")?;
    if let Some(p) = &a.alpha_out {
        write_output(p, &alpha_csv(&result).at("write")?)?;
    }
    for (k, v) in &result.metadata {
        log::info!("{k}: {v}");
    }
    report(&[("subcommand", "experiment".into()), ("experiment", name.into()), ("rows", result.rows.len().to_string())]);
    Ok(())
}
