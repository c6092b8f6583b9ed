//! Monte Carlo route: Euler paths, least-squares backward induction, the
//! closed-form estimator for linear generators, and the coupling and
//! continuous-dependence experiments.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::expr::{EvalError, Expr};
use crate::linalg::solve_dense;
use crate::model::{DiffusionSpec, GeneratorSpec, PayoffSpec, ProblemSpec, StateDomain};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub basis_degree: usize,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            n_steps: 100,
            seed: 42,
            basis_degree: 4,
            antithetic: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_paths < 2 || self.n_steps < 1 || self.basis_degree < 1 {
            return Err(Error::InvalidSpec(
                "need n_paths >= 2, n_steps >= 1, basis_degree >= 1".into(),
            ));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(Error::InvalidSpec(
                "antithetic sampling needs an even path count".into(),
            ));
        }
        Ok(())
    }
}

/// Simulated forward paths, stored step-major: state `(k, p)` lives at
/// `k * n_paths + p`, increment `(k, p)` likewise with `k < n_steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub increments: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub log_scheme: bool,
}

impl PathEnsemble {
    #[inline]
    pub fn state(&self, step: usize, path: usize) -> f64 {
        self.states[step * self.n_paths + path]
    }

    #[inline]
    pub fn increment(&self, step: usize, path: usize) -> f64 {
        self.increments[step * self.n_paths + path]
    }

    pub fn step_states(&self, step: usize) -> &[f64] {
        &self.states[step * self.n_paths..(step + 1) * self.n_paths]
    }

    pub fn step_increments(&self, step: usize) -> &[f64] {
        &self.increments[step * self.n_paths..(step + 1) * self.n_paths]
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Brownian increments for `cfg`, step-major. Path `p` draws from stream `p`
/// of the master seed (antithetic pairs share stream `p / 2`, the odd member
/// negated), so adding paths never changes existing ones.
pub fn brownian_increments(cfg: &McConfig, dt: f64) -> Vec<f64> {
    let (np, ns) = (cfg.n_paths, cfg.n_steps);
    let mut out = vec![0.0; np * ns];
    let sd = libm::sqrt(dt);
    let mut p = 0;
    while p < np {
        let stream = if cfg.antithetic { (p / 2) as u64 } else { p as u64 };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        for k in 0..ns {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[k * np + p] = sd * z;
            if cfg.antithetic {
                out[k * np + p + 1] = -sd * z;
            }
        }
        p += if cfg.antithetic { 2 } else { 1 };
    }
    out
}

/// True when `mu/x` and `sigma/x` stay bounded over a wide range of `x`,
/// i.e. the log-state recursion is well posed.
pub fn log_scheme_applies(d: &DiffusionSpec, horizon: f64) -> bool {
    if d.domain != StateDomain::PositiveHalfline {
        return false;
    }
    let x0 = d.x0;
    let ratio_max = |lo: f64, hi: f64| -> Option<f64> {
        let mut m = 0.0f64;
        for i in 0..=8 {
            let t = horizon * i as f64 / 8.0;
            for j in 0..=64 {
                let x = lo * libm::pow(hi / lo, j as f64 / 64.0);
                let a = d.mu_at(t, x).ok()? / x;
                let b = d.sigma_at(t, x).ok()? / x;
                m = m.max(libm::fabs(a)).max(libm::fabs(b));
            }
        }
        Some(m)
    };
    match (
        ratio_max(x0 * libm::exp(-1.0), x0 * libm::exp(1.0)),
        ratio_max(1e-4 * x0, 1e4 * x0),
    ) {
        (Some(core), Some(wide)) => wide <= 10.0 * core + 1e-12,
        _ => false,
    }
}

/// Floor for Euler paths on the half-line, relative to `x0`.
pub const HALFLINE_FLOOR: f64 = 1e-8;

pub fn simulate_forward(d: &DiffusionSpec, horizon: f64, cfg: &McConfig) -> Result<PathEnsemble, Error> {
    cfg.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidSpec("horizon must be positive".into()));
    }
    let dt = horizon / cfg.n_steps as f64;
    let increments = brownian_increments(cfg, dt);
    simulate_with_increments(d, horizon, cfg, increments)
}

/// Euler scheme driven by given increments (common random numbers).
pub fn simulate_with_increments(
    d: &DiffusionSpec,
    horizon: f64,
    cfg: &McConfig,
    increments: Vec<f64>,
) -> Result<PathEnsemble, Error> {
    let (np, ns) = (cfg.n_paths, cfg.n_steps);
    let dt = horizon / ns as f64;
    let times: Vec<f64> = (0..=ns)
        .map(|k| if k == ns { horizon } else { k as f64 * dt })
        .collect();
    let log_scheme = log_scheme_applies(d, horizon);
    let floor = HALFLINE_FLOOR * d.x0;
    let mut states = vec![0.0; np * (ns + 1)];
    states[..np].iter_mut().for_each(|s| *s = d.x0);
    for k in 0..ns {
        let t = times[k];
        let (done, rest) = states.split_at_mut((k + 1) * np);
        let cur = &done[k * np..];
        let next = &mut rest[..np];
        let inc = &increments[k * np..(k + 1) * np];
        for p in 0..np {
            let x = cur[p];
            let bad = |_: EvalError| Error::NonFinitePath { step: k, path: p };
            let m = d.mu_at(t, x).map_err(bad)?;
            let s = d.sigma_at(t, x).map_err(bad)?;
            let v = if log_scheme {
                let (a, b) = (m / x, s / x);
                x * libm::exp((a - 0.5 * b * b) * dt + b * inc[p])
            } else {
                let v = x + m * dt + s * inc[p];
                if d.domain == StateDomain::PositiveHalfline {
                    v.max(floor)
                } else {
                    v
                }
            };
            if !v.is_finite() {
                return Err(Error::NonFinitePath { step: k + 1, path: p });
            }
            next[p] = v;
        }
    }
    Ok(PathEnsemble {
        times,
        states,
        increments,
        n_paths: np,
        n_steps: ns,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
        log_scheme,
    })
}

/// Regression of a response on standardized monomials of the state.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StepRegression {
    pub center: f64,
    pub scale: f64,
    pub y_coef: Vec<f64>,
    pub z_coef: Vec<f64>,
    /// True when the design was degenerate and the mean was used instead.
    pub mean_fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BsdeEstimate {
    pub y0_mean: f64,
    pub y0_stderr: f64,
    pub z0_mean: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub regressions: Vec<StepRegression>,
}

fn mean_stderr(values: &[f64], antithetic: bool) -> (f64, f64) {
    if antithetic {
        let pairs: Vec<f64> = values.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        mean_stderr(&pairs, false)
    } else {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, libm::sqrt(var / n))
    }
}

struct Design {
    center: f64,
    scale: f64,
    degree: usize,
    /// Row-major `n_paths x (degree + 1)` basis values.
    basis: Vec<f64>,
    gram: Option<Vec<f64>>,
}

impl Design {
    fn new(x: &[f64], degree: usize) -> Design {
        let n = x.len() as f64;
        let center = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - center) * (v - center)).sum::<f64>() / n;
        let scale = libm::sqrt(var);
        let cols = degree + 1;
        let degenerate = !(scale > 1e-12 * (1.0 + libm::fabs(center)));
        if degenerate {
            return Design {
                center,
                scale: 0.0,
                degree,
                basis: Vec::new(),
                gram: None,
            };
        }
        let mut basis = vec![0.0; x.len() * cols];
        for (p, v) in x.iter().enumerate() {
            let s = (v - center) / scale;
            let row = &mut basis[p * cols..(p + 1) * cols];
            let mut m = 1.0;
            for c in row.iter_mut() {
                *c = m;
                m *= s;
            }
        }
        let mut gram = vec![0.0; cols * cols];
        for row in basis.chunks(cols) {
            for i in 0..cols {
                for j in i..cols {
                    gram[i * cols + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..cols {
            for j in 0..i {
                gram[i * cols + j] = gram[j * cols + i];
            }
        }
        Design {
            center,
            scale,
            degree,
            basis,
            gram: Some(gram),
        }
    }

    /// Least-squares coefficients, or `None` for a degenerate design.
    fn fit(&self, response: &[f64]) -> Option<Vec<f64>> {
        let gram = self.gram.as_ref()?;
        let cols = self.degree + 1;
        let mut rhs = vec![0.0; cols];
        for (row, r) in self.basis.chunks(cols).zip(response) {
            for i in 0..cols {
                rhs[i] += row[i] * r;
            }
        }
        solve_dense(gram, &rhs, cols, 1e-13)
    }

    #[inline]
    fn predict(&self, coef: &[f64], p: usize) -> f64 {
        let cols = self.degree + 1;
        let row = &self.basis[p * cols..(p + 1) * cols];
        row.iter().zip(coef).map(|(a, b)| a * b).sum()
    }
}

/// Least-squares Monte Carlo for `dY = -g(t,X,Y,Z) dt + Z dB`, `Y_T = phi(X_T)`.
///
/// Pathwise values are propagated as `Y_k = Y_{k+1} + g(t_k, X_k, Yhat_k, Zhat_k) dt`,
/// where `Yhat_k` regresses `Y_{k+1}` and `Zhat_k` regresses
/// `(Y_{k+1} - Yhat_k) dB_k / dt` on monomials of `X_k`.
pub fn solve_bsde_lsmc(
    paths: &PathEnsemble,
    g: &GeneratorSpec,
    phi: &PayoffSpec,
    cfg: &McConfig,
) -> Result<BsdeEstimate, Error> {
    let (y, regressions, z0_mean) = backward_induction(paths, g, phi, cfg)?;
    let (y0_mean, y0_stderr) = mean_stderr(&y, paths.antithetic);
    Ok(BsdeEstimate {
        y0_mean,
        y0_stderr,
        z0_mean,
        n_paths: paths.n_paths,
        n_steps: paths.n_steps,
        seed: paths.seed,
        regressions,
    })
}

/// Pathwise time-0 values, per-step regressions and the time-0 `Z` estimate.
fn backward_induction(
    paths: &PathEnsemble,
    g: &GeneratorSpec,
    phi: &PayoffSpec,
    cfg: &McConfig,
) -> Result<(Vec<f64>, Vec<StepRegression>, f64), Error> {
    let np = paths.n_paths;
    let ns = paths.n_steps;
    if cfg.n_paths != np || cfg.n_steps != ns {
        return Err(Error::InvalidSpec("ensemble does not match the configuration".into()));
    }
    let dt = paths.dt();
    let mut y: Vec<f64> = Vec::with_capacity(np);
    for (p, x) in paths.step_states(ns).iter().enumerate() {
        y.push(phi.eval(*x).map_err(|_| Error::NonFinitePath { step: ns, path: p })?);
    }
    let mut yhat = vec![0.0; np];
    let mut zhat = vec![0.0; np];
    let mut regressions = Vec::with_capacity(ns);
    for k in (0..ns).rev() {
        let t = paths.times[k];
        let x = paths.step_states(k);
        let db = paths.step_increments(k);
        let design = Design::new(x, cfg.basis_degree);
        let ycoef = design.fit(&y);
        match &ycoef {
            Some(c) => (0..np).for_each(|p| yhat[p] = design.predict(c, p)),
            None => {
                let m = y.iter().sum::<f64>() / np as f64;
                yhat.iter_mut().for_each(|v| *v = m);
            }
        }
        for p in 0..np {
            zhat[p] = (y[p] - yhat[p]) * db[p] / dt;
        }
        let zcoef = design.fit(&zhat);
        match &zcoef {
            Some(c) => (0..np).for_each(|p| zhat[p] = design.predict(c, p)),
            None => {
                let m = zhat.iter().sum::<f64>() / np as f64;
                zhat.iter_mut().for_each(|v| *v = m);
            }
        }
        for p in 0..np {
            let gv = g
                .eval(t, x[p], yhat[p], zhat[p])
                .map_err(|_| Error::NonFinitePath { step: k, path: p })?;
            y[p] += gv * dt;
            if !y[p].is_finite() {
                return Err(Error::NonFinitePath { step: k, path: p });
            }
        }
        regressions.push(StepRegression {
            center: design.center,
            scale: design.scale,
            mean_fallback: ycoef.is_none() || zcoef.is_none(),
            y_coef: ycoef.unwrap_or_default(),
            z_coef: zcoef.unwrap_or_default(),
        });
    }
    regressions.reverse();
    let z0 = zhat.iter().sum::<f64>() / np as f64;
    Ok((y, regressions, z0))
}

/// Simulates and solves one problem.
pub fn estimate(p: &ProblemSpec, cfg: &McConfig) -> Result<BsdeEstimate, Error> {
    estimate_parts(&p.diffusion, p.horizon, &p.generator, &p.payoff, cfg)
}

pub fn estimate_parts(
    d: &DiffusionSpec,
    horizon: f64,
    g: &GeneratorSpec,
    phi: &PayoffSpec,
    cfg: &McConfig,
) -> Result<BsdeEstimate, Error> {
    let paths = simulate_forward(d, horizon, cfg)?;
    solve_bsde_lsmc(&paths, g, phi, cfg)
}

/// Coefficients of a linear generator `g = a x + b y + c z + k`, each a
/// function of `(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearCoefficients {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub k: Expr,
}

fn bounded_on(e: &Expr, d: &DiffusionSpec, horizon: f64) -> bool {
    let x0 = d.x0;
    let sample = |half: f64| -> Option<f64> {
        let mut m = 0.0f64;
        for i in 0..=8 {
            let t = horizon * i as f64 / 8.0;
            for j in 0..=64 {
                let u = j as f64 / 64.0;
                let x = match d.domain {
                    StateDomain::PositiveHalfline => x0 * libm::exp(half * (2.0 * u - 1.0)),
                    StateDomain::WholeLine => x0 + (1.0 + libm::fabs(x0)) * half * (2.0 * u - 1.0),
                };
                m = m.max(libm::fabs(e.eval_at(t, x, 0.0, 0.0).ok()?));
            }
        }
        Some(m)
    };
    match (sample(1.0), sample(8.0)) {
        (Some(core), Some(wide)) => wide <= 10.0 * core + 1e-12,
        _ => false,
    }
}

/// Closed-form estimator for linear generators:
/// `Y_0 = E[Gamma_T phi(X_T) + int_0^T (a X + k) Gamma ds]` with
/// `d log Gamma = (b - c^2/2) dt + c dB`, `Gamma_0 = 1`.
pub fn linear_bsde_closed_form(
    d: &DiffusionSpec,
    coef: &LinearCoefficients,
    phi: &PayoffSpec,
    horizon: f64,
    cfg: &McConfig,
) -> Result<BsdeEstimate, Error> {
    for (name, e) in [("a", &coef.a), ("b", &coef.b), ("c", &coef.c)] {
        if !bounded_on(e, d, horizon) {
            return Err(Error::InvalidSpec(alloc::format!(
                "coefficient {name} is not bounded on the sampled range"
            )));
        }
    }
    let paths = simulate_forward(d, horizon, cfg)?;
    let np = paths.n_paths;
    let dt = paths.dt();
    let mut log_gamma = vec![0.0; np];
    let mut running = vec![0.0; np];
    for k in 0..paths.n_steps {
        let t = paths.times[k];
        let x = paths.step_states(k);
        let db = paths.step_increments(k);
        for p in 0..np {
            let bad = |_: EvalError| Error::NonFinitePath { step: k, path: p };
            let a = coef.a.eval_at(t, x[p], 0.0, 0.0).map_err(bad)?;
            let b = coef.b.eval_at(t, x[p], 0.0, 0.0).map_err(bad)?;
            let c = coef.c.eval_at(t, x[p], 0.0, 0.0).map_err(bad)?;
            let kk = coef.k.eval_at(t, x[p], 0.0, 0.0).map_err(bad)?;
            let gamma = libm::exp(log_gamma[p]);
            running[p] += (a * x[p] + kk) * gamma * dt;
            log_gamma[p] += (b - 0.5 * c * c) * dt + c * db[p];
        }
    }
    let xt = paths.step_states(paths.n_steps);
    let mut values = Vec::with_capacity(np);
    for p in 0..np {
        let v = libm::exp(log_gamma[p])
            * phi.eval(xt[p]).map_err(|_| Error::NonFinitePath {
                step: paths.n_steps,
                path: p,
            })?
            + running[p];
        if !v.is_finite() {
            return Err(Error::NonFinitePath {
                step: paths.n_steps,
                path: p,
            });
        }
        values.push(v);
    }
    let (y0_mean, y0_stderr) = mean_stderr(&values, paths.antithetic);
    Ok(BsdeEstimate {
        y0_mean,
        y0_stderr,
        z0_mean: f64::NAN,
        n_paths: np,
        n_steps: paths.n_steps,
        seed: paths.seed,
        regressions: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CouplingResult {
    pub violation_fraction: f64,
    pub violations: usize,
    pub pairs: usize,
    pub max_violation: f64,
}

/// Simulates from `x_lo` and `x_hi` with the same increments and counts
/// `(path, step)` pairs where the order of the states is reversed.
pub fn monotone_coupling_check(
    d: &DiffusionSpec,
    x_lo: f64,
    x_hi: f64,
    horizon: f64,
    cfg: &McConfig,
) -> Result<CouplingResult, Error> {
    if !(x_lo <= x_hi) {
        return Err(Error::InvalidSpec("need x_lo <= x_hi".into()));
    }
    cfg.validate()?;
    let dt = horizon / cfg.n_steps as f64;
    let inc = brownian_increments(cfg, dt);
    let lo = DiffusionSpec { x0: x_lo, ..d.clone() };
    let hi = DiffusionSpec { x0: x_hi, ..d.clone() };
    let a = simulate_with_increments(&lo, horizon, cfg, inc.clone())?;
    let b = simulate_with_increments(&hi, horizon, cfg, inc)?;
    let mut violations = 0;
    let mut max_violation = 0.0f64;
    for (l, h) in a.states.iter().zip(&b.states) {
        if h < l {
            violations += 1;
            max_violation = max_violation.max(l - h);
        }
    }
    let pairs = a.states.len();
    Ok(CouplingResult {
        violation_fraction: violations as f64 / pairs as f64,
        violations,
        pairs,
        max_violation,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DependenceRow {
    pub size: f64,
    pub y0_base: f64,
    pub y0_perturbed: f64,
    pub mean_sq_diff: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DependenceTable {
    pub rows: Vec<DependenceRow>,
    /// Least-squares slope of `log(mean_sq_diff)` against `log(size)`.
    pub trend_slope: Option<f64>,
    pub strictly_decreasing: bool,
}

/// Pathwise LSMC values at time 0, one per path.
fn pathwise_y0(p: &ProblemSpec, cfg: &McConfig, inc: &[f64]) -> Result<(Vec<f64>, f64), Error> {
    let paths = simulate_with_increments(&p.diffusion, p.horizon, cfg, inc.to_vec())?;
    let (y, _, _) = backward_induction(&paths, &p.generator, &p.payoff, cfg)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    Ok((y, mean))
}

/// Estimates `E|Y_{n,0} - Y_0|^2` for each perturbed problem against the
/// base, all driven by the same Brownian increments.
pub fn continuous_dependence_experiment(
    base: &ProblemSpec,
    perturbed: &[(f64, ProblemSpec)],
    cfg: &McConfig,
) -> Result<DependenceTable, Error> {
    cfg.validate()?;
    let dt = base.horizon / cfg.n_steps as f64;
    let inc = brownian_increments(cfg, dt);
    let (yb, mb) = pathwise_y0(base, cfg, &inc)?;
    let mut rows = Vec::with_capacity(perturbed.len());
    for (size, p) in perturbed {
        if (p.horizon - base.horizon).abs() > 0.0 {
            return Err(Error::InvalidSpec("perturbed problems must share the horizon".into()));
        }
        let (yn, mn) = pathwise_y0(p, cfg, &inc)?;
        let sq: Vec<f64> = yn.iter().zip(&yb).map(|(a, b)| (a - b) * (a - b)).collect();
        let (mean_sq_diff, stderr) = mean_stderr(&sq, cfg.antithetic);
        rows.push(DependenceRow {
            size: *size,
            y0_base: mb,
            y0_perturbed: mn,
            mean_sq_diff,
            stderr,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.size > 0.0 && r.mean_sq_diff > 0.0)
        .map(|r| (libm::log(r.size), libm::log(r.mean_sq_diff)))
        .collect();
    let trend_slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    let strictly_decreasing = rows.windows(2).all(|w| w[1].mean_sq_diff < w[0].mean_sq_diff);
    Ok(DependenceTable {
        rows,
        trend_slope,
        strictly_decreasing,
    })
}
