//! Finite-difference solver for the semilinear backward equation
//!
//! ```text
//! u_t + mu u_x + 1/2 sigma^2 u_xx + g(t, x, u, sigma u_x) = 0,   u(T, x) = phi(x)
//! ```
//!
//! The linear part is implicit, `g` is explicit at the previously computed
//! layer, so each step costs one tridiagonal solve.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, Var};
use crate::linalg::thomas;
use crate::model::{ProblemSpec, StateDomain};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Spacing {
    Uniform,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    /// Linear extrapolation from the two nearest interior nodes.
    SecondDerivativeZero,
    /// Boundary values frozen at the payoff.
    DirichletPayoff,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub nt: usize,
    pub spacing: Spacing,
    pub boundary: Boundary,
}

/// Parameters for the automatic grid.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridOptions {
    /// Half-width of the truncated domain in units of `sigma_bar sqrt(T)`.
    pub l: f64,
    pub nx: usize,
    pub nt: usize,
    pub boundary: Boundary,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            l: 5.0,
            nx: 401,
            nt: 400,
            boundary: Boundary::SecondDerivativeZero,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), Error> {
        let ok = self.x_min.is_finite()
            && self.x_max.is_finite()
            && self.x_min < self.x_max
            && self.nx >= 3
            && self.nt >= 1
            && (self.spacing == Spacing::Uniform || self.x_min > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(alloc::format!("bad grid {self:?}")))
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.nx - 1;
        match self.spacing {
            Spacing::Uniform => {
                let h = (self.x_max - self.x_min) / n as f64;
                (0..self.nx)
                    .map(|i| if i == n { self.x_max } else { self.x_min + i as f64 * h })
                    .collect()
            }
            Spacing::Log => {
                let (a, b) = (libm::log(self.x_min), libm::log(self.x_max));
                let h = (b - a) / n as f64;
                (0..self.nx)
                    .map(|i| match i {
                        0 => self.x_min,
                        _ if i == n => self.x_max,
                        _ => libm::exp(a + i as f64 * h),
                    })
                    .collect()
            }
        }
    }

    /// Automatic grid for one problem.
    pub fn for_problem(p: &ProblemSpec, opts: &GridOptions) -> Result<GridSpec, Error> {
        GridSpec::covering(&[p], opts)
    }

    /// Smallest automatic grid covering every problem, so that paired
    /// solves share nodes.
    pub fn covering(problems: &[&ProblemSpec], opts: &GridOptions) -> Result<GridSpec, Error> {
        let first = problems
            .first()
            .ok_or_else(|| Error::InvalidSpec("no problem to grid".into()))?;
        let domain = first.diffusion.domain;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in problems {
            if p.diffusion.domain != domain {
                return Err(Error::InvalidSpec("problems disagree on the state domain".into()));
            }
            let (a, b) = truncation_range(p, opts.l)?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        let spacing = match domain {
            StateDomain::PositiveHalfline => Spacing::Log,
            StateDomain::WholeLine => Spacing::Uniform,
        };
        let g = GridSpec {
            x_min: lo,
            x_max: hi,
            nx: opts.nx,
            nt: opts.nt,
            spacing,
            boundary: opts.boundary,
        };
        g.validate()?;
        Ok(g)
    }
}

/// `[x0 e^{-w}, x0 e^{w}]` on the half-line, `[x0 - w, x0 + w]` otherwise,
/// with `w = l sigma_bar sqrt(T)` plus the largest drift displacement.
fn truncation_range(p: &ProblemSpec, l: f64) -> Result<(f64, f64), Error> {
    let d = &p.diffusion;
    let t_max = p.horizon;
    let sqrt_t = libm::sqrt(t_max);
    let log_scale = d.domain == StateDomain::PositiveHalfline;
    let x0 = d.x0;
    let mut half = if log_scale { 1.0 } else { 1.0 + libm::fabs(x0) };
    for _ in 0..2 {
        let (a, b) = if log_scale {
            (x0 * libm::exp(-half), x0 * libm::exp(half))
        } else {
            (x0 - half, x0 + half)
        };
        let (mut s_bar, mut m_bar) = (0.0f64, 0.0f64);
        for i in 0..=32 {
            let t = t_max * i as f64 / 32.0;
            for j in 0..=64 {
                let x = if log_scale {
                    a * libm::pow(b / a, j as f64 / 64.0)
                } else {
                    a + (b - a) * j as f64 / 64.0
                };
                let s = libm::fabs(d.sigma_at(t, x)?);
                let m = libm::fabs(d.mu_at(t, x)?);
                let div = if log_scale { x } else { 1.0 };
                s_bar = s_bar.max(s / div);
                m_bar = m_bar.max(m / div);
            }
        }
        // A degenerate volatility still needs a nonempty box.
        let s_floor = if log_scale { 0.01 } else { 0.01 * (1.0 + libm::fabs(x0)) };
        half = l * s_bar.max(s_floor) * sqrt_t + m_bar * t_max;
    }
    Ok(if log_scale {
        (x0 * libm::exp(-half), x0 * libm::exp(half))
    } else {
        (x0 - half, x0 + half)
    })
}

/// Grid values of `u` and its spatial derivatives, stored layer-major:
/// entry `(n, i)` is at `n * nx + i` and corresponds to `(times[n], nodes[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeSolution {
    pub times: Vec<f64>,
    pub nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub uxx: Vec<f64>,
    pub grid: GridSpec,
    pub problem: ProblemSpec,
}

/// Three-point weights for first and second derivatives on a nonuniform
/// stencil with left spacing `hm` and right spacing `hp`.
#[derive(Clone, Copy, Debug)]
struct Stencil {
    d1: [f64; 3],
    d2: [f64; 3],
    hm: f64,
    hp: f64,
}

impl Stencil {
    fn new(hm: f64, hp: f64) -> Stencil {
        let s = hm + hp;
        Stencil {
            d1: [-hp / (hm * s), (hp - hm) / (hm * hp), hm / (hp * s)],
            d2: [2.0 / (hm * s), -2.0 / (hm * hp), 2.0 / (hp * s)],
            hm,
            hp,
        }
    }

    #[inline]
    fn first(&self, um: f64, u: f64, up: f64) -> f64 {
        self.d1[0] * um + self.d1[1] * u + self.d1[2] * up
    }

    #[inline]
    fn second(&self, um: f64, u: f64, up: f64) -> f64 {
        self.d2[0] * um + self.d2[1] * u + self.d2[2] * up
    }
}

fn stencils(nodes: &[f64]) -> Vec<Stencil> {
    (1..nodes.len() - 1)
        .map(|i| Stencil::new(nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]))
        .collect()
}

fn derivatives(nodes: &[f64], st: &[Stencil], u: &[f64], ux: &mut [f64], uxx: &mut [f64]) {
    let n = nodes.len();
    for i in 1..n - 1 {
        let s = &st[i - 1];
        ux[i] = s.first(u[i - 1], u[i], u[i + 1]);
        uxx[i] = s.second(u[i - 1], u[i], u[i + 1]);
    }
    ux[0] = (u[1] - u[0]) / (nodes[1] - nodes[0]);
    ux[n - 1] = (u[n - 1] - u[n - 2]) / (nodes[n - 1] - nodes[n - 2]);
    uxx[0] = uxx[1];
    uxx[n - 1] = uxx[n - 2];
}

/// Marches the implicit-explicit scheme from `u(T) = phi` back to `t = 0`.
pub fn solve(p: &ProblemSpec, grid: &GridSpec) -> Result<PdeSolution, Error> {
    grid.validate()?;
    if p.diffusion.domain == StateDomain::PositiveHalfline && grid.x_min <= 0.0 {
        return Err(Error::InvalidSpec("half-line problems need x_min > 0".into()));
    }
    let nx = grid.nx;
    let nt = grid.nt;
    let dt = p.horizon / nt as f64;
    let nodes = grid.nodes();
    let times: Vec<f64> = (0..=nt)
        .map(|n| if n == nt { p.horizon } else { n as f64 * dt })
        .collect();
    let st = stencils(&nodes);
    let d = &p.diffusion;
    let g = &p.generator.g;
    let time_dependent = d.mu.free_vars().contains(Var::T) || d.sigma.free_vars().contains(Var::T);

    let size = (nt + 1) * nx;
    let mut u = vec![0.0; size];
    let mut ux = vec![0.0; size];
    let mut uxx = vec![0.0; size];

    let last = nt * nx;
    for (i, &x) in nodes.iter().enumerate() {
        u[last + i] = p.payoff.eval(x).map_err(|e| nonfinite(e, nt, i))?;
    }
    {
        let (a, b) = (&mut ux[last..], &mut uxx[last..]);
        derivatives(&nodes, &st, &u[last..], a, b);
    }

    let mut mu = vec![0.0; nx];
    let mut sig = vec![0.0; nx];
    let mut sig_next = vec![0.0; nx];
    let fill = |t: f64, mu: &mut [f64], sig: &mut [f64], step: usize| -> Result<(), Error> {
        for (i, &x) in nodes.iter().enumerate() {
            mu[i] = d.mu_at(t, x).map_err(|e| nonfinite(e, step, i))?;
            sig[i] = d.sigma_at(t, x).map_err(|e| nonfinite(e, step, i))?;
        }
        Ok(())
    };
    fill(p.horizon, &mut mu, &mut sig_next, nt)?;
    if !time_dependent {
        sig.copy_from_slice(&sig_next);
    }

    let m = nx - 2;
    let mut la = vec![0.0; m];
    let mut lb = vec![0.0; m];
    let mut lc = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut matrix_ready = false;
    let (bl, br) = (nodes[0], nodes[nx - 1]);
    let (phi_lo, phi_hi) = (
        p.payoff.eval(bl).map_err(|e| nonfinite(e, nt, 0))?,
        p.payoff.eval(br).map_err(|e| nonfinite(e, nt, nx - 1))?,
    );
    let w_lo = (nodes[1] - nodes[0]) / (nodes[2] - nodes[1]);
    let w_hi = (nodes[nx - 1] - nodes[nx - 2]) / (nodes[nx - 2] - nodes[nx - 3]);

    for n in (0..nt).rev() {
        let t = times[n];
        let t_next = times[n + 1];
        if time_dependent {
            fill(t, &mut mu, &mut sig, n)?;
            matrix_ready = false;
        }
        let next = (n + 1) * nx;
        let (un, uxn) = (&u[next..next + nx], &ux[next..next + nx]);

        // Explicit generator term at the previous layer.
        let mut gy_max = 0.0f64;
        let mut gz_max = 0.0f64;
        for k in 0..m {
            let i = k + 1;
            let x = nodes[i];
            let y = un[i];
            let z = sig_next[i] * uxn[i];
            let gv = g.eval_at(t_next, x, y, z).map_err(|e| nonfinite(e, n, i))?;
            let dy = 1e-6 * (1.0 + libm::fabs(y));
            let dz = 1e-6 * (1.0 + libm::fabs(z));
            if let (Ok(gy), Ok(gz)) = (g.eval_at(t_next, x, y + dy, z), g.eval_at(t_next, x, y, z + dz)) {
                gy_max = gy_max.max(libm::fabs(gy - gv) / dy);
                gz_max = gz_max.max(libm::fabs(gz - gv) / dz);
            }
            rhs[k] = y + dt * gv;
        }
        if dt * gy_max > 1.0 || dt * gz_max * gz_max > 1.0 {
            return Err(Error::GridTooCoarse(alloc::format!(
                "dt = {dt:e} with |g_y| ~ {gy_max:.3e}, |g_z| ~ {gz_max:.3e} at step {n}; increase nt"
            )));
        }

        if !matrix_ready {
            build_matrix(&st, &mu, &sig, dt, &mut la, &mut lb, &mut lc);
            match grid.boundary {
                Boundary::SecondDerivativeZero => {
                    lb[0] += la[0] * (1.0 + w_lo);
                    lc[0] -= la[0] * w_lo;
                    lb[m - 1] += lc[m - 1] * (1.0 + w_hi);
                    la[m - 1] -= lc[m - 1] * w_hi;
                }
                Boundary::DirichletPayoff => {}
            }
            matrix_ready = !time_dependent;
        }
        if grid.boundary == Boundary::DirichletPayoff {
            rhs[0] -= la[0] * phi_lo;
            rhs[m - 1] -= lc[m - 1] * phi_hi;
        }
        if !thomas(&la, &lb, &lc, &mut rhs, &mut scratch) {
            return Err(Error::NonFinite { step: n, node: 0 });
        }

        let cur = n * nx;
        {
            let layer = &mut u[cur..cur + nx];
            layer[1..nx - 1].copy_from_slice(&rhs);
            match grid.boundary {
                Boundary::SecondDerivativeZero => {
                    layer[0] = (1.0 + w_lo) * layer[1] - w_lo * layer[2];
                    layer[nx - 1] = (1.0 + w_hi) * layer[nx - 2] - w_hi * layer[nx - 3];
                }
                Boundary::DirichletPayoff => {
                    layer[0] = phi_lo;
                    layer[nx - 1] = phi_hi;
                }
            }
            if let Some(i) = layer.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: n, node: i });
            }
        }
        let (a, b) = (&mut ux[cur..cur + nx], &mut uxx[cur..cur + nx]);
        derivatives(&nodes, &st, &u[cur..cur + nx], a, b);
        if grid.boundary == Boundary::SecondDerivativeZero {
            b[0] = 0.0;
            b[nx - 1] = 0.0;
        }
        if !time_dependent {
            continue;
        }
        sig_next.copy_from_slice(&sig);
    }

    Ok(PdeSolution {
        times,
        nodes,
        u,
        ux,
        uxx,
        grid: *grid,
        problem: p.clone(),
    })
}

fn nonfinite(_e: EvalError, step: usize, node: usize) -> Error {
    Error::NonFinite { step, node }
}

/// Rows of `I - dt L` for the interior nodes, with `L = mu d/dx + 1/2 sigma^2 d2/dx2`.
/// Central differences for the drift unless they would make an off-diagonal
/// coefficient of `L` negative, in which case the drift is upwinded.
fn build_matrix(st: &[Stencil], mu: &[f64], sig: &[f64], dt: f64, la: &mut [f64], lb: &mut [f64], lc: &mut [f64]) {
    for (k, s) in st.iter().enumerate() {
        let i = k + 1;
        let diff = 0.5 * sig[i] * sig[i];
        let m = mu[i];
        let mut lo = m * s.d1[0] + diff * s.d2[0];
        let mut mid = m * s.d1[1] + diff * s.d2[1];
        let mut hi = m * s.d1[2] + diff * s.d2[2];
        if lo < 0.0 || hi < 0.0 {
            lo = diff * s.d2[0];
            mid = diff * s.d2[1];
            hi = diff * s.d2[2];
            if m > 0.0 {
                mid -= m / s.hp;
                hi += m / s.hp;
            } else {
                mid += m / s.hm;
                lo -= m / s.hm;
            }
        }
        la[k] = -dt * lo;
        lb[k] = 1.0 - dt * mid;
        lc[k] = -dt * hi;
    }
}

impl PdeSolution {
    pub fn nx(&self) -> usize {
        self.nodes.len()
    }

    pub fn layer(&self, n: usize) -> &[f64] {
        let nx = self.nx();
        &self.u[n * nx..(n + 1) * nx]
    }

    /// Linear interpolation of `u(0, .)` at `x`.
    pub fn value_at(&self, x: f64) -> Result<f64, Error> {
        interpolate(&self.nodes, self.layer(0), x)
    }

    /// Scale used by the sign dead-band: `max(1, max |u|)`.
    pub fn scale(&self) -> f64 {
        self.u.iter().fold(1.0f64, |s, v| s.max(libm::fabs(*v)))
    }

    /// Writes the grid as CSV with header `t,x,u,ux,uxx`, time-major.
    pub fn write_csv<W: fmt::Write>(&self, out: &mut W) -> fmt::Result {
        writeln!(out, "t,x,u,ux,uxx")?;
        let nx = self.nx();
        for (n, t) in self.times.iter().enumerate() {
            for (i, x) in self.nodes.iter().enumerate() {
                let k = n * nx + i;
                writeln!(out, "{t},{x},{},{},{}", self.u[k], self.ux[k], self.uxx[k])?;
            }
        }
        Ok(())
    }
}

pub(crate) fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> Result<f64, Error> {
    let n = nodes.len();
    if !(x >= nodes[0] && x <= nodes[n - 1]) {
        return Err(Error::OutOfGrid(x));
    }
    let j = nodes.partition_point(|v| *v <= x);
    if j == 0 {
        return Ok(values[0]);
    }
    if j >= n {
        return Ok(values[n - 1]);
    }
    let (x0, x1) = (nodes[j - 1], nodes[j]);
    let w = (x - x0) / (x1 - x0);
    Ok(values[j - 1] + w * (values[j] - values[j - 1]))
}

/// `u(0, x0)`: the g-expectation (or g-evaluation) of the payoff.
pub fn g_expectation(sol: &PdeSolution) -> Result<f64, Error> {
    sol.value_at(sol.problem.diffusion.x0)
}

/// Extreme value over interior nodes (two boundary nodes dropped on each
/// side) and all time layers.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Extremum {
    pub min_value: f64,
    pub t: f64,
    pub x: f64,
    pub layer: usize,
    pub node: usize,
}

fn interior_min(sol: &PdeSolution, data: &[f64], lo: f64, hi: f64) -> Extremum {
    let nx = sol.nx();
    let mut best = Extremum {
        min_value: f64::INFINITY,
        t: 0.0,
        x: 0.0,
        layer: 0,
        node: 0,
    };
    for n in 0..sol.times.len() {
        for i in 2..nx.saturating_sub(2) {
            if sol.nodes[i] < lo || sol.nodes[i] > hi {
                continue;
            }
            let v = data[n * nx + i];
            if v < best.min_value {
                best = Extremum {
                    min_value: v,
                    t: sol.times[n],
                    x: sol.nodes[i],
                    layer: n,
                    node: i,
                };
            }
        }
    }
    best
}

/// Minimum of `u_xx` and where it occurs.
pub fn convexity_profile(sol: &PdeSolution) -> Extremum {
    interior_min(sol, &sol.uxx, f64::NEG_INFINITY, f64::INFINITY)
}

/// Minimum of `u_x` and where it occurs.
pub fn monotonicity_profile(sol: &PdeSolution) -> Extremum {
    interior_min(sol, &sol.ux, f64::NEG_INFINITY, f64::INFINITY)
}

/// [`convexity_profile`] restricted to interior nodes in `[lo, hi]`.
pub fn convexity_profile_within(sol: &PdeSolution, lo: f64, hi: f64) -> Extremum {
    interior_min(sol, &sol.uxx, lo, hi)
}

/// [`monotonicity_profile`] restricted to interior nodes in `[lo, hi]`.
pub fn monotonicity_profile_within(sol: &PdeSolution, lo: f64, hi: f64) -> Extremum {
    interior_min(sol, &sol.ux, lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Zero,
    Negative,
    Mixed,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Zero => "0",
            Sign::Negative => "-",
            Sign::Mixed => "mixed",
        }
    }

    fn rank(self) -> Option<i8> {
        match self {
            Sign::Positive => Some(1),
            Sign::Zero => Some(0),
            Sign::Negative => Some(-1),
            Sign::Mixed => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SignProfile {
    /// Sign of `u_xx` per layer, indexed like `times`.
    pub layers: Vec<Sign>,
    /// First layer, scanning backward from `T`, classified as mixed.
    pub first_mixed: Option<usize>,
    /// True when the sign never decreases when moving from `T` towards 0.
    pub nondecreasing_backward: bool,
    pub dead_band: f64,
}

/// Classifies the sign of `u_xx` on each layer with dead-band
/// `1e-6 max(1, max |u|)`.
pub fn sign_constancy_profile(sol: &PdeSolution) -> SignProfile {
    let db = 1e-6 * sol.scale();
    let nx = sol.nx();
    let layers: Vec<Sign> = (0..sol.times.len())
        .map(|n| {
            let row = &sol.uxx[n * nx..(n + 1) * nx];
            let interior = &row[2..nx.saturating_sub(2).max(2)];
            let pos = interior.iter().any(|v| *v > db);
            let neg = interior.iter().any(|v| *v < -db);
            match (pos, neg) {
                (true, true) => Sign::Mixed,
                (true, false) => Sign::Positive,
                (false, true) => Sign::Negative,
                (false, false) => Sign::Zero,
            }
        })
        .collect();
    let first_mixed = (0..layers.len()).rev().find(|&n| layers[n] == Sign::Mixed);
    let mut nondecreasing_backward = true;
    for n in (0..layers.len().saturating_sub(1)).rev() {
        match (layers[n].rank(), layers[n + 1].rank()) {
            (Some(a), Some(b)) if a >= b => {}
            _ => nondecreasing_backward = false,
        }
    }
    SignProfile {
        layers,
        first_mixed,
        nondecreasing_backward,
        dead_band: db,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionSpec, GeneratorSpec, PayoffSpec};
    use crate::sampling::{Range, SampleBox};

    fn heat(phi: &str, g: &str) -> ProblemSpec {
        let bx = SampleBox::new(
            Range::new(0.0, 1.0),
            Range::new(-5.0, 5.0),
            Range::new(-10.0, 10.0),
            Range::new(-10.0, 10.0),
        );
        ProblemSpec::new(
            DiffusionSpec::parse("0", "1", 0.0, StateDomain::WholeLine).unwrap(),
            GeneratorSpec::parse(g, bx).unwrap(),
            PayoffSpec::parse(phi).unwrap(),
            1.0,
        )
        .unwrap()
    }

    fn grid(p: &ProblemSpec, nx: usize, nt: usize) -> GridSpec {
        GridSpec::for_problem(
            p,
            &GridOptions {
                nx,
                nt,
                ..GridOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn martingale_identity() {
        let p = heat("x", "0");
        let sol = solve(&p, &grid(&p, 201, 100)).unwrap();
        assert!(g_expectation(&sol).unwrap().abs() < 1e-8);
        let m = monotonicity_profile(&sol);
        assert!((m.min_value - 1.0).abs() < 1e-9);
        assert!(sign_constancy_profile(&sol).layers.iter().all(|s| *s == Sign::Zero));
    }

    #[test]
    fn heat_quadratic() {
        let p = heat("x^2", "0");
        let sol = solve(&p, &grid(&p, 401, 400)).unwrap();
        assert!((g_expectation(&sol).unwrap() - 1.0).abs() < 1e-3);
        // The linear-extrapolation boundary flattens x^2 near the edges only.
        assert!(convexity_profile(&sol).min_value > 0.0);
        let core = convexity_profile_within(&sol, -1.0, 1.0);
        assert!((core.min_value - 2.0).abs() < 1e-3, "{core:?}");
        let s = sign_constancy_profile(&sol);
        assert!(s.layers.iter().all(|s| *s == Sign::Positive));
        assert_eq!(s.first_mixed, None);

        let q = heat("-x^2", "0");
        let sol = solve(&q, &grid(&q, 401, 400)).unwrap();
        assert!((convexity_profile_within(&sol, -1.0, 1.0).min_value + 2.0).abs() < 1e-3);
        let q = heat("-x", "0");
        let sol = solve(&q, &grid(&q, 101, 50)).unwrap();
        assert!((monotonicity_profile(&sol).min_value + 1.0).abs() < 1e-9);
    }

    #[test]
    fn constants_are_preserved() {
        let p = heat("3.5", "0.2*abs(z) + z");
        let sol = solve(&p, &grid(&p, 101, 50)).unwrap();
        assert!(sol.u.iter().all(|v| (v - 3.5).abs() < 1e-8));
        assert!((g_expectation(&sol).unwrap() - 3.5).abs() < 1e-8);
    }

    #[test]
    fn terminal_layer_is_payoff() {
        let p = heat("max(x, 0)", "0");
        let sol = solve(&p, &grid(&p, 51, 10)).unwrap();
        let last = sol.layer(10);
        for (x, u) in sol.nodes.iter().zip(last) {
            assert_eq!(*u, p.payoff.eval(*x).unwrap());
        }
    }

    #[test]
    fn out_of_grid() {
        let p = heat("x", "0");
        let sol = solve(&p, &grid(&p, 51, 10)).unwrap();
        assert!(matches!(sol.value_at(1e6), Err(Error::OutOfGrid(_))));
    }

    #[test]
    fn stiff_generator_is_rejected() {
        let p = heat("x", "1000*y");
        assert!(matches!(solve(&p, &grid(&p, 51, 10)), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn csv_layout() {
        let p = heat("x", "0");
        let sol = solve(&p, &grid(&p, 3, 1)).unwrap();
        let mut s = alloc::string::String::new();
        sol.write_csv(&mut s).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,x,u,ux,uxx");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[4].starts_with("1,"));
    }
}
