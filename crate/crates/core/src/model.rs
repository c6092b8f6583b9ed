//! Diffusions, generators, payoffs and the problems built from them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::conditions::{lipschitz_scan, ConditionId, ConditionReport, NamedConstant, ScalarField, Status, Witness};
use crate::expr::{EvalError, Expr, Var};
use crate::sampling::{Point, Range, SampleBox};
use crate::Error;

/// Tolerance for the normalization flags.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StateDomain {
    WholeLine,
    PositiveHalfline,
}

/// Forward diffusion `dX = mu(t,X) dt + sigma(t,X) dB`, `X_0 = x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSpec {
    pub mu: Expr,
    pub sigma: Expr,
    pub x0: f64,
    pub domain: StateDomain,
}

impl DiffusionSpec {
    pub fn new(mu: Expr, sigma: Expr, x0: f64, domain: StateDomain) -> Result<Self, Error> {
        for (name, e) in [("mu", &mu), ("sigma", &sigma)] {
            if !e.free_vars().is_subset(crate::expr::VarSet::of(&[Var::T, Var::X])) {
                return Err(Error::InvalidSpec(format!("{name} may only depend on t and x")));
            }
        }
        if !x0.is_finite() {
            return Err(Error::InvalidSpec("x0 must be finite".into()));
        }
        if domain == StateDomain::PositiveHalfline && x0 <= 0.0 {
            return Err(Error::InvalidSpec(
                "x0 must be positive on the positive half-line".into(),
            ));
        }
        Ok(DiffusionSpec { mu, sigma, x0, domain })
    }

    /// Parses both coefficients.
    pub fn parse(mu: &str, sigma: &str, x0: f64, domain: StateDomain) -> Result<Self, Error> {
        DiffusionSpec::new(Expr::parse(mu)?, Expr::parse(sigma)?, x0, domain)
    }

    #[inline]
    pub fn mu_at(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        self.mu.eval_at(t, x, 0.0, 0.0)
    }

    #[inline]
    pub fn sigma_at(&self, t: f64, x: f64) -> Result<f64, EvalError> {
        self.sigma.eval_at(t, x, 0.0, 0.0)
    }
}

/// Backward generator `g(t,x,y,z)` with normalization flags recomputed by
/// sampling over `probe`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub g: Expr,
    pub normalized: bool,
    pub strongly_normalized: bool,
    pub lipschitz_bound: Option<f64>,
    pub probe: SampleBox,
}

impl GeneratorSpec {
    pub fn new(g: Expr, probe: SampleBox) -> Self {
        let (normalized, strongly_normalized) = normalization_flags(&g, &probe);
        GeneratorSpec {
            g,
            normalized,
            strongly_normalized,
            lipschitz_bound: None,
            probe,
        }
    }

    pub fn parse(g: &str, probe: SampleBox) -> Result<Self, Error> {
        Ok(GeneratorSpec::new(Expr::parse(g)?, probe))
    }

    pub fn zero(probe: SampleBox) -> Self {
        GeneratorSpec::new(Expr::constant(0.0), probe)
    }

    pub fn with_lipschitz_bound(mut self, bound: f64) -> Self {
        self.lipschitz_bound = Some(bound);
        self
    }

    /// Re-samples the normalization flags on another box.
    pub fn reprobe(&self, probe: SampleBox) -> Self {
        let mut out = GeneratorSpec::new(self.g.clone(), probe);
        out.lipschitz_bound = self.lipschitz_bound;
        out
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64, EvalError> {
        self.g.eval_at(t, x, y, z)
    }

    /// What the BSDE value computes under these flags.
    pub fn functional_kind(&self) -> FunctionalKind {
        if self.strongly_normalized {
            FunctionalKind::GExpectation
        } else if self.normalized {
            FunctionalKind::GEvaluation
        } else {
            FunctionalKind::RawBsdeValue
        }
    }
}

fn normalization_flags(g: &Expr, probe: &SampleBox) -> (bool, bool) {
    let seq = probe.stream::<3>(0xA3);
    let mut normalized = true;
    let mut strong = true;
    for i in 0..probe.sample_count {
        let u = seq.point(i);
        let (t, x, y) = (probe.t.at(u[0]), probe.x.at(u[1]), probe.y.at(u[2]));
        if normalized {
            match g.eval_at(t, x, 0.0, 0.0) {
                Ok(v) if libm::fabs(v) <= NORMALIZATION_TOL => {}
                _ => normalized = false,
            }
        }
        if strong {
            match g.eval_at(t, x, y, 0.0) {
                Ok(v) if libm::fabs(v) <= NORMALIZATION_TOL => {}
                _ => strong = false,
            }
        }
        if !normalized && !strong {
            break;
        }
    }
    (normalized, strong && normalized)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FunctionalKind {
    GExpectation,
    GEvaluation,
    RawBsdeValue,
}

/// Terminal payoff `phi(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffSpec {
    pub phi: Expr,
    pub growth_exponent: f64,
    pub asserted_convex: bool,
    pub asserted_nondecreasing: bool,
}

impl PayoffSpec {
    /// Payoff with growth exponent detected from its tail behaviour.
    pub fn new(phi: Expr) -> Result<Self, Error> {
        if !phi.free_vars().is_subset(crate::expr::VarSet::of(&[Var::X])) {
            return Err(Error::InvalidSpec("payoff may only depend on x".into()));
        }
        let growth_exponent = detect_growth_exponent(&phi);
        Ok(PayoffSpec {
            phi,
            growth_exponent,
            asserted_convex: false,
            asserted_nondecreasing: false,
        })
    }

    pub fn parse(phi: &str) -> Result<Self, Error> {
        PayoffSpec::new(Expr::parse(phi)?)
    }

    pub fn with_growth(mut self, p: f64) -> Self {
        self.growth_exponent = p;
        self
    }

    pub fn convex(mut self) -> Self {
        self.asserted_convex = true;
        self
    }

    pub fn nondecreasing(mut self) -> Self {
        self.asserted_nondecreasing = true;
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        self.phi.eval_at(0.0, x, 0.0, 0.0)
    }

    /// `-phi`, with the shape flags adjusted: convexity is not preserved.
    pub fn negated(&self) -> PayoffSpec {
        PayoffSpec {
            phi: self.phi.neg(),
            growth_exponent: self.growth_exponent,
            asserted_convex: false,
            asserted_nondecreasing: false,
        }
    }

    /// `a * phi` as a new payoff.
    pub fn scaled(&self, a: f64) -> PayoffSpec {
        PayoffSpec {
            phi: Expr::constant(a).mul(&self.phi),
            growth_exponent: self.growth_exponent,
            asserted_convex: self.asserted_convex && a > 0.0,
            asserted_nondecreasing: self.asserted_nondecreasing && a > 0.0,
        }
    }
}

/// Smallest integer exponent in `1..=4` matching the tail growth of `phi`,
/// estimated from a log-log slope at large `|x|`.
fn detect_growth_exponent(phi: &Expr) -> f64 {
    let mut best: f64 = 1.0;
    for sign in [1.0, -1.0] {
        let r1 = 1e6;
        let r2 = 1e8;
        let (Ok(a), Ok(b)) = (
            phi.eval_at(0.0, sign * r1, 0.0, 0.0),
            phi.eval_at(0.0, sign * r2, 0.0, 0.0),
        ) else {
            continue;
        };
        let (a, b) = (libm::fabs(a), libm::fabs(b));
        if a > 0.0 && b > 0.0 {
            let slope = 0.5 * libm::log10(b / a);
            best = best.max(libm::ceil(slope - 0.05));
        }
    }
    best.clamp(1.0, 4.0)
}

/// Combined driver `f(t,x,y,z) = z mu(t,x) + g(t,x,y, z sigma(t,x))`, where
/// `z` plays the role of the spatial derivative of the value function.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverF {
    pub mu: Expr,
    pub sigma: Expr,
    pub g: Expr,
    f: Expr,
}

impl DriverF {
    #[inline]
    pub fn eval(&self, t: f64, x: f64, y: f64, z: f64) -> Result<f64, EvalError> {
        self.f.eval_at(t, x, y, z)
    }

    /// The driver as a single expression.
    pub fn expr(&self) -> &Expr {
        &self.f
    }
}

impl ScalarField for DriverF {
    #[inline]
    fn value(&self, p: &Point) -> Result<f64, EvalError> {
        self.f.eval_at(p.t, p.x, p.y, p.z)
    }
}

pub fn make_driver(d: &DiffusionSpec, g: &GeneratorSpec) -> DriverF {
    make_driver_with_sigma(d, g, &d.sigma)
}

/// Driver built with a volatility other than the diffusion's own.
pub fn make_driver_with_sigma(d: &DiffusionSpec, g: &GeneratorSpec, sigma: &Expr) -> DriverF {
    let z = Expr::var(Var::Z);
    let f = z.mul(&d.mu).add(&g.g.substitute(Var::Z, &z.mul(sigma)));
    DriverF {
        mu: d.mu.clone(),
        sigma: sigma.clone(),
        g: g.g.clone(),
        f,
    }
}

/// `g^(-1)(t,x,y,z) = -g(t,x,-y,-z)`.
pub fn risk_transform(g: &GeneratorSpec) -> GeneratorSpec {
    let y = Expr::var(Var::Y).neg();
    let z = Expr::var(Var::Z).neg();
    let h = g.g.substitute_all(&[(Var::Y, &y), (Var::Z, &z)]).neg();
    let mut out = GeneratorSpec::new(h, g.probe);
    out.lipschitz_bound = g.lipschitz_bound;
    out
}

/// `g^(a)(t,x,y,z) = a g(t,x,y/a,z/a)`.
pub fn scale_generator(g: &GeneratorSpec, a: f64) -> Result<GeneratorSpec, Error> {
    if a == 0.0 || !a.is_finite() {
        return Err(Error::ZeroScale);
    }
    let ae = Expr::constant(a);
    let y = Expr::var(Var::Y).div(&ae);
    let z = Expr::var(Var::Z).div(&ae);
    let h = ae.mul(&g.g.substitute_all(&[(Var::Y, &y), (Var::Z, &z)]));
    let mut out = GeneratorSpec::new(h, g.probe);
    out.lipschitz_bound = g.lipschitz_bound;
    Ok(out)
}

/// One forward-backward problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub diffusion: DiffusionSpec,
    pub generator: GeneratorSpec,
    pub payoff: PayoffSpec,
    pub horizon: f64,
}

impl ProblemSpec {
    pub fn new(
        diffusion: DiffusionSpec,
        generator: GeneratorSpec,
        payoff: PayoffSpec,
        horizon: f64,
    ) -> Result<Self, Error> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        Ok(ProblemSpec {
            diffusion,
            generator,
            payoff,
            horizon,
        })
    }

    pub fn with_payoff(&self, payoff: PayoffSpec) -> ProblemSpec {
        ProblemSpec { payoff, ..self.clone() }
    }

    pub fn with_generator(&self, generator: GeneratorSpec) -> ProblemSpec {
        ProblemSpec {
            generator,
            ..self.clone()
        }
    }

    pub fn driver(&self) -> DriverF {
        make_driver(&self.diffusion, &self.generator)
    }

    /// Checking box: `t` over the horizon, `x` over `x_range`, and `y`, `z`
    /// over `[-M, M]` with `M = 10 (1 + |x0|^p)`.
    pub fn default_box(&self, x_range: Range) -> SampleBox {
        let p = self.payoff.growth_exponent;
        let m = 10.0 * (1.0 + libm::pow(libm::fabs(self.diffusion.x0), p));
        SampleBox::new(
            Range::new(0.0, self.horizon),
            x_range,
            Range::new(-m, m),
            Range::new(-m, m),
        )
    }
}

/// Outcome of [`validate_assumptions`], one report per assumption.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionReport {
    pub reports: Vec<ConditionReport>,
    pub functional: FunctionalKind,
}

impl AssumptionReport {
    pub fn get(&self, id: ConditionId) -> Option<&ConditionReport> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn status(&self, id: ConditionId) -> Option<Status> {
        self.get(id).map(|r| r.status)
    }
}

/// Samples Lipschitz continuity of the coefficients, normalization of the
/// generator, polynomial growth of the payoff and positivity of `sigma`.
pub fn validate_assumptions(p: &ProblemSpec, bx: &SampleBox) -> Result<AssumptionReport, Error> {
    let d = &p.diffusion;
    let mut reports = Vec::new();

    // A1: mu and sigma Lipschitz in x.
    let mut a1 = Vec::new();
    for (name, e) in [("mu", &d.mu), ("sigma", &d.sigma)] {
        let fit = lipschitz_scan(e, &[Var::X], bx, name)?;
        a1.push(fit_report(ConditionId::A1, fit, name));
    }
    reports.push(ConditionReport::all_of(ConditionId::A1, a1));

    reports.push(check_sigma_positive(d, bx)?);

    // A2: g Lipschitz in (x, y, z).
    let fit = lipschitz_scan(&p.generator.g, &[Var::X, Var::Y, Var::Z], bx, "g")?;
    reports.push(fit_report(ConditionId::A2, fit, "g"));

    reports.push(check_normalization(&p.generator.g, bx, false)?);
    reports.push(check_normalization(&p.generator.g, bx, true)?);
    reports.push(check_growth(&p.payoff, bx)?);

    Ok(AssumptionReport {
        reports,
        functional: p.generator.reprobe(*bx).functional_kind(),
    })
}

fn fit_report(id: ConditionId, fit: crate::conditions::LipschitzFit, name: &str) -> ConditionReport {
    let max = fit.constants.iter().map(|c| c.value).fold(0.0, f64::max);
    ConditionReport {
        id,
        status: fit.status,
        max_violation: if fit.status == Status::Violated {
            fit.witness.as_ref().map_or(max, |w| w.magnitude)
        } else {
            0.0
        },
        witness: fit.witness,
        samples: fit.samples,
        constants: fit
            .constants
            .into_iter()
            .map(|c| NamedConstant {
                name: format!("{name}:{}", c.name),
                value: c.value,
            })
            .collect(),
        note: None,
    }
}

pub(crate) fn check_sigma_positive(d: &DiffusionSpec, bx: &SampleBox) -> Result<ConditionReport, Error> {
    let seq = bx.stream::<2>(0x5A);
    let mut worst: Option<(Point, f64)> = None;
    for i in 0..bx.sample_count {
        let u = seq.point(i);
        let p = Point::new(bx.t.at(u[0]), bx.x.at(u[1]), 0.0, 0.0);
        let s = d.sigma_at(p.t, p.x)?;
        if s <= 0.0 && worst.is_none_or(|(_, w)| s < w) {
            worst = Some((p, s));
        }
    }
    Ok(match worst {
        None => ConditionReport::certified(ConditionId::SigmaPositive, bx.sample_count),
        Some((p, s)) => ConditionReport::violated(
            ConditionId::SigmaPositive,
            bx.sample_count,
            Witness {
                subject: String::from("sigma"),
                points: alloc::vec![p],
                magnitude: -s,
            },
        ),
    })
}

fn check_normalization(g: &Expr, bx: &SampleBox, strong: bool) -> Result<ConditionReport, Error> {
    let id = if strong { ConditionId::A3p } else { ConditionId::A3 };
    let seq = bx.stream::<3>(if strong { 0xA4 } else { 0xA3 });
    let mut worst: Option<(Point, f64)> = None;
    for i in 0..bx.sample_count {
        let u = seq.point(i);
        let y = if strong { bx.y.at(u[2]) } else { 0.0 };
        let p = Point::new(bx.t.at(u[0]), bx.x.at(u[1]), y, 0.0);
        let v = libm::fabs(g.value(&p)?);
        if v > NORMALIZATION_TOL && worst.is_none_or(|(_, w)| v > w) {
            worst = Some((p, v));
        }
    }
    Ok(match worst {
        None => ConditionReport::certified(id, bx.sample_count),
        Some((p, v)) => ConditionReport::violated(
            id,
            bx.sample_count,
            Witness {
                subject: String::from("g"),
                points: alloc::vec![p],
                magnitude: v,
            },
        ),
    })
}

fn check_growth(payoff: &PayoffSpec, bx: &SampleBox) -> Result<ConditionReport, Error> {
    let pexp = payoff.growth_exponent;
    let mut sup = [0.0f64; 3];
    let mut arg = [0.0f64; 3];
    let n = bx.sample_count;
    for (si, s) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let r = bx.x.scaled(s);
        let seq = bx.stream::<1>(0x64 + si as u64);
        for i in 0..n {
            let x = r.at(seq.point(i)[0]);
            let v = libm::fabs(payoff.eval(x)?);
            let ratio = v / (1.0 + libm::pow(libm::fabs(x), pexp));
            if ratio > sup[si] {
                sup[si] = ratio;
                arg[si] = x;
            }
        }
    }
    let eps = 1e-12 * (1.0 + sup[2]);
    let mut report = if sup[2] > 1.5 * sup[1] + eps && sup[1] > 1.5 * sup[0] + eps {
        ConditionReport::violated(
            ConditionId::A4,
            3 * n,
            Witness {
                subject: String::from("phi"),
                points: alloc::vec![Point::new(0.0, arg[2], 0.0, 0.0)],
                magnitude: sup[2],
            },
        )
    } else {
        ConditionReport::certified(ConditionId::A4, 3 * n)
    };
    report.constants.push(NamedConstant {
        name: String::from("C"),
        value: sup[2],
    });
    report.constants.push(NamedConstant {
        name: String::from("p"),
        value: pexp,
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx() -> SampleBox {
        SampleBox::new(
            Range::new(0.0, 1.0),
            Range::new(1.0, 200.0),
            Range::new(-10.0, 10.0),
            Range::new(-10.0, 10.0),
        )
        .with_samples(512)
    }

    fn problem(mu: &str, sigma: &str, g: &str, phi: &str) -> ProblemSpec {
        ProblemSpec::new(
            DiffusionSpec::parse(mu, sigma, 100.0, StateDomain::PositiveHalfline).unwrap(),
            GeneratorSpec::parse(g, bx()).unwrap(),
            PayoffSpec::parse(phi).unwrap(),
            1.0,
        )
        .unwrap()
    }

    fn constant(r: &ConditionReport, name: &str) -> f64 {
        r.constants.iter().find(|c| c.name == name).unwrap().value
    }

    #[test]
    fn linear_coefficients_are_lipschitz() {
        let p = problem("0.05*x", "0.2*x", "0", "x");
        let rep = validate_assumptions(&p, &bx()).unwrap();
        let a1 = rep.get(ConditionId::A1).unwrap();
        assert_eq!(a1.status, Status::Certified);
        assert!((constant(a1, "mu:x") - 0.05).abs() < 1e-9);
        assert!((constant(a1, "sigma:x") - 0.2).abs() < 1e-9);
    }

    #[test]
    fn quadratic_generator_is_not_lipschitz() {
        let p = problem("0.05*x", "0.2*x", "z^2", "x");
        let rep = validate_assumptions(&p, &bx()).unwrap();
        let a2 = rep.get(ConditionId::A2).unwrap();
        assert_eq!(a2.status, Status::Violated);
        assert!(a2.witness.is_some());
    }

    #[test]
    fn normalization_flags() {
        let p = problem("0", "1", "0.05*y", "x");
        let rep = validate_assumptions(&p, &bx()).unwrap();
        assert_eq!(rep.status(ConditionId::A3), Some(Status::Certified));
        assert_eq!(rep.status(ConditionId::A3p), Some(Status::Violated));
        assert_eq!(rep.functional, FunctionalKind::GEvaluation);
        assert!(p.generator.normalized && !p.generator.strongly_normalized);
    }

    #[test]
    fn driver_examples() {
        let d = DiffusionSpec::parse("0", "1", 0.0, StateDomain::WholeLine).unwrap();
        let f = make_driver(&d, &GeneratorSpec::zero(bx()));
        assert_eq!(f.eval(0.3, 1.0, 2.0, 3.0).unwrap(), 0.0);

        let d = DiffusionSpec::parse("0.05*x", "0.2*x", 100.0, StateDomain::PositiveHalfline).unwrap();
        let g = GeneratorSpec::parse("-0.05*y - z*(0.05-0.05)/0.2", bx()).unwrap();
        let f = make_driver(&d, &g);
        let v = f.eval(0.5, 120.0, 3.0, 0.7).unwrap();
        assert!((v - (0.7 * 0.05 * 120.0 - 0.05 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn risk_transform_examples() {
        let g = GeneratorSpec::parse("-0.05*y - 0.25*z", bx()).unwrap();
        let h = risk_transform(&g);
        let a = GeneratorSpec::parse("0.1*abs(z)", bx()).unwrap();
        let ha = risk_transform(&a);
        for (y, z) in [(1.0, 2.0), (-3.0, 0.5), (0.0, -4.0)] {
            assert!((h.eval(0.0, 1.0, y, z).unwrap() - g.eval(0.0, 1.0, y, z).unwrap()).abs() < 1e-12);
            assert!((ha.eval(0.0, 1.0, y, z).unwrap() + 0.1 * z.abs()).abs() < 1e-12);
        }
        let zero = risk_transform(&GeneratorSpec::zero(bx()));
        assert_eq!(zero.eval(0.0, 1.0, 2.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn scale_examples() {
        let g = GeneratorSpec::parse("0.1*abs(z)", bx()).unwrap();
        let g2 = scale_generator(&g, 2.0).unwrap();
        assert!((g2.eval(0.0, 1.0, 0.0, -3.0).unwrap() - 0.3).abs() < 1e-12);
        assert!(matches!(scale_generator(&g, 0.0), Err(Error::ZeroScale)));
    }

    #[test]
    fn growth_exponent_detection() {
        assert_eq!(PayoffSpec::parse("max(x-100, 0)").unwrap().growth_exponent, 1.0);
        assert_eq!(PayoffSpec::parse("x^2").unwrap().growth_exponent, 2.0);
        assert_eq!(PayoffSpec::parse("7").unwrap().growth_exponent, 1.0);
        assert_eq!(PayoffSpec::parse("pos(x-100)^2").unwrap().growth_exponent, 2.0);
    }
}
