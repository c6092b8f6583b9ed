//! Sampled certification of the ordering hypotheses, the mapping from
//! certified hypothesis sets to ordering results, and empirical checks of the
//! predicted inequalities with either solver.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::conditions::{ConditionId, ConditionReport, ScalarField, Status, Witness};
use crate::expr::{EvalError, Expr, Var};
use crate::mc::{self, McConfig};
use crate::model::{
    make_driver, risk_transform, DiffusionSpec, DriverF, GeneratorSpec, PayoffSpec, ProblemSpec, StateDomain,
};
use crate::pde::{self, GridOptions, GridSpec};
use crate::sampling::{Point, Range, SampleBox};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OrderType {
    Conv,
    Iconv,
    Mon,
    Conc,
    Iconc,
    None,
}

impl OrderType {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderType::Conv => "conv",
            OrderType::Iconv => "iconv",
            OrderType::Mon => "mon",
            OrderType::Conc => "conc",
            OrderType::Iconc => "iconc",
            OrderType::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<OrderType> {
        Some(match s {
            "conv" => OrderType::Conv,
            "iconv" => OrderType::Iconv,
            "mon" => OrderType::Mon,
            "conc" => OrderType::Conc,
            "iconc" => OrderType::Iconc,
            "none" => OrderType::None,
            _ => return None,
        })
    }
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordering results that can be applied to a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AppliedResult {
    Pp3,
    Pp1,
    Pp6,
    Pp4,
    Pp2,
    Pp5,
    Pp4_1,
    Pp7,
    Pp9,
    Pp10,
}

impl AppliedResult {
    pub fn as_str(self) -> &'static str {
        match self {
            AppliedResult::Pp3 => "pp3",
            AppliedResult::Pp1 => "pp1",
            AppliedResult::Pp6 => "pp6",
            AppliedResult::Pp4 => "pp4",
            AppliedResult::Pp2 => "pp2",
            AppliedResult::Pp5 => "pp5",
            AppliedResult::Pp4_1 => "pp4.1",
            AppliedResult::Pp7 => "pp7",
            AppliedResult::Pp9 => "pp9",
            AppliedResult::Pp10 => "pp10",
        }
    }

    pub fn parse(s: &str) -> Option<AppliedResult> {
        use AppliedResult::*;
        [Pp3, Pp1, Pp6, Pp4, Pp2, Pp5, Pp4_1, Pp7, Pp9, Pp10]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

impl fmt::Display for AppliedResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for AppliedResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plane {
    XY,
    YZ,
}

impl Plane {
    fn axes(self) -> (Var, Var) {
        match self {
            Plane::XY => (Var::X, Var::Y),
            Plane::YZ => (Var::Y, Var::Z),
        }
    }

    fn frozen(self) -> Var {
        match self {
            Plane::XY => Var::Z,
            Plane::YZ => Var::X,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Plane::XY => "(x,y)",
            Plane::YZ => "(y,z)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZRestriction {
    AllZ,
    NonnegZ,
}

impl ZRestriction {
    fn apply(self, bx: &SampleBox) -> SampleBox {
        match self {
            ZRestriction::AllZ => *bx,
            ZRestriction::NonnegZ => bx.with_nonneg_z(),
        }
    }
}

/// How the variables outside the tested plane are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Frozen {
    /// Coarse grid over `t` and the remaining state variable, including 0.
    Sweep,
    /// Values taken from this point.
    At(Point),
}

fn coarse_values(r: Range, levels: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..levels)
        .map(|i| r.at(i as f64 / (levels - 1).max(1) as f64))
        .collect();
    if r.contains(0.0) && !v.contains(&0.0) {
        v.push(0.0);
    }
    v.dedup();
    v
}

#[inline]
fn convexity_tol(fp: f64, fq: f64) -> f64 {
    1e-9 * (1.0 + libm::fabs(fp) + libm::fabs(fq))
}

/// Midpoint test `f((P+Q)/2) <= (f(P)+f(Q))/2 + tol` over random global and
/// local pairs in `plane`.
pub fn check_convexity_2d(
    f: &dyn ScalarField,
    plane: Plane,
    frozen: Frozen,
    bx: &SampleBox,
    subject: &str,
) -> Result<ConditionReport, Error> {
    let (a, b) = plane.axes();
    let (ra, rb) = (bx.range(a), bx.range(b));
    let combos: Vec<Point> = match frozen {
        Frozen::At(p) => vec![p],
        Frozen::Sweep => {
            let other = plane.frozen();
            let mut out = Vec::new();
            for t in coarse_values(bx.t, 3) {
                for v in coarse_values(bx.range(other), 5) {
                    out.push(bx.center().with(Var::T, t).with(other, v));
                }
            }
            out
        }
    };
    let n = bx.sample_count;
    let mut samples = 0;
    let mut worst: Option<(Point, Point, f64)> = None;
    for (ci, base) in combos.iter().enumerate() {
        let seq = bx.stream::<4>(0xC0 + ci as u64 + 97 * plane as u64);
        for i in 0..n {
            let u = seq.point(i);
            let p = base.with(a, ra.at(u[0])).with(b, rb.at(u[1]));
            // Global pair, then a local pair around `p` (kinks show up there).
            let q_global = base.with(a, ra.at(u[2])).with(b, rb.at(u[3]));
            let la = (ra.at(u[0]) + 0.02 * ra.width() * (u[2] - 0.5)).clamp(ra.lo, ra.hi);
            let lb = (rb.at(u[1]) + 0.02 * rb.width() * (u[3] - 0.5)).clamp(rb.lo, rb.hi);
            let q_local = base.with(a, la).with(b, lb);
            let fp = f.value(&p)?;
            for q in [q_global, q_local] {
                let fq = f.value(&q)?;
                let fm = f.value(&p.midpoint(&q))?;
                samples += 1;
                let excess = fm - 0.5 * (fp + fq);
                if excess > convexity_tol(fp, fq) && worst.is_none_or(|w| excess > w.2) {
                    worst = Some((p, q, excess));
                }
            }
        }
    }
    Ok(match worst {
        None => ConditionReport::certified(ConditionId::Convexity, samples),
        Some((p, q, m)) => ConditionReport::violated(
            ConditionId::Convexity,
            samples,
            Witness {
                subject: format!("{subject} in {}", plane.name()),
                points: vec![p, q],
                magnitude: m,
            },
        ),
    })
}

/// Both partial convexities required by the ordering results.
pub fn check_partial_convexity(f: &dyn ScalarField, bx: &SampleBox, subject: &str) -> Result<ConditionReport, Error> {
    let xy = check_convexity_2d(f, Plane::XY, Frozen::Sweep, bx, subject)?;
    let yz = check_convexity_2d(f, Plane::YZ, Frozen::Sweep, bx, subject)?;
    Ok(ConditionReport::all_of(ConditionId::Convexity, vec![xy, yz]))
}

fn dominance_points(bx: &SampleBox, salt: u64) -> Vec<Point> {
    let seq = bx.stream::<4>(salt);
    let mut pts: Vec<Point> = (0..bx.sample_count).map(|i| bx.map(seq.point(i))).collect();
    for t in coarse_values(bx.t, 2) {
        for x in coarse_values(bx.x, 3) {
            for y in coarse_values(bx.y, 3) {
                for z in coarse_values(bx.z, 3) {
                    pts.push(Point::new(t, x, y, z));
                }
            }
        }
    }
    pts
}

/// `f1 <= f2`, or with `zeta` the sandwich `f1 <= z zeta <= f2`.
pub fn check_dominance(
    f1: &dyn ScalarField,
    f2: &dyn ScalarField,
    bx: &SampleBox,
    zr: ZRestriction,
    zeta: Option<&Expr>,
) -> Result<ConditionReport, Error> {
    let b = zr.apply(bx);
    let pts = dominance_points(&b, 0xD0);
    let mut worst: Option<(Point, f64, &'static str)> = None;
    for p in &pts {
        let v1 = f1.value(p)?;
        let v2 = f2.value(p)?;
        let gaps: [(f64, f64, &'static str); 2] = match zeta {
            None => [(v1, v2, "f1 <= f2"), (0.0, 0.0, "")],
            Some(z) => {
                let mid = p.z * z.eval_at(p.t, p.x, 0.0, 0.0)?;
                [(v1, mid, "f1 <= z zeta"), (mid, v2, "z zeta <= f2")]
            }
        };
        for (lo, hi, what) in gaps {
            let excess = lo - hi;
            if excess > convexity_tol(lo, hi) && worst.is_none_or(|w| excess > w.1) {
                worst = Some((*p, excess, what));
            }
        }
    }
    Ok(match worst {
        None => ConditionReport::certified(ConditionId::Dominance, pts.len()),
        Some((p, m, what)) => ConditionReport::violated(
            ConditionId::Dominance,
            pts.len(),
            Witness {
                subject: what.to_string(),
                points: vec![p],
                magnitude: m,
            },
        ),
    })
}

/// Nondecreasing in `var` over the box (restrict `z` beforehand if needed).
pub fn check_monotone_in(f: &dyn ScalarField, var: Var, bx: &SampleBox) -> Result<ConditionReport, Error> {
    let r = bx.range(var);
    let seq = bx.stream::<5>(0xE0 + var as u64);
    let mut worst: Option<(Point, Point, f64)> = None;
    let mut samples = 0;
    for i in 0..bx.sample_count {
        let u = seq.point(i);
        let p = bx.map([u[0], u[1], u[2], u[3]]);
        let (lo, hi) = if p.get(var) <= r.at(u[4]) {
            (p.get(var), r.at(u[4]))
        } else {
            (r.at(u[4]), p.get(var))
        };
        let near = (lo + 0.01 * r.width()).min(r.hi);
        for top in [hi, near] {
            let a = p.with(var, lo);
            let b = p.with(var, top);
            let (fa, fb) = (f.value(&a)?, f.value(&b)?);
            samples += 1;
            let drop = fa - fb;
            if drop > convexity_tol(fa, fb) && worst.is_none_or(|w| drop > w.2) {
                worst = Some((a, b, drop));
            }
        }
    }
    Ok(match worst {
        None => ConditionReport::certified(ConditionId::Monotone, samples),
        Some((a, b, m)) => ConditionReport::violated(
            ConditionId::Monotone,
            samples,
            Witness {
                subject: format!("decrease in {}", var.name()),
                points: vec![a, b],
                magnitude: m,
            },
        ),
    })
}

/// `f` does not depend on `var` on the box.
pub fn check_independent_of(f: &dyn ScalarField, var: Var, bx: &SampleBox) -> Result<ConditionReport, Error> {
    let r = bx.range(var);
    let seq = bx.stream::<5>(0xF0 + var as u64);
    let mut worst: Option<(Point, Point, f64)> = None;
    for i in 0..bx.sample_count {
        let u = seq.point(i);
        let p = bx.map([u[0], u[1], u[2], u[3]]);
        let q = p.with(var, r.at(u[4]));
        let (fp, fq) = (f.value(&p)?, f.value(&q)?);
        let d = libm::fabs(fp - fq);
        if d > convexity_tol(fp, fq) && worst.is_none_or(|w| d > w.2) {
            worst = Some((p, q, d));
        }
    }
    Ok(match worst {
        None => ConditionReport::certified(ConditionId::Monotone, bx.sample_count),
        Some((p, q, m)) => ConditionReport::violated(
            ConditionId::Monotone,
            bx.sample_count,
            Witness {
                subject: format!("dependence on {}", var.name()),
                points: vec![p, q],
                magnitude: m,
            },
        ),
    })
}

/// Separate reports for every coefficient relation used by the results.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoefficientOrder {
    pub sigma_positive: ConditionReport,
    pub sigma_order: ConditionReport,
    pub sigma_equal: ConditionReport,
    pub drift_order: ConditionReport,
    pub drift_equal: ConditionReport,
    pub x0_order: ConditionReport,
    pub x0_equal: ConditionReport,
}

struct Tracker {
    id: ConditionId,
    subject: &'static str,
    worst: Option<(Point, f64)>,
}

impl Tracker {
    fn new(id: ConditionId, subject: &'static str) -> Self {
        Tracker {
            id,
            subject,
            worst: None,
        }
    }

    fn observe(&mut self, p: Point, excess: f64, tol: f64) {
        if excess > tol && self.worst.is_none_or(|w| excess > w.1) {
            self.worst = Some((p, excess));
        }
    }

    fn finish(self, samples: usize) -> ConditionReport {
        match self.worst {
            None => ConditionReport::certified(self.id, samples),
            Some((p, m)) => ConditionReport::violated(
                self.id,
                samples,
                Witness {
                    subject: self.subject.to_string(),
                    points: vec![p],
                    magnitude: m,
                },
            ),
        }
    }
}

pub fn check_coefficient_order(
    d1: &DiffusionSpec,
    d2: &DiffusionSpec,
    bx: &SampleBox,
) -> Result<CoefficientOrder, Error> {
    let seq = bx.stream::<2>(0x0C);
    let mut pos = Tracker::new(ConditionId::SigmaPositive, "sigma_1 > 0");
    let mut s_ord = Tracker::new(ConditionId::SigmaOrder, "sigma_1 <= sigma_2");
    let mut s_eq = Tracker::new(ConditionId::SigmaEqual, "sigma_1 = sigma_2");
    let mut m_ord = Tracker::new(ConditionId::DriftOrder, "mu_1 <= mu_2");
    let mut m_eq = Tracker::new(ConditionId::DriftEqual, "mu_1 = mu_2");
    let n = bx.sample_count;
    for i in 0..n {
        let u = seq.point(i);
        let p = Point::new(bx.t.at(u[0]), bx.x.at(u[1]), 0.0, 0.0);
        let (s1, s2) = (d1.sigma_at(p.t, p.x)?, d2.sigma_at(p.t, p.x)?);
        let (m1, m2) = (d1.mu_at(p.t, p.x)?, d2.mu_at(p.t, p.x)?);
        let s_tol = 1e-12 * (1.0f64).max(libm::fabs(s1)).max(libm::fabs(s2));
        let m_tol = 1e-12 * (1.0f64).max(libm::fabs(m1)).max(libm::fabs(m2));
        // Strict positivity: any nonpositive value is a violation.
        pos.observe(p, -s1.min(s2), -f64::MIN_POSITIVE);
        s_ord.observe(p, s1 - s2, s_tol);
        s_eq.observe(p, libm::fabs(s1 - s2), s_tol);
        m_ord.observe(p, m1 - m2, m_tol);
        m_eq.observe(p, libm::fabs(m1 - m2), m_tol);
    }
    let x_tol = 1e-12 * (1.0f64).max(libm::fabs(d1.x0)).max(libm::fabs(d2.x0));
    let xp = Point::new(0.0, d1.x0, 0.0, 0.0);
    let mut x_ord = Tracker::new(ConditionId::X0Order, "x0_1 <= x0_2");
    x_ord.observe(xp, d1.x0 - d2.x0, x_tol);
    let mut x_eq = Tracker::new(ConditionId::X0Equal, "x0_1 = x0_2");
    x_eq.observe(xp, libm::fabs(d1.x0 - d2.x0), x_tol);
    Ok(CoefficientOrder {
        sigma_positive: pos.finish(n),
        sigma_order: s_ord.finish(n),
        sigma_equal: s_eq.finish(n),
        drift_order: m_ord.finish(n),
        drift_equal: m_eq.finish(n),
        x0_order: x_ord.finish(1),
        x0_equal: x_eq.finish(1),
    })
}

/// Sampled boundedness of `(mu_i - zeta) / sigma_i`, standing in for the
/// exponential integrability requirement. Reported as heuristic.
pub fn check_novikov(
    d1: &DiffusionSpec,
    d2: &DiffusionSpec,
    zeta: &Expr,
    bx: &SampleBox,
) -> Result<ConditionReport, Error> {
    let ratio = |d: &DiffusionSpec, t: f64, x: f64| -> Result<f64, EvalError> {
        let m = d.mu_at(t, x)?;
        let s = d.sigma_at(t, x)?;
        let z = zeta.eval_at(t, x, 0.0, 0.0)?;
        Ok(libm::fabs((m - z) / s))
    };
    let n = bx.sample_count;
    let mut sup = [0.0f64; 3];
    let mut arg = [Point::new(0.0, 0.0, 0.0, 0.0); 3];
    for (si, s) in [0.25, 0.5, 1.0].into_iter().enumerate() {
        let b = bx.nested(s);
        let seq = b.stream::<2>(0x4E + si as u64);
        for i in 0..n {
            let u = seq.point(i);
            let (t, x) = (b.t.at(u[0]), b.x.at(u[1]));
            for d in [d1, d2] {
                let v = ratio(d, t, x)?;
                if !v.is_finite() || v > sup[si] {
                    sup[si] = if v.is_finite() { v } else { f64::INFINITY };
                    arg[si] = Point::new(t, x, 0.0, 0.0);
                }
            }
        }
    }
    let eps = 1e-9 * (1.0 + sup[2]);
    let unbounded = !sup[2].is_finite() || (sup[2] > 1.5 * sup[1] + eps && sup[1] > 1.5 * sup[0] + eps);
    let mut rep = if unbounded {
        ConditionReport::violated(
            ConditionId::Novikov,
            3 * n,
            Witness {
                subject: "(mu - zeta)/sigma grows with the box".to_string(),
                points: vec![arg[2]],
                magnitude: sup[2],
            },
        )
    } else {
        ConditionReport::certified(ConditionId::Novikov, 3 * n)
    };
    rep.note = Some("heuristic: sampled boundedness only".to_string());
    rep.constants.push(crate::conditions::NamedConstant {
        name: "sup".to_string(),
        value: sup[2],
    });
    Ok(rep)
}

/// One result tried by [`verdict`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TheoremAttempt {
    pub result: AppliedResult,
    pub certified: bool,
    pub conditions: Vec<ConditionReport>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrderingVerdict {
    pub requested: OrderType,
    pub order_type: OrderType,
    pub applied_result: Option<AppliedResult>,
    /// Conditions of the applied result, or of every attempt if none applies.
    pub conditions: Vec<ConditionReport>,
    pub attempts: Vec<TheoremAttempt>,
    /// Conditions that were not certified in any attempt.
    pub blocking: Vec<ConditionId>,
    #[cfg_attr(feature = "serde", serde(serialize_with = "ser_opt_expr"))]
    pub zeta: Option<Expr>,
    /// True when a concave request was answered through the negated pair.
    pub via_duality: bool,
    #[cfg_attr(feature = "serde", serde(rename = "box"))]
    pub sample_box: SampleBox,
}

#[cfg(feature = "serde")]
fn ser_opt_expr<S: serde::Serializer>(e: &Option<Expr>, s: S) -> Result<S::Ok, S::Error> {
    match e {
        Some(e) => s.serialize_some(&e.to_string()),
        None => s.serialize_none(),
    }
}

impl OrderingVerdict {
    pub fn attempt(&self, r: AppliedResult) -> Option<&TheoremAttempt> {
        self.attempts.iter().find(|a| a.result == r)
    }

    pub fn condition(&self, r: AppliedResult, id: ConditionId) -> Option<&ConditionReport> {
        self.attempt(r)?.conditions.iter().find(|c| c.id == id)
    }
}

/// Lazily computed checks shared between the results of one family.
struct Checker<'a> {
    d1: &'a DiffusionSpec,
    d2: &'a DiffusionSpec,
    g1: &'a GeneratorSpec,
    g2: &'a GeneratorSpec,
    f1: DriverF,
    f2: DriverF,
    zeta: Expr,
    bx: SampleBox,
    nonneg: SampleBox,
    coeff: Option<CoefficientOrder>,
    convex_all: [Option<ConditionReport>; 2],
    convex_nonneg: [Option<ConditionReport>; 2],
    g_mono_x: [Option<ConditionReport>; 2],
    novikov: Option<ConditionReport>,
}

impl<'a> Checker<'a> {
    fn new(
        d1: &'a DiffusionSpec,
        d2: &'a DiffusionSpec,
        g1: &'a GeneratorSpec,
        g2: &'a GeneratorSpec,
        zeta: Option<&Expr>,
        bx: &SampleBox,
    ) -> Self {
        Checker {
            d1,
            d2,
            g1,
            g2,
            f1: make_driver(d1, g1),
            f2: make_driver(d2, g2),
            zeta: zeta.cloned().unwrap_or_else(|| Expr::constant(0.0)),
            bx: *bx,
            nonneg: bx.with_nonneg_z(),
            coeff: None,
            convex_all: [None, None],
            convex_nonneg: [None, None],
            g_mono_x: [None, None],
            novikov: None,
        }
    }

    fn coeff(&mut self) -> Result<&CoefficientOrder, Error> {
        if self.coeff.is_none() {
            self.coeff = Some(check_coefficient_order(self.d1, self.d2, &self.bx)?);
        }
        Ok(self.coeff.as_ref().unwrap())
    }

    fn driver(&self, i: usize) -> &DriverF {
        if i == 0 {
            &self.f1
        } else {
            &self.f2
        }
    }

    fn generator(&self, i: usize) -> &Expr {
        if i == 0 {
            &self.g1.g
        } else {
            &self.g2.g
        }
    }

    fn convex(&mut self, i: usize, zr: ZRestriction) -> Result<ConditionReport, Error> {
        let slot = match zr {
            ZRestriction::AllZ => &self.convex_all[i],
            ZRestriction::NonnegZ => &self.convex_nonneg[i],
        };
        if let Some(r) = slot {
            return Ok(r.clone());
        }
        let b = zr.apply(&self.bx);
        let subject = if i == 0 { "f_1" } else { "f_2" };
        let r = check_partial_convexity(self.driver(i), &b, subject)?;
        match zr {
            ZRestriction::AllZ => self.convex_all[i] = Some(r.clone()),
            ZRestriction::NonnegZ => self.convex_nonneg[i] = Some(r.clone()),
        }
        Ok(r)
    }

    fn both_convex(&mut self, id: ConditionId, zr: ZRestriction) -> Result<ConditionReport, Error> {
        let parts = vec![self.convex(0, zr)?, self.convex(1, zr)?];
        Ok(ConditionReport::all_of(id, parts))
    }

    fn either_convex(&mut self, id: ConditionId, zr: ZRestriction) -> Result<ConditionReport, Error> {
        let a = self.convex(0, zr)?.with_note("i = 1");
        let b = self.convex(1, zr)?.with_note("i = 2");
        Ok(ConditionReport::any_of(id, vec![a, b]))
    }

    fn f_dominance(&mut self, id: ConditionId, zr: ZRestriction, sandwich: bool) -> Result<ConditionReport, Error> {
        let zeta = if sandwich { Some(&self.zeta) } else { None };
        Ok(check_dominance(&self.f1, &self.f2, &self.bx, zr, zeta)?.with_id(id))
    }

    fn g_dominance(&mut self, id: ConditionId, zr: ZRestriction) -> Result<ConditionReport, Error> {
        Ok(check_dominance(&self.g1.g, &self.g2.g, &self.bx, zr, None)?.with_id(id))
    }

    fn g_monotone_x(&mut self, i: usize) -> Result<ConditionReport, Error> {
        if let Some(r) = &self.g_mono_x[i] {
            return Ok(r.clone());
        }
        let r = check_monotone_in(self.generator(i), Var::X, &self.nonneg)?;
        self.g_mono_x[i] = Some(r.clone());
        Ok(r)
    }

    fn g_both_monotone_x(&mut self, id: ConditionId) -> Result<ConditionReport, Error> {
        let parts = vec![self.g_monotone_x(0)?, self.g_monotone_x(1)?];
        Ok(ConditionReport::all_of(id, parts))
    }

    fn novikov(&mut self) -> Result<ConditionReport, Error> {
        if self.novikov.is_none() {
            self.novikov = Some(check_novikov(self.d1, self.d2, &self.zeta, &self.bx)?);
        }
        Ok(self.novikov.clone().unwrap())
    }

    fn attempt(&mut self, result: AppliedResult) -> Result<TheoremAttempt, Error> {
        use ConditionId as C;
        use ZRestriction::{AllZ, NonnegZ};
        let c = self.coeff()?.clone();
        let mut conds = Vec::new();
        match result {
            AppliedResult::Pp3 | AppliedResult::Pp9 => {
                let (d, v) = if result == AppliedResult::Pp3 {
                    (C::B1, C::B2)
                } else {
                    (C::F1, C::F2)
                };
                conds.extend([c.x0_equal, c.sigma_positive, c.sigma_order]);
                conds.push(self.f_dominance(d, AllZ, false)?);
                conds.push(self.both_convex(v, AllZ)?);
            }
            AppliedResult::Pp1 | AppliedResult::Pp10 => {
                let (d, v) = if result == AppliedResult::Pp1 {
                    (C::E1, C::E2)
                } else {
                    (C::G1, C::G2)
                };
                conds.extend([c.x0_equal, c.sigma_positive, c.sigma_order]);
                conds.push(self.f_dominance(d, AllZ, true)?);
                conds.push(self.either_convex(v, AllZ)?);
                conds.push(self.novikov()?);
            }
            AppliedResult::Pp6 => {
                conds.extend([c.x0_equal, c.drift_equal, c.sigma_positive, c.sigma_order]);
                let ind = vec![
                    check_independent_of(&self.g1.g, Var::Z, &self.bx)?,
                    check_independent_of(&self.g2.g, Var::Z, &self.bx)?,
                ];
                conds.push(ConditionReport::all_of(C::Cp1, ind));
                let zero_z = {
                    let mut b = self.bx;
                    b.z = Range::point(0.0);
                    b
                };
                conds.push(check_dominance(&self.g1.g, &self.g2.g, &zero_z, AllZ, None)?.with_id(C::Cp2));
                conds.push(self.both_convex(C::Cp3, AllZ)?);
            }
            AppliedResult::Pp4 => {
                conds.extend([c.x0_order, c.sigma_positive, c.sigma_order]);
                conds.push(self.f_dominance(C::Bp1, NonnegZ, false)?);
                conds.push(self.both_convex(C::Bp2, NonnegZ)?);
                conds.push(self.g_both_monotone_x(C::Bp3)?);
            }
            AppliedResult::Pp2 => {
                conds.extend([c.x0_order, c.sigma_positive, c.sigma_order]);
                conds.push(self.f_dominance(C::Ep1, NonnegZ, true)?);
                conds.push(self.either_convex(C::Ep2, NonnegZ)?);
                conds.push(self.g_both_monotone_x(C::Ep3)?);
                conds.push(self.novikov()?);
            }
            AppliedResult::Pp5 => {
                conds.extend([c.x0_order, c.drift_order, c.sigma_positive, c.sigma_order]);
                conds.push(self.g_dominance(C::C1, NonnegZ)?);
                let mz = vec![
                    check_monotone_in(&self.g1.g, Var::Z, &self.nonneg)?.with_note("i = 1"),
                    check_monotone_in(&self.g2.g, Var::Z, &self.nonneg)?.with_note("i = 2"),
                ];
                conds.push(ConditionReport::any_of(C::C2, mz));
                conds.push(self.g_both_monotone_x(C::C3)?);
                conds.push(self.both_convex(C::C4, NonnegZ)?);
            }
            AppliedResult::Pp4_1 => {
                conds.extend([c.x0_order, c.sigma_positive, c.sigma_equal]);
                conds.push(self.f_dominance(C::Bpp1, NonnegZ, false)?);
                conds.push(self.g_both_monotone_x(C::Bpp2)?);
            }
            AppliedResult::Pp7 => {
                conds.extend([c.x0_order, c.sigma_positive, c.sigma_equal]);
                conds.push(c.drift_order.with_id(C::D1));
                conds.push(self.g_dominance(C::D2, NonnegZ)?);
                conds.push(self.g_both_monotone_x(C::D3)?);
            }
        }
        let certified = conds.iter().all(|c| c.is_certified());
        Ok(TheoremAttempt {
            result,
            certified,
            conditions: conds,
        })
    }
}

/// Priority order of the results for a requested order type.
pub fn priority(order: OrderType) -> &'static [AppliedResult] {
    use AppliedResult::*;
    match order {
        OrderType::Conv | OrderType::Conc => &[Pp3, Pp1, Pp6],
        OrderType::Iconv | OrderType::Iconc => &[Pp4, Pp2, Pp5],
        OrderType::Mon => &[Pp4_1, Pp7],
        OrderType::None => &[],
    }
}

fn decide(
    requested: OrderType,
    attempts: Vec<TheoremAttempt>,
    zeta: Option<&Expr>,
    bx: &SampleBox,
    via_duality: bool,
) -> OrderingVerdict {
    let applied = attempts.iter().find(|a| a.certified).map(|a| a.result);
    let conditions = match applied {
        Some(r) => attempts.iter().find(|a| a.result == r).unwrap().conditions.clone(),
        None => attempts.iter().flat_map(|a| a.conditions.iter().cloned()).collect(),
    };
    let mut blocking: Vec<ConditionId> = Vec::new();
    if applied.is_none() {
        for c in attempts.iter().flat_map(|a| &a.conditions) {
            if !c.is_certified() && !blocking.contains(&c.id) {
                blocking.push(c.id);
            }
        }
    }
    OrderingVerdict {
        requested,
        order_type: if applied.is_some() { requested } else { OrderType::None },
        applied_result: applied,
        conditions,
        attempts,
        blocking,
        zeta: zeta.cloned(),
        via_duality,
        sample_box: *bx,
    }
}

/// Tries the results for `requested` in priority order on the sampled box
/// and returns the first one whose conditions are all certified.
pub fn verdict(
    p1: &ProblemSpec,
    p2: &ProblemSpec,
    requested: OrderType,
    zeta: Option<&Expr>,
    bx: &SampleBox,
) -> Result<OrderingVerdict, Error> {
    match requested {
        OrderType::Conc | OrderType::Iconc => {
            // X1 <=conc X2  iff  -X2 <=conv -X1 under the transformed generators.
            let (n1, n2) = (negate_problem(p2), negate_problem(p1));
            let nb = negate_box(bx);
            let nz = zeta.map(negate_zeta);
            let base = if requested == OrderType::Conc {
                OrderType::Conv
            } else {
                OrderType::Iconv
            };
            let v = verdict(&n1, &n2, base, nz.as_ref(), &nb)?;
            let mut out = decide(requested, v.attempts, nz.as_ref(), &nb, true);
            out.zeta = zeta.cloned();
            Ok(out)
        }
        OrderType::None => Ok(decide(requested, Vec::new(), zeta, bx, false)),
        _ => {
            let mut ck = Checker::new(&p1.diffusion, &p2.diffusion, &p1.generator, &p2.generator, zeta, bx);
            let mut attempts = Vec::new();
            for r in priority(requested) {
                attempts.push(ck.attempt(*r)?);
            }
            Ok(decide(requested, attempts, zeta, bx, false))
        }
    }
}

/// Conditions F/G: the convex-order results applied to the drivers built
/// from `g_i^(-1)`, each with its own volatility.
pub fn risk_verdict(
    p1: &ProblemSpec,
    p2: &ProblemSpec,
    zeta: Option<&Expr>,
    bx: &SampleBox,
) -> Result<OrderingVerdict, Error> {
    let h1 = risk_transform(&p1.generator);
    let h2 = risk_transform(&p2.generator);
    let mut ck = Checker::new(&p1.diffusion, &p2.diffusion, &h1, &h2, zeta, bx);
    let attempts = vec![ck.attempt(AppliedResult::Pp9)?, ck.attempt(AppliedResult::Pp10)?];
    Ok(decide(OrderType::Conv, attempts, zeta, bx, false))
}

/// The problem for `W = -X`: drift `-mu(t,-w)`, volatility `sigma(t,-w)`,
/// generator `-g(t,-w,-y,z)` and payoff `-phi(-w)`, so that its value is
/// the negated value of the original problem.
pub fn negate_problem(p: &ProblemSpec) -> ProblemSpec {
    let mw = Expr::var(Var::X).neg();
    let my = Expr::var(Var::Y).neg();
    let d = &p.diffusion;
    let diffusion = DiffusionSpec {
        mu: d.mu.substitute(Var::X, &mw).neg(),
        sigma: d.sigma.substitute(Var::X, &mw),
        x0: -d.x0,
        domain: StateDomain::WholeLine,
    };
    let h = p.generator.g.substitute_all(&[(Var::X, &mw), (Var::Y, &my)]).neg();
    let mut generator = GeneratorSpec::new(h, negate_box(&p.generator.probe));
    generator.lipschitz_bound = p.generator.lipschitz_bound;
    let payoff = PayoffSpec {
        phi: p.payoff.phi.substitute(Var::X, &mw).neg(),
        growth_exponent: p.payoff.growth_exponent,
        asserted_convex: false,
        asserted_nondecreasing: false,
    };
    ProblemSpec {
        diffusion,
        generator,
        payoff,
        horizon: p.horizon,
    }
}

fn negate_zeta(z: &Expr) -> Expr {
    // zeta enters as a drift, so it transforms like mu.
    z.substitute(Var::X, &Expr::var(Var::X).neg()).neg()
}

/// Box for `(t, -x, -y, z)`.
pub fn negate_box(bx: &SampleBox) -> SampleBox {
    let mut b = *bx;
    b.x = Range::new(-bx.x.hi, -bx.x.lo);
    b.y = Range::new(-bx.y.hi, -bx.y.lo);
    b
}

/// Default checking box for a pair: `x` over the common PDE grid, `y` and
/// `z` over `[-M, M]` with the larger of the two `M`.
pub fn pair_box(p1: &ProblemSpec, p2: &ProblemSpec, grid: &GridOptions) -> Result<SampleBox, Error> {
    let g = GridSpec::covering(&[p1, p2], grid)?;
    let xr = Range::new(g.x_min, g.x_max);
    let b1 = p1.default_box(xr);
    let b2 = p2.default_box(xr);
    let m = b1.y.hi.max(b2.y.hi);
    let mut b = b1;
    b.t = Range::new(0.0, p1.horizon.max(p2.horizon));
    b.y = Range::new(-m, m);
    b.z = Range::new(-m, m);
    Ok(b)
}

/// A payoff with a stable identifier for tables.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedPayoff {
    pub id: String,
    pub payoff: PayoffSpec,
}

impl NamedPayoff {
    pub fn parse(id: &str, phi: &str) -> Result<NamedPayoff, Error> {
        Ok(NamedPayoff {
            id: id.to_string(),
            payoff: PayoffSpec::parse(phi)?,
        })
    }
}

fn strikes(x0: f64) -> [f64; 3] {
    [0.8 * x0, x0, 1.2 * x0]
}

/// Default test payoffs for an order type.
pub fn default_family(order: OrderType, x0: f64) -> Result<Vec<NamedPayoff>, Error> {
    let mut out = Vec::new();
    let k = strikes(x0);
    let mut push = |id: String, phi: String| -> Result<(), Error> {
        out.push(NamedPayoff::parse(&id, &phi)?);
        Ok(())
    };
    match order {
        OrderType::Conv => {
            push("x".into(), "x".into())?;
            push("x^2".into(), "x^2".into())?;
            for s in k {
                push(format!("call_{s}"), format!("pos(x - {s})"))?;
            }
            push("abs_x0".into(), format!("abs(x - {x0})"))?;
        }
        OrderType::Iconv => {
            push("x".into(), "x".into())?;
            for s in k {
                push(format!("call_{s}"), format!("pos(x - {s})"))?;
            }
            push("pos_sq_x0".into(), format!("pos(x - {x0})^2"))?;
        }
        OrderType::Mon => {
            push("x".into(), "x".into())?;
            push(format!("min_{x0}"), format!("min(x, {x0})"))?;
            let eps = x0.abs().max(1e-12) / 50.0;
            push(format!("step_{x0}"), format!("(1 + tanh((x - {x0})/{eps}))/2"))?;
        }
        OrderType::Conc => {
            push("-x".into(), "-x".into())?;
            push("-x^2".into(), "-x^2".into())?;
            for s in k {
                push(format!("-call_{s}"), format!("-pos(x - {s})"))?;
            }
            push("-abs_x0".into(), format!("-abs(x - {x0})"))?;
        }
        OrderType::Iconc => {
            push("x".into(), "x".into())?;
            for s in k {
                push(format!("min_{s}"), format!("min(x, {s})"))?;
            }
            push("-neg_sq_x0".into(), format!("-neg(x - {x0})^2"))?;
        }
        OrderType::None => {}
    }
    for p in out.iter_mut() {
        p.payoff = match order {
            OrderType::Conv => p.payoff.clone().convex(),
            OrderType::Iconv => p.payoff.clone().convex().nondecreasing(),
            OrderType::Mon | OrderType::Iconc => p.payoff.clone().nondecreasing(),
            _ => p.payoff.clone(),
        };
    }
    Ok(out)
}

/// Checks by sampling on `x_range` that `phi` has the shape the order type
/// quantifies over.
pub fn verify_payoff_shape(phi: &PayoffSpec, order: OrderType, x_range: Range) -> Result<ConditionReport, Error> {
    let f = |p: &Point| phi.eval(p.x);
    let neg = |p: &Point| phi.eval(p.x).map(|v| -v);
    let bx = SampleBox::new(Range::point(0.0), x_range, Range::point(0.0), Range::point(0.0)).with_samples(512);
    let convex = |g: &dyn ScalarField| -> Result<ConditionReport, Error> {
        let pts = (0..bx.sample_count).map(|i| {
            let u = bx.stream::<2>(0x9A).point(i);
            (x_range.at(u[0]), x_range.at(u[1]))
        });
        let mut worst: Option<(Point, Point, f64)> = None;
        let mut n = 0;
        for (a, b) in pts {
            let (p, q) = (Point::new(0.0, a, 0.0, 0.0), Point::new(0.0, b, 0.0, 0.0));
            let (fp, fq) = (g.value(&p)?, g.value(&q)?);
            let fm = g.value(&p.midpoint(&q))?;
            n += 1;
            let e = fm - 0.5 * (fp + fq);
            if e > convexity_tol(fp, fq) && worst.is_none_or(|w| e > w.2) {
                worst = Some((p, q, e));
            }
        }
        Ok(match worst {
            None => ConditionReport::certified(ConditionId::PayoffConvex, n),
            Some((p, q, m)) => ConditionReport::violated(
                ConditionId::PayoffConvex,
                n,
                Witness {
                    subject: "payoff".to_string(),
                    points: vec![p, q],
                    magnitude: m,
                },
            ),
        })
    };
    let increasing = || check_monotone_in(&f, Var::X, &bx).map(|r| r.with_id(ConditionId::PayoffNondecreasing));
    let parts = match order {
        OrderType::Conv => vec![convex(&f)?],
        OrderType::Iconv => vec![convex(&f)?, increasing()?],
        OrderType::Mon => vec![increasing()?],
        OrderType::Conc => vec![convex(&neg)?],
        OrderType::Iconc => vec![convex(&neg)?, increasing()?],
        OrderType::None => Vec::new(),
    };
    Ok(ConditionReport::all_of(ConditionId::PayoffConvex, parts))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Engine {
    Pde,
    Mc,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Pde => "pde",
            Engine::Mc => "mc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EngineOptions {
    pub engine: Engine,
    pub grid: GridOptions,
    pub mc: McConfig,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            engine: Engine::Pde,
            grid: GridOptions::default(),
            mc: McConfig::default(),
        }
    }
}

/// A value with its Monte Carlo standard error (zero for the PDE engine).
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Valuation {
    pub value: f64,
    pub stderr: f64,
}

/// Values both problems of a pair with the same payoff. PDE solves share a
/// grid; Monte Carlo runs share the seed.
pub fn value_pair(p1: &ProblemSpec, p2: &ProblemSpec, opts: &EngineOptions) -> Result<(Valuation, Valuation), Error> {
    match opts.engine {
        Engine::Pde => {
            let grid = GridSpec::covering(&[p1, p2], &opts.grid)?;
            let v1 = pde::g_expectation(&pde::solve(p1, &grid)?)?;
            let v2 = pde::g_expectation(&pde::solve(p2, &grid)?)?;
            Ok((
                Valuation { value: v1, stderr: 0.0 },
                Valuation { value: v2, stderr: 0.0 },
            ))
        }
        Engine::Mc => {
            let e1 = mc::estimate(p1, &opts.mc)?;
            let e2 = mc::estimate(p2, &opts.mc)?;
            Ok((
                Valuation {
                    value: e1.y0_mean,
                    stderr: e1.y0_stderr,
                },
                Valuation {
                    value: e2.y0_mean,
                    stderr: e2.y0_stderr,
                },
            ))
        }
    }
}

/// Values one problem with the chosen engine.
pub fn value(p: &ProblemSpec, opts: &EngineOptions) -> Result<Valuation, Error> {
    match opts.engine {
        Engine::Pde => {
            let grid = GridSpec::for_problem(p, &opts.grid)?;
            Ok(Valuation {
                value: pde::g_expectation(&pde::solve(p, &grid)?)?,
                stderr: 0.0,
            })
        }
        Engine::Mc => {
            let e = mc::estimate(p, &opts.mc)?;
            Ok(Valuation {
                value: e.y0_mean,
                stderr: e.y0_stderr,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EmpiricalRow {
    pub payoff_id: String,
    pub e1: f64,
    pub e2: f64,
    /// `e2 - e1`; nonnegative when the predicted inequality holds.
    pub difference: f64,
    pub tolerance: f64,
    pub stderr1: f64,
    pub stderr2: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EmpiricalTable {
    pub engine: Engine,
    pub rows: Vec<EmpiricalRow>,
    pub all_pass: bool,
}

/// Tolerance on `e2 - e1` for the PDE engine.
pub fn pde_tolerance(e2: f64) -> f64 {
    1e-3 * (1.0 + libm::fabs(e2))
}

/// Row for one payoff; the tolerance depends on the engine.
pub fn empirical_row(id: &str, v1: Valuation, v2: Valuation, engine: Engine) -> EmpiricalRow {
    let difference = v2.value - v1.value;
    let tolerance = match engine {
        Engine::Pde => pde_tolerance(v2.value),
        Engine::Mc => 3.0 * libm::sqrt(v1.stderr * v1.stderr + v2.stderr * v2.stderr),
    };
    EmpiricalRow {
        payoff_id: id.to_string(),
        e1: v1.value,
        e2: v2.value,
        difference,
        tolerance,
        stderr1: v1.stderr,
        stderr2: v2.stderr,
        pass: difference >= -tolerance,
    }
}

/// Fails with `InvalidSpec` naming the first payoff whose sampled shape
/// does not fit `order` on the common grid range.
pub fn check_family_shapes(
    p1: &ProblemSpec,
    p2: &ProblemSpec,
    family: &[NamedPayoff],
    order: OrderType,
    grid: &GridOptions,
) -> Result<(), Error> {
    let g = GridSpec::covering(&[p1, p2], grid)?;
    let xr = Range::new(g.x_min, g.x_max);
    for np in family {
        let shape = verify_payoff_shape(&np.payoff, order, xr)?;
        if shape.status == Status::Violated {
            return Err(Error::InvalidSpec(format!(
                "payoff '{}' does not have the {order} shape on the sampled range",
                np.id
            )));
        }
    }
    Ok(())
}

/// Evaluates `E_{g1}[phi(X1_T)] <= E_{g2}[phi(X2_T)]` for every payoff of the
/// family. With `order` given, each payoff's shape is verified first.
pub fn verify_order_empirically(
    p1: &ProblemSpec,
    p2: &ProblemSpec,
    family: &[NamedPayoff],
    order: Option<OrderType>,
    opts: &EngineOptions,
) -> Result<EmpiricalTable, Error> {
    if let Some(order) = order {
        check_family_shapes(p1, p2, family, order, &opts.grid)?;
    }
    let mut rows = Vec::with_capacity(family.len());
    for np in family {
        let (v1, v2) = value_pair(
            &p1.with_payoff(np.payoff.clone()),
            &p2.with_payoff(np.payoff.clone()),
            opts,
        )?;
        rows.push(empirical_row(&np.id, v1, v2, opts.engine));
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(EmpiricalTable {
        engine: opts.engine,
        rows,
        all_pass,
    })
}

/// Risk comparison: conditions F/G on the transformed drivers, then
/// `-E_{g_i}[-phi]` for each payoff.
pub fn risk_compare(
    p1: &ProblemSpec,
    p2: &ProblemSpec,
    family: &[NamedPayoff],
    zeta: Option<&Expr>,
    bx: &SampleBox,
    opts: &EngineOptions,
) -> Result<(OrderingVerdict, EmpiricalTable), Error> {
    let v = risk_verdict(p1, p2, zeta, bx)?;
    let mut rows = Vec::with_capacity(family.len());
    for np in family {
        let neg = np.payoff.negated();
        let (a, b) = value_pair(&p1.with_payoff(neg.clone()), &p2.with_payoff(neg), opts)?;
        let v1 = Valuation {
            value: -a.value,
            stderr: a.stderr,
        };
        let v2 = Valuation {
            value: -b.value,
            stderr: b.stderr,
        };
        rows.push(empirical_row(&np.id, v1, v2, opts.engine));
    }
    let all_pass = rows.iter().all(|r| r.pass);
    Ok((
        v,
        EmpiricalTable {
            engine: opts.engine,
            rows,
            all_pass,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx() -> SampleBox {
        SampleBox::new(
            Range::new(0.0, 1.0),
            Range::new(40.0, 250.0),
            Range::new(-100.0, 100.0),
            Range::new(-100.0, 100.0),
        )
        .with_samples(256)
    }

    #[test]
    fn convexity_examples() {
        let f = Expr::parse("x^2 + y^2").unwrap();
        let r = check_convexity_2d(&f, Plane::XY, Frozen::Sweep, &bx(), "f").unwrap();
        assert!(r.is_certified());
        let f = Expr::parse("-x^2").unwrap();
        let r = check_convexity_2d(&f, Plane::XY, Frozen::Sweep, &bx(), "f").unwrap();
        assert_eq!(r.status, Status::Violated);
        let w = r.witness.unwrap();
        let (p, q) = (w.points[0], w.points[1]);
        let m = p.midpoint(&q);
        assert!(-m.x * m.x > 0.5 * (-p.x * p.x - q.x * q.x));
        let f = Expr::parse("0.02*neg(y - x*z)").unwrap();
        assert!(check_partial_convexity(&f, &bx(), "f").unwrap().is_certified());
    }

    #[test]
    fn dominance_examples() {
        let f1 = Expr::parse("0").unwrap();
        let f2 = Expr::parse("0.02*neg(y - x*z)").unwrap();
        assert!(check_dominance(&f1, &f2, &bx(), ZRestriction::AllZ, None)
            .unwrap()
            .is_certified());
        let zeta = Expr::constant(0.0);
        assert!(check_dominance(&f1, &f1, &bx(), ZRestriction::AllZ, Some(&zeta))
            .unwrap()
            .is_certified());
        let r = check_dominance(&f2, &f1, &bx(), ZRestriction::AllZ, None).unwrap();
        assert_eq!(r.status, Status::Violated);
    }

    #[test]
    fn monotone_examples() {
        let g = Expr::parse("0.1*y").unwrap();
        assert!(check_monotone_in(&g, Var::X, &bx()).unwrap().is_certified());
        let g = Expr::parse("-x").unwrap();
        assert_eq!(check_monotone_in(&g, Var::X, &bx()).unwrap().status, Status::Violated);
        let g = Expr::parse("0.1*abs(z)").unwrap();
        assert!(check_monotone_in(&g, Var::Z, &bx().with_nonneg_z())
            .unwrap()
            .is_certified());
        assert_eq!(check_monotone_in(&g, Var::Z, &bx()).unwrap().status, Status::Violated);
    }

    #[test]
    fn coefficient_order_examples() {
        let d1 = DiffusionSpec::parse("0", "0.2*x", 100.0, StateDomain::PositiveHalfline).unwrap();
        let d2 = DiffusionSpec::parse("0", "0.3*x", 100.0, StateDomain::PositiveHalfline).unwrap();
        let c = check_coefficient_order(&d1, &d2, &bx()).unwrap();
        assert!(c.sigma_order.is_certified());
        assert_eq!(c.sigma_equal.status, Status::Violated);
        assert!(c.x0_equal.is_certified());
        let c = check_coefficient_order(&d2, &d1, &bx()).unwrap();
        assert_eq!(c.sigma_order.status, Status::Violated);
        assert!(c.sigma_order.witness.is_some());
        let c = check_coefficient_order(&d1, &d1, &bx()).unwrap();
        assert!(c.sigma_equal.is_certified() && c.drift_equal.is_certified());
    }

    #[test]
    fn payoff_shapes() {
        let xr = Range::new(50.0, 150.0);
        for order in [
            OrderType::Conv,
            OrderType::Iconv,
            OrderType::Mon,
            OrderType::Conc,
            OrderType::Iconc,
        ] {
            for p in default_family(order, 100.0).unwrap() {
                let r = verify_payoff_shape(&p.payoff, order, xr).unwrap();
                assert!(r.is_certified(), "{order} {}", p.id);
            }
        }
        let call = PayoffSpec::parse("pos(x-100)").unwrap();
        assert_eq!(
            verify_payoff_shape(&call, OrderType::Conc, xr).unwrap().status,
            Status::Violated
        );
    }

    #[test]
    fn negated_problem_round_trip() {
        let p = ProblemSpec::new(
            DiffusionSpec::parse("0.05*x", "0.2*x", 100.0, StateDomain::PositiveHalfline).unwrap(),
            GeneratorSpec::parse("-0.05*y + 0.1*abs(z) + 0.01*x", bx()).unwrap(),
            PayoffSpec::parse("pos(x - 90)").unwrap(),
            1.0,
        )
        .unwrap();
        let n = negate_problem(&negate_problem(&p));
        for (t, x, y, z) in [(0.1, 80.0, 3.0, -2.0), (0.7, 120.0, -1.0, 4.0)] {
            let a = p.generator.eval(t, x, y, z).unwrap();
            let b = n.generator.eval(t, x, y, z).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert!((p.diffusion.mu_at(t, x).unwrap() - n.diffusion.mu_at(t, x).unwrap()).abs() < 1e-12);
        }
        assert_eq!(n.diffusion.x0, 100.0);
    }
}
