//! Per-hypothesis reports shared by the assumption validators and the
//! ordering condition engine.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{EvalError, Expr};
use crate::sampling::{Point, SampleBox};

/// Identifier of a sampled hypothesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionId {
    A1,
    A2,
    A3,
    A3p,
    A4,
    B1,
    B2,
    Bp1,
    Bp2,
    Bp3,
    Bpp1,
    Bpp2,
    C1,
    C2,
    C3,
    C4,
    Cp1,
    Cp2,
    Cp3,
    D1,
    D2,
    D3,
    E1,
    E2,
    Ep1,
    Ep2,
    Ep3,
    F1,
    F2,
    G1,
    G2,
    SigmaOrder,
    SigmaPositive,
    SigmaEqual,
    DriftOrder,
    DriftEqual,
    X0Order,
    X0Equal,
    Novikov,
    PayoffConvex,
    PayoffNondecreasing,
    Convexity,
    Dominance,
    Monotone,
}

impl ConditionId {
    pub fn as_str(self) -> &'static str {
        use ConditionId::*;
        match self {
            A1 => "A1",
            A2 => "A2",
            A3 => "A3",
            A3p => "A'3",
            A4 => "A4",
            B1 => "B1",
            B2 => "B2",
            Bp1 => "B'1",
            Bp2 => "B'2",
            Bp3 => "B'3",
            Bpp1 => "B''1",
            Bpp2 => "B''2",
            C1 => "C1",
            C2 => "C2",
            C3 => "C3",
            C4 => "C4",
            Cp1 => "C'1",
            Cp2 => "C'2",
            Cp3 => "C'3",
            D1 => "D1",
            D2 => "D2",
            D3 => "D3",
            E1 => "E1",
            E2 => "E2",
            Ep1 => "E'1",
            Ep2 => "E'2",
            Ep3 => "E'3",
            F1 => "F1",
            F2 => "F2",
            G1 => "G1",
            G2 => "G2",
            SigmaOrder => "sigma_order",
            SigmaPositive => "sigma_positive",
            SigmaEqual => "sigma_equal",
            DriftOrder => "drift_order",
            DriftEqual => "drift_equal",
            X0Order => "x0_order",
            X0Equal => "x0_equal",
            Novikov => "novikov",
            PayoffConvex => "payoff_convex",
            PayoffNondecreasing => "payoff_nondecreasing",
            Convexity => "convexity",
            Dominance => "dominance",
            Monotone => "monotone",
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ConditionId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Status {
    Certified,
    Inconclusive,
    Violated,
}

impl Status {
    /// The less favourable of two statuses.
    pub fn worst(self, other: Status) -> Status {
        self.max(other)
    }
}

/// Points that exhibit a violation. Their meaning depends on the check:
/// one point for dominance and positivity, two for Lipschitz quotients,
/// monotonicity and midpoint convexity (the midpoint is implied).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Witness {
    pub subject: String,
    pub points: Vec<Point>,
    pub magnitude: f64,
}

/// Fitted constant reported alongside a check (e.g. a Lipschitz bound).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct NamedConstant {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConditionReport {
    pub id: ConditionId,
    pub status: Status,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub witness: Option<Witness>,
    pub samples: usize,
    pub max_violation: f64,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Vec::is_empty"))]
    pub constants: Vec<NamedConstant>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub note: Option<String>,
}

impl ConditionReport {
    pub fn certified(id: ConditionId, samples: usize) -> Self {
        ConditionReport {
            id,
            status: Status::Certified,
            witness: None,
            samples,
            max_violation: 0.0,
            constants: Vec::new(),
            note: None,
        }
    }

    pub fn violated(id: ConditionId, samples: usize, witness: Witness) -> Self {
        ConditionReport {
            id,
            status: Status::Violated,
            max_violation: witness.magnitude,
            witness: Some(witness),
            samples,
            constants: Vec::new(),
            note: None,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.status == Status::Certified
    }

    pub fn with_id(mut self, id: ConditionId) -> Self {
        self.id = id;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Combines sub-checks that must all hold.
    pub fn all_of(id: ConditionId, parts: Vec<ConditionReport>) -> Self {
        let mut out = ConditionReport::certified(id, 0);
        for p in parts {
            out.samples += p.samples;
            if p.status > out.status {
                out.status = p.status;
            }
            if p.max_violation > out.max_violation || (out.witness.is_none() && p.witness.is_some()) {
                out.max_violation = out.max_violation.max(p.max_violation);
                if p.witness.is_some() {
                    out.witness = p.witness;
                }
            }
            out.constants.extend(p.constants);
            if out.note.is_none() {
                out.note = p.note;
            }
        }
        out
    }

    /// Combines alternatives of which one must hold.
    pub fn any_of(id: ConditionId, parts: Vec<ConditionReport>) -> Self {
        let samples = parts.iter().map(|p| p.samples).sum();
        let best = parts.iter().map(|p| p.status).min().unwrap_or(Status::Inconclusive);
        if best == Status::Certified {
            let mut out = ConditionReport::certified(id, samples);
            out.note = parts.into_iter().find(|p| p.is_certified()).and_then(|p| p.note);
            return out;
        }
        let mut out = ConditionReport::all_of(id, parts);
        out.status = best;
        out
    }
}

/// A scalar function of `(t, x, y, z)` that conditions can be checked on.
pub trait ScalarField {
    fn value(&self, p: &Point) -> Result<f64, EvalError>;
}

impl ScalarField for Expr {
    #[inline]
    fn value(&self, p: &Point) -> Result<f64, EvalError> {
        self.eval_at(p.t, p.x, p.y, p.z)
    }
}

impl<F> ScalarField for F
where
    F: Fn(&Point) -> Result<f64, EvalError>,
{
    fn value(&self, p: &Point) -> Result<f64, EvalError> {
        self(p)
    }
}

/// Sampled Lipschitz constants along the given axes.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzFit {
    pub status: Status,
    pub constants: Vec<NamedConstant>,
    pub witness: Option<Witness>,
    pub samples: usize,
}

/// Scans difference quotients of `f` along each axis.
///
/// Quotients are sampled on the box and on two nested boxes (half and
/// quarter size). When the maximal quotient keeps growing with the box the
/// function is reported as not globally Lipschitz; when it keeps growing as
/// the pair separation shrinks the result is inconclusive.
pub fn lipschitz_scan(
    f: &dyn ScalarField,
    axes: &[crate::expr::Var],
    bx: &SampleBox,
    subject: &str,
) -> Result<LipschitzFit, EvalError> {
    let n = bx.sample_count.max(1);
    let mut status = Status::Certified;
    let mut constants = Vec::new();
    let mut witness = None;
    let mut samples = 0;
    for (k, &axis) in axes.iter().enumerate() {
        let full_width = bx.range(axis).width();
        if full_width <= 0.0 {
            constants.push(NamedConstant {
                name: String::from(axis.name()),
                value: 0.0,
            });
            continue;
        }
        let mut by_scale = [0.0f64; 3];
        let mut best_pair = None;
        for (si, scale) in [0.25, 0.5, 1.0].into_iter().enumerate() {
            let b = bx.nested(scale);
            let r = b.range(axis);
            let seq = b.stream::<5>(0x11 + k as u64);
            for i in 0..n {
                let u = seq.point(i);
                let p = b.map([u[0], u[1], u[2], u[3]]);
                let q = p.with(axis, r.at(u[4]));
                let d = libm::fabs(q.get(axis) - p.get(axis));
                if d < 1e-9 * r.width() {
                    continue;
                }
                let quotient = libm::fabs(f.value(&q)? - f.value(&p)?) / d;
                samples += 1;
                if quotient > by_scale[si] {
                    by_scale[si] = quotient;
                    if si == 2 {
                        best_pair = Some((p, q, quotient));
                    }
                }
            }
        }
        // Local pairs at two separations on the full box.
        let r = bx.range(axis);
        let seq = bx.stream::<4>(0x51 + k as u64);
        let mut local = [0.0f64; 2];
        for i in 0..n {
            let u = seq.point(i);
            let p = bx.map(u);
            for (hi, h) in [1e-3, 1e-5].into_iter().enumerate() {
                let step = h * full_width;
                let qa = if p.get(axis) + step <= r.hi {
                    p.get(axis) + step
                } else {
                    p.get(axis) - step
                };
                let q = p.with(axis, qa);
                let quotient = libm::fabs(f.value(&q)? - f.value(&p)?) / step;
                samples += 1;
                if quotient > local[hi] {
                    local[hi] = quotient;
                    if quotient > by_scale[2] {
                        best_pair = Some((p, q, quotient));
                    }
                }
            }
        }
        let l_full = by_scale[2].max(local[0]).max(local[1]);
        let eps = 1e-9 * (1.0 + l_full);
        let grows_with_box = by_scale[2] > 1.5 * by_scale[1] + eps && by_scale[1] > 1.5 * by_scale[0] + eps;
        let grows_with_refinement = local[1] > 1.5 * local[0] + eps;
        let axis_status = if grows_with_box {
            Status::Violated
        } else if grows_with_refinement {
            Status::Inconclusive
        } else {
            Status::Certified
        };
        if axis_status > status {
            status = axis_status;
            if let Some((p, q, m)) = best_pair {
                witness = Some(Witness {
                    subject: alloc::format!("{subject} along {}", axis.name()),
                    points: alloc::vec![p, q],
                    magnitude: m,
                });
            }
        }
        constants.push(NamedConstant {
            name: String::from(axis.name()),
            value: l_full,
        });
    }
    Ok(LipschitzFit {
        status,
        constants,
        witness,
        samples,
    })
}
