//! Packaged finance scenarios: problem pairs built from market parameters,
//! posed in discounted variables, with the ordering they are expected to
//! satisfy.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Expr, Var};
use crate::model::{DiffusionSpec, GeneratorSpec, PayoffSpec, ProblemSpec, StateDomain};
use crate::ordering::{
    self, AppliedResult, EmpiricalTable, EngineOptions, NamedPayoff, OrderType, OrderingVerdict, Valuation,
};
use crate::pde::{self, Extremum, GridSpec};
use crate::sampling::{Range, SampleBox};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScenarioId {
    MisspecifiedVol,
    AlphaAbsZ,
    BorrowOneSide,
    BorrowBoth,
    ShortSell,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 5] = [
        ScenarioId::MisspecifiedVol,
        ScenarioId::AlphaAbsZ,
        ScenarioId::BorrowOneSide,
        ScenarioId::BorrowBoth,
        ScenarioId::ShortSell,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::MisspecifiedVol => "misspecified_vol",
            ScenarioId::AlphaAbsZ => "alpha_abs_z",
            ScenarioId::BorrowOneSide => "borrow_one_side",
            ScenarioId::BorrowBoth => "borrow_both",
            ScenarioId::ShortSell => "short_sell",
        }
    }

    pub fn parse(s: &str) -> Result<ScenarioId, Error> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }

    /// Parameters accepted by this scenario.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            ScenarioId::MisspecifiedVol => &["r", "a1", "a2", "b1", "b2", "x0", "T", "K"],
            ScenarioId::AlphaAbsZ => &["a1", "a2", "b1", "b2", "alpha", "x0", "T", "K"],
            ScenarioId::BorrowOneSide | ScenarioId::BorrowBoth => &["r", "R", "a1", "a2", "b1", "b2", "x0", "T", "K"],
            ScenarioId::ShortSell => &[
                "r",
                "R",
                "a1",
                "a2",
                "b1",
                "b2",
                "a3",
                "b3",
                "theta_gap",
                "x0",
                "T",
                "K",
            ],
        }
    }

    pub fn expected_order(self) -> OrderType {
        match self {
            ScenarioId::AlphaAbsZ => OrderType::Iconv,
            _ => OrderType::Conv,
        }
    }

    pub fn expected_result(self) -> AppliedResult {
        match self {
            ScenarioId::AlphaAbsZ => AppliedResult::Pp4,
            ScenarioId::ShortSell => AppliedResult::Pp1,
            _ => AppliedResult::Pp3,
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scenario parameters. Rates, drifts and volatilities may be expressions
/// in `t` and the undiscounted price `x`; `alpha` in `t`; the rest are numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    id: ScenarioId,
    values: BTreeMap<String, Expr>,
    strike_set: bool,
}

const NUMERIC: [&str; 6] = ["r", "R", "x0", "T", "K", "theta_gap"];

impl ScenarioParams {
    pub fn defaults(id: ScenarioId) -> ScenarioParams {
        let mut values = BTreeMap::new();
        let mut put = |k: &str, v: f64| {
            values.insert(k.to_string(), Expr::constant(v));
        };
        let (b1, b2) = match id {
            ScenarioId::BorrowOneSide | ScenarioId::ShortSell => (0.2, 0.2),
            _ => (0.2, 0.3),
        };
        put("r", 0.05);
        put("a1", 0.05);
        put("a2", 0.05);
        put("b1", b1);
        put("b2", b2);
        put("x0", 100.0);
        put("T", 1.0);
        put("K", 100.0);
        match id {
            ScenarioId::AlphaAbsZ => put("alpha", 0.1),
            ScenarioId::BorrowOneSide | ScenarioId::BorrowBoth => put("R", 0.07),
            ScenarioId::ShortSell => {
                put("R", 0.07);
                put("b3", 0.05);
                put("theta_gap", 0.1);
            }
            ScenarioId::MisspecifiedVol => {}
        }
        values.retain(|k, _| id.keys().contains(&k.as_str()));
        ScenarioParams {
            id,
            values,
            strike_set: false,
        }
    }

    pub fn id(&self) -> ScenarioId {
        self.id
    }

    /// Sets one parameter from its textual value. Setting `x0` also moves
    /// the default strike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        if !self.id.keys().contains(&key) {
            return Err(Error::InvalidSpec(format!(
                "unknown parameter '{key}' for scenario {}",
                self.id
            )));
        }
        let e = Expr::parse(value)?;
        let allowed: &[Var] = if NUMERIC.contains(&key) {
            &[]
        } else if key == "alpha" {
            &[Var::T]
        } else {
            &[Var::T, Var::X]
        };
        for v in e.free_vars().iter() {
            if !allowed.contains(&v) {
                return Err(Error::InvalidSpec(format!(
                    "parameter '{key}' may not depend on {}",
                    v.name()
                )));
            }
        }
        if key == "x0" && !self.strike_set {
            self.values.insert("K".to_string(), e.clone());
        }
        self.strike_set |= key == "K";
        self.values.insert(key.to_string(), e);
        Ok(())
    }

    /// Applies `key=value` assignments in order.
    pub fn apply_assignments<'a, I: IntoIterator<Item = &'a str>>(&mut self, items: I) -> Result<(), Error> {
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got '{item}'")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn expr(&self, key: &str) -> Option<&Expr> {
        self.values.get(key)
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        let e = self.values.get(key)?;
        if e.free_vars().is_empty() {
            e.eval_at(0.0, 0.0, 0.0, 0.0).ok()
        } else {
            None
        }
    }

    /// `(key, value)` pairs in key order, for report echoes.
    pub fn entries(&self) -> Vec<(String, String)> {
        self.values.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()
    }
}

/// A built scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: ScenarioId,
    pub params: ScenarioParams,
    /// Problems in discounted variables; the ones the conditions are checked on.
    pub p1: ProblemSpec,
    pub p2: ProblemSpec,
    /// The same problems in undiscounted variables.
    pub undiscounted: (ProblemSpec, ProblemSpec),
    /// Rate used for discounting (0 when the scenario is posed undiscounted).
    pub discount_rate: f64,
    pub zeta: Expr,
    pub strike: f64,
    pub expected_order: OrderType,
    pub expected_result: AppliedResult,
}

fn num(p: &ScenarioParams, key: &str) -> Result<f64, Error> {
    p.num(key)
        .ok_or_else(|| Error::InvalidSpec(format!("parameter '{key}' must be a number")))
}

fn expr(p: &ScenarioParams, key: &str) -> Result<Expr, Error> {
    p.expr(key)
        .cloned()
        .ok_or_else(|| Error::InvalidSpec(format!("missing parameter '{key}'")))
}

fn parse(s: &str) -> Result<Expr, Error> {
    Ok(Expr::parse(s)?)
}

/// Samples `(t, x)` over the horizon and a wide price range.
fn grid_points(t_max: f64, x0: f64) -> impl Iterator<Item = (f64, f64)> {
    let tr = Range::new(0.0, t_max);
    let xr = Range::new(x0 / 20.0, 20.0 * x0);
    (0..9).flat_map(move |i| (0..65).map(move |j| (tr.at(i as f64 / 8.0), xr.at(j as f64 / 64.0))))
}

fn require(ok: bool, what: &str) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::ParameterViolation(what.to_string()))
    }
}

fn require_everywhere<F>(t_max: f64, x0: f64, what: &str, mut pred: F) -> Result<(), Error>
where
    F: FnMut(f64, f64) -> Result<bool, Error>,
{
    for (t, x) in grid_points(t_max, x0) {
        if !pred(t, x)? {
            return Err(Error::ParameterViolation(format!("{what} (at t={t}, x={x})")));
        }
    }
    Ok(())
}

/// Discounted payoff `e^{-rT} phi(x e^{rT})`.
pub fn discount_payoff(phi: &PayoffSpec, r: f64, horizon: f64) -> Result<PayoffSpec, Error> {
    if r == 0.0 {
        return Ok(phi.clone());
    }
    let growth = libm::exp(r * horizon);
    let arg = parse(&format!("x*{growth}"))?;
    let e = Expr::constant(1.0 / growth).mul(&phi.phi.substitute(Var::X, &arg));
    Ok(PayoffSpec {
        phi: e,
        growth_exponent: phi.growth_exponent,
        asserted_convex: phi.asserted_convex,
        asserted_nondecreasing: phi.asserted_nondecreasing,
    })
}

fn probe_box(x0: f64, horizon: f64) -> SampleBox {
    let m = 10.0 * (1.0 + libm::fabs(x0));
    SampleBox::new(
        Range::new(0.0, horizon),
        Range::new(x0 / 20.0, 20.0 * x0),
        Range::new(-m, m),
        Range::new(-m, m),
    )
    .with_samples(512)
}

struct Market {
    r: f64,
    x0: f64,
    a: [Expr; 2],
    b: [Expr; 2],
}

impl Market {
    /// `e` with the price argument replaced by `x e^{rt}`.
    fn tilde(&self, e: &Expr) -> Result<Expr, Error> {
        if self.r == 0.0 {
            return Ok(e.clone());
        }
        Ok(e.substitute(Var::X, &parse(&format!("x*exp({}*t)", self.r))?))
    }

    fn theta(&self, a: &Expr, b: &Expr) -> Result<Expr, Error> {
        parse(&format!("(({a}) - {})/({b})", self.r))
    }

    fn diffusions(&self, i: usize) -> Result<(DiffusionSpec, DiffusionSpec), Error> {
        let (a, b) = (&self.a[i], &self.b[i]);
        let und = DiffusionSpec::new(
            parse(&format!("x*({a})"))?,
            parse(&format!("x*({b})"))?,
            self.x0,
            StateDomain::PositiveHalfline,
        )?;
        let disc = DiffusionSpec::new(
            parse(&format!("x*(({}) - {})", self.tilde(a)?, self.r))?,
            parse(&format!("x*({})", self.tilde(b)?))?,
            self.x0,
            StateDomain::PositiveHalfline,
        )?;
        Ok((disc, und))
    }
}

/// Builds the problem pair of a scenario and checks its parameter constraints.
pub fn build_scenario(params: &ScenarioParams) -> Result<Scenario, Error> {
    let id = params.id();
    let x0 = num(params, "x0")?;
    let horizon = num(params, "T")?;
    let strike = num(params, "K")?;
    require(x0 > 0.0 && x0.is_finite(), "x0 > 0")?;
    require(horizon > 0.0 && horizon.is_finite(), "T > 0")?;
    require(strike.is_finite(), "K finite")?;
    let r = if id == ScenarioId::AlphaAbsZ {
        0.0
    } else {
        num(params, "r")?
    };
    require(r.is_finite(), "r finite")?;
    let m = Market {
        r,
        x0,
        a: [expr(params, "a1")?, expr(params, "a2")?],
        b: [expr(params, "b1")?, expr(params, "b2")?],
    };

    require_everywhere(horizon, x0, "volatility positivity", |t, x| {
        Ok(m.b[0].eval_at(t, x, 0.0, 0.0)? > 0.0 && m.b[1].eval_at(t, x, 0.0, 0.0)? > 0.0)
    })?;
    require_everywhere(horizon, x0, "volatility order b1 <= b2", |t, x| {
        Ok(m.b[0].eval_at(t, x, 0.0, 0.0)? <= m.b[1].eval_at(t, x, 0.0, 0.0)?)
    })?;
    let big_r = match id {
        ScenarioId::BorrowOneSide | ScenarioId::BorrowBoth | ScenarioId::ShortSell => {
            let big_r = num(params, "R")?;
            require(big_r.is_finite() && big_r >= r, "rate order R >= r")?;
            big_r
        }
        _ => r,
    };
    let spread = big_r - r;

    let (d1, u1) = m.diffusions(0)?;
    let (d2, u2) = m.diffusions(1)?;
    let theta = [m.theta(&m.a[0], &m.b[0])?, m.theta(&m.a[1], &m.b[1])?];
    let theta_t = [m.tilde(&theta[0])?, m.tilde(&theta[1])?];
    let b_t = [m.tilde(&m.b[0])?, m.tilde(&m.b[1])?];

    // Generators as (discounted, undiscounted) strings.
    let (g1, g2): ((String, String), (String, String)) = match id {
        ScenarioId::MisspecifiedVol => (
            (format!("-z*({})", theta_t[0]), format!("-{r}*y - z*({})", theta[0])),
            (format!("-z*({})", theta_t[1]), format!("-{r}*y - z*({})", theta[1])),
        ),
        ScenarioId::AlphaAbsZ => {
            let alpha = expr(params, "alpha")?;
            require_everywhere(horizon, x0, "alpha > 0", |t, _| {
                Ok(alpha.eval_at(t, 0.0, 0.0, 0.0)? > 0.0)
            })?;
            require_everywhere(horizon, x0, "drift order a1 <= a2", |t, x| {
                Ok(m.a[0].eval_at(t, x, 0.0, 0.0)? <= m.a[1].eval_at(t, x, 0.0, 0.0)?)
            })?;
            for (name, d) in [
                ("x*a1", &u1.mu),
                ("x*b1", &u1.sigma),
                ("x*a2", &u2.mu),
                ("x*b2", &u2.sigma),
            ] {
                require_convex_in_x(d, horizon, x0, name)?;
            }
            let g = format!("({alpha})*abs(z)");
            ((g.clone(), g.clone()), (g.clone(), g))
        }
        ScenarioId::BorrowOneSide => (
            (format!("-z*({})", theta_t[0]), format!("-{r}*y - z*({})", theta[0])),
            (
                format!("-z*({}) + {spread}*neg(y - z/({}))", theta_t[1], b_t[1]),
                format!("-{r}*y - z*({}) + {spread}*neg(y - z/({}))", theta[1], m.b[1]),
            ),
        ),
        ScenarioId::BorrowBoth => (
            (
                format!("-z*({}) + {spread}*neg(y - z/({}))", theta_t[0], b_t[0]),
                format!("-{r}*y - z*({}) + {spread}*neg(y - z/({}))", theta[0], m.b[0]),
            ),
            (
                format!("-z*({}) + {spread}*neg(y - z/({}))", theta_t[1], b_t[1]),
                format!("-{r}*y - z*({}) + {spread}*neg(y - z/({}))", theta[1], m.b[1]),
            ),
        ),
        ScenarioId::ShortSell => {
            let b3 = expr(params, "b3")?;
            require_everywhere(horizon, x0, "volatility positivity b3 > 0", |t, x| {
                Ok(b3.eval_at(t, x, 0.0, 0.0)? > 0.0)
            })?;
            let theta3 = match params.expr("a3") {
                Some(a3) => m.theta(a3, &b3)?,
                None => {
                    let gap = num(params, "theta_gap")?;
                    parse(&format!("({}) + {gap}", theta[1]))?
                }
            };
            require_everywhere(horizon, x0, "theta order theta2 <= theta3", |t, x| {
                Ok(theta[1].eval_at(t, x, 0.0, 0.0)? <= theta3.eval_at(t, x, 0.0, 0.0)?)
            })?;
            let th3_t = m.tilde(&theta3)?;
            let b3_t = m.tilde(&b3)?;
            let disc = format!(
                "-z*({t2}) + neg(z)*(({t3}) - ({t2})) + {spread}*neg(y - pos(z)/({b2}) + neg(z)/({b3}))",
                t2 = theta_t[1],
                t3 = th3_t,
                b2 = b_t[1],
                b3 = b3_t
            );
            let und = format!(
                "-{r}*y - z*({t2}) + neg(z)*(({t3}) - ({t2})) + {spread}*neg(y - pos(z)/({b2}) + neg(z)/({b3}))",
                t2 = theta[1],
                t3 = theta3,
                b2 = m.b[1],
                b3 = b3
            );
            (
                (format!("-z*({})", theta_t[0]), format!("-{r}*y - z*({})", theta[0])),
                (disc, und),
            )
        }
    };

    let probe = probe_box(x0, horizon);
    let call = PayoffSpec::parse(&format!("pos(x - {strike})"))?
        .convex()
        .nondecreasing();
    let call_t = discount_payoff(&call, r, horizon)?;
    let mk = |d: DiffusionSpec, g: &str, phi: &PayoffSpec| -> Result<ProblemSpec, Error> {
        ProblemSpec::new(d, GeneratorSpec::new(parse(g)?, probe), phi.clone(), horizon)
    };
    let p1 = mk(d1, &g1.0, &call_t)?;
    let p2 = mk(d2, &g2.0, &call_t)?;
    let und = (mk(u1, &g1.1, &call)?, mk(u2, &g2.1, &call)?);
    Ok(Scenario {
        id,
        params: params.clone(),
        p1,
        p2,
        undiscounted: und,
        discount_rate: r,
        zeta: Expr::constant(0.0),
        strike,
        expected_order: id.expected_order(),
        expected_result: id.expected_result(),
    })
}

fn require_convex_in_x(e: &Expr, horizon: f64, x0: f64, name: &str) -> Result<(), Error> {
    let h = x0 / 64.0;
    require_everywhere(horizon, x0, &format!("{name} convex in x"), |t, x| {
        if x <= h {
            return Ok(true);
        }
        let (a, b, c) = (
            e.eval_at(t, x - h, 0.0, 0.0)?,
            e.eval_at(t, x, 0.0, 0.0)?,
            e.eval_at(t, x + h, 0.0, 0.0)?,
        );
        Ok(a + c - 2.0 * b >= -1e-9 * (1.0 + a.abs() + c.abs()))
    })
}

impl Scenario {
    pub fn build(id: ScenarioId) -> Result<Scenario, Error> {
        build_scenario(&ScenarioParams::defaults(id))
    }

    /// Default payoff family for `order`, in discounted variables.
    pub fn family(&self, order: OrderType) -> Result<Vec<NamedPayoff>, Error> {
        ordering::default_family(order, self.p1.diffusion.x0)?
            .into_iter()
            .map(|np| {
                Ok(NamedPayoff {
                    id: np.id,
                    payoff: discount_payoff(&np.payoff, self.discount_rate, self.p1.horizon)?,
                })
            })
            .collect()
    }

    pub fn sample_box(&self, opts: &EngineOptions) -> Result<SampleBox, Error> {
        ordering::pair_box(&self.p1, &self.p2, &opts.grid)
    }

    pub fn verdict(&self, order: OrderType, opts: &EngineOptions) -> Result<OrderingVerdict, Error> {
        ordering::verdict(&self.p1, &self.p2, order, Some(&self.zeta), &self.sample_box(opts)?)
    }
}

/// Shape diagnostics of one PDE solution.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProfileRow {
    pub payoff_id: String,
    pub problem: u8,
    pub min_uxx: Extremum,
    pub min_ux: Extremum,
    pub uxx_mixed: bool,
    pub scale: f64,
}

/// `u(0, .)` of one problem for one payoff.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub payoff_id: String,
    pub problem: u8,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

/// At-the-money call values at both price levels.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CallValues {
    pub discounted: [Valuation; 2],
    pub undiscounted: [Valuation; 2],
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ScenarioReport {
    pub scenario: ScenarioId,
    pub params: Vec<(String, String)>,
    pub expected_order: OrderType,
    pub expected_result: AppliedResult,
    pub verdict: OrderingVerdict,
    pub verdict_matches: bool,
    pub empirical: EmpiricalTable,
    pub profiles: Vec<ProfileRow>,
    pub call: CallValues,
    #[cfg_attr(feature = "serde", serde(skip))]
    pub curves: Vec<Curve>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.verdict_matches && self.empirical.all_pass
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ScenarioId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Verdict, empirical table, PDE shape profiles and the call values of a
/// scenario.
pub fn run_scenario(params: &ScenarioParams, opts: &EngineOptions) -> Result<ScenarioReport, Error> {
    let sc = build_scenario(params)?;
    let order = sc.expected_order;
    let verdict = sc.verdict(order, opts)?;
    let family = sc.family(order)?;
    let empirical = ordering::verify_order_empirically(&sc.p1, &sc.p2, &family, Some(order), opts)?;

    let grid = GridSpec::covering(&[&sc.p1, &sc.p2], &opts.grid)?;
    let mut profiles = Vec::new();
    let mut curves = Vec::new();
    for np in &family {
        for (k, p) in [(1u8, &sc.p1), (2u8, &sc.p2)] {
            let sol = pde::solve(&p.with_payoff(np.payoff.clone()), &grid)?;
            let sign = pde::sign_constancy_profile(&sol);
            profiles.push(ProfileRow {
                payoff_id: np.id.clone(),
                problem: k,
                min_uxx: pde::convexity_profile(&sol),
                min_ux: pde::monotonicity_profile(&sol),
                uxx_mixed: sign.first_mixed.is_some(),
                scale: sol.scale(),
            });
            curves.push(Curve {
                payoff_id: np.id.clone(),
                problem: k,
                x: sol.nodes.clone(),
                u: sol.layer(0).to_vec(),
            });
        }
    }

    let (d1, d2) = ordering::value_pair(&sc.p1, &sc.p2, opts)?;
    let (u1, u2) = ordering::value_pair(&sc.undiscounted.0, &sc.undiscounted.1, opts)?;
    let verdict_matches = verdict.order_type == order && verdict.applied_result == Some(sc.expected_result);
    Ok(ScenarioReport {
        scenario: sc.id,
        params: params.entries(),
        expected_order: order,
        expected_result: sc.expected_result,
        verdict,
        verdict_matches,
        empirical,
        profiles,
        call: CallValues {
            discounted: [d1, d2],
            undiscounted: [u1, u2],
        },
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::{ConditionId, Status};
    use crate::model::validate_assumptions;

    #[test]
    fn identical_volatilities_give_identical_problems() {
        let mut p = ScenarioParams::defaults(ScenarioId::MisspecifiedVol);
        p.set("b2", "0.2").unwrap();
        let sc = build_scenario(&p).unwrap();
        let bx = probe_box(100.0, 1.0).with_samples(1000);
        let seq = bx.stream::<4>(1);
        for i in 0..1000 {
            let q = bx.map(seq.point(i));
            let f1 = sc.p1.driver().eval(q.t, q.x, q.y, q.z).unwrap();
            let f2 = sc.p2.driver().eval(q.t, q.x, q.y, q.z).unwrap();
            assert_eq!(f1, f2);
            assert_eq!(
                sc.p1.diffusion.sigma_at(q.t, q.x).unwrap(),
                sc.p2.diffusion.sigma_at(q.t, q.x).unwrap()
            );
        }
    }

    #[test]
    fn constraint_vanishes_at_equal_rates() {
        let mut p = ScenarioParams::defaults(ScenarioId::BorrowOneSide);
        p.set("R", "0.05").unwrap();
        let sc = build_scenario(&p).unwrap();
        for (t, x, y, z) in [
            (0.1, 90.0, -3.0, 5.0),
            (0.9, 120.0, 4.0, -7.0),
            (0.5, 100.0, -50.0, 80.0),
        ] {
            let a = sc.p1.generator.eval(t, x, y, z).unwrap();
            let b = sc.p2.generator.eval(t, x, y, z).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_violations() {
        let mut p = ScenarioParams::defaults(ScenarioId::ShortSell);
        p.set("theta_gap", "-0.1").unwrap();
        match build_scenario(&p) {
            Err(Error::ParameterViolation(m)) => assert!(m.starts_with("theta order"), "{m}"),
            other => panic!("{other:?}"),
        }
        let mut p = ScenarioParams::defaults(ScenarioId::MisspecifiedVol);
        p.set("b1", "0.4").unwrap();
        assert!(matches!(build_scenario(&p), Err(Error::ParameterViolation(_))));
        let mut p = ScenarioParams::defaults(ScenarioId::BorrowBoth);
        p.set("R", "0.01").unwrap();
        assert!(matches!(build_scenario(&p), Err(Error::ParameterViolation(_))));
        let mut p = ScenarioParams::defaults(ScenarioId::AlphaAbsZ);
        assert!(p.set("R", "0.1").is_err());
        p.set("alpha", "-0.1").unwrap();
        assert!(matches!(build_scenario(&p), Err(Error::ParameterViolation(_))));
    }

    #[test]
    fn scenarios_satisfy_assumptions() {
        for id in ScenarioId::ALL {
            let sc = Scenario::build(id).unwrap();
            for p in [&sc.p1, &sc.p2] {
                let bx = p.default_box(Range::new(10.0, 500.0)).with_samples(256);
                let rep = validate_assumptions(p, &bx).unwrap();
                // A3 and A'3 only classify the functional.
                for r in rep
                    .reports
                    .iter()
                    .filter(|r| !matches!(r.id, ConditionId::A3 | ConditionId::A3p))
                {
                    assert_ne!(r.status, Status::Violated, "{id} {:?}", r);
                }
            }
        }
    }

    #[test]
    fn discounting_preserves_generator_values() {
        // g(t,S,Y,Z) = -rY + e^{rt} g~(t, S e^{-rt}, Y e^{-rt}, Z e^{-rt})
        let sc = Scenario::build(ScenarioId::ShortSell).unwrap();
        let r = sc.discount_rate;
        for (t, s, y, z) in [(0.3, 95.0, 2.0, -4.0), (0.8, 130.0, -1.0, 6.0), (0.0, 100.0, 0.5, 0.0)] {
            let e = libm::exp(r * t);
            let lhs = sc.undiscounted.1.generator.eval(t, s, y, z).unwrap();
            let rhs = -r * y + e * sc.p2.generator.eval(t, s / e, y / e, z / e).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} {rhs}");
        }
    }

    #[test]
    fn expected_verdicts() {
        let opts = EngineOptions::default();
        for id in ScenarioId::ALL {
            let sc = Scenario::build(id).unwrap();
            let v = sc.verdict(sc.expected_order, &opts).unwrap();
            assert_eq!(v.applied_result, Some(sc.expected_result), "{id}: {:?}", v.blocking);
        }
        let sc = Scenario::build(ScenarioId::ShortSell).unwrap();
        let v = sc.verdict(OrderType::Conv, &opts).unwrap();
        assert!(!v.condition(AppliedResult::Pp3, ConditionId::B2).unwrap().is_certified());
        assert!(v.condition(AppliedResult::Pp1, ConditionId::E2).unwrap().is_certified());
    }
}
