//! JSON scenario files: schema, catalog entries and conversion to problem
//! specifications.

use std::collections::BTreeMap;

use gorder_core::mc::McConfig;
use gorder_core::ordering::{self, Engine, EngineOptions, NamedPayoff, OrderType};
use gorder_core::pde::{Boundary, GridOptions, GridSpec};
use gorder_core::{DiffusionSpec, Error, Expr, GeneratorSpec, PayoffSpec, ProblemSpec, Range, SampleBox, StateDomain};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub diffusion: DiffusionEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion2: Option<DiffusionEntry>,
    pub generator: FunctionEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator2: Option<FunctionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<FunctionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_family: Option<Vec<FamilyEntry>>,
    pub horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<String>,
    #[serde(default)]
    pub solver: SolverEntry,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<BoxEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionEntry {
    pub mu: String,
    pub sigma: String,
    pub x0: f64,
    pub domain: StateDomain,
}

/// Either a literal expression or a catalog entry with numeric parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default)]
    pub grid: GridEntry,
    #[serde(default)]
    pub mc: McEntry,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn param(params: &BTreeMap<String, f64>, catalog: &str, key: &str) -> Result<f64, Error> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| Error::InvalidSpec(format!("catalog '{catalog}' needs parameter '{key}'")))
}

fn check_keys(params: &BTreeMap<String, f64>, catalog: &str, allowed: &[&str]) -> Result<(), Error> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::InvalidSpec(format!(
            "catalog '{catalog}' has no parameter '{k}'"
        ))),
        None => Ok(()),
    }
}

/// Generator catalog: `zero`, `discount {r}`, `linear {r, theta}`,
/// `abs_z {alpha}`, `borrow {r, R, theta, b}`.
pub fn generator_expr(entry: &FunctionEntry) -> Result<Expr, Error> {
    let text = match (&entry.expr, &entry.catalog) {
        (Some(e), None) if entry.params.is_empty() => e.clone(),
        (None, Some(c)) => {
            let p = &entry.params;
            let get = |k| param(p, c, k);
            match c.as_str() {
                "zero" => {
                    check_keys(p, c, &[])?;
                    "0".to_string()
                }
                "discount" => {
                    check_keys(p, c, &["r"])?;
                    format!("-({})*y", get("r")?)
                }
                "linear" => {
                    check_keys(p, c, &["r", "theta"])?;
                    format!("-({})*y - ({})*z", get("r")?, get("theta")?)
                }
                "abs_z" => {
                    check_keys(p, c, &["alpha"])?;
                    format!("({})*abs(z)", get("alpha")?)
                }
                "borrow" => {
                    check_keys(p, c, &["r", "R", "theta", "b"])?;
                    let (r, big_r) = (get("r")?, get("R")?);
                    format!(
                        "-({r})*y - ({})*z + ({})*neg(y - z/({}))",
                        get("theta")?,
                        big_r - r,
                        get("b")?
                    )
                }
                other => return Err(Error::InvalidSpec(format!("unknown generator catalog '{other}'"))),
            }
        }
        _ => {
            return Err(Error::InvalidSpec(
                "give exactly one of 'expr' or 'catalog' (params only with catalog)".into(),
            ))
        }
    };
    Ok(Expr::parse(&text)?)
}

/// Payoff catalog: `identity`, `square`, `call {K}`, `put {K}`, `abs {K}`,
/// `min {K}`, `step {K, eps}`.
pub fn payoff_spec(
    expr: &Option<String>,
    catalog: &Option<String>,
    params: &BTreeMap<String, f64>,
) -> Result<PayoffSpec, Error> {
    let (text, convex, nondecreasing) = match (expr, catalog) {
        (Some(e), None) if params.is_empty() => (e.clone(), false, false),
        (None, Some(c)) => {
            let get = |k| param(params, c, k);
            let strike_only = |c: &str| check_keys(params, c, &["K"]);
            match c.as_str() {
                "identity" => {
                    check_keys(params, c, &[])?;
                    ("x".to_string(), true, true)
                }
                "square" => {
                    check_keys(params, c, &[])?;
                    ("x^2".to_string(), true, false)
                }
                "call" => {
                    strike_only(c)?;
                    (format!("pos(x - ({}))", get("K")?), true, true)
                }
                "put" => {
                    strike_only(c)?;
                    (format!("pos(({}) - x)", get("K")?), true, false)
                }
                "abs" => {
                    strike_only(c)?;
                    (format!("abs(x - ({}))", get("K")?), true, false)
                }
                "min" => {
                    strike_only(c)?;
                    (format!("min(x, ({}))", get("K")?), false, true)
                }
                "step" => {
                    check_keys(params, c, &["K", "eps"])?;
                    (
                        format!("(1 + tanh((x - ({}))/({})))/2", get("K")?, get("eps")?),
                        false,
                        true,
                    )
                }
                other => return Err(Error::InvalidSpec(format!("unknown payoff catalog '{other}'"))),
            }
        }
        _ => {
            return Err(Error::InvalidSpec(
                "give exactly one of 'expr' or 'catalog' (params only with catalog)".into(),
            ))
        }
    };
    let mut p = PayoffSpec::parse(&text)?;
    if convex {
        p = p.convex();
    }
    if nondecreasing {
        p = p.nondecreasing();
    }
    Ok(p)
}

fn range(r: Option<[f64; 2]>, default: Range) -> Result<Range, Error> {
    match r {
        None => Ok(default),
        Some([lo, hi]) if lo <= hi && lo.is_finite() && hi.is_finite() => Ok(Range::new(lo, hi)),
        Some([lo, hi]) => Err(Error::InvalidSpec(format!("invalid box range [{lo}, {hi}]"))),
    }
}

/// Problems built from a file, with the options and box they were built with.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub p1: ProblemSpec,
    pub p2: Option<ProblemSpec>,
    pub zeta: Option<Expr>,
    pub options: EngineOptions,
    pub sample_box: SampleBox,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<ScenarioFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Applies command line overrides so the config echo shows what ran.
    pub fn apply_overrides(&mut self, engine: Option<Engine>, seed: Option<u64>) {
        if let Some(e) = engine {
            self.solver.engine = Some(e);
        }
        if let Some(s) = seed {
            self.solver.mc.seed = Some(s);
            self.sample_box.get_or_insert_with(BoxEntry::default).seed = Some(s);
        }
    }

    pub fn engine_options(&self) -> EngineOptions {
        let g = GridOptions::default();
        let m = McConfig::default();
        let s = &self.solver;
        EngineOptions {
            engine: s.engine.unwrap_or(Engine::Pde),
            grid: GridOptions {
                l: s.grid.l.unwrap_or(g.l),
                nx: s.grid.nx.unwrap_or(g.nx),
                nt: s.grid.nt.unwrap_or(g.nt),
                boundary: s.grid.boundary.unwrap_or(g.boundary),
            },
            mc: McConfig {
                n_paths: s.mc.paths.unwrap_or(m.n_paths),
                n_steps: s.mc.steps.unwrap_or(m.n_steps),
                seed: s.mc.seed.unwrap_or(m.seed),
                basis_degree: s.mc.basis_degree.unwrap_or(m.basis_degree),
                antithetic: s.mc.antithetic.unwrap_or(m.antithetic),
            },
        }
    }

    /// Payoff of the file, or the call at `x0` when none is given.
    fn main_payoff(&self) -> Result<PayoffSpec, Error> {
        match &self.payoff {
            Some(p) => payoff_spec(&p.expr, &p.catalog, &p.params),
            None => match self.payoff_family.as_ref().and_then(|f| f.first()) {
                Some(f) => payoff_spec(&f.expr, &f.catalog, &f.params),
                None => payoff_spec(
                    &None,
                    &Some("call".into()),
                    &BTreeMap::from([("K".to_string(), self.diffusion.x0)]),
                ),
            },
        }
    }

    pub fn load(&self) -> Result<Loaded, Error> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidSpec("horizon must be positive".into()));
        }
        let options = self.engine_options();
        options.mc.validate()?;
        let payoff = self.main_payoff()?;
        let diffusion = |d: &DiffusionEntry| DiffusionSpec::parse(&d.mu, &d.sigma, d.x0, d.domain);
        let placeholder = |d| -> Result<ProblemSpec, Error> {
            ProblemSpec::new(
                d,
                GeneratorSpec::zero(SampleBox::new(
                    Range::new(0.0, self.horizon),
                    Range::new(-1.0, 1.0),
                    Range::new(-1.0, 1.0),
                    Range::new(-1.0, 1.0),
                )),
                payoff.clone(),
                self.horizon,
            )
        };
        let q1 = placeholder(diffusion(&self.diffusion)?)?;
        let q2 = match &self.diffusion2 {
            Some(d) => Some(placeholder(diffusion(d)?)?),
            None if self.generator2.is_some() => Some(q1.clone()),
            None => None,
        };
        let mut all = vec![&q1];
        all.extend(q2.as_ref());
        let grid = GridSpec::covering(&all, &options.grid)?;
        let mut bx = match &q2 {
            Some(q2) => ordering::pair_box(&q1, q2, &options.grid)?,
            None => q1.default_box(Range::new(grid.x_min, grid.x_max)),
        };
        if let Some(b) = &self.sample_box {
            bx.t = range(b.t, bx.t)?;
            bx.x = range(b.x, bx.x)?;
            bx.y = range(b.y, bx.y)?;
            bx.z = range(b.z, bx.z)?;
            if let Some(n) = b.samples {
                if n == 0 {
                    return Err(Error::InvalidSpec("box.samples must be positive".into()));
                }
                bx.sample_count = n;
            }
            if let Some(s) = b.seed {
                bx.seed = s;
            }
        }
        let g1 = GeneratorSpec::new(generator_expr(&self.generator)?, bx);
        let p1 = q1.with_generator(g1);
        let p2 = match q2 {
            Some(q2) => {
                let entry = self.generator2.as_ref().unwrap_or(&self.generator);
                Some(q2.with_generator(GeneratorSpec::new(generator_expr(entry)?, bx)))
            }
            None => None,
        };
        let zeta = match &self.zeta {
            Some(z) => Some(Expr::parse(z)?),
            None => None,
        };
        Ok(Loaded {
            p1,
            p2,
            zeta,
            options,
            sample_box: bx,
        })
    }

    /// The file's payoff family, the single payoff, or the default family
    /// for `order`.
    pub fn family(&self, order: OrderType, x0: f64) -> Result<Vec<NamedPayoff>, Error> {
        if let Some(f) = &self.payoff_family {
            return f
                .iter()
                .map(|e| {
                    Ok(NamedPayoff {
                        id: e.id.clone(),
                        payoff: payoff_spec(&e.expr, &e.catalog, &e.params)?,
                    })
                })
                .collect();
        }
        if let Some(p) = &self.payoff {
            return Ok(vec![NamedPayoff {
                id: "payoff".into(),
                payoff: payoff_spec(&p.expr, &p.catalog, &p.params)?,
            }]);
        }
        let base = match order {
            OrderType::None => OrderType::Conv,
            o => o,
        };
        ordering::default_family(base, x0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BS: &str = r#"{
        "diffusion": {"mu": "0.05*x", "sigma": "0.2*x", "x0": 100, "domain": "positive_halfline"},
        "generator": {"catalog": "discount", "params": {"r": 0.05}},
        "payoff": {"catalog": "call", "params": {"K": 100}},
        "horizon": 1
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let f = ScenarioFile::from_json(BS).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(ScenarioFile::from_json(&text).unwrap(), f);
        let l = f.load().unwrap();
        assert_eq!(l.p1.generator.g.eval_at(0.0, 1.0, 2.0, 3.0).unwrap(), -0.1);
        assert!(l.p2.is_none());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = BS.replace("\"horizon\"", "\"horizn\": 1, \"horizon\"");
        assert!(ScenarioFile::from_json(&bad).is_err());
        let bad = BS.replace("\"x0\"", "\"y0\": 1, \"x0\"");
        assert!(ScenarioFile::from_json(&bad).is_err());
    }

    #[test]
    fn catalog_errors() {
        let mut f = ScenarioFile::from_json(BS).unwrap();
        f.generator.catalog = Some("nope".into());
        assert!(matches!(f.load(), Err(Error::InvalidSpec(_))));
        let mut f = ScenarioFile::from_json(BS).unwrap();
        f.generator.params.insert("q".into(), 1.0);
        assert!(f.load().is_err());
        let mut f = ScenarioFile::from_json(BS).unwrap();
        f.generator.expr = Some("y".into());
        assert!(f.load().is_err());
    }

    #[test]
    fn seed_override_reaches_box_and_mc() {
        let mut f = ScenarioFile::from_json(BS).unwrap();
        f.apply_overrides(Some(Engine::Mc), Some(9));
        let l = f.load().unwrap();
        assert_eq!(l.options.mc.seed, 9);
        assert_eq!(l.sample_box.seed, 9);
        assert_eq!(l.options.engine, Engine::Mc);
    }
}
