//! Subcommands. Each returns the report text and companion files; the
//! caller decides where they go.

use gorder_core::mc::{self, DependenceTable};
use gorder_core::model::{validate_assumptions, AssumptionReport};
use gorder_core::ordering::{
    self, empirical_row, EmpiricalTable, Engine, EngineOptions, OrderType, OrderingVerdict, Valuation,
};
use gorder_core::pde::{self, GridOptions, GridSpec};
use gorder_core::scenarios::{run_scenario, ScenarioId, ScenarioParams, ScenarioReport};
use gorder_core::{ConditionId, DiffusionSpec, Expr, ProblemSpec, SampleBox, Status};
use rayon::prelude::*;
use serde::Serialize;

use crate::file::{Loaded, ScenarioFile};
use crate::output::{curves_csv, empirical_csv, to_json};
use crate::{exit, CliError, Tool, TOOL};

/// A finished command: exit code, JSON report and companion files keyed by
/// the suffix that replaces the report's extension.
pub struct Outcome {
    pub code: i32,
    pub report: String,
    pub companions: Vec<(&'static str, Vec<u8>)>,
}

#[derive(Serialize)]
struct Config<'a> {
    file: &'a ScenarioFile,
    options: EngineOptions,
    #[serde(rename = "box")]
    sample_box: SampleBox,
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    to_json(v).map_err(|e| CliError::solver(format!("cannot serialize report: {e}")))
}

fn csv_bytes(r: csv::Result<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    r.map_err(|e| CliError::solver(format!("cannot write csv: {e}")))
}

pub fn read_file(path: &std::path::Path, engine: Option<Engine>, seed: Option<u64>) -> Result<ScenarioFile, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let mut f = ScenarioFile::from_json(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    f.apply_overrides(engine, seed);
    Ok(f)
}

#[derive(Serialize)]
struct ValueEntry {
    problem: u8,
    g_expectation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<f64>,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    tool: Tool,
    command: &'static str,
    config: Config<'a>,
    engine: Engine,
    g_expectation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<f64>,
    values: Vec<ValueEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridSpec>,
}

pub fn solve(file: &ScenarioFile) -> Result<Outcome, CliError> {
    let l = file.load()?;
    let mut problems = vec![&l.p1];
    problems.extend(l.p2.as_ref());
    let mut values = Vec::new();
    let mut companions = Vec::new();
    let mut grid = None;
    for (k, p) in problems.iter().enumerate() {
        let (v, se) = match l.options.engine {
            Engine::Pde => {
                let g = GridSpec::covering(&problems, &l.options.grid)?;
                let sol = pde::solve(p, &g)?;
                if k == 0 {
                    let mut s = String::new();
                    sol.write_csv(&mut s).expect("writing to a String");
                    companions.push(("grid.csv", s.into_bytes()));
                    grid = Some(g);
                }
                (pde::g_expectation(&sol)?, None)
            }
            Engine::Mc => {
                let e = mc::estimate(p, &l.options.mc)?;
                (e.y0_mean, Some(e.y0_stderr))
            }
        };
        values.push(ValueEntry {
            problem: k as u8 + 1,
            g_expectation: v,
            stderr: se,
        });
    }
    let report = SolveReport {
        tool: TOOL,
        command: "solve",
        config: Config {
            file,
            options: l.options,
            sample_box: l.sample_box,
        },
        engine: l.options.engine,
        g_expectation: values[0].g_expectation,
        stderr: values[0].stderr,
        values,
        grid,
    };
    Ok(Outcome {
        code: exit::PASS,
        report: json(&report)?,
        companions,
    })
}

#[derive(Serialize)]
struct CompareReport<'a> {
    tool: Tool,
    command: &'static str,
    config: Config<'a>,
    #[serde(flatten)]
    verdict: OrderingVerdict,
    empirical: EmpiricalTable,
    exit_code: i32,
}

fn pair(l: &Loaded) -> Result<&ProblemSpec, CliError> {
    l.p2.as_ref()
        .ok_or_else(|| CliError::input("compare needs a second problem ('diffusion2' or 'generator2')"))
}

/// Values every payoff on both problems, payoffs in parallel, rows in
/// input order.
fn empirical_table(
    p1: &ProblemSpec,
    p2: &ProblemSpec,
    family: &[ordering::NamedPayoff],
    opts: &EngineOptions,
    negate: bool,
) -> Result<EmpiricalTable, CliError> {
    let values: Vec<(Valuation, Valuation)> = family
        .par_iter()
        .map(|np| {
            let phi = if negate { np.payoff.negated() } else { np.payoff.clone() };
            ordering::value_pair(&p1.with_payoff(phi.clone()), &p2.with_payoff(phi), opts)
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<_> = family
        .iter()
        .zip(values)
        .map(|(np, (a, b))| {
            let (a, b) = if negate {
                (
                    Valuation {
                        value: -a.value,
                        stderr: a.stderr,
                    },
                    Valuation {
                        value: -b.value,
                        stderr: b.stderr,
                    },
                )
            } else {
                (a, b)
            };
            empirical_row(&np.id, a, b, opts.engine)
        })
        .collect();
    let all_pass = rows.iter().all(|r| r.pass);
    Ok(EmpiricalTable {
        engine: opts.engine,
        rows,
        all_pass,
    })
}

fn verdict_code(v: &OrderingVerdict, t: &EmpiricalTable) -> i32 {
    if v.applied_result.is_none() {
        exit::NO_VERDICT
    } else if !t.all_pass {
        exit::EMPIRICAL_FAILURE
    } else {
        exit::PASS
    }
}

/// `order = None` runs the risk comparison on `-E[-phi]`.
pub fn compare(file: &ScenarioFile, order: Option<OrderType>) -> Result<Outcome, CliError> {
    let l = file.load()?;
    let p2 = pair(&l)?;
    let (verdict, table) = match order {
        Some(order) => {
            let v = ordering::verdict(&l.p1, p2, order, l.zeta.as_ref(), &l.sample_box)?;
            let family = file.family(order, l.p1.diffusion.x0)?;
            if order != OrderType::None {
                ordering::check_family_shapes(&l.p1, p2, &family, order, &l.options.grid)?;
            }
            (v, empirical_table(&l.p1, p2, &family, &l.options, false)?)
        }
        None => {
            let v = ordering::risk_verdict(&l.p1, p2, l.zeta.as_ref(), &l.sample_box)?;
            let family = file.family(OrderType::Conv, l.p1.diffusion.x0)?;
            ordering::check_family_shapes(&l.p1, p2, &family, OrderType::Conv, &l.options.grid)?;
            (v, empirical_table(&l.p1, p2, &family, &l.options, true)?)
        }
    };
    let code = verdict_code(&verdict, &table);
    let csv = csv_bytes(empirical_csv(&table.rows))?;
    let report = CompareReport {
        tool: TOOL,
        command: if order.is_some() { "compare" } else { "risk" },
        config: Config {
            file,
            options: l.options,
            sample_box: l.sample_box,
        },
        verdict,
        empirical: table,
        exit_code: code,
    };
    Ok(Outcome {
        code,
        report: json(&report)?,
        companions: vec![("empirical.csv", csv)],
    })
}

#[derive(Serialize)]
struct ExampleConfig {
    scenario: ScenarioId,
    params: Vec<(String, String)>,
    options: EngineOptions,
}

#[derive(Serialize)]
struct ExampleReport {
    tool: Tool,
    command: &'static str,
    config: ExampleConfig,
    #[serde(flatten)]
    report: ScenarioReport,
    exit_code: i32,
}

pub fn example(
    id: &str,
    assignments: &[String],
    engine: Option<Engine>,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let id = ScenarioId::parse(id)?;
    let mut params = ScenarioParams::defaults(id);
    params.apply_assignments(assignments.iter().map(String::as_str))?;
    let mut options = EngineOptions::default();
    if let Some(e) = engine {
        options.engine = e;
    }
    if let Some(s) = seed {
        options.mc.seed = s;
    }
    let report = run_scenario(&params, &options)?;
    let code = verdict_code(&report.verdict, &report.empirical);
    let companions = vec![
        ("curves1.csv", csv_bytes(curves_csv(&report.curves, 1))?),
        ("curves2.csv", csv_bytes(curves_csv(&report.curves, 2))?),
        ("empirical.csv", csv_bytes(empirical_csv(&report.empirical.rows))?),
    ];
    let out = ExampleReport {
        tool: TOOL,
        command: "example",
        config: ExampleConfig {
            scenario: id,
            params: params.entries(),
            options,
        },
        report,
        exit_code: code,
    };
    Ok(Outcome {
        code,
        report: json(&out)?,
        companions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Convexity,
    Monotonicity,
    Sign,
    Dependence,
}

impl ProbeKind {
    fn parse(s: &str) -> Result<ProbeKind, CliError> {
        Ok(match s {
            "convexity" => ProbeKind::Convexity,
            "monotonicity" => ProbeKind::Monotonicity,
            "sign" => ProbeKind::Sign,
            "dependence" => ProbeKind::Dependence,
            other => return Err(CliError::input(format!("unknown check '{other}'"))),
        })
    }
}

#[derive(Serialize)]
struct Location {
    t: f64,
    x: f64,
}

#[derive(Serialize)]
struct ExtremumProbe {
    min_value: f64,
    location: Location,
    window: [f64; 2],
    scale: f64,
    dead_band: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SignProbe {
    layers: Vec<String>,
    first_mixed: Option<usize>,
    nondecreasing_backward: bool,
    dead_band: f64,
}

#[derive(Serialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
enum ProbeResult {
    Convexity(ExtremumProbe),
    Monotonicity(ExtremumProbe),
    Sign(SignProbe),
    Dependence(DependenceTable),
}

#[derive(Serialize)]
struct ProbeReport<'a> {
    tool: Tool,
    command: &'static str,
    config: Config<'a>,
    probes: Vec<ProbeResult>,
}

/// Perturbation sizes of the dependence probe.
pub const DEPENDENCE_SIZES: [f64; 4] = [2.0, 4.0, 8.0, 16.0];

/// Solves on a grid twice as wide with the same spacing and reports over
/// the original range, away from the boundary layer.
fn extremum_probe(p: &ProblemSpec, grid: &GridOptions, uxx: bool) -> Result<ExtremumProbe, CliError> {
    let window = GridSpec::for_problem(p, grid)?;
    let padded = GridOptions {
        l: 2.0 * grid.l,
        nx: 2 * grid.nx - 1,
        ..*grid
    };
    let sol = pde::solve(p, &GridSpec::for_problem(p, &padded)?)?;
    let e = if uxx {
        pde::convexity_profile_within(&sol, window.x_min, window.x_max)
    } else {
        pde::monotonicity_profile_within(&sol, window.x_min, window.x_max)
    };
    let dead_band = 1e-6 * sol.scale();
    Ok(ExtremumProbe {
        min_value: e.min_value,
        location: Location { t: e.t, x: e.x },
        window: [window.x_min, window.x_max],
        scale: sol.scale(),
        dead_band,
        pass: e.min_value >= -dead_band,
    })
}

pub fn dependence_table(p: &ProblemSpec, cfg: &mc::McConfig) -> Result<DependenceTable, CliError> {
    let d = &p.diffusion;
    let perturbed = DEPENDENCE_SIZES
        .iter()
        .map(|&n| {
            let sigma = Expr::constant(1.0 + 1.0 / n).mul(&d.sigma);
            let dn = DiffusionSpec::new(d.mu.clone(), sigma, d.x0, d.domain)?;
            let mut q = p.clone();
            q.diffusion = dn;
            Ok((n, q))
        })
        .collect::<Result<Vec<_>, gorder_core::Error>>()?;
    Ok(mc::continuous_dependence_experiment(p, &perturbed, cfg)?)
}

pub fn probe(file: &ScenarioFile, kind: Option<ProbeKind>) -> Result<Outcome, CliError> {
    let kinds = match kind {
        Some(k) => vec![k],
        None if file.checks.is_empty() => {
            return Err(CliError::input("no --probe given and the file lists no checks"));
        }
        None => file
            .checks
            .iter()
            .map(|c| ProbeKind::parse(c))
            .collect::<Result<_, _>>()?,
    };
    let l = file.load()?;
    let p = &l.p1;
    let mut probes = Vec::new();
    for k in kinds {
        probes.push(match k {
            ProbeKind::Convexity => ProbeResult::Convexity(extremum_probe(p, &l.options.grid, true)?),
            ProbeKind::Monotonicity => ProbeResult::Monotonicity(extremum_probe(p, &l.options.grid, false)?),
            ProbeKind::Sign => {
                let sol = pde::solve(p, &GridSpec::for_problem(p, &l.options.grid)?)?;
                let s = pde::sign_constancy_profile(&sol);
                ProbeResult::Sign(SignProbe {
                    layers: s.layers.iter().map(|x| x.symbol().to_string()).collect(),
                    first_mixed: s.first_mixed,
                    nondecreasing_backward: s.nondecreasing_backward,
                    dead_band: s.dead_band,
                })
            }
            ProbeKind::Dependence => ProbeResult::Dependence(dependence_table(p, &l.options.mc)?),
        });
    }
    let report = ProbeReport {
        tool: TOOL,
        command: "probe",
        config: Config {
            file,
            options: l.options,
            sample_box: l.sample_box,
        },
        probes,
    };
    Ok(Outcome {
        code: exit::PASS,
        report: json(&report)?,
        companions: Vec::new(),
    })
}

#[derive(Serialize)]
struct ProblemAssumptions {
    problem: u8,
    #[serde(flatten)]
    assumptions: AssumptionReport,
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    tool: Tool,
    command: &'static str,
    config: Config<'a>,
    problems: Vec<ProblemAssumptions>,
    exit_code: i32,
}

/// Assumptions whose violation makes `validate` exit with 1; the
/// normalization checks only classify the functional.
const REQUIRED: [ConditionId; 4] = [
    ConditionId::A1,
    ConditionId::SigmaPositive,
    ConditionId::A2,
    ConditionId::A4,
];

pub fn validate(file: &ScenarioFile) -> Result<Outcome, CliError> {
    let l = file.load()?;
    let mut problems = Vec::new();
    for (k, p) in std::iter::once(&l.p1).chain(l.p2.as_ref()).enumerate() {
        problems.push(ProblemAssumptions {
            problem: k as u8 + 1,
            assumptions: validate_assumptions(p, &l.sample_box)?,
        });
    }
    let violated = problems.iter().any(|p| {
        REQUIRED
            .iter()
            .any(|id| p.assumptions.status(*id) == Some(Status::Violated))
    });
    let code = if violated { exit::NO_VERDICT } else { exit::PASS };
    let report = ValidateReport {
        tool: TOOL,
        command: "validate",
        config: Config {
            file,
            options: l.options,
            sample_box: l.sample_box,
        },
        problems,
        exit_code: code,
    };
    Ok(Outcome {
        code,
        report: json(&report)?,
        companions: Vec::new(),
    })
}
