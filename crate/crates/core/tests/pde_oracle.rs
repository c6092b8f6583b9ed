use gorder_core::model::{DiffusionSpec, GeneratorSpec, PayoffSpec, ProblemSpec, StateDomain};
use gorder_core::pde::{self, GridOptions, GridSpec};
use gorder_core::sampling::{Range, SampleBox};

fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn bs_call(s: f64, k: f64, r: f64, vol: f64, t: f64) -> f64 {
    let d1 = ((s / k).ln() + (r + 0.5 * vol * vol) * t) / (vol * t.sqrt());
    let d2 = d1 - vol * t.sqrt();
    s * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)
}

fn probe() -> SampleBox {
    SampleBox::new(
        Range::new(0.0, 1.0),
        Range::new(30.0, 300.0),
        Range::new(-100.0, 100.0),
        Range::new(-100.0, 100.0),
    )
}

fn bs_problem() -> ProblemSpec {
    ProblemSpec::new(
        DiffusionSpec::parse("0.05*x", "0.2*x", 100.0, StateDomain::PositiveHalfline).unwrap(),
        GeneratorSpec::parse("-0.05*y", probe()).unwrap(),
        PayoffSpec::parse("max(x-100, 0)").unwrap(),
        1.0,
    )
    .unwrap()
}

fn solve(p: &ProblemSpec, nx: usize, nt: usize) -> f64 {
    let opts = GridOptions {
        nx,
        nt,
        ..GridOptions::default()
    };
    let grid = GridSpec::for_problem(p, &opts).unwrap();
    pde::g_expectation(&pde::solve(p, &grid).unwrap()).unwrap()
}

#[test]
fn oracle_value() {
    let v = bs_call(100.0, 100.0, 0.05, 0.2, 1.0);
    assert!((v - 10.4506).abs() < 1e-4, "{v}");
}

#[test]
fn black_scholes_call() {
    let oracle = bs_call(100.0, 100.0, 0.05, 0.2, 1.0);
    let v = solve(&bs_problem(), 401, 400);
    assert!((v - oracle).abs() < 0.05, "pde {v} oracle {oracle}");
}

#[test]
fn grid_convergence() {
    let oracle = bs_call(100.0, 100.0, 0.05, 0.2, 1.0);
    let p = bs_problem();
    let coarse = (solve(&p, 101, 100) - oracle).abs();
    let fine = (solve(&p, 201, 200) - oracle).abs();
    println!("coarse {coarse:e} fine {fine:e}");
    assert!(coarse / fine >= 1.7, "coarse {coarse:e} fine {fine:e}");
}
