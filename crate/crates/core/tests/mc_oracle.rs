use gorder_core::expr::Expr;
use gorder_core::mc::{self, LinearCoefficients, McConfig};
use gorder_core::model::{DiffusionSpec, GeneratorSpec, PayoffSpec, StateDomain};
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

fn gbm() -> DiffusionSpec {
    DiffusionSpec::parse("0.05*x", "0.2*x", 100.0, StateDomain::PositiveHalfline).unwrap()
}

#[test]
fn lognormal_mean() {
    let cfg = McConfig {
        n_paths: 100_000,
        n_steps: 50,
        ..McConfig::default()
    };
    let e = mc::simulate_forward(&gbm(), 1.0, &cfg).unwrap();
    assert!(e.log_scheme);
    let xt = e.step_states(50);
    let n = xt.len() as f64;
    let mean = xt.iter().sum::<f64>() / n;
    let var = xt.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let oracle = 100.0 * 0.05f64.exp();
    assert!((mean - oracle).abs() < 3.0 * (var / n).sqrt(), "{mean} vs {oracle}");
}

#[test]
fn black_scholes_lsmc() {
    let cfg = McConfig {
        n_paths: 200_000,
        n_steps: 100,
        ..McConfig::default()
    };
    let g = GeneratorSpec::parse("-0.05*y", probe()).unwrap();
    let phi = PayoffSpec::parse("max(x-100, 0)").unwrap();
    let paths = mc::simulate_forward(&gbm(), 1.0, &cfg).unwrap();
    let est = mc::solve_bsde_lsmc(&paths, &g, &phi, &cfg).unwrap();
    let oracle = bs_call(100.0, 100.0, 0.05, 0.2, 1.0);
    println!("lsmc {} +- {}", est.y0_mean, est.y0_stderr);
    assert!((est.y0_mean - oracle).abs() < 3.0 * est.y0_stderr);
}

#[test]
fn antithetic_reduces_error() {
    let base = McConfig {
        n_paths: 50_000,
        n_steps: 20,
        ..McConfig::default()
    };
    let g = GeneratorSpec::parse("-0.05*y", probe()).unwrap();
    let phi = PayoffSpec::parse("max(x-100, 0)").unwrap();
    let plain = mc::estimate_parts(&gbm(), 1.0, &g, &phi, &base).unwrap();
    let anti_cfg = McConfig {
        antithetic: true,
        ..base
    };
    let anti = mc::estimate_parts(&gbm(), 1.0, &g, &phi, &anti_cfg).unwrap();
    let ratio = (anti.y0_stderr / plain.y0_stderr).powi(2);
    println!("variance ratio {ratio}");
    assert!(ratio <= 0.55);
}

#[test]
fn lsmc_matches_linear_closed_form() {
    let cases = [(0.05, 0.10, 0.2), (0.03, 0.01, 0.25), (0.0, 0.08, 0.3)];
    for (r, a, b) in cases {
        let theta = (a - r) / b;
        let d = DiffusionSpec::parse(
            &format!("{a}*x"),
            &format!("{b}*x"),
            100.0,
            StateDomain::PositiveHalfline,
        )
        .unwrap();
        let g = GeneratorSpec::parse(&format!("-{r}*y - {theta}*z"), probe()).unwrap();
        let phi = PayoffSpec::parse("max(x-100, 0)").unwrap();
        let cfg = McConfig {
            n_paths: 100_000,
            n_steps: 50,
            ..McConfig::default()
        };
        let lsmc = mc::estimate_parts(&d, 1.0, &g, &phi, &cfg).unwrap();
        let coef = LinearCoefficients {
            a: Expr::constant(0.0),
            b: Expr::constant(-r),
            c: Expr::constant(-theta),
            k: Expr::constant(0.0),
        };
        let cf = mc::linear_bsde_closed_form(&d, &coef, &phi, 1.0, &McConfig { seed: 7, ..cfg }).unwrap();
        let se = (lsmc.y0_stderr.powi(2) + cf.y0_stderr.powi(2)).sqrt();
        println!(
            "r={r} lsmc {} cf {} bs {} se {se}",
            lsmc.y0_mean,
            cf.y0_mean,
            bs_call(100.0, 100.0, r, b, 1.0)
        );
        assert!((lsmc.y0_mean - cf.y0_mean).abs() < 3.0 * se);
    }
}
