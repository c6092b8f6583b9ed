use gorder_core::model::scale_generator;
use gorder_core::ordering::{
    self, default_family, negate_problem, pair_box, risk_compare, value, verdict, verify_order_empirically,
    AppliedResult, EngineOptions, OrderType,
};
use gorder_core::pde::{self, GridOptions, GridSpec};
use gorder_core::scenarios::{Scenario, ScenarioId};
use gorder_core::PayoffSpec;

fn pde_opts() -> EngineOptions {
    EngineOptions::default()
}

#[test]
fn identical_problems_give_pp3_and_zero_differences() {
    let sc = Scenario::build(ScenarioId::BorrowOneSide).unwrap();
    let opts = pde_opts();
    let bx = pair_box(&sc.p2, &sc.p2, &opts.grid).unwrap();
    let v = verdict(&sc.p2, &sc.p2, OrderType::Conv, None, &bx).unwrap();
    assert_eq!(v.applied_result, Some(AppliedResult::Pp3));
    assert!(v.conditions.iter().all(|c| c.is_certified()));
    let fam = sc.family(OrderType::Conv).unwrap();
    let t = verify_order_empirically(&sc.p2, &sc.p2, &fam, Some(OrderType::Conv), &opts).unwrap();
    assert!(t.rows.iter().all(|r| r.difference == 0.0));
}

#[test]
fn reversed_volatilities_block_every_result() {
    let sc = Scenario::build(ScenarioId::MisspecifiedVol).unwrap();
    let opts = pde_opts();
    let bx = pair_box(&sc.p2, &sc.p1, &opts.grid).unwrap();
    let v = verdict(&sc.p2, &sc.p1, OrderType::Conv, None, &bx).unwrap();
    assert_eq!(v.order_type, OrderType::None);
    assert!(v.blocking.contains(&gorder_core::ConditionId::SigmaOrder));
    let w = v.attempts[0]
        .conditions
        .iter()
        .find(|c| c.id == gorder_core::ConditionId::SigmaOrder)
        .unwrap()
        .witness
        .clone()
        .unwrap();
    let p = w.points[0];
    assert!(sc.p2.diffusion.sigma_at(p.t, p.x).unwrap() > sc.p1.diffusion.sigma_at(p.t, p.x).unwrap());
}

#[test]
fn concave_request_agrees_with_direct_evaluation() {
    // b1 <= b2 puts X2 below X1 in the concave order.
    let sc = Scenario::build(ScenarioId::MisspecifiedVol).unwrap();
    let opts = pde_opts();
    let bx = pair_box(&sc.p2, &sc.p1, &opts.grid).unwrap();
    let v = verdict(&sc.p2, &sc.p1, OrderType::Conc, None, &bx).unwrap();
    assert!(v.via_duality);
    assert_eq!(v.order_type, OrderType::Conc);
    assert_eq!(v.applied_result, Some(AppliedResult::Pp3));
    let fam = sc.family(OrderType::Conc).unwrap();
    let t = verify_order_empirically(&sc.p2, &sc.p1, &fam, Some(OrderType::Conc), &opts).unwrap();
    assert!(t.all_pass, "{:?}", t.rows);

    // The reverse request is refused, and the direct check fails too.
    let v = verdict(&sc.p1, &sc.p2, OrderType::Conc, None, &bx).unwrap();
    assert_eq!(v.order_type, OrderType::None);
    let t = verify_order_empirically(&sc.p1, &sc.p2, &fam, Some(OrderType::Conc), &opts).unwrap();
    assert!(!t.all_pass);
}

#[test]
fn negated_problem_has_negated_value() {
    let sc = Scenario::build(ScenarioId::BorrowOneSide).unwrap();
    let opts = EngineOptions {
        grid: GridOptions {
            nx: 801,
            ..GridOptions::default()
        },
        ..pde_opts()
    };
    let v = value(&sc.p2, &opts).unwrap().value;
    let n = value(&negate_problem(&sc.p2), &opts).unwrap().value;
    assert!((v + n).abs() < 2e-2 * (1.0 + v.abs()), "{v} {n}");
}

#[test]
fn risk_duality_for_linear_generators() {
    let sc = Scenario::build(ScenarioId::MisspecifiedVol).unwrap();
    let opts = pde_opts();
    let bx = pair_box(&sc.p1, &sc.p2, &opts.grid).unwrap();
    let fam = sc.family(OrderType::Conv).unwrap();
    let (v, risk) = risk_compare(&sc.p1, &sc.p2, &fam, None, &bx, &opts).unwrap();
    assert_eq!(v.applied_result, Some(AppliedResult::Pp9));
    assert!(risk.all_pass);
    let plain = verify_order_empirically(&sc.p1, &sc.p2, &fam, None, &opts).unwrap();
    for (a, b) in risk.rows.iter().zip(&plain.rows) {
        let tol = ordering::pde_tolerance(b.e2);
        assert!((a.e1 - b.e1).abs() <= tol && (a.e2 - b.e2).abs() <= tol, "{a:?} {b:?}");
    }
}

#[test]
fn risk_comparison_with_borrowing() {
    let sc = Scenario::build(ScenarioId::BorrowOneSide).unwrap();
    let opts = pde_opts();
    let bx = pair_box(&sc.p1, &sc.p2, &opts.grid).unwrap();
    let fam = sc.family(OrderType::Conv).unwrap();
    let (v, t) = risk_compare(&sc.p1, &sc.p2, &fam, None, &bx, &opts).unwrap();
    // The transformed penalty -(R-r) neg(-y + z/b) is concave, so F2 fails.
    assert_ne!(v.applied_result, Some(AppliedResult::Pp9));
    assert!(!t.rows.is_empty());
}

#[test]
fn scaling_generator_scales_value() {
    let sc = Scenario::build(ScenarioId::BorrowOneSide).unwrap();
    let opts = pde_opts();
    let base = value(&sc.p2, &opts).unwrap().value;
    for a in [-1.0, 2.0] {
        let g = scale_generator(&sc.p2.generator, a).unwrap();
        let p = sc.p2.with_generator(g).with_payoff(sc.p2.payoff.scaled(a));
        let v = value(&p, &opts).unwrap().value;
        let tol = 2.0 * ordering::pde_tolerance(a * base);
        assert!((v - a * base).abs() <= tol, "a={a}: {v} vs {}", a * base);
    }
    assert!(scale_generator(&sc.p2.generator, 0.0).is_err());
}

#[test]
fn comparison_principle() {
    let sc = Scenario::build(ScenarioId::BorrowBoth).unwrap();
    let lo = sc.p2.with_payoff(PayoffSpec::parse("pos(x - 100)").unwrap());
    let hi = sc
        .p2
        .with_payoff(PayoffSpec::parse("pos(x - 100) + 0.1*pos(x - 120)").unwrap());
    let grid = GridSpec::covering(&[&lo, &hi], &GridOptions::default()).unwrap();
    let a = pde::solve(&lo, &grid).unwrap();
    let b = pde::solve(&hi, &grid).unwrap();
    let band = 1e-6 * a.scale().max(b.scale());
    for (u, v) in a.u.iter().zip(&b.u) {
        assert!(*u <= *v + band, "{u} {v}");
    }
}

#[test]
fn doubling_truncation_leaves_value_unchanged() {
    let sc = Scenario::build(ScenarioId::ShortSell).unwrap();
    let p = sc
        .p2
        .with_payoff(default_family(OrderType::Conv, 100.0).unwrap()[5].payoff.clone());
    let v5 = value(&p, &pde_opts()).unwrap().value;
    let wide = EngineOptions {
        grid: GridOptions {
            l: 10.0,
            nx: 801,
            ..GridOptions::default()
        },
        ..pde_opts()
    };
    let v10 = value(&p, &wide).unwrap().value;
    assert!((v5 - v10).abs() <= ordering::pde_tolerance(v10), "{v5} {v10}");
}

#[test]
fn monotone_order_profiles() {
    // Equal volatilities and x-free generators: the monotone order applies
    // and nondecreasing payoffs give nondecreasing values.
    for id in [ScenarioId::BorrowOneSide, ScenarioId::ShortSell] {
        let sc = Scenario::build(id).unwrap();
        let opts = pde_opts();
        let v = sc.verdict(OrderType::Mon, &opts).unwrap();
        assert_eq!(v.applied_result, Some(AppliedResult::Pp4_1), "{id}");
        let fam = sc.family(OrderType::Mon).unwrap();
        let t = verify_order_empirically(&sc.p1, &sc.p2, &fam, Some(OrderType::Mon), &opts).unwrap();
        assert!(t.all_pass);
    }
}
