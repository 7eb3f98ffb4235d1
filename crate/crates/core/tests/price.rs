use impactflow::expsum::ExpSumNodes;
use impactflow::flow::simulate_tape;
use impactflow::par::Execution;
use impactflow::price::{assemble_price_path_with, deterministic_component_direct};
use impactflow::{ModelParams, ObservationGrid, PropagatorMode};
use proptest::prelude::*;

fn check_against_direct(mode: PropagatorMode, beta1: f64) {
    let p = ModelParams {
        beta1,
        mode,
        ..ModelParams::default()
    };
    let tape = simulate_tape(&p, 30_000, 11).unwrap();
    let grid = ObservationGrid::Regular { step: 37 };
    let fast = assemble_price_path_with(&tape, &p, mode, &grid, 11, Execution::Parallel).unwrap();
    let direct = deterministic_component_direct(&tape, &p, mode, &grid).unwrap();
    let det = &fast.components.as_ref().unwrap().deterministic;
    assert_eq!(det.len(), direct.len());
    let scale = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (k, (a, b)) in det.iter().zip(&direct).enumerate() {
        assert!(
            (a - b).abs() < 1e-6 * scale,
            "{mode:?} point {k}: {a} vs {b}"
        );
    }
}

#[test]
fn two_time_matches_direct_sum() {
    check_against_direct(PropagatorMode::TwoTime, 0.275);
}

#[test]
fn standard_matches_direct_sum() {
    check_against_direct(PropagatorMode::Standard, 0.2);
}

#[test]
fn permanent_matches_direct_sum() {
    check_against_direct(PropagatorMode::Permanent, 0.275);
}

#[test]
fn price_does_not_depend_on_execution() {
    let p = ModelParams {
        z_inf: 0.3,
        sigma_f: 0.5,
        rho: 0.2,
        ..ModelParams::default()
    };
    let tape = simulate_tape(&p, 10_000, 4).unwrap();
    let grid = ObservationGrid::Regular { step: 4 };
    let mode = p.mode;
    let a = assemble_price_path_with(&tape, &p, mode, &grid, 4, Execution::Parallel).unwrap();
    let b = assemble_price_path_with(&tape, &p, mode, &grid, 4, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    let c = a.components.as_ref().unwrap();
    for k in 0..a.total.len() {
        let sum = c.deterministic[k] + c.random_impact[k] + c.fundamental[k];
        assert!((sum - a.total[k]).abs() <= 1e-9 * (1.0 + sum.abs()));
    }
}

#[test]
fn no_impact_gives_flat_price() {
    let p = ModelParams {
        theta0: 0.0,
        ..ModelParams::default()
    };
    let tape = simulate_tape(&p, 2_000, 2).unwrap();
    let grid = ObservationGrid::Regular { step: 1 };
    let path = assemble_price_path_with(&tape, &p, p.mode, &grid, 2, Execution::Parallel).unwrap();
    assert!(path.total.iter().all(|&v| v == 0.0));
}

proptest! {
    #[test]
    fn exponential_sum_tracks_power_difference(
        alpha in 0.3f64..1.0,
        log_s in 0.0f64..6.0,
        log_x in 1.0f64..7.0,
    ) {
        let nodes = ExpSumNodes::new(10.0, 1e8, 0.5);
        let (s, x) = (10f64.powf(log_s), 10f64.powf(log_x));
        let exact = (x + s).powf(alpha) - x.powf(alpha);
        let approx = nodes.evaluate(1.0, alpha, s, x);
        prop_assert!(((approx - exact) / exact).abs() < 1e-5, "{} vs {}", approx, exact);
    }
}
