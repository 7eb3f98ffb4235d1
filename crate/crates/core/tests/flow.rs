use impactflow::flow::{flow_statistics, simulate_tape_with};
use impactflow::par::Execution;
use impactflow::ModelParams;
use proptest::prelude::*;

#[test]
fn children_inherit_sign_and_size_of_their_metaorder() {
    let p = ModelParams::default();
    let tape = simulate_tape_with(&p, 20_000, 5, Execution::Parallel).unwrap();
    assert_eq!(tape.len(), 20_000);
    let ids = tape.metaorder_id.as_ref().unwrap();
    for k in 0..tape.len() {
        let m = &tape.metaorders[ids[k] as usize];
        assert_eq!(tape.sign[k], m.sign);
        assert_eq!(tape.volume[k], m.child_volume);
        assert!(m.is_active(tape.time[k]));
    }
}

#[test]
fn seed_fixes_the_tape() {
    let p = ModelParams::default();
    let a = simulate_tape_with(&p, 5_000, 9, Execution::Parallel).unwrap();
    let b = simulate_tape_with(&p, 5_000, 9, Execution::Sequential).unwrap();
    let c = simulate_tape_with(&p, 5_000, 10, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.sign, c.sign);
}

#[test]
fn correlated_signs_are_reproducible() {
    let p = ModelParams {
        gamma_amp: 0.5,
        ..ModelParams::default()
    };
    let a = simulate_tape_with(&p, 5_000, 3, Execution::Parallel).unwrap();
    let b = simulate_tape_with(&p, 5_000, 3, Execution::Sequential).unwrap();
    assert_eq!(a, b);
    assert!(a.sign_diagnostics.is_some());
}

#[test]
fn realized_rate_is_close_to_stationary_rate() {
    let p = ModelParams::single_size(2.5);
    let tape = simulate_tape_with(&p, 200_000, 1, Execution::Parallel).unwrap();
    let stats = flow_statistics(&tape).unwrap();
    let expect = p.derived().unwrap();
    let rate = expect.trade_rate;
    assert!(
        (stats.trade_rate / rate - 1.0).abs() < 0.05,
        "{} vs {rate}",
        stats.trade_rate
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulated_tapes_are_valid(
        nu in 0.02f64..1.0,
        mu in 1.3f64..3.0,
        lambda in 0.0f64..0.2,
        seed in 0u64..1000,
    ) {
        let p = ModelParams { nu, mu1: mu, lambda, ..ModelParams::default() };
        let tape = simulate_tape_with(&p, 2_000, seed, Execution::Sequential).unwrap();
        prop_assert!(tape.validate().is_ok());
        prop_assert_eq!(tape.len(), 2_000);
        prop_assert!(tape.time.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(tape.time[0] >= tape.horizon.start);
    }
}
