use impactflow::estimators::clip::clip_volumes;
use impactflow::estimators::fit::{fit_power_law, FitOptions};
use impactflow::estimators::imbalance::generalized_imbalance;
use impactflow::flow::TradeTape;
use proptest::prelude::*;

fn tape_strategy() -> impl Strategy<Value = TradeTape> {
    prop::collection::vec((any::<bool>(), 0.01f64..1e4), 1..400).prop_map(|rows| {
        let (sign, volume) = rows
            .into_iter()
            .map(|(up, q)| (if up { 1i8 } else { -1 }, q))
            .unzip();
        TradeTape::from_signs_volumes(sign, volume).unwrap()
    })
}

proptest! {
    #[test]
    fn clipping_never_raises_a_volume(tape in tape_strategy(), f in 0.001f64..1.0, day in 1usize..100) {
        let c = clip_volumes(&tape, f, day).unwrap();
        for (a, b) in c.volume.iter().zip(&tape.volume) {
            prop_assert!(a <= b);
        }
        prop_assert_eq!(&c.sign, &tape.sign);
    }

    #[test]
    fn clipping_is_monotone_in_the_fraction(tape in tape_strategy(), f in 0.001f64..0.5, day in 1usize..100) {
        let tight = clip_volumes(&tape, f, day).unwrap();
        let loose = clip_volumes(&tape, 2.0 * f, day).unwrap();
        for (a, b) in tight.volume.iter().zip(&loose.volume) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn zero_power_imbalance_counts_signs(tape in tape_strategy(), t in 1usize..20) {
        prop_assume!(t <= tape.len());
        let s = generalized_imbalance(&tape, t, 0.0).unwrap();
        prop_assert_eq!(s.values.len(), tape.len() / t);
        for (w, v) in s.values.iter().enumerate() {
            let n: i32 = tape.sign[w * t..(w + 1) * t].iter().map(|&e| e as i32).sum();
            prop_assert_eq!(*v, n as f64);
        }
    }

    #[test]
    fn imbalance_scales_with_volume_unit(tape in tape_strategy(), a in 0.0f64..3.0, c in 0.1f64..10.0) {
        let mut scaled = tape.clone();
        scaled.volume.iter_mut().for_each(|q| *q *= c);
        let t = tape.len().min(7);
        let x = generalized_imbalance(&tape, t, a).unwrap();
        let y = generalized_imbalance(&scaled, t, a).unwrap();
        let k = c.powf(a);
        for (u, v) in x.values.iter().zip(&y.values) {
            prop_assert!((u * k - v).abs() <= 1e-9 * (u.abs() * k + v.abs() + 1.0));
        }
    }

    #[test]
    fn power_law_fit_recovers_exponent(zeta in -2.0f64..3.0, pre in 0.01f64..100.0) {
        let x: Vec<f64> = (0..12).map(|k| 2f64.powi(k + 3)).collect();
        let y: Vec<f64> = x.iter().map(|v| pre * v.powf(zeta)).collect();
        let fit = fit_power_law(&x, &y, FitOptions::pure((10.0, 20_000.0))).unwrap();
        prop_assert!((fit.exponent - zeta).abs() < 1e-9);
        prop_assert!((fit.prefactor / pre - 1.0).abs() < 1e-8);
    }
}
