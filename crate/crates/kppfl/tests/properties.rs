//! Property tests for engine and field invariants.

use proptest::prelude::*;

use kppfl::ipm::{self, DomainSpec, ParticleEnsemble};
use kppfl::stats::{histogram, ols, torus_projection};
use kppfl::{FieldRealization, SpectralDensity};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restriction_maps_any_reals_into_the_cell(
        xs in prop::collection::vec(-1e6f64..1e6, 2..40),
        period in 0.1f64..100.0,
    ) {
        let n = xs.len() / 2 * 2;
        let mut ens = ParticleEnsemble::from_positions(
            xs[..n].to_vec(),
            2,
            DomainSpec::torus(vec![period, period]).unwrap(),
        )
        .unwrap();
        ipm::restrict(&mut ens);
        for l in 0..ens.len() {
            for d in 0..2 {
                let x = ens.position(l)[d];
                prop_assert!(x >= 0.0 && x < period, "x = {x}, period = {period}");
            }
        }
    }

    #[test]
    fn weights_normalize_for_any_bounded_potential(
        c in prop::collection::vec(-500.0f64..500.0, 2..200),
        dt in 1e-4f64..1.0,
    ) {
        let (w, pfgr) = ipm::fitness_weights_from_potentials(&c, dt).unwrap();
        let sum: f64 = w.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9, "sum = {sum}");
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        let c_min = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let c_max = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(pfgr >= c_min - 1e-9 && pfgr <= c_max + 1e-9, "pfgr = {pfgr}");
    }

    #[test]
    fn histogram_counts_always_total_n(
        xs in prop::collection::vec(-50.0f64..50.0, 2..300),
        bins in 1usize..30,
        lo in -10.0f64..0.0,
        width in 0.1f64..20.0,
    ) {
        let ens = ParticleEnsemble::from_positions(xs.clone(), 1, DomainSpec::unbounded(1)).unwrap();
        let h = histogram(&ens, 0, bins, (lo, lo + width)).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>() + h.out_of_range, xs.len() as u64);
    }

    #[test]
    fn projection_preserves_count_and_wrapped_coordinates(
        xs in prop::collection::vec(-1e4f64..1e4, 2..100),
        period in 0.5f64..50.0,
    ) {
        let ens = ParticleEnsemble::from_positions(xs.clone(), 1, DomainSpec::unbounded(1)).unwrap();
        let projected = torus_projection(&ens, &[period]).unwrap();
        prop_assert_eq!(projected.len(), ens.len());
        for l in 0..ens.len() {
            let want = xs[l].rem_euclid(period);
            let got = projected.position(l)[0];
            let diff = (got - want).abs().min((got - want + period).abs()).min((got - want - period).abs());
            prop_assert!(diff < 1e-9, "wrap mismatch: {got} vs {want}");
            prop_assert!(got >= 0.0 && got < period);
        }
    }

    #[test]
    fn ols_recovers_exact_lines(
        slope in -5.0f64..5.0,
        intercept in -10.0f64..10.0,
        n in 3usize..40,
    ) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.37 + 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| intercept + slope * x).collect();
        let fit = ols(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - intercept).abs() < 1e-9);
        prop_assert!(fit.slope_stderr < 1e-9);
    }

    #[test]
    fn realizations_are_periodic_and_seed_deterministic(
        seed in 0u64..1_000_000,
        n_f in 0usize..64,
        x in -100.0f64..100.0,
    ) {
        let dk = 1.0 / (20.0 * std::f64::consts::PI);
        let a = FieldRealization::sample(SpectralDensity::K05Exp, dk, n_f, seed).unwrap();
        let b = FieldRealization::sample(SpectralDensity::K05Exp, dk, n_f, seed).unwrap();
        prop_assert_eq!(a.eval(x).to_bits(), b.eval(x).to_bits());
        prop_assert!((a.eval(x) - a.eval(x + a.period())).abs() < 1e-10);
    }
}
