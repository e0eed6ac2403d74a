//! Property tests for the structural invariants: schedule round-trips,
//! the forward semigroup, scale equivariance of the assignment distance,
//! and sample CSV round-trips.

use proptest::prelude::*;
use scorelab::metrics::w2_assignment;
use scorelab::spectral::{GaussianMeasure, ModelSpace, RngStream, SampleSet, Schedule};
use scorelab::targets::{GaussianMixture, TargetModel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_alphas_roundtrip(
        t_final in 0.5f64..20.0,
        delta_frac in 0.0f64..0.8,
        n in 1usize..200,
    ) {
        let delta = delta_frac * t_final;
        prop_assume!(t_final - delta > 1e-6);
        let s = Schedule::uniform(t_final, delta, n).unwrap();
        prop_assert_eq!(s.points().len(), n + 1);
        prop_assert!((s.points().last().unwrap() - (t_final - delta)).abs() < 1e-12);
        for (w, &alpha) in s.points().windows(2).zip(s.alphas()) {
            let recomputed = (w[0] - w[1]).exp();
            prop_assert!(((recomputed - alpha) / recomputed).abs() <= 1e-15);
            prop_assert!(alpha > 0.0 && alpha < 1.0);
        }
    }

    #[test]
    fn forward_semigroup_property(
        s in 0.05f64..2.0,
        t in 0.05f64..2.0,
        m1 in -3.0f64..3.0,
        m2 in -3.0f64..3.0,
        v1 in 0.05f64..2.0,
        v2 in 0.05f64..2.0,
        w in 0.05f64..0.95,
        c in 0.2f64..3.0,
    ) {
        let space = ModelSpace::isotropic(1, c, c).unwrap();
        let target = TargetModel::GaussianMixture(GaussianMixture::new(
            vec![w, 1.0 - w],
            vec![vec![m1], vec![m2]],
            vec![vec![v1], vec![v2]],
        ).unwrap());
        let direct = target.forward_marginal(&space, s + t).unwrap();
        let stopped = target.stopped(&space, s).unwrap()
            .forward_marginal(&space, t).unwrap();
        for j in 0..2 {
            let dm = (direct.mixture().mean(j)[0] - stopped.mixture().mean(j)[0]).abs();
            let dv = (direct.mixture().var(j)[0] - stopped.mixture().var(j)[0]).abs();
            prop_assert!(dm < 1e-12, "mean gap {} at component {}", dm, j);
            prop_assert!(dv < 1e-12, "var gap {} at component {}", dv, j);
        }
    }

    #[test]
    fn assignment_scale_equivariance(
        lambda in 0.1f64..20.0,
        seed in 0u64..1000,
        n in 8usize..48,
    ) {
        let g = GaussianMeasure::new(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        let s1 = g.sample(n, &RngStream::with_stream(seed, 0));
        let s2 = g.sample(n, &RngStream::with_stream(seed, 1));
        let base = w2_assignment(&s1, &s2).unwrap().value;
        let scale = |s: &SampleSet| SampleSet::from_rows(
            s.dim, s.seed, s.data().iter().map(|v| lambda * v).collect());
        let scaled = w2_assignment(&scale(&s1), &scale(&s2)).unwrap().value;
        prop_assert!(
            (scaled - lambda * base).abs() <= 1e-9 * (1.0 + scaled),
            "{} vs {}", scaled, lambda * base
        );
    }

    #[test]
    fn sample_csv_roundtrip(
        seed in 0u64..500,
        n in 1usize..32,
        d in 1usize..4,
    ) {
        let g = GaussianMeasure::new(vec![0.5; d], vec![2.0; d]).unwrap();
        let s = g.sample(n, &RngStream::new(seed));
        let text = s.to_csv_string();
        let back = SampleSet::read_csv(text.as_bytes()).unwrap();
        prop_assert_eq!(s, back);
    }
}
