mod common;

use common::{random_couplings, random_state};
use lrtfim::couplings::{fit_power_law, synthetic_power_law};
use lrtfim::detection::{apply_detection_error, deconvolve, DetectionChannel, DistributionKind, ProbabilityDistribution};
use lrtfim::dynamics::RampSchedule;
use lrtfim::hamiltonian::IsingHamiltonian;
use lrtfim::observables::{binder_cumulant, staggered_magnetization};
use lrtfim::spectrum::log_grid;
use lrtfim::IsingSign;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detection_round_trip(n in 1usize..9, dark in 0.55f64..1.0, bright in 0.55f64..1.0, raw in prop::collection::vec(0.0f64..1.0, 256)) {
        let dim = 1usize << n;
        let total: f64 = raw[..dim].iter().sum::<f64>() + 1e-9;
        let mut v: Vec<f64> = raw[..dim].iter().map(|x| (x + 1e-9 / dim as f64) / total).collect();
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        let p = ProbabilityDistribution::new(n, v, DistributionKind::Raw).unwrap();
        let ch = DetectionChannel::asymmetric(dark, bright).unwrap();
        let fwd = apply_detection_error(&p, &ch).unwrap();
        prop_assert!((fwd.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(fwd.values().iter().all(|&x| x >= 0.0));
        let back = deconvolve(&fwd, &ch).unwrap();
        for (a, b) in back.values().iter().zip(p.values()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian(seed in 0u64..1000, field in -3.0f64..3.0, fm in any::<bool>()) {
        let sign = if fm { IsingSign::Fm } else { IsingSign::Afm };
        let h = IsingHamiltonian::new(random_couplings(5, seed), field, sign);
        let (a, b) = (random_state(5, seed + 1), random_state(5, seed + 2));
        let lhs = a.inner(&h.apply(&b).unwrap());
        let rhs = b.inner(&h.apply(&a).unwrap()).conj();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn staggered_magnetization_bounds(n in 1usize..16, s in any::<usize>()) {
        let s = s & ((1usize << n) - 1);
        let m: f64 = staggered_magnetization(s, n);
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert_eq!(m, staggered_magnetization::<f64>(s ^ ((1usize << n) - 1), n));
    }

    #[test]
    fn binder_raw_at_most_one(values in prop::collection::vec(0.0f64..1.0, 2..200)) {
        prop_assume!(values.iter().any(|&v| v > 1e-6));
        let g = binder_cumulant(&values, 10).unwrap();
        prop_assert!(g.raw <= 1.0 + 1e-12);
    }

    #[test]
    fn power_law_fit_recovers_parameters(n in 3usize..20, j0 in 0.1f64..10.0, alpha in 0.0f64..3.0) {
        let fit = fit_power_law(&synthetic_power_law(n, j0, alpha).unwrap()).unwrap();
        prop_assert!((fit.j0 - j0).abs() < 1e-10 * j0.max(1.0));
        prop_assert!((fit.alpha - alpha).abs() < 1e-10);
    }

    #[test]
    fn reversed_ramp_is_mirror_symmetric(b0 in 0.5f64..10.0, tau in 0.01f64..5.0, u in 0.0f64..1.0) {
        let s = RampSchedule::down_then_reverse(b0, tau);
        let mid = s.turning_time();
        let d = u * mid;
        prop_assert!((s.b(mid - d) - s.b(mid + d)).abs() < 1e-12 * b0);
        prop_assert!(s.b(mid) <= s.b(mid - d) + 1e-15);
    }

    #[test]
    fn log_grid_is_monotone(lo in 1e-3f64..1.0, span in 1.5f64..100.0, points in 2usize..300) {
        let g = log_grid(lo, lo * span, points);
        prop_assert_eq!(g.len(), points);
        prop_assert!((g[0] - lo).abs() < 1e-12 * lo);
        prop_assert_eq!(*g.last().unwrap(), lo * span);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
