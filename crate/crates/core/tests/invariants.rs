use fuchswave::coeffs::{classify_regime, CoefficientModel, RegimeCase};
use fuchswave::estimates::fit_power_law;
use fuchswave::linalg::{c, C64};
use fuchswave::modal::{ModalSystem, SystemForm};
use fuchswave::solver::spectral::fft_nd;
use fuchswave::zones::{chi, chi_prime, ZoneConfig};
use proptest::prelude::*;
use rustfft::FftPlanner;

proptest! {
    #[test]
    fn roots_satisfy_vieta(b0 in 0.0f64..6.0, m0 in 0.0f64..6.0) {
        let r = classify_regime(b0, m0);
        let sum = r.mu_plus + r.mu_minus;
        let prod = r.mu_plus * r.mu_minus;
        prop_assert!((sum - c(-(b0 + 1.0))).norm() < 1e-12);
        prop_assert!((prod - c(b0 + m0)).norm() < 1e-10 * (1.0 + b0 + m0));
        prop_assert!(r.mu_plus.re >= r.mu_minus.re);
        prop_assert_eq!(r.case == RegimeCase::ComplexPair, 4.0 * m0 > (b0 - 1.0).powi(2));
    }

    #[test]
    fn cutoff_is_monotone_and_smooth(x in 0.0f64..3.0, dx in 0.0f64..1.0) {
        let (a, b) = (chi(x), chi(x + dx));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
        prop_assert!(chi_prime(x) <= 0.0);
        let h = 1e-6;
        if x > 1.0 + 2.0 * h && x < 2.0 - 2.0 * h {
            let fd = (chi(x + h) - chi(x - h)) / (2.0 * h);
            prop_assert!((fd - chi_prime(x)).abs() < 1e-5 * (1.0 + chi_prime(x).abs()));
        }
    }

    #[test]
    fn zone_cutoffs_sum_to_one(t in 0.0f64..1e4, lxi in -4.0f64..1.0) {
        let zone = ZoneConfig::default();
        let (d, hs, hl) = zone.cutoffs(t, 10f64.powf(lxi));
        prop_assert!((d + hs + hl - 1.0).abs() < 1e-12);
        prop_assert!(zone.micro_weight(t, 10f64.powf(lxi)) > 0.0);
    }

    #[test]
    fn fit_recovers_exact_power_laws(p in -4.0f64..1.0, scale in 1e-3f64..1e3) {
        let times: Vec<f64> = (0..30).map(|i| 10f64.powf(2.0 + 2.0 * i as f64 / 29.0)).collect();
        let values: Vec<f64> = times.iter().map(|t| scale * t.powf(p)).collect();
        let fit = fit_power_law(&times, &values, (1e2, 1e4)).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-6);
    }

    #[test]
    fn fft_roundtrip_is_identity(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 64), two_d in any::<bool>()) {
        let (side, dim) = if two_d { (8, 2) } else { (64, 1) };
        let orig: Vec<C64> = seed.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        let mut data = orig.clone();
        let mut planner = FftPlanner::new();
        fft_nd(&mut data, side, dim, false, &mut planner);
        fft_nd(&mut data, side, dim, true, &mut planner);
        let n = orig.len() as f64;
        for (a, b) in data.iter().zip(&orig) {
            prop_assert!((a / n - b).norm() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagator_is_a_cocycle(b0 in 0.5f64..4.0, m0 in 0.0f64..3.0, lxi in -2.0f64..1.0, s in 0.0f64..5.0, d1 in 0.5f64..20.0, d2 in 0.5f64..20.0) {
        let xi = 10f64.powf(lxi);
        let sys = ModalSystem::new(CoefficientModel::pure(b0, m0), ZoneConfig::default(), xi, SystemForm::Dissipative);
        let defect = sys.check_cocycle(s, s + d1, s + d1 + d2, 1e-12).unwrap();
        prop_assert!(defect < 1e-8, "defect {defect}");
    }
}
