use coopstab::equilibria::{classify_griffith, h, h_peak, h_prime, solve_h_roots, Stability};
use coopstab::measure::table1_predict;
use coopstab::{GriffithModel, GriffithParams, Model, Point};
use proptest::prelude::*;

fn params(alphas: Vec<f64>, m: f64) -> GriffithParams {
    GriffithParams::unit_noise(alphas, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn roots_solve_the_scalar_equation(m in 1.0f64..6.0, alphas in prop::collection::vec(0.2f64..1.5, 2..5)) {
        let p = params(alphas, m);
        let model = GriffithModel::new(p.clone());
        for z in solve_h_roots(m, p.phi()).unwrap() {
            prop_assert!((h(m, z) - p.phi()).abs() < 1e-10);
            for s in [z, -z] {
                prop_assert!(model.drift(&p.v0().scaled(s)).norm_inf() < 1e-9);
            }
        }
    }

    #[test]
    fn sign_test_agrees_with_spectrum(m in 1.0f64..6.0, alphas in prop::collection::vec(0.2f64..1.5, 2..6)) {
        let c = classify_griffith(&params(alphas, m)).unwrap();
        for r in &c.records[1..] {
            let z = r.griffith_root.unwrap();
            let hp = h_prime(m, z.abs());
            if hp.abs() > 1e-6 {
                let max_re = r.eigenvalues[0].re;
                if hp < 0.0 {
                    prop_assert!(max_re < 0.0);
                    prop_assert_eq!(r.classification, Stability::AsymptoticallyStable);
                } else {
                    prop_assert!(max_re > 0.0);
                    prop_assert_eq!(r.classification, Stability::Unstable);
                }
                prop_assert!(!r.disagreement);
            }
        }
    }

    #[test]
    fn mirrored_equilibria_share_spectra(m in 1.0f64..6.0, alphas in prop::collection::vec(0.2f64..1.2, 2..5)) {
        let c = classify_griffith(&params(alphas, m)).unwrap();
        for pair in c.records[1..].chunks(2) {
            prop_assert_eq!(pair[0].eigenvalues.len(), pair[1].eigenvalues.len());
            for (a, b) in pair[0].eigenvalues.iter().zip(&pair[1].eigenvalues) {
                prop_assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn classifier_matches_spectral_stable_set(m in 1.0f64..5.0, alphas in prop::collection::vec(0.1f64..1.5, 2..4)) {
        let p = params(alphas, m);
        let pred = table1_predict(m, p.phi()).unwrap();
        prop_assume!(!pred.marginal);
        if let Some((_, phim)) = h_peak(m) {
            prop_assume!((p.phi() - phim).abs() > 1e-9);
        }
        let c = classify_griffith(&p).unwrap();
        let stable = c.stable_set();
        let predicted: Vec<Point> = pred.points(&p.v0());
        prop_assert_eq!(stable.len(), predicted.len());
        for q in &predicted {
            prop_assert!(stable.iter().any(|s| s.distance(q) < 1e-9));
        }
    }
}

#[test]
fn peak_value_matches_formula() {
    for m in [1.5, 2.0, 3.0, 7.0] {
        let (z, phim) = h_peak(m).unwrap();
        assert!((z - (m - 1.0f64).powf(1.0 / m)).abs() < 1e-15);
        assert!((phim - h(m, z)).abs() < 1e-15);
        assert_eq!(solve_h_roots(m, phim * 1.01).unwrap().len(), 0);
        assert_eq!(solve_h_roots(m, phim * 0.99).unwrap().len(), 2);
    }
}
