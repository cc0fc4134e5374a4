use coopstab::models::{solve_lyapunov, LYAPUNOV_RESIDUAL_TOL};
use coopstab::GriffithParams;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn griffith_linear_parts_have_quadratic_lyapunov_functions(
        alphas in prop::collection::vec(0.1f64..3.0, 1..7),
        m in 1.0f64..4.0,
    ) {
        let p = GriffithParams::unit_noise(alphas, m).unwrap();
        let a = p.linear_part();
        let v = solve_lyapunov(&a).unwrap();
        let b = v.matrix();
        let resid = a.transpose() * b + b * &a + nalgebra::DMatrix::identity(a.nrows(), a.nrows());
        prop_assert!(resid.amax() <= LYAPUNOV_RESIDUAL_TOL, "residual {}", resid.amax());
        prop_assert!(v.residual() <= LYAPUNOV_RESIDUAL_TOL);
        prop_assert!(v.min_eigenvalue() > 0.0);
        prop_assert!((b - b.transpose()).amax() < 1e-14);
    }
}
