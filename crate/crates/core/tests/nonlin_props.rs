use entk_core::kernel::{nonlin_map, quadrature_oracle};
use entk_core::NonlinKind;
use proptest::prelude::*;

fn triple() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.05f64..4.0, 0.05f64..4.0, -0.99f64..0.99).prop_map(|(a, b, rho)| (a, rho * (a * b).sqrt(), b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_forms_match_quadrature((a, c, b) in triple()) {
        for kind in [NonlinKind::Relu, NonlinKind::Erf] {
            let (v, d) = nonlin_map(kind, a, c, b).unwrap();
            let (qv, qd) = quadrature_oracle(kind, a, c, b, 20).unwrap();
            prop_assert!((v - qv).abs() < 1e-8 && (d - qd).abs() < 1e-8);
        }
    }

    #[test]
    fn output_is_symmetric_and_bounded((a, c, b) in triple()) {
        for kind in [NonlinKind::Relu, NonlinKind::Erf] {
            let (v, _) = nonlin_map(kind, a, c, b).unwrap();
            let (w, _) = nonlin_map(kind, b, c, a).unwrap();
            let (va, _) = nonlin_map(kind, a, a, a).unwrap();
            let (vb, _) = nonlin_map(kind, b, b, b).unwrap();
            prop_assert_eq!(v, w);
            prop_assert!(v.abs() <= (va * vb).sqrt() * (1.0 + 1e-12));
        }
    }
}
