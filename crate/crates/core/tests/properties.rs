use std::f64::consts::PI;

use approx::assert_relative_eq;
use heatctl::fullctl::{control_factor, SeriesTolerances, SeriesVariant};
use heatctl::io::format_f64;
use heatctl::kernel::{semigroup_apply, SubdomainWindow};
use heatctl::subctl::{assemble_alpha, assemble_beta};
use heatctl::SpectralDomain;
use proptest::prelude::*;

fn domain() -> SpectralDomain {
    SpectralDomain::interval(PI, 12, 96).unwrap()
}

fn coefficients(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alpha_is_symmetric(a in 0.0f64..1.5, width in 0.2f64..1.6, horizon in 0.2f64..2.0, m in 1usize..7) {
        let d = domain();
        let w = SubdomainWindow::interval(a, a + width).unwrap();
        let alpha = assemble_alpha(&d, &w, horizon, m).unwrap();
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(alpha[i * m + j], alpha[j * m + i]);
            }
            prop_assert!(alpha[i * m + i] > 0.0);
        }
    }

    #[test]
    fn beta_is_linear(u in coefficients(8), v in coefficients(8), s in -3.0f64..3.0) {
        let d = domain();
        let fu = d.synthesize(&u).unwrap();
        let fv = d.synthesize(&v).unwrap();
        let combined = fu.scaled(s).plus(&fv).unwrap();
        let bu = assemble_beta(&d, &fu, 1.0, 8).unwrap().values;
        let bv = assemble_beta(&d, &fv, 1.0, 8).unwrap().values;
        let bc = assemble_beta(&d, &combined, 1.0, 8).unwrap().values;
        for j in 0..8 {
            prop_assert!((bc[j] - (s * bu[j] + bv[j])).abs() <= 1e-12);
        }
    }

    #[test]
    fn semigroup_composes(c in coefficients(12), t in 0.0f64..0.5, s in 0.0f64..0.5) {
        let d = domain();
        let u = d.synthesize(&c).unwrap();
        let twice = semigroup_apply(&d, s, &semigroup_apply(&d, t, &u).unwrap()).unwrap();
        let once = semigroup_apply(&d, t + s, &u).unwrap();
        for (a, b) in twice.values().iter().zip(once.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn integers_factor_is_geometric(q in 0.0f64..0.95) {
        let (sum, _) = control_factor(q, SeriesVariant::AllIntegers, &SeriesTolerances::default()).unwrap();
        assert_relative_eq!(sum, q / (1.0 - q), max_relative = 1e-13, epsilon = 1e-300);
    }

    #[test]
    fn csv_format_roundtrips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = format_f64(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }
}
