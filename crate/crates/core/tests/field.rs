use dimbound_core::field::{normalize_annulus, sup_norm, Scalar, Valuation};
use proptest::prelude::*;

const PRIMES: [u64; 4] = [2, 3, 5, 7];

fn padic_strategy() -> impl Strategy<Value = (u64, i64, i64)> {
    (0usize..4, -2000i64..2000, 1i64..500).prop_map(|(k, n, d)| (PRIMES[k], n, d))
}

/// `p^-v_p(n/d)` by trial division.
fn oracle_abs(p: u64, n: i64, d: i64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let count = |mut x: i64| {
        let mut k = 0;
        while x % p as i64 == 0 {
            x /= p as i64;
            k += 1;
        }
        k
    };
    (p as f64).powi(count(d) - count(n))
}

#[test]
fn small_values() {
    assert_eq!(Scalar::padic(5, 25, 1).unwrap().abs_value(), 1.0 / 25.0);
    assert_eq!(Scalar::padic(5, 3, 10).unwrap().abs_value(), 5.0);
    assert_eq!(Scalar::padic(3, 0, 1).unwrap().abs_value(), 0.0);
    assert_eq!(Scalar::real(-2.5).abs_value(), 2.5);
    assert!(Scalar::padic(5, 1, 0).is_err());
    assert!(Scalar::real(1.0).checked_add(&Scalar::padic(5, 1, 1).unwrap()).is_err());
    assert!(Scalar::padic(3, 1, 1).unwrap().checked_mul(&Scalar::padic(5, 1, 1).unwrap()).is_err());
}

#[test]
fn valuations() {
    assert_eq!(Valuation::padic(5).unwrap().theta(), 0.2);
    assert!(Valuation::padic(6).is_err());
    assert!(Valuation::real_with_theta(1.5).is_err());
    assert!(Valuation::real().is_dense());
    assert!(!Valuation::padic(2).unwrap().is_archimedean());
}

proptest! {
    #[test]
    fn abs_matches_trial_division((p, n, d) in padic_strategy()) {
        prop_assert_eq!(Scalar::padic(p, n, d).unwrap().abs_value(), oracle_abs(p, n, d));
    }

    #[test]
    fn ultrametric_inequality((p, a, b) in padic_strategy(), c in -2000i64..2000, e in 1i64..500) {
        let x = Scalar::padic(p, a, b).unwrap();
        let y = Scalar::padic(p, c, e).unwrap();
        let s = x.checked_add(&y).unwrap().abs_value();
        prop_assert!(s <= x.abs_value().max(y.abs_value()));
        if x.abs_value() != y.abs_value() {
            prop_assert_eq!(s, x.abs_value().max(y.abs_value()));
        }
    }

    #[test]
    fn multiplicative((p, a, b) in padic_strategy(), c in -2000i64..2000, e in 1i64..500) {
        let x = Scalar::padic(p, a, b).unwrap();
        let y = Scalar::padic(p, c, e).unwrap();
        let prod = x.checked_mul(&y).unwrap().abs_value();
        prop_assert!((prod - x.abs_value() * y.abs_value()).abs() <= 1e-12 * prod.max(1.0));
        if !y.is_zero() {
            let q = x.checked_div(&y).unwrap().abs_value();
            prop_assert!((q - x.abs_value() / y.abs_value()).abs() <= 1e-12 * q.max(1.0));
        }
    }

    #[test]
    fn real_multiplicative(x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let p = Scalar::real(x).checked_mul(&Scalar::real(y)).unwrap().abs_value();
        prop_assert!((p - x.abs() * y.abs()).abs() <= 1e-12 * p.max(1.0));
    }

    #[test]
    fn annulus_padic(k in 0usize..4, xs in proptest::collection::vec((-500i64..500, 1i64..200), 1..5)) {
        let p = PRIMES[k];
        let v: Vec<Scalar> = xs.iter().map(|&(n, d)| Scalar::padic(p, n, d).unwrap()).collect();
        prop_assume!(sup_norm(&v) > 0.0);
        let (scale, y) = normalize_annulus(&v).unwrap();
        let theta = 1.0 / p as f64;
        let ny = sup_norm(&y);
        prop_assert!(theta <= ny && ny <= 1.0);
        for (a, b) in v.iter().zip(&y) {
            prop_assert_eq!(a.checked_mul(&scale).unwrap(), b.clone());
        }
    }

    #[test]
    fn annulus_real(xs in proptest::collection::vec(-1e4f64..1e4, 1..6)) {
        let v: Vec<Scalar> = xs.iter().map(|&x| Scalar::real(x)).collect();
        prop_assume!(sup_norm(&v) > 0.0);
        let (scale, y) = normalize_annulus(&v).unwrap();
        prop_assert!((sup_norm(&y) - 1.0).abs() <= 1e-12);
        let k = scale.as_real().unwrap();
        for (a, b) in xs.iter().zip(&y) {
            prop_assert!((a * k - b.as_real().unwrap()).abs() <= 1e-12);
        }
    }
}
