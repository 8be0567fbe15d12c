use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use dimbound_core::dde::{
    integrate, ladder_from_delay, rescale_time, restricted_norm_estimate, worst_case_family,
    DelayFunctional, DelaySystem, DelayTerm, InitialSegment, RestrictedNormOptions, TimeFunction,
};
use proptest::prelude::*;

#[test]
fn cosine_on_ten_delays() {
    let sys = DelaySystem::constant_scalar(1.0, -FRAC_PI_2, 1.0).unwrap();
    let phi = InitialSegment::function(|t| vec![(FRAC_PI_2 * t).cos()]);
    let tr = integrate(&sys, &phi, 0.0, 10.0, 1e-3).unwrap();
    let mut err: f64 = 0.0;
    for k in 0..=20_000 {
        let t = k as f64 * 5e-4;
        err = err.max((tr.eval(t).unwrap()[0] - (FRAC_PI_2 * t).cos()).abs());
    }
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn method_of_steps_by_hand() {
    // on [1, 2]: x(t) = 1 - t + (t - 1)^2 / 2
    let sys = DelaySystem::constant_scalar(1.0, -1.0, 1.0).unwrap();
    let tr = integrate(&sys, &InitialSegment::Constant(vec![1.0]), 0.0, 2.0, 1e-3).unwrap();
    assert!(tr.eval(1.0).unwrap()[0].abs() < 1e-9);
    let t: f64 = 1.5;
    let exact = 1.0 - t + 0.5 * (t - 1.0).powi(2);
    assert!((tr.eval(t).unwrap()[0] - exact).abs() < 1e-9);
}

#[test]
fn rescaled_doubling_matches_half_time() {
    let sys = DelaySystem::constant_scalar(1.0, -2.0, 1.0).unwrap();
    let rs = rescale_time(&sys, 10.0).unwrap();
    assert_eq!(rs.r, 2.0);
    assert!(rs.majorant_sup(0.0, 20.0, 400).unwrap() <= 1.0 + 1e-12);
    let phi = InitialSegment::function(|t| vec![1.0 + 0.5 * t]);
    let orig = Arc::new(integrate(&sys, &phi, 0.0, 5.0, 1e-3).unwrap());
    let hist = rs.history_from(orig.clone()).unwrap();
    let tr = integrate(&rs.system, &hist, rs.start(), 10.0, 2e-3).unwrap();
    for k in 0..=800 {
        let s = 2.0 + k as f64 * 0.01;
        let diff = (tr.eval(s).unwrap()[0] - orig.eval(s / 2.0).unwrap()[0]).abs();
        assert!(diff <= 1e-4, "s = {s}: {diff}");
    }
}

#[test]
fn plateau_composition() {
    let n = TimeFunction::piecewise(vec![0.0, 1.0], vec![vec![1.0], vec![0.0], vec![1.0]]).unwrap();
    let a = TimeFunction::piecewise(vec![0.0, 1.0], vec![vec![-1.0], vec![0.0], vec![-1.0]]).unwrap();
    let sys = DelaySystem::new(
        1.0,
        1,
        vec![DelayTerm {
            a,
            sigma: TimeFunction::scalar(1.0),
        }],
        n,
    )
    .unwrap();
    let rs = rescale_time(&sys, 6.0).unwrap();
    assert_eq!(rs.r, 1.0);
    assert_eq!(rs.map.g(0.5), 1.5);
    let phi = InitialSegment::function(|t| vec![(FRAC_PI_2 * t).cos()]);
    let orig = Arc::new(integrate(&sys, &phi, 0.0, 6.0, 1e-3).unwrap());
    let hist = rs.history_from(orig.clone()).unwrap();
    let tr = integrate(&rs.system, &hist, rs.start(), 5.0, 1e-3).unwrap();
    for k in 0..=400 {
        let s = 1.0 + k as f64 * 0.01;
        let diff = (tr.eval(s).unwrap()[0] - rs.compose(&orig, s).unwrap()[0]).abs();
        assert!(diff <= 1e-4, "s = {s}: {diff}");
    }
}

#[test]
fn worst_case_level_two() {
    let opts = RestrictedNormOptions::default();
    let rho2 = ladder_from_delay(1.0, 1).unwrap().rung(2).unwrap().1;
    for (name, sys) in worst_case_family(1.0).unwrap() {
        let r = restricted_norm_estimate(&sys, 2, &opts).unwrap();
        assert!(r.estimate <= rho2 * 1.1, "{name}: {}", r.estimate);
        assert!(r.within_allowance);
    }
}

#[test]
fn unconstrained_level_bounded_by_exp_tau() {
    for (name, sys) in worst_case_family(1.0).unwrap() {
        let r = restricted_norm_estimate(&sys, 0, &RestrictedNormOptions::default()).unwrap();
        assert!(r.estimate <= std::f64::consts::E * 1.01, "{name}: {}", r.estimate);
        assert!(r.estimate >= 1.0 - 1e-12);
    }
}

fn piecewise_strategy(len: usize, lo: f64, hi: f64) -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (
        proptest::collection::vec(0.05f64..0.95, len),
        proptest::collection::vec(proptest::collection::vec(lo..hi, 1), len + 1),
    )
        .prop_map(|(mut gaps, values)| {
            let mut t = 0.0;
            for g in gaps.iter_mut() {
                t += *g;
                *g = t;
            }
            (gaps, values)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lipschitz_dependence(
        entries in proptest::collection::vec(-1.5f64..1.5, 8),
        sigmas in proptest::collection::vec(0.0f64..1.0, 2),
        phi in proptest::collection::vec(-1.0f64..1.0, 2),
        psi in proptest::collection::vec(-1.0f64..1.0, 2),
    ) {
        let terms: Vec<DelayTerm> = (0..2)
            .map(|j| DelayTerm {
                a: TimeFunction::constant(entries[4 * j..4 * j + 4].to_vec()),
                sigma: TimeFunction::scalar(sigmas[j]),
            })
            .collect();
        let probe = DelaySystem::new(1.0, 2, terms.clone(), TimeFunction::scalar(1e9)).unwrap();
        let n = probe.coefficient_norm(0.0, 0.0);
        let sys = DelaySystem::new(1.0, 2, terms, TimeFunction::scalar(n)).unwrap();
        let t_end = 3.0;
        let x = integrate(&sys, &InitialSegment::Constant(phi.clone()), 0.0, t_end, 0.01).unwrap();
        let y = integrate(&sys, &InitialSegment::Constant(psi.clone()), 0.0, t_end, 0.01).unwrap();
        let gap = phi.iter().zip(&psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dist = (0..x.len())
            .map(|j| x.node(j).iter().zip(y.node(j)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        prop_assert!(dist <= (n * t_end).exp() * gap * (1.0 + 1e-6) + 1e-15);
    }

    #[test]
    fn rescaled_majorant_at_most_one((breaks, values) in piecewise_strategy(4, 0.1, 3.0), sign in -1.0f64..1.0) {
        let n = TimeFunction::piecewise(breaks.clone(), values.clone()).unwrap();
        let a_vals: Vec<Vec<f64>> = values.iter().map(|v| vec![v[0] * sign]).collect();
        let a = TimeFunction::piecewise(breaks, a_vals).unwrap();
        let sys = DelaySystem::new(1.0, 1, vec![DelayTerm { a, sigma: TimeFunction::scalar(0.7) }], n).unwrap();
        let rs = rescale_time(&sys, 5.0).unwrap();
        prop_assert!(rs.majorant_sup(0.0, 10.0, 500).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn composition_identity((breaks, values) in piecewise_strategy(6, 0.0, 2.0)) {
        let mut values = values;
        // keep f unbounded
        let last = values.len() - 1;
        values[last][0] = values[last][0].max(0.5);
        let n = TimeFunction::piecewise(breaks.clone(), values.clone()).unwrap();
        let a_vals: Vec<Vec<f64>> = values.iter().map(|v| vec![-v[0]]).collect();
        let a = TimeFunction::piecewise(breaks, a_vals).unwrap();
        let sys = DelaySystem::new(1.0, 1, vec![DelayTerm { a, sigma: TimeFunction::scalar(1.0) }], n).unwrap();
        let t_end = 5.0;
        let rs = rescale_time(&sys, t_end).unwrap();
        let phi = InitialSegment::function(|t| vec![1.0 + t]);
        let orig = Arc::new(integrate(&sys, &phi, 0.0, t_end + 1.0, 1e-3).unwrap());
        let s_end = rs.map.f(t_end);
        prop_assume!(s_end > rs.r + 0.1);
        let steps = (rs.r / 2e-3).ceil();
        let hist = rs.history_from(orig.clone()).unwrap();
        let tr = integrate(&rs.system, &hist, rs.r, s_end, rs.r / steps).unwrap();
        for k in 0..=200 {
            let s = rs.r + (s_end - rs.r) * k as f64 / 200.0;
            let diff = (tr.eval(s).unwrap()[0] - rs.compose(&orig, s).unwrap()[0]).abs();
            prop_assert!(diff <= 1e-4, "s = {}: {}", s, diff);
        }
    }

    #[test]
    fn integrate_is_deterministic(a in -1.0f64..1.0, sigma in 0.0f64..1.0, x0 in -2.0f64..2.0) {
        let sys = DelaySystem::constant_scalar(1.0, a, sigma).unwrap();
        let phi = InitialSegment::Constant(vec![x0]);
        let p = integrate(&sys, &phi, 0.0, 2.0, 0.01).unwrap();
        let q = integrate(&sys, &phi, 0.0, 2.0, 0.01).unwrap();
        prop_assert_eq!(p.to_csv(), q.to_csv());
    }
}

#[test]
fn breakpoints_are_reported() {
    let a = TimeFunction::piecewise(vec![0.25, 0.5], vec![vec![0.0], vec![1.0], vec![0.0]]).unwrap();
    let sys = DelaySystem::new(1.0, 1, vec![DelayTerm { a, sigma: TimeFunction::scalar(0.0) }], TimeFunction::scalar(1.0)).unwrap();
    assert_eq!(sys.breakpoints(0.0, 1.0), vec![0.25, 0.5]);
}
