//! The liminf `rho_inf`, the growth constant `Xi(m, p)` and the remainder
//! constant `Upsilon`.
//!
//! All products are evaluated as sums of logarithms, with `0^0 = 1`.

use serde::{Deserialize, Serialize};

use super::{CompactnessLadder, GrowthError};
use crate::linalg::GValue;

/// `e * ln(rho)` with the convention `0 * ln 0 = 0`.
pub(crate) fn ln_pow(rho: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * rho.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub s: usize,
    pub k_s: u64,
    /// `[prod_{i=1}^{s-1} rho_i^(k_{i+1}-k_i)]^(1/k_s)`.
    pub value: f64,
    /// Same product with exponent `1/(k_s - k_1)`.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoInfinity {
    /// Running minimum of the normalized profile up to `s_max`.
    pub value: f64,
    /// Running minimum of the plain profile.
    pub plain_minimum: f64,
    pub profile: Vec<ProfilePoint>,
}

/// Finite-horizon estimate of `rho_inf`.
///
/// The plain profile carries a bias of order `1/s` (for a constant ladder it
/// equals `rho^(1 - 1/s)`). Normalizing the exponent by `k_s - k_1`, the
/// total codimension the product actually spans, removes it for eventually
/// constant ladders and has the same liminf since `k_s -> inf`.
pub fn rho_infinity(ladder: &CompactnessLadder, s_max: usize) -> Result<RhoInfinity, GrowthError> {
    if s_max < 2 {
        return Err(GrowthError::Ladder("rho_inf needs s_max >= 2".into()));
    }
    ladder.require(s_max)?;
    let (k1, _) = ladder.require(1)?;
    let mut sum = 0.0;
    let mut profile = Vec::with_capacity(s_max - 1);
    let mut value = f64::INFINITY;
    let mut plain_minimum = f64::INFINITY;
    for s in 2..=s_max {
        let (k_prev, rho_prev) = ladder.require(s - 1)?;
        let (k_s, _) = ladder.require(s)?;
        sum += ln_pow(rho_prev, (k_s - k_prev) as f64);
        let point = ProfilePoint {
            s,
            k_s,
            value: (sum / k_s as f64).exp(),
            normalized: (sum / (k_s - k1) as f64).exp(),
        };
        value = value.min(point.normalized);
        plain_minimum = plain_minimum.min(point.value);
        profile.push(point);
    }
    Ok(RhoInfinity {
        value,
        plain_minimum,
        profile,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCandidate {
    pub s: usize,
    pub r: u64,
    pub ln_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiValue {
    pub value: f64,
    pub ln_value: f64,
    pub s: usize,
    pub r: u64,
    pub g: GValue,
    /// Every admissible decomposition `m = p k_s + r`, the chosen one included.
    pub candidates: Vec<XiCandidate>,
}

/// `Xi(m, p) = G(m) rho_s^(p r) prod_{i=1}^{s-1} rho_i^(p^2 (k_{i+1} - k_i))`
/// minimized over the admissible decompositions `m = p k_s + r`,
/// `0 <= r <= p (k_{s+1} - k_s)`.
pub fn xi(ladder: &CompactnessLadder, m: u64, p: u64) -> Result<XiValue, GrowthError> {
    if m == 0 || p == 0 {
        return Err(GrowthError::NoDecomposition { m, p });
    }
    let g = ladder.g_factor(m)?;
    let pf = p as f64;
    let mut candidates = Vec::new();
    let mut prefix = 0.0;
    let mut s = 0usize;
    loop {
        let Some((k_s, rho_s)) = ladder.rung(s) else {
            break;
        };
        let Some(base) = p.checked_mul(k_s) else {
            break;
        };
        if base > m {
            break;
        }
        let r = m - base;
        let fits = match ladder.rung(s + 1) {
            Some((k_next, _)) => r <= p * (k_next - k_s),
            None => r == 0,
        };
        if fits {
            let ln_value = g.ln_value + ln_pow(rho_s, pf * r as f64) + pf * pf * prefix;
            candidates.push(XiCandidate { s, r, ln_value });
        }
        match ladder.rung(s + 1) {
            Some((k_next, _)) if s >= 1 => prefix += ln_pow(rho_s, (k_next - k_s) as f64),
            _ => {}
        }
        s += 1;
    }
    let best = candidates
        .iter()
        .min_by(|a, b| a.ln_value.total_cmp(&b.ln_value))
        .cloned()
        .ok_or(GrowthError::NoDecomposition { m, p })?;
    Ok(XiValue {
        value: best.ln_value.exp(),
        ln_value: best.ln_value,
        s: best.s,
        r: best.r,
        g,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsilonTerm {
    pub r: u64,
    /// `ln[Xi(m, r) Xi(m, p)^(-(r-1)/p)]`.
    pub ln_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsilonValue {
    /// Supremum over `0 <= r <= p`, the `r = 0` block being empty (`Xi(m, 0) = 1`).
    pub value: f64,
    pub ln_value: f64,
    /// Supremum over `1 <= r <= p` only.
    pub sup_from_one: f64,
    /// Supremum over `0 <= r <= p` with `Xi(m, 0)` replaced by `Xi(m, 1)`.
    pub r0_as_r1: f64,
    pub terms: Vec<UpsilonTerm>,
    pub r0_convention: String,
}

pub fn upsilon(ladder: &CompactnessLadder, m: u64, p: u64) -> Result<UpsilonValue, GrowthError> {
    let ln_xi_p = xi(ladder, m, p)?.ln_value;
    let pf = p as f64;
    let mut terms = vec![UpsilonTerm {
        r: 0,
        ln_value: ln_xi_p / pf,
    }];
    let mut ln_xi_1 = 0.0;
    for r in 1..=p {
        let ln_xi_r = if r == p { ln_xi_p } else { xi(ladder, m, r)?.ln_value };
        if r == 1 {
            ln_xi_1 = ln_xi_r;
        }
        terms.push(UpsilonTerm {
            r,
            ln_value: ln_xi_r - (r as f64 - 1.0) / pf * ln_xi_p,
        });
    }
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let ln_value = max(&mut terms.iter().map(|t| t.ln_value));
    let ln_from_one = max(&mut terms.iter().skip(1).map(|t| t.ln_value));
    let ln_r0_as_r1 = ln_from_one.max(ln_xi_1 + ln_xi_p / pf);
    Ok(UpsilonValue {
        value: ln_value.exp(),
        ln_value,
        sup_from_one: ln_from_one.exp(),
        r0_as_r1: ln_r0_as_r1.exp(),
        terms,
        r0_convention: "empty block: Xi(m,0) = 1".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Valuation;
    use crate::growth::{delay_ladder, TailGenerator};

    #[test]
    fn constant_profile() {
        let l = CompactnessLadder::constant(0.5, 4, Valuation::real()).unwrap();
        let r = rho_infinity(&l, 50).unwrap();
        let p10 = &r.profile[8];
        assert_eq!(p10.s, 10);
        assert!((p10.value - 0.5f64.powf(0.9)).abs() < 1e-14);
        assert!((r.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn delay_profile() {
        let l = delay_ladder(1.0, 1).unwrap();
        let r = rho_infinity(&l, 3).unwrap();
        assert!((r.profile[1].value - 0.5f64.powf(1.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn halving_profile() {
        let l = CompactnessLadder::new(vec![0, 1], vec![1.0, 0.5], Valuation::real())
            .unwrap()
            .with_tail(TailGenerator::Geometric { ratio: 0.5, k_step: 1 })
            .unwrap();
        let r = rho_infinity(&l, 20).unwrap();
        for pt in &r.profile {
            let s = pt.s as f64;
            assert!((pt.value - 2f64.powf(-(s - 1.0) / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_examples() {
        let l = delay_ladder(1.0, 1).unwrap();
        let x = xi(&l, 3, 1).unwrap();
        assert!((x.value - 2.0).abs() < 1e-12);
        assert!(x.candidates.len() >= 2);
        let one = xi(&l, 1, 1).unwrap();
        assert!((one.value - 1.0).abs() < 1e-15);
        let q = CompactnessLadder::constant(1.0, 3, Valuation::padic(5).unwrap()).unwrap();
        for m in 1..12 {
            assert_eq!(xi(&q, m, 2).unwrap().value, 1.0);
        }
    }

    #[test]
    fn upsilon_variants() {
        let l = delay_ladder(1.0, 1).unwrap();
        let u1 = upsilon(&l, 3, 1).unwrap();
        assert!((u1.value - xi(&l, 3, 1).unwrap().value).abs() < 1e-12);
        let flat = CompactnessLadder::constant(1.0, 3, Valuation::real()).unwrap();
        let u = upsilon(&flat, 3, 2).unwrap();
        assert!((u.value - 4.0).abs() < 1e-12);
        assert!((u.r0_as_r1 - 8.0).abs() < 1e-12);
        assert!(u.r0_as_r1 <= 16.0);
    }
}
