//! Consequences of a growth certificate: the decay envelope of the frame
//! separation `A_N`, the direction neighbourhood and the Minkowski bound.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::{GrowthCertificate, GrowthError};

/// `ln K` with `K = [Upsilon m^m c^-m G(m)]^(1/m)`.
pub fn envelope_ln_constant(cert: &GrowthCertificate) -> f64 {
    let m = cert.m as f64;
    (cert.upsilon.ln_value + m * m.ln() - m * cert.c.ln() + cert.xi.g.ln_value) / m
}

/// `K chi^N`.
pub fn envelope_from(k: f64, chi: f64, n: u32) -> f64 {
    if k == 0.0 || chi == 0.0 {
        return if n == 0 { k } else { 0.0 };
    }
    (k.ln() + n as f64 * chi.ln()).exp()
}

/// Upper envelope `K chi*^N` of the separation `A_N`.
pub fn decay_envelope(cert: &GrowthCertificate, n: u32) -> f64 {
    if cert.chi_star == 0.0 && n > 0 {
        return 0.0;
    }
    (envelope_ln_constant(cert) + n as f64 * cert.ln_chi_star).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub radius: f64,
    pub coeff_bound: f64,
}

/// `Theta chi^N / (kappa varrho^N - chi^N)` and `Theta / (kappa varrho^N - chi^N)`.
pub fn direction_neighborhood_from(
    theta: f64,
    kappa: f64,
    varrho: f64,
    chi: f64,
    n: u32,
) -> Result<Neighborhood, GrowthError> {
    let nf = n as f64;
    // factor varrho^N out of the denominator to stay in range
    let ratio = (nf * (chi.ln() - varrho.ln())).exp();
    let gap = kappa - ratio;
    if !(gap > 0.0) {
        return Err(GrowthError::NonPositiveDenominator { n, chi, varrho, kappa });
    }
    Ok(Neighborhood {
        radius: theta * ratio / gap,
        coeff_bound: theta * (-nf * varrho.ln()).exp() / gap,
    })
}

pub fn direction_neighborhood(cert: &GrowthCertificate, chi: f64, n: u32) -> Result<Neighborhood, GrowthError> {
    if !(chi > cert.chi_star && chi < cert.varrho) {
        return Err(GrowthError::InvalidParameter(format!(
            "chi must lie in (chi* = {}, varrho = {}), got {chi}",
            cert.chi_star, cert.varrho
        )));
    }
    let theta = cert.ladder.valuation().theta();
    direction_neighborhood_from(theta, cert.kappa, cert.varrho, chi, n)
}

/// `(m - 1) ln chi* / (ln chi* - ln varrho)`.
pub fn minkowski_bound_from(m: u64, chi_star: f64, varrho: f64) -> Result<f64, GrowthError> {
    if !(varrho > chi_star && varrho <= 1.0) {
        return Err(GrowthError::InvalidParameter(format!(
            "varrho must lie in (chi* = {chi_star}, 1], got {varrho}"
        )));
    }
    let base = (m - 1) as f64;
    if varrho == 1.0 || chi_star == 0.0 {
        return Ok(base);
    }
    let lc = chi_star.ln();
    Ok(base * lc / (lc - varrho.ln()))
}

pub fn minkowski_bound(cert: &GrowthCertificate) -> Result<f64, GrowthError> {
    if !cert.ladder.valuation().is_archimedean() {
        return Err(GrowthError::InvalidParameter(
            "the Minkowski bound is stated over the reals".into(),
        ));
    }
    minkowski_bound_from(cert.m, cert.chi_star, cert.varrho)
}

/// `A = inf { |sum eta_i x_i| : max |eta_i| = 1 }` for real vectors under the
/// weighted sup-norm.
///
/// By symmetry one coefficient can be pinned to `+1`; each pin is a linear
/// program in `(eta, t)` minimizing `t` subject to `|w_r (Sum)_r| <= t`.
pub fn frame_separation(frame: &[Vec<f64>], weights: Option<&[f64]>) -> Result<f64, GrowthError> {
    let k = frame.len();
    if k == 0 {
        return Err(GrowthError::InvalidParameter("empty frame".into()));
    }
    let n = frame[0].len();
    if frame.iter().any(|v| v.len() != n) {
        return Err(GrowthError::InvalidParameter("frame vectors differ in length".into()));
    }
    let ones = vec![1.0; n];
    let w = weights.unwrap_or(&ones);
    let mut best = f64::INFINITY;
    for pin in 0..k {
        let mut pb = Problem::new(OptimizationDirection::Minimize);
        let t = pb.add_var(1.0, (0.0, f64::INFINITY));
        let eta: Vec<_> = (0..k)
            .map(|j| {
                if j == pin {
                    None
                } else {
                    Some(pb.add_var(0.0, (-1.0, 1.0)))
                }
            })
            .collect();
        for r in 0..n {
            let fixed = w[r] * frame[pin][r];
            let mut upper = vec![(t, -1.0)];
            let mut lower = vec![(t, 1.0)];
            for (j, e) in eta.iter().enumerate() {
                if let Some(v) = e {
                    upper.push((*v, w[r] * frame[j][r]));
                    lower.push((*v, w[r] * frame[j][r]));
                }
            }
            // fixed + sum <= t  and  fixed + sum >= -t
            pb.add_constraint(upper.as_slice(), ComparisonOp::Le, -fixed);
            pb.add_constraint(lower.as_slice(), ComparisonOp::Ge, -fixed);
        }
        let sol = pb.solve().map_err(|e| GrowthError::Lp(e.to_string()))?;
        best = best.min(sol.objective().max(0.0));
    }
    Ok(best)
}
