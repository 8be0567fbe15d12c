//! Search for `(m, p)` with `Xi(m, p)^(1/mp) < varpi`, and the certificate
//! that carries the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::xi::{rho_infinity, upsilon, xi, RhoInfinity, UpsilonValue, XiValue};
use super::{CompactnessLadder, GrowthError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchLimits {
    pub p_max: u64,
    pub s_max: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { p_max: 8, s_max: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub ladder: CompactnessLadder,
    pub varpi: f64,
    pub m: u64,
    pub p: u64,
    pub s: usize,
    pub r: u64,
    pub xi: XiValue,
    /// `Xi(m, p)^(1/mp)`.
    pub xi_root: f64,
    pub upsilon: UpsilonValue,
    /// `Xi(m, p)^(1/mp) / varpi`.
    pub chi_star: f64,
    pub ln_chi_star: f64,
    pub varrho: f64,
    pub kappa: f64,
    pub c: f64,
}

impl GrowthCertificate {
    /// Certificate for a given pair, with `varrho = kappa = c = 1`.
    pub fn for_pair(ladder: &CompactnessLadder, varpi: f64, m: u64, p: u64) -> Result<Self, GrowthError> {
        if !(varpi > 0.0 && varpi.is_finite()) {
            return Err(GrowthError::InvalidParameter(format!("varpi must be positive, got {varpi}")));
        }
        let x = xi(ladder, m, p)?;
        let ln_root = x.ln_value / (m * p) as f64;
        let ln_chi_star = ln_root - varpi.ln();
        if !(ln_chi_star < 0.0) {
            return Err(GrowthError::RatioNotBelowVarpi {
                m,
                p,
                ratio: ln_root.exp(),
                varpi,
            });
        }
        let ups = upsilon(ladder, m, p)?;
        Ok(Self {
            ladder: ladder.clone(),
            varpi,
            m,
            p,
            s: x.s,
            r: x.r,
            xi_root: ln_root.exp(),
            xi: x,
            upsilon: ups,
            chi_star: ln_chi_star.exp(),
            ln_chi_star,
            varrho: 1.0,
            kappa: 1.0,
            c: 1.0,
        })
    }

    pub fn with_constants(mut self, varrho: f64, kappa: f64, c: f64) -> Result<Self, GrowthError> {
        if !(varrho > self.chi_star && varrho <= 1.0) {
            return Err(GrowthError::InvalidParameter(format!(
                "varrho must lie in (chi* = {}, 1], got {varrho}",
                self.chi_star
            )));
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(GrowthError::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(GrowthError::InvalidParameter(format!("c must be positive, got {c}")));
        }
        self.varrho = varrho;
        self.kappa = kappa;
        self.c = c;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub p: u64,
    pub s: usize,
    pub m: u64,
    pub xi_root: f64,
    pub below_varpi: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub rho_infinity: RhoInfinity,
    pub grid: Vec<GridCell>,
    pub certificate: Option<GrowthCertificate>,
    /// Smallest `Xi^(1/mp)` seen, with its `(m, p)`.
    pub best: Option<(u64, u64, f64)>,
}

/// Evaluates `Xi(p k_s, p)^(1/mp)` over `p <= p_max`, `1 <= s <= s_max`.
pub fn search_grid(ladder: &CompactnessLadder, varpi: f64, limits: SearchLimits) -> Result<Vec<GridCell>, GrowthError> {
    let cells: Vec<(u64, usize)> = (1..=limits.p_max)
        .flat_map(|p| (1..=limits.s_max).map(move |s| (p, s)))
        .collect();
    cells
        .into_par_iter()
        .map(|(p, s)| {
            let (k_s, _) = ladder.require(s)?;
            let m = p * k_s;
            let x = xi(ladder, m, p)?;
            let xi_root = (x.ln_value / (m * p) as f64).exp();
            Ok(GridCell {
                p,
                s,
                m,
                xi_root,
                below_varpi: xi_root < varpi,
            })
        })
        .collect()
}

/// Runs the grid search and, if a pair satisfies `Xi^(1/mp) < varpi`,
/// certifies the one with the smallest ratio (ties go to smaller `m`, then
/// smaller `p`).
///
/// Fails when `varpi` does not exceed the `rho_inf` estimate; when no pair
/// qualifies the report is returned without a certificate.
pub fn search_report(ladder: &CompactnessLadder, varpi: f64, limits: SearchLimits) -> Result<SearchReport, GrowthError> {
    if limits.p_max == 0 || limits.s_max == 0 {
        return Err(GrowthError::InvalidParameter("p_max and s_max must be positive".into()));
    }
    let rho_inf = rho_infinity(ladder, limits.s_max.max(2))?;
    if !(varpi > rho_inf.value) {
        return Err(GrowthError::VarpiBelowRhoInfinity {
            varpi,
            rho_infinity: rho_inf.value,
        });
    }
    let grid = search_grid(ladder, varpi, limits)?;
    let tol = 1e-12;
    let mut best: Option<&GridCell> = None;
    for cell in &grid {
        best = match best {
            None => Some(cell),
            Some(b) => {
                let better = cell.xi_root < b.xi_root * (1.0 - tol)
                    || (cell.xi_root <= b.xi_root * (1.0 + tol) && (cell.m, cell.p) < (b.m, b.p));
                Some(if better { cell } else { b })
            }
        };
    }
    let best = best.cloned();
    let certificate = match &best {
        Some(b) if b.below_varpi => Some(GrowthCertificate::for_pair(ladder, varpi, b.m, b.p)?),
        _ => None,
    };
    Ok(SearchReport {
        rho_infinity: rho_inf,
        certificate,
        best: best.map(|b| (b.m, b.p, b.xi_root)),
        grid,
    })
}

pub fn search_mp(ladder: &CompactnessLadder, varpi: f64, limits: SearchLimits) -> Result<GrowthCertificate, GrowthError> {
    let report = search_report(ladder, varpi, limits)?;
    match report.certificate {
        Some(c) => Ok(c),
        None => {
            let (m, p, ratio) = report.best.unwrap_or((0, 0, f64::NAN));
            Err(GrowthError::NoPair {
                best_ratio: ratio,
                m,
                p,
                varpi,
            })
        }
    }
}
