//! Error budget for a nonlinearity `f_N` approximated by its derivative
//! `T_N`: `|f(x) - f(y) - T(x - y)| <= M |x - y|^Lambda` and `<= L |x - y|`,
//! with `|T_N| <= C`.

use serde::{Deserialize, Serialize};

use super::GrowthError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub n0: u32,
}

impl BudgetInputs {
    pub fn validate(&self) -> Result<(), GrowthError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(GrowthError::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(GrowthError::InvalidParameter(format!(
                "Lambda must exceed 1, got {}",
                self.lambda
            )));
        }
        if !(self.m >= 0.0 && self.m.is_finite()) || !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(GrowthError::InvalidParameter("M and L must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// `q = (L + C)^Lambda / C`.
    pub fn q(&self) -> f64 {
        (self.lambda * (self.l + self.c).ln() - self.c.ln()).exp()
    }

    /// `1 + q (q^N - 1)/(q - 1)`, equal to `1 + N` at `q = 1`.
    fn geometric_factor(&self, n: u32) -> f64 {
        let q = self.q();
        if (q - 1.0).abs() < 1e-14 {
            1.0 + n as f64
        } else {
            1.0 + q * (q.powi(n as i32) - 1.0) / (q - 1.0)
        }
    }

    /// `M C^N (1 + q (q^N - 1)/(q - 1)) / (L + C)^(N Lambda)`.
    pub fn eta_term(&self, n: u32) -> f64 {
        if self.m == 0.0 {
            return 0.0;
        }
        let q = self.q();
        let nf = n as f64;
        if (q - 1.0).abs() < 1e-14 {
            return self.m * (1.0 + nf);
        }
        // (L + C)^(N Lambda) = (q C)^N, so the term is M (q^-N + q (1 - q^-N)/(q - 1))
        let inv = (-nf * q.ln()).exp();
        self.m * (inv + q * (1.0 - inv) / (q - 1.0))
    }

    /// Closed-form `e_N` majorant `M C^N (1 + q (q^N - 1)/(q - 1)) d0^Lambda`.
    pub fn majorant(&self, d0: f64, n: u32) -> f64 {
        if self.m == 0.0 || d0 == 0.0 {
            return 0.0;
        }
        self.m * self.c.powi(n as i32) * self.geometric_factor(n) * d0.powf(self.lambda)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaValue {
    /// `+inf` when the supremum diverges.
    #[serde(with = "crate::growth::float_or_string")]
    pub eta: f64,
    pub q: f64,
    /// Last index evaluated.
    pub n_evaluated: u32,
    /// `M q/(q - 1)` for `q > 1`.
    pub closed_form: Option<f64>,
    pub diagnostic: Option<String>,
}

/// `eta = sup_{N >= N0} term_N`.
///
/// The supremum is evaluated numerically until increments fall below
/// `1e-12`; divergence (`q <= 1` with `M > 0`) is reported as `+inf`.
pub fn nonlinear_eta(b: &BudgetInputs) -> Result<EtaValue, GrowthError> {
    b.validate()?;
    let q = b.q();
    if b.m == 0.0 {
        return Ok(EtaValue {
            eta: 0.0,
            q,
            n_evaluated: b.n0,
            closed_form: Some(0.0),
            diagnostic: None,
        });
    }
    let closed_form = (q > 1.0 + 1e-14).then(|| b.m * q / (q - 1.0));
    if closed_form.is_none() {
        let why = if (q - 1.0).abs() <= 1e-14 {
            "q = 1: term_N = M (1 + N) grows without bound"
        } else {
            "q < 1: term_N grows like M q^-N"
        };
        return Ok(EtaValue {
            eta: f64::INFINITY,
            q,
            n_evaluated: b.n0,
            closed_form: None,
            diagnostic: Some(why.into()),
        });
    }
    let mut best = b.eta_term(b.n0);
    let mut n = b.n0;
    loop {
        let next = b.eta_term(n + 1);
        n += 1;
        let inc = next - best;
        best = best.max(next);
        if inc.abs() < 1e-12 || n >= b.n0 + 100_000 {
            break;
        }
    }
    Ok(EtaValue {
        eta: best,
        q,
        n_evaluated: n,
        closed_form,
        diagnostic: None,
    })
}

/// `gamma A^(N/(Lambda-1)) / (L + C)^(Lambda N/(Lambda-1))`.
pub fn perturbation_gate(b: &BudgetInputs, gamma: f64, a: f64, n: u32) -> Result<f64, GrowthError> {
    b.validate()?;
    if !(a > 0.0) || !(gamma > 0.0) {
        return Err(GrowthError::InvalidParameter("A and gamma must be positive".into()));
    }
    let e = n as f64 / (b.lambda - 1.0);
    Ok(gamma * (e * (a.ln() - b.lambda * (b.l + b.c).ln())).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecursion {
    /// `e_0 .. e_N`.
    pub iterates: Vec<f64>,
    /// Closed-form majorant for each `N`.
    pub majorants: Vec<f64>,
    /// Whether every iterate stays below its majorant.
    pub within_majorant: bool,
}

/// Iterates `e_{k+1} = M b_k^Lambda + C e_k` from `e_0 = M d0^Lambda`.
///
/// `bounds[k]` is a bound on `|f^k(x) - f^k(y)|`; when absent the chain
/// bound `(L + C)^(k+1) d0` is used.
pub fn error_recursion(
    b: &BudgetInputs,
    d0: f64,
    bounds: Option<&[f64]>,
    n: u32,
) -> Result<ErrorRecursion, GrowthError> {
    b.validate()?;
    if !(d0 >= 0.0) {
        return Err(GrowthError::InvalidParameter("d0 must be nonnegative".into()));
    }
    if let Some(bs) = bounds {
        if bs.len() < n as usize {
            return Err(GrowthError::InvalidParameter(format!(
                "need {} pathwise bounds, got {}",
                n,
                bs.len()
            )));
        }
        if bs.iter().any(|x| !(*x >= 0.0)) {
            return Err(GrowthError::InvalidParameter("pathwise bounds must be nonnegative".into()));
        }
    }
    let lc = b.l + b.c;
    let mut e = b.m * d0.powf(b.lambda);
    let mut iterates = vec![e];
    let mut majorants = vec![b.majorant(d0, 0)];
    for k in 0..n {
        let bk = match bounds {
            Some(bs) => bs[k as usize],
            None => lc.powi(k as i32 + 1) * d0,
        };
        e = b.m * bk.powf(b.lambda) + b.c * e;
        iterates.push(e);
        majorants.push(b.majorant(d0, k + 1));
    }
    let within_majorant = iterates
        .iter()
        .zip(&majorants)
        .all(|(e, m)| *e <= m * (1.0 + 1e-12) + 1e-300);
    Ok(ErrorRecursion {
        iterates,
        majorants,
        within_majorant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(m: f64, l: f64, c: f64, lambda: f64) -> BudgetInputs {
        BudgetInputs { m, l, c, lambda, n0: 0 }
    }

    #[test]
    fn eta_examples() {
        let e = nonlinear_eta(&inputs(1.0, 1.0, 1.0, 2.0)).unwrap();
        assert!((e.eta - 4.0 / 3.0).abs() < 1e-9);
        let d = nonlinear_eta(&inputs(1.0, 0.0, 1.0, 2.0)).unwrap();
        assert!(d.eta.is_infinite() && d.diagnostic.is_some());
        assert_eq!(nonlinear_eta(&inputs(0.0, 1.0, 1.0, 2.0)).unwrap().eta, 0.0);
        assert!(nonlinear_eta(&inputs(1.0, 1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn gate_examples() {
        let b = inputs(1.0, 1.0, 1.0, 2.0);
        assert!((perturbation_gate(&b, 1.0, 1.0, 3).unwrap() - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(perturbation_gate(&b, 0.7, 1.0, 0).unwrap(), 0.7);
        assert!((perturbation_gate(&b, 0.7, 4.0, 9).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn recursion_by_hand() {
        let b = inputs(1.0, 1.0, 1.0, 2.0);
        let r = error_recursion(&b, 1.0, None, 3).unwrap();
        assert_eq!(r.iterates[0], 1.0);
        assert_eq!(r.iterates[1], 5.0);
        assert!(r.within_majorant);
        let zero = error_recursion(&inputs(0.0, 1.0, 2.0, 3.0), 1.0, None, 5).unwrap();
        assert!(zero.iterates.iter().all(|e| *e == 0.0));
    }
}
