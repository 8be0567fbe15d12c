//! Compactness ladders: codimensions `k_i` and restricted norms `rho_i`.

use serde::{Deserialize, Serialize};

use super::GrowthError;
use crate::field::Valuation;
use crate::linalg::{g_oracle, GValue};

/// Closed-form continuation of a ladder past its explicit rungs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailGenerator {
    /// The dyadic ladder of a delay equation with horizon `tau` and values in `R^d`.
    DelayDyadic { tau: f64, d: u64 },
    /// `k` grows by `k_step`, `rho` stays at `rho`.
    Constant { rho: f64, k_step: u64 },
    /// `k` grows by `k_step`, `rho` is multiplied by `ratio` per rung.
    Geometric { ratio: f64, k_step: u64 },
}

/// Rung `i` of the delay ladder.
pub fn delay_rung(tau: f64, d: u64, i: usize) -> (u64, f64) {
    let k = match i {
        0 => 0,
        1 => d,
        _ => ((1u64 << (i - 2)) + 1) * d,
    };
    if i == 0 {
        return (k, tau.exp());
    }
    let half = 2f64.powi(i as i32 - 1);
    let rho = if tau > 1.0 && (i as f64) <= tau.log2() + 1.0 + 1e-12 {
        (tau - half).exp()
    } else {
        tau / half
    };
    (k, rho)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LadderRepr", into = "LadderRepr")]
pub struct CompactnessLadder {
    k: Vec<u64>,
    rho: Vec<f64>,
    valuation: Valuation,
    tail: Option<TailGenerator>,
    norms_in_value_group: bool,
}

#[derive(Serialize, Deserialize)]
struct LadderRepr {
    k: Vec<u64>,
    rho: Vec<f64>,
    #[serde(default)]
    valuation: Valuation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailGenerator>,
    #[serde(default = "yes")]
    norms_in_value_group: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<LadderRepr> for CompactnessLadder {
    type Error = GrowthError;
    fn try_from(r: LadderRepr) -> Result<Self, GrowthError> {
        let mut ladder = CompactnessLadder::new(r.k, r.rho, r.valuation)?;
        if let Some(t) = r.tail {
            ladder = ladder.with_tail(t)?;
        }
        ladder.norms_in_value_group = r.norms_in_value_group;
        Ok(ladder)
    }
}

impl From<CompactnessLadder> for LadderRepr {
    fn from(l: CompactnessLadder) -> Self {
        LadderRepr {
            k: l.k,
            rho: l.rho,
            valuation: l.valuation,
            tail: l.tail,
            norms_in_value_group: l.norms_in_value_group,
        }
    }
}

impl CompactnessLadder {
    pub fn new(k: Vec<u64>, rho: Vec<f64>, valuation: Valuation) -> Result<Self, GrowthError> {
        if k.len() != rho.len() {
            return Err(GrowthError::Ladder(format!(
                "k has {} rungs but rho has {}",
                k.len(),
                rho.len()
            )));
        }
        if k.len() < 2 {
            return Err(GrowthError::Ladder("a ladder needs at least two rungs".into()));
        }
        if k[0] != 0 {
            return Err(GrowthError::Ladder("k_0 must be 0".into()));
        }
        if let Some(i) = k.windows(2).position(|w| w[1] <= w[0]) {
            return Err(GrowthError::Ladder(format!(
                "k must be strictly increasing (k_{} = {} >= k_{} = {})",
                i,
                k[i],
                i + 1,
                k[i + 1]
            )));
        }
        if let Some(i) = rho.iter().position(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(GrowthError::Ladder(format!("rho_{i} must be finite and nonnegative")));
        }
        Ok(Self {
            k,
            rho,
            valuation,
            tail: None,
            norms_in_value_group: true,
        })
    }

    /// `rho_i = rho`, `k_i = i` for `i = 0..len`, continued indefinitely.
    pub fn constant(rho: f64, len: usize, valuation: Valuation) -> Result<Self, GrowthError> {
        Self::new((0..len as u64).collect(), vec![rho; len], valuation)?
            .with_tail(TailGenerator::Constant { rho, k_step: 1 })
    }

    pub fn with_tail(mut self, tail: TailGenerator) -> Result<Self, GrowthError> {
        match tail {
            TailGenerator::DelayDyadic { tau, d } => {
                if !(tau > 0.0 && tau.is_finite()) || d == 0 {
                    return Err(GrowthError::Ladder("delay tail needs tau > 0 and d >= 1".into()));
                }
            }
            TailGenerator::Constant { rho, k_step } => {
                if !(rho >= 0.0 && rho.is_finite()) || k_step == 0 {
                    return Err(GrowthError::Ladder("constant tail needs rho >= 0 and k_step >= 1".into()));
                }
            }
            TailGenerator::Geometric { ratio, k_step } => {
                if !(ratio >= 0.0 && ratio.is_finite()) || k_step == 0 {
                    return Err(GrowthError::Ladder("geometric tail needs ratio >= 0 and k_step >= 1".into()));
                }
            }
        }
        self.tail = Some(tail);
        let n = self.k.len();
        if let Some((k_next, _)) = self.rung(n) {
            if k_next <= self.k[n - 1] {
                return Err(GrowthError::Ladder("tail generator does not continue k increasingly".into()));
            }
        }
        Ok(self)
    }

    pub fn with_norms_in_value_group(mut self, flag: bool) -> Self {
        self.norms_in_value_group = flag;
        self
    }

    pub fn valuation(&self) -> &Valuation {
        &self.valuation
    }

    pub fn tail(&self) -> Option<&TailGenerator> {
        self.tail.as_ref()
    }

    pub fn explicit_len(&self) -> usize {
        self.k.len()
    }

    pub fn explicit_k(&self) -> &[u64] {
        &self.k
    }

    pub fn explicit_rho(&self) -> &[f64] {
        &self.rho
    }

    /// `(k_i, rho_i)`, extended through the tail generator if present.
    pub fn rung(&self, i: usize) -> Option<(u64, f64)> {
        if i < self.k.len() {
            return Some((self.k[i], self.rho[i]));
        }
        let last = self.k.len() - 1;
        let steps = (i - last) as u64;
        match self.tail? {
            TailGenerator::DelayDyadic { tau, d } => {
                if i > 62 {
                    return None;
                }
                Some(delay_rung(tau, d, i))
            }
            TailGenerator::Constant { rho, k_step } => {
                Some((self.k[last].checked_add(steps.checked_mul(k_step)?)?, rho))
            }
            TailGenerator::Geometric { ratio, k_step } => Some((
                self.k[last].checked_add(steps.checked_mul(k_step)?)?,
                self.rho[last] * ratio.powf(steps as f64),
            )),
        }
    }

    pub(crate) fn require(&self, i: usize) -> Result<(u64, f64), GrowthError> {
        self.rung(i).ok_or(GrowthError::InsufficientRungs {
            needed: i + 1,
            available: self.k.len(),
        })
    }

    /// The factor `G(m)` in front of the ladder product.
    ///
    /// Over a dense value group this is `g(1, m)`. Over `Q_p` it is
    /// `g(1, m) = 1` when norms take values in `p^Z`, and `g(1/Theta, m)`
    /// otherwise.
    pub fn g_factor(&self, m: u64) -> Result<GValue, GrowthError> {
        let theta = if self.valuation.is_dense() || self.norms_in_value_group {
            1.0
        } else {
            1.0 / self.valuation.theta()
        };
        let m = usize::try_from(m).map_err(|_| GrowthError::Ladder("dimension overflow".into()))?;
        let g = g_oracle(theta, m, &self.valuation)?;
        Ok(g)
    }

    pub fn norms_in_value_group(&self) -> bool {
        self.norms_in_value_group
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delay_rungs() {
        let k: Vec<u64> = (0..6).map(|i| delay_rung(1.0, 1, i).0).collect();
        assert_eq!(k, vec![0, 1, 2, 3, 5, 9]);
        assert_eq!(delay_rung(1.0, 1, 0).1, 1f64.exp());
        assert_eq!(delay_rung(1.0, 1, 3).1, 0.25);
        let r: Vec<f64> = (1..5).map(|i| delay_rung(4.0, 2, i).1).collect();
        assert_eq!(r, vec![3f64.exp(), 2f64.exp(), 1.0, 0.5]);
        assert_eq!(delay_rung(4.0, 2, 4).0, 10);
    }

    #[test]
    fn validation() {
        let r = Valuation::real();
        assert!(CompactnessLadder::new(vec![0], vec![1.0], r).is_err());
        assert!(CompactnessLadder::new(vec![1, 2], vec![1.0, 1.0], r).is_err());
        assert!(CompactnessLadder::new(vec![0, 2, 2], vec![1.0; 3], r).is_err());
        assert!(CompactnessLadder::new(vec![0, 1], vec![1.0, -0.1], r).is_err());
        let l = CompactnessLadder::new(vec![0, 3], vec![1.0, 0.5], r).unwrap();
        assert!(l.clone().with_tail(TailGenerator::DelayDyadic { tau: 1.0, d: 1 }).is_err());
        assert_eq!(l.rung(2), None);
    }

    #[test]
    fn tails_extend() {
        let l = CompactnessLadder::constant(0.5, 3, Valuation::real()).unwrap();
        assert_eq!(l.rung(10), Some((10, 0.5)));
        let g = CompactnessLadder::new(vec![0, 2], vec![1.0, 0.5], Valuation::real())
            .unwrap()
            .with_tail(TailGenerator::Geometric { ratio: 0.5, k_step: 3 })
            .unwrap();
        assert_eq!(g.rung(3), Some((8, 0.125)));
    }

    #[test]
    fn json_roundtrip() {
        let l = CompactnessLadder::new(vec![0, 1, 2], vec![2.0, 1.0, 0.5], Valuation::padic(3).unwrap())
            .unwrap()
            .with_tail(TailGenerator::Constant { rho: 0.5, k_step: 1 })
            .unwrap();
        let s = serde_json::to_string(&l).unwrap();
        let back: CompactnessLadder = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        let bad = r#"{"k":[0,0],"rho":[1,1]}"#;
        assert!(serde_json::from_str::<CompactnessLadder>(bad).is_err());
    }
}
