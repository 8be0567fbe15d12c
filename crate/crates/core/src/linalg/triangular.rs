//! Triangular re-basing of a family `v_1..v_m` with tails bounded away from
//! zero.
//!
//! For each `k` a functional `f_k` is built with `f_k(v_k) = 1`,
//! `f_k(v_l) = 0` for `l > k` and `|f_k| = 1 / dist(v_k, span(v_l : l > k))`.
//! Over `R` this is a weighted l1 linear program (the dual of the sup-norm
//! distance problem); over `Q_p` it is read off an ultrametric pivot basis.
//! The vectors `u_i = v_i + sum_{j>i} eta_ij v_j` are then chosen
//! biorthogonal to the `f_k`, so every `y` in the span expands as
//! `y = sum_k f_k(y) u_k` with `|f_k(y)| <= |y| / dist_k`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use super::{LinalgError, NormedSpace};
use crate::field::{rational_power, Scalar, Valuation};

#[derive(Debug, Clone, Serialize)]
pub struct TriangularBasis {
    /// Strictly upper triangular: `eta[i][j]` is zero for `j <= i`.
    #[serde(serialize_with = "ser_matrix")]
    pub eta: Vec<Vec<Scalar>>,
    #[serde(serialize_with = "ser_matrix")]
    pub u: Vec<Vec<Scalar>>,
    /// Coordinate vectors of the dual functionals, `f_k(x) = sum_j c_kj x_j`.
    #[serde(serialize_with = "ser_matrix")]
    pub functionals: Vec<Vec<Scalar>>,
    /// `dist(v_k, span(v_l : l > k))`.
    pub tail_infima: Vec<f64>,
    /// `(1 + eps) / kappa`.
    pub coefficient_bound: f64,
    /// `max_k 1 / dist_k`, the bound actually achieved.
    pub achieved_bound: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &[Vec<Scalar>], s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<serde_json::Value>> = m
        .iter()
        .map(|r| r.iter().map(Scalar::to_descriptor).collect())
        .collect();
    rows.serialize(s)
}

impl TriangularBasis {
    /// Coefficients `mu` with `y = sum_k mu_k u_k` for `y` in the span.
    pub fn coefficients(&self, y: &[Scalar]) -> Result<Vec<Scalar>, LinalgError> {
        self.functionals.iter().map(|c| dot(c, y)).collect()
    }

    /// `sum_k mu_k u_k`.
    pub fn reconstruct(&self, mu: &[Scalar]) -> Result<Vec<Scalar>, LinalgError> {
        let n = self.u[0].len();
        let mut out: Vec<Scalar> = vec![zero_like(&self.u[0][0]); n];
        for (m, u) in mu.iter().zip(&self.u) {
            for (o, x) in out.iter_mut().zip(u) {
                *o = o.checked_add(&m.checked_mul(x)?)?;
            }
        }
        Ok(out)
    }
}

fn zero_like(s: &Scalar) -> Scalar {
    match s {
        Scalar::Real(_) => Scalar::Real(0.0),
        Scalar::Padic { p, .. } => Scalar::Padic {
            p: *p,
            value: BigRational::zero(),
        },
    }
}

fn dot(c: &[Scalar], x: &[Scalar]) -> Result<Scalar, LinalgError> {
    let mut acc = zero_like(&c[0]);
    for (a, b) in c.iter().zip(x) {
        acc = acc.checked_add(&a.checked_mul(b)?)?;
    }
    Ok(acc)
}

/// Minimal-norm functional vanishing on `v_l, l > k` with value 1 at `v_k`.
/// Returns the functional and its dual norm.
fn real_functional(space: &NormedSpace, vs: &[Vec<f64>], k: usize) -> Result<(Vec<f64>, f64), LinalgError> {
    let n = space.dim();
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = space
        .weights()
        .iter()
        .map(|w| {
            let plus = pb.add_var(1.0 / w, (0.0, f64::INFINITY));
            let minus = pb.add_var(1.0 / w, (0.0, f64::INFINITY));
            (plus, minus)
        })
        .collect();
    for (l, v) in vs.iter().enumerate().skip(k) {
        let expr: Vec<_> = (0..n)
            .flat_map(|j| [(vars[j].0, v[j]), (vars[j].1, -v[j])])
            .collect();
        let rhs = if l == k { 1.0 } else { 0.0 };
        pb.add_constraint(expr.as_slice(), ComparisonOp::Eq, rhs);
    }
    let sol = pb.solve().map_err(|e| match e {
        minilp::Error::Infeasible => LinalgError::Dependent,
        other => LinalgError::Lp(other.to_string()),
    })?;
    let c: Vec<f64> = vars.iter().map(|&(a, b)| sol[a] - sol[b]).collect();
    let norm: f64 = c.iter().zip(space.weights()).map(|(c, w)| c.abs() / w).sum();
    Ok((c, norm))
}

/// Ultrametric functionals over `Q_p`, built from the back of the family.
fn padic_functionals(
    space: &NormedSpace,
    vs: &[Vec<BigRational>],
    p: u64,
) -> Result<Vec<(Vec<BigRational>, f64)>, LinalgError> {
    let n = space.dim();
    // coordinate scaling that turns the weighted norm into the plain sup-norm
    let scale: Vec<BigRational> = space
        .weight_exponents()
        .expect("p-adic space")
        .iter()
        .map(|&a| rational_power(p, -(a as i64)))
        .collect();
    let abs = |q: &BigRational| {
        if q.is_zero() {
            0.0
        } else {
            (p as f64).powi(-crate::field::rational_valuation(q, p) as i32)
        }
    };
    // pivot basis of the current tail: (pivot coordinate, scaled vector)
    let mut basis: Vec<(usize, Vec<BigRational>)> = Vec::new();
    let mut out = vec![(Vec::new(), 0.0); vs.len()];
    for k in (0..vs.len()).rev() {
        let x: Vec<BigRational> = vs[k].iter().zip(&scale).map(|(a, s)| a * s).collect();
        let mut w = x.clone();
        for (piv, b) in &basis {
            let coef = x[*piv].clone();
            if coef.is_zero() {
                continue;
            }
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= &coef * bi;
            }
        }
        let (r, dist) = w
            .iter()
            .enumerate()
            .map(|(i, q)| (i, abs(q)))
            .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if dist == 0.0 {
            return Err(LinalgError::Dependent);
        }
        let lead = w[r].clone();
        // f_k(x) = (x' - sum_l x'[pi_l] b_l)[r] / lead, x' = scale * x
        let mut c = vec![BigRational::zero(); n];
        c[r] = scale[r].clone() / &lead;
        for (piv, b) in &basis {
            if !b[r].is_zero() {
                c[*piv] -= &scale[*piv] * &b[r] / &lead;
            }
        }
        out[k] = (c, 1.0 / dist);
        let b_new: Vec<BigRational> = w.iter().map(|q| q / &lead).collect();
        for (_, b) in basis.iter_mut() {
            let coef = b[r].clone();
            if coef.is_zero() {
                continue;
            }
            for (bi, ni) in b.iter_mut().zip(&b_new) {
                *bi -= &coef * ni;
            }
        }
        basis.push((r, b_new));
    }
    Ok(out)
}

/// `dist(v_index, span(v_l : l > index))`, exact up to LP round-off over `R`.
pub fn tail_infimum(space: &NormedSpace, vs: &[Vec<Scalar>], index: usize) -> Result<f64, LinalgError> {
    for v in vs {
        space.check_vector(v)?;
    }
    match space.valuation() {
        Valuation::Real { .. } => {
            let rv = real_rows(vs);
            Ok(1.0 / real_functional(space, &rv, index)?.1)
        }
        Valuation::Padic { p } => {
            let qv = rational_rows(vs);
            let f = padic_functionals(space, &qv[index..], *p)?;
            Ok(1.0 / f[0].1)
        }
    }
}

fn real_rows(vs: &[Vec<Scalar>]) -> Vec<Vec<f64>> {
    vs.iter()
        .map(|v| v.iter().map(|s| s.as_real().expect("real entry")).collect())
        .collect()
}

fn rational_rows(vs: &[Vec<Scalar>]) -> Vec<Vec<BigRational>> {
    vs.iter()
        .map(|v| v.iter().map(|s| s.as_rational().expect("p-adic entry").clone()).collect())
        .collect()
}

pub fn triangular_basis(
    space: &NormedSpace,
    vs: &[Vec<Scalar>],
    kappa: f64,
    eps: f64,
) -> Result<TriangularBasis, LinalgError> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(LinalgError::InvalidKappa(kappa));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LinalgError::InvalidEpsilon(eps));
    }
    if vs.is_empty() {
        return Err(LinalgError::ZeroDimension);
    }
    for (i, v) in vs.iter().enumerate() {
        let norm = space.norm(v)?;
        if norm > 1.0 + 1e-12 {
            return Err(LinalgError::VectorTooLong { index: i + 1, norm });
        }
    }
    let m = vs.len();
    let field = *space.valuation();
    let (functionals, norms): (Vec<Vec<Scalar>>, Vec<f64>) = match field {
        Valuation::Real { .. } => {
            let rv = real_rows(vs);
            (0..m)
                .map(|k| {
                    real_functional(space, &rv, k)
                        .map(|(c, nrm)| (c.into_iter().map(Scalar::Real).collect(), nrm))
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip()
        }
        Valuation::Padic { p } => padic_functionals(space, &rational_rows(vs), p)?
            .into_iter()
            .map(|(c, nrm)| (c.into_iter().map(|q| Scalar::padic_rational(p, q)).collect(), nrm))
            .unzip(),
    };
    let tail_infima: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    for (k, &dist) in tail_infima.iter().enumerate() {
        // the eps slack absorbs the round-off of the LP
        if dist < kappa / (1.0 + eps) {
            return Err(LinalgError::TailInfimum {
                index: k + 1,
                infimum: dist,
                kappa,
            });
        }
    }

    // fv[k][i] = f_k(v_i)
    let fv: Vec<Vec<Scalar>> = functionals
        .iter()
        .map(|c| vs.iter().map(|v| dot(c, v)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut eta = vec![vec![field.zero(); m]; m];
    for i in 0..m {
        for k in i + 1..m {
            let mut acc = fv[k][i].clone();
            for j in i + 1..k {
                acc = acc.checked_add(&eta[i][j].checked_mul(&fv[k][j])?)?;
            }
            eta[i][k] = acc.neg();
        }
    }
    let mut u = Vec::with_capacity(m);
    for i in 0..m {
        let mut ui = vs[i].clone();
        for j in i + 1..m {
            for (a, b) in ui.iter_mut().zip(&vs[j]) {
                *a = a.checked_add(&eta[i][j].checked_mul(b)?)?;
            }
        }
        u.push(ui);
    }
    Ok(TriangularBasis {
        eta,
        u,
        functionals,
        achieved_bound: norms.iter().copied().fold(0.0, f64::max),
        tail_infima,
        coefficient_bound: (1.0 + eps) / kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reals(rows: &[&[f64]]) -> Vec<Vec<Scalar>> {
        rows.iter().map(|r| r.iter().map(|&x| Scalar::Real(x)).collect()).collect()
    }

    #[test]
    fn standard_basis_is_fixed() {
        let s = NormedSpace::sup(Valuation::real(), 3).unwrap();
        let vs = reals(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let tb = triangular_basis(&s, &vs, 1.0, 1e-6).unwrap();
        for row in &tb.eta {
            assert!(row.iter().all(|e| e.abs_value() < 1e-12));
        }
        assert!((tb.achieved_bound - 1.0).abs() < 1e-9);
    }

    #[test]
    fn skewed_pair() {
        let s = NormedSpace::sup(Valuation::real(), 2).unwrap();
        let vs = reals(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let tb = triangular_basis(&s, &vs, 0.5, 1e-6).unwrap();
        assert!((tb.tail_infima[0] - 0.5).abs() < 1e-9);
        assert!(tb.achieved_bound <= tb.coefficient_bound);
        let y = reals(&[&[-1.0, 1.0]]).remove(0);
        let mu = tb.coefficients(&y).unwrap();
        let back = tb.reconstruct(&mu).unwrap();
        for (a, b) in back.iter().zip(&y) {
            assert!((a.as_real().unwrap() - b.as_real().unwrap()).abs() < 1e-12);
        }
        assert!(matches!(
            triangular_basis(&s, &vs, 0.9, 1e-6),
            Err(LinalgError::TailInfimum { index: 1, .. })
        ));
    }

    #[test]
    fn single_vector() {
        let s = NormedSpace::sup(Valuation::real(), 2).unwrap();
        let vs = reals(&[&[0.6, -0.2]]);
        let tb = triangular_basis(&s, &vs, 0.5, 1e-3).unwrap();
        assert_eq!(tb.u, vs);
        assert!((tb.achieved_bound - 1.0 / 0.6).abs() < 1e-9);
    }

    #[test]
    fn long_vector_rejected() {
        let s = NormedSpace::sup(Valuation::real(), 1).unwrap();
        assert!(matches!(
            triangular_basis(&s, &reals(&[&[2.0]]), 0.5, 1e-3),
            Err(LinalgError::VectorTooLong { index: 1, .. })
        ));
    }

    #[test]
    fn padic_functionals_are_biorthogonal() {
        let q = Valuation::padic(3).unwrap();
        let s = NormedSpace::sup(q, 3).unwrap();
        let e = |n: i64, d: i64| Scalar::padic(3, n, d).unwrap();
        let vs = vec![
            vec![e(1, 1), e(3, 1), e(0, 1)],
            vec![e(1, 1), e(1, 1), e(9, 1)],
            vec![e(0, 1), e(2, 1), e(1, 1)],
        ];
        let tb = triangular_basis(&s, &vs, 1.0 / 9.0, 1e-9).unwrap();
        for (k, c) in tb.functionals.iter().enumerate() {
            for (i, u) in tb.u.iter().enumerate() {
                let want = if i == k { 1 } else { 0 };
                assert_eq!(dot(c, u).unwrap(), q.integer(want));
            }
        }
        let y = vec![e(5, 1), e(-1, 2), e(27, 1)];
        let mu = tb.coefficients(&y).unwrap();
        assert_eq!(tb.reconstruct(&mu).unwrap(), y);
        for m in &mu {
            assert!(m.abs_value() <= tb.achieved_bound * s.norm(&y).unwrap());
        }
    }
}
