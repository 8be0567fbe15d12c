//! Box-counting dimension of finite point sets and of delay embeddings of
//! trajectories.

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dde::{DdeError, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxDimError {
    #[error("invalid point cloud: {0}")]
    Cloud(String),
    #[error("only {found} usable dyadic scales in [{eps_min}, {eps_max}], need 3")]
    TooFewScales { found: usize, eps_min: f64, eps_max: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dde(#[from] DdeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Sup,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    metric: Metric,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: &[Vec<f64>], metric: Metric) -> Result<Self, BoxDimError> {
        let first = points.first().ok_or_else(|| BoxDimError::Cloud("no points".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(BoxDimError::Cloud("points have no coordinates".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(BoxDimError::Cloud(format!("point {i} has {} coordinates, expected {dim}", p.len())));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(BoxDimError::Cloud(format!("point {i} is not finite")));
            }
            coords.extend_from_slice(p);
        }
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in points {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Ok(Self {
            dim,
            coords,
            metric,
            lo,
            hi,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows of comma-separated coordinates; blank lines and lines starting
    /// with `#` are skipped, as is a non-numeric header row.
    pub fn from_csv(text: &str, metric: Metric) -> Result<Self, BoxDimError> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            match row {
                Ok(r) => points.push(r),
                Err(_) if points.is_empty() && n == 0 => continue,
                Err(e) => return Err(BoxDimError::Cloud(format!("line {}: {e}", n + 1))),
            }
        }
        Self::new(&points, metric)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.len() {
            for (k, x) in self.point(i).iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{x}");
            }
            s.push('\n');
        }
        s
    }

    /// Side of the grid boxes used at scale `eps`: `eps` for the sup metric,
    /// `eps / sqrt(D)` for the Euclidean one, so boxes have diameter `eps`.
    fn side(&self, eps: f64) -> f64 {
        match self.metric {
            Metric::Sup => eps,
            Metric::Euclidean => eps / (self.dim as f64).sqrt(),
        }
    }

    /// Occupied boxes of the grid anchored at `lo - shift * side`.
    pub fn covering_number_offset(&self, eps: f64, shift: f64) -> u64 {
        let side = self.side(eps);
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        for i in 0..self.len() {
            let key: Vec<i64> = self
                .point(i)
                .iter()
                .zip(&self.lo)
                .map(|(x, l)| ((x - l) / side + shift).floor() as i64)
                .collect();
            seen.insert(key);
        }
        seen.len() as u64
    }
}

/// Number of half-open boxes of side `eps` (grid anchored at the lower
/// corner of the bounding box) that contain a point.
pub fn covering_number(cloud: &PointCloud, eps: f64) -> Result<u64, BoxDimError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(BoxDimError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(cloud.covering_number_offset(eps, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCount {
    pub eps: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiFit {
    /// Slope of `ln K` against `-ln eps`.
    pub estimate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub scales: Vec<ScaleCount>,
    /// At least five scales and `R^2 >= 0.98`.
    pub reliable: bool,
}

/// Least-squares box-counting slope over `eps = eps_max / 2^k >= eps_min`.
pub fn minkowski_dim(cloud: &PointCloud, eps_min: f64, eps_max: f64) -> Result<MinkowskiFit, BoxDimError> {
    if !(eps_min > 0.0 && eps_min < eps_max && eps_max.is_finite()) {
        return Err(BoxDimError::InvalidParameter(format!(
            "need 0 < eps_min < eps_max, got [{eps_min}, {eps_max}]"
        )));
    }
    let mut eps = Vec::new();
    let mut e = eps_max;
    while e >= eps_min * (1.0 - 1e-12) {
        eps.push(e);
        e *= 0.5;
    }
    if eps.len() < 3 {
        return Err(BoxDimError::TooFewScales {
            found: eps.len(),
            eps_min,
            eps_max,
        });
    }
    let scales: Vec<ScaleCount> = eps
        .par_iter()
        .map(|e| ScaleCount {
            eps: *e,
            count: cloud.covering_number_offset(*e, 0.0),
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|s| -s.eps.ln()).collect();
    let ys: Vec<f64> = scales.iter().map(|s| (s.count as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(MinkowskiFit {
        estimate: slope,
        intercept: my - slope * mx,
        r_squared,
        reliable: scales.len() >= 5 && r_squared >= 0.98,
        scales,
    })
}

/// Maps each of `samples + 1` equispaced times `t` in `[t_start, t_end]` to
/// `x` at `dim` equispaced points of `[t - window, t]`, concatenated.
pub fn embed_trajectory(
    traj: &Trajectory,
    window: f64,
    dim: usize,
    t_start: f64,
    t_end: f64,
    samples: usize,
) -> Result<PointCloud, BoxDimError> {
    if dim == 0 || !(window >= 0.0) || !(t_end >= t_start) {
        return Err(BoxDimError::InvalidParameter(
            "need D >= 1, window >= 0 and t_start <= t_end".into(),
        ));
    }
    let earliest = traj.t0() - traj.tau();
    if t_start - window < earliest - 1e-12 || t_end > traj.t_end() + 1e-12 {
        return Err(DdeError::InsufficientCoverage {
            start: earliest,
            end: traj.t_end(),
            need_start: t_start - window,
            need_end: t_end,
        }
        .into());
    }
    let points = (0..=samples)
        .map(|k| {
            let t = if samples == 0 {
                t_start
            } else {
                t_start + (t_end - t_start) * k as f64 / samples as f64
            };
            let mut v = Vec::with_capacity(dim * traj.dim());
            for j in 0..dim {
                let off = if dim == 1 { 0.0 } else { window * (1.0 - j as f64 / (dim - 1) as f64) };
                v.extend(traj.eval(t - off)?);
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>, DdeError>>()?;
    PointCloud::new(&points, Metric::Sup)
}

/// Left endpoints of the `2^depth` intervals of the middle-thirds
/// construction, plus the point 1.
pub fn cantor_points(depth: u32) -> Vec<Vec<f64>> {
    let mut pts = vec![0.0];
    let mut len = 1.0;
    for _ in 0..depth {
        len /= 3.0;
        pts = pts.iter().flat_map(|a| [*a, a + 2.0 * len]).collect();
    }
    pts.push(1.0);
    pts.into_iter().map(|x| vec![x]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        let one = PointCloud::new(&[vec![0.3, 0.3]], Metric::Sup).unwrap();
        assert_eq!(covering_number(&one, 1e-3).unwrap(), 1);
        let two = PointCloud::new(&[vec![0.0, 0.0], vec![1.0, 0.5]], Metric::Sup).unwrap();
        assert_eq!(covering_number(&two, 0.25).unwrap(), 2);
        assert!(PointCloud::new(&[], Metric::Sup).is_err());
        assert!(PointCloud::new(&[vec![f64::NAN]], Metric::Sup).is_err());
    }

    #[test]
    fn single_point_dimension_zero() {
        let one = PointCloud::new(&[vec![1.0]], Metric::Sup).unwrap();
        let fit = minkowski_dim(&one, 1e-3, 1.0).unwrap();
        assert_eq!(fit.estimate, 0.0);
        assert!(matches!(minkowski_dim(&one, 0.4, 1.0), Err(BoxDimError::TooFewScales { .. })));
    }

    #[test]
    fn cantor_dimension() {
        let c = PointCloud::new(&cantor_points(10), Metric::Sup).unwrap();
        let fit = minkowski_dim(&c, 3f64.powi(-9), 0.5).unwrap();
        assert!((fit.estimate - 2f64.ln() / 3f64.ln()).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn csv_round_trip() {
        let c = PointCloud::from_csv("x,y\n1,2\n3,4\n", Metric::Sup).unwrap();
        assert_eq!(c.len(), 2);
        let back = PointCloud::from_csv(&c.to_csv(), Metric::Sup).unwrap();
        assert_eq!(back, c);
    }
}
