use std::io::Write;
use std::sync::Arc;

use super::kernel::{kernel_from_dist2, upper_pair_sum, Schedule};
use crate::error::{check_exponent, Error, Result};
use crate::geometry::{Geometry, MIN_NODE_DISTANCE};
use crate::numeric::dist2;

/// An `N`-point configuration on a geometry, stored with chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    geometry: Arc<Geometry>,
    charts: Vec<usize>,
    params: Vec<f64>,
    points: Vec<f64>,
}

impl Configuration {
    /// Build from chart indices and flat chart parameters (`d` per point).
    pub fn from_chart_coords(geometry: Arc<Geometry>, charts: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        let (d, p) = (geometry.intrinsic_dim, geometry.ambient_dim);
        if params.len() != charts.len() * d {
            return Err(Error::DimensionMismatch { expected: charts.len() * d, got: params.len() });
        }
        let mut points = vec![0.0; charts.len() * p];
        for (k, &c) in charts.iter().enumerate() {
            if c >= geometry.charts.len() {
                return Err(Error::InvalidParameter(format!("chart index {c} out of range")));
            }
            geometry.charts[c].map.eval(&params[k * d..(k + 1) * d], &mut points[k * p..(k + 1) * p]);
        }
        Self::new(geometry, charts, params, points)
    }

    /// Build from explicit ambient points, checking they are reproduced by
    /// their chart coordinates to within `1e-10` and are pairwise distinct.
    pub fn new(geometry: Arc<Geometry>, charts: Vec<usize>, params: Vec<f64>, points: Vec<f64>) -> Result<Self> {
        let (d, p) = (geometry.intrinsic_dim, geometry.ambient_dim);
        let n = charts.len();
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: n });
        }
        if params.len() != n * d || points.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: points.len() });
        }
        let mut x = vec![0.0; p];
        for k in 0..n {
            let chart = geometry
                .charts
                .get(charts[k])
                .ok_or_else(|| Error::InvalidParameter(format!("chart index {} out of range", charts[k])))?;
            let u = &params[k * d..(k + 1) * d];
            if !chart.domain.contains(u) {
                return Err(Error::InvalidParameter(format!("point {k} lies outside chart `{}`", chart.id)));
            }
            chart.map.eval(u, &mut x);
            let err = dist2(&x, &points[k * p..(k + 1) * p]).sqrt();
            if err >= 1e-10 {
                return Err(Error::InvalidParameter(format!("point {k} is {err:e} off its chart image")));
            }
        }
        if let Some((i, j, distance)) = closest_pair(&points, p) {
            if distance <= MIN_NODE_DISTANCE {
                return Err(Error::SingularConfiguration { i, j, distance });
            }
        }
        Ok(Self { geometry, charts, params, points })
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.ambient_dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let p = self.dim();
        &self.points[i * p..(i + 1) * p]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn charts(&self) -> &[usize] {
        &self.charts
    }

    /// Flat chart parameters, `d` per point.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Write `x_1..x_p` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|k| format!("x_{k}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn closest_pair(points: &[f64], p: usize) -> Option<(usize, usize, f64)> {
    let n = points.len() / p;
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let d2 = dist2(&points[i * p..(i + 1) * p], &points[j * p..(j + 1) * p]);
            if best.is_none_or(|b| d2 < b.2) {
                best = Some((i, j, d2));
            }
        }
    }
    best.map(|(i, j, d2)| (i, j, d2.sqrt()))
}

/// `E_s(omega_N) = sum_{i != j} |x_i - x_j|^{-s}`.
pub fn discrete_energy(cfg: &Configuration, s: f64) -> Result<f64> {
    point_set_energy(cfg.points(), cfg.dim(), s, Schedule::default())
}

pub fn discrete_energy_with(cfg: &Configuration, s: f64, schedule: Schedule) -> Result<f64> {
    point_set_energy(cfg.points(), cfg.dim(), s, schedule)
}

/// Discrete Riesz energy of a raw point set (flat storage, `dim` per point).
pub fn point_set_energy(points: &[f64], dim: usize, s: f64, schedule: Schedule) -> Result<f64> {
    check_exponent(s)?;
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: points.len() });
    }
    let n = points.len() / dim;
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let guard = MIN_NODE_DISTANCE * MIN_NODE_DISTANCE;
    let e = 2.0
        * upper_pair_sum(n, schedule, |i, j| {
            let d2 = dist2(&points[i * dim..(i + 1) * dim], &points[j * dim..(j + 1) * dim]);
            if d2 <= guard {
                f64::INFINITY
            } else {
                kernel_from_dist2(d2, s)
            }
        });
    if e.is_infinite() {
        let (i, j, distance) = closest_pair(points, dim).expect("n >= 2");
        return Err(Error::SingularConfiguration { i, j, distance });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin, BuiltinKind, BuiltinParams};
    use std::f64::consts::PI;

    fn interval() -> Arc<Geometry> {
        Arc::new(make_builtin(BuiltinKind::Interval, &BuiltinParams::new()).unwrap())
    }

    #[test]
    fn two_points_at_unit_distance() {
        let cfg = Configuration::from_chart_coords(interval(), vec![0, 0], vec![0.0, 1.0]).unwrap();
        for s in [0.3, 1.0, 4.0] {
            assert!((discrete_energy(&cfg, s).unwrap() - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn three_collinear_points() {
        // points 0, 1, 2 on a shifted interval
        let g = Arc::new(make_builtin(BuiltinKind::Interval, &BuiltinParams::new().with("lo", 0.0).with("hi", 2.0)).unwrap());
        let cfg = Configuration::from_chart_coords(g, vec![0; 3], vec![0.0, 1.0, 2.0]).unwrap();
        assert!((discrete_energy(&cfg, 1.0).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn duplicate_points_are_singular() {
        let err = Configuration::from_chart_coords(interval(), vec![0, 0], vec![0.2, 0.2]).unwrap_err();
        assert!(matches!(err, Error::SingularConfiguration { .. }));
        let err = point_set_energy(&[0.0, 0.0, 1.0], 1, 1.0, Schedule::Sequential).unwrap_err();
        assert!(matches!(err, Error::SingularConfiguration { .. }));
    }

    #[test]
    fn off_chart_points_are_rejected() {
        let g = Arc::new(make_builtin(BuiltinKind::Circle, &BuiltinParams::new()).unwrap());
        let err = Configuration::new(g, vec![0, 0], vec![0.0, PI], vec![1.0, 0.0, -1.0, 1e-6]);
        assert!(err.is_err());
    }

    #[test]
    fn tiling_does_not_change_the_sum() {
        let g = Arc::new(make_builtin(BuiltinKind::Circle, &BuiltinParams::new()).unwrap());
        let n = 257;
        let params: Vec<f64> = (0..n).map(|k| 2.0 * PI * ((k as f64 + 0.3).sqrt() % 1.0)).collect();
        let cfg = Configuration::from_chart_coords(g, vec![0; n], params).unwrap();
        let seq = discrete_energy_with(&cfg, 0.5, Schedule::Sequential).unwrap();
        for rows in [1, 16, 100] {
            let t = discrete_energy_with(&cfg, 0.5, Schedule::Tiled { rows }).unwrap();
            assert!(((t - seq) / seq).abs() < 1e-12);
        }
    }
}
