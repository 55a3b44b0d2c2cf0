//! Compact sets described by bi-Lipschitz chart atlases, plus quadrature
//! clouds that carry Hausdorff weights.
//!
//! Hausdorff measure uses the normalization in which the unit ball of `R^d`
//! has measure `2^d`; ordinary surface measure is multiplied by
//! `2^d / kappa_d` (`kappa_d` the Lebesgue volume of the unit ball).

mod builtin;
mod chart;
mod cloud;

pub use builtin::{make_builtin, BuiltinKind, BuiltinParams};
pub use chart::{gram_sqrt_det, Chart, ChartMap, Domain};
pub use cloud::{
    diameter, measure_of_ball, min_separation, sample_cloud, sample_cloud_with, SamplingOptions, MIN_NODE_DISTANCE,
    WeightedPointCloud,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dist2;

/// A compact set `A` in `R^p` of intrinsic dimension `d`, covered by charts
/// whose images are pairwise disjoint.
///
/// The lower-dimensional residual set allowed by strong rectifiability has no
/// discrete counterpart and is not modelled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub name: String,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub charts: Vec<Chart>,
}

impl Geometry {
    pub fn new(
        name: impl Into<String>,
        ambient_dim: usize,
        intrinsic_dim: usize,
        charts: Vec<Chart>,
    ) -> Result<Self> {
        let geom = Self { name: name.into(), ambient_dim, intrinsic_dim, charts };
        geom.validate()?;
        Ok(geom)
    }

    /// Parse and validate a geometry JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let geom: Geometry = serde_json::from_str(text)?;
        geom.validate()?;
        Ok(geom)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural checks plus sampled injectivity and disjointness checks.
    pub fn validate(&self) -> Result<()> {
        let (p, d) = (self.ambient_dim, self.intrinsic_dim);
        if d == 0 || d > p {
            return Err(Error::InvalidGeometry(format!(
                "need 0 < intrinsic_dim <= ambient_dim, got d = {d}, p = {p}"
            )));
        }
        if self.charts.is_empty() {
            return Err(Error::InvalidGeometry("atlas has no charts".into()));
        }
        for chart in &self.charts {
            chart.validate()?;
            if chart.ambient_dim() != p || chart.param_dim() != d {
                return Err(Error::InvalidGeometry(format!(
                    "chart `{}` maps R^{} -> R^{}, geometry is d = {d}, p = {p}",
                    chart.id,
                    chart.param_dim(),
                    chart.ambient_dim()
                )));
            }
        }
        self.sampled_atlas_check()
    }

    fn sampled_atlas_check(&self) -> Result<()> {
        let per_axis = if self.intrinsic_dim == 1 { 128 } else { 16 };
        let samples: Vec<(Vec<Vec<f64>>, f64)> = self
            .charts
            .iter()
            .map(|chart| {
                let params = cloud::midpoint_params(&chart.domain, per_axis);
                let pts: Vec<Vec<f64>> = params.iter().map(|u| chart.point(u)).collect();
                let mass: f64 = params
                    .iter()
                    .map(|u| chart.area_element(u))
                    .sum::<f64>()
                    * cloud::param_cell_volume(&chart.domain, per_axis);
                let spacing = (mass / pts.len().max(1) as f64).powf(1.0 / self.intrinsic_dim as f64);
                (pts, spacing)
            })
            .collect();

        for (chart, (pts, _)) in self.charts.iter().zip(&samples) {
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    if dist2(&pts[i], &pts[j]).sqrt() < 1e-12 {
                        return Err(Error::InvalidGeometry(format!(
                            "chart `{}` is not injective: samples {i} and {j} coincide",
                            chart.id
                        )));
                    }
                }
            }
        }
        for a in 0..samples.len() {
            for b in a + 1..samples.len() {
                let tol = 0.25 * samples[a].1.min(samples[b].1);
                let overlap = samples[a]
                    .0
                    .iter()
                    .any(|x| samples[b].0.iter().any(|y| dist2(x, y).sqrt() < tol));
                if overlap {
                    return Err(Error::InvalidGeometry(format!(
                        "chart images `{}` and `{}` overlap",
                        self.charts[a].id, self.charts[b].id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Map a chart parameter to an ambient point.
    pub fn point(&self, chart: usize, u: &[f64]) -> Vec<f64> {
        self.charts[chart].point(u)
    }

    /// Bring a parameter that left its chart domain back onto the set.
    ///
    /// Periodic axes wrap, cube faces hand the point to the face that now
    /// contains it, and every other boundary clamps. Returns the chart index
    /// that owns the returned parameter.
    pub fn retract(&self, chart: usize, u: &mut [f64]) -> usize {
        let c = &self.charts[chart];
        if let ChartMap::CubeFace { radius, .. } = c.map {
            if c.domain.contains(u) {
                return chart;
            }
            let limit = std::f64::consts::FRAC_PI_2 - 1e-9;
            for x in u.iter_mut() {
                *x = x.clamp(-limit, limit);
            }
            let x = c.point(u);
            let (axis, positive, ab) = chart::cube_face_of(&x);
            let owner = self.charts.iter().position(|other| {
                matches!(other.map, ChartMap::CubeFace { axis: a, positive: s, radius: r }
                    if a == axis && s == positive && r == radius)
            });
            if let Some(owner) = owner {
                u.copy_from_slice(&ab);
                return owner;
            }
            c.domain.project(u);
            return chart;
        }
        c.domain.project(u);
        chart
    }

    /// Whether an axis of a chart is clamped (rather than wrapped or re-charted).
    pub(crate) fn is_clamped_axis(&self, chart: usize, axis: usize) -> bool {
        let c = &self.charts[chart];
        !matches!(c.map, ChartMap::CubeFace { .. }) && !c.domain.is_periodic(axis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine_square(id: &str, offset: [f64; 2]) -> Chart {
        Chart::new(
            id,
            Domain::closed_box(vec![0.0, 0.0], vec![1.0, 1.0]),
            ChartMap::Affine {
                matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                offset: offset.to_vec(),
            },
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn overlapping_charts_are_rejected() {
        let charts = vec![affine_square("a", [0.0, 0.0]), affine_square("b", [0.5, 0.3])];
        let err = Geometry::new("bad", 2, 2, charts).unwrap_err();
        assert!(matches!(err, Error::InvalidGeometry(_)), "{err}");
    }

    #[test]
    fn adjacent_charts_are_accepted() {
        let charts = vec![affine_square("a", [0.0, 0.0]), affine_square("b", [1.0, 0.0])];
        Geometry::new("strip", 2, 2, charts).unwrap();
    }

    #[test]
    fn degenerate_affine_chart_fails_injectivity() {
        let chart = Chart::new(
            "flat",
            Domain::closed_box(vec![0.0, 0.0], vec![1.0, 1.0]),
            ChartMap::Affine { matrix: vec![vec![1.0, 0.0], vec![1.0, 0.0]], offset: vec![0.0, 0.0] },
            1.0,
        )
        .unwrap();
        assert!(Geometry::new("flat", 2, 2, vec![chart]).is_err());
    }

    #[test]
    fn bilipschitz_constant_below_one_is_rejected() {
        let err = Chart::new(
            "x",
            Domain::closed_box(vec![0.0], vec![1.0]),
            ChartMap::Affine { matrix: vec![vec![1.0]], offset: vec![0.0] },
            0.9,
        );
        assert!(err.is_err());
    }

    #[test]
    fn json_roundtrip_preserves_geometry() {
        let g = make_builtin(BuiltinKind::Sphere2, &BuiltinParams::new()).unwrap();
        let back = Geometry::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn sphere_retraction_moves_points_across_faces() {
        let g = make_builtin(BuiltinKind::Sphere2, &BuiltinParams::new()).unwrap();
        let mut u = [std::f64::consts::FRAC_PI_4 + 0.2, 0.1];
        let before = g.point(0, &u);
        let owner = g.retract(0, &mut u);
        assert_ne!(owner, 0);
        let after = g.point(owner, &u);
        assert!(dist2(&before, &after).sqrt() < 1e-12);
        assert!(g.charts[owner].domain.contains(&u));
    }

    #[test]
    fn circle_retraction_wraps() {
        let g = make_builtin(BuiltinKind::Circle, &BuiltinParams::new()).unwrap();
        let mut u = [-0.5];
        g.retract(0, &mut u);
        assert!((u[0] - (2.0 * std::f64::consts::PI - 0.5)).abs() < 1e-12);
    }
}
