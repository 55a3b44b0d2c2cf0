use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Domain, Geometry};
use crate::energy::hausdorff_factor;
use crate::error::{Error, Result};
use crate::numeric::{csum, dist2};

/// Smallest admissible distance between two nodes (kernel overflow guard).
pub const MIN_NODE_DISTANCE: f64 = 1e-14;

/// Quadrature nodes on a set, with weights in units of `H^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedPointCloud {
    dim: usize,
    intrinsic_dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    chart_ids: Vec<usize>,
    chart_labels: Vec<String>,
    total_mass: f64,
}

impl WeightedPointCloud {
    /// Build a cloud from flat point storage (`dim` coordinates per node).
    ///
    /// Rejects non-positive weights and coincident nodes.
    pub fn new(
        dim: usize,
        intrinsic_dim: usize,
        points: Vec<f64>,
        weights: Vec<f64>,
        chart_ids: Vec<usize>,
        chart_labels: Vec<String>,
    ) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: points.len() });
        }
        let n = points.len() / dim;
        if weights.len() != n || chart_ids.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: weights.len().min(chart_ids.len()) });
        }
        if n == 0 {
            return Err(Error::TooFewPoints { needed: 1, got: 0 });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidMeasure(format!("cloud weights must be positive, found {w}")));
        }
        if let Some(&c) = chart_ids.iter().find(|&&c| c >= chart_labels.len()) {
            return Err(Error::InvalidParameter(format!("chart id {c} has no label")));
        }
        let cloud = Self {
            dim,
            intrinsic_dim,
            total_mass: csum(weights.iter().copied()),
            points,
            weights,
            chart_ids,
            chart_labels,
        };
        if let Some((i, j, distance)) = closest_pair(&cloud) {
            if distance <= MIN_NODE_DISTANCE {
                return Err(Error::SingularConfiguration { i, j, distance });
            }
        }
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Ambient dimension `p`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `H^d` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn chart_ids(&self) -> &[usize] {
        &self.chart_ids
    }

    pub fn chart_label(&self, i: usize) -> &str {
        &self.chart_labels[self.chart_ids[i]]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Ordinary (unnormalized) surface measure of node `i`'s cell.
    pub fn cell_measure(&self, i: usize) -> f64 {
        self.weights[i] / hausdorff_factor(self.intrinsic_dim)
    }

    /// Weights of the normalized Hausdorff measure `H^d_A / H^d(A)`.
    pub fn normalized_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|h| h / self.total_mass).collect()
    }

    /// Index of the node nearest to `x` (lowest index on ties).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        (0..self.len())
            .map(|i| (i, dist2(self.point(i), x)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
            .0
    }

    /// Relabel nodes: node `perm[k]` of `self` becomes node `k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() || perm.iter().any(|&i| i >= self.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidParameter("not a permutation of the node indices".into()));
        }
        let mut points = Vec::with_capacity(self.points.len());
        for &i in perm {
            points.extend_from_slice(self.point(i));
        }
        Self::new(
            self.dim,
            self.intrinsic_dim,
            points,
            perm.iter().map(|&i| self.weights[i]).collect(),
            perm.iter().map(|&i| self.chart_ids[i]).collect(),
            self.chart_labels.clone(),
        )
    }

    /// Apply `f` to every node; weights are multiplied by `weight_scale`.
    pub fn mapped<F: Fn(&[f64]) -> Vec<f64>>(&self, f: F, weight_scale: f64) -> Result<Self> {
        let mut points = Vec::with_capacity(self.points.len());
        let mut dim = self.dim;
        for i in 0..self.len() {
            let y = f(self.point(i));
            dim = y.len();
            points.extend(y);
        }
        Self::new(
            dim,
            self.intrinsic_dim,
            points,
            self.weights.iter().map(|w| w * weight_scale).collect(),
            self.chart_ids.clone(),
            self.chart_labels.clone(),
        )
    }

    /// Write `x_1..x_p,weight,chart_id` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        header.push("weight".into());
        header.push("chart_id".into());
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            for x in self.point(i) {
                write!(out, "{x},")?;
            }
            writeln!(out, "{},{}", self.weights[i], self.chart_label(i))?;
        }
        Ok(())
    }
}

/// Options for [`sample_cloud_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Approximate total node count (exact for single-chart curves).
    pub resolution: usize,
    pub seed: u64,
    /// Relative size of the random displacement of each node inside its
    /// parameter cell, in `[0, 1)`. Zero gives the plain midpoint rule.
    #[serde(default)]
    pub jitter: f64,
}

/// Midpoint-rule cloud with Jacobian weights and no jitter.
pub fn sample_cloud(geom: &Geometry, resolution: usize, seed: u64) -> Result<WeightedPointCloud> {
    sample_cloud_with(geom, &SamplingOptions { resolution, seed, jitter: 0.0 })
}

pub fn sample_cloud_with(geom: &Geometry, opts: &SamplingOptions) -> Result<WeightedPointCloud> {
    if opts.resolution < 2 {
        return Err(Error::InvalidParameter(format!("resolution must be >= 2, got {}", opts.resolution)));
    }
    if !(0.0..1.0).contains(&opts.jitter) {
        return Err(Error::InvalidParameter(format!("jitter must lie in [0, 1), got {}", opts.jitter)));
    }
    let d = geom.intrinsic_dim;
    let factor = hausdorff_factor(d);
    let probe = if d == 1 { 256 } else { 32 };

    // Physical extent of each chart, used to split nodes between charts and axes.
    let extents: Vec<(f64, Vec<f64>)> = geom
        .charts
        .iter()
        .map(|chart| {
            let params = midpoint_params(&chart.domain, probe);
            let cell = param_cell_volume(&chart.domain, probe);
            let (lo, hi) = chart.domain.bounds();
            let (p, dd) = (chart.ambient_dim(), chart.param_dim());
            let mut jac = vec![0.0; p * dd];
            let mut mass = 0.0;
            let mut col_norm = vec![0.0; dd];
            for u in &params {
                chart.map.jacobian(u, &mut jac);
                mass += super::gram_sqrt_det(&jac, p, dd) * cell;
                for (k, c) in col_norm.iter_mut().enumerate() {
                    *c += (0..p).map(|r| jac[r * dd + k].powi(2)).sum::<f64>().sqrt();
                }
            }
            let lengths = (0..dd)
                .map(|k| (hi[k] - lo[k]) * col_norm[k] / params.len() as f64)
                .collect();
            (mass, lengths)
        })
        .collect();
    let total: f64 = extents.iter().map(|e| e.0).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut chart_ids = Vec::new();
    for (ci, (chart, (mass, lengths))) in geom.charts.iter().zip(&extents).enumerate() {
        let target = opts.resolution as f64 * mass / total;
        let counts: Vec<usize> = if d == 1 {
            vec![target.round().max(1.0) as usize]
        } else {
            let geo_mean = lengths.iter().product::<f64>().powf(1.0 / d as f64);
            lengths
                .iter()
                .map(|l| (target.powf(1.0 / d as f64) * l / geo_mean).ceil().max(1.0) as usize)
                .collect()
        };
        let counts = match chart.domain {
            Domain::Disk { .. } => {
                let m = (target * 4.0 / std::f64::consts::PI).sqrt().ceil().max(1.0) as usize;
                vec![m; d]
            }
            Domain::Box { .. } => counts,
        };
        let (lo, hi) = chart.domain.bounds();
        let steps: Vec<f64> = (0..d).map(|k| (hi[k] - lo[k]) / counts[k] as f64).collect();
        let cell_volume: f64 = steps.iter().product();
        let mut x = vec![0.0; geom.ambient_dim];
        for idx in grid_indices(&counts) {
            let mut u: Vec<f64> = (0..d).map(|k| lo[k] + (idx[k] as f64 + 0.5) * steps[k]).collect();
            if !chart.domain.contains(&u) {
                continue;
            }
            if opts.jitter > 0.0 {
                for k in 0..d {
                    u[k] += opts.jitter * steps[k] * (rng.gen::<f64>() - 0.5);
                }
            }
            chart.map.eval(&u, &mut x);
            points.extend_from_slice(&x);
            weights.push(factor * chart.area_element(&u) * cell_volume);
            chart_ids.push(ci);
        }
    }
    let labels = geom.charts.iter().map(|c| c.id.clone()).collect();
    WeightedPointCloud::new(geom.ambient_dim, d, points, weights, chart_ids, labels)
}

fn grid_indices(counts: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = counts.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; counts.len()];
        for k in (0..counts.len()).rev() {
            idx[k] = flat % counts[k];
            flat /= counts[k];
        }
        idx
    })
}

/// Cell midpoints of a `per_axis^d` grid over the domain (disk: cells inside).
pub(crate) fn midpoint_params(domain: &Domain, per_axis: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = domain.bounds();
    let d = lo.len();
    let counts = vec![per_axis; d];
    grid_indices(&counts)
        .map(|idx| (0..d).map(|k| lo[k] + (idx[k] as f64 + 0.5) * (hi[k] - lo[k]) / per_axis as f64).collect::<Vec<_>>())
        .filter(|u| domain.contains(u))
        .collect()
}

pub(crate) fn param_cell_volume(domain: &Domain, per_axis: usize) -> f64 {
    let (lo, hi) = domain.bounds();
    lo.iter().zip(&hi).map(|(a, b)| (b - a) / per_axis as f64).product()
}

/// Total of `weights` over nodes in the closed ball `B(x, r)`.
pub fn measure_of_ball(cloud: &WeightedPointCloud, weights: &[f64], x: &[f64], r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {r}")));
    }
    if weights.len() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), got: weights.len() });
    }
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: x.len() });
    }
    let r2 = r * r;
    Ok(csum((0..cloud.len()).filter(|&i| dist2(cloud.point(i), x) <= r2).map(|i| weights[i])))
}

fn closest_pair(cloud: &WeightedPointCloud) -> Option<(usize, usize, f64)> {
    let n = cloud.len();
    (0..n)
        .into_par_iter()
        .filter_map(|i| {
            (i + 1..n)
                .map(|j| (i, j, dist2(cloud.point(i), cloud.point(j))))
                .min_by(|a, b| a.2.total_cmp(&b.2))
        })
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)))
        .map(|(i, j, d2)| (i, j, d2.sqrt()))
}

/// Exact minimum pairwise distance.
pub fn min_separation(cloud: &WeightedPointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: cloud.len() });
    }
    Ok(closest_pair(cloud).map(|c| c.2).unwrap_or(0.0))
}

/// Exact maximum pairwise distance.
pub fn diameter(cloud: &WeightedPointCloud) -> Result<f64> {
    let n = cloud.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let d2 = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| dist2(cloud.point(i), cloud.point(j))).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    Ok(d2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin, BuiltinKind, BuiltinParams};
    use std::f64::consts::PI;

    fn builtin(kind: BuiltinKind) -> Geometry {
        make_builtin(kind, &BuiltinParams::new()).unwrap()
    }

    #[test]
    fn interval_midpoints() {
        let n = 100;
        let cloud = sample_cloud(&builtin(BuiltinKind::Interval), n, 0).unwrap();
        assert_eq!(cloud.len(), n);
        assert!(cloud.weights().iter().all(|w| (w - 2.0 / n as f64).abs() < 1e-15));
        assert!((cloud.total_mass() - 2.0).abs() < 1e-12);
        assert!((diameter(&cloud).unwrap() - (2.0 - 2.0 / n as f64)).abs() < 1e-12);
    }

    #[test]
    fn circle_mass_and_separation() {
        let n = 64;
        let cloud = sample_cloud(&builtin(BuiltinKind::Circle), n, 0).unwrap();
        assert!((cloud.total_mass() - 2.0 * PI).abs() < 1e-10);
        let sep = min_separation(&cloud).unwrap();
        assert!((sep - 2.0 * (PI / n as f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn sphere_mass_approaches_sixteen() {
        // 4 pi area times the 4/pi normalization factor.
        let g = builtin(BuiltinKind::Sphere2);
        let errs: Vec<f64> = [600, 2400, 9600]
            .iter()
            .map(|&n| (sample_cloud(&g, n, 0).unwrap().total_mass() - 16.0).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 5e-3, "{errs:?}");
    }

    #[test]
    fn square_resolution_rounds_up_per_axis() {
        let cloud = sample_cloud(&builtin(BuiltinKind::Square), 6000, 0).unwrap();
        assert_eq!(cloud.len(), 78 * 78);
        assert!((cloud.total_mass() - 4.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_and_jitter_is_seeded() {
        let g = builtin(BuiltinKind::Torus);
        let a = sample_cloud(&g, 500, 3).unwrap();
        let b = sample_cloud(&g, 500, 3).unwrap();
        assert_eq!(a, b);
        let opts = |seed| SamplingOptions { resolution: 500, seed, jitter: 0.5 };
        let j1 = sample_cloud_with(&g, &opts(1)).unwrap();
        let j1b = sample_cloud_with(&g, &opts(1)).unwrap();
        let j2 = sample_cloud_with(&g, &opts(2)).unwrap();
        assert_eq!(j1, j1b);
        assert_ne!(j1.points(), j2.points());
        assert!(sample_cloud(&g, 1, 0).is_err());
    }

    #[test]
    fn ball_measure_cases() {
        let cloud = sample_cloud(&builtin(BuiltinKind::Interval), 1000, 0).unwrap();
        let h = cloud.weights().to_vec();
        let half = measure_of_ball(&cloud, &h, &[0.0], 0.5).unwrap();
        assert!((half - 1.0).abs() <= 2.0 / 1000.0);
        assert_eq!(measure_of_ball(&cloud, &h, &[0.0], 1e-4).unwrap(), 0.0);
        let all = measure_of_ball(&cloud, &h, &[0.3], 5.0).unwrap();
        assert!((all - cloud.total_mass()).abs() < 1e-12);
        assert!(measure_of_ball(&cloud, &h, &[0.0], 0.0).is_err());
    }

    #[test]
    fn two_point_cloud_extremes() {
        let cloud =
            WeightedPointCloud::new(2, 1, vec![0.0, 0.0, 1.0, 0.0], vec![1.0, 1.0], vec![0, 0], vec!["c".into()]).unwrap();
        assert_eq!(min_separation(&cloud).unwrap(), 1.0);
        assert_eq!(diameter(&cloud).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_nodes_and_singletons_are_rejected() {
        let dup = WeightedPointCloud::new(1, 1, vec![0.5, 0.5], vec![1.0, 1.0], vec![0, 0], vec!["c".into()]);
        assert!(matches!(dup, Err(Error::SingularConfiguration { .. })));
        let single = WeightedPointCloud::new(1, 1, vec![0.5], vec![1.0], vec![0], vec!["c".into()]).unwrap();
        assert!(min_separation(&single).is_err());
        assert!(diameter(&single).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cloud = sample_cloud(&builtin(BuiltinKind::Circle), 4, 0).unwrap();
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x_1,x_2,weight,chart_id");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].ends_with(",circle"));
    }
}
