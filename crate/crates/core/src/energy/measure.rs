use std::sync::Arc;

use serde::{Deserialize, Serialize, Serializer};

use super::kernel::{kernel_from_dist2, upper_pair_sum, Schedule};
use super::uniform_cube_energy;
use crate::error::{check_exponent, Error, Result};
use crate::geometry::WeightedPointCloud;
use crate::numeric::{csum, dist2};

/// How the `i = j` terms of a discretized energy are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    /// Drop the self-interaction of every node.
    ExcludeDiagonal,
    /// Spread each node's mass uniformly over a `d`-cube with the measure of
    /// its cell: the self term is `w_i^2 T(d,s) a_i^{-s/d}`, with `T(d,s)`
    /// the energy of the uniform measure on the unit cube and `a_i` the
    /// ordinary surface measure of the cell.
    #[default]
    CellCorrected,
    /// Treat nodes as atoms: any node with positive mass has infinite self-energy.
    Atomic,
}

impl DiagonalPolicy {
    pub fn name(self) -> &'static str {
        match self {
            DiagonalPolicy::ExcludeDiagonal => "exclude_diagonal",
            DiagonalPolicy::CellCorrected => "cell_corrected",
            DiagonalPolicy::Atomic => "atomic",
        }
    }
}

/// Probability weights over the nodes of a cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    cloud: Arc<WeightedPointCloud>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(cloud: Arc<WeightedPointCloud>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::DimensionMismatch { expected: cloud.len(), got: weights.len() });
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("weights must be nonnegative, found {w}")));
        }
        let total = csum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { cloud, weights })
    }

    /// Rescale nonnegative masses to a probability vector.
    pub fn normalized(cloud: Arc<WeightedPointCloud>, mut masses: Vec<f64>) -> Result<Self> {
        let total = csum(masses.iter().copied());
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidMeasure(format!("masses must have positive finite total, got {total}")));
        }
        for m in &mut masses {
            *m /= total;
        }
        // one more pass absorbs rounding in the first division
        let t2 = csum(masses.iter().copied());
        for m in &mut masses {
            *m /= t2;
        }
        Self::new(cloud, masses)
    }

    /// Normalized Hausdorff measure `lambda^d` on the cloud.
    pub fn hausdorff(cloud: Arc<WeightedPointCloud>) -> Self {
        let w = cloud.weights().to_vec();
        Self::normalized(cloud, w).expect("cloud weights are positive")
    }

    /// Unit mass at node `i`.
    pub fn point_mass(cloud: Arc<WeightedPointCloud>, i: usize) -> Result<Self> {
        if i >= cloud.len() {
            return Err(Error::InvalidParameter(format!("node {i} out of range")));
        }
        let mut w = vec![0.0; cloud.len()];
        w[i] = 1.0;
        Self::new(cloud, w)
    }

    pub fn cloud(&self) -> &Arc<WeightedPointCloud> {
        &self.cloud
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.cloud.intrinsic_dim()
    }

    /// `mu(B(x, r))`.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> Result<f64> {
        crate::geometry::measure_of_ball(&self.cloud, &self.weights, x, r)
    }

    /// Radon–Nikodym estimate `w_i / h_i` against the cloud's `H^d` weights.
    pub fn density(&self) -> Vec<f64> {
        self.weights.iter().zip(self.cloud.weights()).map(|(w, h)| w / h).collect()
    }

    /// Same weights on a relabelled cloud: node `perm[k]` of `self` becomes node `k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let cloud = Arc::new(self.cloud.permuted(perm)?);
        Self::new(cloud, perm.iter().map(|&i| self.weights[i]).collect())
    }
}

/// Result of a measure-energy evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub s: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub value: f64,
    /// `(d - s) * value`; `+inf` whenever `value` is infinite.
    #[serde(serialize_with = "serialize_extended")]
    pub normalized: f64,
    pub diagonal_policy: DiagonalPolicy,
    pub node_count: usize,
    pub intrinsic_dim: usize,
    /// Set when `s >= d`: the continuous energy of every nontrivial measure is infinite.
    pub divergent_expected: bool,
}

/// Serialize non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn serialize_extended<S: Serializer>(v: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        ser.serialize_f64(*v)
    } else if v.is_nan() {
        ser.serialize_str("nan")
    } else if *v > 0.0 {
        ser.serialize_str("inf")
    } else {
        ser.serialize_str("-inf")
    }
}

/// Per-node diagonal coefficients `K_ii` for the chosen policy.
pub fn diagonal_entries(cloud: &WeightedPointCloud, s: f64, policy: DiagonalPolicy) -> Result<Vec<f64>> {
    check_exponent(s)?;
    let n = cloud.len();
    Ok(match policy {
        DiagonalPolicy::ExcludeDiagonal => vec![0.0; n],
        DiagonalPolicy::Atomic => vec![f64::INFINITY; n],
        DiagonalPolicy::CellCorrected => {
            let d = cloud.intrinsic_dim();
            if s >= d as f64 {
                vec![f64::INFINITY; n]
            } else {
                let t = uniform_cube_energy(d, s)?;
                let e = -s / d as f64;
                (0..n).map(|i| t * cloud.cell_measure(i).powf(e)).collect()
            }
        }
    })
}

/// Discretized `I_s(mu)` under a diagonal policy.
pub fn measure_energy(mu: &DiscreteMeasure, s: f64, policy: DiagonalPolicy) -> Result<EnergyReport> {
    measure_energy_with(mu, s, policy, Schedule::default())
}

pub fn measure_energy_with(
    mu: &DiscreteMeasure,
    s: f64,
    policy: DiagonalPolicy,
    schedule: Schedule,
) -> Result<EnergyReport> {
    check_exponent(s)?;
    let cloud = mu.cloud();
    let d = cloud.intrinsic_dim();
    let divergent_expected = s >= d as f64;
    if divergent_expected {
        log::warn!("s = {s} >= d = {d}: the continuous energy diverges and discrete values grow with resolution");
    }
    let w = mu.weights();
    let off = 2.0
        * upper_pair_sum(cloud.len(), schedule, |i, j| {
            let (wi, wj) = (w[i], w[j]);
            if wi == 0.0 || wj == 0.0 {
                0.0
            } else {
                wi * wj * kernel_from_dist2(dist2(cloud.point(i), cloud.point(j)), s)
            }
        });
    let diag = diagonal_entries(cloud, s, policy)?;
    let self_part = csum(w.iter().zip(&diag).filter(|(wi, _)| **wi > 0.0).map(|(wi, k)| wi * wi * k));
    let value = off + self_part;
    let normalized = if value.is_finite() { (d as f64 - s) * value } else { f64::INFINITY };
    Ok(EnergyReport {
        s,
        value,
        normalized,
        diagonal_policy: policy,
        node_count: cloud.len(),
        intrinsic_dim: d,
        divergent_expected,
    })
}

/// `U_s^mu(x) = sum_i w_i |x - x_i|^{-s}`; `+inf` when `x` is a node of positive mass.
pub fn potential(mu: &DiscreteMeasure, x: &[f64], s: f64) -> Result<f64> {
    check_exponent(s)?;
    let cloud = mu.cloud();
    if x.len() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: x.len() });
    }
    let mut acc = crate::numeric::CompensatedSum::new();
    for (i, &w) in mu.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let d2 = dist2(cloud.point(i), x);
        if d2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc.add(w * kernel_from_dist2(d2, s));
    }
    Ok(acc.value())
}

/// `(d - s) U_s^mu(x)`, the finite-`s` stand-in for the normalized `d`-potential.
pub fn normalized_potential(mu: &DiscreteMeasure, x: &[f64], s: f64) -> Result<f64> {
    let u = potential(mu, x, s)?;
    let factor = mu.intrinsic_dim() as f64 - s;
    Ok(if u.is_infinite() { f64::INFINITY } else { factor * u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin, sample_cloud, BuiltinKind, BuiltinParams};

    fn cloud(kind: BuiltinKind, n: usize) -> Arc<WeightedPointCloud> {
        Arc::new(sample_cloud(&make_builtin(kind, &BuiltinParams::new()).unwrap(), n, 0).unwrap())
    }

    fn two_nodes(dist: f64) -> Arc<WeightedPointCloud> {
        Arc::new(
            WeightedPointCloud::new(1, 1, vec![0.0, dist], vec![1.0, 1.0], vec![0, 0], vec!["c".into()]).unwrap(),
        )
    }

    #[test]
    fn measure_validation() {
        let c = two_nodes(1.0);
        assert!(DiscreteMeasure::new(c.clone(), vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(c.clone(), vec![-0.5, 1.5]).is_err());
        assert!(DiscreteMeasure::new(c.clone(), vec![1.0]).is_err());
        DiscreteMeasure::new(c, vec![0.25, 0.75]).unwrap();
    }

    #[test]
    fn two_node_energy_excluding_diagonal() {
        let mu = DiscreteMeasure::new(two_nodes(1.0), vec![0.5, 0.5]).unwrap();
        let r = measure_energy(&mu, 1.0, DiagonalPolicy::ExcludeDiagonal).unwrap();
        assert!((r.value - 0.5).abs() < 1e-15);
        assert!((r.normalized - 0.0).abs() < 1e-15);
    }

    #[test]
    fn atomic_policy_gives_infinite_energy() {
        let mu = DiscreteMeasure::point_mass(two_nodes(1.0), 0).unwrap();
        let r = measure_energy(&mu, 0.5, DiagonalPolicy::Atomic).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert_eq!(r.normalized, f64::INFINITY);
    }

    #[test]
    fn s_at_or_above_d_is_flagged() {
        let mu = DiscreteMeasure::hausdorff(cloud(BuiltinKind::Interval, 50));
        let r = measure_energy(&mu, 1.5, DiagonalPolicy::ExcludeDiagonal).unwrap();
        assert!(r.divergent_expected && r.value.is_finite());
        let r = measure_energy(&mu, 1.0, DiagonalPolicy::CellCorrected).unwrap();
        assert_eq!(r.value, f64::INFINITY);
        assert!(measure_energy(&mu, 0.0, DiagonalPolicy::CellCorrected).is_err());
    }

    #[test]
    fn potential_examples() {
        let c = Arc::new(
            WeightedPointCloud::new(2, 1, vec![0.0, 0.0, 5.0, 5.0], vec![1.0, 1.0], vec![0, 0], vec!["c".into()])
                .unwrap(),
        );
        let delta = DiscreteMeasure::point_mass(c, 0).unwrap();
        assert!((potential(&delta, &[2.0, 0.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(potential(&delta, &[0.0, 0.0], 1.0).unwrap(), f64::INFINITY);
        assert_eq!(normalized_potential(&delta, &[0.0, 0.0], 0.5).unwrap(), f64::INFINITY);
        // zero-mass node is not a singularity
        assert!(potential(&delta, &[5.0, 5.0], 1.0).unwrap().is_finite());

        let circle = DiscreteMeasure::hausdorff(cloud(BuiltinKind::Circle, 64));
        assert!((potential(&circle, &[0.0, 0.0], 1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_potential_vanishes_off_support_as_s_to_d() {
        let mu = DiscreteMeasure::hausdorff(cloud(BuiltinKind::Interval, 100));
        let far = normalized_potential(&mu, &[3.0], 0.999999).unwrap();
        assert!(far.abs() < 1e-5);
    }

    #[test]
    fn json_report_encodes_infinity() {
        let mu = DiscreteMeasure::point_mass(two_nodes(1.0), 1).unwrap();
        let r = measure_energy(&mu, 0.5, DiagonalPolicy::Atomic).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"value\":\"inf\""), "{text}");
    }
}
