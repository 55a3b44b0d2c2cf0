use serde::{Deserialize, Serialize};

use crate::energy::{measure_energy, DiagonalPolicy, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::numeric::{csum, dist2};

/// `2^d d sum_i w_i^2 / h_i`, the normalized `d`-energy of a measure with
/// density `w_i / h_i` against the cloud's Hausdorff weights.
pub fn normalized_d_energy(mu: &DiscreteMeasure) -> f64 {
    let d = mu.intrinsic_dim();
    let h = mu.cloud().weights();
    let factor = 2f64.powi(d as i32) * d as f64;
    factor * csum(mu.weights().iter().zip(h).map(|(w, h)| w * w / h))
}

/// `U_d(mu)` at each node in its Radon–Nikodym form `2^d d w_i / h_i`.
pub fn normalized_d_potential(mu: &DiscreteMeasure) -> Vec<f64> {
    let d = mu.intrinsic_dim();
    let factor = 2f64.powi(d as i32) * d as f64;
    mu.density().into_iter().map(|rho| factor * rho).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extrapolation {
    pub s: Vec<f64>,
    /// `(d - s) I_s` at each grid point.
    pub values: Vec<f64>,
    /// Intercept at `d - s = 0` of the least-squares line through the last
    /// three points.
    pub limit: f64,
    pub slope: f64,
    /// The values are not monotone in `s` beyond rounding noise.
    pub non_monotone: bool,
}

/// Linear-in-`(d - s)` extrapolation of `(d - s) I_s` from the last three
/// grid points. Needs a strictly increasing grid inside `(0, d)`.
pub fn extrapolate_normalized(s: &[f64], values: &[f64], d: usize) -> Result<Extrapolation> {
    if s.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), got: values.len() });
    }
    if s.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: s.len() });
    }
    check_grid(s, d)?;
    let k = s.len();
    let xs: Vec<f64> = s[k - 3..].iter().map(|si| d as f64 - si).collect();
    let ys = &values[k - 3..];
    let (slope, limit) = if ys.iter().any(|y| !y.is_finite()) {
        (f64::NAN, f64::INFINITY)
    } else {
        let mx = xs.iter().sum::<f64>() / 3.0;
        let my = ys.iter().sum::<f64>() / 3.0;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let b = sxy / sxx;
        (b, my - b * mx)
    };
    Ok(Extrapolation { s: s.to_vec(), values: values.to_vec(), limit, slope, non_monotone: !is_monotone(values) })
}

fn is_monotone(v: &[f64]) -> bool {
    if v.iter().any(|x| !x.is_finite()) {
        return true;
    }
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let noise = 1e-9 * scale;
    let up = v.windows(2).all(|w| w[1] >= w[0] - noise);
    let down = v.windows(2).all(|w| w[1] <= w[0] + noise);
    up || down
}

pub(crate) fn check_grid(s: &[f64], d: usize) -> Result<()> {
    if s.iter().any(|x| !(*x > 0.0 && *x < d as f64)) {
        return Err(Error::InvalidParameter(format!("s grid must lie inside (0, {d})")));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("s grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `(d - s) I_s(mu)` along `s_grid` for a fixed measure, with extrapolation to `s = d`.
pub fn normalized_d_energy_limit(mu: &DiscreteMeasure, s_grid: &[f64], policy: DiagonalPolicy) -> Result<Extrapolation> {
    let d = mu.intrinsic_dim();
    check_grid(s_grid, d)?;
    let values = s_grid
        .iter()
        .map(|&s| measure_energy(mu, s, policy).map(|r| r.normalized))
        .collect::<Result<Vec<_>>>()?;
    extrapolate_normalized(s_grid, &values, d)
}

/// Distances from a point to the nodes of a measure, sorted, with
/// cumulative masses: `mu(B(x, r))` by binary search.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    radii: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RadialProfile {
    pub fn new(mu: &DiscreteMeasure, x: &[f64]) -> Result<Self> {
        let cloud = mu.cloud();
        if x.len() != cloud.dim() {
            return Err(Error::DimensionMismatch { expected: cloud.dim(), got: x.len() });
        }
        let mut pairs: Vec<(f64, f64)> = (0..cloud.len())
            .filter(|&i| mu.weights()[i] > 0.0)
            .map(|i| (dist2(cloud.point(i), x).sqrt(), mu.weights()[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = crate::numeric::CompensatedSum::new();
        let mut radii = Vec::with_capacity(pairs.len());
        let mut cumulative = Vec::with_capacity(pairs.len());
        for (r, w) in pairs {
            acc.add(w);
            radii.push(r);
            cumulative.push(acc.value());
        }
        Ok(Self { radii, cumulative })
    }

    /// Mass of the closed ball `B(x, r)`.
    pub fn mass(&self, r: f64) -> f64 {
        let k = self.radii.partition_point(|&ri| ri <= r);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn nearest(&self) -> Option<f64> {
        self.radii.first().copied()
    }

    pub fn farthest(&self) -> Option<f64> {
        self.radii.last().copied()
    }
}

/// Number of log-spaced cells used by the radial quadratures.
pub const RADIAL_NODES: usize = 4000;

/// `(1/|ln eps|) int_eps^1 mu(B(x,r)) r^{-d} dr/r` by the midpoint rule in
/// `ln r` on `RADIAL_NODES` cells.
pub fn order_two_density(mu: &DiscreteMeasure, x: &[f64], eps: f64, d: usize) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let prof = RadialProfile::new(mu, x)?;
    let a = eps.ln();
    let m = RADIAL_NODES;
    let h = -a / m as f64;
    let sum = csum((0..m).map(|k| {
        let t = a + (k as f64 + 0.5) * h;
        prof.mass(t.exp()) * (-(d as f64) * t).exp()
    }));
    Ok(sum * h / -a)
}

/// `(d - s) s int_0^inf mu(B(x,r)) r^{-s-1} dr`, the layer-cake form of
/// `(d - s) U_s^mu(x)`.
///
/// The ball mass is frozen at each cell midpoint (log-spaced between the
/// nearest and farthest node) and `s r^{-s-1}` is integrated exactly.
pub fn layer_cake_potential(mu: &DiscreteMeasure, x: &[f64], s: f64) -> Result<f64> {
    crate::error::check_exponent(s)?;
    let d = mu.intrinsic_dim() as f64;
    let prof = RadialProfile::new(mu, x)?;
    let (r0, r1) = match (prof.nearest(), prof.farthest()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::EmptySupport),
    };
    if r0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    let total = prof.mass(r1);
    if r1 <= r0 {
        return Ok((d - s) * total * r0.powf(-s));
    }
    let (a, b) = (r0.ln(), r1.ln());
    let m = RADIAL_NODES;
    let h = (b - a) / m as f64;
    let mut acc = crate::numeric::CompensatedSum::new();
    for k in 0..m {
        let (t0, t1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
        let mass = prof.mass((0.5 * (t0 + t1)).exp());
        acc.add(mass * ((-s * t0).exp() - (-s * t1).exp()));
    }
    // beyond the farthest node the ball holds everything
    acc.add(total * r1.powf(-s));
    Ok((d - s) * acc.value())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionClass {
    ContinuousOk,
    ContinuousDivergent,
}

/// `s < d`: finite continuous energies exist; otherwise every nontrivial
/// measure has infinite `s`-energy.
pub fn dimension_gate(s: f64, d: usize) -> DimensionClass {
    if s < d as f64 {
        DimensionClass::ContinuousOk
    } else {
        DimensionClass::ContinuousDivergent
    }
}
