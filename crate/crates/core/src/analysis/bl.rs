use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::geometry::{diameter, WeightedPointCloud};
use crate::numeric::{csum, dist2};

/// Slightly above `max_t 4t(1 - t^2) = 8/(3 sqrt 3)`, the steepest slope of `(1 - t^2)^2`.
const BUMP_SLOPE: f64 = 1.54;

/// Default number of bump centers per scale.
pub const DEFAULT_DICTIONARY_SIZE: usize = 64;

#[derive(Clone, Debug, PartialEq)]
enum TestFunction {
    /// `a (1 - |x - c|^2 / r^2)^2` inside the ball, zero outside.
    Bump { center: Vec<f64>, radius: f64, amplitude: f64 },
    /// `clamp(scale (x_k - mid_k), -1, 1)`.
    Coordinate { axis: usize, mid: f64, scale: f64 },
}

impl TestFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Bump { center, radius, amplitude } => {
                let t2 = dist2(x, center) / (radius * radius);
                if t2 >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - t2) * (1.0 - t2)
                }
            }
            TestFunction::Coordinate { axis, mid, scale } => (scale * (x[*axis] - mid)).clamp(-1.0, 1.0),
        }
    }
}

/// A fixed family of functions with `|f| <= 1` and `Lip(f) <= 1`.
///
/// `sup_f |int f dmu - int f dnu|` over the family is a pseudometric and a
/// lower bound on the bounded-Lipschitz distance.
#[derive(Clone, Debug)]
pub struct BlDictionary {
    dim: usize,
    functions: Vec<TestFunction>,
}

impl BlDictionary {
    /// Bumps at `size` seeded cloud nodes for each of the radii `D/8`,
    /// `D/4`, `D/2` (`D` the cloud diameter), plus one clamped coordinate
    /// function per axis with slope `min(1, 2/D)`.
    pub fn new(cloud: &WeightedPointCloud, size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("dictionary size must be positive".into()));
        }
        let diam = diameter(cloud)?;
        let p = cloud.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut functions = Vec::new();
        for radius in [diam / 8.0, diam / 4.0, diam / 2.0] {
            let amplitude = (radius / BUMP_SLOPE).min(1.0);
            let picks = sample(&mut rng, cloud.len(), size.min(cloud.len())).into_vec();
            for i in picks {
                functions.push(TestFunction::Bump { center: cloud.point(i).to_vec(), radius, amplitude });
            }
        }
        let scale = (2.0 / diam).min(1.0);
        for axis in 0..p {
            let coords = (0..cloud.len()).map(|i| cloud.point(i)[axis]);
            let (lo, hi) = coords.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            functions.push(TestFunction::Coordinate { axis, mid: 0.5 * (lo + hi), scale });
        }
        Ok(Self { dim: p, functions })
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    fn integrals(&self, mu: &DiscreteMeasure) -> Result<Vec<f64>> {
        let cloud = mu.cloud();
        if cloud.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: cloud.dim() });
        }
        let w = mu.weights();
        Ok(self
            .functions
            .par_iter()
            .map(|f| csum((0..cloud.len()).filter(|&i| w[i] != 0.0).map(|i| w[i] * f.eval(cloud.point(i)))))
            .collect())
    }

    pub fn distance(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
        let a = self.integrals(mu)?;
        let b = self.integrals(nu)?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }
}

/// Dictionary distance between two measures in the same ambient space.
///
/// The dictionary is drawn from whichever of the two clouds comes first in
/// a fixed order, so the result is symmetric in its arguments.
pub fn bl_distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, dictionary_size: usize, seed: u64) -> Result<f64> {
    if mu.cloud().dim() != nu.cloud().dim() {
        return Err(Error::DimensionMismatch { expected: mu.cloud().dim(), got: nu.cloud().dim() });
    }
    let base = canonical_cloud(mu.cloud(), nu.cloud());
    BlDictionary::new(base, dictionary_size, seed)?.distance(mu, nu)
}

fn canonical_cloud<'a>(a: &'a Arc<WeightedPointCloud>, b: &'a Arc<WeightedPointCloud>) -> &'a WeightedPointCloud {
    if Arc::ptr_eq(a, b) || a == b {
        return a;
    }
    let key = |c: &WeightedPointCloud| (c.len(), c.points().to_vec());
    let (ka, kb) = (key(a), key(b));
    let a_first = match ka.0.cmp(&kb.0) {
        std::cmp::Ordering::Equal => ka.1.iter().zip(&kb.1).find(|(x, y)| x != y).is_none_or(|(x, y)| x < y),
        other => other.is_lt(),
    };
    if a_first {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin, sample_cloud, BuiltinKind, BuiltinParams};

    fn interval(n: usize) -> Arc<WeightedPointCloud> {
        Arc::new(sample_cloud(&make_builtin(BuiltinKind::Interval, &BuiltinParams::new()).unwrap(), n, 0).unwrap())
    }

    #[test]
    fn dictionary_functions_are_bounded_lipschitz() {
        let c = interval(200);
        let dict = BlDictionary::new(&c, 16, 3).unwrap();
        let xs: Vec<f64> = (0..=400).map(|k| -1.0 + k as f64 / 200.0).collect();
        for f in &dict.functions {
            for w in xs.windows(2) {
                let (a, b) = (f.eval(&[w[0]]), f.eval(&[w[1]]));
                assert!(a.abs() <= 1.0 && (a - b).abs() <= (w[1] - w[0]) + 1e-15);
            }
        }
    }

    #[test]
    fn two_point_masses() {
        let c = interval(200);
        for (i, j) in [(10, 11), (50, 120), (0, 199), (90, 100)] {
            let mu = DiscreteMeasure::point_mass(c.clone(), i).unwrap();
            let nu = DiscreteMeasure::point_mass(c.clone(), j).unwrap();
            let dist = (c.point(i)[0] - c.point(j)[0]).abs();
            let b = bl_distance(&mu, &nu, DEFAULT_DICTIONARY_SIZE, 0).unwrap();
            assert!(b <= dist.min(2.0) + 1e-15 && b >= 0.5 * dist.min(1.0), "{i},{j}: {b} vs {dist}");
        }
        let mu = DiscreteMeasure::hausdorff(c);
        assert_eq!(bl_distance(&mu, &mu, 8, 1).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_across_clouds() {
        let (a, b) = (interval(50), interval(70));
        let mu = DiscreteMeasure::hausdorff(a);
        let nu = DiscreteMeasure::point_mass(b, 3).unwrap();
        assert_eq!(bl_distance(&mu, &nu, 8, 2).unwrap(), bl_distance(&nu, &mu, 8, 2).unwrap());
    }
}
