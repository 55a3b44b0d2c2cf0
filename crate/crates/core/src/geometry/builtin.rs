use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Chart, ChartMap, Domain, Geometry};
use crate::error::{Error, Result};

/// Built-in compact sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinKind {
    Interval,
    Circle,
    Square,
    Sphere2,
    Torus,
    LipschitzGraph,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 6] = [
        BuiltinKind::Interval,
        BuiltinKind::Circle,
        BuiltinKind::Square,
        BuiltinKind::Sphere2,
        BuiltinKind::Torus,
        BuiltinKind::LipschitzGraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinKind::Interval => "interval",
            BuiltinKind::Circle => "circle",
            BuiltinKind::Square => "square",
            BuiltinKind::Sphere2 => "sphere2",
            BuiltinKind::Torus => "torus",
            BuiltinKind::LipschitzGraph => "lipschitz_graph",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            BuiltinKind::Interval => &["lo", "hi"],
            BuiltinKind::Circle | BuiltinKind::Sphere2 => &["radius"],
            BuiltinKind::Square => &["side"],
            BuiltinKind::Torus => &["major", "minor"],
            BuiltinKind::LipschitzGraph => &["amplitude"],
        }
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownGeometry(s.to_string()))
    }
}

/// Named real parameters of a built-in geometry; missing entries take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BuiltinParams(pub BTreeMap<String, f64>);

impl BuiltinParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.0.get(key).copied().unwrap_or(default)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Build one of the built-in geometries.
///
/// | name | d | p | parameters (defaults) |
/// |---|---|---|---|
/// | `interval` | 1 | 1 | `lo` (-1), `hi` (1) |
/// | `circle` | 1 | 2 | `radius` (1) |
/// | `square` | 2 | 2 | `side` (1), anchored at the origin |
/// | `sphere2` | 2 | 3 | `radius` (1), six equiangular cube-face charts |
/// | `torus` | 2 | 3 | `major` (2), `minor` (1) |
/// | `lipschitz_graph` | 2 | 3 | `amplitude` (0.25) of `a sin(pi u) sin(pi v)` over `[0,1]^2` |
pub fn make_builtin(kind: BuiltinKind, params: &BuiltinParams) -> Result<Geometry> {
    if let Some(key) = params.0.keys().find(|k| !kind.allowed_params().contains(&k.as_str())) {
        return Err(Error::InvalidParameter(format!("`{key}` is not a parameter of {kind}")));
    }
    let name = kind.name();
    match kind {
        BuiltinKind::Interval => {
            let (lo, hi) = (params.get("lo", -1.0), params.get("hi", 1.0));
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!("interval needs lo < hi, got [{lo}, {hi}]")));
            }
            let chart = Chart::new(
                "interval",
                Domain::closed_box(vec![lo], vec![hi]),
                ChartMap::Affine { matrix: vec![vec![1.0]], offset: vec![0.0] },
                1.0,
            )?;
            Geometry::new(name, 1, 1, vec![chart])
        }
        BuiltinKind::Circle => {
            let radius = positive("radius", params.get("radius", 1.0))?;
            let chart = Chart::new(
                "circle",
                Domain::Box { lo: vec![0.0], hi: vec![2.0 * PI], periodic: vec![true] },
                ChartMap::Circle { center: [0.0, 0.0], radius },
                radius.max(1.0 / radius) * FRAC_PI_2,
            )?;
            Geometry::new(name, 2, 1, vec![chart])
        }
        BuiltinKind::Square => {
            let side = positive("side", params.get("side", 1.0))?;
            let chart = Chart::new(
                "square",
                Domain::closed_box(vec![0.0, 0.0], vec![side, side]),
                ChartMap::Affine { matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]], offset: vec![0.0, 0.0] },
                1.0,
            )?;
            Geometry::new(name, 2, 2, vec![chart])
        }
        BuiltinKind::Sphere2 => {
            let radius = positive("radius", params.get("radius", 1.0))?;
            let mut charts = Vec::with_capacity(6);
            for axis in 0..3 {
                for positive in [true, false] {
                    let id = format!("{}{}", if positive { '+' } else { '-' }, ['x', 'y', 'z'][axis]);
                    charts.push(Chart::new(
                        id,
                        Domain::closed_box(vec![-FRAC_PI_4; 2], vec![FRAC_PI_4; 2]),
                        ChartMap::CubeFace { axis, positive, radius },
                        2.0 * radius.max(1.0 / radius),
                    )?);
                }
            }
            Geometry::new(name, 3, 2, charts)
        }
        BuiltinKind::Torus => {
            let major = positive("major", params.get("major", 2.0))?;
            let minor = positive("minor", params.get("minor", 1.0))?;
            if major <= minor {
                return Err(Error::InvalidParameter(format!("torus needs major > minor, got R = {major}, r = {minor}")));
            }
            let stretch = (major + minor).max(1.0 / minor.min(major - minor));
            let chart = Chart::new(
                "torus",
                Domain::Box { lo: vec![0.0, 0.0], hi: vec![2.0 * PI, 2.0 * PI], periodic: vec![true, true] },
                ChartMap::Torus { major, minor },
                stretch * FRAC_PI_2,
            )?;
            Geometry::new(name, 3, 2, vec![chart])
        }
        BuiltinKind::LipschitzGraph => {
            let amplitude = params.get("amplitude", 0.25);
            if !amplitude.is_finite() {
                return Err(Error::InvalidParameter("graph amplitude must be finite".into()));
            }
            let lip = amplitude.abs() * PI;
            let chart = Chart::new(
                "graph",
                Domain::closed_box(vec![0.0, 0.0], vec![1.0, 1.0]),
                ChartMap::Graph { amplitude },
                (1.0 + lip * lip).sqrt(),
            )?;
            Geometry::new(name, 3, 2, vec![chart])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_dimensions() {
        let expect = [(BuiltinKind::Interval, 1, 1), (BuiltinKind::Circle, 1, 2), (BuiltinKind::Square, 2, 2),
            (BuiltinKind::Sphere2, 2, 3), (BuiltinKind::Torus, 2, 3), (BuiltinKind::LipschitzGraph, 2, 3)];
        for (kind, d, p) in expect {
            let g = make_builtin(kind, &BuiltinParams::new()).unwrap();
            assert_eq!((g.intrinsic_dim, g.ambient_dim), (d, p), "{kind}");
        }
    }

    #[test]
    fn interval_is_one_affine_chart() {
        let g = make_builtin(BuiltinKind::Interval, &BuiltinParams::new()).unwrap();
        assert_eq!(g.charts.len(), 1);
        assert!(matches!(g.charts[0].map, ChartMap::Affine { .. }));
    }

    #[test]
    fn sphere_has_six_faces() {
        let g = make_builtin(BuiltinKind::Sphere2, &BuiltinParams::new()).unwrap();
        assert_eq!(g.charts.len(), 6);
    }

    #[test]
    fn torus_with_given_radii() {
        let p = BuiltinParams::new().with("major", 2.0).with("minor", 1.0);
        let g = make_builtin(BuiltinKind::Torus, &p).unwrap();
        assert_eq!((g.intrinsic_dim, g.ambient_dim), (2, 3));
    }

    #[test]
    fn unknown_name_and_bad_params() {
        assert!(matches!("klein_bottle".parse::<BuiltinKind>(), Err(Error::UnknownGeometry(_))));
        let bad = BuiltinParams::new().with("radius", -1.0);
        assert!(make_builtin(BuiltinKind::Circle, &bad).is_err());
        let bad = BuiltinParams::new().with("major", 1.0).with("minor", 1.0);
        assert!(make_builtin(BuiltinKind::Torus, &bad).is_err());
        let bad = BuiltinParams::new().with("amplitude", f64::INFINITY);
        assert!(make_builtin(BuiltinKind::LipschitzGraph, &bad).is_err());
        let bad = BuiltinParams::new().with("colour", 1.0);
        assert!(make_builtin(BuiltinKind::Square, &bad).is_err());
    }
}
