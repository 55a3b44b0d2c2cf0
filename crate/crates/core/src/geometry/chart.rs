use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Parameter domain of a chart.
///
/// Box axes flagged `periodic` wrap around instead of being clamped when a
/// configuration point is moved past the boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        periodic: Vec<bool>,
    },
    Disk { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn closed_box(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Domain::Box { lo, hi, periodic: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Disk { center, .. } => center.len(),
        }
    }

    pub fn is_periodic(&self, axis: usize) -> bool {
        match self {
            Domain::Box { periodic, .. } => periodic.get(axis).copied().unwrap_or(false),
            Domain::Disk { .. } => false,
        }
    }

    /// Axis-aligned bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi, .. } => (lo.clone(), hi.clone()),
            Domain::Disk { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            Domain::Box { lo, hi, .. } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (a, b))| *x >= *a && *x <= *b),
            Domain::Disk { center, radius } => {
                crate::numeric::dist2(u, center) <= radius * radius
            }
        }
    }

    /// Wrap periodic axes and project everything else back onto the domain.
    pub fn project(&self, u: &mut [f64]) {
        match self {
            Domain::Box { lo, hi, .. } => {
                for k in 0..u.len() {
                    if self.is_periodic(k) {
                        let len = hi[k] - lo[k];
                        u[k] = lo[k] + (u[k] - lo[k]).rem_euclid(len);
                    } else {
                        u[k] = u[k].clamp(lo[k], hi[k]);
                    }
                }
            }
            Domain::Disk { center, radius } => {
                let r = crate::numeric::dist2(u, center).sqrt();
                if r > *radius {
                    for (x, c) in u.iter_mut().zip(center) {
                        *x = c + (*x - c) * radius / r;
                    }
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lo, hi, periodic } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::InvalidGeometry("box bounds must have equal, nonzero length".into()));
                }
                if !periodic.is_empty() && periodic.len() != lo.len() {
                    return Err(Error::InvalidGeometry("periodic flags must match the box dimension".into()));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                    return Err(Error::InvalidGeometry("box requires finite lo < hi on every axis".into()));
                }
            }
            Domain::Disk { center, radius } => {
                if center.len() != 2 {
                    return Err(Error::InvalidGeometry("disk domains are two-dimensional".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidGeometry("disk radius must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Parametrization of a chart image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChartMap {
    /// `x = matrix * u + offset`; `matrix` is stored row-major with `p` rows and `d` columns.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `theta -> center + radius (cos theta, sin theta)`.
    Circle { center: [f64; 2], radius: f64 },
    /// Equiangular gnomonic projection of one face of the cube onto the sphere
    /// of the given radius. Parameters are angles in `[-pi/4, pi/4]`.
    CubeFace { axis: usize, positive: bool, radius: f64 },
    /// `(theta, phi) -> ((R + r cos phi) cos theta, (R + r cos phi) sin theta, r sin phi)`.
    Torus { major: f64, minor: f64 },
    /// Graph of `amplitude * sin(pi u) sin(pi v)` over the parameter square.
    Graph { amplitude: f64 },
}

impl ChartMap {
    pub fn ambient_dim(&self) -> usize {
        match self {
            ChartMap::Affine { offset, .. } => offset.len(),
            ChartMap::Circle { .. } => 2,
            ChartMap::CubeFace { .. } | ChartMap::Torus { .. } | ChartMap::Graph { .. } => 3,
        }
    }

    pub fn param_dim(&self) -> usize {
        match self {
            ChartMap::Affine { matrix, .. } => matrix.first().map_or(0, |r| r.len()),
            ChartMap::Circle { .. } => 1,
            ChartMap::CubeFace { .. } | ChartMap::Torus { .. } | ChartMap::Graph { .. } => 2,
        }
    }

    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        match self {
            ChartMap::Affine { matrix, offset } => {
                for (k, (row, o)) in matrix.iter().zip(offset).enumerate() {
                    out[k] = o + row.iter().zip(u).map(|(a, x)| a * x).sum::<f64>();
                }
            }
            ChartMap::Circle { center, radius } => {
                out[0] = center[0] + radius * u[0].cos();
                out[1] = center[1] + radius * u[0].sin();
            }
            ChartMap::CubeFace { axis, positive, radius } => {
                let (a, b) = (u[0].tan(), u[1].tan());
                let r = (1.0 + a * a + b * b).sqrt();
                let sign = if *positive { 1.0 } else { -1.0 };
                out[*axis] = sign * radius / r;
                out[(axis + 1) % 3] = radius * a / r;
                out[(axis + 2) % 3] = radius * b / r;
            }
            ChartMap::Torus { major, minor } => {
                let ring = major + minor * u[1].cos();
                out[0] = ring * u[0].cos();
                out[1] = ring * u[0].sin();
                out[2] = minor * u[1].sin();
            }
            ChartMap::Graph { amplitude } => {
                out[0] = u[0];
                out[1] = u[1];
                out[2] = amplitude * (PI * u[0]).sin() * (PI * u[1]).sin();
            }
        }
    }

    /// Jacobian `dx/du`, written row-major as `p x d`.
    pub fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        let d = self.param_dim();
        match self {
            ChartMap::Affine { matrix, .. } => {
                for (k, row) in matrix.iter().enumerate() {
                    out[k * d..(k + 1) * d].copy_from_slice(row);
                }
            }
            ChartMap::Circle { radius, .. } => {
                out[0] = -radius * u[0].sin();
                out[1] = radius * u[0].cos();
            }
            ChartMap::CubeFace { axis, positive, radius } => {
                let (a, b) = (u[0].tan(), u[1].tan());
                let (sa, sb) = (1.0 + a * a, 1.0 + b * b);
                let r2 = 1.0 + a * a + b * b;
                let r3 = r2 * r2.sqrt();
                let sign = if *positive { 1.0 } else { -1.0 };
                // derivatives of (1, a, b)/r with respect to a and b
                let da = [-a / r3, (1.0 + b * b) / r3, -a * b / r3];
                let db = [-b / r3, -a * b / r3, (1.0 + a * a) / r3];
                let rows = [*axis, (axis + 1) % 3, (axis + 2) % 3];
                for (slot, &row) in rows.iter().enumerate() {
                    let sg = if slot == 0 { sign } else { 1.0 };
                    out[row * 2] = sg * radius * da[slot] * sa;
                    out[row * 2 + 1] = sg * radius * db[slot] * sb;
                }
            }
            ChartMap::Torus { major, minor } => {
                let (st, ct) = u[0].sin_cos();
                let (sp, cp) = u[1].sin_cos();
                let ring = major + minor * cp;
                out[0] = -ring * st;
                out[1] = -minor * sp * ct;
                out[2] = ring * ct;
                out[3] = -minor * sp * st;
                out[4] = 0.0;
                out[5] = minor * cp;
            }
            ChartMap::Graph { amplitude } => {
                let (su, cu) = (PI * u[0]).sin_cos();
                let (sv, cv) = (PI * u[1]).sin_cos();
                out[0] = 1.0;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = 1.0;
                out[4] = amplitude * PI * cu * sv;
                out[5] = amplitude * PI * su * cv;
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidGeometry(msg.to_string()));
        match self {
            ChartMap::Affine { matrix, offset } => {
                if matrix.len() != offset.len() || matrix.is_empty() {
                    return bad("affine matrix needs one row per ambient coordinate");
                }
                let d = matrix[0].len();
                if d == 0 || matrix.iter().any(|r| r.len() != d) {
                    return bad("affine matrix rows must share a nonzero length");
                }
                if matrix.iter().flatten().chain(offset).any(|v| !v.is_finite()) {
                    return bad("affine map entries must be finite");
                }
            }
            ChartMap::Circle { radius, .. } | ChartMap::CubeFace { radius, .. } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("radius must be positive");
                }
                if let ChartMap::CubeFace { axis, .. } = self {
                    if *axis > 2 {
                        return bad("cube-face axis must be 0, 1, or 2");
                    }
                }
            }
            ChartMap::Torus { major, minor } => {
                if !(minor.is_finite() && *minor > 0.0 && major.is_finite() && major > minor) {
                    return bad("torus radii must satisfy R > r > 0");
                }
            }
            ChartMap::Graph { amplitude } => {
                if !amplitude.is_finite() {
                    return bad("graph amplitude must be finite");
                }
            }
        }
        Ok(())
    }
}

/// A bi-Lipschitz chart: parameter domain, map, and a declared upper bound
/// on its bi-Lipschitz constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub id: String,
    pub domain: Domain,
    pub map: ChartMap,
    pub bilip_constant: f64,
}

impl Chart {
    pub fn new(id: impl Into<String>, domain: Domain, map: ChartMap, bilip_constant: f64) -> Result<Self> {
        let chart = Self { id: id.into(), domain, map, bilip_constant };
        chart.validate()?;
        Ok(chart)
    }

    pub fn param_dim(&self) -> usize {
        self.map.param_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.ambient_dim()
    }

    pub fn point(&self, u: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.ambient_dim()];
        self.map.eval(u, &mut x);
        x
    }

    /// Local area (length, volume) element `sqrt(det(J^T J))`.
    pub fn area_element(&self, u: &[f64]) -> f64 {
        let (p, d) = (self.ambient_dim(), self.param_dim());
        let mut jac = vec![0.0; p * d];
        self.map.jacobian(u, &mut jac);
        gram_sqrt_det(&jac, p, d)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        self.map.validate()?;
        self.domain.validate()?;
        if self.domain.dim() != self.map.param_dim() {
            return Err(Error::InvalidGeometry(format!(
                "chart `{}`: domain dimension {} does not match map parameter dimension {}",
                self.id,
                self.domain.dim(),
                self.map.param_dim()
            )));
        }
        if !(self.bilip_constant.is_finite() && self.bilip_constant >= 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "chart `{}`: bi-Lipschitz constant must be >= 1, got {}",
                self.id, self.bilip_constant
            )));
        }
        Ok(())
    }
}

/// `sqrt(det(J^T J))` for a row-major `p x d` Jacobian.
pub fn gram_sqrt_det(jac: &[f64], p: usize, d: usize) -> f64 {
    let mut gram = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            gram[a * d + b] = (0..p).map(|k| jac[k * d + a] * jac[k * d + b]).sum();
        }
    }
    determinant(&mut gram, d).max(0.0).sqrt()
}

/// Determinant by Gaussian elimination with partial pivoting (destroys `m`).
pub fn determinant(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let diag = m[col * n + col];
        det *= diag;
        for row in col + 1..n {
            let factor = m[row * n + col] / diag;
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
        }
    }
    det
}

/// Parameters of the cube face that contains the direction `x`.
///
/// Ties between faces go to the lowest axis index, which makes every face
/// half-open and the faces pairwise disjoint.
pub(crate) fn cube_face_of(x: &[f64]) -> (usize, bool, [f64; 2]) {
    let mut axis = 0;
    for k in 1..3 {
        if x[k].abs() > x[axis].abs() {
            axis = k;
        }
    }
    let positive = x[axis] >= 0.0;
    let lead = x[axis].abs();
    let a = (x[(axis + 1) % 3] / lead).atan();
    let b = (x[(axis + 2) % 3] / lead).atan();
    (axis, positive, [a.clamp(-FRAC_PI_4, FRAC_PI_4), b.clamp(-FRAC_PI_4, FRAC_PI_4)])
}
