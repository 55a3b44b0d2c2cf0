//! Minimal discrete energy configurations by projected gradient descent in
//! chart coordinates, and the empirical measures they induce on a cloud.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{point_set_energy, Configuration, DiscreteMeasure, Schedule};
use crate::error::{check_exponent, Error, Result};
use crate::geometry::{Domain, Geometry, WeightedPointCloud};
use crate::numeric::{dist2, CompensatedSum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentOptions {
    pub restarts: usize,
    pub max_iters: usize,
    /// Initial step length in chart units.
    pub step0: f64,
    pub shrink: f64,
    /// Stop once the projected chart gradient satisfies `|g| <= tol * E`.
    pub tol: f64,
    pub armijo: f64,
    pub seed: u64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { restarts: 8, max_iters: 5000, step0: 1e-3, shrink: 0.5, tol: 1e-8, armijo: 1e-4, seed: 0 }
    }
}

impl DescentOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter("restarts and max_iters must be at least 1".into()));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::InvalidParameter(format!("step0 must be positive, got {}", self.step0)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.tol >= 0.0 && self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::InvalidParameter("tol must be nonnegative and armijo in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DescentStep {
    pub iter: usize,
    pub energy: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub config: Configuration,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub flags: Vec<String>,
    pub trace: Vec<DescentStep>,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub best: DescentResult,
    pub best_restart: usize,
    /// Final energy of every restart, in restart order.
    pub restart_energies: Vec<f64>,
}

impl MinimizeResult {
    pub fn config(&self) -> &Configuration {
        &self.best.config
    }

    pub fn energy(&self) -> f64 {
        self.best.energy
    }
}

/// Write a trace as CSV with header `iter,energy,step`.
pub fn write_trace_csv<W: Write>(trace: &[DescentStep], mut out: W) -> Result<()> {
    writeln!(out, "iter,energy,step")?;
    for t in trace {
        writeln!(out, "{},{},{}", t.iter, t.energy, t.step)?;
    }
    Ok(())
}

/// Ambient gradient of `E_s` (flat, `p` per point). Rows are independent
/// sequential sums, so the result does not depend on the thread count.
pub fn energy_gradient(points: &[f64], p: usize, s: f64) -> Vec<f64> {
    let n = points.len() / p;
    let mut grad = vec![0.0; points.len()];
    grad.par_chunks_mut(p).enumerate().for_each(|(i, gi)| {
        let xi = &points[i * p..(i + 1) * p];
        let mut acc: Vec<CompensatedSum> = vec![CompensatedSum::new(); p];
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = &points[j * p..(j + 1) * p];
            let d2 = dist2(xi, xj);
            let c = -2.0 * s * d2.powf(-0.5 * s - 1.0);
            for k in 0..p {
                acc[k].add(c * (xi[k] - xj[k]));
            }
        }
        for k in 0..p {
            gi[k] = acc[k].value();
        }
    });
    grad
}

fn point_of(geom: &Geometry, chart: usize, u: &[f64], out: &mut [f64]) {
    geom.charts[chart].map.eval(u, out);
}

/// Pull the ambient gradient back to chart coordinates and remove components
/// that would push a clamped point out of its domain.
fn chart_gradient(geom: &Geometry, charts: &[usize], params: &[f64], gx: &[f64]) -> Vec<f64> {
    let (d, p) = (geom.intrinsic_dim, geom.ambient_dim);
    let mut gu = vec![0.0; params.len()];
    let mut jac = vec![0.0; p * d];
    for (k, &c) in charts.iter().enumerate() {
        let u = &params[k * d..(k + 1) * d];
        let chart = &geom.charts[c];
        chart.map.jacobian(u, &mut jac);
        let g = &mut gu[k * d..(k + 1) * d];
        for a in 0..d {
            g[a] = (0..p).map(|r| jac[r * d + a] * gx[k * p + r]).sum();
        }
        match &chart.domain {
            Domain::Box { lo, hi, .. } => {
                for a in 0..d {
                    if geom.is_clamped_axis(c, a) && ((u[a] <= lo[a] && g[a] > 0.0) || (u[a] >= hi[a] && g[a] < 0.0)) {
                        g[a] = 0.0;
                    }
                }
            }
            Domain::Disk { center, radius } => {
                let r2 = dist2(u, center);
                let radial: f64 = (0..d).map(|a| g[a] * (u[a] - center[a])).sum();
                if r2 >= radius * radius * (1.0 - 1e-12) && radial < 0.0 {
                    for a in 0..d {
                        g[a] -= radial * (u[a] - center[a]) / r2;
                    }
                }
            }
        }
    }
    gu
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Draw `n` chart parameters uniformly: chart index uniform, then a uniform
/// point in its parameter domain.
pub fn random_configuration(geom: &Arc<Geometry>, n: usize, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    let d = geom.intrinsic_dim;
    let mut charts = Vec::with_capacity(n);
    let mut params = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = rng.gen_range(0..geom.charts.len());
        let dom = &geom.charts[c].domain;
        let (lo, hi) = dom.bounds();
        let u = loop {
            let u: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
            if dom.contains(&u) {
                break u;
            }
        };
        let mut u = u;
        let c = geom.retract(c, &mut u);
        charts.push(c);
        params.extend(u);
    }
    Configuration::from_chart_coords(geom.clone(), charts, params)
}

/// One projected backtracking descent from `init`.
pub fn minimize_config_from(init: &Configuration, s: f64, opts: &DescentOptions) -> Result<DescentResult> {
    check_exponent(s)?;
    opts.validate()?;
    let geom = init.geometry().clone();
    let (d, p) = (geom.intrinsic_dim, geom.ambient_dim);
    let n = init.len();
    let mut charts = init.charts().to_vec();
    let mut params = init.params().to_vec();
    let mut points = init.points().to_vec();
    let mut energy = point_set_energy(&points, p, s, Schedule::default())?;
    let mut step = opts.step0;
    let mut trace = vec![DescentStep { iter: 0, energy, step }];
    let mut flags = Vec::new();
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;

    let mut trial_charts = charts.clone();
    let mut trial_params = params.clone();
    let mut trial_points = points.clone();
    while iterations < opts.max_iters {
        let gx = energy_gradient(&points, p, s);
        let gu = chart_gradient(&geom, &charts, &params, &gx);
        grad_norm = norm(&gu);
        if grad_norm <= opts.tol * energy {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        while step > f64::EPSILON * 1e-6 {
            for k in 0..n {
                let u = &mut trial_params[k * d..(k + 1) * d];
                for a in 0..d {
                    u[a] = params[k * d + a] - step * gu[k * d + a];
                }
                trial_charts[k] = geom.retract(charts[k], u);
                point_of(&geom, trial_charts[k], u, &mut trial_points[k * p..(k + 1) * p]);
            }
            let moved2: f64 = trial_points.iter().zip(&points).map(|(a, b)| (a - b) * (a - b)).sum();
            let param_moved2: f64 = (0..n * d)
                .map(|i| {
                    let (k, a) = (i / d, i % d);
                    let raw = -step * gu[i];
                    let delta = match &geom.charts[charts[k]].domain {
                        Domain::Box { lo, hi, .. } if geom.is_clamped_axis(charts[k], a) => {
                            (params[i] + raw).clamp(lo[a], hi[a]) - params[i]
                        }
                        _ => raw,
                    };
                    delta * delta
                })
                .sum();
            if moved2 == 0.0 {
                break;
            }
            match point_set_energy(&trial_points, p, s, Schedule::default()) {
                Ok(e) if e <= energy - opts.armijo * param_moved2 / step => {
                    energy = e;
                    std::mem::swap(&mut charts, &mut trial_charts);
                    std::mem::swap(&mut params, &mut trial_params);
                    std::mem::swap(&mut points, &mut trial_points);
                    trial_charts.copy_from_slice(&charts);
                    accepted = true;
                    break;
                }
                // collisions and insufficient decrease both shrink the step
                _ => step *= opts.shrink,
            }
        }
        if !accepted {
            flags.push("line_search_stalled".to_string());
            break;
        }
        trace.push(DescentStep { iter: iterations, energy, step });
        step /= opts.shrink;
    }
    if !converged && flags.is_empty() {
        flags.push("max_iters".to_string());
    }
    let config = Configuration::new(geom, charts, params, points)?;
    Ok(DescentResult { config, energy, grad_norm, iterations, converged, flags, trace })
}

/// Best of `opts.restarts` descents from seeded random starts.
///
/// Restarts run in parallel; restart `r` draws its start from stream `r` of
/// a ChaCha generator keyed by `opts.seed`. Ties go to the lowest restart.
pub fn minimize_config(geom: Arc<Geometry>, n: usize, s: f64, opts: &DescentOptions) -> Result<MinimizeResult> {
    check_exponent(s)?;
    opts.validate()?;
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let runs: Vec<Result<DescentResult>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(r as u64);
            let init = random_configuration(&geom, n, &mut rng)?;
            minimize_config_from(&init, s, opts)
        })
        .collect();
    let runs: Vec<DescentResult> = runs.into_iter().collect::<Result<_>>()?;
    let restart_energies: Vec<f64> = runs.iter().map(|r| r.energy).collect();
    let best_restart = (0..runs.len()).fold(0, |b, r| if runs[r].energy < runs[b].energy { r } else { b });
    let best = runs.into_iter().nth(best_restart).expect("at least one restart");
    Ok(MinimizeResult { best, best_restart, restart_energies })
}

/// `mu^{s,N}`: mass `1/N` at the cloud node nearest each configuration point.
pub fn empirical_measure(cfg: &Configuration, cloud: Arc<WeightedPointCloud>) -> Result<DiscreteMeasure> {
    if cfg.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch { expected: cloud.dim(), got: cfg.dim() });
    }
    let mut masses = vec![0.0; cloud.len()];
    let share = 1.0 / cfg.len() as f64;
    for k in 0..cfg.len() {
        masses[cloud.nearest_node(cfg.point(k))] += share;
    }
    DiscreteMeasure::normalized(cloud, masses)
}

/// `N sum_{k=1}^{N-1} (2 sin(pi k / N))^{-s}`: energy of `N` equally spaced
/// points on the unit circle.
pub fn circle_equispaced_energy(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    let sum: CompensatedSum = (1..n).map(|k| (2.0 * (std::f64::consts::PI * k as f64 / nf).sin()).powf(-s)).collect();
    nf * sum.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::discrete_energy;
    use crate::geometry::{make_builtin, sample_cloud, BuiltinKind, BuiltinParams};

    fn geom(kind: BuiltinKind) -> Arc<Geometry> {
        Arc::new(make_builtin(kind, &BuiltinParams::new()).unwrap())
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts = [0.1, 0.2, 0.9, -0.3, -0.5, 0.4, 0.3, 0.8];
        let s = 0.7;
        let g = energy_gradient(&pts, 2, s);
        for i in 0..pts.len() {
            let mut a = pts;
            let mut b = pts;
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (point_set_energy(&a, 2, s, Schedule::Sequential).unwrap()
                - point_set_energy(&b, 2, s, Schedule::Sequential).unwrap())
                / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6 * fd.abs().max(1.0), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn two_points_on_interval_go_to_endpoints() {
        for s in [0.5, 1.0, 3.0] {
            let r = minimize_config(geom(BuiltinKind::Interval), 2, s, &DescentOptions::default()).unwrap();
            let mut x: Vec<f64> = r.config().points().to_vec();
            x.sort_by(f64::total_cmp);
            assert!((x[0] + 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12, "{x:?}");
            assert!((r.energy() - 2.0 * 2f64.powf(-s)).abs() < 1e-12);
        }
    }

    #[test]
    fn three_points_beat_symmetric_candidate() {
        let r = minimize_config(geom(BuiltinKind::Interval), 3, 1.0, &DescentOptions::default()).unwrap();
        assert!(r.energy() <= 5.0 + 1e-9, "{}", r.energy());
    }

    #[test]
    fn circle_twenty_points_match_equal_spacing() {
        let g = geom(BuiltinKind::Circle);
        let opts = DescentOptions { restarts: 2, ..Default::default() };
        let r = minimize_config(g, 20, 0.5, &opts).unwrap();
        let target = circle_equispaced_energy(20, 0.5);
        assert!((r.energy() / target - 1.0).abs() < 1e-3, "{} vs {target}", r.energy());
        for w in r.best.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        assert_eq!(discrete_energy(r.config(), 0.5).unwrap(), r.energy());
    }

    #[test]
    fn sphere_descent_stays_on_the_sphere() {
        let g = geom(BuiltinKind::Sphere2);
        let opts = DescentOptions { restarts: 1, max_iters: 300, ..Default::default() };
        let r = minimize_config(g, 12, 1.0, &opts).unwrap();
        for k in 0..12 {
            let x = r.config().point(k);
            assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // twelve points: the icosahedron is optimal at s = 1
        assert!(r.energy() < 2.0 * 49.165253058 * 1.001, "{}", r.energy());
    }

    #[test]
    fn empirical_measure_has_unit_mass() {
        let g = geom(BuiltinKind::Circle);
        let cloud = Arc::new(sample_cloud(&g, 400, 0).unwrap());
        let cfg = Configuration::from_chart_coords(g, vec![0; 4], vec![0.01, 1.58, 3.15, 4.72]).unwrap();
        let mu = empirical_measure(&cfg, cloud).unwrap();
        let w = mu.weights();
        assert_eq!(w.iter().filter(|x| **x > 0.0).count(), 4);
        assert!(w.iter().filter(|x| **x > 0.0).all(|x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn same_seed_same_result() {
        let g = geom(BuiltinKind::Square);
        let opts = DescentOptions { restarts: 3, max_iters: 50, ..Default::default() };
        let a = minimize_config(g.clone(), 10, 1.5, &opts).unwrap();
        let b = minimize_config(g, 10, 1.5, &opts).unwrap();
        assert_eq!(a.config().points(), b.config().points());
        assert_eq!(a.restart_energies, b.restart_energies);
    }
}
