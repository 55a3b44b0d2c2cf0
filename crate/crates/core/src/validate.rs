//! Built-in invariant suite behind `riesz-lab validate`.
//!
//! Every check returns a measured value and the threshold it was held to, so
//! a report is useful even when everything passes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    bl_distance, layer_cake_potential, normalized_d_energy, normalized_d_potential, order_two_density, BlDictionary,
};
use crate::configs::{minimize_config_from, random_configuration, DescentOptions};
use crate::energy::{
    c_sd, measure_energy, measure_energy_with, normalized_potential, omega_d, point_set_energy, riesz_kernel,
    DiagonalPolicy, DiscreteMeasure, Schedule,
};
use crate::equilibrium::{frostman_check, solve_equilibrium, GapTolerance, KernelMatrix, SolverOptions};
use crate::error::Result;
use crate::geometry::{
    diameter, make_builtin, measure_of_ball, sample_cloud, BuiltinKind, BuiltinParams, Chart, ChartMap, Domain,
    Geometry, WeightedPointCloud,
};
use crate::numeric::{csum, GaussLegendre};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: measured <= threshold, measured, threshold, detail: detail.into() }
    }

    fn failed(name: &str, err: impl fmt::Display) -> Self {
        Self { name: name.into(), passed: false, measured: f64::NAN, threshold: f64::NAN, detail: format!("error: {err}") }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub results: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
        writeln!(f, "{:<width$}  {:<4}  {:>12}  {:>12}  detail", "check", "ok", "measured", "threshold")?;
        for r in &self.results {
            writeln!(
                f,
                "{:<width$}  {:<4}  {:>12.4e}  {:>12.4e}  {}",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.measured,
                r.threshold,
                r.detail
            )?;
        }
        let failed = self.results.iter().filter(|r| !r.passed).count();
        write!(f, "{} checks, {} failed", self.results.len(), failed)
    }
}

type CheckFn = fn() -> Result<CheckResult>;

/// Names and entry points of every check, in report order.
pub const CHECKS: &[(&str, CheckFn)] = &[
    ("permutation_invariance", permutation_invariance),
    ("isometry_invariance", isometry_invariance),
    ("parallel_sum_determinism", parallel_sum_determinism),
    ("kernel_monotonicity", kernel_monotonicity),
    ("energy_lower_bound", energy_lower_bound),
    ("bilipschitz_energy_distortion", bilipschitz_energy_distortion),
    ("bilipschitz_measure_bound", bilipschitz_measure_bound),
    ("refinement_convergence", refinement_convergence),
    ("upper_ahlfors_regularity", upper_ahlfors_regularity),
    ("dminus_s_times_c_sd", dminus_s_times_c_sd),
    ("layer_cake_consistency", layer_cake_consistency),
    ("order_two_density_hinz", order_two_density_hinz),
    ("normalized_potential_identity", normalized_potential_identity),
    ("lambda_minimizes_normalized_energy", lambda_minimizes_normalized_energy),
    ("bl_pseudometric", bl_pseudometric),
    ("solver_monotone_objective", solver_monotone_objective),
    ("solver_relabeling_invariance", solver_relabeling_invariance),
    ("solver_isometry_invariance", solver_isometry_invariance),
    ("solver_uniqueness", solver_uniqueness),
    ("solver_beats_uniform", solver_beats_uniform),
    ("frostman_circle", frostman_circle),
    ("descent_isometry_equivariance", descent_isometry_equivariance),
];

/// Run every check whose name contains `filter` (all when `None`).
pub fn run_validation(filter: Option<&str>) -> ValidationReport {
    let results = CHECKS
        .iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(name, check)| check().unwrap_or_else(|e| CheckResult::failed(name, e)))
        .collect();
    ValidationReport { results }
}

fn builtin(kind: BuiltinKind) -> Geometry {
    make_builtin(kind, &BuiltinParams::new()).expect("built-in parameters are valid")
}

fn cloud(kind: BuiltinKind, res: usize) -> Result<Arc<WeightedPointCloud>> {
    Ok(Arc::new(sample_cloud(&builtin(kind), res, 0)?))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn random_measure(c: &Arc<WeightedPointCloud>, rng: &mut ChaCha8Rng) -> Result<DiscreteMeasure> {
    let m: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::normalized(c.clone(), m)
}

/// Random permutation `perm` (node `perm[k]` becomes node `k`).
fn shuffle(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn rotation3(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    // Gram–Schmidt on a random matrix
    let mut m = [[0.0; 3]; 3];
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    for i in 0..3 {
        for j in 0..i {
            let dot: f64 = (0..3).map(|k| m[i][k] * m[j][k]).sum();
            for k in 0..3 {
                m[i][k] -= dot * m[j][k];
            }
        }
        let n = m[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        for v in m[i].iter_mut() {
            *v /= n;
        }
    }
    m
}

fn apply3(r: &[[f64; 3]; 3], t: &[f64; 3], x: &[f64]) -> Vec<f64> {
    (0..3).map(|i| (0..3).map(|k| r[i][k] * x[k]).sum::<f64>() + t[i]).collect()
}

/// `R(a) diag(s1, s2) R(b)` with `s1, s2` uniform in `[1/L, L]`.
pub fn random_affine2(l: f64, rng: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
    let (s1, s2) = (rng.gen_range(1.0 / l..=l), rng.gen_range(1.0 / l..=l));
    let (a, b) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let (ca, sa, cb, sb) = (a.cos(), a.sin(), b.cos(), b.sin());
    // R(a) * diag * R(b)
    let m = [[ca * s1, -sa * s2], [sa * s1, ca * s2]];
    [
        [m[0][0] * cb + m[0][1] * sb, -m[0][0] * sb + m[0][1] * cb],
        [m[1][0] * cb + m[1][1] * sb, -m[1][0] * sb + m[1][1] * cb],
    ]
}

fn permutation_invariance() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for kind in [BuiltinKind::Interval, BuiltinKind::Square, BuiltinKind::Sphere2] {
        let c = cloud(kind, 300)?;
        let mu = random_measure(&c, &mut rng)?;
        let perm = shuffle(c.len(), &mut rng);
        let nu = mu.permuted(&perm)?;
        for policy in [DiagonalPolicy::ExcludeDiagonal, DiagonalPolicy::CellCorrected] {
            let a = measure_energy(&mu, 0.7, policy)?.value;
            let b = measure_energy(&nu, 0.7, policy)?.value;
            worst = worst.max(rel(b, a));
        }
    }
    Ok(CheckResult::at_most("permutation_invariance", worst, 1e-12, "relative change of I_s under node relabeling"))
}

fn isometry_invariance() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let pts: Vec<f64> = (0..3 * 150).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = rotation3(&mut rng);
        let t = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let moved: Vec<f64> = pts.chunks(3).flat_map(|x| apply3(&r, &t, x)).collect();
        for s in [0.5, 1.0, 2.5] {
            let a = point_set_energy(&pts, 3, s, Schedule::default())?;
            let b = point_set_energy(&moved, 3, s, Schedule::default())?;
            worst = worst.max(rel(b, a));
        }
    }
    Ok(CheckResult::at_most("isometry_invariance", worst, 1e-12, "relative change of E_s under rigid motions in R^3"))
}

fn parallel_sum_determinism() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts: Vec<f64> = (0..2 * 700).map(|_| rng.gen_range(0.0..1.0)).collect();
    let c = cloud(BuiltinKind::Sphere2, 400)?;
    let mu = random_measure(&c, &mut rng)?;
    let mut worst = 0.0f64;
    let seq = point_set_energy(&pts, 2, 0.9, Schedule::Sequential)?;
    let mseq = measure_energy_with(&mu, 1.3, DiagonalPolicy::CellCorrected, Schedule::Sequential)?.value;
    for rows in [1, 7, 32, 333] {
        let t = point_set_energy(&pts, 2, 0.9, Schedule::Tiled { rows })?;
        let m = measure_energy_with(&mu, 1.3, DiagonalPolicy::CellCorrected, Schedule::Tiled { rows })?.value;
        worst = worst.max(rel(t, seq)).max(rel(m, mseq));
    }
    Ok(CheckResult::at_most("parallel_sum_determinism", worst, 1e-12, "tiled vs sequential pair sums"))
}

fn kernel_monotonicity() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let r: f64 = rng.gen_range(0.01..3.0);
        if (r - 1.0).abs() < 1e-9 {
            continue;
        }
        let (s1, s2) = (rng.gen_range(0.1..2.0), rng.gen_range(2.0..4.0));
        let (k1, k2) = (riesz_kernel(&[0.0], &[r], s1)?, riesz_kernel(&[0.0], &[r], s2)?);
        if (r < 1.0 && k2 <= k1) || (r > 1.0 && k2 >= k1) {
            violations += 1;
        }
    }
    Ok(CheckResult::at_most("kernel_monotonicity", violations as f64, 0.0, "kernel increases in s below distance 1, decreases above"))
}

fn energy_lower_bound() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = f64::NEG_INFINITY;
    for kind in [BuiltinKind::Circle, BuiltinKind::Torus, BuiltinKind::LipschitzGraph] {
        let c = cloud(kind, 300)?;
        let diam = diameter(&c)?;
        for s in [0.5, 1.5] {
            let mu = random_measure(&c, &mut rng)?;
            let e = measure_energy(&mu, s, DiagonalPolicy::ExcludeDiagonal)?.value;
            let sw2 = csum(mu.weights().iter().map(|w| w * w));
            let bound = (1.0 - sw2) * diam.powf(-s);
            worst = worst.max(bound / e - 1.0);
        }
    }
    Ok(CheckResult::at_most("energy_lower_bound", worst, 0.0, "max of bound/energy - 1 (must be <= 0)"))
}

fn bilipschitz_energy_distortion() -> Result<CheckResult> {
    let (trials, violations) = bilipschitz_trials(&[1.1, 2.0], 100, 16)?;
    Ok(CheckResult::at_most(
        "bilipschitz_energy_distortion",
        violations as f64,
        0.0,
        format!("{trials} affine pushforwards checked against L^(+-s)"),
    ))
}

/// Count violations of `L^{-s} I(phi#mu) <= I(mu) <= L^s I(phi#mu)` over
/// random affine maps of the unit square with singular values in `[1/L, L]`.
pub fn bilipschitz_trials(ls: &[f64], per_l: usize, seed: u64) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = cloud(BuiltinKind::Square, 150)?;
    let mut violations = 0;
    let mut trials = 0;
    for &l in ls {
        for _ in 0..per_l {
            let m = random_affine2(l, &mut rng);
            let s = rng.gen_range(0.2..1.9);
            let mu = random_measure(&c, &mut rng)?;
            let pushed = Arc::new(c.mapped(|x| vec![m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]], 1.0)?);
            let nu = DiscreteMeasure::new(pushed, mu.weights().to_vec())?;
            let a = measure_energy(&mu, s, DiagonalPolicy::ExcludeDiagonal)?.value;
            let b = measure_energy(&nu, s, DiagonalPolicy::ExcludeDiagonal)?.value;
            let ls = l.powf(s);
            if !(b / ls <= a && a <= ls * b) {
                violations += 1;
            }
            trials += 1;
        }
    }
    Ok((trials, violations))
}

fn affine_square(m: [[f64; 2]; 2]) -> Result<Geometry> {
    let chart = Chart::new(
        "square",
        Domain::closed_box(vec![0.0, 0.0], vec![1.0, 1.0]),
        ChartMap::Affine { matrix: vec![m[0].to_vec(), m[1].to_vec()], offset: vec![0.0, 0.0] },
        1.0,
    )?;
    Geometry::new("affine_square", 2, 2, vec![chart])
}

fn bilipschitz_measure_bound() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let base = sample_cloud(&builtin(BuiltinKind::Square), 400, 0)?.total_mass();
    let mut violations = 0;
    for l in [1.1, 2.0] {
        for _ in 0..50 {
            let g = affine_square(random_affine2(l, &mut rng))?;
            let img = sample_cloud(&g, 400, 0)?.total_mass();
            let ld = l * l;
            if !(img / ld <= base && base <= ld * img) {
                violations += 1;
            }
        }
    }
    Ok(CheckResult::at_most("bilipschitz_measure_bound", violations as f64, 0.0, "H^2 of affine images within L^(+-d)"))
}

/// Analytic `H^d(A)` (with the `2^d / kappa_d` factor) of each built-in with default parameters.
pub fn builtin_mass(kind: BuiltinKind) -> f64 {
    match kind {
        BuiltinKind::Interval => 2.0,
        BuiltinKind::Circle => 2.0 * PI,
        BuiltinKind::Square => 4.0 / PI,
        BuiltinKind::Sphere2 => 16.0,
        BuiltinKind::Torus => (4.0 / PI) * 4.0 * PI * PI * 2.0,
        BuiltinKind::LipschitzGraph => {
            // Gauss–Legendre tensor rule on the smooth integrand sqrt(1 + |grad f|^2)
            let a = 0.25;
            let gl = GaussLegendre::new(40);
            let inner = |u: f64| {
                gl.integrate(0.0, 1.0, |v| {
                    let fu = a * PI * (PI * u).cos() * (PI * v).sin();
                    let fv = a * PI * (PI * u).sin() * (PI * v).cos();
                    (1.0 + fu * fu + fv * fv).sqrt()
                })
            };
            (4.0 / PI) * gl.integrate(0.0, 1.0, inner)
        }
    }
}

fn refinement_convergence() -> Result<CheckResult> {
    let mut worst = f64::NEG_INFINITY;
    let mut detail = Vec::new();
    for kind in BuiltinKind::ALL {
        let g = builtin(kind);
        let exact = builtin_mass(kind);
        let err = |res: usize| -> Result<f64> { Ok((sample_cloud(&g, res, 0)?.total_mass() - exact).abs()) };
        let d = g.intrinsic_dim as u32;
        let base = if d == 1 { 8 } else { 64 };
        let mut prev = err(base)?;
        for k in 1..=3 {
            let cur = err(base * 2usize.pow(k * d))?;
            // already exact to rounding: cannot improve further
            if prev > 1e-12 * exact {
                worst = worst.max(cur / prev - 1.0);
            } else if cur > 1e-12 * exact {
                worst = worst.max(1.0);
            }
            prev = cur;
        }
        detail.push(format!("{kind}:{prev:.1e}"));
    }
    Ok(CheckResult::at_most("refinement_convergence", worst, 0.0, format!("err(2k)/err(k) - 1; final errors {}", detail.join(" "))))
}

fn upper_ahlfors_regularity() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for kind in BuiltinKind::ALL {
        let g = builtin(kind);
        let d = g.intrinsic_dim;
        let ratio = |res: usize| -> Result<f64> {
            let c = sample_cloud(&g, res, 0)?;
            let mut best = 0.0f64;
            for i in (0..c.len()).step_by((c.len() / 16).max(1)) {
                for r in [0.05, 0.1, 0.2, 0.4, 0.8] {
                    let m = measure_of_ball(&c, c.weights(), c.point(i), r)?;
                    best = best.max(m / r.powi(d as i32));
                }
            }
            Ok(best)
        };
        let (k, two_k) = if d == 1 { (32, 64) } else { (1024, 4096) };
        worst = worst.max(ratio(two_k)? / ratio(k)?);
    }
    Ok(CheckResult::at_most("upper_ahlfors_regularity", worst, 1.2, "max ratio(2k)/ratio(k) of sup H^d(B)/r^d"))
}

fn dminus_s_times_c_sd() -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for d in 1..=3usize {
        let s = d as f64 - 1e-4;
        worst = worst.max(rel((d as f64 - s) * c_sd(s, d)?, omega_d(d)?));
    }
    Ok(CheckResult::at_most("dminus_s_times_c_sd", worst, 1e-3, "(d-s) c(s,d) vs omega_d at d-s = 1e-4, d = 1,2,3"))
}

fn interval_lambda(res: usize) -> Result<DiscreteMeasure> {
    Ok(DiscreteMeasure::hausdorff(cloud(BuiltinKind::Interval, res)?))
}

fn layer_cake_consistency() -> Result<CheckResult> {
    let mu = interval_lambda(2000)?;
    let mut worst = 0.0f64;
    for s in [0.5, 0.9] {
        let lc = layer_cake_potential(&mu, &[0.0], s)?;
        let direct = normalized_potential(&mu, &[0.0], s)?;
        worst = worst.max(rel(lc, direct));
    }
    Ok(CheckResult::at_most("layer_cake_consistency", worst, 0.01, "layer-cake vs direct (d-s)U_s of lambda at 0, s = 0.5, 0.9"))
}

fn order_two_density_hinz() -> Result<CheckResult> {
    let mu = interval_lambda(20000)?;
    let density = order_two_density(&mu, &[0.0], 0.05, 1)?;
    let node = mu.cloud().nearest_node(&[0.0]);
    let ud = normalized_d_potential(&mu)[node];
    let err = rel(density, ud);
    Ok(CheckResult::at_most(
        "order_two_density_hinz",
        err,
        0.01,
        format!("d * order-two density {density:.5} vs U_d {ud:.5} at x = 0"),
    ))
}

fn normalized_potential_identity() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut worst = 0.0f64;
    for kind in BuiltinKind::ALL {
        let mu = random_measure(&cloud(kind, 300)?, &mut rng)?;
        let u = normalized_d_potential(&mu);
        let lhs = csum(mu.weights().iter().zip(&u).map(|(w, u)| w * u));
        worst = worst.max(rel(lhs, normalized_d_energy(&mu)));
    }
    Ok(CheckResult::at_most("normalized_potential_identity", worst, 1e-12, "sum_i w_i U_d(x_i) vs I_d"))
}

/// Fewest strict wins of `I_d(lambda)` over `trials` random perturbations, across all built-ins.
pub fn lambda_minimality_trials(res: usize, trials: usize, seed: u64) -> Result<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0;
    let mut losses = 0;
    for kind in BuiltinKind::ALL {
        let c = cloud(kind, res)?;
        let lam = DiscreteMeasure::hausdorff(c.clone());
        let e_lam = normalized_d_energy(&lam);
        for t in 0..trials {
            let eps = 10f64.powi(-((t % 6) as i32));
            let masses: Vec<f64> = lam.weights().iter().map(|w| w * (1.0 + eps * rng.gen_range(-0.9..0.9))).collect();
            let nu = DiscreteMeasure::normalized(c.clone(), masses)?;
            if !(e_lam < normalized_d_energy(&nu)) {
                losses += 1;
            }
            total += 1;
        }
    }
    Ok((total, losses))
}

fn lambda_minimizes_normalized_energy() -> Result<CheckResult> {
    let (total, losses) = lambda_minimality_trials(300, 100, 19)?;
    Ok(CheckResult::at_most(
        "lambda_minimizes_normalized_energy",
        losses as f64,
        0.0,
        format!("{total} perturbations; count where I_d(lambda) is not strictly smaller"),
    ))
}

fn bl_pseudometric() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let c = cloud(BuiltinKind::Torus, 400)?;
    let dict = BlDictionary::new(&c, 32, 5)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..30 {
        let (a, b, e) = (random_measure(&c, &mut rng)?, random_measure(&c, &mut rng)?, random_measure(&c, &mut rng)?);
        let (ab, ba) = (dict.distance(&a, &b)?, dict.distance(&b, &a)?);
        let (bc, ac) = (dict.distance(&b, &e)?, dict.distance(&a, &e)?);
        worst = worst.max((ab - ba).abs()).max(ac - ab - bc);
        worst = worst.max(dict.distance(&a, &a)?);
    }
    let asym = bl_distance(&DiscreteMeasure::hausdorff(c.clone()), &random_measure(&c, &mut rng)?, 16, 1)?;
    Ok(CheckResult::at_most(
        "bl_pseudometric",
        worst,
        1e-15,
        format!("max symmetry/triangle defect over 30 triples (sample distance {asym:.2e})"),
    ))
}

fn interval_solver_opts(seed: u64) -> SolverOptions {
    SolverOptions { gap_tol: GapTolerance::Absolute(1e-11), seed, ..Default::default() }
}

fn solver_monotone_objective() -> Result<CheckResult> {
    let c = cloud(BuiltinKind::Square, 400)?;
    let opts = SolverOptions { trace_every: Some(1), ..Default::default() };
    let sol = solve_equilibrium(c, 1.2, &opts)?;
    let worst = sol.trace.windows(2).map(|w| (w[1].objective - w[0].objective) / w[0].objective).fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckResult::at_most("solver_monotone_objective", worst, 1e-13, format!("max relative increase over {} steps", sol.trace.len())))
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Weight tolerance used by the solver invariance checks: ten times the gap tolerance.
const WEIGHT_TOL: f64 = 10.0 * 1e-11;

fn solver_relabeling_invariance() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let c = cloud(BuiltinKind::Interval, 200)?;
    let perm = shuffle(c.len(), &mut rng);
    let pc = Arc::new(c.permuted(&perm)?);
    let a = solve_equilibrium(c, 0.5, &interval_solver_opts(0))?;
    let b = solve_equilibrium(pc, 0.5, &interval_solver_opts(0))?;
    let back: Vec<f64> = perm.iter().map(|&i| a.measure.weights()[i]).collect();
    let err = l1(&back, b.measure.weights());
    Ok(CheckResult::at_most("solver_relabeling_invariance", err, WEIGHT_TOL, "L1 distance of weights after relabeling"))
}

fn solver_isometry_invariance() -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let c = cloud(BuiltinKind::Sphere2, 150)?;
    let r = rotation3(&mut rng);
    let t = [0.3, -1.0, 2.0];
    let moved = Arc::new(c.mapped(|x| apply3(&r, &t, x), 1.0)?);
    let opts = SolverOptions { gap_tol: GapTolerance::Absolute(1e-11), ..Default::default() };
    let a = solve_equilibrium(c, 1.0, &opts)?;
    let b = solve_equilibrium(moved, 1.0, &opts)?;
    let err = l1(a.measure.weights(), b.measure.weights());
    Ok(CheckResult::at_most("solver_isometry_invariance", err, WEIGHT_TOL, "L1 distance of weights after a rigid motion of S^2"))
}

fn solver_uniqueness() -> Result<CheckResult> {
    let c = cloud(BuiltinKind::Interval, 200)?;
    let a = solve_equilibrium(c.clone(), 0.5, &interval_solver_opts(1))?;
    let b = solve_equilibrium(c, 0.5, &interval_solver_opts(2))?;
    let err = l1(a.measure.weights(), b.measure.weights());
    Ok(CheckResult::at_most(
        "solver_uniqueness",
        err,
        WEIGHT_TOL,
        format!("start vertices {} and {}", a.initial_vertex, b.initial_vertex),
    ))
}

fn solver_beats_uniform() -> Result<CheckResult> {
    let mut worst = f64::NEG_INFINITY;
    for (kind, s) in [(BuiltinKind::Interval, 0.5), (BuiltinKind::Square, 1.5), (BuiltinKind::Torus, 1.0)] {
        let c = cloud(kind, 400)?;
        let sol = solve_equilibrium(c.clone(), s, &SolverOptions::default())?;
        let lam = c.normalized_weights();
        let k = KernelMatrix::new(&c, s, &crate::energy::diagonal_entries(&c, s, DiagonalPolicy::CellCorrected)?);
        let (e_w, e_l) = (k.quadratic_form(sol.measure.weights()), k.quadratic_form(&lam));
        let margin = if kind == BuiltinKind::Interval { (e_w - e_l) / e_l } else { (e_w - e_l) / e_l - 1e-14 };
        worst = worst.max(margin);
    }
    Ok(CheckResult::at_most("solver_beats_uniform", worst, 0.0, "max (w'Kw - l'Kl)/l'Kl; strict on the interval"))
}

fn frostman_circle() -> Result<CheckResult> {
    let c = cloud(BuiltinKind::Circle, 1000)?;
    let opts = SolverOptions { gap_tol: GapTolerance::Absolute(1e-8), ..Default::default() };
    let sol = solve_equilibrium(c, 0.5, &opts)?;
    let stats = frostman_check(&sol, 0.1)?;
    Ok(CheckResult::at_most("frostman_circle", stats.relative_stdev(), 0.01, "stdev/mean of U_s on the support, s = 0.5"))
}

fn rotated_square(theta: f64) -> Result<Geometry> {
    let (c, s) = (theta.cos(), theta.sin());
    affine_square([[c, -s], [s, c]])
}

fn descent_isometry_equivariance() -> Result<CheckResult> {
    let g0 = Arc::new(rotated_square(0.0)?);
    let g1 = Arc::new(rotated_square(0.7)?);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let init0 = random_configuration(&g0, 12, &mut rng)?;
    let init1 = crate::energy::Configuration::from_chart_coords(g1, init0.charts().to_vec(), init0.params().to_vec())?;
    let opts = DescentOptions { restarts: 1, max_iters: 400, ..Default::default() };
    let a = minimize_config_from(&init0, 1.0, &opts)?;
    let b = minimize_config_from(&init1, 1.0, &opts)?;
    Ok(CheckResult::at_most("descent_isometry_equivariance", rel(b.energy, a.energy), 1e-10, "energy after descent on a rotated square"))
}
