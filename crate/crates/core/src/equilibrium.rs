//! Discrete `s`-equilibrium measures: minimize `w^T K w` over the probability
//! simplex on a quadrature cloud.
//!
//! The solver is the away-step conditional-gradient method. It keeps `Kw`
//! and `w^T K w` up to date with one kernel row per iteration, so each step
//! costs `O(n)` once the dense kernel matrix is built.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;

use crate::energy::{
    diagonal_entries, kernel_from_dist2, measure_energy, serialize_extended, DiagonalPolicy, DiscreteMeasure,
    EnergyReport,
};
use crate::error::{check_exponent, Error, Result};
use crate::geometry::WeightedPointCloud;
use crate::numeric::{csum, dist2, CompensatedSum};

/// Stopping threshold on the conditional-gradient gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum GapTolerance {
    Absolute(f64),
    /// Multiple of the objective at the initial vertex.
    RelativeToInitial(f64),
}

impl Default for GapTolerance {
    fn default() -> Self {
        GapTolerance::RelativeToInitial(1e-8)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    #[default]
    ExactLineSearch,
    /// Classical `2/(k+2)` schedule; toward-vertex steps only.
    Fixed2OverKPlus2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Iteration cap; `None` means `200 n`.
    pub max_iters: Option<usize>,
    pub gap_tol: GapTolerance,
    pub step_rule: StepRule,
    /// Selects the starting vertex.
    pub seed: u64,
    pub policy: DiagonalPolicy,
    /// Record `(iteration, objective, gap)` every this many iterations.
    pub trace_every: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iters: None,
            gap_tol: GapTolerance::default(),
            step_rule: StepRule::default(),
            seed: 0,
            policy: DiagonalPolicy::CellCorrected,
            trace_every: None,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == Some(0) {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        let tol = match self.gap_tol {
            GapTolerance::Absolute(t) | GapTolerance::RelativeToInitial(t) => t,
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("gap_tol must be positive, got {tol}")));
        }
        if self.trace_every == Some(0) {
            return Err(Error::InvalidParameter("trace_every must be at least 1".into()));
        }
        if self.policy == DiagonalPolicy::Atomic {
            return Err(Error::Unsupported("the atomic policy has an infinite diagonal".into()));
        }
        Ok(())
    }
}

/// Dense symmetric kernel matrix `K_ij = |x_i - x_j|^{-s}` with a policy diagonal.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(cloud: &WeightedPointCloud, s: f64, diagonal: &[f64]) -> Self {
        let n = cloud.len();
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let xi = cloud.point(i);
            for (j, k) in row.iter_mut().enumerate() {
                *k = if i == j { diagonal[i] } else { kernel_from_dist2(dist2(xi, cloud.point(j)), s) };
            }
        });
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        csum((0..self.n).map(|i| self.get(i, i)))
    }

    fn add_to_diagonal(&mut self, diagonal: &[f64]) {
        for (i, d) in diagonal.iter().enumerate() {
            self.data[i * self.n + i] = *d;
        }
    }

    /// `K w`, skipping zero weights; each entry is a compensated sum.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let support: Vec<usize> = (0..self.n).filter(|&j| w[j] != 0.0).collect();
        (0..self.n)
            .into_par_iter()
            .map(|i| {
                let row = self.row(i);
                let mut acc = CompensatedSum::new();
                for &j in &support {
                    acc.add(row[j] * w[j]);
                }
                acc.value()
            })
            .collect()
    }

    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let kw = self.apply(w);
        csum(w.iter().zip(&kw).map(|(a, b)| a * b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PotentialStats {
    pub mean: f64,
    pub stdev: f64,
    /// Largest `|U_i - mean|` over the retained nodes.
    pub max_dev: f64,
    pub count: usize,
}

impl PotentialStats {
    pub fn relative_stdev(&self) -> f64 {
        self.stdev / self.mean
    }
}

/// Support proxy used for the stored potential statistics.
pub const DEFAULT_SUPPORT_QUANTILE: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct EquilibriumSolution {
    pub measure: DiscreteMeasure,
    pub energy: EnergyReport,
    pub s: f64,
    /// Final conditional-gradient gap `max_v (2Kw)^T (w - e_v)`.
    pub gap: f64,
    pub gap_tol: f64,
    /// `(K w)_i` at every node, including the diagonal term.
    pub potentials: Vec<f64>,
    pub potential_stats: PotentialStats,
    pub iterations: usize,
    pub converged: bool,
    /// Policy actually used for `K` (differs from the request after a fallback).
    pub effective_policy: DiagonalPolicy,
    pub ridge: f64,
    pub initial_vertex: usize,
    pub flags: Vec<String>,
    pub trace: Vec<TracePoint>,
}

#[derive(Serialize)]
struct SolutionRecord<'a> {
    s: f64,
    energy: &'a EnergyReport,
    #[serde(serialize_with = "serialize_extended")]
    gap: f64,
    gap_tol: f64,
    iterations: usize,
    converged: bool,
    effective_policy: DiagonalPolicy,
    ridge: f64,
    initial_vertex: usize,
    flags: &'a [String],
    potential_stats: &'a PotentialStats,
    weights: &'a [f64],
    trace: &'a [TracePoint],
}

impl EquilibriumSolution {
    pub fn to_json(&self) -> Result<String> {
        let rec = SolutionRecord {
            s: self.s,
            energy: &self.energy,
            gap: self.gap,
            gap_tol: self.gap_tol,
            iterations: self.iterations,
            converged: self.converged,
            effective_policy: self.effective_policy,
            ridge: self.ridge,
            initial_vertex: self.initial_vertex,
            flags: &self.flags,
            potential_stats: &self.potential_stats,
            weights: self.measure.weights(),
            trace: &self.trace,
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    /// Columns `x_1..x_p, weight, density, potential`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let cloud = self.measure.cloud();
        let p = cloud.dim();
        let header: Vec<String> = (1..=p).map(|k| format!("x_{k}")).collect();
        writeln!(out, "{},weight,density,potential", header.join(","))?;
        let density = self.measure.density();
        for i in 0..cloud.len() {
            let coords: Vec<String> = cloud.point(i).iter().map(|v| v.to_string()).collect();
            writeln!(
                out,
                "{},{},{},{}",
                coords.join(","),
                self.measure.weights()[i],
                density[i],
                self.potentials[i]
            )?;
        }
        Ok(())
    }
}

enum Outcome {
    Done,
    NegativeCurvature,
}

struct State {
    w: Vec<f64>,
    g: Vec<f64>,
    f: f64,
}

impl State {
    fn refresh(&mut self, k: &KernelMatrix) {
        self.g = k.apply(&self.w);
        self.f = csum(self.w.iter().zip(&self.g).map(|(a, b)| a * b));
    }

    /// `(argmin_v g_v, argmax_{a in supp} g_a)`, lowest index on ties.
    fn extreme_vertices(&self) -> (usize, usize) {
        let mut v = 0;
        let mut a = usize::MAX;
        for i in 0..self.g.len() {
            if self.g[i] < self.g[v] {
                v = i;
            }
            if self.w[i] > 0.0 && (a == usize::MAX || self.g[i] > self.g[a]) {
                a = i;
            }
        }
        (v, a)
    }

    fn gap(&self, v: usize) -> f64 {
        (2.0 * (self.f - self.g[v])).max(0.0)
    }
}

struct RunResult {
    iterations: usize,
    gap: f64,
    converged: bool,
    outcome: Outcome,
}

fn run(
    k: &KernelMatrix,
    st: &mut State,
    tol: f64,
    max_iters: usize,
    first_iter: usize,
    opts: &SolverOptions,
    trace: &mut Vec<TracePoint>,
) -> RunResult {
    let n = k.len();
    let refresh_every = n.max(1000);
    let mut it = first_iter;
    let mut since_refresh = 0;
    loop {
        let (v, a) = st.extreme_vertices();
        let mut gap = st.gap(v);
        if gap <= tol {
            // confirm against freshly computed gradients before stopping
            st.refresh(k);
            let (v2, _) = st.extreme_vertices();
            gap = st.gap(v2);
            if gap <= tol {
                return RunResult { iterations: it, gap, converged: true, outcome: Outcome::Done };
            }
            continue;
        }
        if let Some(every) = opts.trace_every {
            if it.is_multiple_of(every) {
                trace.push(TracePoint { iteration: it, objective: st.f, gap });
            }
        }
        if it >= max_iters {
            return RunResult { iterations: it, gap, converged: false, outcome: Outcome::Done };
        }
        it += 1;

        let fw_gain = st.f - st.g[v];
        let away_gain = st.g[a] - st.f;
        let use_away = opts.step_rule == StepRule::ExactLineSearch && away_gain > fw_gain && st.w[a] < 1.0;
        if use_away {
            let kaa = k.get(a, a);
            let curv = st.f - 2.0 * st.g[a] + kaa;
            if curv <= 0.0 {
                return RunResult { iterations: it, gap, converged: false, outcome: Outcome::NegativeCurvature };
            }
            let gmax = st.w[a] / (1.0 - st.w[a]);
            let drop = away_gain / curv >= gmax;
            let gamma = if drop { gmax } else { away_gain / curv };
            let ga = st.g[a];
            let wa = st.w[a];
            let row = k.row(a);
            for i in 0..n {
                st.w[i] *= 1.0 + gamma;
                st.g[i] = (1.0 + gamma) * st.g[i] - gamma * row[i];
            }
            st.w[a] = if drop { 0.0 } else { ((1.0 + gamma) * wa - gamma).max(0.0) };
            st.f = (1.0 + gamma) * (1.0 + gamma) * st.f - 2.0 * gamma * (1.0 + gamma) * ga + gamma * gamma * kaa;
        } else {
            let kvv = k.get(v, v);
            let curv = kvv - 2.0 * st.g[v] + st.f;
            let gamma = match opts.step_rule {
                StepRule::ExactLineSearch => {
                    if curv <= 0.0 {
                        return RunResult {
                            iterations: it,
                            gap,
                            converged: false,
                            outcome: Outcome::NegativeCurvature,
                        };
                    }
                    (fw_gain / curv).min(1.0)
                }
                StepRule::Fixed2OverKPlus2 => 2.0 / (it as f64 + 2.0),
            };
            let gv = st.g[v];
            let row = k.row(v);
            for i in 0..n {
                st.w[i] *= 1.0 - gamma;
                st.g[i] = (1.0 - gamma) * st.g[i] + gamma * row[i];
            }
            st.w[v] += gamma;
            st.f = (1.0 - gamma) * (1.0 - gamma) * st.f + 2.0 * gamma * (1.0 - gamma) * gv + gamma * gamma * kvv;
        }
        since_refresh += 1;
        if since_refresh >= refresh_every {
            st.refresh(k);
            since_refresh = 0;
        }
    }
}

fn resolve_tol(opts: &SolverOptions, initial_objective: f64) -> f64 {
    match opts.gap_tol {
        GapTolerance::Absolute(t) => t,
        GapTolerance::RelativeToInitial(r) => r * initial_objective,
    }
}

/// Minimize the discretized energy over probability weights on `cloud`.
///
/// Requires `0 < s < d`. A run that hits `max_iters` is returned with
/// `converged = false` and a `max_iters` flag rather than as an error.
pub fn solve_equilibrium(cloud: Arc<WeightedPointCloud>, s: f64, opts: &SolverOptions) -> Result<EquilibriumSolution> {
    check_exponent(s)?;
    opts.validate()?;
    let d = cloud.intrinsic_dim();
    if s >= d as f64 {
        return Err(Error::ExponentOutOfRange { s, range: format!("(0, {d})") });
    }
    let n = cloud.len();
    let max_iters = opts.max_iters.unwrap_or(200 * n);
    let mut flags = Vec::new();

    let mut policy = opts.policy;
    let mut ridge = 0.0;
    let mut diag = diagonal_entries(&cloud, s, policy)?;
    if policy == DiagonalPolicy::ExcludeDiagonal {
        // a zero diagonal is indefinite; a tiny ridge keeps the line search well posed
        let cc = diagonal_entries(&cloud, s, DiagonalPolicy::CellCorrected)?;
        ridge = 1e-12 * csum(cc.iter().copied()) / n as f64;
        diag.iter_mut().for_each(|x| *x = ridge);
        flags.push("ridge".to_string());
    }
    let mut k = KernelMatrix::new(&cloud, s, &diag);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let initial_vertex = rng.gen_range(0..n);
    let mut w = vec![0.0; n];
    w[initial_vertex] = 1.0;
    let g = k.row(initial_vertex).to_vec();
    let f = g[initial_vertex];
    let tol = resolve_tol(opts, f);
    let mut st = State { w, g, f };
    let mut trace = Vec::new();

    let mut res = run(&k, &mut st, tol, max_iters, 0, opts, &mut trace);
    if let Outcome::NegativeCurvature = res.outcome {
        log::warn!("kernel matrix is not positive definite along a step; refitting with exclude_diagonal plus ridge");
        flags.push("non_pd_fallback".to_string());
        let trace_k = k.trace();
        ridge = 1e-12 * trace_k / n as f64;
        policy = DiagonalPolicy::ExcludeDiagonal;
        k.add_to_diagonal(&vec![ridge; n]);
        st.refresh(&k);
        res = run(&k, &mut st, tol, max_iters, res.iterations, opts, &mut trace);
        if let Outcome::NegativeCurvature = res.outcome {
            flags.push("negative_curvature".to_string());
        }
    }
    if !res.converged {
        flags.push("max_iters".to_string());
    }

    let measure = DiscreteMeasure::normalized(cloud, st.w)?;
    let potentials = k.apply(measure.weights());
    let potential_stats = support_stats(measure.weights(), &potentials, DEFAULT_SUPPORT_QUANTILE)?;
    let energy = measure_energy(&measure, s, policy)?;
    Ok(EquilibriumSolution {
        measure,
        energy,
        s,
        gap: res.gap,
        gap_tol: tol,
        potentials,
        potential_stats,
        iterations: res.iterations,
        converged: res.converged,
        effective_policy: policy,
        ridge,
        initial_vertex,
        flags,
        trace,
    })
}

fn support_stats(w: &[f64], u: &[f64], quantile: f64) -> Result<PotentialStats> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidParameter(format!("quantile must lie in [0, 1], got {quantile}")));
    }
    let mut positive: Vec<f64> = w.iter().copied().filter(|x| *x > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::EmptySupport);
    }
    positive.sort_by(f64::total_cmp);
    let idx = ((positive.len() - 1) as f64 * quantile).floor() as usize;
    let threshold = positive[idx];
    let kept: Vec<f64> = w.iter().zip(u).filter(|(wi, _)| **wi >= threshold && **wi > 0.0).map(|(_, ui)| *ui).collect();
    if kept.is_empty() {
        return Err(Error::EmptySupport);
    }
    let m = kept.len() as f64;
    let mean = csum(kept.iter().copied()) / m;
    let var = csum(kept.iter().map(|x| (x - mean) * (x - mean))) / m;
    let max_dev = kept.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    Ok(PotentialStats { mean, stdev: var.sqrt(), max_dev, count: kept.len() })
}

/// Potential statistics over nodes whose weight is at least the given
/// quantile of the positive weights.
pub fn frostman_check(sol: &EquilibriumSolution, quantile: f64) -> Result<PotentialStats> {
    support_stats(sol.measure.weights(), &sol.potentials, quantile)
}

/// `(x_i, w_i / h_i)` for every node.
pub fn equilibrium_density(sol: &EquilibriumSolution) -> Vec<(Vec<f64>, f64)> {
    let cloud = sol.measure.cloud();
    sol.measure.density().into_iter().enumerate().map(|(i, rho)| (cloud.point(i).to_vec(), rho)).collect()
}

fn check_interval_exponent(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange { s, range: "(0, 1)".into() })
    }
}

/// Normalizer `c_s = Gamma(1 + s/2) / (sqrt(pi) Gamma((1 + s)/2))` of the
/// equilibrium density on `[-1, 1]`.
pub fn interval_normalizer(s: f64) -> Result<f64> {
    check_interval_exponent(s)?;
    Ok(gamma(1.0 + 0.5 * s) / (std::f64::consts::PI.sqrt() * gamma(0.5 * (1.0 + s))))
}

/// Equilibrium density `c_s (1 - x^2)^{(s-1)/2}` on `[-1, 1]`; `+inf` at the endpoints.
pub fn interval_equilibrium_exact(s: f64, x: f64) -> Result<f64> {
    let c = interval_normalizer(s)?;
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!("x = {x} lies outside [-1, 1]")));
    }
    if x.abs() == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(c * (1.0 - x * x).powf(0.5 * (s - 1.0)))
}

/// Equilibrium mass of `[a, b]` on `[-1, 1]`.
pub fn interval_equilibrium_mass(s: f64, a: f64, b: f64) -> Result<f64> {
    check_interval_exponent(s)?;
    if !(-1.0 <= a && a <= b && b <= 1.0) {
        return Err(Error::InvalidParameter(format!("[{a}, {b}] is not a subinterval of [-1, 1]")));
    }
    let alpha = 0.5 * (s + 1.0);
    let cdf = |x: f64| beta_reg(alpha, alpha, (0.5 * (x + 1.0)).clamp(0.0, 1.0));
    Ok(cdf(b) - cdf(a))
}

/// `I_s(mu^s) = c_s pi / cos(pi s / 2)` on `[-1, 1]`.
pub fn interval_equilibrium_energy(s: f64) -> Result<f64> {
    let c = interval_normalizer(s)?;
    Ok(c * std::f64::consts::PI / (0.5 * std::f64::consts::PI * s).cos())
}
