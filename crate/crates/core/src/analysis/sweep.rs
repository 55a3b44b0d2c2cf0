use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bl::{BlDictionary, DEFAULT_DICTIONARY_SIZE};
use super::functionals::{check_grid, extrapolate_normalized, Extrapolation};
use crate::energy::{serialize_extended, DiscreteMeasure};
use crate::equilibrium::{frostman_check, solve_equilibrium, SolverOptions, DEFAULT_SUPPORT_QUANTILE};
use crate::error::Result;
use crate::geometry::{sample_cloud, Geometry, WeightedPointCloud};

/// `{0.5, 0.7, 0.8, 0.9, 0.95} * d`.
pub fn default_s_grid(d: usize) -> Vec<f64> {
    [0.5, 0.7, 0.8, 0.9, 0.95].iter().map(|f| f * d as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    pub dictionary_size: usize,
    pub dictionary_seed: u64,
    pub cloud_seed: u64,
    pub support_quantile: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            dictionary_size: DEFAULT_DICTIONARY_SIZE,
            dictionary_seed: 0,
            cloud_seed: 0,
            support_quantile: DEFAULT_SUPPORT_QUANTILE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub s: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub energy: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub normalized: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub bl_distance: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub potential_stdev_over_mean: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub solver_gap: f64,
    pub gap_tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub flags: Vec<String>,
    pub error: Option<String>,
    /// Wall-clock seconds; kept out of serialized output so reruns are byte-identical.
    #[serde(skip)]
    pub runtime: f64,
}

impl SweepRow {
    fn failed(s: f64, err: String, runtime: f64) -> Self {
        Self {
            s,
            energy: f64::NAN,
            normalized: f64::NAN,
            bl_distance: f64::NAN,
            potential_stdev_over_mean: f64::NAN,
            solver_gap: f64::NAN,
            gap_tol: f64::NAN,
            iterations: 0,
            converged: false,
            flags: vec!["error".into()],
            error: Some(err),
            runtime,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub geometry: String,
    pub intrinsic_dim: usize,
    pub resolution: usize,
    pub node_count: usize,
    pub options: SweepOptions,
    pub tool_version: String,
    pub rows: Vec<SweepRow>,
    /// Extrapolated `(d - s) I_s` at `s = d`, when at least three rows succeeded.
    pub normalized_limit: Option<Extrapolation>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "s,I_s,normalized,bl_distance,potential_stdev_over_mean,solver_gap,gap_tol,iterations,converged,flags,policy,resolution";

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        let policy = self.options.solver.policy.name();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.s,
                r.energy,
                r.normalized,
                r.bl_distance,
                r.potential_stdev_over_mean,
                r.solver_gap,
                r.gap_tol,
                r.iterations,
                r.converged,
                r.flags.join(";"),
                policy,
                self.resolution
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn sweep_row(cloud: &Arc<WeightedPointCloud>, dict: &BlDictionary, lambda: &DiscreteMeasure, s: f64, opts: &SweepOptions) -> SweepRow {
    let start = Instant::now();
    let run = || -> Result<SweepRow> {
        let sol = solve_equilibrium(cloud.clone(), s, &opts.solver)?;
        let stats = frostman_check(&sol, opts.support_quantile)?;
        let bl = dict.distance(&sol.measure, lambda)?;
        Ok(SweepRow {
            s,
            energy: sol.energy.value,
            normalized: sol.energy.normalized,
            bl_distance: bl,
            potential_stdev_over_mean: stats.relative_stdev(),
            solver_gap: sol.gap,
            gap_tol: sol.gap_tol,
            iterations: sol.iterations,
            converged: sol.converged,
            flags: sol.flags,
            error: None,
            runtime: 0.0,
        })
    };
    match run() {
        Ok(mut row) => {
            row.runtime = start.elapsed().as_secs_f64();
            row
        }
        Err(e) => SweepRow::failed(s, e.to_string(), start.elapsed().as_secs_f64()),
    }
}

/// Equilibrium measures along an increasing `s` grid on one cloud.
///
/// Rows are solved concurrently and returned in grid order. A failing solve
/// becomes a row with `error` set; the sweep itself fails only on invalid
/// input.
pub fn sweep_s(geom: &Geometry, resolution: usize, s_grid: &[f64], opts: &SweepOptions) -> Result<SweepResult> {
    let cloud = Arc::new(sample_cloud(geom, resolution, opts.cloud_seed)?);
    sweep_cloud(geom.name.clone(), resolution, cloud, s_grid, opts)
}

/// [`sweep_s`] on a prebuilt cloud.
pub fn sweep_cloud(
    name: String,
    resolution: usize,
    cloud: Arc<WeightedPointCloud>,
    s_grid: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    let d = cloud.intrinsic_dim();
    check_grid(s_grid, d)?;
    opts.solver.validate()?;
    let dict = BlDictionary::new(&cloud, opts.dictionary_size, opts.dictionary_seed)?;
    let lambda = DiscreteMeasure::hausdorff(cloud.clone());
    let rows: Vec<SweepRow> = s_grid.par_iter().map(|&s| sweep_row(&cloud, &dict, &lambda, s, opts)).collect();
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    let normalized_limit = if ok.len() >= 3 {
        let s: Vec<f64> = ok.iter().map(|r| r.s).collect();
        let v: Vec<f64> = ok.iter().map(|r| r.normalized).collect();
        extrapolate_normalized(&s, &v, d).ok()
    } else {
        None
    };
    Ok(SweepResult {
        geometry: name,
        intrinsic_dim: d,
        resolution,
        node_count: cloud.len(),
        options: opts.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        rows,
        normalized_limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_builtin, BuiltinKind, BuiltinParams};

    #[test]
    fn interval_sweep_trends() {
        let g = make_builtin(BuiltinKind::Interval, &BuiltinParams::new()).unwrap();
        let r = sweep_s(&g, 400, &default_s_grid(1), &SweepOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 5);
        for w in r.rows.windows(2) {
            assert!(w[1].bl_distance < w[0].bl_distance, "{} !< {}", w[1].bl_distance, w[0].bl_distance);
        }
        let lim = r.normalized_limit.as_ref().unwrap();
        assert!((lim.limit - 1.0).abs() < 0.05, "{}", lim.limit);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
    }

    #[test]
    fn bad_rows_are_recorded() {
        let g = make_builtin(BuiltinKind::Circle, &BuiltinParams::new()).unwrap();
        let opts = SweepOptions {
            solver: SolverOptions { max_iters: Some(3), ..Default::default() },
            ..Default::default()
        };
        let r = sweep_s(&g, 100, &[0.5, 0.9], &opts).unwrap();
        assert!(r.rows.iter().all(|row| row.flags.iter().any(|f| f == "max_iters")));
        assert!(sweep_s(&g, 100, &[0.9, 0.5], &opts).is_err());
    }
}
