use std::path::PathBuf;

use riesz_core::geometry::{make_builtin, BuiltinKind, BuiltinParams, Geometry};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SolveEquilibrium,
    MinimizeConfig,
    SweepS,
    Validate,
}

/// A built-in by name, a built-in with parameters, or a full chart atlas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeometrySpec {
    Name(String),
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BuiltinParams,
    },
    Atlas(Geometry),
}

impl GeometrySpec {
    pub fn build(&self) -> riesz_core::Result<Geometry> {
        match self {
            GeometrySpec::Name(name) => make_builtin(name.parse::<BuiltinKind>()?, &BuiltinParams::new()),
            GeometrySpec::Builtin { builtin, params } => make_builtin(builtin.parse::<BuiltinKind>()?, params),
            GeometrySpec::Atlas(g) => {
                g.validate()?;
                Ok(g.clone())
            }
        }
    }
}

/// One run: `{task, geometry, resolution, s | s_grid, N, solver_opts, seed, out_dir}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Task-specific options; parsed once the task is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_opts: Option<Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Only used by the `validate` task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
}

/// A config problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl RunConfig {
    /// Parse a config document; syntax errors carry line and column.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })
    }

    pub fn require_geometry(&self) -> Result<Geometry, ConfigError> {
        let spec = self.geometry.as_ref().ok_or_else(|| ConfigError("`geometry` is required".into()))?;
        spec.build().map_err(|e| ConfigError(format!("geometry: {e}")))
    }

    pub fn require_resolution(&self) -> Result<usize, ConfigError> {
        match self.resolution {
            Some(r) if r >= 2 => Ok(r),
            Some(r) => Err(ConfigError(format!("`resolution` must be at least 2, got {r}"))),
            None => Err(ConfigError("`resolution` is required".into())),
        }
    }

    pub fn require_s(&self) -> Result<f64, ConfigError> {
        match self.s {
            Some(s) if s.is_finite() && s > 0.0 => Ok(s),
            Some(s) => Err(ConfigError(format!("`s` must be positive, got {s}"))),
            None => Err(ConfigError("`s` is required".into())),
        }
    }

    /// Decode `solver_opts` into `T`, filling `seed` from the top level when absent.
    pub fn options<T: serde::de::DeserializeOwned + Default>(&self, seed_key: Option<&str>) -> Result<T, ConfigError> {
        let mut value = self.solver_opts.clone().unwrap_or_else(|| Value::Object(Default::default()));
        if let (Some(key), Value::Object(map)) = (seed_key, &mut value) {
            map.entry(key).or_insert(Value::from(self.seed));
        }
        serde_json::from_value(value).map_err(|e| ConfigError(format!("solver_opts: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use riesz_core::equilibrium::SolverOptions;

    #[test]
    fn parses_all_geometry_forms() {
        let a = RunConfig::parse(r#"{"task":"sweep-s","geometry":"interval","resolution":10}"#, "a").unwrap();
        assert_eq!(a.require_geometry().unwrap().intrinsic_dim, 1);
        let b = RunConfig::parse(
            r#"{"task":"solve-equilibrium","geometry":{"builtin":"torus","params":{"major":3}}}"#,
            "b",
        )
        .unwrap();
        assert_eq!(b.require_geometry().unwrap().ambient_dim, 3);
        let atlas = make_builtin(BuiltinKind::Square, &BuiltinParams::new()).unwrap().to_json().unwrap();
        let c = RunConfig::parse(&format!(r#"{{"task":"validate","geometry":{atlas}}}"#), "c").unwrap();
        assert_eq!(c.require_geometry().unwrap().name, "square");
    }

    #[test]
    fn syntax_errors_have_positions() {
        let err = RunConfig::parse("{\n  \"task\": \"validate\",\n  oops\n}", "cfg.json").unwrap_err();
        assert!(err.0.starts_with("cfg.json:3:3:"), "{}", err.0);
        assert!(RunConfig::parse(r#"{"task":"validate","bogus":1}"#, "x").is_err());
    }

    #[test]
    fn top_level_seed_fills_solver_seed() {
        let cfg = RunConfig::parse(r#"{"task":"solve-equilibrium","seed":9,"solver_opts":{"max_iters":5}}"#, "x").unwrap();
        let opts: SolverOptions = cfg.options(Some("seed")).unwrap();
        assert_eq!((opts.seed, opts.max_iters), (9, Some(5)));
        let bad = RunConfig::parse(r#"{"task":"solve-equilibrium","solver_opts":{"nope":1}}"#, "x").unwrap();
        assert!(bad.options::<SolverOptions>(Some("seed")).is_err());
    }
}
