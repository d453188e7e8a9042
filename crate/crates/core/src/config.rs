//! Run configuration: a flat TOML document plus `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::case_studies::{default_gammas, CurveMode};
use crate::error::{Error, Result};
use crate::model::{IncrementModel, TabulatedDensity};
use crate::oracles::McConfig;
use crate::risk::{BbarBound, RiskParams};
use crate::solvers::AutoGrid;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AutoOr {
    Num(f64),
    Word(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: String,
    mu: Option<f64>,
    lambda: Option<f64>,
    d: Option<f64>,
    density_csv: Option<PathBuf>,
    beta: Option<f64>,
    gamma: Option<f64>,
    gammas: Option<Vec<f64>>,
    gamma_max: Option<f64>,
    n_gammas: Option<usize>,
    step: Option<AutoOr>,
    x_max: Option<AutoOr>,
    horizon: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    mc_outer: Option<usize>,
    mc_inner: Option<usize>,
    seed: Option<u64>,
    points: Option<Vec<f64>>,
    fixed_point_threshold: Option<f64>,
    output_dir: Option<PathBuf>,
    curve_mode: Option<String>,
    family_param: Option<String>,
    family_values: Option<Vec<f64>>,
}

/// Model parameters as written in the config, before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    DoubleExponential { mu: f64 },
    LeftExponential { lambda: f64, d: f64 },
    Tabulated { path: PathBuf },
}

impl ModelSpec {
    pub fn build(&self) -> Result<IncrementModel> {
        let m = match self {
            ModelSpec::DoubleExponential { mu } => IncrementModel::double_exponential(*mu)?,
            ModelSpec::LeftExponential { lambda, d } => IncrementModel::left_exponential(*lambda, *d)?,
            ModelSpec::Tabulated { path } => IncrementModel::from_tabulated(TabulatedDensity::from_csv(path)?),
        };
        m.ensure_valid()?;
        Ok(m)
    }

    fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        Ok(match (self, name) {
            (ModelSpec::DoubleExponential { .. }, "mu") => ModelSpec::DoubleExponential { mu: value },
            (ModelSpec::LeftExponential { d, .. }, "lambda") => ModelSpec::LeftExponential { lambda: value, d: *d },
            (ModelSpec::LeftExponential { lambda, .. }, "d") => ModelSpec::LeftExponential { lambda: *lambda, d: value },
            _ => return Err(Error::Config(format!("family_param '{name}' does not apply to this model"))),
        })
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_spec: ModelSpec,
    pub model: IncrementModel,
    /// (label, model) for each family member; empty without a family
    pub family: Vec<(String, IncrementModel)>,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub gammas: Vec<f64>,
    pub grid: AutoGrid,
    pub horizon: usize,
    pub tol: f64,
    /// sweep limit for value iteration; default from the contraction bound
    pub max_iter: Option<usize>,
    pub mc: McConfig,
    pub points: Option<Vec<f64>>,
    pub fixed_point_threshold: f64,
    pub output_dir: PathBuf,
    pub curve_mode: CurveMode,
}

impl RunConfig {
    /// Reads `path`, applies overrides and validates everything.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with(&text, base, overrides)
    }

    /// Parses config text; relative paths are taken relative to `base`.
    pub fn from_str_with(text: &str, base: &Path, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not of the form key=value")))?;
            table.insert(key.trim().to_string(), parse_override(value.trim()));
        }
        let raw: RawConfig = table.try_into().map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        Self::validate(raw, base)
    }

    fn validate(raw: RawConfig, base: &Path) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("model '{}' needs '{name}'", raw.model)));
        let model_spec = match raw.model.as_str() {
            "double_exponential" => ModelSpec::DoubleExponential { mu: need(raw.mu, "mu")? },
            "left_exponential" => ModelSpec::LeftExponential { lambda: need(raw.lambda, "lambda")?, d: need(raw.d, "d")? },
            "tabulated" => {
                let p = raw.density_csv.clone().ok_or_else(|| Error::Config("model 'tabulated' needs 'density_csv'".into()))?;
                let path = if p.is_absolute() { p } else { base.join(p) };
                if !path.is_file() {
                    return Err(Error::Config(format!("density file {} does not exist", path.display())));
                }
                ModelSpec::Tabulated { path }
            }
            other => return Err(Error::Config(format!("unknown model '{other}'"))),
        };
        let model = model_spec.build().map_err(as_config)?;

        let family = match (&raw.family_param, &raw.family_values) {
            (None, None) => Vec::new(),
            (Some(name), Some(values)) if !values.is_empty() => values
                .iter()
                .map(|&v| {
                    let m = model_spec.with_param(name, v)?.build().map_err(as_config)?;
                    Ok((format!("{name}_{}", crate::format::num(v)), m))
                })
                .collect::<Result<Vec<_>>>()?,
            _ => return Err(Error::Config("family_param and a nonempty family_values go together".into())),
        };

        let beta = raw.beta.unwrap_or(0.99);
        RiskParams::new(beta, 0.0).map_err(as_config)?;
        if let Some(g) = raw.gamma {
            RiskParams::new(beta, g).map_err(as_config)?;
        }
        let gammas = match raw.gammas {
            Some(g) => g,
            None => default_gammas(raw.gamma_max.unwrap_or(10.0), raw.n_gammas.unwrap_or(30)),
        };
        if gammas.is_empty() {
            return Err(Error::Config("gamma list is empty".into()));
        }
        if gammas.iter().any(|g| !(*g >= 0.0 && g.is_finite())) || gammas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("gammas must be finite, nonnegative and strictly increasing".into()));
        }

        let step = auto_or(raw.step, "step")?;
        let x_max = auto_or(raw.x_max, "x_max")?;
        if let Some(h) = step {
            if !(h > 0.0) {
                return Err(Error::Config(format!("step must be positive, got {h}")));
            }
        }
        if let Some(x) = x_max {
            if !(x > 0.0) {
                return Err(Error::Config(format!("x_max must be positive, got {x}")));
            }
        }
        let tol = raw.tol.unwrap_or(1e-8);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("tol must be positive, got {tol}")));
        }
        if raw.max_iter == Some(0) {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        let horizon = raw.horizon.unwrap_or(2);
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let mc = McConfig {
            outer: raw.mc_outer.unwrap_or(100_000),
            inner: raw.mc_inner.unwrap_or(1_000),
            seed: raw.seed.unwrap_or(42),
        };
        if let Some(p) = &raw.points {
            if p.is_empty() || p.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(Error::Config("points must be a nonempty list of surplus levels >= 0".into()));
            }
        }
        let curve_mode = match raw.curve_mode.as_deref().unwrap_or("three_stage") {
            "three_stage" => CurveMode::ThreeStage,
            "infinite_horizon" => CurveMode::InfiniteHorizon { grid: AutoGrid { step, x_max }, tol },
            other => return Err(Error::Config(format!("unknown curve_mode '{other}'"))),
        };
        let out = raw.output_dir.unwrap_or_else(|| PathBuf::from("out"));
        let output_dir = if out.is_absolute() { out } else { base.join(out) };
        Ok(Self {
            model_spec,
            model,
            family,
            beta,
            gamma: raw.gamma,
            gammas,
            grid: AutoGrid { step, x_max },
            horizon,
            tol,
            max_iter: raw.max_iter,
            mc,
            points: raw.points,
            fixed_point_threshold: raw.fixed_point_threshold.unwrap_or(1e-6),
            output_dir,
            curve_mode,
        })
    }

    /// Risk parameters for commands that need a single γ.
    pub fn params(&self) -> Result<RiskParams> {
        let gamma = self.gamma.ok_or_else(|| Error::Config("this command needs 'gamma'".into()))?;
        RiskParams::new(self.beta, gamma).map_err(as_config)
    }

    /// Grid step: configured or b̄/2000.
    pub fn step(&self, model: &IncrementModel) -> Result<f64> {
        match self.grid.step {
            Some(h) => Ok(h),
            None => crate::solvers::auto_step(RiskParams::new(self.beta, 0.0)?, model).map_err(as_config),
        }
    }

    /// Fixed grid end: configured or ξ* + 10·step.
    pub fn fixed_x_max(&self, model: &IncrementModel) -> Result<f64> {
        match self.grid.x_max {
            Some(x) => Ok(x),
            None => Ok(BbarBound::new(self.beta, model).xi_star() + 10.0 * self.step(model)?),
        }
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn auto_or(v: Option<AutoOr>, name: &str) -> Result<Option<f64>> {
    match v {
        None => Ok(None),
        Some(AutoOr::Num(x)) => Ok(Some(x)),
        Some(AutoOr::Word(w)) if w == "auto" => Ok(None),
        Some(AutoOr::Word(w)) => Err(Error::Config(format!("{name} must be a number or \"auto\", got '{w}'"))),
    }
}

/// A TOML literal if the text parses as one, otherwise a bare string.
fn parse_override(value: &str) -> toml::Value {
    format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, overrides: &[&str]) -> Result<RunConfig> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::from_str_with(text, Path::new("/tmp"), &o)
    }

    #[test]
    fn minimal_double_exponential() {
        let c = load("model = \"double_exponential\"\nmu = 2\ngamma = 1.0\n", &[]).unwrap();
        assert_eq!(c.beta, 0.99);
        assert_eq!(c.grid, AutoGrid::default());
        assert_eq!(c.gammas.len(), 31);
        assert_eq!(c.output_dir, PathBuf::from("/tmp/out"));
        assert_eq!(c.params().unwrap().gamma(), 1.0);
    }

    #[test]
    fn overrides_take_precedence() {
        let c = load(
            "model = \"left_exponential\"\nlambda = 6.0\nd = 1.1\nstep = \"auto\"\n",
            &["d=0.5", "step=0.05", "gammas=[0.0, 1.0]", "output_dir=/x/y"],
        )
        .unwrap();
        assert_eq!(c.model_spec, ModelSpec::LeftExponential { lambda: 6.0, d: 0.5 });
        assert_eq!(c.grid.step, Some(0.05));
        assert_eq!(c.gammas, vec![0.0, 1.0]);
        assert_eq!(c.output_dir, PathBuf::from("/x/y"));
    }

    #[test]
    fn rejects_bad_input() {
        for (text, o) in [
            ("model = \"double_exponential\"\n", vec![]),
            ("model = \"double_exponential\"\nmu = 1\nbogus = 3\n", vec![]),
            ("model = \"double_exponential\"\nmu = 1\ngammas = []\n", vec![]),
            ("model = \"double_exponential\"\nmu = 1\nbeta = 1.5\n", vec![]),
            ("model = \"double_exponential\"\nmu = 1\nstep = \"fine\"\n", vec![]),
            ("model = \"left_exponential\"\nlambda = 1\nd = 0.5\n", vec![]),
            ("model = \"tabulated\"\ndensity_csv = \"missing.csv\"\n", vec![]),
            ("model = [", vec![]),
            ("model = \"double_exponential\"\nmu = 1\n", vec!["novalue"]),
        ] {
            let err = load(text, &o).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn family_members() {
        let c = load(
            "model = \"double_exponential\"\nmu = 1\nfamily_param = \"mu\"\nfamily_values = [1.2, 5.0]\n",
            &[],
        )
        .unwrap();
        assert_eq!(c.family.len(), 2);
        assert_eq!(c.family[0].0, "mu_1.2");
        assert!(load("model = \"double_exponential\"\nmu = 1\nfamily_param = \"d\"\nfamily_values = [1.0]\n", &[]).is_err());
    }
}
