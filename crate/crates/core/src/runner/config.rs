use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{MapSequence, SequenceSpec};
use crate::stochastic::{ScalarObservable, SigmaRoute};

use super::scenarios::Scenario;

/// Scalar observable `f` named in a config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableSpec {
    /// `f(x) = a·x + b`.
    Affine { a: f64, b: f64 },
    Constant { c: f64 },
}

impl ObservableSpec {
    pub fn build(&self, proxy_cells: usize) -> Result<ScalarObservable> {
        match *self {
            ObservableSpec::Affine { a, b } => ScalarObservable::affine(a, b, proxy_cells),
            ObservableSpec::Constant { c } => Ok(ScalarObservable::constant(c)),
        }
    }

    fn check(&self, field: &str, errors: &mut Vec<String>) {
        let finite = match *self {
            ObservableSpec::Affine { a, b } => a.is_finite() && b.is_finite(),
            ObservableSpec::Constant { c } => c.is_finite(),
        };
        if !finite {
            errors.push(format!("{field}: coefficients must be finite"));
        }
    }
}

/// Numeric parameters; which ones a scenario needs is listed by
/// [`super::list_scenarios`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    /// Widths `w` of the shadowing targets `A = [0, w)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<SigmaRoute>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
}

/// One experiment: a scenario, the map sequence it runs on, its
/// parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// File stem of the outputs; defaults to the scenario name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// A config that passed validation, with defaults filled in.
#[derive(Debug, Clone)]
pub struct Plan {
    pub scenario: Scenario,
    pub sequence: MapSequence,
    pub params: Params,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a config file: JSON if the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn output_stem(&self) -> &str {
        self.output.as_deref().unwrap_or(&self.scenario)
    }

    /// Checks every field and reports all violations together, before any
    /// computation starts.
    pub fn validate(&self) -> Result<Plan> {
        let mut errors = Vec::new();
        let scenario = match self.scenario.parse::<Scenario>() {
            Ok(s) => Some(s),
            Err(_) => {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                errors.push(format!(
                    "scenario: unknown scenario {:?} (expected one of {})",
                    self.scenario,
                    names.join(", ")
                ));
                None
            }
        };
        if self.seed.is_none() {
            errors.push("seed: required".into());
        }
        let sequence = match &self.sequence {
            None => {
                errors.push("sequence: required".into());
                None
            }
            Some(spec) => match spec.build() {
                Ok(seq) => Some(seq),
                Err(e) => {
                    errors.push(format!("sequence: {e}"));
                    None
                }
            },
        };
        if let Some(stem) = &self.output {
            if stem.is_empty() || stem.contains(['/', '\\']) || stem.starts_with('.') {
                errors.push(format!("output: {stem:?} is not a plain file stem"));
            }
        }
        let params = scenario.map(|s| {
            let filled = s.with_defaults(&self.params);
            for name in s.info().required {
                if !filled.has(name) {
                    errors.push(format!("params.{name}: required by scenario {}", s.name()));
                }
            }
            filled.check(s, &mut errors);
            filled
        });
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        Ok(Plan {
            scenario: scenario.expect("validated"),
            sequence: sequence.expect("validated"),
            params: params.expect("validated"),
            seed: self.seed.expect("validated"),
        })
    }
}

impl Params {
    pub(crate) fn has(&self, name: &str) -> bool {
        match name {
            "n" => self.n.is_some(),
            "n_max" => self.n_max.is_some(),
            "n_list" => self.n_list.is_some(),
            "horizon" => self.horizon.is_some(),
            "max_steps" => self.max_steps.is_some(),
            "block_start" => self.block_start.is_some(),
            "m_samples" => self.m_samples.is_some(),
            "t_list" => self.t_list.is_some(),
            "lambda_list" => self.lambda_list.is_some(),
            "p_list" => self.p_list.is_some(),
            "x_list" => self.x_list.is_some(),
            "bin_width" => self.bin_width.is_some(),
            "widths" => self.widths.is_some(),
            "candidate_grid" => self.candidate_grid.is_some(),
            "proxy_cells" => self.proxy_cells.is_some(),
            "orbit_samples" => self.orbit_samples.is_some(),
            "route" => self.route.is_some(),
            "observable" => self.observable.is_some(),
            _ => false,
        }
    }

    fn check(&self, scenario: Scenario, errors: &mut Vec<String>) {
        let mut count = |name: &str, v: Option<usize>, min: usize| {
            if let Some(v) = v {
                if v < min {
                    errors.push(format!("params.{name}: must be ≥ {min}, got {v}"));
                }
            }
        };
        count("n", self.n, 1);
        count("n_max", self.n_max, if scenario == Scenario::Decay { 4 } else { 1 });
        count("horizon", self.horizon, 1);
        count("max_steps", self.max_steps, 1);
        count("m_samples", self.m_samples, if scenario == Scenario::Concentration { 2 } else { 1 });
        count("candidate_grid", self.candidate_grid, 1);
        count("proxy_cells", self.proxy_cells, 1);
        count("orbit_samples", self.orbit_samples, 1);

        let mut list = |name: &str, ok: bool, what: &str| {
            if !ok {
                errors.push(format!("params.{name}: {what}"));
            }
        };
        if let Some(v) = &self.n_list {
            list("n_list", !v.is_empty() && v.iter().all(|&n| n >= 1), "must be a nonempty list of counts ≥ 1");
        }
        if let Some(v) = &self.p_list {
            let ok = !v.is_empty() && v.iter().all(|&p| p >= 1 && self.n.is_none_or(|n| p < n));
            list("p_list", ok, "must be a nonempty list with 1 ≤ p < n");
        }
        if let Some(v) = &self.t_list {
            list("t_list", !v.is_empty() && v.iter().all(|t| t.is_finite()), "must be a nonempty list of finite values");
        }
        if let Some(v) = &self.lambda_list {
            let ok = !v.is_empty() && v.iter().all(|l| l.is_finite() && *l > 0.0);
            list("lambda_list", ok, "must be a nonempty list of positive values");
        }
        if let Some(v) = &self.x_list {
            let ok = !v.is_empty() && v.iter().all(|x| (0.0..1.0).contains(x));
            list("x_list", ok, "must be a nonempty list of points in [0, 1)");
        }
        if let Some(v) = &self.widths {
            let ok = !v.is_empty() && v.iter().all(|w| *w > 0.0 && *w <= 1.0);
            list("widths", ok, "must be a nonempty list of widths in (0, 1]");
        }
        if let Some(w) = self.bin_width {
            list("bin_width", w > 0.0 && w <= 1.0, "must lie in (0, 1]");
        }
        if let Some(o) = &self.observable {
            o.check("params.observable", errors);
        }
    }
}
