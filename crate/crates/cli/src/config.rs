//! Experiment configuration: one JSON document describing the objective,
//! the parameter scheme, and the run protocol. Command-line flags override
//! individual fields so a checked-in config can be perturbed without edits.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use continuized::geometry::SetSpec;
use continuized::model::{Constants, Minimizer, Objective, Optimum};
use continuized::objectives::{build_objective, ObjectiveSpec};
use continuized::presets::{preset_by_name, Derivation, PresetInputs};
use continuized::process::ContinuizedParams;
use ndarray::Array1;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_objective")]
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default = "default_steps")]
    pub n_steps: u64,
    #[serde(default = "default_runs")]
    pub n_runs: u64,
    #[serde(default)]
    pub seed: u64,
    /// Start point; defaults to the all-ones vector in the model dimension.
    #[serde(default)]
    pub x0: Option<InitSpec>,
    /// Replaces the objective's declared minimizer with this set. The
    /// optimal value is kept; only the minimizer geometry changes.
    #[serde(default)]
    pub minimizer_set: Option<SetSpec>,
    #[serde(default)]
    pub probes: Vec<String>,
    /// Output path; standard output when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            objective: default_objective(),
            scheme: SchemeConfig::default(),
            n_steps: default_steps(),
            n_runs: default_runs(),
            seed: 0,
            x0: None,
            minimizer_set: None,
            probes: Vec::new(),
            output: None,
            compare: CompareConfig::default(),
            sweep: None,
        }
    }
}

fn default_objective() -> ObjectiveSpec {
    ObjectiveSpec {
        name: "quadratic".into(),
        params: serde_json::Value::Null,
    }
}

fn default_steps() -> u64 {
    100
}

fn default_runs() -> u64 {
    100
}

/// Parameter scheme: a named preset (with its tunable inputs) or the four
/// process coefficients spelled out. The explicit form carries no certified
/// bound, so aggregate output leaves the bound column empty unless a rate
/// is supplied for the weighting.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SchemeConfig {
    Preset(PresetSchemeConfig),
    Explicit(ExplicitSchemeConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetSchemeConfig {
    pub name: String,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSchemeConfig {
    pub eta: f64,
    pub eta_prime: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
    #[serde(default)]
    pub rate: Option<f64>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig::Preset(PresetSchemeConfig {
            name: "pl".into(),
            gamma: None,
            epsilon: None,
        })
    }
}

/// Start point: a literal vector, or a named shape scaled and broadcast to
/// the model dimension.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Vector(Vec<f64>),
    Named(NamedInit),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedInit {
    /// "zeros", "ones", or "basis0" (first coordinate vector).
    pub init: String,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// "gd", "nesterov", or any preset name; rows appear in this order.
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    /// Target gap as a fraction of the initial gap.
    #[serde(default = "default_target")]
    pub target_rel_gap: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Independent trajectories per stochastic method; the iteration count
    /// reported is their median.
    #[serde(default = "default_fit_runs")]
    pub fit_runs: u64,
    /// Gradient-descent step size; defaults to 1/L.
    #[serde(default)]
    pub gd_step: Option<f64>,
    #[serde(default)]
    pub nesterov: Option<NesterovConfig>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            methods: default_methods(),
            target_rel_gap: default_target(),
            max_steps: default_max_steps(),
            fit_runs: default_fit_runs(),
            gd_step: None,
            nesterov: None,
        }
    }
}

fn default_methods() -> Vec<String> {
    vec!["gd".into(), "sqc".into()]
}

fn default_target() -> f64 {
    1e-6
}

fn default_max_steps() -> u64 {
    200_000
}

fn default_fit_runs() -> u64 {
    100
}

/// Constant-sequence momentum baseline.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NesterovConfig {
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub step: f64,
}

/// Cartesian sweep: every combination of the listed values, one output file
/// per cell. Keys are dotted paths into the config document.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub grid: BTreeMap<String, Vec<serde_json::Value>>,
    /// Command executed per cell: "run" or "mc".
    #[serde(default = "default_sweep_command")]
    pub command: String,
}

fn default_sweep_command() -> String {
    "mc".into()
}

/// Field overrides collected from command-line flags.
#[derive(Clone, Debug, Default)]
pub struct OverrideSet {
    pub objective: Option<String>,
    pub objective_params: Option<String>,
    pub scheme: Option<String>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub steps: Option<u64>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub x0: Option<String>,
    pub out: Option<PathBuf>,
}

/// Read and parse the config file; an absent path yields the defaults. The
/// raw JSON document is returned alongside for the sweep command, which
/// rewrites fields by path.
pub fn load_config(path: Option<&Path>) -> Result<(ExperimentConfig, serde_json::Value), CliError> {
    match path {
        None => Ok((ExperimentConfig::default(), serde_json::json!({}))),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?;
            let cfg = parse_config(&value)
                .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?;
            Ok((cfg, value))
        }
    }
}

pub fn parse_config(value: &serde_json::Value) -> Result<ExperimentConfig, serde_json::Error> {
    serde_json::from_value(value.clone())
}

pub fn apply_overrides(cfg: &mut ExperimentConfig, ov: &OverrideSet) -> Result<(), CliError> {
    if let Some(name) = &ov.objective {
        // A new objective name invalidates any parameter map from the file.
        cfg.objective = ObjectiveSpec {
            name: name.clone(),
            params: serde_json::Value::Null,
        };
    }
    if let Some(text) = &ov.objective_params {
        cfg.objective.params = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("--objective-params is not valid JSON: {e}")))?;
    }
    if let Some(name) = &ov.scheme {
        cfg.scheme = match &cfg.scheme {
            SchemeConfig::Preset(p) => SchemeConfig::Preset(PresetSchemeConfig {
                name: name.clone(),
                gamma: p.gamma,
                epsilon: p.epsilon,
            }),
            SchemeConfig::Explicit(_) => SchemeConfig::Preset(PresetSchemeConfig {
                name: name.clone(),
                gamma: None,
                epsilon: None,
            }),
        };
    }
    if ov.gamma.is_some() || ov.epsilon.is_some() {
        match &mut cfg.scheme {
            SchemeConfig::Preset(p) => {
                if ov.gamma.is_some() {
                    p.gamma = ov.gamma;
                }
                if ov.epsilon.is_some() {
                    p.epsilon = ov.epsilon;
                }
            }
            SchemeConfig::Explicit(_) => {
                return Err(CliError::Usage(
                    "--gamma and --epsilon tune presets; the config fixes explicit \
                     coefficients instead"
                        .into(),
                ));
            }
        }
    }
    if let Some(v) = ov.steps {
        cfg.n_steps = v;
    }
    if let Some(v) = ov.runs {
        cfg.n_runs = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(text) = &ov.x0 {
        let coords: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse()).collect();
        let coords = coords
            .map_err(|e| CliError::Usage(format!("--x0 expects comma-separated numbers: {e}")))?;
        cfg.x0 = Some(InitSpec::Vector(coords));
    }
    if let Some(p) = &ov.out {
        cfg.output = Some(p.clone());
    }
    Ok(())
}

/// A resolved experiment: model built, scheme derived, start point sized.
pub struct Experiment {
    pub model: Arc<dyn Objective>,
    /// Preset name, or "explicit".
    pub scheme: String,
    pub params: ContinuizedParams,
    /// Present for presets; carries the certified bound and the paired
    /// energy kind.
    pub derivation: Option<Derivation>,
    pub x0: Array1<f64>,
    pub n_steps: u64,
    pub n_runs: u64,
    pub seed: u64,
    /// Notes for standard error (currently only the epsilon clamp).
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        if self.n_runs < 1 {
            return Err(CliError::Config("n_runs must be at least 1".into()));
        }
        let spec = ObjectiveSpec {
            name: self.objective.name.clone(),
            params: effective_params(&self.objective),
        };
        let mut model = build_objective(&spec)?;
        if let Some(set_spec) = &self.minimizer_set {
            let set = set_spec.build()?;
            if set.dim() != model.dim() {
                return Err(CliError::Config(format!(
                    "minimizer_set lives in dimension {}, the objective in {}",
                    set.dim(),
                    model.dim()
                )));
            }
            model = Arc::new(WithMinimizerSet::new(model, set));
        }

        let mut warnings = Vec::new();
        let (scheme, params, derivation) = match &self.scheme {
            SchemeConfig::Preset(p) => {
                let preset = preset_by_name(&p.name)?;
                let inputs = PresetInputs {
                    gamma: p.gamma,
                    epsilon: p.epsilon,
                };
                let d = preset.derive(model.constants(), &inputs)?;
                if d.epsilon_clamped {
                    warnings.push(format!(
                        "epsilon raised to {:.6}, the smallest value admissible at this mu/L",
                        d.epsilon.unwrap_or(f64::NAN)
                    ));
                }
                (p.name.clone(), d.params.clone(), Some(d))
            }
            SchemeConfig::Explicit(e) => {
                let mut params =
                    ContinuizedParams::new(e.eta, e.eta_prime, e.gamma, e.gamma_prime)?;
                if let Some(rate) = e.rate {
                    if !(rate > 0.0 && rate.is_finite()) {
                        return Err(CliError::Config(format!(
                            "an explicit rate must be positive and finite, got {rate}"
                        )));
                    }
                    params.rate = Some(rate);
                }
                ("explicit".into(), params, None)
            }
        };

        let x0 = resolve_x0(self.x0.as_ref(), model.dim())?;
        Ok(Experiment {
            model,
            scheme,
            params,
            derivation,
            x0,
            n_steps: self.n_steps,
            n_runs: self.n_runs,
            seed: self.seed,
            warnings,
        })
    }
}

/// Fill in a usable parameter map for objectives whose parameters have no
/// serde defaults, so `--objective quadratic` works without a config file.
fn effective_params(spec: &ObjectiveSpec) -> serde_json::Value {
    if !spec.params.is_null() {
        return spec.params.clone();
    }
    match spec.name.as_str() {
        "quadratic" => serde_json::json!({ "eigenvalues": [1.0, 0.1] }),
        "finite_sum_quadratic" => serde_json::json!({ "coefficients": [1.0, 3.0] }),
        "degenerate_quadratic" => serde_json::json!({ "active_eigenvalues": [1.0, 0.01] }),
        _ => serde_json::Value::Null,
    }
}

fn resolve_x0(spec: Option<&InitSpec>, dim: usize) -> Result<Array1<f64>, CliError> {
    match spec {
        None => Ok(Array1::ones(dim)),
        Some(InitSpec::Vector(v)) => {
            if v.len() != dim {
                return Err(CliError::Config(format!(
                    "x0 has {} coordinates, the objective has dimension {dim}",
                    v.len()
                )));
            }
            Ok(Array1::from_vec(v.clone()))
        }
        Some(InitSpec::Named(n)) => match n.init.as_str() {
            "zeros" => Ok(Array1::zeros(dim)),
            "ones" => Ok(Array1::from_elem(dim, n.scale)),
            "basis0" => {
                let mut v = Array1::zeros(dim);
                v[0] = n.scale;
                Ok(v)
            }
            other => Err(CliError::Config(format!(
                "unknown initializer '{other}'; expected zeros, ones, or basis0"
            ))),
        },
    }
}

/// Delegates to an inner objective but reports a replaced minimizer set.
/// Used when a config supplies `minimizer_set` for projection-scheme
/// experiments on models that declare a point optimum.
struct WithMinimizerSet {
    inner: Arc<dyn Objective>,
    optimum: Optimum,
}

impl WithMinimizerSet {
    fn new(inner: Arc<dyn Objective>, set: Arc<dyn continuized::geometry::ConvexSet>) -> Self {
        let optimum = Optimum {
            f_star: inner.optimum().f_star,
            minimizer: Minimizer::Set(set),
        };
        WithMinimizerSet { inner, optimum }
    }
}

impl Objective for WithMinimizerSet {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &Array1<f64>) -> f64 {
        self.inner.value(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        self.inner.gradient(x)
    }
    fn constants(&self) -> &Constants {
        self.inner.constants()
    }
    fn optimum(&self) -> &Optimum {
        &self.optimum
    }
    fn num_components(&self) -> usize {
        self.inner.num_components()
    }
    fn component_gradient(&self, i: usize, x: &Array1<f64>) -> Array1<f64> {
        self.inner.component_gradient(i, x)
    }
}
