//! JSON run configuration. Unknown fields are rejected everywhere; physical
//! constraints are re-checked when the model and ansatz are built.

use std::path::Path;

use pvar_core::models::{jaynes_cummings, rydberg_polariton_model, rydberg_three_boson, JcParams, PolaritonBasis, RydbergParams};
use pvar_core::phase_space::{GridKind, GridSpec};
use pvar_core::variational::{correlation_keys, MinimizeOptions, NelderMeadOptions, Slot, WeightScheme};
use pvar_core::{Ansatz, ComponentState, IndexSpace, ModeAnsatz, ModelSpec, Monomial, MomentOptions, OperatorPolynomial, SpinAnsatz, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_space: Option<PhaseSpaceConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Jc {
        params: JcParams,
    },
    Rydberg {
        params: RydbergParams,
        #[serde(default)]
        basis: RydbergBasis,
    },
    /// Terms are normal-ordered monomials in text form (`ad0 a1`, `a0 sp0`, `1`).
    Custom {
        modes: usize,
        #[serde(default)]
        spins: usize,
        #[serde(default)]
        hamiltonian: Vec<Term>,
        #[serde(default)]
        jumps: Vec<Vec<Term>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode_names: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RydbergBasis {
    #[default]
    Polariton,
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub op: Monomial,
    pub coef: Coefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Real(f64),
    Complex([f64; 2]),
}

impl Coefficient {
    pub fn value(self) -> C64 {
        match self {
            Coefficient::Real(x) => C64::new(x, 0.0),
            Coefficient::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// A model ready for the solvers, with display names for its modes.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub spec: ModelSpec,
    pub mode_names: Vec<String>,
    pub basis: Option<PolaritonBasis>,
}

fn polynomial(terms: &[Term]) -> OperatorPolynomial {
    let mut out = OperatorPolynomial::zero();
    for t in terms {
        out.add_term(t.op.clone(), t.coef.value());
    }
    out.simplify()
}

impl ModelConfig {
    pub fn build(&self) -> Result<BuiltModel, CliError> {
        let err = |e| CliError::from_model("model.params", e);
        match self {
            ModelConfig::Jc { params } => Ok(BuiltModel {
                spec: jaynes_cummings(params).map_err(err)?,
                mode_names: vec!["a".into()],
                basis: None,
            }),
            ModelConfig::Rydberg { params, basis: RydbergBasis::Lab } => Ok(BuiltModel {
                spec: rydberg_three_boson(params).map_err(err)?,
                mode_names: vec!["a".into(), "b".into(), "c".into()],
                basis: None,
            }),
            ModelConfig::Rydberg { params, basis: RydbergBasis::Polariton } => {
                let (spec, basis) = rydberg_polariton_model(params).map_err(err)?;
                Ok(BuiltModel { spec, mode_names: vec!["plus".into(), "dark".into(), "minus".into()], basis: Some(basis) })
            }
            ModelConfig::Custom { modes, spins, hamiltonian, jumps, mode_names } => {
                let space = IndexSpace::new(*modes, *spins);
                let h = polynomial(hamiltonian);
                let jumps: Vec<OperatorPolynomial> = jumps.iter().map(|j| polynomial(j)).collect();
                let spec = ModelSpec::new(space, h, jumps).map_err(|e| CliError::from_algebra("model", e))?;
                let names = match mode_names {
                    Some(n) if n.len() == *modes => n.clone(),
                    Some(n) => {
                        return Err(CliError::config("model.mode_names", format!("{} names for {modes} modes", n.len())))
                    }
                    None => (0..*modes).map(|m| format!("m{m}")).collect(),
                };
                Ok(BuiltModel { spec, mode_names: names, basis: None })
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Jc { .. } => "jc",
            ModelConfig::Rydberg { .. } => "rydberg",
            ModelConfig::Custom { .. } => "custom",
        }
    }

    /// Copy with one named parameter replaced (sweeps).
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self, CliError> {
        fn set<T: Serialize + for<'de> Deserialize<'de>>(params: &T, name: &str, value: f64) -> Result<T, CliError> {
            let mut v = serde_json::to_value(params).expect("parameters serialize");
            let slot = v
                .get_mut(name)
                .ok_or_else(|| CliError::config("sweep.parameter", format!("model has no parameter {name:?}")))?;
            *slot = serde_json::json!(value);
            serde_json::from_value(v).map_err(|e| CliError::config("sweep.parameter", e))
        }
        match self {
            ModelConfig::Jc { params } => Ok(ModelConfig::Jc { params: set(params, name, value)? }),
            ModelConfig::Rydberg { params, basis } => {
                Ok(ModelConfig::Rydberg { params: set(params, name, value)?, basis: *basis })
            }
            ModelConfig::Custom { .. } => Err(CliError::config("sweep.parameter", "custom models cannot be swept")),
        }
    }

    /// Parameter map as written into records.
    pub fn parameters(&self) -> serde_json::Value {
        match self {
            ModelConfig::Jc { params } => serde_json::to_value(params),
            ModelConfig::Rydberg { params, .. } => serde_json::to_value(params),
            ModelConfig::Custom { .. } => Ok(serde_json::Value::Null),
        }
        .expect("parameters serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    /// Convolved components per mode.
    pub modes: Vec<Vec<ComponentState>>,
    /// Bloch vectors per spin.
    #[serde(default)]
    pub spins: Vec<[f64; 3]>,
    /// 0 disables correlation parameters; 2 or 3 varies every cross-mode key up to that order.
    #[serde(default)]
    pub correlation_order: u32,
    /// Explicit correlation keys, replacing the ones implied by `correlation_order`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_keys: Option<Vec<Monomial>>,
    /// Parameters held at their configured values, e.g. `mode0.component1.zeta`,
    /// `mode1.component0.alpha.im`, `spin0.z`, `correlation:ad0 a1`.
    #[serde(default)]
    pub frozen: Vec<String>,
}

/// Template ansatz and correlation keys derived from the config (or defaults).
#[derive(Debug, Clone)]
pub struct BuiltAnsatz {
    pub base: Ansatz,
    pub correlation_keys: Vec<Monomial>,
    pub frozen: Vec<String>,
}

/// Coherent per mode, plus a weak squeezed-thermal component for the
/// three-boson model whose dark mode squeezes.
fn default_ansatz(model: &ModelConfig, space: IndexSpace) -> AnsatzConfig {
    let mode = match model {
        ModelConfig::Rydberg { .. } => vec![
            ComponentState::coherent(C64::new(0.0, 0.0)),
            ComponentState::squeezed_thermal(0.01, 0.05, 0.0).expect("valid"),
        ],
        _ => vec![ComponentState::coherent(C64::new(0.0, 0.0))],
    };
    AnsatzConfig {
        modes: vec![mode; space.modes],
        spins: vec![[0.0, 0.0, -1.0]; space.spins],
        correlation_order: 0,
        correlation_keys: None,
        frozen: Vec::new(),
    }
}

impl AnsatzConfig {
    pub fn build(&self, space: IndexSpace) -> Result<BuiltAnsatz, CliError> {
        if self.modes.len() != space.modes {
            return Err(CliError::config("ansatz.modes", format!("{} modes given, model has {}", self.modes.len(), space.modes)));
        }
        if self.spins.len() != space.spins {
            return Err(CliError::config("ansatz.spins", format!("{} spins given, model has {}", self.spins.len(), space.spins)));
        }
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, comps)| {
                for c in comps {
                    c.validate().map_err(|e| CliError::from_moment(&format!("ansatz.modes[{i}]"), e))?;
                }
                ModeAnsatz::new(comps.clone()).map_err(|e| CliError::from_moment(&format!("ansatz.modes[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let spins = self
            .spins
            .iter()
            .enumerate()
            .map(|(i, b)| SpinAnsatz::new(*b).map_err(|e| CliError::from_moment(&format!("ansatz.spins[{i}]"), e)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut base = Ansatz::new(modes, spins).map_err(|e| CliError::from_moment("ansatz", e))?;
        if !matches!(self.correlation_order, 0 | 2 | 3) {
            return Err(CliError::config("ansatz.correlation_order", format!("{} must be 0, 2 or 3", self.correlation_order)));
        }
        let keys = match (&self.correlation_keys, self.correlation_order) {
            (Some(keys), _) => keys.clone(),
            (None, 0) => Vec::new(),
            (None, k) => correlation_keys(space.modes, k),
        };
        let order = keys.iter().map(|k| k.order()).max().unwrap_or(0).max(self.correlation_order).max(2);
        base.set_max_correlation_order(order).map_err(|e| CliError::from_moment("ansatz.correlation_order", e))?;
        for (i, k) in keys.iter().enumerate() {
            base.check_correlation_key(k).map_err(|e| CliError::from_moment(&format!("ansatz.correlation_keys[{i}]"), e))?;
        }
        Ok(BuiltAnsatz { base, correlation_keys: keys, frozen: self.frozen.clone() })
    }
}

/// `alpha1` is the first cat amplitude, stored where a coherent amplitude is.
fn alias(field: &str) -> &str {
    if field == "alpha1" { "alpha" } else { field }
}

fn index_after(s: &str, prefix: &str) -> Option<usize> {
    s.strip_prefix(prefix)?.parse().ok()
}

/// Schema slots addressed by one `frozen` entry; an entry must address at least one.
pub fn frozen_slots(spec: &str, slots: &[Slot]) -> Result<Vec<Slot>, CliError> {
    let bad = || CliError::config("ansatz.frozen", format!("{spec:?} does not name a parameter of the ansatz"));
    let matches: Vec<Slot> = if let Some(key) = spec.strip_prefix("correlation:") {
        let key: Monomial = key.parse().map_err(|e| CliError::config("ansatz.frozen", e))?;
        let key = key.canonical();
        slots.iter().filter(|s| matches!(s, Slot::Correlation { key: k, .. } if *k == key)).cloned().collect()
    } else {
        let parts: Vec<&str> = spec.split('.').collect();
        match parts.as_slice() {
            [s, rest @ ..] if s.starts_with("spin") => {
                let spin = index_after(s, "spin").ok_or_else(bad)?;
                let axis = match rest {
                    [] => None,
                    ["x"] => Some(0u8),
                    ["y"] => Some(1),
                    ["z"] => Some(2),
                    _ => return Err(bad()),
                };
                slots
                    .iter()
                    .filter(|s| matches!(s, Slot::Bloch { spin: sp, axis: ax } if *sp == spin && axis.is_none_or(|a| a == *ax)))
                    .cloned()
                    .collect()
            }
            [m, c, rest @ ..] => {
                let mode = index_after(m, "mode").ok_or_else(bad)?;
                let component = index_after(c, "component").ok_or_else(bad)?;
                let (field, part) = match rest {
                    [] => (None, None),
                    [f] => (Some(alias(f)), None),
                    [f, "re"] => (Some(alias(f)), Some(false)),
                    [f, "im"] => (Some(alias(f)), Some(true)),
                    _ => return Err(bad()),
                };
                slots
                    .iter()
                    .filter(|s| {
                        let (sm, sc, name, imag) = match s {
                            Slot::Alpha { mode, component, which: 0, imag } => (*mode, *component, "alpha", Some(*imag)),
                            Slot::Alpha { mode, component, imag, .. } => (*mode, *component, "alpha2", Some(*imag)),
                            Slot::CatPhase { mode, component, imag } => (*mode, *component, "theta", Some(*imag)),
                            Slot::Occupation { mode, component } => (*mode, *component, "n0", None),
                            Slot::Squeezing { mode, component, imag } => (*mode, *component, "zeta", Some(*imag)),
                            _ => return false,
                        };
                        sm == mode
                            && sc == component
                            && field.is_none_or(|f| f == name)
                            && part.is_none_or(|p| imag == Some(p))
                    })
                    .cloned()
                    .collect()
            }
            _ => return Err(bad()),
        }
    };
    if matches.is_empty() {
        return Err(bad());
    }
    Ok(matches)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Largest total order of tracked moment equations.
    pub order: u32,
    pub weights: WeightScheme,
    pub starts: usize,
    pub seed: u64,
    pub max_evaluations: usize,
    pub stall_iterations: usize,
    pub stall_tolerance: f64,
    pub restarts: usize,
    pub start_spread: f64,
    pub min_step: f64,
    pub branch_factor: f64,
    pub max_moment_order: u32,
    /// With correlation keys, first solve without them and add that optimum
    /// (δ = 0) as an extra start, so the larger family never reports a worse `D`.
    pub nested_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let m = MinimizeOptions::default();
        Self {
            order: 2,
            weights: m.weights,
            starts: m.starts,
            seed: m.seed,
            max_evaluations: m.simplex.max_evaluations,
            stall_iterations: m.simplex.stall_iterations,
            stall_tolerance: m.simplex.stall_tolerance,
            restarts: m.simplex.restarts,
            start_spread: m.start_spread,
            min_step: m.min_step,
            branch_factor: m.branch_factor,
            max_moment_order: m.moments.max_order,
            nested_start: true,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> Result<MinimizeOptions, CliError> {
        if self.order == 0 {
            return Err(CliError::config("solver.order", "must be at least 1"));
        }
        if self.starts == 0 {
            return Err(CliError::config("solver.starts", "must be at least 1"));
        }
        for (name, x) in [("solver.start_spread", self.start_spread), ("solver.min_step", self.min_step)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(CliError::config(name, format!("{x} must be finite and >= 0")));
            }
        }
        Ok(MinimizeOptions {
            starts: self.starts,
            seed: self.seed,
            weights: self.weights,
            simplex: NelderMeadOptions {
                max_evaluations: self.max_evaluations,
                stall_iterations: self.stall_iterations,
                stall_tolerance: self.stall_tolerance,
                restarts: self.restarts,
            },
            start_spread: self.start_spread,
            min_step: self.min_step,
            moments: MomentOptions { max_order: self.max_moment_order },
            branch_factor: self.branch_factor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linspace: Option<Linspace>,
    /// Start each point from the previous point's optimum in addition to the seeded starts.
    #[serde(default = "yes")]
    pub warm_start: bool,
    /// Run the variational minimization at every point.
    #[serde(default = "yes")]
    pub minimize: bool,
    /// Jaynes-Cummings only: mean-field fixed points and the variational branch choice.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_select: Option<BranchSelectConfig>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSelectConfig {
    #[serde(default = "two")]
    pub order: u32,
    #[serde(default = "relative")]
    pub weights: WeightScheme,
}

fn two() -> u32 {
    2
}

fn relative() -> WeightScheme {
    WeightScheme::Relative
}

impl SweepConfig {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let values = match (&self.values, &self.linspace) {
            (Some(v), None) => v.clone(),
            (None, Some(l)) => match l.count {
                0 => Vec::new(),
                1 => vec![l.start],
                n => (0..n).map(|i| l.start + (l.stop - l.start) * i as f64 / (n - 1) as f64).collect(),
            },
            _ => return Err(CliError::config("sweep", "give exactly one of `values` and `linspace`")),
        };
        if values.is_empty() {
            return Err(CliError::config("sweep", "no sweep points"));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(CliError::config("sweep.values", format!("{x} is not finite")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Fock levels kept per mode.
    pub cutoffs: Vec<usize>,
    #[serde(default = "boundary_limit")]
    pub boundary_limit: f64,
    #[serde(default = "dimension_cap")]
    pub dimension_cap: usize,
    /// Also solve with every cutoff lowered by `convergence_step` and report the moment drift.
    #[serde(default = "convergence_step")]
    pub convergence_step: usize,
}

fn boundary_limit() -> f64 {
    pvar_core::oracle::DEFAULT_BOUNDARY_LIMIT
}

fn dimension_cap() -> usize {
    pvar_core::oracle::DEFAULT_DIMENSION_CAP
}

fn convergence_step() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PhaseSource>,
    #[serde(default = "both_kinds")]
    pub kinds: Vec<GridKind>,
    #[serde(default = "default_grid")]
    pub grid: GridSpec,
    /// Characteristic-series truncation order.
    #[serde(default = "phase_order")]
    pub order: u32,
    /// Regularization width; defaults by the smoothness of the state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// File-name stem for the state; defaults from the source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

fn both_kinds() -> Vec<GridKind> {
    vec![GridKind::P, GridKind::Wigner]
}

fn default_grid() -> GridSpec {
    GridSpec::new(4.0, 81)
}

/// Order 16 leaves bright or squeezed states with a window too small to
/// resolve them; 40 covers the gallery table.
pub const DEFAULT_PHASE_ORDER: u32 = 40;

fn phase_order() -> u32 {
    DEFAULT_PHASE_ORDER
}

impl Default for PhaseSpaceConfig {
    fn default() -> Self {
        Self { source: None, kinds: both_kinds(), grid: default_grid(), order: phase_order(), sigma: None, name: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSource {
    /// Convolution of the listed components.
    State { components: Vec<ComponentState> },
    /// One mode of the best ansatz in a result record file.
    Record {
        path: String,
        #[serde(default)]
        index: usize,
        #[serde(default)]
        mode: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Subset of `jsonl`, `csv`; empty means both.
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    Csv,
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.is_empty() || self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { String::from("<root>") } else { path }, e.into_inner())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// SHA-256 of the canonical serialization; stamped on every output.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn model(&self) -> Result<&ModelConfig, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::config("model", "this command needs a model section"))
    }

    pub fn ansatz_for(&self, model: &ModelConfig, space: IndexSpace) -> Result<BuiltAnsatz, CliError> {
        match &self.ansatz {
            Some(a) => a.build(space),
            None => default_ansatz(model, space).build(space),
        }
    }

    pub fn oracle(&self) -> Result<&OracleConfig, CliError> {
        self.oracle.as_ref().ok_or_else(|| CliError::config("oracle", "this command needs an oracle section"))
    }
}
