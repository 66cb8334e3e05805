//! Experiment configuration: JSON schema, presets, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subsetmc::chains::SamplerSpec;
use subsetmc::data::{synthesize_model, SynthKind};
use subsetmc::diagnostics::PsrfVariant;
use subsetmc::semigrad::{
    build_mixture, ising_two_component_mixture, ConstructionConfig, ConstructionLog, KRange,
    PermutationMode, SemigradientKind,
};
use subsetmc::{Model, MixtureProposal, SetFunction};

use crate::CliError;

/// Where the model comes from: inline JSON, a file, or a synthesizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelRef {
    Model(Model),
    ModelPath(PathBuf),
    Synth {
        kind: SynthKind,
        n: usize,
        l: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Gibbs,
    M3,
    Combined,
    GibbsSwap,
    M3FixedSize,
    CombinedFixedSize,
}

impl SamplerKind {
    pub fn needs_mixture(self) -> bool {
        !matches!(self, SamplerKind::Gibbs | SamplerKind::GibbsSwap)
    }

    pub fn is_fixed_size(self) -> bool {
        matches!(
            self,
            SamplerKind::GibbsSwap | SamplerKind::M3FixedSize | SamplerKind::CombinedFixedSize
        )
    }
}

/// How a sampler obtains its proposal mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum MixtureSource {
    /// Semigradient construction; unset fields fall back to the global
    /// `construction` block.
    Construct {
        #[serde(default)]
        r: Option<usize>,
        #[serde(default)]
        permutation_mode: Option<PermutationMode>,
        #[serde(default)]
        semigradient_kind: Option<SemigradientKind>,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// The handcrafted two-component mixture for complete-graph Ising
    /// models at `beta = ln n`.
    IsingTwoComponent,
    /// A mixture JSON file written by `construct` or a previous run.
    Path { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub label: String,
    pub kind: SamplerKind,
    #[serde(default)]
    pub mixture: Option<MixtureSource>,
    /// Per-sampler override of the global alpha.
    #[serde(default)]
    pub alpha: Option<f64>,
}

/// Global defaults for semigradient mixture construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionSettings {
    pub r: usize,
    pub permutation_mode: PermutationMode,
    pub semigradient_kind: SemigradientKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub k_range: KRange,
}

impl Default for ConstructionSettings {
    fn default() -> Self {
        ConstructionSettings {
            r: 20,
            permutation_mode: PermutationMode::Greedy,
            semigradient_kind: SemigradientKind::Sub,
            seed: 0,
            k_range: KRange::ZeroToN,
        }
    }
}

fn default_alpha() -> f64 {
    0.5
}

fn default_record_every() -> usize {
    1
}

fn default_repetitions() -> usize {
    1
}

fn default_chains() -> usize {
    20
}

fn default_checkpoints() -> usize {
    50
}

fn default_enum_limit() -> usize {
    subsetmc::exact::DEFAULT_ENUM_LIMIT
}

fn default_matrix_limit() -> usize {
    subsetmc::exact::DEFAULT_MATRIX_LIMIT
}

fn default_epsilon() -> f64 {
    0.25
}

fn default_benchmark_steps() -> usize {
    200_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub model: ModelRef,
    pub samplers: Vec<SamplerConfig>,
    #[serde(default)]
    pub construction: ConstructionSettings,
    #[serde(default = "default_chains")]
    pub chains: usize,
    pub steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Cardinality constraint for the fixed-size sampler kinds.
    #[serde(default)]
    pub fixed_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Number of PSRF checkpoints along the iteration axis.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default)]
    pub psrf_variant: PsrfVariant,
    #[serde(default = "default_enum_limit")]
    pub enum_limit: usize,
    #[serde(default = "default_matrix_limit")]
    pub matrix_limit: usize,
    /// Accuracy target for mixing-time bounds in `exact` reports.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_benchmark_steps")]
    pub benchmark_steps: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Validates every field against module preconditions; errors carry
    /// the field path.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        if self.samplers.is_empty() {
            errors.push("samplers: must not be empty".to_string());
        }
        if self.chains == 0 {
            errors.push("chains: must be at least 1".to_string());
        }
        if self.record_every == 0 {
            errors.push("record_every: must be at least 1".to_string());
        }
        if self.repetitions == 0 {
            errors.push("repetitions: must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            errors.push(format!("burn_in: must lie in [0, 1), got {}", self.burn_in));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            errors.push(format!(
                "alpha: must lie strictly between 0 and 1, got {}",
                self.alpha
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            errors.push(format!(
                "epsilon: must lie in (0, 1), got {}",
                self.epsilon
            ));
        }
        if self.construction.r == 0 {
            errors.push("construction.r: must be at least 1".to_string());
        }
        match &self.model {
            ModelRef::Synth { n, l, .. } => {
                if *n == 0 || *n > 64 {
                    errors.push(format!("synth.n: must lie in 1..=64, got {n}"));
                }
                if *l == 0 {
                    errors.push("synth.l: must be at least 1".to_string());
                }
            }
            ModelRef::Model(m) => {
                if let Err(e) = m.validate() {
                    errors.push(format!("model: {e}"));
                }
            }
            ModelRef::ModelPath(_) => {}
        }
        for (i, s) in self.samplers.iter().enumerate() {
            if s.label.is_empty() {
                errors.push(format!("samplers[{i}].label: must not be empty"));
            }
            if s.kind.needs_mixture() && s.mixture.is_none() {
                errors.push(format!(
                    "samplers[{i}].mixture: required for kind {:?}",
                    s.kind
                ));
            }
            if let Some(alpha) = s.alpha {
                if !(alpha > 0.0 && alpha < 1.0) {
                    errors.push(format!(
                        "samplers[{i}].alpha: must lie strictly between 0 and 1, got {alpha}"
                    ));
                }
            }
            if let Some(MixtureSource::Construct { r: Some(0), .. }) = &s.mixture {
                errors.push(format!("samplers[{i}].mixture.r: must be at least 1"));
            }
            if s.kind.is_fixed_size() && self.fixed_size.is_none() {
                errors.push(format!(
                    "fixed_size: required by samplers[{i}] of kind {:?}",
                    s.kind
                ));
            }
        }
        let labels: std::collections::HashSet<&str> =
            self.samplers.iter().map(|s| s.label.as_str()).collect();
        if labels.len() != self.samplers.len() {
            errors.push("samplers: labels must be unique".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errors.join("; ")))
        }
    }

    /// Materializes the model, loading or synthesizing as needed.
    pub fn resolve_model(&self) -> Result<Model, CliError> {
        let model = match &self.model {
            ModelRef::Model(m) => m.clone(),
            ModelRef::ModelPath(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Validation(format!("model_path {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Validation(format!("model_path {}: {e}", path.display()))
                })?
            }
            ModelRef::Synth { kind, n, l, seed } => synthesize_model(*kind, *n, *l, *seed)
                .map_err(|e| CliError::Validation(format!("synth model: {e}")))?,
        };
        model
            .validate()
            .map_err(|e| CliError::Validation(format!("model: {e}")))?;
        Ok(model)
    }

    fn construction_for(&self, source: &MixtureSource) -> ConstructionConfig {
        let defaults = &self.construction;
        match source {
            MixtureSource::Construct {
                r,
                permutation_mode,
                semigradient_kind,
                seed,
            } => ConstructionConfig {
                r: r.unwrap_or(defaults.r),
                permutation_mode: permutation_mode.unwrap_or(defaults.permutation_mode),
                semigradient_kind: semigradient_kind.unwrap_or(defaults.semigradient_kind),
                seed: seed.unwrap_or(defaults.seed),
                k_range: defaults.k_range,
            },
            _ => ConstructionConfig {
                r: defaults.r,
                permutation_mode: defaults.permutation_mode,
                semigradient_kind: defaults.semigradient_kind,
                seed: defaults.seed,
                k_range: defaults.k_range,
            },
        }
    }

    /// Builds or loads the mixture for a sampler entry. Returns the
    /// construction log when a mixture was freshly constructed.
    pub fn resolve_mixture(
        &self,
        model: &Model,
        sampler: &SamplerConfig,
    ) -> Result<(MixtureProposal, Option<ConstructionLog>), CliError> {
        let source = sampler.mixture.as_ref().ok_or_else(|| {
            CliError::Validation(format!("sampler {}: mixture required", sampler.label))
        })?;
        match source {
            MixtureSource::Construct { .. } => {
                let config = self.construction_for(source);
                let (q, log) = build_mixture(model, &config)
                    .map_err(|e| CliError::Runtime(format!("mixture construction: {e}")))?;
                Ok((q, Some(log)))
            }
            MixtureSource::IsingTwoComponent => {
                let n = model.ground_size();
                let q = ising_two_component_mixture(n)
                    .map_err(|e| CliError::Runtime(format!("ising mixture: {e}")))?;
                Ok((q, None))
            }
            MixtureSource::Path { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Validation(format!("mixture path {}: {e}", path.display()))
                })?;
                let q: MixtureProposal = serde_json::from_str(&text).map_err(|e| {
                    CliError::Validation(format!("mixture path {}: {e}", path.display()))
                })?;
                Ok((q, None))
            }
        }
    }

    /// Assembles the runnable sampler spec for one entry.
    pub fn resolve_sampler(
        &self,
        model: &Model,
        sampler: &SamplerConfig,
        mixture: Option<MixtureProposal>,
    ) -> Result<SamplerSpec, CliError> {
        let alpha = sampler.alpha.unwrap_or(self.alpha);
        let size = self.fixed_size;
        let need_size = || {
            size.ok_or_else(|| {
                CliError::Validation(format!(
                    "sampler {}: fixed_size required",
                    sampler.label
                ))
            })
        };
        let need_mixture = || {
            mixture.clone().ok_or_else(|| {
                CliError::Validation(format!("sampler {}: mixture required", sampler.label))
            })
        };
        let spec = match sampler.kind {
            SamplerKind::Gibbs => SamplerSpec::Gibbs,
            SamplerKind::M3 => SamplerSpec::M3 {
                mixture: need_mixture()?,
            },
            SamplerKind::Combined => SamplerSpec::Combined {
                mixture: need_mixture()?,
                alpha,
            },
            SamplerKind::GibbsSwap => SamplerSpec::GibbsSwap { size: need_size()? },
            SamplerKind::M3FixedSize => SamplerSpec::M3FixedSize {
                mixture: need_mixture()?,
                size: need_size()?,
            },
            SamplerKind::CombinedFixedSize => SamplerSpec::CombinedFixedSize {
                mixture: need_mixture()?,
                alpha,
                size: need_size()?,
            },
        };
        spec.validate(model.ground_size())
            .map_err(|e| CliError::Validation(format!("sampler {}: {e}", sampler.label)))?;
        Ok(spec)
    }
}

/// Named presets shipped with the binary.
pub const PRESETS: &[(&str, &str)] = &[
    ("ising6", include_str!("../presets/ising6.json")),
    ("ising7", include_str!("../presets/ising7.json")),
    ("ising8", include_str!("../presets/ising8.json")),
    ("water-like", include_str!("../presets/water-like.json")),
    ("sensor-like", include_str!("../presets/sensor-like.json")),
    ("game-like", include_str!("../presets/game-like.json")),
];

/// Loads a config from a file path or a preset name.
pub fn load_config(spec: &str) -> Result<ExperimentConfig, CliError> {
    let path = Path::new(spec);
    let text = if path.exists() {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?
    } else if let Some((_, preset)) = PRESETS.iter().find(|(name, _)| *name == spec) {
        preset.to_string()
    } else {
        return Err(CliError::Validation(format!(
            "config {spec:?}: not a file and not a preset (presets: {})",
            PRESETS
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        )));
    };
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("config {spec}: {e}")))?;
    config.validate()?;
    Ok(config)
}
