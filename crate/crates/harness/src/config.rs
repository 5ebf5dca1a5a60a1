//! TOML experiment configuration.
//!
//! Every key is optional; omitted keys take the defaults shown below.
//!
//! ```toml
//! seed = 1
//! workers = 0                   # 0 lets rayon pick
//! level = 0.975                 # confidence level of reported intervals
//!
//! [train]
//! n_slots = 10
//! load = 0.5
//! episodes = 50
//! iterations_per_episode = 30
//! virtual_experience = false
//! bad_episode_reset = true
//! initial_buffers = "uniform"   # or an integer level
//! arrivals = { kind = "bernoulli", p = 0.5 }
//! load_schedule = []            # [{ episode = 0, load = 0.5 }, ...]; parsed, not simulated
//!
//! [agent]
//! epsilon = 0.05
//! gamma = 0.98
//! window = 4
//! capacity = 5
//! max_degree = 8
//! learning_rate = { kind = "geometric", base = 1.111, decay = 0.9 }
//!
//! [sweep]
//! loads = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! frame_sizes = [10]
//! variants = ["slotted_aloha", "vanilla_irsa", "dec_rl", "dec_rl_virtual", "random_strategy"]
//! repetitions = 20
//! trials = 250
//! evaluation = "distribution"   # or "greedy"
//!
//! [convergence]
//! loads = [0.2, 0.4]
//! epsilon = 0.5
//! repetitions = 40
//! episode = 24                  # zero-based episode whose trace is measured
//! level = 0.95
//!
//! [virtual_compare]
//! load = 0.7
//! grid = [100, 500, 1000, 1500, 2000]
//! speedup_loads = [0.6, 0.7]
//! repetitions = 20
//! trials = 250
//!
//! [waterfall]
//! loads = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! repetitions = 20
//! trials = 250
//! low = { epsilon = 0.05, gamma = 0.98 }
//! high = { epsilon = 0.1, gamma = 0.9 }
//!
//! [coverage]                    # run by virtual-compare
//! load = 0.7
//! window = 3
//! repetitions = 10
//! budget = 15000                # training frames per run
//! ```

use std::path::Path;

use irsa_rl::agent::{LearningParams, LearningRate};
use irsa_rl::environment::{ArrivalModel, InitialBuffers, TrainConfig};
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::sweep::{EvalMode, SweepSpec, Variant};
use crate::waterfall::{Preset, WaterfallPresets};

fn default_grid() -> Vec<f64> {
    (1..=10).map(|k| f64::from(k) / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workers: usize,
    pub level: f64,
    pub train: TrainSection,
    pub agent: AgentSection,
    pub sweep: SweepSection,
    pub convergence: ConvergenceSection,
    pub virtual_compare: VirtualCompareSection,
    pub waterfall: WaterfallSection,
    pub coverage: CoverageSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 0,
            level: 0.975,
            train: TrainSection::default(),
            agent: AgentSection::default(),
            sweep: SweepSection::default(),
            convergence: ConvergenceSection::default(),
            virtual_compare: VirtualCompareSection::default(),
            waterfall: WaterfallSection::default(),
            coverage: CoverageSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitialBuffersSetting {
    Named(UniformTag),
    Level(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformTag {
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSetting {
    Bernoulli { p: f64 },
    Poisson { mean: f64 },
    Deterministic { count: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadStep {
    pub episode: usize,
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub n_slots: usize,
    pub load: f64,
    pub episodes: usize,
    pub iterations_per_episode: usize,
    pub virtual_experience: bool,
    pub bad_episode_reset: bool,
    pub initial_buffers: InitialBuffersSetting,
    pub arrivals: ArrivalSetting,
    pub load_schedule: Vec<LoadStep>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            n_slots: 10,
            load: 0.5,
            episodes: 50,
            iterations_per_episode: 30,
            virtual_experience: false,
            bad_episode_reset: true,
            initial_buffers: InitialBuffersSetting::Named(UniformTag::Uniform),
            arrivals: ArrivalSetting::Bernoulli { p: 0.5 },
            load_schedule: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSetting {
    Geometric { base: f64, decay: f64 },
    Polynomial { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub epsilon: f64,
    pub gamma: f64,
    pub window: usize,
    pub capacity: u16,
    pub max_degree: usize,
    pub learning_rate: RateSetting,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            gamma: 0.98,
            window: 4,
            capacity: 5,
            max_degree: 8,
            learning_rate: RateSetting::Geometric { base: 1.111, decay: 0.9 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub loads: Vec<f64>,
    pub frame_sizes: Vec<usize>,
    pub variants: Vec<String>,
    pub repetitions: usize,
    pub trials: usize,
    pub evaluation: EvalMode,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            loads: default_grid(),
            frame_sizes: vec![10],
            variants: Variant::ALL.iter().map(ToString::to_string).collect(),
            repetitions: 20,
            trials: 250,
            evaluation: EvalMode::Distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub loads: Vec<f64>,
    pub epsilon: f64,
    pub repetitions: usize,
    pub episode: usize,
    pub level: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            loads: vec![0.2, 0.4],
            epsilon: 0.5,
            repetitions: 40,
            episode: 24,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VirtualCompareSection {
    pub load: f64,
    pub grid: Vec<usize>,
    pub speedup_loads: Vec<f64>,
    pub repetitions: usize,
    pub trials: usize,
}

impl Default for VirtualCompareSection {
    fn default() -> Self {
        Self {
            load: 0.7,
            grid: vec![100, 500, 1000, 1500, 2000],
            speedup_loads: vec![0.6, 0.7],
            repetitions: 20,
            trials: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaterfallSection {
    pub loads: Vec<f64>,
    pub repetitions: usize,
    pub trials: usize,
    pub low: Preset,
    pub high: Preset,
}

impl Default for WaterfallSection {
    fn default() -> Self {
        let presets = WaterfallPresets::default();
        Self {
            loads: default_grid(),
            repetitions: 20,
            trials: 250,
            low: presets.low,
            high: presets.high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageSection {
    pub load: f64,
    pub window: usize,
    pub repetitions: usize,
    pub budget: usize,
}

impl Default for CoverageSection {
    fn default() -> Self {
        Self {
            load: 0.7,
            window: 3,
            repetitions: 10,
            budget: 15_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(HarnessError::Config(format!("level {} outside (0, 1)", self.level)));
        }
        self.train_config()?.validate()?;
        self.sweep_spec()?.validate()?;
        for step in &self.train.load_schedule {
            if !(step.load > 0.0 && step.load.is_finite()) {
                return Err(HarnessError::Config(format!("scheduled load {} must be positive", step.load)));
            }
        }
        let c = &self.convergence;
        if !(c.epsilon > 0.0) || !(c.level > 0.0 && c.level < 1.0) {
            return Err(HarnessError::Config("convergence needs epsilon > 0 and level in (0, 1)".into()));
        }
        Ok(())
    }

    /// Learning parameters of the `[agent]` table.
    pub fn learning_params(&self) -> LearningParams<f64> {
        let a = &self.agent;
        LearningParams {
            epsilon: a.epsilon,
            gamma: a.gamma,
            learning_rate: match a.learning_rate {
                RateSetting::Geometric { base, decay } => LearningRate::Geometric { base, decay },
                RateSetting::Polynomial { exponent } => LearningRate::Polynomial { exponent },
            },
            window: a.window,
            capacity: a.capacity,
            max_degree: a.max_degree,
        }
    }

    /// Training configuration of the `[train]` and `[agent]` tables.
    pub fn train_config(&self) -> Result<TrainConfig<f64>> {
        let t = &self.train;
        let config = TrainConfig {
            n_slots: t.n_slots,
            load: t.load,
            params: self.learning_params(),
            episodes: t.episodes,
            iterations_per_episode: t.iterations_per_episode,
            virtual_experience: t.virtual_experience,
            arrivals: match t.arrivals {
                ArrivalSetting::Bernoulli { p } => ArrivalModel::Bernoulli { p },
                ArrivalSetting::Poisson { mean } => ArrivalModel::Poisson { mean },
                ArrivalSetting::Deterministic { count } => ArrivalModel::Deterministic { count },
            },
            initial_buffers: match t.initial_buffers {
                InitialBuffersSetting::Named(UniformTag::Uniform) => InitialBuffers::Uniform,
                InitialBuffersSetting::Level(b) => InitialBuffers::Level(b),
            },
            bad_episode_reset: t.bad_episode_reset,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let s = &self.sweep;
        let variants = s
            .variants
            .iter()
            .map(|v| v.parse())
            .collect::<Result<Vec<Variant>>>()?;
        Ok(SweepSpec {
            loads: s.loads.clone(),
            frame_sizes: s.frame_sizes.clone(),
            variants,
            repetitions: s.repetitions,
            trials: s.trials,
            level: self.level,
            evaluation: s.evaluation,
        })
    }

    pub fn waterfall_presets(&self) -> WaterfallPresets {
        WaterfallPresets {
            low: self.waterfall.low,
            high: self.waterfall.high,
        }
    }
}
