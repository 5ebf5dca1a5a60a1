//! Random, low-load and high-load learned parameterizations across loads.

use irsa_rl::environment::TrainConfig;
use irsa_rl::stats::Summary;
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::pool::run_cells;
use crate::sweep::{rep_throughput, EvalMode, RepSeeds, Variant};

/// Exploration and discount overrides for one learned parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub epsilon: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterfallPresets {
    pub low: Preset,
    pub high: Preset,
}

impl Default for WaterfallPresets {
    fn default() -> Self {
        Self {
            low: Preset { epsilon: 0.05, gamma: 0.98 },
            high: Preset { epsilon: 0.1, gamma: 0.9 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Random,
    Low,
    High,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random_strategy",
            Scheme::Low => "dec_rl_low",
            Scheme::High => "dec_rl_high",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallRow {
    pub load: f64,
    pub random: Summary,
    pub low: Summary,
    pub high: Summary,
    /// Best of the two learned parameterizations.
    pub dec_rl_envelope: f64,
    /// Best of all three schemes.
    pub envelope: f64,
    pub winner: Scheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfallSpec {
    pub loads: Vec<f64>,
    pub presets: WaterfallPresets,
    pub repetitions: usize,
    pub trials: usize,
    pub level: f64,
    pub evaluation: EvalMode,
}

pub fn waterfall_suite(
    spec: &WaterfallSpec,
    base: &TrainConfig<f64>,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<WaterfallRow>> {
    if spec.repetitions == 0 || spec.trials == 0 {
        return Err(HarnessError::Config("repetitions and trials must be positive".into()));
    }
    let schemes = [Scheme::Random, Scheme::Low, Scheme::High];
    let cells: Vec<(usize, usize, usize)> = (0..spec.loads.len())
        .flat_map(|g| (0..schemes.len()).flat_map(move |s| (0..spec.repetitions).map(move |r| (g, s, r))))
        .collect();
    let samples = run_cells(workers, &cells, |&(g, s, rep)| {
        let load = spec.loads[g];
        let mut config = TrainConfig { load, ..base.clone() };
        let variant = match schemes[s] {
            Scheme::Random => Variant::RandomStrategy,
            Scheme::Low | Scheme::High => {
                let preset = if schemes[s] == Scheme::Low { spec.presets.low } else { spec.presets.high };
                config.params.epsilon = preset.epsilon;
                config.params.gamma = preset.gamma;
                Variant::DecRl
            }
        };
        config.validate()?;
        rep_throughput(variant, &config, spec.trials, spec.evaluation, RepSeeds::new(master_seed, load, config.n_slots, rep))
    })?;
    let per_load = schemes.len() * spec.repetitions;
    Ok(spec
        .loads
        .iter()
        .zip(samples.chunks(per_load.max(1)))
        .map(|(&load, block)| {
            let mut s = block.chunks(spec.repetitions).map(|reps| Summary::from_samples(reps, spec.level));
            let (random, low, high) = (s.next().unwrap(), s.next().unwrap(), s.next().unwrap());
            let dec_rl_envelope = low.mean.max(high.mean);
            let winner = [(Scheme::Random, random.mean), (Scheme::Low, low.mean), (Scheme::High, high.mean)]
                .into_iter()
                .fold((Scheme::Random, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
                .0;
            WaterfallRow {
                load,
                random,
                low,
                high,
                dec_rl_envelope,
                envelope: dec_rl_envelope.max(random.mean),
                winner,
            }
        })
        .collect())
}
