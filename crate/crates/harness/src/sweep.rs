//! Protocol sweeps over loads, frame sizes and variants.

use std::fmt;
use std::str::FromStr;

use irsa_rl::environment::{evaluate, train, EvalPolicy, TrainConfig};
use irsa_rl::irsa::DegreeDistribution;
use irsa_rl::seed;
use irsa_rl::stats::Summary;
use serde::Deserialize;

use crate::error::{HarnessError, Result};
use crate::pool::run_cells;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    SlottedAloha,
    VanillaIrsa,
    DecRl,
    DecRlVirtual,
    RandomStrategy,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::SlottedAloha,
        Variant::VanillaIrsa,
        Variant::DecRl,
        Variant::DecRlVirtual,
        Variant::RandomStrategy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::SlottedAloha => "slotted_aloha",
            Variant::VanillaIrsa => "vanilla_irsa",
            Variant::DecRl => "dec_rl",
            Variant::DecRlVirtual => "dec_rl_virtual",
            Variant::RandomStrategy => "random_strategy",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Variant::DecRl | Variant::DecRlVirtual)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown variant `{s}`")))
    }
}

/// How a trained network is deployed for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Each node samples from its extracted degree distribution, all nodes
    /// saturated.
    #[default]
    Distribution,
    /// Per-state argmax play inside the buffered network.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub loads: Vec<f64>,
    pub frame_sizes: Vec<usize>,
    pub variants: Vec<Variant>,
    pub repetitions: usize,
    pub trials: usize,
    /// Confidence level of the reported intervals.
    pub level: f64,
    pub evaluation: EvalMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.loads.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(HarnessError::Config(format!("load {g} must be positive and finite")));
        }
        if self.variants.is_empty() {
            return Err(HarnessError::Config("no protocol variants selected".into()));
        }
        if self.frame_sizes.contains(&0) {
            return Err(HarnessError::Config("frame size must be at least 1".into()));
        }
        if self.repetitions == 0 || self.trials == 0 {
            return Err(HarnessError::Config("repetitions and trials must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(HarnessError::Config(format!("level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub variant: Variant,
    pub load: f64,
    pub n_slots: usize,
    pub nodes: usize,
    /// Summary over repetitions of each repetition's mean throughput.
    pub summary: Summary,
}

/// Seeds of one repetition, shared by all variants at the same point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepSeeds {
    pub train: u64,
    pub eval: u64,
}

impl RepSeeds {
    pub fn new(master: u64, load: f64, n_slots: usize, rep: usize) -> Self {
        let cell = seed::derive(master, &[seed::load_tag(load), n_slots as u64, rep as u64]);
        Self {
            train: seed::derive(cell, &[1]),
            eval: seed::derive(cell, &[2]),
        }
    }
}

/// Mean throughput of one repetition of `variant` under `config`.
///
/// Learned variants train from `seeds.train` first; the fixed protocols
/// ignore the learning settings.
pub fn rep_throughput(
    variant: Variant,
    config: &TrainConfig<f64>,
    trials: usize,
    mode: EvalMode,
    seeds: RepSeeds,
) -> Result<f64> {
    let fixed = |dist: DegreeDistribution<f64>| -> Result<f64> {
        Ok(evaluate(EvalPolicy::Distribution(&dist), config, trials, 0.95, seeds.eval)?.mean())
    };
    match variant {
        Variant::SlottedAloha => fixed(DegreeDistribution::slotted_aloha()),
        Variant::VanillaIrsa => fixed(DegreeDistribution::baseline()),
        Variant::RandomStrategy => fixed(DegreeDistribution::uniform(config.params.max_degree)?),
        Variant::DecRl | Variant::DecRlVirtual => {
            let config = TrainConfig {
                virtual_experience: variant == Variant::DecRlVirtual,
                seed: seeds.train,
                ..config.clone()
            };
            let outcome = train(&config)?;
            let eval = match mode {
                EvalMode::Distribution => {
                    let policies = outcome.policies();
                    evaluate(EvalPolicy::PerNode(&policies), &config, trials, 0.95, seeds.eval)?
                }
                EvalMode::Greedy => evaluate(EvalPolicy::Greedy(&outcome.network), &config, trials, 0.95, seeds.eval)?,
            };
            Ok(eval.mean())
        }
    }
}

/// Mean throughput with a Student-t interval for every (variant, G, N).
/// Rows come out ordered by frame size, load, then variant order of `spec`.
pub fn run_sweep(spec: &SweepSpec, base: &TrainConfig<f64>, master_seed: u64, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let mut points = Vec::new();
    for &n in &spec.frame_sizes {
        for &g in &spec.loads {
            for &v in &spec.variants {
                points.push((v, g, n));
            }
        }
    }
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.repetitions).map(move |r| (p, r)))
        .collect();
    let samples = run_cells(workers, &cells, |&(p, rep)| {
        let (variant, load, n_slots) = points[p];
        let config = TrainConfig { load, n_slots, ..base.clone() };
        config.validate()?;
        rep_throughput(variant, &config, spec.trials, spec.evaluation, RepSeeds::new(master_seed, load, n_slots, rep))
    })?;
    Ok(points
        .iter()
        .zip(samples.chunks(spec.repetitions))
        .map(|(&(variant, load, n_slots), reps)| SweepRow {
            variant,
            load,
            n_slots,
            nodes: TrainConfig { load, n_slots, ..base.clone() }.n_nodes(),
            summary: Summary::from_samples(reps, spec.level),
        })
        .collect())
}
