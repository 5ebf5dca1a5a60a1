//! Throughput as a function of training length, with and without virtual
//! experience.

use irsa_rl::environment::TrainConfig;
use irsa_rl::stats::Summary;

use crate::error::{HarnessError, Result};
use crate::pool::run_cells;
use crate::sweep::{rep_throughput, EvalMode, RepSeeds, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCompareSpec {
    pub load: f64,
    /// Total training frames per run; each must split evenly over the base
    /// configuration's episodes.
    pub grid: Vec<usize>,
    pub repetitions: usize,
    pub trials: usize,
    pub level: f64,
    pub evaluation: EvalMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualCompareRow {
    pub iterations: usize,
    pub variant: Variant,
    pub summary: Summary,
    /// This length maximizes the variant's mean throughput over the grid.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualComparison {
    pub load: f64,
    pub rows: Vec<VirtualCompareRow>,
}

impl VirtualComparison {
    /// Training length with the highest mean throughput; ties go to the
    /// shorter run.
    pub fn argmax(&self, variant: Variant) -> Option<usize> {
        self.rows.iter().find(|r| r.variant == variant && r.best).map(|r| r.iterations)
    }
}

/// Trains both learned variants for every length in the grid and evaluates
/// the result. A length of 0 deploys untrained agents, which fall back to
/// the uniform distribution.
pub fn compare_virtual(
    spec: &VirtualCompareSpec,
    base: &TrainConfig<f64>,
    master_seed: u64,
    workers: usize,
) -> Result<VirtualComparison> {
    if spec.grid.is_empty() {
        return Err(HarnessError::Config("iteration grid is empty".into()));
    }
    if spec.repetitions == 0 || spec.trials == 0 {
        return Err(HarnessError::Config("repetitions and trials must be positive".into()));
    }
    let episodes = base.episodes.max(1);
    if let Some(l) = spec.grid.iter().find(|&&l| l % episodes != 0) {
        return Err(HarnessError::Config(format!(
            "training length {l} is not a multiple of {episodes} episodes"
        )));
    }
    let variants = [Variant::DecRl, Variant::DecRlVirtual];
    let points: Vec<(usize, Variant)> = spec
        .grid
        .iter()
        .flat_map(|&l| variants.iter().map(move |&v| (l, v)))
        .collect();
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.repetitions).map(move |r| (p, r)))
        .collect();
    let samples = run_cells(workers, &cells, |&(p, rep)| {
        let (length, variant) = points[p];
        let config = TrainConfig {
            load: spec.load,
            episodes,
            iterations_per_episode: length / episodes,
            ..base.clone()
        };
        // Seeds depend on the repetition only, so every length and variant
        // is evaluated against the same channel draws.
        let seeds = RepSeeds::new(master_seed, spec.load, config.n_slots, rep);
        rep_throughput(variant, &config, spec.trials, spec.evaluation, seeds)
    })?;
    let mut rows: Vec<VirtualCompareRow> = points
        .iter()
        .zip(samples.chunks(spec.repetitions))
        .map(|(&(iterations, variant), reps)| VirtualCompareRow {
            iterations,
            variant,
            summary: Summary::from_samples(reps, spec.level),
            best: false,
        })
        .collect();
    for v in variants {
        let mut best: Option<usize> = None;
        for (k, row) in rows.iter().enumerate().filter(|(_, r)| r.variant == v) {
            let better = match best {
                None => true,
                Some(b) => {
                    let cur = &rows[b];
                    row.summary.mean > cur.summary.mean
                        || (row.summary.mean == cur.summary.mean && row.iterations < cur.iterations)
                }
            };
            if better {
                best = Some(k);
            }
        }
        if let Some(b) = best {
            rows[b].best = true;
        }
    }
    Ok(VirtualComparison { load: spec.load, rows })
}
