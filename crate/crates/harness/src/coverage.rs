//! Coverage time of the state-action space with and without virtual
//! experience, against the predicted ratio `log(1-P) / log(1-|H̃|P)`.

use std::collections::HashSet;

use irsa_rl::agent::{Level, ObservationHistory};
use irsa_rl::environment::{train_network, TrainConfig};
use irsa_rl::stats::Summary;
use irsa_rl::virtual_experience::{coverage_time, predicted_coverage_ratio, ClassCache};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};
use crate::pool::run_cells;
use crate::sweep::RepSeeds;

/// Histories a node can act from when at most one packet arrives and at
/// most one leaves per frame: steps of -1, 0 or +1 and a nonempty newest
/// buffer.
pub fn reachable_histories(capacity: Level, window: usize) -> Vec<ObservationHistory> {
    let mut out: Vec<Vec<Level>> = (0..=capacity).map(|b| vec![b]).collect();
    for _ in 1..window {
        out = out
            .into_iter()
            .flat_map(|h| {
                let last = i32::from(*h.last().expect("nonempty"));
                (last - 1..=last + 1)
                    .filter(|&b| (0..=i32::from(capacity)).contains(&b))
                    .map(move |b| {
                        let mut g = h.clone();
                        g.push(b as Level);
                        g
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    out.into_iter()
        .filter(|h| *h.last().expect("nonempty") >= 1)
        .map(|h| ObservationHistory::new(h).expect("window >= 1"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSpec {
    pub load: f64,
    pub repetitions: usize,
    /// Training frames per run; nodes not covered by then count as
    /// uncovered.
    pub budget: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    /// Number of (history, action) pairs in the reachable space.
    pub space_pairs: usize,
    /// Mean class size seen from a reachable history, restricted to the
    /// reachable space.
    pub class_size: f64,
    /// Estimated per-frame probability that a given pair receives a plain
    /// update, from the runs without virtual experience.
    pub p_hat: f64,
    pub predicted_ratio: Option<f64>,
    pub plain: Summary,
    pub with_virtual: Summary,
    pub uncovered_plain: usize,
    pub uncovered_virtual: usize,
}

impl CoverageReport {
    pub fn measured_ratio(&self) -> f64 {
        self.with_virtual.mean / self.plain.mean
    }

    /// Measured ratio within a factor `k` of the prediction.
    pub fn within_factor(&self, k: f64) -> bool {
        match self.predicted_ratio {
            Some(p) => {
                let r = self.measured_ratio() / p;
                r.is_finite() && r <= k && r >= 1.0 / k
            }
            None => false,
        }
    }
}

struct RunCoverage {
    times: Vec<Option<usize>>,
    plain_hits: u64,
    node_frames: u64,
}

fn run_once(config: &TrainConfig<f64>, space: &HashSet<ObservationHistory>, size: usize) -> Result<RunCoverage> {
    let nodes = config.n_nodes();
    let network = config.network()?.record_touched(true);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut per_node: Vec<Vec<Vec<(ObservationHistory, usize)>>> = vec![Vec::new(); nodes];
    let mut plain_hits = 0u64;
    train_network(config, network, &mut rng, |_, step| {
        for frames in per_node.iter_mut() {
            frames.push(Vec::new());
        }
        for (node, action, histories) in &step.touched {
            let frame = per_node[*node].last_mut().expect("pushed above");
            for h in histories.iter().filter(|h| space.contains(*h)) {
                frame.push((h.clone(), *action));
            }
            if !config.virtual_experience {
                plain_hits += frame.len() as u64;
            }
        }
    })?;
    let frames = per_node.first().map_or(0, Vec::len) as u64;
    Ok(RunCoverage {
        times: per_node.into_iter().map(|trace| coverage_time(trace, size)).collect(),
        plain_hits,
        node_frames: frames * nodes as u64,
    })
}

/// Runs the same seeds with plain and virtual updates and compares the
/// per-node coverage times.
pub fn coverage_experiment(
    spec: &CoverageSpec,
    base: &TrainConfig<f64>,
    master_seed: u64,
    workers: usize,
) -> Result<CoverageReport> {
    if spec.repetitions == 0 || spec.budget == 0 {
        return Err(HarnessError::Config("coverage needs repetitions and a positive budget".into()));
    }
    let capacity = base.params.capacity;
    let window = base.params.window;
    let histories = reachable_histories(capacity, window);
    let space: HashSet<ObservationHistory> = histories.iter().cloned().collect();
    let size = space.len() * base.params.max_degree;

    let mut cache = ClassCache::new(capacity, window)?;
    let mut members = 0usize;
    for h in &histories {
        members += cache.class_of(h)?.members().iter().filter(|m| space.contains(*m)).count();
    }
    let class_size = members as f64 / histories.len() as f64;

    let per_episode = base.iterations_per_episode.max(1);
    let cells: Vec<(bool, usize)> = [false, true]
        .into_iter()
        .flat_map(|v| (0..spec.repetitions).map(move |r| (v, r)))
        .collect();
    let runs = run_cells(workers, &cells, |&(virtual_experience, rep)| {
        let config = TrainConfig {
            load: spec.load,
            virtual_experience,
            episodes: spec.budget.div_ceil(per_episode),
            iterations_per_episode: per_episode,
            seed: RepSeeds::new(master_seed, spec.load, base.n_slots, rep).train,
            ..base.clone()
        };
        run_once(&config, &space, size)
    })?;
    let (plain_runs, virtual_runs) = runs.split_at(spec.repetitions);
    let collect = |runs: &[RunCoverage]| {
        let times: Vec<f64> = runs
            .iter()
            .flat_map(|r| r.times.iter().flatten().map(|&t| t as f64))
            .collect();
        let missing = runs.iter().map(|r| r.times.iter().filter(|t| t.is_none()).count()).sum();
        (Summary::from_samples(&times, spec.level), missing)
    };
    let (plain, uncovered_plain) = collect(plain_runs);
    let (with_virtual, uncovered_virtual) = collect(virtual_runs);
    let hits: u64 = plain_runs.iter().map(|r| r.plain_hits).sum();
    let node_frames: u64 = plain_runs.iter().map(|r| r.node_frames).sum();
    let p_hat = if node_frames == 0 {
        0.0
    } else {
        hits as f64 / node_frames as f64 / (space.len() * base.params.max_degree) as f64
    };
    Ok(CoverageReport {
        space_pairs: size,
        class_size,
        p_hat,
        predicted_ratio: predicted_coverage_ratio(p_hat, class_size),
        plain,
        with_virtual,
        uncovered_plain,
        uncovered_virtual,
    })
}
