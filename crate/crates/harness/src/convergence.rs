//! ε-convergence of reward traces.

use std::fmt;

use irsa_rl::environment::{train, TrainConfig};
use irsa_rl::stats::Summary;

use crate::error::{HarnessError, Result};
use crate::pool::run_cells;
use crate::sweep::RepSeeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceTime {
    At(usize),
    NotConverged,
}

impl ConvergenceTime {
    pub fn index(self) -> Option<usize> {
        match self {
            ConvergenceTime::At(i) => Some(i),
            ConvergenceTime::NotConverged => None,
        }
    }
}

impl fmt::Display for ConvergenceTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvergenceTime::At(i) => write!(f, "{i}"),
            ConvergenceTime::NotConverged => f.write_str("not_converged"),
        }
    }
}

/// Smallest index `i` with `|trace[j] - trace[last]| ≤ epsilon` for every
/// `j ≥ i`. A trace whose only qualifying point is the last one and whose
/// last three steps move in one direction is still trending, hence not
/// converged.
pub fn epsilon_convergence_time(trace: &[f64], epsilon: f64) -> Result<ConvergenceTime> {
    if trace.is_empty() {
        return Err(HarnessError::Config("empty trace".into()));
    }
    if !(epsilon > 0.0) {
        return Err(HarnessError::Config(format!("epsilon {epsilon} must be positive")));
    }
    let last = trace.len() - 1;
    let target = trace[last];
    let mut i = last;
    while i > 0 && (trace[i - 1] - target).abs() <= epsilon {
        i -= 1;
    }
    if i == last && last >= 3 {
        let deltas: Vec<f64> = trace[last - 3..].windows(2).map(|p| p[1] - p[0]).collect();
        if deltas.iter().all(|&d| d > 0.0) || deltas.iter().all(|&d| d < 0.0) {
            return Ok(ConvergenceTime::NotConverged);
        }
    }
    Ok(ConvergenceTime::At(i))
}

/// Which reward trace of a training run is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// Per-iteration mean reward inside one (zero-based) episode; times
    /// are in-episode iterations.
    Episode(usize),
    /// Per-episode mean reward over the run; times are training
    /// iterations, i.e. episode index times `L_E`.
    LearningCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub load: f64,
    pub virtual_experience: bool,
    /// Convergence time of each repetition.
    pub times: Vec<ConvergenceTime>,
    /// Summary over the converged repetitions.
    pub summary: Summary,
    /// Convergence time of the trace averaged over repetitions.
    pub mean_trace_time: ConvergenceTime,
}

impl ConvergencePoint {
    pub fn non_converged(&self) -> usize {
        self.times.iter().filter(|t| t.index().is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub epsilon: f64,
    pub level: f64,
    pub kind: TraceKind,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceReport {
    pub fn point(&self, load: f64, virtual_experience: bool) -> Option<&ConvergencePoint> {
        self.points
            .iter()
            .find(|p| p.load == load && p.virtual_experience == virtual_experience)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub loads: Vec<f64>,
    pub variants: Vec<bool>,
    pub repetitions: usize,
    pub epsilon: f64,
    pub level: f64,
    pub kind: TraceKind,
}

fn measured_trace(config: &TrainConfig<f64>, kind: TraceKind) -> Result<Vec<f64>> {
    let outcome = train(config)?;
    Ok(match kind {
        TraceKind::Episode(e) => outcome.episode_rewards(e),
        TraceKind::LearningCurve => outcome.episode_means(),
    })
}

fn scale(time: ConvergenceTime, kind: TraceKind, per_episode: usize) -> ConvergenceTime {
    match (time, kind) {
        (ConvergenceTime::At(i), TraceKind::LearningCurve) => ConvergenceTime::At(i * per_episode),
        _ => time,
    }
}

/// ε-convergence times of training runs at each load, for plain and/or
/// virtual-experience learners. Repetition `r` at load `G` trains from the
/// same seed for both variants.
pub fn convergence_experiment(
    spec: &ConvergenceSpec,
    base: &TrainConfig<f64>,
    master_seed: u64,
    workers: usize,
) -> Result<ConvergenceReport> {
    if spec.repetitions == 0 {
        return Err(HarnessError::Config("convergence needs at least one repetition".into()));
    }
    if let TraceKind::Episode(e) = spec.kind {
        if e >= base.episodes {
            return Err(HarnessError::Config(format!(
                "episode {e} beyond the {} training episodes",
                base.episodes
            )));
        }
    }
    let mut points = Vec::new();
    for &g in &spec.loads {
        for &v in &spec.variants {
            points.push((g, v));
        }
    }
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.repetitions).map(move |r| (p, r)))
        .collect();
    let traces = run_cells(workers, &cells, |&(p, rep)| {
        let (load, virtual_experience) = points[p];
        let config = TrainConfig {
            load,
            virtual_experience,
            seed: RepSeeds::new(master_seed, load, base.n_slots, rep).train,
            ..base.clone()
        };
        measured_trace(&config, spec.kind)
    })?;
    let per_episode = base.iterations_per_episode;
    let points = points
        .iter()
        .zip(traces.chunks(spec.repetitions))
        .map(|(&(load, virtual_experience), reps)| {
            let times = reps
                .iter()
                .map(|t| Ok(scale(epsilon_convergence_time(t, spec.epsilon)?, spec.kind, per_episode)))
                .collect::<Result<Vec<_>>>()?;
            let converged: Vec<f64> = times.iter().filter_map(|t| t.index()).map(|i| i as f64).collect();
            let len = reps.iter().map(Vec::len).min().unwrap_or(0);
            let mean_trace: Vec<f64> = (0..len)
                .map(|k| reps.iter().map(|t| t[k]).sum::<f64>() / reps.len() as f64)
                .collect();
            Ok(ConvergencePoint {
                load,
                virtual_experience,
                times,
                summary: Summary::from_samples(&converged, spec.level),
                mean_trace_time: scale(epsilon_convergence_time(&mean_trace, spec.epsilon)?, spec.kind, per_episode),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        epsilon: spec.epsilon,
        level: spec.level,
        kind: spec.kind,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(epsilon_convergence_time(&[-2.0; 6], 0.5).unwrap(), ConvergenceTime::At(0));
        let t = [-5.0, -3.0, -1.0, -0.8, -0.9, -0.85];
        assert_eq!(epsilon_convergence_time(&t, 0.5).unwrap(), ConvergenceTime::At(2));
        let worsening = [-1.0, -2.0, -3.0, -4.0, -5.0];
        assert_eq!(epsilon_convergence_time(&worsening, 0.5).unwrap(), ConvergenceTime::NotConverged);
        assert_eq!(epsilon_convergence_time(&[3.0], 0.5).unwrap(), ConvergenceTime::At(0));
        assert!(epsilon_convergence_time(&[], 0.5).is_err());
        assert!(epsilon_convergence_time(&[1.0], 0.0).is_err());
    }

    #[test]
    fn settled_jump_is_converged_at_the_end() {
        // Only the last point qualifies but the tail is not monotone.
        let t = [0.0, 5.0, 0.0, 5.0, 0.0];
        assert_eq!(epsilon_convergence_time(&t, 0.5).unwrap(), ConvergenceTime::At(4));
    }
}
