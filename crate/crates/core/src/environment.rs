//! Frame-synchronous Dec-POMDP driver.
//!
//! Every frame, each node with a non-empty buffer sends its head-of-queue
//! packet as `l` replicas, the receiver runs SIC, decoded nodes drop one
//! packet, new arrivals are queued (tail-drop at capacity), histories shift
//! and learners update their tables.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::agent::{
    extract_policy, greedy_action, q_update, reward, select_action, Capacity, Level, LearningParams,
    ObservationHistory, QTable,
};
use crate::error::{Error, Result};
use crate::irsa::{cap_degree, simulate_frame, DegreeDistribution};
use crate::num::Real;
use crate::stats::Summary;
use crate::virtual_experience::{batch_update, ClassCache};

/// Per-frame packet arrivals at each node, i.i.d. over frames and nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrivalModel {
    Bernoulli { p: f64 },
    Poisson { mean: f64 },
    Deterministic { count: u32 },
}

impl Default for ArrivalModel {
    fn default() -> Self {
        ArrivalModel::Bernoulli { p: 0.5 }
    }
}

impl ArrivalModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ArrivalModel::Bernoulli { p } if !(0.0..=1.0).contains(&p) => {
                Err(Error::Config(format!("bernoulli arrival probability {p} outside [0, 1]")))
            }
            ArrivalModel::Poisson { mean } if !(mean >= 0.0 && mean.is_finite()) => {
                Err(Error::Config(format!("poisson arrival mean {mean} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            ArrivalModel::Bernoulli { p } => u32::from(rng.random::<f64>() < p),
            ArrivalModel::Poisson { mean } => {
                if mean == 0.0 {
                    0
                } else {
                    Poisson::new(mean).expect("validated").sample(rng) as u32
                }
            }
            ArrivalModel::Deterministic { count } => count,
        }
    }
}

/// Initial buffer distribution `I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialBuffers {
    /// Uniform over `0..=B`.
    #[default]
    Uniform,
    Level(Level),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState<T> {
    pub buffer: Level,
    pub history: ObservationHistory,
    pub q: QTable<T>,
}

impl<T: Real> NodeState<T> {
    pub fn new(params: &LearningParams<T>) -> Self {
        Self {
            buffer: 0,
            history: ObservationHistory::filled(0, params.window),
            q: QTable::new(params.max_degree),
        }
    }

    /// Sets the buffer and refills the history with `w` copies of it.
    pub fn restart_at(&mut self, level: Level) {
        self.buffer = level;
        self.history = ObservationHistory::filled(level, self.history.window());
    }

    /// Degree distribution deployed after learning. A node without
    /// experience falls back to the uniform tie-break behaviour.
    pub fn deployed_policy(&self) -> DegreeDistribution<T> {
        let d = self.q.max_degree();
        extract_policy(&self.q, d).unwrap_or_else(|_| DegreeDistribution::uniform(d).expect("d >= 1"))
    }
}

/// How nodes choose their replica count in a frame.
#[derive(Debug, Clone, Copy)]
pub enum Behaviour<'a, T> {
    /// ε-greedy over the node's own table, followed by a table update.
    Learn,
    /// Frozen argmax of the node's table.
    Greedy,
    /// Node `i` samples from `policies[i]`.
    PerNode(&'a [DegreeDistribution<T>]),
    /// Every node samples from one distribution.
    Shared(&'a DegreeDistribution<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStep<T> {
    /// Replica count chosen by each node, `None` for an empty buffer.
    pub actions: Vec<Option<usize>>,
    pub success: Vec<bool>,
    pub rewards: Vec<T>,
    pub arrivals: Vec<u32>,
    /// Packets lost to tail-drop this frame, per node.
    pub dropped: Vec<u32>,
    pub decoded: usize,
    /// Decoded packets per slot.
    pub throughput: T,
    /// Pairs updated this frame as `(node, action, histories)`; only filled
    /// when touch recording is enabled.
    pub touched: Vec<(usize, usize, Vec<ObservationHistory>)>,
}

impl<T: Real> FrameStep<T> {
    pub fn mean_reward(&self) -> T {
        if self.rewards.is_empty() {
            return T::zero();
        }
        self.rewards.iter().copied().sum::<T>() / T::from_count(self.rewards.len())
    }
}

/// All nodes of one network plus the shared frame parameters.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub nodes: Vec<NodeState<T>>,
    pub n_slots: usize,
    pub params: LearningParams<T>,
    pub arrivals: ArrivalModel,
    classes: Option<ClassCache>,
    record_touched: bool,
    dropped_total: u64,
}

impl<T: Real> Network<T> {
    pub fn new(n_nodes: usize, n_slots: usize, params: LearningParams<T>, arrivals: ArrivalModel) -> Self {
        let nodes = (0..n_nodes).map(|_| NodeState::new(&params)).collect();
        Self {
            nodes,
            n_slots,
            params,
            arrivals,
            classes: None,
            record_touched: false,
            dropped_total: 0,
        }
    }

    /// Switches learning updates to class-wide virtual-experience updates.
    pub fn with_virtual_experience(mut self, enabled: bool) -> Result<Self> {
        self.classes = if enabled {
            Some(ClassCache::new(self.params.capacity, self.params.window)?)
        } else {
            None
        };
        Ok(self)
    }

    pub fn record_touched(mut self, enabled: bool) -> Self {
        self.record_touched = enabled;
        self
    }

    pub fn virtual_experience(&self) -> bool {
        self.classes.is_some()
    }

    /// Packets lost to tail-drop since construction.
    pub fn dropped_total(&self) -> u64 {
        self.dropped_total
    }

    /// Draws fresh buffers from `init` and refills histories; tables persist.
    pub fn reset_episode<R: Rng + ?Sized>(&mut self, init: InitialBuffers, rng: &mut R) {
        let capacity = self.params.capacity;
        for node in &mut self.nodes {
            let level = match init {
                InitialBuffers::Uniform => rng.random_range(0..=capacity),
                InitialBuffers::Level(b) => b.min(capacity),
            };
            node.restart_at(level);
        }
    }

    pub fn step_frame<R: Rng + ?Sized>(&mut self, behaviour: Behaviour<'_, T>, rng: &mut R) -> Result<FrameStep<T>> {
        let n = self.nodes.len();
        let capacity = self.params.capacity;
        let mut actions = vec![None; n];
        let mut transmitters = Vec::with_capacity(n);
        let mut degrees = Vec::with_capacity(n);
        for (i, node) in self.nodes.iter().enumerate() {
            if node.buffer == 0 {
                continue;
            }
            let l = match behaviour {
                Behaviour::Learn => select_action(&node.q, &node.history, &self.params, rng),
                Behaviour::Greedy => greedy_action(&node.q, &node.history, rng),
                Behaviour::PerNode(policies) => policies[i].sample(rng),
                Behaviour::Shared(policy) => policy.sample(rng),
            };
            actions[i] = Some(l);
            transmitters.push(i);
            degrees.push(cap_degree(l, self.n_slots));
        }

        let frame = simulate_frame(&degrees, self.n_slots, rng)?;
        let mut success = vec![false; n];
        for (k, &i) in transmitters.iter().enumerate() {
            success[i] = frame.success(k);
        }
        let decoded = frame.decoded_count();
        debug_assert_eq!(success.iter().filter(|&&s| s).count(), decoded);

        let mut rewards = Vec::with_capacity(n);
        let mut arrivals = Vec::with_capacity(n);
        let mut dropped = Vec::with_capacity(n);
        let mut touched = Vec::new();
        for (i, node) in self.nodes.iter_mut().enumerate() {
            let b_prev = node.buffer;
            let f = self.arrivals.sample(rng);
            let unclamped = i64::from(b_prev) - i64::from(success[i]) + i64::from(f);
            let b_next = unclamped.min(i64::from(capacity));
            let lost = (unclamped - b_next) as u32;
            self.dropped_total += u64::from(lost);
            node.buffer = b_next as Level;

            let h_prev = node.history.clone();
            node.history.push(node.buffer);
            let r: T = reward(b_prev, node.buffer, Capacity::Finite(capacity));

            if let (Behaviour::Learn, Some(a)) = (behaviour, actions[i]) {
                match self.classes.as_mut() {
                    Some(cache) => {
                        let out = batch_update(&mut node.q, cache, &h_prev, a, r, &node.history, &self.params)?;
                        if self.record_touched {
                            touched.push((i, a, out.updated));
                        }
                    }
                    None => {
                        q_update(&mut node.q, &h_prev, a, r, &node.history, &self.params);
                        if self.record_touched {
                            touched.push((i, a, vec![h_prev]));
                        }
                    }
                }
            }
            rewards.push(r);
            arrivals.push(f);
            dropped.push(lost);
        }

        Ok(FrameStep {
            actions,
            success,
            rewards,
            arrivals,
            dropped,
            decoded,
            throughput: T::from_count(decoded) / T::from_count(self.n_slots),
            touched,
        })
    }
}

/// True iff the last three consecutive changes are all strict decreases.
pub fn detect_bad_episode<T: Real>(recent_rewards: &[T]) -> bool {
    let n = recent_rewards.len();
    n >= 4 && recent_rewards[n - 4..].windows(2).all(|p| p[1] < p[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub n_slots: usize,
    /// Channel load `G`; the network has `round(G N)` nodes.
    pub load: T,
    pub params: LearningParams<T>,
    pub episodes: usize,
    pub iterations_per_episode: usize,
    pub virtual_experience: bool,
    pub arrivals: ArrivalModel,
    pub initial_buffers: InitialBuffers,
    /// Restart an episode's buffers after three consecutive reward drops.
    pub bad_episode_reset: bool,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            n_slots: 10,
            load: T::lit(0.5),
            params: LearningParams::default(),
            episodes: 50,
            iterations_per_episode: 30,
            virtual_experience: false,
            arrivals: ArrivalModel::default(),
            initial_buffers: InitialBuffers::Uniform,
            bad_episode_reset: true,
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn n_nodes(&self) -> usize {
        (self.load * T::from_count(self.n_slots))
            .round()
            .to_usize()
            .unwrap_or(0)
    }

    pub fn total_iterations(&self) -> usize {
        self.episodes * self.iterations_per_episode
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 {
            return Err(Error::Config("frame needs at least one slot".into()));
        }
        if !(self.load > T::zero()) || !self.load.is_finite() {
            return Err(Error::Config(format!("load {} must be positive", self.load)));
        }
        if self.n_nodes() == 0 {
            return Err(Error::Config(format!(
                "load {} with {} slots rounds to zero nodes",
                self.load, self.n_slots
            )));
        }
        if self.episodes == 0 {
            return Err(Error::Config("at least one episode is required".into()));
        }
        if self.virtual_experience && self.params.window < 2 {
            return Err(Error::Config("virtual experience needs a history window of at least 2".into()));
        }
        self.params.validate()?;
        self.arrivals.validate()
    }

    pub fn network(&self) -> Result<Network<T>> {
        self.validate()?;
        Network::new(self.n_nodes(), self.n_slots, self.params.clone(), self.arrivals)
            .with_virtual_experience(self.virtual_experience)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub episode: usize,
    /// Iteration within the episode.
    pub iteration: usize,
    pub mean_reward: T,
    pub throughput: T,
    /// Bad-episode resets so far in this run.
    pub resets: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub network: Network<T>,
    pub trace: Vec<TraceRow<T>>,
    pub resets: usize,
}

impl<T: Real> TrainOutcome<T> {
    /// Per-node deployed degree distributions.
    pub fn policies(&self) -> Vec<DegreeDistribution<T>> {
        self.network.nodes.iter().map(NodeState::deployed_policy).collect()
    }

    /// Mean reward of each iteration of `episode`.
    pub fn episode_rewards(&self, episode: usize) -> Vec<T> {
        self.trace
            .iter()
            .filter(|r| r.episode == episode)
            .map(|r| r.mean_reward)
            .collect()
    }

    /// Mean reward of every episode, in order.
    pub fn episode_means(&self) -> Vec<T> {
        let per_episode = self.trace.iter().map(|r| r.episode).max().map_or(0, |e| e + 1);
        (0..per_episode)
            .map(|e| {
                let rs = self.episode_rewards(e);
                rs.iter().copied().sum::<T>() / T::from_count(rs.len().max(1))
            })
            .collect()
    }
}

/// Runs `E` episodes of `L_E` learning frames on a fresh network.
pub fn train<T: Real>(config: &TrainConfig<T>) -> Result<TrainOutcome<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_network(config, config.network()?, &mut rng, |_, _| {})
}

/// Training loop over an existing network; `observe` sees every frame.
pub fn train_network<T: Real, R: Rng + ?Sized>(
    config: &TrainConfig<T>,
    mut network: Network<T>,
    rng: &mut R,
    mut observe: impl FnMut(&TraceRow<T>, &FrameStep<T>),
) -> Result<TrainOutcome<T>> {
    let mut trace = Vec::with_capacity(config.total_iterations());
    let mut resets = 0;
    let mut recent = Vec::new();
    for episode in 0..config.episodes {
        network.reset_episode(config.initial_buffers, rng);
        recent.clear();
        for iteration in 0..config.iterations_per_episode {
            let step = network.step_frame(Behaviour::Learn, rng)?;
            let row = TraceRow {
                episode,
                iteration,
                mean_reward: step.mean_reward(),
                throughput: step.throughput,
                resets,
            };
            observe(&row, &step);
            recent.push(row.mean_reward);
            trace.push(row);
            if config.bad_episode_reset && detect_bad_episode(&recent) {
                network.reset_episode(config.initial_buffers, rng);
                recent.clear();
                resets += 1;
            }
        }
    }
    Ok(TrainOutcome { network, trace, resets })
}

/// Frozen behaviour to evaluate.
#[derive(Debug, Clone, Copy)]
pub enum EvalPolicy<'a, T> {
    /// Every node draws from one distribution each frame.
    Distribution(&'a DegreeDistribution<T>),
    /// Node `i` draws from its own distribution.
    PerNode(&'a [DegreeDistribution<T>]),
    /// Per-state argmax of trained tables, driven by the buffer dynamics.
    Greedy(&'a Network<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Per-frame normalized throughput over the trials.
    pub summary: Summary,
}

impl Evaluation {
    pub fn mean(&self) -> f64 {
        self.summary.mean
    }
}

/// Monte Carlo estimate of per-slot throughput, one frame per trial.
///
/// Distribution policies run saturated: all `round(G N)` nodes transmit
/// every frame. Greedy play steps a copy of the trained network with its
/// arrival process and no exploration or updates.
pub fn evaluate<T: Real>(
    policy: EvalPolicy<'_, T>,
    config: &TrainConfig<T>,
    trials: usize,
    level: f64,
    seed: u64,
) -> Result<Evaluation> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_slots;
    let m = config.n_nodes();
    let mut samples = Vec::with_capacity(trials);
    match policy {
        EvalPolicy::Distribution(dist) => {
            for _ in 0..trials {
                let degrees: Vec<usize> = (0..m).map(|_| cap_degree(dist.sample(&mut rng), n)).collect();
                samples.push(simulate_frame(&degrees, n, &mut rng)?.decoded_count() as f64 / n as f64);
            }
        }
        EvalPolicy::PerNode(dists) => {
            if dists.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "{} policies for {m} nodes",
                    dists.len()
                )));
            }
            for _ in 0..trials {
                let degrees: Vec<usize> = dists.iter().map(|d| cap_degree(d.sample(&mut rng), n)).collect();
                samples.push(simulate_frame(&degrees, n, &mut rng)?.decoded_count() as f64 / n as f64);
            }
        }
        EvalPolicy::Greedy(trained) => {
            let mut network = trained.clone().with_virtual_experience(false)?.record_touched(false);
            network.reset_episode(config.initial_buffers, &mut rng);
            for _ in 0..trials {
                let step = network.step_frame(Behaviour::Greedy, &mut rng)?;
                samples.push(step.throughput.as_f64());
            }
        }
    }
    Ok(Evaluation {
        summary: Summary::from_samples(&samples, level),
    })
}
