//! Independent tabular Q-learner run by each sensor node.
//!
//! A node only sees its own buffer, so the learning state is the window of
//! its last `w` buffer levels. Actions are replica counts `1..=d`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::irsa::DegreeDistribution;
use crate::num::Real;

/// Buffer level, in packets.
pub type Level = u16;

/// Last `w` buffer levels, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObservationHistory {
    levels: Vec<Level>,
}

impl ObservationHistory {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("history window must be at least 1".into()));
        }
        Ok(Self { levels })
    }

    /// `w` copies of `level`, the history at the start of an episode.
    pub fn filled(level: Level, w: usize) -> Self {
        assert!(w >= 1, "history window must be at least 1");
        Self { levels: vec![level; w] }
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn window(&self) -> usize {
        self.levels.len()
    }

    pub fn newest(&self) -> Level {
        *self.levels.last().expect("non-empty")
    }

    /// Drops the oldest level and appends `level`.
    pub fn push(&mut self, level: Level) {
        self.levels.remove(0);
        self.levels.push(level);
    }

    pub fn shifted(&self, level: Level) -> Self {
        let mut next = self.clone();
        next.push(level);
        next
    }

    pub fn within_capacity(&self, capacity: Level) -> bool {
        self.levels.iter().all(|&b| b <= capacity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QEntry<T> {
    pub value: T,
    pub visits: u64,
}

/// Q-values and visit counts keyed by (history, action). Absent keys read as zero.
///
/// Rows are kept in a `BTreeMap` so that iteration, and everything summed
/// over it, is independent of hashing state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<T> {
    max_degree: usize,
    rows: BTreeMap<ObservationHistory, Vec<QEntry<T>>>,
}

impl<T: Real> QTable<T> {
    pub fn new(max_degree: usize) -> Self {
        assert!(max_degree >= 1, "at least one action is required");
        Self {
            max_degree,
            rows: BTreeMap::new(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn check_action(&self, action: usize) {
        assert!(
            (1..=self.max_degree).contains(&action),
            "action {action} outside 1..={}",
            self.max_degree
        );
    }

    pub fn entry(&self, h: &ObservationHistory, action: usize) -> QEntry<T> {
        self.check_action(action);
        self.rows
            .get(h)
            .map(|row| row[action - 1])
            .unwrap_or_default()
    }

    pub fn value(&self, h: &ObservationHistory, action: usize) -> T {
        self.entry(h, action).value
    }

    pub fn visits(&self, h: &ObservationHistory, action: usize) -> u64 {
        self.entry(h, action).visits
    }

    /// Total visits of `h` over all actions.
    pub fn history_visits(&self, h: &ObservationHistory) -> u64 {
        self.rows
            .get(h)
            .map(|row| row.iter().map(|e| e.visits).sum())
            .unwrap_or(0)
    }

    pub fn entry_mut(&mut self, h: &ObservationHistory, action: usize) -> &mut QEntry<T> {
        self.check_action(action);
        let d = self.max_degree;
        let row = self
            .rows
            .entry(h.clone())
            .or_insert_with(|| vec![QEntry::default(); d]);
        &mut row[action - 1]
    }

    pub fn max_value(&self, h: &ObservationHistory) -> T {
        match self.rows.get(h) {
            Some(row) => row
                .iter()
                .map(|e| e.value)
                .fold(T::neg_infinity(), T::max),
            None => T::zero(),
        }
    }

    /// All actions attaining the maximum Q-value at `h`, ascending.
    pub fn greedy_actions(&self, h: &ObservationHistory) -> Vec<usize> {
        match self.rows.get(h) {
            Some(row) => {
                let best = self.max_value(h);
                row.iter()
                    .enumerate()
                    .filter(|(_, e)| e.value == best)
                    .map(|(i, _)| i + 1)
                    .collect()
            }
            None => (1..=self.max_degree).collect(),
        }
    }

    /// Histories with a stored row, in canonical order.
    pub fn histories(&self) -> impl Iterator<Item = &ObservationHistory> {
        self.rows.keys()
    }

    /// Stored (history, action, entry) triples in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (&ObservationHistory, usize, QEntry<T>)> {
        self.rows
            .iter()
            .flat_map(|(h, row)| row.iter().enumerate().map(move |(i, e)| (h, i + 1, *e)))
    }

    /// Number of (history, action) pairs visited at least once.
    pub fn visited_pairs(&self) -> usize {
        self.rows
            .values()
            .map(|row| row.iter().filter(|e| e.visits > 0).count())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Flat text form: one line per stored pair,
    /// `level_1,..,level_w,action,q_value,visits`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (h, action, e) in self.entries() {
            for b in h.levels() {
                write!(out, "{b},").unwrap();
            }
            writeln!(out, "{action},{},{}", e.value, e.visits).unwrap();
        }
        out
    }

    pub fn from_text(text: &str, max_degree: usize) -> Result<Self> {
        let mut table = Self::new(max_degree);
        let mut window = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 4 {
                return Err(err(format!("expected at least 4 fields, got {}", fields.len())));
            }
            let w = fields.len() - 3;
            if *window.get_or_insert(w) != w {
                return Err(err(format!("history length {w} differs from earlier lines")));
            }
            let levels = fields[..w]
                .iter()
                .map(|f| f.trim().parse::<Level>().map_err(|e| err(format!("level {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let action: usize = fields[w]
                .trim()
                .parse()
                .map_err(|e| err(format!("action: {e}")))?;
            if !(1..=max_degree).contains(&action) {
                return Err(err(format!("action {action} outside 1..={max_degree}")));
            }
            let value: T = fields[w + 1]
                .trim()
                .parse()
                .map_err(|_| err(format!("q-value {:?}", fields[w + 1])))?;
            let visits: u64 = fields[w + 2]
                .trim()
                .parse()
                .map_err(|e| err(format!("visits: {e}")))?;
            let h = ObservationHistory::new(levels)?;
            *table.entry_mut(&h, action) = QEntry { value, visits };
        }
        Ok(table)
    }
}

/// Step-size schedule as a function of the pair's visit count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate<T> {
    /// `min(1, base * decay^visits)`.
    ///
    /// Summable, so it does not satisfy `Σα = ∞`; Q-values effectively
    /// freeze after a few dozen visits per pair.
    Geometric { base: T, decay: T },
    /// `1 / (visits + 1)^exponent`, with `exponent ∈ (1/2, 1]` meeting the
    /// Robbins-Monro conditions.
    Polynomial { exponent: T },
}

impl<T: Real> LearningRate<T> {
    pub fn rate(&self, visits: u64) -> T {
        match *self {
            LearningRate::Geometric { base, decay } => {
                let exp = i32::try_from(visits).unwrap_or(i32::MAX);
                (base * decay.powi(exp)).min(T::one())
            }
            LearningRate::Polynomial { exponent } => {
                T::one() / (T::from_u64(visits).expect("representable") + T::one()).powf(exponent)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningParams<T> {
    /// Exploration probability of the ε-greedy rule.
    pub epsilon: T,
    pub gamma: T,
    pub learning_rate: LearningRate<T>,
    /// History window `w`.
    pub window: usize,
    /// Buffer capacity `B`.
    pub capacity: Level,
    /// Maximum replica count `d`.
    pub max_degree: usize,
}

impl<T: Real> Default for LearningParams<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(0.05),
            gamma: T::lit(0.98),
            learning_rate: LearningRate::Geometric {
                base: T::lit(1.111),
                decay: T::lit(0.9),
            },
            window: 4,
            capacity: 5,
            max_degree: 8,
        }
    }
}

impl<T: Real> LearningParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon >= T::zero() && self.epsilon <= T::one()) {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        match self.learning_rate {
            LearningRate::Geometric { base, decay } => {
                if !(base > T::zero() && decay > T::zero() && decay < T::one()) {
                    return bad("geometric learning rate needs base > 0 and decay in (0, 1)".into());
                }
            }
            LearningRate::Polynomial { exponent } => {
                if !(exponent > T::zero()) {
                    return bad("polynomial learning rate needs a positive exponent".into());
                }
            }
        }
        if self.window == 0 {
            return bad("history window must be at least 1".into());
        }
        if self.max_degree == 0 {
            return bad("maximum degree must be at least 1".into());
        }
        Ok(())
    }
}

pub fn learning_rate<T: Real>(visits: u64, params: &LearningParams<T>) -> T {
    params.learning_rate.rate(visits)
}

/// ε-greedy choice of a replica count. Greedy ties are broken uniformly.
pub fn select_action<T: Real, R: Rng + ?Sized>(
    q: &QTable<T>,
    h: &ObservationHistory,
    params: &LearningParams<T>,
    rng: &mut R,
) -> usize {
    let d = params.max_degree;
    if params.epsilon > T::zero() && rng.random::<f64>() < params.epsilon.as_f64() {
        return rng.random_range(1..=d);
    }
    greedy_action(q, h, rng)
}

/// Argmax of `Q(h, ·)` with uniform tie-breaking.
pub fn greedy_action<T: Real, R: Rng + ?Sized>(q: &QTable<T>, h: &ObservationHistory, rng: &mut R) -> usize {
    let best = q.greedy_actions(h);
    if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(Level),
    Infinite,
}

/// Drained packets for an unbounded buffer, negative backlog otherwise.
pub fn reward<T: Real>(b_prev: Level, b_now: Level, capacity: Capacity) -> T {
    match capacity {
        Capacity::Infinite => T::from_i32(i32::from(b_prev) - i32::from(b_now)).expect("small"),
        Capacity::Finite(_) => -T::from_u16(b_now).expect("small"),
    }
}

/// `Q(h,a) ← (1-α)Q(h,a) + α[r + γ max_a' Q(h', a')]` with `α` taken from the
/// pair's visit count before it is incremented. Returns the new value.
pub fn q_update<T: Real>(
    q: &mut QTable<T>,
    h: &ObservationHistory,
    action: usize,
    r: T,
    h_next: &ObservationHistory,
    params: &LearningParams<T>,
) -> T {
    let target = r + params.gamma * q.max_value(h_next);
    let entry = q.entry_mut(h, action);
    let alpha = params.learning_rate.rate(entry.visits);
    entry.value = (T::one() - alpha) * entry.value + alpha * target;
    entry.visits += 1;
    entry.value
}

/// Degree distribution of the learned behaviour: each visited history votes
/// for its greedy action with weight equal to its visit count. A history
/// with several maximizing actions splits its vote evenly among them.
pub fn extract_policy<T: Real>(q: &QTable<T>, d: usize) -> Result<DegreeDistribution<T>> {
    let mut weights = vec![T::zero(); d];
    let mut total = T::zero();
    for h in q.histories() {
        let visits = q.history_visits(h);
        if visits == 0 {
            continue;
        }
        let w = T::from_u64(visits).expect("representable");
        let best = q.greedy_actions(h);
        let share = w / T::from_count(best.len());
        for a in best {
            if a > d {
                return Err(Error::InvalidArgument(format!(
                    "table action {a} exceeds maximum degree {d}"
                )));
            }
            weights[a - 1] = weights[a - 1] + share;
        }
        total = total + w;
    }
    if total == T::zero() {
        return Err(Error::NoExperience);
    }
    let mut coeffs: Vec<T> = weights.into_iter().map(|w| w / total).collect();
    // Push the rounding residue onto the largest coefficient.
    let sum: T = coeffs.iter().copied().sum();
    let (imax, _) = coeffs
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
    coeffs[imax] = coeffs[imax] + (T::one() - sum);
    DegreeDistribution::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h(levels: &[Level]) -> ObservationHistory {
        ObservationHistory::new(levels.to_vec()).unwrap()
    }

    #[test]
    fn learning_rate_schedule() {
        let p = LearningParams::<f64>::default();
        assert_eq!(learning_rate(0, &p), 1.0);
        assert!((learning_rate(1, &p) - 0.9999).abs() < 1e-12);
        assert!((learning_rate(10, &p) - 0.3874).abs() < 1e-4);
        assert!(learning_rate(200, &p) > 0.0);
        let poly = LearningRate::Polynomial { exponent: 0.8f64 };
        assert_eq!(poly.rate(0), 1.0);
        assert!((poly.rate(3) - 4f64.powf(-0.8)).abs() < 1e-15);
    }

    #[test]
    fn history_shifts_oldest_out() {
        let mut x = ObservationHistory::filled(2, 3);
        x.push(4);
        assert_eq!(x.levels(), &[2, 2, 4]);
        assert_eq!(x.newest(), 4);
        assert!(x.within_capacity(4));
        assert!(!x.within_capacity(3));
    }

    #[test]
    fn absent_keys_read_zero() {
        let q = QTable::<f64>::new(8);
        assert_eq!(q.entry(&h(&[1, 2]), 3), QEntry { value: 0.0, visits: 0 });
        assert_eq!(q.max_value(&h(&[1, 2])), 0.0);
        assert_eq!(q.greedy_actions(&h(&[1, 2])).len(), 8);
    }

    #[test]
    fn greedy_picks_strict_max() {
        let mut q = QTable::<f64>::new(4);
        let s = h(&[1, 1]);
        for a in 1..=4 {
            q.entry_mut(&s, a).value = -1.0;
        }
        q.entry_mut(&s, 2).value = -0.5;
        let p = LearningParams { epsilon: 0.0, max_degree: 4, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| select_action(&q, &s, &p, &mut rng) == 2));
    }

    #[test]
    fn reward_branches() {
        assert_eq!(reward::<f64>(2, 4, Capacity::Finite(5)), -4.0);
        assert_eq!(reward::<f64>(3, 2, Capacity::Infinite), 1.0);
        assert_eq!(reward::<f64>(3, 0, Capacity::Finite(5)), 0.0);
    }

    #[test]
    fn q_update_examples() {
        let p = LearningParams::<f64>::default();
        let mut q = QTable::new(8);
        let (s, s2) = (h(&[1, 2]), h(&[2, 3]));
        assert_eq!(q_update(&mut q, &s, 1, -3.0, &s2, &p), -3.0);
        assert_eq!(q.visits(&s, 1), 1);

        let half = LearningParams {
            learning_rate: LearningRate::Geometric { base: 0.5, decay: 0.999_999 },
            ..p.clone()
        };
        let mut q = QTable::new(8);
        q.entry_mut(&s, 1).value = 1.0;
        q.entry_mut(&s2, 4).value = 1.0;
        let v = q_update(&mut q, &s, 1, 0.0, &s2, &half);
        assert!((v - 0.99).abs() < 1e-12, "{v}");

        let myopic = LearningParams {
            gamma: 0.0,
            learning_rate: LearningRate::Polynomial { exponent: 0.6 },
            ..p
        };
        let mut q = QTable::new(8);
        q.entry_mut(&s, 3).value = -7.0;
        for _ in 0..20_000 {
            q_update(&mut q, &s, 3, 0.0, &s2, &myopic);
        }
        assert!(q.value(&s, 3).abs() < 1e-2);
    }

    #[test]
    fn extract_policy_examples() {
        assert_eq!(extract_policy(&QTable::<f64>::new(8), 8), Err(Error::NoExperience));

        let mut q = QTable::<f64>::new(8);
        for (i, s) in [h(&[0, 1]), h(&[3, 3]), h(&[5, 4])].iter().enumerate() {
            for a in 1..=8 {
                *q.entry_mut(s, a) = QEntry { value: -2.0, visits: i as u64 + 1 };
            }
            q.entry_mut(s, 3).value = -1.0;
        }
        let dist = extract_policy(&q, 8).unwrap();
        assert_eq!(dist.coeff(3), 1.0);

        let mut q = QTable::<f64>::new(8);
        let (a, b) = (h(&[1, 1]), h(&[2, 2]));
        for a_ in 1..=8 {
            *q.entry_mut(&a, a_) = QEntry { value: -3.0, visits: 1 };
            *q.entry_mut(&b, a_) = QEntry { value: -3.0, visits: 1 };
        }
        q.entry_mut(&a, 2).value = -1.0;
        q.entry_mut(&b, 8).value = -1.0;
        let dist = extract_policy(&q, 8).unwrap();
        assert_eq!(dist.coeff(2), 0.5);
        assert_eq!(dist.coeff(8), 0.5);
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let mut q = QTable::<f64>::new(3);
        q_update(&mut q, &h(&[1, 2, 3]), 2, -3.25, &h(&[2, 3, 3]), &LearningParams::default());
        *q.entry_mut(&h(&[0, 0, 0]), 3) = QEntry { value: 0.1 + 0.2, visits: 7 };
        let text = q.to_text();
        assert!(text.lines().any(|l| l == "1,2,3,2,-3.25,1"));
        assert_eq!(QTable::from_text(&text, 3).unwrap(), q);

        assert!(QTable::<f64>::from_text("1,2,4,0.5,1\n", 3).is_err());
        assert!(QTable::<f64>::from_text("1,2,1,0.5,1\n1,1,0.5,1\n", 3).is_err());
        assert!(matches!(
            QTable::<f64>::from_text("1,x,1,0.5,1", 3),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(LearningParams::<f64>::default().validate().is_ok());
        let bad = LearningParams { gamma: 1.0, ..LearningParams::<f64>::default() };
        assert!(bad.validate().is_err());
        let bad = LearningParams { epsilon: 1.5, ..LearningParams::<f64>::default() };
        assert!(bad.validate().is_err());
    }
}
