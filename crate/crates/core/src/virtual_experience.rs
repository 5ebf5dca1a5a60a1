//! Virtual experience: one observed transition updates every history that
//! shares its buffer-difference pattern.
//!
//! Collisions depend on what the other nodes do, not on the absolute level
//! of this node's buffer, so histories with the same consecutive
//! differences face the same unknown dynamics. Only the reward and the
//! successor level are member specific.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use crate::agent::{q_update, Level, LearningParams, ObservationHistory, QTable};
use crate::error::{Error, Result};
use crate::num::Real;

/// Consecutive differences `b_{k} - b_{k+1}` of a history, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VirtualKey {
    diffs: Vec<i32>,
}

impl VirtualKey {
    pub fn new(diffs: Vec<i32>) -> Self {
        Self { diffs }
    }

    pub fn diffs(&self) -> &[i32] {
        &self.diffs
    }

    pub fn window(&self) -> usize {
        self.diffs.len() + 1
    }

    /// Offsets of each level above the newest one: `level[k] = newest + offset[k]`.
    fn offsets(&self) -> Vec<i64> {
        let mut offsets = vec![0i64; self.diffs.len() + 1];
        for k in (0..self.diffs.len()).rev() {
            offsets[k] = offsets[k + 1] + i64::from(self.diffs[k]);
        }
        offsets
    }

    /// Feasible range of the newest level, `[B_min, B_max]`, or `None` when
    /// no history over `[0, capacity]` has this key.
    pub fn newest_level_bounds(&self, capacity: Level) -> Option<(Level, Level)> {
        let offsets = self.offsets();
        let lo = -offsets.iter().copied().min().unwrap_or(0);
        let hi = i64::from(capacity) - offsets.iter().copied().max().unwrap_or(0);
        let lo = lo.max(0);
        (lo <= hi).then(|| (lo as Level, hi as Level))
    }

    /// Upper bound on the class size, `min{B + 1 - B_min, B_max + 1}`.
    pub fn cardinality_bound(&self, capacity: Level) -> usize {
        match self.newest_level_bounds(capacity) {
            Some((lo, hi)) => (usize::from(capacity) + 1 - usize::from(lo)).min(usize::from(hi) + 1),
            None => 0,
        }
    }
}

/// Maps a history to its difference pattern. Needs `w ≥ 2`.
pub fn transform(h: &ObservationHistory) -> Result<VirtualKey> {
    let levels = h.levels();
    if levels.len() < 2 {
        return Err(Error::InvalidWindow(levels.len()));
    }
    Ok(VirtualKey {
        diffs: levels
            .windows(2)
            .map(|p| i32::from(p[0]) - i32::from(p[1]))
            .collect(),
    })
}

/// Every history over `[0, B]^w` mapping to one key, ordered by newest level.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceClass {
    key: VirtualKey,
    members: Vec<ObservationHistory>,
}

impl EquivalenceClass {
    pub fn key(&self) -> &VirtualKey {
        &self.key
    }

    pub fn members(&self) -> &[ObservationHistory] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn enumerate_class(key: &VirtualKey, capacity: Level, window: usize) -> Result<EquivalenceClass> {
    if window < 2 {
        return Err(Error::InvalidWindow(window));
    }
    if key.window() != window {
        return Err(Error::InvalidArgument(format!(
            "key of {} differences does not fit window {window}",
            key.diffs.len()
        )));
    }
    let offsets = key.offsets();
    let members = match key.newest_level_bounds(capacity) {
        Some((lo, hi)) => (lo..=hi)
            .map(|b| {
                let levels = offsets
                    .iter()
                    .map(|&o| (i64::from(b) + o) as Level)
                    .collect();
                ObservationHistory::new(levels).expect("window >= 2")
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(EquivalenceClass {
        key: key.clone(),
        members,
    })
}

/// Lazily built, memoized classes for a fixed `(B, w)`.
#[derive(Debug, Clone)]
pub struct ClassCache {
    capacity: Level,
    window: usize,
    classes: HashMap<VirtualKey, EquivalenceClass>,
}

impl ClassCache {
    pub fn new(capacity: Level, window: usize) -> Result<Self> {
        if window < 2 {
            return Err(Error::InvalidWindow(window));
        }
        Ok(Self {
            capacity,
            window,
            classes: HashMap::new(),
        })
    }

    pub fn capacity(&self) -> Level {
        self.capacity
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn class_of(&mut self, h: &ObservationHistory) -> Result<&EquivalenceClass> {
        let key = transform(h)?;
        if !self.classes.contains_key(&key) {
            let class = enumerate_class(&key, self.capacity, self.window)?;
            self.classes.insert(key.clone(), class);
        }
        Ok(&self.classes[&key])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutcome {
    /// Members updated, in canonical order.
    pub updated: Vec<ObservationHistory>,
    /// Members whose reconstructed successor fell outside `[0, B]`.
    pub skipped: usize,
}

/// Applies the transition `(h_visited, a) → h_next` with reward `r_observed`
/// to every member of `h_visited`'s class.
///
/// With `c = newest(h_visited) - newest(h_next)`, member `h_j` moves to
/// `h_j` shifted by `newest(h_j) - c` and earns the backlog reward of that
/// successor, `r_observed - (newest(h_j) - newest(h_visited))`. Each member
/// uses and increments its own visit count.
pub fn batch_update<T: Real>(
    q: &mut QTable<T>,
    cache: &mut ClassCache,
    h_visited: &ObservationHistory,
    action: usize,
    r_observed: T,
    h_next: &ObservationHistory,
    params: &LearningParams<T>,
) -> Result<BatchOutcome> {
    let w = h_visited.window();
    if h_next.window() != w || h_visited.levels()[1..] != h_next.levels()[..w - 1] {
        return Err(Error::InvalidArgument(
            "next history is not a one-step shift of the visited history".into(),
        ));
    }
    let capacity = cache.capacity();
    let b_visited = i64::from(h_visited.newest());
    let drained = b_visited - i64::from(h_next.newest());
    let class = cache.class_of(h_visited)?;
    let mut outcome = BatchOutcome::default();
    for member in class.members() {
        let b_member = i64::from(member.newest());
        let succ = b_member - drained;
        if succ < 0 || succ > i64::from(capacity) {
            outcome.skipped += 1;
            continue;
        }
        let next = member.shifted(succ as Level);
        let shift = T::from_i64(b_member - b_visited).expect("small");
        q_update(q, member, action, r_observed - shift, &next, params);
        outcome.updated.push(member.clone());
    }
    Ok(outcome)
}

/// 1-based index of the first iteration after which every pair of the space
/// has been seen, or `None` if the trace never covers it. Each iteration
/// contributes all pairs it touched.
pub fn coverage_time<P, I, J>(trace: I, state_space_size: usize) -> Option<usize>
where
    P: Eq + Hash,
    I: IntoIterator<Item = J>,
    J: IntoIterator<Item = P>,
{
    if state_space_size == 0 {
        return Some(0);
    }
    let mut seen = HashSet::new();
    for (i, step) in trace.into_iter().enumerate() {
        seen.extend(step);
        if seen.len() >= state_space_size {
            return Some(i + 1);
        }
    }
    None
}

/// Predicted coverage-time factor `log(1 - P) / log(1 - |H̃| P)` of virtual
/// experience over plain updates. `None` when `|H̃| P ≥ 1` or `P ∉ (0, 1)`.
pub fn predicted_coverage_ratio(p: f64, class_size: f64) -> Option<f64> {
    let pv = class_size * p;
    if !(p > 0.0 && p < 1.0 && pv < 1.0) {
        return None;
    }
    Some((1.0 - p).log2() / (1.0 - pv).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(levels: &[Level]) -> ObservationHistory {
        ObservationHistory::new(levels.to_vec()).unwrap()
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform(&h(&[3, 2, 2])).unwrap().diffs(), &[1, 0]);
        assert_eq!(transform(&h(&[5, 5])).unwrap().diffs(), &[0]);
        assert_eq!(transform(&h(&[0, 5])).unwrap().diffs(), &[-5]);
        assert_eq!(transform(&h(&[4])), Err(Error::InvalidWindow(1)));
    }

    #[test]
    fn enumerate_examples() {
        let class = enumerate_class(&VirtualKey::new(vec![1, 0]), 5, 3).unwrap();
        let expect: Vec<_> = (1..=5).map(|b| h(&[b, b - 1, b - 1])).collect();
        assert_eq!(class.members(), &expect[..]);

        let class = enumerate_class(&VirtualKey::new(vec![0]), 1, 2).unwrap();
        assert_eq!(class.members(), &[h(&[0, 0]), h(&[1, 1])]);

        let infeasible = enumerate_class(&VirtualKey::new(vec![4, 3]), 5, 3).unwrap();
        assert!(infeasible.is_empty());
        assert_eq!(VirtualKey::new(vec![4, 3]).cardinality_bound(5), 0);

        assert!(enumerate_class(&VirtualKey::new(vec![0]), 5, 3).is_err());
    }

    #[test]
    fn single_member_class_matches_plain_update() {
        let p = LearningParams::<f64> { window: 2, capacity: 5, ..Default::default() };
        let mut cache = ClassCache::new(5, 2).unwrap();
        let (s, s2) = (h(&[0, 5]), h(&[5, 5]));
        let mut q1 = QTable::new(8);
        let mut q2 = QTable::new(8);
        let out = batch_update(&mut q1, &mut cache, &s, 4, -5.0, &s2, &p).unwrap();
        assert_eq!(out.updated, vec![s.clone()]);
        q_update(&mut q2, &s, 4, -5.0, &s2, &p);
        assert_eq!(q1, q2);
    }

    #[test]
    fn full_buffer_member_skipped() {
        let p = LearningParams::<f64> { window: 3, capacity: 5, ..Default::default() };
        let mut cache = ClassCache::new(5, 3).unwrap();
        let mut q = QTable::new(8);
        // Observed arrival: 2 -> 3, so c = -1; the (5,5,5) member would reach 6.
        let out = batch_update(&mut q, &mut cache, &h(&[2, 2, 2]), 1, -3.0, &h(&[2, 2, 3]), &p).unwrap();
        assert_eq!(out.skipped, 1);
        assert_eq!(out.updated.len(), 5);
        assert_eq!(q.visits(&h(&[5, 5, 5]), 1), 0);
        assert_eq!(q.value(&h(&[0, 0, 0]), 1), -1.0);
        assert_eq!(q.value(&h(&[4, 4, 4]), 1), -5.0);
    }

    #[test]
    fn rejects_inconsistent_successor() {
        let p = LearningParams::<f64> { window: 3, ..Default::default() };
        let mut cache = ClassCache::new(5, 3).unwrap();
        let mut q = QTable::new(8);
        assert!(batch_update(&mut q, &mut cache, &h(&[1, 2, 3]), 1, 0.0, &h(&[1, 3, 3]), &p).is_err());
    }

    #[test]
    fn coverage_examples() {
        let round_robin = vec![vec![(0, 1)], vec![(0, 2)], vec![(1, 1)], vec![(1, 2)], vec![(0, 1)]];
        assert_eq!(coverage_time(round_robin.clone(), 4), Some(4));
        assert_eq!(coverage_time(round_robin[..3].to_vec(), 4), None);
        assert_eq!(coverage_time(vec![vec![(0, 1), (0, 2), (1, 1), (1, 2)]], 4), Some(1));
    }

    #[test]
    fn corollary_ratio() {
        assert_eq!(predicted_coverage_ratio(0.1, 1.0), Some(1.0));
        let r = predicted_coverage_ratio(0.1, 5.0).unwrap();
        assert!((r - (0.9f64.ln() / 0.5f64.ln())).abs() < 1e-12);
        assert_eq!(predicted_coverage_ratio(0.3, 5.0), None);
    }
}
