//! Slow reference implementations used to cross-check the fast paths.

use irsa_rl::agent::{q_update, Level, LearningParams, ObservationHistory, QTable};

/// Users recovered by SIC, computed from stopping sets: a user set is
/// stopping when every slot any member touches carries at least two
/// members. The union of all stopping sets is the largest one, and peeling
/// recovers exactly its complement.
pub fn brute_force_decode(n_slots: usize, bursts: &[Vec<usize>]) -> Vec<bool> {
    let u = bursts.len();
    assert!(u <= 16, "exhaustive oracle limited to 16 users");
    let mut stuck = 0u32;
    for mask in 1u32..(1 << u) {
        let mut load = vec![0usize; n_slots];
        for (user, slots) in bursts.iter().enumerate() {
            if mask >> user & 1 == 1 {
                for &s in slots {
                    load[s] += 1;
                }
            }
        }
        if load.iter().all(|&c| c == 0 || c >= 2) {
            stuck |= mask;
        }
    }
    (0..u).map(|user| stuck >> user & 1 == 0).collect()
}

/// Every way of giving each of `users` users a nonempty set of distinct
/// slots out of `n_slots`.
pub fn all_frames(users: usize, n_slots: usize) -> Vec<Vec<Vec<usize>>> {
    let subsets: Vec<Vec<usize>> = (1u32..(1 << n_slots))
        .map(|m| (0..n_slots).filter(|s| m >> s & 1 == 1).collect())
        .collect();
    let mut frames = vec![Vec::new()];
    for _ in 0..users {
        let mut next = Vec::with_capacity(frames.len() * subsets.len());
        for f in &frames {
            for s in &subsets {
                let mut g: Vec<Vec<usize>> = f.clone();
                g.push(s.clone());
                next.push(g);
            }
        }
        frames = next;
    }
    frames
}

/// All `(B + 1)^w` histories in lexicographic order.
pub fn all_histories(capacity: Level, w: usize) -> Vec<ObservationHistory> {
    let base = usize::from(capacity) + 1;
    let total = base.pow(w as u32);
    (0..total)
        .map(|mut code| {
            let mut levels = vec![0; w];
            for slot in levels.iter_mut().rev() {
                *slot = (code % base) as Level;
                code /= base;
            }
            ObservationHistory::new(levels).unwrap()
        })
        .collect()
}

pub fn diffs(h: &ObservationHistory) -> Vec<i32> {
    h.levels().windows(2).map(|p| i32::from(p[1]) - i32::from(p[0])).collect()
}

/// Class of `h` found by filtering the whole history space.
pub fn class_by_filter(h: &ObservationHistory, capacity: Level) -> Vec<ObservationHistory> {
    let key = diffs(h);
    all_histories(capacity, h.window())
        .into_iter()
        .filter(|g| diffs(g) == key)
        .collect()
}

/// Virtual experience applied one member at a time with plain `q_update`.
/// Each member drains the same number of packets as the visited history and
/// earns the finite-buffer reward of its own successor level.
pub fn sequential_virtual_update(
    q: &mut QTable<f64>,
    h_visited: &ObservationHistory,
    action: usize,
    h_next: &ObservationHistory,
    params: &LearningParams<f64>,
) -> usize {
    let drained = i32::from(h_visited.newest()) - i32::from(h_next.newest());
    let mut updated = 0;
    for member in class_by_filter(h_visited, params.capacity) {
        let succ = i32::from(member.newest()) - drained;
        if !(0..=i32::from(params.capacity)).contains(&succ) {
            continue;
        }
        let mut levels = member.levels()[1..].to_vec();
        levels.push(succ as Level);
        let next = ObservationHistory::new(levels).unwrap();
        q_update(q, &member, action, -f64::from(succ), &next, params);
        updated += 1;
    }
    updated
}
