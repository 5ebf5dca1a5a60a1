//! Frame-level IRSA physics: degree sampling, replica placement and
//! successive interference cancellation (SIC) by peeling.
//!
//! Interference cancellation is perfect and the channel is noiseless, so a
//! burst is lost only when it never becomes the sole occupant of a slot.

use std::fmt;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::Real;

const SUM_TOLERANCE: f64 = 1e-9;

/// Replica-count distribution `Λ(x) = Σ_l Λ_l x^l`, `l = 1..=d`.
#[derive(Clone, PartialEq)]
pub struct DegreeDistribution<T> {
    coeffs: Vec<T>,
    cumulative: Vec<f64>,
}

impl<T: Real> DegreeDistribution<T> {
    /// Builds a distribution from `Λ_1..Λ_d`; `coeffs[0]` is `Λ_1`.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidDistribution("no coefficients".into()));
        }
        let mut cumulative = Vec::with_capacity(coeffs.len());
        let mut acc = 0.0;
        for (i, c) in coeffs.iter().enumerate() {
            let c = c.as_f64();
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "coefficient of x^{} is {c}",
                    i + 1
                )));
            }
            acc += c;
            cumulative.push(acc);
        }
        // f32 coefficients cannot meet 1e-9, so widen to a few ulps of T.
        let tolerance = SUM_TOLERANCE.max(4.0 * coeffs.len() as f64 * T::epsilon().as_f64());
        if (acc - 1.0).abs() > tolerance {
            return Err(Error::InvalidDistribution(format!(
                "coefficients sum to {acc}, expected 1"
            )));
        }
        Ok(Self { coeffs, cumulative })
    }

    /// Builds a distribution of maximum degree `d` from `(l, Λ_l)` pairs.
    pub fn from_sparse(d: usize, terms: &[(usize, T)]) -> Result<Self> {
        let mut coeffs = vec![T::zero(); d];
        for &(l, p) in terms {
            if l == 0 || l > d {
                return Err(Error::InvalidDistribution(format!(
                    "degree {l} outside 1..={d}"
                )));
            }
            coeffs[l - 1] = coeffs[l - 1] + p;
        }
        Self::new(coeffs)
    }

    /// `Λ(x) = x^l` padded to maximum degree `d`.
    pub fn degenerate(l: usize, d: usize) -> Result<Self> {
        Self::from_sparse(d, &[(l, T::one())])
    }

    /// Uniform over `1..=d`, the "random strategy".
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDistribution("no coefficients".into()));
        }
        let p = T::one() / T::from_count(d);
        Self::new(vec![p; d])
    }

    /// Pure slotted ALOHA, `Λ(x) = x`.
    pub fn slotted_aloha() -> Self {
        Self::new(vec![T::one()]).expect("valid")
    }

    /// `Λ(x) = 0.25x^2 + 0.60x^3 + 0.15x^8`, the reference IRSA distribution.
    pub fn baseline() -> Self {
        Self::from_sparse(
            8,
            &[(2, T::lit(0.25)), (3, T::lit(0.60)), (8, T::lit(0.15))],
        )
        .expect("valid")
    }

    pub fn max_degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// `Λ_l`; zero outside `1..=d`.
    pub fn coeff(&self, l: usize) -> T {
        if l == 0 {
            return T::zero();
        }
        self.coeffs.get(l - 1).copied().unwrap_or_else(T::zero)
    }

    /// Average number of replicas, `Λ'(1)`.
    pub fn mean_degree(&self) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * T::from_count(i + 1))
            .sum()
    }

    /// Draws a replica count; see [`sample_degree`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx < self.coeffs.len() {
            return idx + 1;
        }
        // u landed in the rounding gap above the last cumulative value.
        self.coeffs
            .iter()
            .rposition(|c| *c > T::zero())
            .expect("a valid distribution has a positive coefficient")
            + 1
    }
}

impl<T: fmt::Debug> fmt::Debug for DegreeDistribution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DegreeDistribution").field(&self.coeffs).finish()
    }
}

impl<T: Real> fmt::Display for DegreeDistribution<T> {
    /// Polynomial form, e.g. `0.25x^2 + 0.6x^3 + 0.15x^8`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c <= T::zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{:.4}x^{}", c.as_f64(), i + 1)?;
        }
        Ok(())
    }
}

/// Draws `l ∈ 1..=d` with probability `Λ_l`.
pub fn sample_degree<T: Real, R: Rng + ?Sized>(dist: &DegreeDistribution<T>, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Chooses `l` distinct slots uniformly at random out of `n_slots`.
pub fn place_replicas<R: Rng + ?Sized>(l: usize, n_slots: usize, rng: &mut R) -> Result<Vec<usize>> {
    if l == 0 {
        return Err(Error::InvalidArgument("at least one replica is required".into()));
    }
    if l > n_slots {
        return Err(Error::InvalidArgument(format!(
            "cannot place {l} replicas in {n_slots} slots"
        )));
    }
    if l == 1 {
        return Ok(vec![rng.random_range(0..n_slots)]);
    }
    Ok(index::sample(rng, n_slots, l).into_vec())
}

/// Largest usable replica count for a frame of `n_slots` slots.
pub fn cap_degree(l: usize, n_slots: usize) -> usize {
    l.min(n_slots)
}

/// Bipartite user/slot incidence of one frame. User `i` is the `i`-th burst set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameOccupancy {
    n_slots: usize,
    offsets: Vec<usize>,
    slots: Vec<usize>,
}

impl FrameOccupancy {
    pub fn empty(n_slots: usize) -> Result<Self> {
        if n_slots == 0 {
            return Err(Error::InvalidArgument("a frame needs at least one slot".into()));
        }
        Ok(Self {
            n_slots,
            offsets: vec![0],
            slots: Vec::new(),
        })
    }

    pub fn new(n_slots: usize, bursts: &[Vec<usize>]) -> Result<Self> {
        let mut frame = Self::empty(n_slots)?;
        for b in bursts {
            frame.push_user(b)?;
        }
        Ok(frame)
    }

    /// Appends a user transmitting in `slots`; returns its index.
    pub fn push_user(&mut self, slots: &[usize]) -> Result<usize> {
        if slots.is_empty() {
            return Err(Error::InvalidArgument("a user must occupy at least one slot".into()));
        }
        for (i, &s) in slots.iter().enumerate() {
            if s >= self.n_slots {
                return Err(Error::InvalidArgument(format!(
                    "slot {s} outside frame of {} slots",
                    self.n_slots
                )));
            }
            if slots[..i].contains(&s) {
                return Err(Error::InvalidArgument(format!("slot {s} repeated")));
            }
        }
        self.slots.extend_from_slice(slots);
        self.offsets.push(self.slots.len());
        Ok(self.offsets.len() - 2)
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn bursts(&self, user: usize) -> &[usize] {
        &self.slots[self.offsets[user]..self.offsets[user + 1]]
    }

    /// Number of bursts landing in each slot.
    pub fn slot_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.n_slots];
        for &s in &self.slots {
            loads[s] += 1;
        }
        loads
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    decoded: Vec<bool>,
    iterations: usize,
}

impl DecodeOutcome {
    pub fn is_decoded(&self, user: usize) -> bool {
        self.decoded[user]
    }

    /// Per-user decode flags, indexed like the frame's users.
    pub fn flags(&self) -> &[bool] {
        &self.decoded
    }

    pub fn decoded_users(&self) -> impl Iterator<Item = usize> + '_ {
        self.decoded
            .iter()
            .enumerate()
            .filter_map(|(u, &d)| d.then_some(u))
    }

    pub fn count(&self) -> usize {
        self.decoded.iter().filter(|&&d| d).count()
    }

    /// Peeling passes, including the final pass that found no singleton.
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

/// Iterative SIC: decode every singleton slot, cancel the decoded users'
/// replicas everywhere, repeat until no singleton slot remains.
///
/// Each slot tracks its burst count and the XOR of its user ids, so a
/// singleton slot names its user directly.
pub fn sic_decode(frame: &FrameOccupancy) -> DecodeOutcome {
    let n_users = frame.n_users();
    let mut count = vec![0usize; frame.n_slots];
    let mut xor = vec![0usize; frame.n_slots];
    for u in 0..n_users {
        for &s in frame.bursts(u) {
            count[s] += 1;
            xor[s] ^= u;
        }
    }
    let mut decoded = vec![false; n_users];
    let mut frontier: Vec<usize> = (0..frame.n_slots).filter(|&s| count[s] == 1).collect();
    let mut next = Vec::new();
    let mut iterations = 1;
    loop {
        frontier.retain(|&s| count[s] == 1);
        if frontier.is_empty() {
            break;
        }
        iterations += 1;
        for &s in &frontier {
            if count[s] != 1 {
                continue;
            }
            let u = xor[s];
            debug_assert!(!decoded[u]);
            decoded[u] = true;
            for &t in frame.bursts(u) {
                count[t] -= 1;
                xor[t] ^= u;
                if count[t] == 1 {
                    next.push(t);
                }
            }
        }
        std::mem::swap(&mut frontier, &mut next);
        next.clear();
    }
    DecodeOutcome { decoded, iterations }
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame: FrameOccupancy,
    pub outcome: DecodeOutcome,
}

impl FrameResult {
    pub fn success(&self, user: usize) -> bool {
        self.outcome.is_decoded(user)
    }

    pub fn decoded_count(&self) -> usize {
        self.outcome.count()
    }
}

/// Places `degrees[i]` replicas for user `i` and runs SIC over the frame.
pub fn simulate_frame<R: Rng + ?Sized>(degrees: &[usize], n_slots: usize, rng: &mut R) -> Result<FrameResult> {
    let mut frame = FrameOccupancy::empty(n_slots)?;
    for &l in degrees {
        let slots = place_replicas(l, n_slots, rng)?;
        frame.push_user(&slots)?;
    }
    let outcome = sic_decode(&frame);
    Ok(FrameResult { frame, outcome })
}

/// One IRSA frame with `m` users drawing degrees from `dist`, capped at `n_slots`.
/// Returns the number of decoded users.
pub fn simulate_irsa_frame<T: Real, R: Rng + ?Sized>(
    dist: &DegreeDistribution<T>,
    m: usize,
    n_slots: usize,
    rng: &mut R,
) -> Result<usize> {
    let degrees: Vec<usize> = (0..m)
        .map(|_| cap_degree(dist.sample(rng), n_slots))
        .collect();
    Ok(simulate_frame(&degrees, n_slots, rng)?.decoded_count())
}

/// Asymptotic slotted ALOHA throughput `T(G) = G e^{-G}`.
pub fn slotted_aloha_throughput<T: Real>(load: T) -> T {
    load * (-load).exp()
}

/// Exact per-slot throughput of slotted ALOHA with `m` users and `n` slots,
/// `(m/n)(1 - 1/n)^(m-1)`.
pub fn slotted_aloha_finite<T: Real>(m: usize, n: usize) -> T {
    if m == 0 {
        return T::zero();
    }
    let n_t = T::from_count(n);
    T::from_count(m) / n_t * (T::one() - T::one() / n_t).powi((m - 1) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_distributions() {
        assert!(DegreeDistribution::<f64>::new(vec![]).is_err());
        assert!(DegreeDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DegreeDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(DegreeDistribution::<f64>::from_sparse(3, &[(4, 1.0)]).is_err());
        assert!(DegreeDistribution::new(vec![0.5, 0.5 + 1e-10]).is_ok());
    }

    #[test]
    fn degenerate_always_one() {
        let dist = DegreeDistribution::<f64>::slotted_aloha();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_degree(&dist, &mut rng) == 1));
    }

    #[test]
    fn sampling_is_reproducible() {
        let dist = DegreeDistribution::new(vec![0.5f64, 0.5]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| dist.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn zero_coefficients_never_drawn() {
        let dist = DegreeDistribution::<f32>::baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let l = dist.sample(&mut rng);
            assert!(matches!(l, 2 | 3 | 8), "drew {l}");
        }
    }

    #[test]
    fn baseline_mean_degree() {
        let d = DegreeDistribution::<f64>::baseline();
        assert!((d.mean_degree() - 3.5).abs() < 1e-12);
        assert_eq!(d.to_string(), "0.2500x^2 + 0.6000x^3 + 0.1500x^8");
    }

    #[test]
    fn place_replicas_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut all = place_replicas(10, 10, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for _ in 0..1000 {
            let mut s = place_replicas(3, 10, &mut rng).unwrap();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 3);
            assert!(s.iter().all(|&x| x < 10));
        }
        assert!(matches!(place_replicas(11, 10, &mut rng), Err(Error::InvalidArgument(_))));
        assert!(place_replicas(0, 10, &mut rng).is_err());
    }

    #[test]
    fn frame_validation() {
        assert!(FrameOccupancy::new(3, &[vec![0, 0]]).is_err());
        assert!(FrameOccupancy::new(3, &[vec![3]]).is_err());
        assert!(FrameOccupancy::new(3, &[vec![]]).is_err());
        assert!(FrameOccupancy::new(0, &[]).is_err());
        let f = FrameOccupancy::new(3, &[vec![0, 2], vec![2]]).unwrap();
        assert_eq!(f.slot_loads(), vec![1, 0, 2]);
    }

    #[test]
    fn sic_examples() {
        let lone = FrameOccupancy::new(4, &[vec![1]]).unwrap();
        assert_eq!(sic_decode(&lone).decoded_users().collect::<Vec<_>>(), vec![0]);

        let stopping = FrameOccupancy::new(4, &[vec![1, 2], vec![1, 2]]).unwrap();
        let out = sic_decode(&stopping);
        assert_eq!(out.count(), 0);
        assert_eq!(out.iterations(), 1);

        let chain = FrameOccupancy::new(4, &[vec![1, 2], vec![2]]).unwrap();
        let out = sic_decode(&chain);
        assert_eq!(out.decoded_users().collect::<Vec<_>>(), vec![0, 1]);
        assert!(out.iterations() <= 3);
    }

    #[test]
    fn simulate_frame_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in 1..=10 {
            assert!(simulate_frame(&[l], 10, &mut rng).unwrap().success(0));
        }
        let r = simulate_frame(&[10, 10], 10, &mut rng).unwrap();
        assert!(!r.success(0) && !r.success(1));
        assert!(simulate_frame(&[11], 10, &mut rng).is_err());
    }

    #[test]
    fn aloha_formula() {
        assert_eq!(slotted_aloha_throughput(0.0f64), 0.0);
        assert!((slotted_aloha_throughput(1.0f64) - 0.36788).abs() < 1e-5);
        assert!((slotted_aloha_throughput(0.5f64) - 0.30327).abs() < 1e-5);
        assert!((slotted_aloha_throughput(1.0f32) - 0.36788).abs() < 1e-5);
        assert!((slotted_aloha_finite::<f64>(1, 10) - 0.1).abs() < 1e-15);
    }
}
