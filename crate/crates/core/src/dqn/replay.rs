use std::collections::VecDeque;

use ndarray::Array2;
use rand::Rng;

use super::loss::Batch;
use super::mlp::Real;
use crate::error::{Error, Result};
use crate::sim::grid::{expand_runs, Run};
use crate::sim::{CompactGrid, GRID_LEN};

/// One stored experience. Grids are kept in run-length form.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: CompactGrid,
    pub action: u8,
    pub reward: f32,
    pub next_state: CompactGrid,
    pub done: bool,
}

/// Bounded FIFO queue; pushing into a full buffer evicts the oldest item.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Returns the evicted item, if any.
    pub fn push(&mut self, item: T) -> Option<T> {
        let evicted = if self.items.len() == self.capacity {
            self.items.pop_front()
        } else {
            None
        };
        self.items.push_back(item);
        evicted
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    /// `batch_size` positions drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < batch_size || self.items.is_empty() {
            return Err(Error::NotReady {
                have: self.items.len(),
                need: batch_size.max(1),
            });
        }
        Ok((0..batch_size)
            .map(|_| rng.random_range(0..self.items.len()))
            .collect())
    }

    /// `batch_size` items drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&T>> {
        let idx = self.sample_indices(batch_size, rng)?;
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    first_run: u64,
    state_runs: u32,
    next_runs: u32,
    action: u8,
    reward: f32,
    done: bool,
}

/// Transition store for the agent. Behaves as a [`ReplayBuffer`] of
/// [`Transition`]s but keeps every grid run in one shared FIFO arena, so
/// filling it does not scatter small allocations over the heap.
#[derive(Clone, Debug)]
pub struct ReplayMemory {
    slots: ReplayBuffer<Slot>,
    runs: VecDeque<Run>,
    dropped_runs: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            slots: ReplayBuffer::new(capacity),
            runs: VecDeque::new(),
            dropped_runs: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.capacity()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn push(&mut self, t: &Transition) {
        let slot = Slot {
            first_run: self.dropped_runs + self.runs.len() as u64,
            state_runs: t.state.runs().len() as u32,
            next_runs: t.next_state.runs().len() as u32,
            action: t.action,
            reward: t.reward,
            done: t.done,
        };
        self.runs.extend(t.state.runs());
        self.runs.extend(t.next_state.runs());
        if let Some(old) = self.slots.push(slot) {
            let n = (old.state_runs + old.next_runs) as usize;
            self.runs.drain(..n);
            self.dropped_runs += n as u64;
        }
    }

    fn span(&self, first: u64, len: u32) -> impl Iterator<Item = &Run> {
        let start = (first - self.dropped_runs) as usize;
        self.runs.range(start..start + len as usize)
    }

    fn state_runs(&self, s: &Slot) -> impl Iterator<Item = &Run> {
        self.span(s.first_run, s.state_runs)
    }

    fn next_runs(&self, s: &Slot) -> impl Iterator<Item = &Run> {
        self.span(s.first_run + s.state_runs as u64, s.next_runs)
    }

    /// Oldest first.
    pub fn get(&self, i: usize) -> Option<Transition> {
        let s = self.slots.get(i)?;
        Some(Transition {
            state: CompactGrid::from_runs(self.state_runs(s).copied().collect()),
            action: s.action,
            reward: s.reward,
            next_state: CompactGrid::from_runs(self.next_runs(s).copied().collect()),
            done: s.done,
        })
    }

    /// Dense minibatch of `batch_size` transitions drawn uniformly with
    /// replacement.
    pub fn sample_batch<F: Real, R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch<F>> {
        let idx = self.slots.sample_indices(batch_size, rng)?;
        let n = idx.len();
        let mut states = Array2::<F>::zeros((n, GRID_LEN));
        let mut next_states = Array2::<F>::zeros((n, GRID_LEN));
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for (row, &i) in idx.iter().enumerate() {
            let s = self.slots.get(i).expect("sampled index in range");
            let out = states.row_mut(row).into_slice().expect("standard layout");
            expand_runs(self.state_runs(s), out);
            let out = next_states.row_mut(row).into_slice().expect("standard layout");
            expand_runs(self.next_runs(s), out);
            actions.push(s.action as usize);
            rewards.push(<F as From<f32>>::from(s.reward));
            dones.push(s.done);
        }
        Ok(Batch {
            states,
            actions,
            rewards,
            next_states,
            dones,
        })
    }
}

/// Expands sampled transitions into a dense minibatch.
pub fn to_batch<F: Real>(samples: &[&Transition]) -> Batch<F> {
    let n = samples.len();
    let mut states = Array2::<F>::zeros((n, GRID_LEN));
    let mut next_states = Array2::<F>::zeros((n, GRID_LEN));
    for (i, t) in samples.iter().enumerate() {
        let row = states.row_mut(i).into_slice().expect("standard layout");
        t.state.expand_into(row);
        let row = next_states.row_mut(i).into_slice().expect("standard layout");
        t.next_state.expand_into(row);
    }
    Batch {
        states,
        actions: samples.iter().map(|t| t.action as usize).collect(),
        rewards: samples.iter().map(|t| <F as From<f32>>::from(t.reward)).collect(),
        next_states,
        dones: samples.iter().map(|t| t.done).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn overfilling_evicts_the_first_item() {
        let cap = 1_000_000;
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..=cap as u32 {
            buf.push(i);
        }
        assert_eq!(buf.len(), cap);
        assert_eq!(buf.get(0), Some(&1));
        assert!(buf.iter().all(|&x| x != 0));
    }

    #[test]
    fn single_item_buffer_samples_that_item() {
        let mut buf = ReplayBuffer::new(4);
        buf.push("only");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(1, &mut rng).unwrap(), vec![&"only"]);
    }

    #[test]
    fn undersized_buffer_is_not_ready() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample(2, &mut rng),
            Err(Error::NotReady { have: 1, need: 2 })
        ));
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10usize {
            buf.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 10];
        for _ in 0..100_000 {
            counts[*buf.sample(1, &mut rng).unwrap()[0]] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.1).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn batch_expansion_round_trips_grids() {
        let mut dense = vec![0.0f32; GRID_LEN];
        dense[7] = 0.5;
        dense[300..400].fill(-1.0);
        let t = Transition {
            state: CompactGrid::from_values(&dense),
            action: 3,
            reward: -1.0,
            next_state: CompactGrid::from_values(&vec![0.0; GRID_LEN]),
            done: true,
        };
        let b: Batch<f32> = to_batch(&[&t]);
        assert_eq!(b.states.row(0).to_vec(), dense);
        assert!(b.next_states.iter().all(|&x| x == 0.0));
        assert_eq!((b.actions[0], b.rewards[0], b.dones[0]), (3, -1.0, true));
    }

    fn grid_with(seed: u32) -> CompactGrid {
        let mut dense = vec![0.0f32; GRID_LEN];
        for k in 0..(seed % 7) as usize {
            let start = (seed as usize * 37 + k * 71) % (GRID_LEN - 10);
            dense[start..start + 1 + k].fill(seed as f32 / 100.0 - 1.0);
        }
        CompactGrid::from_values(&dense)
    }

    fn transition(i: u32) -> Transition {
        Transition {
            state: grid_with(i),
            action: (i % 5) as u8,
            reward: i as f32,
            next_state: grid_with(i + 1000),
            done: i % 3 == 0,
        }
    }

    #[test]
    fn memory_batches_match_plain_buffer_batches() {
        let mut memory = ReplayMemory::new(7);
        let mut plain = ReplayBuffer::new(7);
        for i in 0..40 {
            let t = transition(i);
            memory.push(&t);
            plain.push(t);
        }
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let from_memory: Batch<f64> = memory.sample_batch(5, &mut a).unwrap();
        let from_plain: Batch<f64> = to_batch(&plain.sample(5, &mut b).unwrap());
        assert_eq!(from_memory.states, from_plain.states);
        assert_eq!(from_memory.next_states, from_plain.next_states);
        assert_eq!(from_memory.actions, from_plain.actions);
        assert_eq!(from_memory.rewards, from_plain.rewards);
        assert_eq!(from_memory.dones, from_plain.dones);
    }

    proptest! {
        #[test]
        fn memory_keeps_the_newest_transitions(cap in 1usize..12, n in 0u32..60) {
            let mut memory = ReplayMemory::new(cap);
            for i in 0..n {
                memory.push(&transition(i));
            }
            let kept = (n as usize).min(cap);
            prop_assert_eq!(memory.len(), kept);
            for j in 0..kept {
                prop_assert_eq!(memory.get(j).unwrap(), transition(n - kept as u32 + j as u32));
            }
            let arena: usize = (n - kept as u32..n)
                .map(|i| { let t = transition(i); t.state.runs().len() + t.next_state.runs().len() })
                .sum();
            prop_assert_eq!(memory.runs.len(), arena);
        }

        #[test]
        fn fifo_order_and_capacity_hold(
            cap in 1usize..20,
            ops in proptest::collection::vec(prop_oneof![Just(None), (0u32..1000).prop_map(Some)], 0..200),
            seed in any::<u64>(),
        ) {
            let mut buf = ReplayBuffer::new(cap);
            let mut pushed = Vec::new();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for op in ops {
                match op {
                    Some(x) => { buf.push(x); pushed.push(x); }
                    None => {
                        if let Ok(s) = buf.sample(3, &mut rng) {
                            let tail = &pushed[pushed.len() - buf.len()..];
                            prop_assert!(s.iter().all(|x| tail.contains(x)));
                        }
                    }
                }
                prop_assert!(buf.len() <= cap);
                let expected: Vec<u32> = pushed[pushed.len().saturating_sub(cap)..].to_vec();
                prop_assert_eq!(buf.iter().copied().collect::<Vec<_>>(), expected);
            }
        }
    }
}
