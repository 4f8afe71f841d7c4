use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Simulation time plus the sequence number of the event being processed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimClock {
    /// Seconds since scenario start.
    pub now: f64,
    pub tick: u64,
}

struct Scheduled<E> {
    at_ms: u64,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at_ms == other.at_ms && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at_ms, other.seq).cmp(&(self.at_ms, self.seq))
    }
}

/// Time-ordered event queue on an integer millisecond grid.
///
/// Events at the same instant pop in insertion order, so a fixed schedule
/// always replays identically.
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    next_seq: u64,
    clock: SimClock,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            clock: SimClock::default(),
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedules `event` at absolute time `at_ms`. Times in the past are
    /// clamped to the current instant.
    pub fn schedule(&mut self, at_ms: u64, event: E) {
        let now_ms = (self.clock.now * 1000.0).round() as u64;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled {
            at_ms: at_ms.max(now_ms),
            seq,
            event,
        });
    }

    /// Pops the next event and advances the clock to it.
    pub fn pop(&mut self) -> Option<(SimClock, E)> {
        let s = self.heap.pop()?;
        self.clock = SimClock {
            now: s.at_ms as f64 / 1000.0,
            tick: s.seq,
        };
        Some((self.clock, s.event))
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pops_in_time_then_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(2000, "c");
        q.schedule(1000, "a");
        q.schedule(1000, "b");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|(_, e)| e)).collect();
        assert_eq!(order, vec!["a", "b", "c"]);
    }

    #[test]
    fn clock_is_monotone() {
        let mut q = EventQueue::new();
        for t in [5u64, 3, 9, 3, 0] {
            q.schedule(t * 100, t);
        }
        let mut last = -1.0;
        while let Some((clock, e)) = q.pop() {
            assert!(clock.now >= last);
            last = clock.now;
            if e == 3 {
                // scheduling into the past lands at "now"
                q.schedule(0, 99);
            }
        }
        assert_eq!(q.clock().now, 0.9);
    }
}
