// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    PacketArrival,
    ControlDelivery,
    Timer,
    FlowExpiry,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::PacketArrival => "packet-arrival",
            EventKind::ControlDelivery => "control-delivery",
            EventKind::Timer => "timer",
            EventKind::FlowExpiry => "flow-expiry",
        }
    }
}

/// Same-instant ordering class. Flow-table mutations that complete at an
/// instant take effect before any packet that arrives at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rank {
    TableUpdate = 0,
    Normal = 1,
}

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub at: SimTime,
    pub rank: Rank,
    pub seq: u64,
    pub payload: P,
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Event<P> {}

impl<P> Event<P> {
    fn key(&self) -> (SimTime, Rank, u64) {
        (self.at, self.rank, self.seq)
    }
}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

/// Deterministic priority queue ordered by `(at, rank, seq)`. `seq` is
/// assigned at push time and increases monotonically.
#[derive(Debug)]
pub struct EventQueue<P> {
    heap: BinaryHeap<Event<P>>,
    next_seq: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), next_seq: 0 }
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, at: SimTime, rank: Rank, payload: P) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { at, rank, seq, payload });
        seq
    }

    pub fn pop(&mut self) -> Option<Event<P>> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.at)
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
    use proptest::prelude::*;

    #[test]
    fn table_updates_win_ties() {
        let mut q = EventQueue::new();
        q.push(SimTime::from_ms(5), Rank::Normal, "packet");
        q.push(SimTime::from_ms(5), Rank::TableUpdate, "install");
        q.push(SimTime::from_ms(1), Rank::Normal, "early");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|e| e.payload)).collect();
        assert_eq!(order, vec!["early", "install", "packet"]);
    }

    proptest! {
        #[test]
        fn pops_in_time_then_seq_order(times in proptest::collection::vec(0u64..50, 1..100)) {
            let mut q = EventQueue::new();
            for (i, t) in times.iter().enumerate() {
                q.push(SimTime::from_us(*t), Rank::Normal, i);
            }
            let mut last: Option<(SimTime, u64)> = None;
            while let Some(e) = q.pop() {
                prop_assert_eq!(e.seq as usize, e.payload);
                if let Some(prev) = last {
                    prop_assert!(prev < (e.at, e.seq));
                }
                last = Some((e.at, e.seq));
            }
        }
    }
}
