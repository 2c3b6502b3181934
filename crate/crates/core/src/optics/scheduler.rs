//! Per-trial event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{EdgeId, NodeId};
use crate::reduction::Cluster;
use crate::wavepacket::BranchId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// The branch reaches the end of `edge`.
    Arrive { edge: EdgeId },
    /// The branch meets its next phase-matching cluster. `entered` is the time
    /// the branch crossed the front face; `jitter` places the cluster's phase
    /// constant relative to the packet's at the moment of contact; `exit` is
    /// the output port of a transmitting medium.
    Match { entered: f64, cluster: Cluster, jitter: f64, penetration: f64, encounter: u32, exit: Option<usize> },
    /// The branch leaves a transmitting medium through output `port`.
    Exit { port: usize },
    Reconfigure { insert: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub node: NodeId,
    pub packet: usize,
    pub branch: BranchId,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, NodeId, usize, BranchId, u64) {
        (self.time, self.node, self.packet, self.branch, self.seq)
    }
}

/// Min-heap wrapper: earliest time first, then node, packet, branch and
/// insertion order.
#[derive(Debug)]
struct Entry(Event);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, na, pa, ba, sa) = self.0.key();
        let (tb, nb, pb, bb, sb) = other.0.key();
        ta.total_cmp(&tb)
            .then(na.cmp(&nb))
            .then(pa.cmp(&pb))
            .then(ba.cmp(&bb))
            .then(sa.cmp(&sb))
            .reverse()
    }
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, node: NodeId, packet: usize, branch: BranchId, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event { time, node, packet, branch, seq, kind }));
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
