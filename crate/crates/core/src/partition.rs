//! Qubit-to-node assignment minimizing remote two-qubit gates.
//!
//! Bipartitioning uses multi-start Fiduccia–Mattheyses refinement followed
//! by a pair-swap descent, so the returned cut is never worse than any
//! assignment reachable by exchanging one qubit from each side.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::Circuit;

pub const FM_STARTS: usize = 16;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("capacities {capacities:?} cannot hold {qubits} qubits")]
    Infeasible { capacities: Vec<usize>, qubits: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("node {node} holds {count} qubits, capacity is {capacity}")]
    CapacityExceeded {
        node: usize,
        count: usize,
        capacity: usize,
    },
    #[error("assignment covers {got} qubits, circuit has {expected}")]
    Coverage { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Weighted qubit interaction graph. Edge `(i, j)` with `i < j` carries the
/// number of two-qubit gates on that pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    n: usize,
    edges: BTreeMap<(usize, usize), u32>,
}

impl InteractionGraph {
    pub fn new(n: usize) -> Self {
        InteractionGraph {
            n,
            edges: BTreeMap::new(),
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: u32) {
        assert!(a != b && a < self.n && b < self.n, "invalid edge ({a}, {b})");
        *self.edges.entry((a.min(b), a.max(b))).or_insert(0) += w;
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.edges.iter().map(|(&k, &w)| (k, w))
    }

    pub fn weight(&self, a: usize, b: usize) -> u32 {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sum of weights over edges whose endpoints sit on different nodes.
    pub fn cut_weight(&self, node_of: &[usize]) -> u64 {
        self.edges
            .iter()
            .filter(|((a, b), _)| node_of[*a] != node_of[*b])
            .map(|(_, &w)| w as u64)
            .sum()
    }

    fn adjacency(&self) -> Vec<Vec<(usize, i64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (&(a, b), &w) in &self.edges {
            adj[a].push((b, w as i64));
            adj[b].push((a, w as i64));
        }
        adj
    }
}

pub fn interaction_graph(circuit: &Circuit) -> InteractionGraph {
    let mut g = InteractionGraph::new(circuit.n_qubits());
    for gate in circuit.gates().iter().filter(|g| g.is_two_qubit()) {
        let q = gate.qubits();
        g.add_edge(q[0], q[1], 1);
    }
    g
}

/// Node assignment of every qubit, with per-node capacities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    node_of: Vec<usize>,
    capacities: Vec<usize>,
}

impl Assignment {
    pub fn new(node_of: Vec<usize>, capacities: Vec<usize>) -> Result<Self, PartitionError> {
        let mut counts = vec![0usize; capacities.len()];
        for (q, &node) in node_of.iter().enumerate() {
            if node >= capacities.len() {
                return Err(PartitionError::Malformed {
                    line: q + 1,
                    message: format!("node {node} out of range for {} nodes", capacities.len()),
                });
            }
            counts[node] += 1;
        }
        for (node, (&count, &capacity)) in counts.iter().zip(&capacities).enumerate() {
            if count > capacity {
                return Err(PartitionError::CapacityExceeded {
                    node,
                    count,
                    capacity,
                });
            }
        }
        Ok(Assignment {
            node_of,
            capacities,
        })
    }

    /// Every qubit on node 0, which must be able to hold them all.
    pub fn single_node(n_qubits: usize) -> Self {
        Assignment {
            node_of: vec![0; n_qubits],
            capacities: vec![n_qubits],
        }
    }

    /// Qubits split into consecutive blocks filling each node in turn.
    pub fn contiguous(n_qubits: usize, capacities: Vec<usize>) -> Result<Self, PartitionError> {
        check_feasible(n_qubits, &capacities)?;
        let mut node_of = Vec::with_capacity(n_qubits);
        for (node, &cap) in capacities.iter().enumerate() {
            let take = cap.min(n_qubits - node_of.len());
            node_of.extend(std::iter::repeat_n(node, take));
        }
        Assignment::new(node_of, capacities)
    }

    pub fn node_of(&self, q: usize) -> usize {
        self.node_of[q]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.node_of
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn n_qubits(&self) -> usize {
        self.node_of.len()
    }

    pub fn to_text(&self) -> String {
        self.node_of
            .iter()
            .enumerate()
            .map(|(q, n)| format!("{q} {n}\n"))
            .collect()
    }
}

fn check_feasible(n: usize, capacities: &[usize]) -> Result<(), PartitionError> {
    if capacities.iter().sum::<usize>() < n {
        return Err(PartitionError::Infeasible {
            capacities: capacities.to_vec(),
            qubits: n,
        });
    }
    Ok(())
}

/// Two-way partition state with incremental gains.
struct Bisection<'a> {
    adj: &'a [Vec<(usize, i64)>],
    side: Vec<u8>,
    size: [usize; 2],
}

impl Bisection<'_> {
    /// Cut reduction obtained by moving `v` to the other side.
    fn gain(&self, v: usize) -> i64 {
        self.adj[v]
            .iter()
            .map(|&(u, w)| if self.side[u] == self.side[v] { -w } else { w })
            .sum()
    }

    fn flip(&mut self, v: usize) {
        let s = self.side[v] as usize;
        self.size[s] -= 1;
        self.size[1 - s] += 1;
        self.side[v] = 1 - self.side[v];
    }

    fn cut(&self) -> i64 {
        let mut c = 0;
        for (v, nb) in self.adj.iter().enumerate() {
            for &(u, w) in nb {
                if u > v && self.side[u] != self.side[v] {
                    c += w;
                }
            }
        }
        c
    }

    fn feasible(&self, caps: [usize; 2]) -> bool {
        self.size[0] <= caps[0] && self.size[1] <= caps[1]
    }

    /// One FM pass: every vertex moves at most once, the best feasible
    /// prefix of moves is kept. A move may overfill a side by one vertex so
    /// exactly balanced partitions can still exchange vertices. Returns the
    /// cut improvement.
    fn fm_pass(&mut self, caps: [usize; 2]) -> i64 {
        let n = self.side.len();
        let mut locked = vec![false; n];
        let mut moves = Vec::with_capacity(n);
        let mut running = 0i64;
        let mut best = 0i64;
        let mut best_len = 0usize;
        for _ in 0..n {
            let mut pick: Option<(i64, usize)> = None;
            for v in 0..n {
                if locked[v] {
                    continue;
                }
                let to = 1 - self.side[v] as usize;
                if self.size[to] + 1 > caps[to] + 1 {
                    continue;
                }
                let g = self.gain(v);
                // ties resolved towards the lower qubit index
                if pick.is_none_or(|(bg, _)| g > bg) {
                    pick = Some((g, v));
                }
            }
            let Some((g, v)) = pick else { break };
            self.flip(v);
            locked[v] = true;
            moves.push(v);
            running += g;
            if running > best && self.feasible(caps) {
                best = running;
                best_len = moves.len();
            }
        }
        for &v in moves[best_len..].iter().rev() {
            self.flip(v);
        }
        best
    }

    /// Best-improvement descent over single feasible moves and one-for-one
    /// swaps until neither improves the cut.
    fn swap_descent(&mut self, caps: [usize; 2]) {
        let n = self.side.len();
        loop {
            let gains: Vec<i64> = (0..n).map(|v| self.gain(v)).collect();
            let mut best: Option<(i64, usize, Option<usize>)> = None;
            for v in 0..n {
                let to = 1 - self.side[v] as usize;
                if self.size[to] < caps[to] && gains[v] > best.map_or(0, |b| b.0) {
                    best = Some((gains[v], v, None));
                }
            }
            for a in 0..n {
                for b in a + 1..n {
                    if self.side[a] == self.side[b] {
                        continue;
                    }
                    let w = self.adj[a]
                        .iter()
                        .find(|&&(u, _)| u == b)
                        .map_or(0, |&(_, w)| w);
                    let g = gains[a] + gains[b] - 2 * w;
                    if g > best.map_or(0, |b| b.0) {
                        best = Some((g, a, Some(b)));
                    }
                }
            }
            match best {
                Some((_, a, b)) => {
                    self.flip(a);
                    if let Some(b) = b {
                        self.flip(b);
                    }
                }
                None => return,
            }
        }
    }
}

/// Result of one FM start, kept for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct StartOutcome {
    pub initial_cut: u64,
    pub final_cut: u64,
    pub node_of: Vec<usize>,
}

fn random_balanced_start(n: usize, caps: [usize; 2], seed: u64, start: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // side 0 gets a share proportional to its capacity
    let total = caps[0] + caps[1];
    let n0 = ((n * caps[0]) as f64 / total as f64).round() as usize;
    let n0 = n0.clamp(n.saturating_sub(caps[1]), caps[0].min(n));
    let mut side = vec![1u8; n];
    for &v in &order[..n0] {
        side[v] = 0;
    }
    side
}

fn run_start(graph: &InteractionGraph, adj: &[Vec<(usize, i64)>], caps: [usize; 2], seed: u64, start: usize) -> StartOutcome {
    let n = graph.vertex_count();
    let side = random_balanced_start(n, caps, seed, start);
    let mut size = [0usize; 2];
    for &s in &side {
        size[s as usize] += 1;
    }
    let mut b = Bisection { adj, side, size };
    let initial_cut = b.cut() as u64;
    while b.fm_pass(caps) > 0 {}
    b.swap_descent(caps);
    StartOutcome {
        initial_cut,
        final_cut: b.cut() as u64,
        node_of: b.side.iter().map(|&s| s as usize).collect(),
    }
}

/// Runs every FM start and returns their outcomes in start order.
pub fn bipartition_starts(
    graph: &InteractionGraph,
    capacities: [usize; 2],
    seed: u64,
    starts: usize,
) -> Result<Vec<StartOutcome>, PartitionError> {
    check_feasible(graph.vertex_count(), &capacities)?;
    let adj = graph.adjacency();
    Ok((0..starts)
        .into_par_iter()
        .map(|s| run_start(graph, &adj, capacities, seed, s))
        .collect())
}

/// Min-cut balanced bipartition: the best of [`FM_STARTS`] random starts,
/// ties going to the earlier start.
pub fn bipartition(
    graph: &InteractionGraph,
    capacities: [usize; 2],
    seed: u64,
) -> Result<Assignment, PartitionError> {
    let outcomes = bipartition_starts(graph, capacities, seed, FM_STARTS)?;
    let best = outcomes
        .into_iter()
        .min_by_key(|o| o.final_cut)
        .expect("at least one start");
    Assignment::new(best.node_of, capacities.to_vec())
}

/// Parses `qubit node` lines. Blank lines and `#` comments are skipped.
pub fn parse_assignment(text: &str, capacities: &[usize]) -> Result<Assignment, PartitionError> {
    let mut pairs: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        let malformed = |message: String| PartitionError::Malformed { line, message };
        if fields.len() != 2 {
            return Err(malformed(format!("expected 'qubit node', got '{body}'")));
        }
        let q: usize = fields[0]
            .parse()
            .map_err(|_| malformed(format!("bad qubit index '{}'", fields[0])))?;
        let node: usize = fields[1]
            .parse()
            .map_err(|_| malformed(format!("bad node id '{}'", fields[1])))?;
        if node >= capacities.len() {
            return Err(malformed(format!(
                "node {node} out of range for {} nodes",
                capacities.len()
            )));
        }
        if pairs.insert(q, node).is_some() {
            return Err(malformed(format!("duplicate qubit {q}")));
        }
    }
    let n = pairs.len();
    if let Some((&q, _)) = pairs.iter().find(|(&q, _)| q >= n) {
        return Err(PartitionError::Malformed {
            line: 0,
            message: format!("qubit indices must be contiguous from 0; found {q} among {n} entries"),
        });
    }
    Assignment::new(pairs.into_values().collect(), capacities.to_vec())
}

pub fn load_assignment(path: impl AsRef<Path>, capacities: &[usize]) -> Result<Assignment, PartitionError> {
    parse_assignment(&std::fs::read_to_string(path)?, capacities)
}

/// Circuit with per-gate remote flags under a node assignment.
#[derive(Debug, Clone)]
pub struct DistributedCircuit {
    pub circuit: Circuit,
    pub assignment: Assignment,
    remote: Vec<bool>,
}

impl DistributedCircuit {
    pub fn is_remote(&self, gate: usize) -> bool {
        self.remote[gate]
    }

    pub fn remote_flags(&self) -> &[bool] {
        &self.remote
    }

    pub fn remote_count(&self) -> usize {
        self.remote.iter().filter(|&&r| r).count()
    }

    pub fn local_two_qubit_count(&self) -> usize {
        self.circuit.two_qubit_count() - self.remote_count()
    }
}

/// Labels two-qubit gates whose qubits sit on different nodes.
pub fn annotate_remote(circuit: &Circuit, assignment: &Assignment) -> Result<DistributedCircuit, PartitionError> {
    if assignment.n_qubits() != circuit.n_qubits() {
        return Err(PartitionError::Coverage {
            expected: circuit.n_qubits(),
            got: assignment.n_qubits(),
        });
    }
    let remote = circuit
        .gates()
        .iter()
        .map(|g| {
            g.is_two_qubit() && {
                let q = g.qubits();
                assignment.node_of(q[0]) != assignment.node_of(q[1])
            }
        })
        .collect();
    Ok(DistributedCircuit {
        circuit: circuit.clone(),
        assignment: assignment.clone(),
        remote,
    })
}
