//! Discrete-event executor for distributed circuits.
//!
//! Each data qubit has a queue of gates in execution order. A gate starts
//! once it heads the queue of every qubit it touches and those qubits are
//! free. Remote gates additionally take one link from the pool; if none is
//! usable they wait, first come first served. Entanglement events at a
//! given instant are applied before gates start at that instant.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, GateKind};
use crate::dag::build_dag;
use crate::entnet::{AttemptMode, BufferPool, EntError, EntEvent, EntParams, Generator, PoolStats, Storage};
use crate::noise::{accumulate_fidelity, werner_fidelity, IdleMode, NoiseError, NoiseParams, RemoteGateTable};
use crate::partition::DistributedCircuit;
use crate::schedule::{segment_size, select_policy, Policy, VariantTable};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Ent(#[from] EntError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("deadlock at t={time}: {pending} gates pending, {waiting} remote gates waiting and no link can arrive")]
    Deadlock { time: f64, pending: usize, waiting: usize },
    #[error("simulation exceeded the time limit {0}")]
    TimeLimit(f64),
    #[error("latency {name} = {value} must be positive")]
    Latency { name: &'static str, value: f64 },
    #[error("need at least one seed")]
    NoSeeds,
    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Original,
    SyncBuf,
    AsyncBuf,
    AdaptBuf,
    InitBuf,
    Ideal,
}

impl Design {
    pub const ALL: [Design; 6] = [
        Design::Original,
        Design::SyncBuf,
        Design::AsyncBuf,
        Design::AdaptBuf,
        Design::InitBuf,
        Design::Ideal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Design::Original => "original",
            Design::SyncBuf => "sync_buf",
            Design::AsyncBuf => "async_buf",
            Design::AdaptBuf => "adapt_buf",
            Design::InitBuf => "init_buf",
            Design::Ideal => "ideal",
        }
    }

    fn is_adaptive(self) -> bool {
        matches!(self, Design::AdaptBuf | Design::InitBuf)
    }
}

impl std::fmt::Display for Design {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Design {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Design::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown design '{s}'"))
    }
}

/// Operation latencies in local-CNOT cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Latencies {
    pub t_1q: f64,
    pub t_cnot: f64,
    pub t_meas: f64,
    /// Duration of a teleported gate once its link is in hand; defaults to
    /// `t_cnot + t_meas + t_1q`.
    pub t_remote_overhead: Option<f64>,
}

impl Default for Latencies {
    fn default() -> Self {
        Latencies {
            t_1q: 0.1,
            t_cnot: 1.0,
            t_meas: 5.0,
            t_remote_overhead: None,
        }
    }
}

impl Latencies {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, value) in [
            ("t_1q", self.t_1q),
            ("t_cnot", self.t_cnot),
            ("t_meas", self.t_meas),
            ("t_remote_overhead", self.remote()),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EngineError::Latency { name, value });
            }
        }
        Ok(())
    }

    pub fn remote(&self) -> f64 {
        self.t_remote_overhead
            .unwrap_or(self.t_cnot + self.t_meas + self.t_1q)
    }

    /// Latency of a gate executed locally. Every two-qubit kind counts as
    /// one native two-qubit operation.
    pub fn local(&self, kind: GateKind) -> f64 {
        match kind.arity() {
            2 => self.t_cnot,
            _ if kind == GateKind::Measure => self.t_meas,
            _ => self.t_1q,
        }
    }
}

/// When the adaptive controller opens the next segment and samples the
/// buffered-link count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SegmentTrigger {
    /// Once every gate of the previous segment has started.
    Drained,
    /// Once every remote gate of the previous segment has started.
    RemoteIssued,
    /// As soon as some qubit has run out of opened work.
    #[default]
    Demand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    pub latencies: Latencies,
    /// Link storage used by the design without buffer qubits.
    pub original_storage: Storage,
    pub segment_trigger: SegmentTrigger,
    /// Overrides the segment size `round(n_comm_pairs * p_succ)`.
    pub segment_size: Option<usize>,
    pub max_time: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            latencies: Latencies::default(),
            original_storage: Storage::CommQubit,
            segment_trigger: SegmentTrigger::default(),
            segment_size: None,
            max_time: 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub design: Design,
    pub ent: EntParams,
    pub noise: NoiseParams,
    pub engine: EngineParams,
    pub seed: u64,
    pub record_log: bool,
}

impl SimConfig {
    pub fn new(design: Design) -> Self {
        SimConfig {
            design,
            ent: EntParams::default(),
            noise: NoiseParams::default(),
            engine: EngineParams::default(),
            seed: 0,
            record_log: false,
        }
    }

    /// Entanglement parameters and storage as used by the design.
    fn entanglement(&self) -> (EntParams, Storage) {
        let mut ent = self.ent.clone();
        let storage = match self.design {
            Design::Original => {
                ent.mode = AttemptMode::Sync;
                self.engine.original_storage
            }
            Design::SyncBuf => {
                ent.mode = AttemptMode::Sync;
                Storage::Buffer
            }
            _ => {
                ent.mode = AttemptMode::Async;
                Storage::Buffer
            }
        };
        (ent, storage)
    }
}

/// Upper bounds of the remote-wait histogram bins; the first bin holds
/// zero waits and the last everything above 50.
pub const WAIT_BIN_EDGES: [f64; 7] = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0];

fn wait_bin(w: f64) -> usize {
    WAIT_BIN_EDGES
        .iter()
        .position(|&e| w <= e)
        .unwrap_or(WAIT_BIN_EDGES.len())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyCounts {
    pub original: u64,
    pub asap: u64,
    pub alap: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub links: PoolStats,
    pub links_in_buffer: u64,
    pub remote_gates: u64,
    pub policies: PolicyCounts,
    pub wait_histogram: [u64; 8],
    pub mean_remote_wait: f64,
}

impl SimStats {
    /// Every generated link is accounted for and every remote gate used
    /// exactly one.
    pub fn is_conserved(&self) -> bool {
        let l = &self.links;
        l.generated == l.consumed + l.discarded + self.links_in_buffer && l.consumed == self.remote_gates
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub design: Design,
    pub seed: u64,
    pub depth: f64,
    pub fidelity: f64,
    pub stats: SimStats,
    #[serde(skip)]
    pub log: Vec<LogRecord>,
}

/// One executed gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateRecord {
    pub gate: usize,
    pub start: f64,
    pub end: f64,
    pub fidelity: f64,
    pub qubits: [usize; 2],
    pub arity: usize,
}

impl GateRecord {
    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.arity]
    }
}

/// Event-log entry. Text form is `t,kind,fields...`:
///
/// ```text
/// t,gate,<gate>,<end>,<fidelity>,<q0>[,<q1>]
/// t,link,<link>,<pair>
/// t,blocked,<pair>
/// t,discard,<link>
/// t,consume,<link>,<gate>,<age>
/// t,segment,<index>,<policy>,<e>
/// ```
#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    Gate(GateRecord),
    Link { t: f64, link: u64, pair: usize },
    Blocked { t: f64, pair: usize },
    Discard { t: f64, link: u64 },
    Consume { t: f64, link: u64, gate: usize, age: f64 },
    Segment { t: f64, index: usize, policy: Policy, e: usize },
}

fn policy_name(p: Policy) -> &'static str {
    match p {
        Policy::Original => "original",
        Policy::Asap => "asap",
        Policy::Alap => "alap",
    }
}

impl LogRecord {
    fn write(&self, out: &mut String) {
        // `{}` on f64 prints the shortest string that parses back exactly
        let _ = match self {
            LogRecord::Gate(g) => {
                let _ = write!(out, "{},gate,{},{},{},{}", g.start, g.gate, g.end, g.fidelity, g.qubits[0]);
                if g.arity == 2 {
                    let _ = write!(out, ",{}", g.qubits[1]);
                }
                writeln!(out)
            }
            LogRecord::Link { t, link, pair } => writeln!(out, "{t},link,{link},{pair}"),
            LogRecord::Blocked { t, pair } => writeln!(out, "{t},blocked,{pair}"),
            LogRecord::Discard { t, link } => writeln!(out, "{t},discard,{link}"),
            LogRecord::Consume { t, link, gate, age } => writeln!(out, "{t},consume,{link},{gate},{age}"),
            LogRecord::Segment { t, index, policy, e } => {
                writeln!(out, "{t},segment,{index},{},{e}", policy_name(*policy))
            }
        };
    }
}

pub fn write_log(records: &[LogRecord]) -> String {
    let mut out = String::from("# t,kind,fields\n");
    for r in records {
        r.write(&mut out);
    }
    out
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, EngineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| EngineError::Log { line: i + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 3 {
            return Err(err("too few fields".into()));
        }
        let num = |k: usize| -> Result<f64, EngineError> {
            f.get(k)
                .ok_or_else(|| err(format!("missing field {k}")))?
                .parse::<f64>()
                .map_err(|e| err(format!("field {k}: {e}")))
        };
        let int = |k: usize| -> Result<usize, EngineError> {
            f.get(k)
                .ok_or_else(|| err(format!("missing field {k}")))?
                .parse::<usize>()
                .map_err(|e| err(format!("field {k}: {e}")))
        };
        let t = num(0)?;
        let rec = match f[1] {
            "gate" => {
                let arity = f.len() - 5;
                if !(1..=2).contains(&arity) {
                    return Err(err("gate record needs one or two qubits".into()));
                }
                let q1 = if arity == 2 { int(6)? } else { 0 };
                LogRecord::Gate(GateRecord {
                    gate: int(2)?,
                    start: t,
                    end: num(3)?,
                    fidelity: num(4)?,
                    qubits: [int(5)?, q1],
                    arity,
                })
            }
            "link" => LogRecord::Link { t, link: int(2)? as u64, pair: int(3)? },
            "blocked" => LogRecord::Blocked { t, pair: int(2)? },
            "discard" => LogRecord::Discard { t, link: int(2)? as u64 },
            "consume" => LogRecord::Consume { t, link: int(2)? as u64, gate: int(3)?, age: num(4)? },
            "segment" => {
                let policy = match f.get(3).copied() {
                    Some("original") => Policy::Original,
                    Some("asap") => Policy::Asap,
                    Some("alap") => Policy::Alap,
                    other => return Err(err(format!("unknown policy {other:?}"))),
                };
                LogRecord::Segment { t, index: int(2)?, policy, e: int(4)? }
            }
            other => return Err(err(format!("unknown event kind '{other}'"))),
        };
        out.push(rec);
    }
    Ok(out)
}

/// Depth and fidelity of a set of executed gates. Idle time of a qubit is
/// the time between its first start and last end not spent in a gate.
pub fn summarize<'a>(
    records: impl IntoIterator<Item = &'a GateRecord>,
    n_qubits: usize,
    kappa: f64,
    mode: IdleMode,
) -> (f64, f64) {
    let mut first = vec![f64::INFINITY; n_qubits];
    let mut last = vec![f64::NEG_INFINITY; n_qubits];
    let mut busy = vec![0.0; n_qubits];
    let mut fids = Vec::new();
    let mut depth: f64 = 0.0;
    for r in records {
        depth = depth.max(r.end);
        fids.push(r.fidelity);
        for &q in r.qubits() {
            first[q] = first[q].min(r.start);
            last[q] = last[q].max(r.end);
            busy[q] += r.end - r.start;
        }
    }
    let idle: Vec<f64> = (0..n_qubits)
        .filter(|&q| first[q].is_finite())
        .map(|q| (last[q] - first[q] - busy[q]).max(0.0))
        .collect();
    (depth, accumulate_fidelity(fids, &idle, kappa, mode))
}

/// Recomputes `(depth, fidelity)` from a parsed event log.
pub fn replay(records: &[LogRecord], n_qubits: usize, kappa: f64, mode: IdleMode) -> (f64, f64) {
    let gates = records.iter().filter_map(|r| match r {
        LogRecord::Gate(g) => Some(g),
        _ => None,
    });
    summarize(gates, n_qubits, kappa, mode)
}

/// Monolithic list-scheduled depth with every two-qubit gate local.
pub fn ideal_depth(circuit: &Circuit, latencies: &Latencies) -> f64 {
    let dag = build_dag(circuit);
    let gates = circuit.gates();
    dag.weighted_longest_path(|i| latencies.local(gates[i].kind()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    ready: f64,
    pos: usize,
    gate: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (ready, pos)
        other
            .ready
            .total_cmp(&self.ready)
            .then_with(|| other.pos.cmp(&self.pos))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Sim<'a> {
    dc: &'a DistributedCircuit,
    cfg: &'a SimConfig,
    table: &'a RemoteGateTable,
    remote: Vec<bool>,
    queues: Vec<VecDeque<usize>>,
    free_at: Vec<f64>,
    started: Vec<bool>,
    queued: Vec<bool>,
    pos: Vec<usize>,
    next_pos: usize,
    heap: BinaryHeap<Candidate>,
    waiting: VecDeque<Candidate>,
    records: Vec<GateRecord>,
    log: Vec<LogRecord>,
    unstarted: usize,
    // adaptive control
    variants: Option<VariantTable>,
    segment_of: Vec<usize>,
    seg_unstarted: Vec<usize>,
    seg_remote_unstarted: Vec<usize>,
    qubit_segments: Vec<Vec<usize>>,
    opened: usize,
    stats: SimStats,
    wait_sum: f64,
}

impl<'a> Sim<'a> {
    fn new(dc: &'a DistributedCircuit, cfg: &'a SimConfig, table: &'a RemoteGateTable, m: usize) -> Self {
        let n = dc.circuit.n_qubits();
        let len = dc.circuit.len();
        let remote = if cfg.design == Design::Ideal {
            vec![false; len]
        } else {
            dc.remote_flags().to_vec()
        };
        let mut sim = Sim {
            dc,
            cfg,
            table,
            remote,
            queues: vec![VecDeque::new(); n],
            free_at: vec![0.0; n],
            started: vec![false; len],
            queued: vec![false; len],
            pos: vec![usize::MAX; len],
            next_pos: 0,
            heap: BinaryHeap::new(),
            waiting: VecDeque::new(),
            records: Vec::with_capacity(len),
            log: Vec::new(),
            unstarted: len,
            variants: None,
            segment_of: vec![0; len],
            seg_unstarted: Vec::new(),
            seg_remote_unstarted: Vec::new(),
            qubit_segments: vec![Vec::new(); n],
            opened: 0,
            stats: SimStats::default(),
            wait_sum: 0.0,
        };
        if cfg.design.is_adaptive() {
            let table = VariantTable::build(dc, m);
            for (s, v) in table.segments.iter().enumerate() {
                let mut count = 0;
                let mut remote = 0;
                for g in v.segment.indices() {
                    sim.segment_of[g] = s;
                    count += 1;
                    remote += usize::from(sim.remote[g]);
                    for &q in dc.circuit.gates()[g].qubits() {
                        if sim.qubit_segments[q].last() != Some(&s) {
                            sim.qubit_segments[q].push(s);
                        }
                    }
                }
                sim.seg_unstarted.push(count);
                sim.seg_remote_unstarted.push(remote);
            }
            sim.variants = Some(table);
        }
        sim
    }

    fn enqueue(&mut self, order: &[usize]) {
        let gates = self.dc.circuit.gates();
        for &g in order {
            self.pos[g] = self.next_pos;
            self.next_pos += 1;
            self.queued[g] = true;
            for &q in gates[g].qubits() {
                self.queues[q].push_back(g);
            }
        }
        for &g in order {
            self.offer(g);
        }
    }

    /// Pushes `g` as a candidate if it heads all of its qubit queues.
    fn offer(&mut self, g: usize) {
        let gate = &self.dc.circuit.gates()[g];
        if self.started[g] || !gate.qubits().iter().all(|&q| self.queues[q].front() == Some(&g)) {
            return;
        }
        let ready = gate
            .qubits()
            .iter()
            .map(|&q| self.free_at[q])
            .fold(0.0, f64::max);
        self.heap.push(Candidate { ready, pos: self.pos[g], gate: g });
    }

    fn start(&mut self, g: usize, now: f64, duration: f64, fidelity: f64) {
        let gate = self.dc.circuit.gates()[g];
        let end = now + duration;
        self.started[g] = true;
        self.unstarted -= 1;
        let mut heads = [usize::MAX; 2];
        for (k, &q) in gate.qubits().iter().enumerate() {
            debug_assert_eq!(self.queues[q].front(), Some(&g));
            self.queues[q].pop_front();
            self.free_at[q] = end;
            if let Some(&h) = self.queues[q].front() {
                heads[k] = h;
            }
        }
        let q = gate.qubits();
        let rec = GateRecord {
            gate: g,
            start: now,
            end,
            fidelity,
            qubits: [q[0], *q.get(1).unwrap_or(&0)],
            arity: q.len(),
        };
        self.records.push(rec);
        if self.cfg.record_log {
            self.log.push(LogRecord::Gate(rec));
        }
        if self.variants.is_some() {
            let s = self.segment_of[g];
            self.seg_unstarted[s] -= 1;
            if self.remote[g] {
                self.seg_remote_unstarted[s] -= 1;
            }
        }
        for h in heads {
            if h != usize::MAX {
                self.offer(h);
            }
        }
    }

    fn start_local(&mut self, g: usize, now: f64) {
        let kind = self.dc.circuit.gates()[g].kind();
        let lat = self.cfg.engine.latencies.local(kind);
        let f = match kind.arity() {
            2 => self.cfg.noise.f_cnot,
            _ if kind == GateKind::Measure => self.cfg.noise.f_meas,
            _ => self.cfg.noise.f_1q,
        };
        self.start(g, now, lat, f);
    }

    /// Opens segments while the trigger condition holds; returns whether any
    /// segment was opened.
    fn open_segments(&mut self, now: f64, pool: &BufferPool) -> bool {
        let Some(n_seg) = self.variants.as_ref().map(VariantTable::len) else {
            return false;
        };
        let mut any = false;
        while self.opened < n_seg && self.should_open() {
            let s = self.opened;
            let table = self.variants.as_ref().expect("adaptive");
            let e = pool.available(now);
            let policy = select_policy(e, table.m);
            let order = table.segments[s].get(policy).to_vec();
            match policy {
                Policy::Original => self.stats.policies.original += 1,
                Policy::Asap => self.stats.policies.asap += 1,
                Policy::Alap => self.stats.policies.alap += 1,
            }
            if self.cfg.record_log {
                self.log.push(LogRecord::Segment { t: now, index: s, policy, e });
            }
            self.opened += 1;
            self.enqueue(&order);
            any = true;
        }
        any
    }

    fn should_open(&self) -> bool {
        if self.opened == 0 {
            return true;
        }
        let prev = self.opened - 1;
        match self.cfg.engine.segment_trigger {
            SegmentTrigger::Drained => self.seg_unstarted[prev] == 0,
            SegmentTrigger::RemoteIssued => self.seg_remote_unstarted[prev] == 0,
            SegmentTrigger::Demand => (0..self.queues.len()).any(|q| {
                self.queues[q].is_empty()
                    && self.qubit_segments[q].last().is_some_and(|&s| s >= self.opened)
            }),
        }
    }

    fn log_ent(&mut self, events: Vec<EntEvent>) {
        if !self.cfg.record_log {
            return;
        }
        for ev in events {
            self.log.push(match ev {
                EntEvent::Generated { t, link, pair } => LogRecord::Link { t, link: link.id, pair },
                EntEvent::Blocked { t, pair } => LogRecord::Blocked { t, pair },
                EntEvent::Discarded { t, link } => LogRecord::Discard { t, link: link.id },
            });
        }
    }

    fn run(mut self) -> Result<SimResult, EngineError> {
        let cfg = self.cfg;
        let (ent, storage) = cfg.entanglement();
        let buffered = storage == Storage::Buffer;
        let swaps = if buffered { ent.swap_cnots } else { 0 };
        let link_f0 = cfg.noise.f_epr * cfg.noise.f_cnot.powi(2 * swaps as i32);
        let store_delay = f64::from(swaps) * cfg.engine.latencies.t_cnot;
        let mut gen = Generator::new(ent, storage, link_f0, store_delay)?;
        let mut pool = gen.new_pool();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let uses_links = cfg.design != Design::Ideal && self.remote.iter().any(|&r| r);
        if cfg.design == Design::InitBuf {
            let links = pool.prefill(0.0, cfg.noise.f_epr);
            if cfg.record_log {
                self.log.extend(links.iter().map(|l| LogRecord::Link { t: 0.0, link: l.id, pair: usize::MAX }));
            }
        }
        let t_remote = cfg.engine.latencies.remote();

        if self.variants.is_none() {
            let all: Vec<usize> = (0..self.dc.circuit.len()).collect();
            self.enqueue(&all);
        }
        let mut now = 0.0;
        loop {
            if uses_links {
                let events = gen.step(&mut pool, &mut rng, now, now);
                self.log_ent(events);
            }
            loop {
                let mut progressed = self.open_segments(now, &pool);
                while self.heap.peek().is_some_and(|c| c.ready <= now) {
                    let c = self.heap.pop().expect("peeked");
                    if self.remote[c.gate] {
                        self.waiting.push_back(c);
                    } else {
                        self.start_local(c.gate, now);
                    }
                    progressed = true;
                }
                while !self.waiting.is_empty() {
                    let Some(link) = pool.acquire(now) else { break };
                    let c = self.waiting.pop_front().expect("non-empty");
                    gen.release(&link, now);
                    let age = now - link.created_at;
                    let f_bell = werner_fidelity(link.f0, cfg.noise.kappa, age);
                    let fid = self.table.by_bell_fidelity(f_bell);
                    let wait = now - c.ready;
                    self.stats.wait_histogram[wait_bin(wait)] += 1;
                    self.wait_sum += wait;
                    self.stats.remote_gates += 1;
                    if cfg.record_log {
                        self.log.push(LogRecord::Consume { t: now, link: link.id, gate: c.gate, age });
                    }
                    self.start(c.gate, now, t_remote, fid);
                    progressed = true;
                }
                if !progressed {
                    break;
                }
            }
            if self.unstarted == 0 {
                break;
            }
            let next_gate = self.heap.peek().map(|c| c.ready);
            let next_link = if self.waiting.is_empty() {
                None
            } else {
                gen.next_event_time(&pool)
            };
            let next = match (next_gate, next_link) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => {
                    return Err(EngineError::Deadlock {
                        time: now,
                        pending: self.unstarted,
                        waiting: self.waiting.len(),
                    })
                }
            };
            if next_gate.is_none() && !gen.can_produce() && pool.available(next) == 0 {
                return Err(EngineError::Deadlock {
                    time: now,
                    pending: self.unstarted,
                    waiting: self.waiting.len(),
                });
            }
            if next > cfg.engine.max_time {
                return Err(EngineError::TimeLimit(cfg.engine.max_time));
            }
            now = next;
        }

        let (depth, fidelity) = summarize(
            &self.records,
            self.dc.circuit.n_qubits(),
            cfg.noise.kappa,
            cfg.noise.idle_mode,
        );
        let mut stats = self.stats;
        stats.links = pool.stats();
        stats.links_in_buffer = pool.len() as u64;
        if stats.remote_gates > 0 {
            stats.mean_remote_wait = self.wait_sum / stats.remote_gates as f64;
        }
        Ok(SimResult {
            design: cfg.design,
            seed: cfg.seed,
            depth,
            fidelity,
            stats,
            log: self.log,
        })
    }
}

/// Remote-gate fidelity table for the configured noise parameters.
pub fn remote_table(noise: &NoiseParams) -> Result<RemoteGateTable, EngineError> {
    noise.validate()?;
    Ok(RemoteGateTable::new(noise.f_epr, noise)?)
}

/// Runs one simulation with a pre-built remote-gate table.
pub fn run_with_table(
    dc: &DistributedCircuit,
    cfg: &SimConfig,
    table: &RemoteGateTable,
) -> Result<SimResult, EngineError> {
    cfg.engine.latencies.validate()?;
    cfg.ent.validate()?;
    let p_succ = crate::entnet::attempt_success_prob(&cfg.ent);
    let m = cfg
        .engine
        .segment_size
        .unwrap_or_else(|| segment_size(cfg.ent.n_comm_pairs, p_succ));
    Sim::new(dc, cfg, table, m).run()
}

pub fn run(dc: &DistributedCircuit, cfg: &SimConfig) -> Result<SimResult, EngineError> {
    let table = remote_table(&cfg.noise)?;
    run_with_table(dc, cfg, &table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub results: Vec<SimResult>,
    pub depth_mean: f64,
    pub depth_std: f64,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs one simulation per seed in parallel; results are in seed order.
pub fn sweep_with_table(
    dc: &DistributedCircuit,
    cfg: &SimConfig,
    table: &RemoteGateTable,
    seeds: &[u64],
) -> Result<SweepReport, EngineError> {
    if seeds.is_empty() {
        return Err(EngineError::NoSeeds);
    }
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = SimConfig { seed, ..cfg.clone() };
            run_with_table(dc, &cfg, table)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let depths: Vec<f64> = results.iter().map(|r| r.depth).collect();
    let fids: Vec<f64> = results.iter().map(|r| r.fidelity).collect();
    let (depth_mean, depth_std) = mean_std(&depths);
    let (fidelity_mean, fidelity_std) = mean_std(&fids);
    Ok(SweepReport {
        results,
        depth_mean,
        depth_std,
        fidelity_mean,
        fidelity_std,
    })
}

pub fn sweep(dc: &DistributedCircuit, cfg: &SimConfig, seeds: &[u64]) -> Result<SweepReport, EngineError> {
    let table = remote_table(&cfg.noise)?;
    sweep_with_table(dc, cfg, &table, seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::gen_qft;
    use crate::circuit::Gate;
    use crate::partition::{annotate_remote, Assignment};

    fn two_node(circuit: Circuit, split: usize) -> DistributedCircuit {
        let n = circuit.n_qubits();
        let node_of = (0..n).map(|q| usize::from(q >= split)).collect();
        annotate_remote(&circuit, &Assignment::new(node_of, vec![n, n]).unwrap()).unwrap()
    }

    fn certain(design: Design, pairs: usize) -> SimConfig {
        let mut cfg = SimConfig::new(design);
        cfg.ent.p_succ_override = Some(1.0);
        cfg.ent.n_comm_pairs = pairs;
        cfg.ent.n_buffer_pairs = pairs;
        cfg
    }

    #[test]
    fn ideal_depth_small() {
        let lat = Latencies::default();
        let one = Circuit::from_gates(2, vec![Gate::cnot(0, 1)]).unwrap();
        assert_eq!(ideal_depth(&one, &lat), 1.0);
        let two = Circuit::from_gates(3, vec![Gate::cnot(0, 1), Gate::cnot(1, 2)]).unwrap();
        assert_eq!(ideal_depth(&two, &lat), 2.0);
    }

    #[test]
    fn single_remote_gate_waits_for_first_herald() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1)]).unwrap();
        let dc = two_node(c, 1);
        let r = run(&dc, &certain(Design::SyncBuf, 1)).unwrap();
        assert!((r.depth - 16.1).abs() < 1e-12, "{}", r.depth);
        let r = run(&dc, &certain(Design::InitBuf, 1)).unwrap();
        assert!((r.depth - 6.1).abs() < 1e-12, "{}", r.depth);
        assert!(r.stats.is_conserved());
    }

    #[test]
    fn ideal_run_matches_list_schedule() {
        let dc = two_node(gen_qft(8).unwrap(), 4);
        let r = run(&dc, &SimConfig::new(Design::Ideal)).unwrap();
        assert!((r.depth - ideal_depth(&dc.circuit, &Latencies::default())).abs() < 1e-9);
        assert_eq!(r.stats.links.generated, 0);
        let local_only = 0.999f64.powi(28) * 0.9999f64.powi(8);
        assert!(r.fidelity <= local_only + 1e-12);
    }

    #[test]
    fn every_design_conserves_links() {
        let dc = two_node(gen_qft(8).unwrap(), 4);
        for design in Design::ALL {
            let mut cfg = SimConfig::new(design);
            cfg.ent.p_succ_override = Some(0.4);
            cfg.seed = 3;
            let r = run(&dc, &cfg).unwrap();
            assert!(r.stats.is_conserved(), "{design}: {:?}", r.stats);
            let remote = if design == Design::Ideal { 0 } else { dc.remote_count() as u64 };
            assert_eq!(r.stats.remote_gates, remote);
            assert!(r.fidelity > 0.0 && r.fidelity <= 1.0);
        }
    }

    #[test]
    fn zero_probability_deadlocks() {
        let c = Circuit::from_gates(2, vec![Gate::cnot(0, 1)]).unwrap();
        let dc = two_node(c, 1);
        let mut cfg = SimConfig::new(Design::SyncBuf);
        cfg.ent.p_succ_override = Some(0.0);
        assert!(matches!(run(&dc, &cfg), Err(EngineError::Deadlock { .. })));
    }

    #[test]
    fn log_round_trip_replays_exactly() {
        let dc = two_node(gen_qft(6).unwrap(), 3);
        let mut cfg = SimConfig::new(Design::AdaptBuf);
        cfg.ent.p_succ_override = Some(0.4);
        cfg.record_log = true;
        cfg.seed = 11;
        let r = run(&dc, &cfg).unwrap();
        let text = write_log(&r.log);
        let parsed = parse_log(&text).unwrap();
        assert_eq!(parsed, r.log);
        let (d, f) = replay(&parsed, 6, cfg.noise.kappa, cfg.noise.idle_mode);
        assert_eq!(d, r.depth);
        assert_eq!(f, r.fidelity);
    }

    #[test]
    fn bad_log_lines() {
        assert!(parse_log("1.0,warp,3\n").is_err());
        assert!(parse_log("x,gate,0,1,1,0\n").is_err());
        assert!(parse_log("# header only\n").unwrap().is_empty());
    }

    #[test]
    fn wait_bins() {
        assert_eq!(wait_bin(0.0), 0);
        assert_eq!(wait_bin(0.5), 1);
        assert_eq!(wait_bin(10.0), 4);
        assert_eq!(wait_bin(1e3), 7);
    }

    #[test]
    fn sweep_single_seed_equals_run() {
        let dc = two_node(gen_qft(6).unwrap(), 3);
        let mut cfg = SimConfig::new(Design::AsyncBuf);
        cfg.ent.p_succ_override = Some(0.4);
        cfg.seed = 5;
        let single = run(&dc, &cfg).unwrap();
        let rep = sweep(&dc, &cfg, &[5]).unwrap();
        assert_eq!(rep.results[0], single);
        assert_eq!(rep.depth_mean, single.depth);
        assert_eq!(rep.depth_std, 0.0);
        let twice = sweep(&dc, &cfg, &[5, 5]).unwrap();
        assert_eq!(twice.results[0], twice.results[1]);
    }
}
