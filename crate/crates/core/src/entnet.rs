//! Heralded entanglement generation between two nodes and the buffer that
//! stores successful links.
//!
//! Time is measured in local-CNOT cycles. Every communication-qubit pair
//! runs attempts of length `t_eg` back to back; an attempt started at `s`
//! heralds at `s + t_eg`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntError {
    #[error("{name} = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("BSM success probability {0} exceeds 1/2")]
    BsmBound(f64),
    #[error("attempt cycle time {0} must be at least one local cycle")]
    CycleTime(f64),
    #[error("{subgroups} sub-groups exceed the attempt cycle time {t_eg}")]
    Subgroups { subgroups: usize, t_eg: f64 },
    #[error("pair index {index} out of range for {pairs} communication pairs")]
    PairIndex { index: usize, pairs: usize },
    #[error("need at least one communication pair")]
    NoPairs,
    #[error("swap_cnots must be 0 or 3, got {0}")]
    SwapCnots(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttemptMode {
    #[default]
    Sync,
    Async,
}

/// Physical and system parameters of the entanglement service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntParams {
    pub p_pq1: f64,
    pub p_pq2: f64,
    /// Channel lengths to the BSM station, km.
    pub l1_km: f64,
    pub l2_km: f64,
    pub l_att_km: f64,
    /// Photonic BSM success probability, at most 1/2.
    pub p_s: f64,
    pub p_succ_override: Option<f64>,
    /// Attempt cycle time in local cycles.
    pub t_eg: f64,
    pub n_comm_pairs: usize,
    pub n_buffer_pairs: usize,
    pub mode: AttemptMode,
    /// Number of staggered sub-groups in async mode; defaults to
    /// `min(n_comm_pairs, floor(t_eg))`.
    pub subgroups: Option<usize>,
    /// Maximum link age before it is discarded; `None` disables the cutoff.
    pub cutoff: Option<f64>,
    /// Local CNOTs charged per side for the communication-to-buffer SWAP
    /// (0 or 3).
    pub swap_cnots: u32,
}

impl Default for EntParams {
    fn default() -> Self {
        EntParams {
            p_pq1: 1.0,
            p_pq2: 1.0,
            l1_km: 0.0,
            l2_km: 0.0,
            l_att_km: 20.0,
            p_s: 0.5,
            p_succ_override: None,
            t_eg: 10.0,
            n_comm_pairs: 10,
            n_buffer_pairs: 10,
            mode: AttemptMode::Sync,
            subgroups: None,
            cutoff: None,
            swap_cnots: 0,
        }
    }
}

impl EntParams {
    pub fn validate(&self) -> Result<(), EntError> {
        let probs = [
            ("p_pq1", self.p_pq1),
            ("p_pq2", self.p_pq2),
            ("p_s", self.p_s),
            ("p_succ_override", self.p_succ_override.unwrap_or(0.0)),
        ];
        for (name, value) in probs {
            if !(0.0..=1.0).contains(&value) {
                return Err(EntError::Probability { name, value });
            }
        }
        if self.p_s > 0.5 {
            return Err(EntError::BsmBound(self.p_s));
        }
        if self.t_eg.is_nan() || self.t_eg < 1.0 {
            return Err(EntError::CycleTime(self.t_eg));
        }
        if self.n_comm_pairs == 0 {
            return Err(EntError::NoPairs);
        }
        if self.swap_cnots != 0 && self.swap_cnots != 3 {
            return Err(EntError::SwapCnots(self.swap_cnots));
        }
        let k = self.effective_subgroups();
        if k == 0 || k as f64 > self.t_eg {
            return Err(EntError::Subgroups {
                subgroups: k,
                t_eg: self.t_eg,
            });
        }
        Ok(())
    }

    pub fn effective_subgroups(&self) -> usize {
        self.subgroups
            .unwrap_or_else(|| self.n_comm_pairs.min(self.t_eg.floor() as usize))
    }

    /// Start offset of a pair's first attempt.
    fn offset(&self, pair: usize) -> f64 {
        match self.mode {
            AttemptMode::Sync => 0.0,
            AttemptMode::Async => {
                let k = self.effective_subgroups();
                (pair % k) as f64 * (self.t_eg / k as f64)
            }
        }
    }

    /// Start time of a pair's `k`-th attempt.
    pub fn attempt_start(&self, pair: usize, k: u64) -> f64 {
        self.offset(pair) + k as f64 * self.t_eg
    }
}

/// Fiber transmission efficiency `exp(-L / L_att)`.
pub fn transmission_efficiency(length_km: f64, l_att_km: f64) -> f64 {
    (-length_km / l_att_km).exp()
}

/// Success probability of one heralded attempt.
pub fn attempt_success_prob(params: &EntParams) -> f64 {
    if let Some(p) = params.p_succ_override {
        return p;
    }
    params.p_pq1
        * params.p_pq2
        * transmission_efficiency(params.l1_km, params.l_att_km)
        * transmission_efficiency(params.l2_km, params.l_att_km)
        * params.p_s
}

/// Lazy sequence of attempt start times for one communication pair.
pub fn attempt_times(
    params: &EntParams,
    pair_index: usize,
) -> Result<impl Iterator<Item = f64> + '_, EntError> {
    params.validate()?;
    if pair_index >= params.n_comm_pairs {
        return Err(EntError::PairIndex {
            index: pair_index,
            pairs: params.n_comm_pairs,
        });
    }
    Ok((0u64..).map(move |k| params.attempt_start(pair_index, k)))
}

/// One stored Bell pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntLink {
    pub id: u64,
    pub created_at: f64,
    /// When the link becomes usable (after any SWAP into the buffer).
    pub available_at: f64,
    /// Initial Werner fidelity.
    pub f0: f64,
    /// Communication pair holding the link when there is no buffer.
    #[serde(skip)]
    pub(crate) holder: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolStats {
    pub generated: u64,
    pub consumed: u64,
    pub discarded: u64,
    pub blocked: u64,
}

/// FIFO store of links, oldest first.
#[derive(Debug, Clone)]
pub struct BufferPool {
    capacity: usize,
    links: VecDeque<EntLink>,
    stats: PoolStats,
    next_id: u64,
}

impl BufferPool {
    pub fn new(capacity: usize) -> Self {
        BufferPool {
            capacity,
            links: VecDeque::with_capacity(capacity),
            stats: PoolStats::default(),
            next_id: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.links.len() >= self.capacity
    }

    pub fn stats(&self) -> PoolStats {
        self.stats
    }

    pub fn links(&self) -> impl Iterator<Item = &EntLink> {
        self.links.iter()
    }

    /// `generated == consumed + discarded + in-buffer`.
    pub fn is_conserved(&self) -> bool {
        self.stats.generated == self.stats.consumed + self.stats.discarded + self.links.len() as u64
    }

    /// Stores a new link; `None` when the buffer is full.
    pub fn insert(&mut self, created_at: f64, f0: f64, holder: Option<usize>) -> Option<EntLink> {
        self.insert_delayed(created_at, created_at, f0, holder)
    }

    fn insert_delayed(
        &mut self,
        created_at: f64,
        available_at: f64,
        f0: f64,
        holder: Option<usize>,
    ) -> Option<EntLink> {
        if self.is_full() {
            return None;
        }
        let link = EntLink {
            id: self.next_id,
            created_at,
            available_at,
            f0,
            holder,
        };
        self.next_id += 1;
        self.stats.generated += 1;
        self.links.push_back(link);
        Some(link)
    }

    /// Fills every free slot with links created at `at`.
    pub fn prefill(&mut self, at: f64, f0: f64) -> Vec<EntLink> {
        let mut out = Vec::new();
        while let Some(l) = self.insert(at, f0, None) {
            out.push(l);
        }
        out
    }

    /// Links usable at time `at`.
    pub fn available(&self, at: f64) -> usize {
        self.links.iter().filter(|l| l.available_at <= at).count()
    }

    /// Removes and returns the oldest link usable at `at`.
    pub fn acquire(&mut self, at: f64) -> Option<EntLink> {
        if self.links.front()?.available_at > at {
            return None;
        }
        let link = self.links.pop_front()?;
        self.stats.consumed += 1;
        Some(link)
    }

    pub(crate) fn count_blocked(&mut self) {
        self.stats.blocked += 1;
    }

    /// Drops links with age `>= cutoff` at time `now`.
    fn expire(&mut self, now: f64, cutoff: f64) -> Vec<EntLink> {
        let mut gone = Vec::new();
        while let Some(l) = self.links.front() {
            // same expression as the scheduled expiry time, so the event fires
            if now >= l.created_at + cutoff {
                gone.push(self.links.pop_front().expect("front exists"));
                self.stats.discarded += 1;
            } else {
                break;
            }
        }
        gone
    }

    /// Drops links created strictly before `t`.
    fn drop_older_than(&mut self, t: f64) -> Vec<EntLink> {
        let mut gone = Vec::new();
        while self.links.front().is_some_and(|l| l.available_at < t) {
            gone.push(self.links.pop_front().expect("front exists"));
            self.stats.discarded += 1;
        }
        gone
    }
}

/// Where successful links are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    /// Dedicated buffer qubits; communication pairs never stall.
    Buffer,
    /// Links stay on the communication pair that made them, which stops
    /// attempting until the link is consumed.
    CommQubit,
    /// No storage: a link must be consumed at the instant it is heralded,
    /// otherwise it is lost.
    Herald,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntEvent {
    Generated { t: f64, link: EntLink, pair: usize },
    Blocked { t: f64, pair: usize },
    Discarded { t: f64, link: EntLink },
}

impl EntEvent {
    pub fn time(&self) -> f64 {
        match *self {
            EntEvent::Generated { t, .. } | EntEvent::Blocked { t, .. } | EntEvent::Discarded { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PairState {
    /// Index of the next attempt to start.
    next_k: u64,
    /// Completion time of the attempt in flight, if any.
    in_flight: Option<f64>,
    holding: bool,
}

/// Drives all communication pairs of one node pair.
#[derive(Debug, Clone)]
pub struct Generator {
    params: EntParams,
    p_succ: f64,
    storage: Storage,
    link_f0: f64,
    /// Extra delay between herald and availability (SWAP into the buffer).
    store_delay: f64,
    pairs: Vec<PairState>,
    now: f64,
}

impl Generator {
    pub fn new(params: EntParams, storage: Storage, link_f0: f64, store_delay: f64) -> Result<Self, EntError> {
        params.validate()?;
        let p_succ = attempt_success_prob(&params);
        let pairs = (0..params.n_comm_pairs)
            .map(|i| PairState {
                next_k: 1,
                in_flight: Some(params.attempt_start(i, 0) + params.t_eg),
                holding: false,
            })
            .collect();
        Ok(Generator {
            params,
            p_succ,
            storage,
            link_f0,
            store_delay,
            pairs,
            now: 0.0,
        })
    }

    pub fn params(&self) -> &EntParams {
        &self.params
    }

    pub fn p_succ(&self) -> f64 {
        self.p_succ
    }

    pub fn storage(&self) -> Storage {
        self.storage
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Pool sized for this generator's storage mode.
    pub fn new_pool(&self) -> BufferPool {
        match self.storage {
            Storage::Buffer => BufferPool::new(self.params.n_buffer_pairs),
            Storage::CommQubit | Storage::Herald => BufferPool::new(self.params.n_comm_pairs),
        }
    }

    /// Time of the next herald, expiry or link availability after `now`.
    pub fn next_event_time(&self, pool: &BufferPool) -> Option<f64> {
        let herald = self
            .pairs
            .iter()
            .filter_map(|p| p.in_flight)
            .fold(f64::INFINITY, f64::min);
        let expiry = match (self.storage, self.params.cutoff) {
            (Storage::Herald, _) | (_, None) => f64::INFINITY,
            (_, Some(c)) => pool.links().next().map_or(f64::INFINITY, |l| l.created_at + c),
        };
        let ready = pool
            .links()
            .map(|l| l.available_at)
            .filter(|&a| a > self.now)
            .fold(f64::INFINITY, f64::min);
        let t = herald.min(expiry).min(ready);
        t.is_finite().then_some(t)
    }

    /// True when further heralds can still produce links.
    pub fn can_produce(&self) -> bool {
        self.p_succ > 0.0 && self.pairs.iter().any(|p| p.in_flight.is_some())
    }

    /// Releases the communication pair holding `link`, if any. The pair
    /// resumes at its next scheduled start at or after `at`.
    pub fn release(&mut self, link: &EntLink, at: f64) {
        if let Some(i) = link.holder {
            let p = &mut self.pairs[i];
            p.holding = false;
            let mut k = p.next_k;
            while self.params.attempt_start(i, k) < at {
                k += 1;
            }
            p.next_k = k + 1;
            p.in_flight = Some(self.params.attempt_start(i, k) + self.params.t_eg);
        }
    }

    /// Processes every herald and expiry in `(from_t, to_t]` in time order;
    /// simultaneous heralds are handled in pair-index order, expiries first.
    /// Events at or before the generator's current time are never replayed.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        pool: &mut BufferPool,
        rng: &mut R,
        from_t: f64,
        to_t: f64,
    ) -> Vec<EntEvent> {
        debug_assert!(from_t <= to_t, "inverted step window");
        self.now = self.now.max(from_t);
        let mut events = Vec::new();
        loop {
            let Some(t) = self.next_event_time(pool).filter(|&t| t <= to_t) else {
                break;
            };
            // expiries at t
            let gone = match (self.storage, self.params.cutoff) {
                (Storage::Herald, _) => pool.drop_older_than(t),
                (_, Some(c)) => pool.expire(t, c),
                _ => Vec::new(),
            };
            for link in &gone {
                self.release(link, t);
            }
            events.extend(gone.into_iter().map(|link| EntEvent::Discarded { t, link }));

            for i in 0..self.pairs.len() {
                if self.pairs[i].in_flight != Some(t) {
                    continue;
                }
                let success = self.p_succ > 0.0 && rng.random_bool(self.p_succ.min(1.0));
                let holder = (self.storage == Storage::CommQubit).then_some(i);
                let p = &mut self.pairs[i];
                if success {
                    match pool.insert_delayed(t, t + self.store_delay, self.link_f0, holder) {
                        Some(link) => {
                            events.push(EntEvent::Generated { t, link, pair: i });
                            if holder.is_some() {
                                p.holding = true;
                                p.in_flight = None;
                                continue;
                            }
                        }
                        None => {
                            pool.count_blocked();
                            events.push(EntEvent::Blocked { t, pair: i });
                        }
                    }
                }
                let k = p.next_k;
                p.next_k += 1;
                p.in_flight = Some(self.params.attempt_start(i, k) + self.params.t_eg);
            }
            self.now = t;
        }
        if self.storage == Storage::Herald {
            let gone = pool.drop_older_than(to_t);
            events.extend(gone.into_iter().map(|link| EntEvent::Discarded { t: to_t, link }));
        }
        self.now = self.now.max(to_t);
        events
    }
}
