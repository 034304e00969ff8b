//! Segmentation of a distributed circuit and pre-compiled remote-gate
//! placement variants.

use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::commute::commutes;
use crate::partition::DistributedCircuit;

/// Remote gates per segment: `max(1, round(n_comm_pairs * p_succ))`.
pub fn segment_size(n_comm_pairs: usize, p_succ: f64) -> usize {
    ((n_comm_pairs as f64 * p_succ).round() as usize).max(1)
}

/// Contiguous slice `[start, end)` of the stored gate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub remote_count: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

/// Cuts the stored order after every `m`-th remote gate. Gates after the
/// last cut form a final segment; a circuit without remote gates is one
/// segment.
pub fn segment_circuit(dc: &DistributedCircuit, m: usize) -> Vec<Segment> {
    let m = m.max(1);
    let n = dc.circuit.len();
    let mut segments = Vec::new();
    let mut start = 0;
    let mut count = 0;
    for i in 0..n {
        if dc.is_remote(i) {
            count += 1;
            if count == m {
                segments.push(Segment { start, end: i + 1, remote_count: count });
                start = i + 1;
                count = 0;
            }
        }
    }
    if start < n || segments.is_empty() {
        segments.push(Segment { start, end: n, remote_count: count });
    }
    segments
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Original,
    Asap,
    Alap,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Original, Policy::Asap, Policy::Alap];
}

/// `e > m` selects ASAP, `e == 0` ALAP, anything else the original order.
pub fn select_policy(e: usize, m: usize) -> Policy {
    if e > m {
        Policy::Asap
    } else if e == 0 {
        Policy::Alap
    } else {
        Policy::Original
    }
}

/// Reorders `order` (gate indices into `gates`) by moving remote gates
/// across adjacent commuting non-remote gates, earlier for ASAP and later
/// for ALAP, until nothing moves. Remote gates never pass each other.
pub fn reorder(gates: &[Gate], remote: &[bool], order: &[usize], policy: Policy) -> Vec<usize> {
    let mut out = order.to_vec();
    if policy == Policy::Original || out.len() < 2 {
        return out;
    }
    let cap = out.len() * out.len();
    let mut moves = 0;
    let movable = |a: usize, b: usize| -> bool {
        // `a` directly precedes `b`
        match policy {
            Policy::Asap => remote[b] && !remote[a],
            Policy::Alap => remote[a] && !remote[b],
            Policy::Original => false,
        }
    };
    loop {
        let mut changed = false;
        let mut pos = 1;
        while pos < out.len() {
            let (a, b) = (out[pos - 1], out[pos]);
            if movable(a, b) && commutes(&gates[a], &gates[b]) {
                out.swap(pos - 1, pos);
                changed = true;
                moves += 1;
                if moves >= cap {
                    return out;
                }
                // skip past the moved pair so each gate moves once per sweep
                pos += 1;
            }
            pos += 1;
        }
        if !changed {
            return out;
        }
    }
}

/// Gate order of one segment under `policy`.
pub fn compile_variant(dc: &DistributedCircuit, segment: &Segment, policy: Policy) -> Vec<usize> {
    let order: Vec<usize> = segment.indices().collect();
    reorder(dc.circuit.gates(), dc.remote_flags(), &order, policy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentVariants {
    pub segment: Segment,
    pub original: Vec<usize>,
    pub asap: Vec<usize>,
    pub alap: Vec<usize>,
}

impl SegmentVariants {
    pub fn get(&self, policy: Policy) -> &[usize] {
        match policy {
            Policy::Original => &self.original,
            Policy::Asap => &self.asap,
            Policy::Alap => &self.alap,
        }
    }
}

/// Pre-compiled variants for every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTable {
    pub m: usize,
    pub segments: Vec<SegmentVariants>,
}

impl VariantTable {
    pub fn build(dc: &DistributedCircuit, m: usize) -> Self {
        let segments = segment_circuit(dc, m)
            .into_iter()
            .map(|s| SegmentVariants {
                segment: s,
                original: compile_variant(dc, &s, Policy::Original),
                asap: compile_variant(dc, &s, Policy::Asap),
                alap: compile_variant(dc, &s, Policy::Alap),
            })
            .collect();
        VariantTable { m, segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("variant table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Circuit;
    use crate::partition::{annotate_remote, Assignment};

    fn distributed(n: usize, gates: Vec<Gate>, split: usize) -> DistributedCircuit {
        let c = Circuit::from_gates(n, gates).unwrap();
        let node_of = (0..n).map(|q| usize::from(q >= split)).collect();
        let a = Assignment::new(node_of, vec![n, n]).unwrap();
        annotate_remote(&c, &a).unwrap()
    }

    #[test]
    fn segment_sizes() {
        assert_eq!(segment_size(10, 0.4), 4);
        assert_eq!(segment_size(1, 0.01), 1);
        assert_eq!(segment_size(20, 0.4), 8);
    }

    #[test]
    fn policy_lookup() {
        assert_eq!(select_policy(5, 4), Policy::Asap);
        assert_eq!(select_policy(0, 4), Policy::Alap);
        assert_eq!(select_policy(2, 4), Policy::Original);
        assert_eq!(select_policy(4, 4), Policy::Original);
    }

    #[test]
    fn no_remote_gates_is_one_segment() {
        let dc = distributed(2, vec![Gate::cnot(0, 1), Gate::h(0)], 2);
        let s = segment_circuit(&dc, 4);
        assert_eq!(s, vec![Segment { start: 0, end: 2, remote_count: 0 }]);
        let empty = distributed(2, vec![], 2);
        assert_eq!(segment_circuit(&empty, 4).len(), 1);
    }

    #[test]
    fn remote_counts_per_segment() {
        let gates = |k: usize| (0..k).flat_map(|_| [Gate::h(0), Gate::cnot(0, 1)]).collect::<Vec<_>>();
        let dc = distributed(2, gates(12), 1);
        let counts: Vec<usize> = segment_circuit(&dc, 4).iter().map(|s| s.remote_count).collect();
        assert_eq!(counts, vec![4, 4, 4]);
        let dc = distributed(2, gates(10), 1);
        let segs = segment_circuit(&dc, 4);
        let counts: Vec<usize> = segs.iter().map(|s| s.remote_count).collect();
        assert_eq!(counts, vec![4, 4, 2]);
        assert_eq!(segs.iter().map(Segment::len).sum::<usize>(), 20);
    }

    #[test]
    fn trailing_local_gates_get_own_segment() {
        let dc = distributed(2, vec![Gate::cnot(0, 1), Gate::h(0)], 1);
        let segs = segment_circuit(&dc, 1);
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1], Segment { start: 1, end: 2, remote_count: 0 });
    }

    #[test]
    fn asap_moves_past_diagonal_gate() {
        let dc = distributed(2, vec![Gate::rz(0.3, 0), Gate::rzz(0.5, 0, 1)], 1);
        let s = segment_circuit(&dc, 4)[0];
        assert_eq!(compile_variant(&dc, &s, Policy::Asap), vec![1, 0]);
        assert_eq!(compile_variant(&dc, &s, Policy::Alap), vec![0, 1]);
        assert_eq!(compile_variant(&dc, &s, Policy::Original), vec![0, 1]);
    }

    #[test]
    fn asap_blocked_by_non_commuting_gate() {
        let dc = distributed(3, vec![Gate::cnot(0, 1), Gate::cnot(1, 2)], 2);
        assert!(dc.is_remote(1) && !dc.is_remote(0));
        let s = segment_circuit(&dc, 4)[0];
        assert_eq!(compile_variant(&dc, &s, Policy::Asap), vec![0, 1]);
    }

    #[test]
    fn remote_first_is_fixpoint() {
        let dc = distributed(2, vec![Gate::rzz(0.5, 0, 1), Gate::rz(0.3, 0)], 1);
        let s = segment_circuit(&dc, 4)[0];
        assert_eq!(compile_variant(&dc, &s, Policy::Asap), vec![0, 1]);
        assert_eq!(compile_variant(&dc, &s, Policy::Alap), vec![1, 0]);
    }

    #[test]
    fn remote_gates_keep_relative_order() {
        // two disjoint remote gates behind a run of disjoint local gates
        let g = vec![Gate::h(1), Gate::h(2), Gate::cnot(0, 3), Gate::cnot(1, 2), Gate::h(0)];
        let dc = distributed(4, g, 2);
        let s = segment_circuit(&dc, 8)[0];
        let asap = compile_variant(&dc, &s, Policy::Asap);
        let pos = |v: &[usize], x: usize| v.iter().position(|&y| y == x).unwrap();
        assert!(pos(&asap, 2) < pos(&asap, 3));
        assert_eq!(asap[0], 2);
        let alap = compile_variant(&dc, &s, Policy::Alap);
        assert!(pos(&alap, 2) < pos(&alap, 3));
    }

    #[test]
    fn table_json_round_trip() {
        let dc = distributed(2, vec![Gate::rz(0.3, 0), Gate::rzz(0.5, 0, 1), Gate::h(1)], 1);
        let t = VariantTable::build(&dc, 1);
        let back = VariantTable::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.segments[0].get(Policy::Asap), &[1, 0]);
    }
}
