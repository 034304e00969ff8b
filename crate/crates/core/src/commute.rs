//! Gate commutation by explicit matrix comparison.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::linalg::circuit_unitary;

/// Max-abs tolerance on `AB - BA`.
pub const COMMUTE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct KindKey {
    tag: u8,
    angle_bits: u64,
}

impl From<GateKind> for KindKey {
    fn from(k: GateKind) -> Self {
        KindKey {
            tag: k.tag(),
            angle_bits: k.angle().map_or(0, f64::to_bits),
        }
    }
}

/// Kinds plus the relabelled qubit pattern of both gates.
type CacheKey = (KindKey, KindKey, [u8; 2], [u8; 2]);

fn cache() -> &'static Mutex<HashMap<CacheKey, bool>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, bool>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Relabels the union of both gates' qubits onto `0..k`, first-seen order.
fn local_pattern(a: &Gate, b: &Gate) -> (Vec<usize>, [u8; 2], [u8; 2]) {
    let mut union: Vec<usize> = Vec::with_capacity(4);
    let label = |q: usize, union: &mut Vec<usize>| -> u8 {
        match union.iter().position(|&u| u == q) {
            Some(i) => i as u8,
            None => {
                union.push(q);
                (union.len() - 1) as u8
            }
        }
    };
    let mut pa = [0u8; 2];
    for (i, &q) in a.qubits().iter().enumerate() {
        pa[i] = label(q, &mut union);
    }
    let mut pb = [0u8; 2];
    for (i, &q) in b.qubits().iter().enumerate() {
        pb[i] = label(q, &mut union);
    }
    // pad one-qubit patterns so the key is unambiguous
    if a.qubits().len() == 1 {
        pa[1] = u8::MAX;
    }
    if b.qubits().len() == 1 {
        pb[1] = u8::MAX;
    }
    (union, pa, pb)
}

fn relabel(g: &Gate, pattern: [u8; 2]) -> Gate {
    let qs: Vec<usize> = g
        .qubits()
        .iter()
        .zip(pattern)
        .map(|(_, p)| p as usize)
        .collect();
    Gate::new(g.kind(), &qs).expect("relabelled gate stays valid")
}

fn commutes_uncached(a: &Gate, b: &Gate, n: usize, pa: [u8; 2], pb: [u8; 2]) -> bool {
    let (la, lb) = (relabel(a, pa), relabel(b, pb));
    let ab = Circuit::from_gates(n, vec![la, lb]).expect("local circuit");
    let ba = Circuit::from_gates(n, vec![lb, la]).expect("local circuit");
    let (u_ab, u_ba) = (
        circuit_unitary(&ab).expect("small unitary"),
        circuit_unitary(&ba).expect("small unitary"),
    );
    u_ab.max_abs_diff(&u_ba) <= COMMUTE_TOL
}

/// True iff the unitaries of `a` and `b` commute. Gates on disjoint qubits
/// always commute; a measurement never commutes with a gate sharing its
/// qubit. Results for shared-qubit pairs are memoized process-wide.
pub fn commutes(a: &Gate, b: &Gate) -> bool {
    if !a.shares_qubit(b) {
        return true;
    }
    if a.kind() == GateKind::Measure || b.kind() == GateKind::Measure {
        return false;
    }
    let (union, pa, pb) = local_pattern(a, b);
    let key = (KindKey::from(a.kind()), KindKey::from(b.kind()), pa, pb);
    if let Some(&hit) = cache().lock().expect("commutation cache").get(&key) {
        return hit;
    }
    let result = commutes_uncached(a, b, union.len(), pa, pb);
    cache().lock().expect("commutation cache").insert(key, result);
    result
}
