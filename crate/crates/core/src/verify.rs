//! Unitary-equivalence oracle for the ASAP/ALAP segment variants.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::linalg::{circuit_unitary, equivalent_up_to_phase, LinalgError, MAX_UNITARY_QUBITS};
use crate::partition::{annotate_remote, Assignment, DistributedCircuit};
use crate::schedule::{compile_variant, segment_circuit, Policy};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("segment width must be in 2..={max}, got {got}")]
    Width { got: usize, max: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Outcome for one random segment.
#[derive(Debug, Clone, Serialize)]
pub struct SegmentCheck {
    pub n_qubits: usize,
    pub gates: usize,
    pub remote: usize,
    pub asap_equivalent: bool,
    pub alap_equivalent: bool,
    pub asap_moved: bool,
    pub alap_moved: bool,
}

impl SegmentCheck {
    pub fn passed(&self) -> bool {
        self.asap_equivalent && self.alap_equivalent
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<SegmentCheck>,
}

impl VerifyReport {
    pub fn total(&self) -> usize {
        self.checks.len()
    }

    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.passed()).count()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.total()
    }

    /// Segments where at least one variant differs from the original order.
    pub fn nontrivial(&self) -> usize {
        self.checks.iter().filter(|c| c.asap_moved || c.alap_moved).count()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} equivalent", self.passed(), self.total())
    }
}

fn random_angle<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
}

fn random_gate<R: Rng>(n: usize, rng: &mut R) -> Gate {
    let a = rng.random_range(0..n);
    let b = (a + rng.random_range(1..n)) % n;
    // diagonal kinds are over-represented so that remote gates can move
    match rng.random_range(0..10) {
        0 => Gate::h(a),
        1 => Gate::x(a),
        2 => Gate::rx(random_angle(rng), a),
        3 | 4 => Gate::rz(random_angle(rng), a),
        5 | 6 => Gate::rzz(random_angle(rng), a, b),
        7 => Gate::cphase(random_angle(rng), a, b),
        8 => Gate::cnot(a, b),
        _ => Gate::swap(a, b),
    }
}

/// A random two-node segment on 2..=`max_qubits` qubits with at least one
/// remote gate.
pub fn random_segment<R: Rng>(max_qubits: usize, rng: &mut R) -> DistributedCircuit {
    loop {
        let n = rng.random_range(2..=max_qubits);
        let len = rng.random_range(4..=4 * n);
        let gates = (0..len).map(|_| random_gate(n, rng)).collect();
        let circuit = Circuit::from_gates(n, gates).expect("qubits in range");
        let mut node_of: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        node_of[0] = 0;
        node_of[n - 1] = 1;
        let assignment = Assignment::new(node_of, vec![n, n]).expect("valid assignment");
        let dc = annotate_remote(&circuit, &assignment).expect("matching widths");
        if dc.remote_count() > 0 {
            return dc;
        }
    }
}

/// Compiles every variant of `dc` taken as a single segment and compares
/// its unitary with the original.
pub fn check_segment(dc: &DistributedCircuit) -> Result<SegmentCheck, VerifyError> {
    let segment = segment_circuit(dc, dc.remote_count().max(1))[0];
    let original: Vec<usize> = segment.indices().collect();
    let u = circuit_unitary(&dc.circuit.select(&original))?;
    let check = |policy| -> Result<(bool, bool), VerifyError> {
        let order = compile_variant(dc, &segment, policy);
        let v = circuit_unitary(&dc.circuit.select(&order))?;
        Ok((equivalent_up_to_phase(&u, &v)?, order != original))
    };
    let (asap_equivalent, asap_moved) = check(Policy::Asap)?;
    let (alap_equivalent, alap_moved) = check(Policy::Alap)?;
    Ok(SegmentCheck {
        n_qubits: dc.circuit.n_qubits(),
        gates: segment.len(),
        remote: segment.remote_count,
        asap_equivalent,
        alap_equivalent,
        asap_moved,
        alap_moved,
    })
}

/// Runs the oracle on `segments` seeded random segments of width at most
/// `max_qubits`.
pub fn verify(max_qubits: usize, segments: usize, seed: u64) -> Result<VerifyReport, VerifyError> {
    if !(2..=MAX_UNITARY_QUBITS).contains(&max_qubits) {
        return Err(VerifyError::Width { got: max_qubits, max: MAX_UNITARY_QUBITS });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = (0..segments)
        .map(|_| check_segment(&random_segment(max_qubits, &mut rng)))
        .collect::<Result<_, _>>()?;
    Ok(VerifyReport { checks })
}
