//! Gate-level circuit representation.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("gate {kind} expects {expected} qubit(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("gate {kind} repeats qubit {qubit}")]
    DuplicateQubit { kind: &'static str, qubit: usize },
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("circuit must have at least one qubit")]
    NoQubits,
}

/// Gate kinds supported by the IR. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    H,
    X,
    Rx(f64),
    Rz(f64),
    Rzz(f64),
    Cnot,
    Cphase(f64),
    Swap,
    Measure,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Rx(_) | GateKind::Rz(_) | GateKind::Measure => 1,
            GateKind::Rzz(_) | GateKind::Cnot | GateKind::Cphase(_) | GateKind::Swap => 2,
        }
    }

    /// OpenQASM mnemonic.
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Rx(_) => "rx",
            GateKind::Rz(_) => "rz",
            GateKind::Rzz(_) => "rzz",
            GateKind::Cnot => "cx",
            GateKind::Cphase(_) => "cp",
            GateKind::Swap => "swap",
            GateKind::Measure => "measure",
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateKind::Rx(t) | GateKind::Rz(t) | GateKind::Rzz(t) | GateKind::Cphase(t) => Some(t),
            _ => None,
        }
    }

    pub(crate) fn tag(&self) -> u8 {
        match self {
            GateKind::H => 0,
            GateKind::X => 1,
            GateKind::Rx(_) => 2,
            GateKind::Rz(_) => 3,
            GateKind::Rzz(_) => 4,
            GateKind::Cnot => 5,
            GateKind::Cphase(_) => 6,
            GateKind::Swap => 7,
            GateKind::Measure => 8,
        }
    }
}

/// A gate acting on one or two distinct qubits. For CNOT the first qubit is
/// the control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    kind: GateKind,
    qubits: [usize; 2],
}

impl Gate {
    pub fn new(kind: GateKind, qubits: &[usize]) -> Result<Self, CircuitError> {
        let expected = kind.arity();
        if qubits.len() != expected {
            return Err(CircuitError::Arity {
                kind: kind.name(),
                expected,
                got: qubits.len(),
            });
        }
        if expected == 2 && qubits[0] == qubits[1] {
            return Err(CircuitError::DuplicateQubit {
                kind: kind.name(),
                qubit: qubits[0],
            });
        }
        let second = if expected == 2 { qubits[1] } else { qubits[0] };
        Ok(Gate {
            kind,
            qubits: [qubits[0], second],
        })
    }

    fn one(kind: GateKind, q: usize) -> Self {
        Gate {
            kind,
            qubits: [q, q],
        }
    }

    fn two(kind: GateKind, a: usize, b: usize) -> Self {
        assert_ne!(a, b, "two-qubit gate on identical qubits");
        Gate {
            kind,
            qubits: [a, b],
        }
    }

    pub fn h(q: usize) -> Self {
        Self::one(GateKind::H, q)
    }
    pub fn x(q: usize) -> Self {
        Self::one(GateKind::X, q)
    }
    pub fn rx(theta: f64, q: usize) -> Self {
        Self::one(GateKind::Rx(theta), q)
    }
    pub fn rz(theta: f64, q: usize) -> Self {
        Self::one(GateKind::Rz(theta), q)
    }
    pub fn measure(q: usize) -> Self {
        Self::one(GateKind::Measure, q)
    }
    pub fn rzz(theta: f64, a: usize, b: usize) -> Self {
        Self::two(GateKind::Rzz(theta), a, b)
    }
    pub fn cnot(control: usize, target: usize) -> Self {
        Self::two(GateKind::Cnot, control, target)
    }
    pub fn cphase(theta: f64, a: usize, b: usize) -> Self {
        Self::two(GateKind::Cphase(theta), a, b)
    }
    pub fn swap(a: usize, b: usize) -> Self {
        Self::two(GateKind::Swap, a, b)
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.kind.arity()]
    }

    pub fn is_two_qubit(&self) -> bool {
        self.kind.arity() == 2
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.qubits().contains(&q)
    }

    pub fn shares_qubit(&self, other: &Gate) -> bool {
        self.qubits().iter().any(|&q| other.acts_on(q))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.name())?;
        if let Some(t) = self.kind.angle() {
            write!(f, "({t})")?;
        }
        let qs: Vec<String> = self.qubits().iter().map(|q| format!("q[{q}]")).collect();
        write!(f, " {}", qs.join(","))
    }
}

/// An ordered gate list over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self, CircuitError> {
        if n_qubits == 0 {
            return Err(CircuitError::NoQubits);
        }
        Ok(Circuit {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        let mut c = Circuit::new(n_qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        if let Some(&q) = gate.qubits().iter().find(|&&q| q >= self.n_qubits) {
            return Err(CircuitError::QubitOutOfRange {
                qubit: q,
                n_qubits: self.n_qubits,
            });
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    /// Single-qubit unitary gates; measurements are not counted.
    pub fn one_qubit_count(&self) -> usize {
        self.gates
            .iter()
            .filter(|g| !g.is_two_qubit() && g.kind() != GateKind::Measure)
            .count()
    }

    pub fn has_measurement(&self) -> bool {
        self.gates.iter().any(|g| g.kind() == GateKind::Measure)
    }

    /// Number of layers when every gate takes one time step and is placed
    /// as early as its qubits allow.
    pub fn layer_depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for g in &self.gates {
            let l = g.qubits().iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in g.qubits() {
                level[q] = l;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    /// Reorders the gates by a permutation of indices.
    pub fn permuted(&self, order: &[usize]) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: order.iter().map(|&i| self.gates[i]).collect(),
        }
    }

    /// Subcircuit made of the listed gate indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Circuit {
        self.permuted(indices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_and_duplicates_rejected() {
        assert!(matches!(
            Gate::new(GateKind::Cnot, &[0]),
            Err(CircuitError::Arity { expected: 2, .. })
        ));
        assert!(matches!(
            Gate::new(GateKind::H, &[0, 1]),
            Err(CircuitError::Arity { expected: 1, .. })
        ));
        assert!(matches!(
            Gate::new(GateKind::Swap, &[3, 3]),
            Err(CircuitError::DuplicateQubit { qubit: 3, .. })
        ));
    }

    #[test]
    fn out_of_range_qubit() {
        let mut c = Circuit::new(2).unwrap();
        assert_eq!(
            c.push(Gate::cnot(0, 2)),
            Err(CircuitError::QubitOutOfRange {
                qubit: 2,
                n_qubits: 2
            })
        );
        assert!(Circuit::new(0).is_err());
    }

    #[test]
    fn counts_and_depth() {
        let c = Circuit::from_gates(
            3,
            vec![Gate::h(0), Gate::cnot(0, 1), Gate::cnot(1, 2), Gate::measure(2)],
        )
        .unwrap();
        assert_eq!(c.two_qubit_count(), 2);
        assert_eq!(c.one_qubit_count(), 1);
        assert_eq!(c.layer_depth(), 4);
        assert!(c.has_measurement());
        assert_eq!(Gate::rzz(0.5, 0, 1).to_string(), "rzz(0.5) q[0],q[1]");
    }
}
