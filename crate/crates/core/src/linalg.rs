//! Dense complex matrices and statevector kernels for small systems.
//!
//! Qubit `q` is bit `q` of a basis-state index (little-endian). Two-qubit
//! gate matrices are written in the local basis `|a b>` where `a` is the
//! gate's first qubit and the most significant local bit.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};

pub const MAX_UNITARY_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unitary requested for {0} qubits, limit is {MAX_UNITARY_QUBITS}")]
    TooManyQubits(usize),
    #[error("circuit contains a measurement and has no unitary")]
    Measurement,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Square complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim, "non-square matrix");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    /// Maximum deviation of `U^dagger U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&CMatrix::identity(self.dim))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Matrix of a unitary gate kind: 2x2 for one-qubit kinds, 4x4 in the
/// `|a b>` basis for two-qubit kinds. `None` for measurement.
pub fn gate_matrix(kind: GateKind) -> Option<CMatrix> {
    let s = FRAC_1_SQRT_2;
    let m = match kind {
        GateKind::H => CMatrix::from_rows(&[&[c(s, 0.0), c(s, 0.0)], &[c(s, 0.0), c(-s, 0.0)]]),
        GateKind::X => CMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        GateKind::Rx(t) => {
            let (cs, sn) = ((t / 2.0).cos(), (t / 2.0).sin());
            CMatrix::from_rows(&[&[c(cs, 0.0), c(0.0, -sn)], &[c(0.0, -sn), c(cs, 0.0)]])
        }
        GateKind::Rz(t) => {
            let mut m = CMatrix::zeros(2);
            m[(0, 0)] = Complex64::from_polar(1.0, -t / 2.0);
            m[(1, 1)] = Complex64::from_polar(1.0, t / 2.0);
            m
        }
        GateKind::Rzz(t) => {
            let mut m = CMatrix::zeros(4);
            let same = Complex64::from_polar(1.0, -t / 2.0);
            let diff = Complex64::from_polar(1.0, t / 2.0);
            m[(0, 0)] = same;
            m[(1, 1)] = diff;
            m[(2, 2)] = diff;
            m[(3, 3)] = same;
            m
        }
        GateKind::Cnot => {
            let mut m = CMatrix::zeros(4);
            m[(0, 0)] = ONE;
            m[(1, 1)] = ONE;
            m[(2, 3)] = ONE;
            m[(3, 2)] = ONE;
            m
        }
        GateKind::Cphase(t) => {
            let mut m = CMatrix::identity(4);
            m[(3, 3)] = Complex64::from_polar(1.0, t);
            m
        }
        GateKind::Swap => {
            let mut m = CMatrix::zeros(4);
            m[(0, 0)] = ONE;
            m[(1, 2)] = ONE;
            m[(2, 1)] = ONE;
            m[(3, 3)] = ONE;
            m
        }
        GateKind::Measure => return None,
    };
    Some(m)
}

/// Applies a 2x2 matrix to qubit `q` of a statevector.
pub fn apply_1q(state: &mut [Complex64], q: usize, m: &CMatrix) {
    let bit = 1usize << q;
    for i in 0..state.len() {
        if i & bit == 0 {
            let j = i | bit;
            let (a, b) = (state[i], state[j]);
            state[i] = m[(0, 0)] * a + m[(0, 1)] * b;
            state[j] = m[(1, 0)] * a + m[(1, 1)] * b;
        }
    }
}

/// Applies a 4x4 matrix to qubits `(a, b)`, `a` being the high local bit.
pub fn apply_2q(state: &mut [Complex64], a: usize, b: usize, m: &CMatrix) {
    let (ba, bb) = (1usize << a, 1usize << b);
    for i in 0..state.len() {
        if i & ba == 0 && i & bb == 0 {
            let idx = [i, i | bb, i | ba, i | ba | bb];
            let v = idx.map(|k| state[k]);
            for (r, &k) in idx.iter().enumerate() {
                state[k] = (0..4).map(|col| m[(r, col)] * v[col]).sum();
            }
        }
    }
}

/// Applies a unitary gate to a statevector. Measurement gates panic.
pub fn apply_gate(state: &mut [Complex64], gate: &Gate) {
    let m = gate_matrix(gate.kind()).expect("measurement has no unitary action");
    match gate.qubits() {
        [q] => apply_1q(state, *q, &m),
        [a, b] => apply_2q(state, *a, *b, &m),
        _ => unreachable!(),
    }
}

/// Full unitary of a measurement-free circuit on at most 12 qubits.
pub fn circuit_unitary(circuit: &Circuit) -> Result<CMatrix, LinalgError> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(LinalgError::TooManyQubits(n));
    }
    if circuit.has_measurement() {
        return Err(LinalgError::Measurement);
    }
    let dim = 1usize << n;
    let mut u = CMatrix::zeros(dim);
    let mut state = vec![ZERO; dim];
    for col in 0..dim {
        state.iter_mut().for_each(|a| *a = ZERO);
        state[col] = ONE;
        for g in circuit.gates() {
            apply_gate(&mut state, g);
        }
        for (row, &a) in state.iter().enumerate() {
            u[(row, col)] = a;
        }
    }
    Ok(u)
}

/// Tolerance used by [`equivalent_up_to_phase`].
pub const PHASE_EQ_TOL: f64 = 1e-8;

/// True when `v = e^{i phi} u` for some global phase, within
/// [`PHASE_EQ_TOL`] max-abs after aligning on the largest entry of `u`.
pub fn equivalent_up_to_phase(u: &CMatrix, v: &CMatrix) -> Result<bool, LinalgError> {
    if u.dim() != v.dim() {
        return Err(LinalgError::DimensionMismatch(u.dim(), v.dim()));
    }
    let (k, _) = u
        .data
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("empty matrix");
    let (a, b) = (u.data[k], v.data[k]);
    if a.norm() < PHASE_EQ_TOL {
        // both must be numerically zero everywhere
        return Ok(v.data.iter().all(|x| x.norm() < PHASE_EQ_TOL));
    }
    if b.norm() < PHASE_EQ_TOL {
        return Ok(false);
    }
    let phase = (b / a) / (b / a).norm();
    Ok(u.scale(phase).max_abs_diff(v) <= PHASE_EQ_TOL)
}
