//! Fidelity models: Werner-state decay, teleported-CNOT fidelity, idle
//! decoherence and circuit-level accumulation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};
use crate::linalg::{apply_1q, circuit_unitary, gate_matrix, CMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("fidelity {0} outside [0.25, 1]")]
    Fidelity(f64),
    #[error("{name} = {value} must lie in (0, 1]")]
    Param { name: &'static str, value: f64 },
    #[error("decoherence rate {0} is negative")]
    Kappa(f64),
}

/// How the idle decoherence factor is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IdleMode {
    /// `prod_q exp(-kappa * idle_q)` over data qubits.
    #[default]
    PerQubit,
    /// One factor `exp(-kappa * mean_q idle_q)` for the whole circuit.
    PerCircuit,
}

/// Operation fidelities and decoherence rate. Times are in local-CNOT
/// cycles, so `kappa` is per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub kappa: f64,
    pub f_1q: f64,
    pub f_cnot: f64,
    pub f_meas: f64,
    pub f_epr: f64,
    pub idle_mode: IdleMode,
}

impl Default for NoiseParams {
    /// 1/kappa = 150 us with a 300 ns local CNOT, and the per-operation
    /// fidelities 99.99 / 99.9 / 99.8 / 99 %.
    fn default() -> Self {
        NoiseParams {
            kappa: 300e-9 / 150e-6,
            f_1q: 0.9999,
            f_cnot: 0.999,
            f_meas: 0.998,
            f_epr: 0.99,
            idle_mode: IdleMode::PerQubit,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, value) in [
            ("f_1q", self.f_1q),
            ("f_cnot", self.f_cnot),
            ("f_meas", self.f_meas),
            ("f_epr", self.f_epr),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(NoiseError::Param { name, value });
            }
        }
        if self.f_epr < 0.25 {
            return Err(NoiseError::Fidelity(self.f_epr));
        }
        if !(self.kappa >= 0.0) {
            return Err(NoiseError::Kappa(self.kappa));
        }
        Ok(())
    }

    /// Ideal local operations, same decoherence.
    pub fn perfect_locals(&self) -> Self {
        NoiseParams {
            f_1q: 1.0,
            f_cnot: 1.0,
            f_meas: 1.0,
            ..self.clone()
        }
    }
}

/// Bell-pair fidelity after idling `t` under symmetric depolarizing noise
/// on both halves: `F0 e^{-2 kappa t} + (1 - e^{-2 kappa t}) / 4`.
pub fn werner_fidelity(f0: f64, kappa: f64, t: f64) -> f64 {
    let d = (-2.0 * kappa * t).exp();
    f0 * d + (1.0 - d) / 4.0
}

/// `exp(-kappa t)`.
pub fn idle_factor(kappa: f64, t: f64) -> f64 {
    (-kappa * t).exp()
}

/// Werner state `lambda |Phi+><Phi+| + (1 - lambda) I/4`,
/// `lambda = (4F - 1) / 3`, in the computational basis `|a b>`.
pub fn bell_density_matrix(f: f64) -> Result<CMatrix, NoiseError> {
    if !(0.25..=1.0).contains(&f) {
        return Err(NoiseError::Fidelity(f));
    }
    let lambda = (4.0 * f - 1.0) / 3.0;
    let mut rho = CMatrix::from_real_diagonal(&[(1.0 - lambda) / 4.0; 4]);
    for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
        rho[(i, j)] += Complex64::new(lambda / 2.0, 0.0);
    }
    Ok(rho)
}

// Qubit layout of the teleportation register (little-endian bits).
const CTRL: usize = 0;
const ANC_A: usize = 1;
const ANC_B: usize = 2;
const TARGET: usize = 3;
const REG: usize = 4;
const DIM: usize = 1 << REG;

fn bit(i: usize, q: usize) -> usize {
    (i >> q) & 1
}

fn embed(gate: Gate) -> CMatrix {
    let c = Circuit::from_gates(REG, vec![gate]).expect("register gate");
    circuit_unitary(&c).expect("small unitary")
}

fn embed_1q(m: &CMatrix, q: usize) -> CMatrix {
    let mut out = CMatrix::zeros(DIM);
    for col in 0..DIM {
        let mut v = vec![Complex64::new(0.0, 0.0); DIM];
        v[col] = Complex64::new(1.0, 0.0);
        apply_1q(&mut v, q, m);
        for (row, a) in v.into_iter().enumerate() {
            out[(row, col)] = a;
        }
    }
    out
}

fn conj(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    &(u * rho) * &u.adjoint()
}

fn paulis_1q() -> [CMatrix; 4] {
    let i = Complex64::new(0.0, 1.0);
    let y = CMatrix::from_rows(&[
        &[Complex64::new(0.0, 0.0), -i],
        &[i, Complex64::new(0.0, 0.0)],
    ]);
    [
        CMatrix::identity(2),
        gate_matrix(GateKind::X).expect("x"),
        y,
        CMatrix::from_real_diagonal(&[1.0, -1.0]),
    ]
}

/// Pre-built operators for the CNOT-teleportation circuit.
struct TeleportOps {
    cnot_ca: CMatrix,
    cnot_bt: CMatrix,
    h_b: CMatrix,
    x_b: CMatrix,
    z_c: CMatrix,
    paulis_ca: Vec<CMatrix>,
    paulis_bt: Vec<CMatrix>,
    proj_a: [CMatrix; 2],
    proj_b: [CMatrix; 2],
}

impl TeleportOps {
    fn new() -> Self {
        let p = paulis_1q();
        let pair = |x: usize, y: usize| -> Vec<CMatrix> {
            let mut v = Vec::with_capacity(16);
            for px in &p {
                for py in &p {
                    v.push(&embed_1q(px, x) * &embed_1q(py, y));
                }
            }
            v
        };
        let proj = |q: usize| -> [CMatrix; 2] {
            [0, 1].map(|m| {
                let diag: Vec<f64> = (0..DIM).map(|i| f64::from(u8::from(bit(i, q) == m))).collect();
                CMatrix::from_real_diagonal(&diag)
            })
        };
        TeleportOps {
            cnot_ca: embed(Gate::cnot(CTRL, ANC_A)),
            cnot_bt: embed(Gate::cnot(ANC_B, TARGET)),
            h_b: embed(Gate::h(ANC_B)),
            x_b: embed(Gate::x(ANC_B)),
            z_c: embed_1q(&p[3], CTRL),
            paulis_ca: pair(CTRL, ANC_A),
            paulis_bt: pair(ANC_B, TARGET),
            proj_a: proj(ANC_A),
            proj_b: proj(ANC_B),
        }
    }

    /// Two-qubit depolarizing channel with average gate fidelity `f`.
    fn depolarize(rho: &CMatrix, paulis: &[CMatrix], f: f64) -> CMatrix {
        let p = (1.0 - f) * 4.0 / 3.0;
        if p == 0.0 {
            return rho.clone();
        }
        let mut twirl = CMatrix::zeros(DIM);
        for pm in paulis {
            twirl = twirl.add(&conj(pm, rho));
        }
        rho.scale(Complex64::new(1.0 - p, 0.0))
            .add(&twirl.scale(Complex64::new(p / 16.0, 0.0)))
    }

    /// Z measurement whose reported bit is flipped with probability
    /// `1 - f_meas`; `correction` is applied when the reported bit is 1.
    fn measure_and_correct(rho: &CMatrix, proj: &[CMatrix; 2], correction: &CMatrix, f_meas: f64) -> CMatrix {
        let mut out = CMatrix::zeros(DIM);
        for (m, pr) in proj.iter().enumerate() {
            let branch = conj(pr, rho);
            let corrected = conj(correction, &branch);
            let (keep, fix) = if m == 0 { (f_meas, 1.0 - f_meas) } else { (1.0 - f_meas, f_meas) };
            out = out
                .add(&branch.scale(Complex64::new(keep, 0.0)))
                .add(&corrected.scale(Complex64::new(fix, 0.0)));
        }
        out
    }

    fn run(&self, rho: &CMatrix, params: &NoiseParams) -> CMatrix {
        let mut r = conj(&self.cnot_ca, rho);
        r = Self::depolarize(&r, &self.paulis_ca, params.f_cnot);
        r = Self::measure_and_correct(&r, &self.proj_a, &self.x_b, params.f_meas);
        r = conj(&self.cnot_bt, &r);
        r = Self::depolarize(&r, &self.paulis_bt, params.f_cnot);
        r = conj(&self.h_b, &r);
        Self::measure_and_correct(&r, &self.proj_b, &self.z_c, params.f_meas)
    }
}

/// Traces out the two resource qubits, leaving `(ctrl, target)` with the
/// control as the high local bit.
fn trace_resource(rho: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(4);
    let local = |i: usize| (bit(i, CTRL) << 1) | bit(i, TARGET);
    let resource = |i: usize| (bit(i, ANC_A), bit(i, ANC_B));
    for i in 0..DIM {
        for j in 0..DIM {
            if resource(i) == resource(j) {
                out[(local(i), local(j))] += rho[(i, j)];
            }
        }
    }
    out
}

/// Average gate fidelity of a CNOT teleported through a Werner pair of
/// fidelity `f_bell`, with depolarizing local CNOTs and readout flips on
/// both measurements. Corrections are ideal.
pub fn teleported_gate_fidelity(f_bell: f64, params: &NoiseParams) -> Result<f64, NoiseError> {
    teleported_with(&TeleportOps::new(), f_bell, params)
}

fn teleported_with(ops: &TeleportOps, f_bell: f64, params: &NoiseParams) -> Result<f64, NoiseError> {
    let bell = bell_density_matrix(f_bell)?;
    let target = gate_matrix(GateKind::Cnot).expect("cnot");
    let target_adj = target.adjoint();
    let mut f_ent = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            // |i><j| on (ctrl, target) tensored with the resource state
            let mut rho = CMatrix::zeros(DIM);
            for r in 0..DIM {
                for s in 0..DIM {
                    let sys = ((bit(r, CTRL) << 1) | bit(r, TARGET), (bit(s, CTRL) << 1) | bit(s, TARGET));
                    if sys != (i, j) {
                        continue;
                    }
                    let res = ((bit(r, ANC_A) << 1) | bit(r, ANC_B), (bit(s, ANC_A) << 1) | bit(s, ANC_B));
                    rho[(r, s)] = bell[res];
                }
            }
            let out = trace_resource(&ops.run(&rho, params));
            let aligned = &(&target_adj * &out) * &target;
            f_ent += aligned[(i, j)];
        }
    }
    let f_ent = f_ent.re / 16.0;
    Ok((4.0 * f_ent + 1.0) / 5.0)
}

/// Number of grid points of [`RemoteGateTable`].
pub const REMOTE_TABLE_POINTS: usize = 64;

/// Teleported-gate fidelity as a function of link age.
///
/// The table is sampled on a uniform 64-point grid of the aged Werner
/// fidelity between 1/4 and the initial fidelity, and interpolated
/// linearly. Lookup maps age to Werner fidelity in closed form first.
#[derive(Debug, Clone)]
pub struct RemoteGateTable {
    f0: f64,
    kappa: f64,
    grid: Vec<f64>,
}

impl RemoteGateTable {
    pub fn new(f0: f64, params: &NoiseParams) -> Result<Self, NoiseError> {
        if !(0.25..=1.0).contains(&f0) {
            return Err(NoiseError::Fidelity(f0));
        }
        let ops = TeleportOps::new();
        let grid = (0..REMOTE_TABLE_POINTS)
            .map(|k| teleported_with(&ops, Self::node(f0, k), params))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RemoteGateTable {
            f0,
            kappa: params.kappa,
            grid,
        })
    }

    fn node(f0: f64, k: usize) -> f64 {
        0.25 + (f0 - 0.25) * k as f64 / (REMOTE_TABLE_POINTS - 1) as f64
    }

    /// Interpolated gate fidelity for a link of Werner fidelity `f`.
    pub fn by_bell_fidelity(&self, f: f64) -> f64 {
        if self.f0 == 0.25 {
            return self.grid[0];
        }
        let x = ((f - 0.25) / (self.f0 - 0.25)).clamp(0.0, 1.0) * (REMOTE_TABLE_POINTS - 1) as f64;
        let k = (x.floor() as usize).min(REMOTE_TABLE_POINTS - 2);
        let w = x - k as f64;
        self.grid[k] * (1.0 - w) + self.grid[k + 1] * w
    }

    /// Gate fidelity when consuming a link of the given age.
    pub fn by_age(&self, age: f64) -> f64 {
        self.by_bell_fidelity(werner_fidelity(self.f0, self.kappa, age.max(0.0)))
    }
}

/// `prod gate_fidelities * idle factor`, with the idle factor applied per
/// data qubit or once per circuit according to `mode`.
pub fn accumulate_fidelity(
    gate_fidelities: impl IntoIterator<Item = f64>,
    idle_times: &[f64],
    kappa: f64,
    mode: IdleMode,
) -> f64 {
    let gates: f64 = gate_fidelities.into_iter().product();
    let idle = match mode {
        IdleMode::PerQubit => idle_times.iter().map(|&t| idle_factor(kappa, t)).product(),
        IdleMode::PerCircuit => {
            if idle_times.is_empty() {
                1.0
            } else {
                idle_factor(kappa, idle_times.iter().sum::<f64>() / idle_times.len() as f64)
            }
        }
    };
    gates * idle
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn werner_limits() {
        assert_eq!(werner_fidelity(0.9, 0.002, 0.0), 0.9);
        assert!((werner_fidelity(0.9, 0.002, 1e6) - 0.25).abs() < 1e-12);
        // 3 us at 1/kappa = 150 us
        let f = werner_fidelity(0.99, 1.0 / 150.0, 3.0);
        assert!((f - 0.960_984_2).abs() < 5e-8, "{f}");
    }

    #[test]
    fn idle_factor_values() {
        assert_eq!(idle_factor(0.002, 0.0), 1.0);
        assert_eq!(idle_factor(0.0, 123.0), 1.0);
        assert!((idle_factor(0.002, 10.0) - 0.980_198_7).abs() < 5e-8);
    }

    #[test]
    fn bell_matrix_shapes() {
        let pure = bell_density_matrix(1.0).unwrap();
        assert!((pure[(0, 3)].re - 0.5).abs() < 1e-15 && pure[(1, 1)].re == 0.0);
        let mixed = bell_density_matrix(0.25).unwrap();
        assert!(mixed.max_abs_diff(&CMatrix::from_real_diagonal(&[0.25; 4])) < 1e-15);
        let r = bell_density_matrix(0.99).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| r[(i, i)].re).collect();
        for (got, want) in diag.iter().zip([0.496_667, 0.003_333, 0.003_333, 0.496_667]) {
            assert!((got - want).abs() < 5e-7, "{diag:?}");
        }
        // Bell-basis weights: <Phi+|rho|Phi+> = F, the other three (1-F)/3
        let h = 0.5f64.sqrt();
        let bell = [[h, 0.0, 0.0, h], [h, 0.0, 0.0, -h], [0.0, h, h, 0.0], [0.0, h, -h, 0.0]];
        for (k, v) in bell.iter().enumerate() {
            let mut w = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    w += v[i] * r[(i, j)].re * v[j];
                }
            }
            let want = if k == 0 { 0.99 } else { 0.01 / 3.0 };
            assert!((w - want).abs() < 1e-12, "weight {k}: {w}");
        }
        assert!(bell_density_matrix(0.2).is_err());
    }

    #[test]
    fn default_kappa_per_cycle() {
        assert!((NoiseParams::default().kappa - 0.002).abs() < 1e-15);
    }

    #[test]
    fn accumulate_products() {
        let m = IdleMode::PerQubit;
        assert!((accumulate_fidelity([0.999], &[0.0], 0.002, m) - 0.999).abs() < 1e-15);
        let f = accumulate_fidelity([0.999, 0.999, 0.9999], &[0.0, 0.0], 0.002, m);
        assert!((f - 0.999f64.powi(2) * 0.9999).abs() < 1e-15);
        assert!((f - 0.997_902).abs() < 1e-6);
        assert_eq!(accumulate_fidelity([], &[], 0.002, m), 1.0);
        let per_circuit = accumulate_fidelity([], &[10.0, 30.0], 0.002, IdleMode::PerCircuit);
        assert!((per_circuit - idle_factor(0.002, 20.0)).abs() < 1e-15);
    }

    #[test]
    fn noiseless_teleportation_is_exact() {
        let p = NoiseParams::default().perfect_locals();
        assert!((teleported_gate_fidelity(1.0, &p).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let p = NoiseParams::default();
        let table = RemoteGateTable::new(p.f_epr, &p).unwrap();
        for age in [0.0, 3.3, 17.0, 120.5, 999.0, 1e5] {
            let direct = teleported_gate_fidelity(werner_fidelity(p.f_epr, p.kappa, age), &p).unwrap();
            assert!((table.by_age(age) - direct).abs() < 1e-6, "age {age}");
        }
    }

    #[test]
    fn fully_mixed_resource_with_ideal_locals() {
        // F_ent equals the resource's Bell fidelity when locals are ideal
        let p = NoiseParams::default().perfect_locals();
        for f in [0.25, 0.6, 0.9] {
            let got = teleported_gate_fidelity(f, &p).unwrap();
            assert!((got - (4.0 * f + 1.0) / 5.0).abs() < 1e-12, "{f}: {got}");
        }
    }

    #[test]
    fn readout_noise_closed_form() {
        // Readout flips act as X (first) and Z (second) errors on the
        // resource; the channel is the identity only when the combined
        // Pauli frame is trivial.
        let f_bell: f64 = 0.93;
        let fm: f64 = 0.97;
        let p = NoiseParams {
            f_meas: fm,
            ..NoiseParams::default().perfect_locals()
        };
        let lambda = (4.0 * f_bell - 1.0) / 3.0;
        let w_i = lambda + (1.0 - lambda) / 4.0;
        let w_p = (1.0 - lambda) / 4.0;
        let e = 1.0 - fm;
        let f_ent = w_i * fm * fm + 2.0 * w_p * e * fm + w_p * e * e;
        let got = teleported_gate_fidelity(f_bell, &p).unwrap();
        assert!((got - (4.0 * f_ent + 1.0) / 5.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn monotone_on_small_grid() {
        let grid = [0.3, 0.5, 0.7, 0.9, 1.0];
        let base = NoiseParams::default();
        let at = |fb: f64, fc: f64, fm: f64| {
            let p = NoiseParams { f_cnot: fc, f_meas: fm, ..base.clone() };
            teleported_gate_fidelity(fb, &p).unwrap()
        };
        for w in grid.windows(2) {
            assert!(at(w[0], 0.99, 0.99) <= at(w[1], 0.99, 0.99) + 1e-12);
            assert!(at(0.95, w[0], 0.99) <= at(0.95, w[1], 0.99) + 1e-12);
            assert!(at(0.95, 0.99, w[0]) <= at(0.95, 0.99, w[1]) + 1e-12);
        }
    }
}
