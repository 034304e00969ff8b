//! Benchmark circuit generators and circuit file I/O.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::qasm::{parse_circuit, to_qasm, ParseError};

/// Fixed QAOA cost angle.
pub const QAOA_GAMMA: f64 = 0.4;
/// Fixed QAOA mixer angle.
pub const QAOA_BETA: f64 = 0.8;
/// Restart cap for random regular graph sampling.
pub const REGULAR_GRAPH_RETRIES: usize = 1000;

// Trotter angles for the transverse/longitudinal field Ising chain
// (J = 1, h_x = 0.7, h_z = 0.3, dt = 0.1).
const TLIM_ZZ: f64 = 2.0 * 1.0 * 0.1;
const TLIM_Z: f64 = 2.0 * 0.3 * 0.1;
const TLIM_X: f64 = 2.0 * 0.7 * 0.1;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark size: {0}")]
    InvalidSize(String),
    #[error("no simple {degree}-regular graph on {n} vertices found after {retries} attempts")]
    GraphRetries {
        n: usize,
        degree: usize,
        retries: usize,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Trotterized 1D transverse/longitudinal-field Ising chain. Each step is an
/// even-pair RZZ layer, an odd-pair RZZ layer, then RZ and RX on every qubit.
pub fn gen_tlim(n: usize, steps: usize) -> Result<Circuit, BenchError> {
    if n < 2 || steps == 0 {
        return Err(BenchError::InvalidSize(format!(
            "TLIM needs n >= 2 and steps >= 1, got n={n}, steps={steps}"
        )));
    }
    let mut gates = Vec::with_capacity(steps * (3 * n));
    for _ in 0..steps {
        for parity in [0, 1] {
            for i in (parity..n - 1).step_by(2) {
                gates.push(Gate::rzz(TLIM_ZZ, i, i + 1));
            }
        }
        gates.extend((0..n).map(|q| Gate::rz(TLIM_Z, q)));
        gates.extend((0..n).map(|q| Gate::rx(TLIM_X, q)));
    }
    Ok(Circuit::from_gates(n, gates).expect("generated gates are in range"))
}

/// Samples a uniform-ish simple `degree`-regular graph by random stub
/// pairing. Pairings that would create a self-loop or multi-edge are
/// rejected; when no admissible pair remains the whole pairing restarts.
/// Edges are returned as `(u, v)` with `u < v`, sorted.
pub fn random_regular_graph(
    n: usize,
    degree: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>, BenchError> {
    if degree >= n || (n * degree) % 2 != 0 {
        return Err(BenchError::InvalidSize(format!(
            "no {degree}-regular graph on {n} vertices (need d < n and n*d even)"
        )));
    }
    if degree == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..REGULAR_GRAPH_RETRIES {
        if let Some(edges) = try_pairing(n, degree, &mut rng) {
            return Ok(edges);
        }
    }
    Err(BenchError::GraphRetries {
        n,
        degree,
        retries: REGULAR_GRAPH_RETRIES,
    })
}

fn try_pairing<R: Rng>(n: usize, degree: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
    let mut adj = vec![vec![false; n]; n];
    let mut edges = Vec::with_capacity(n * degree / 2);
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        let mut leftover = Vec::new();
        let mut progress = false;
        let mut it = stubs.chunks_exact(2);
        for pair in &mut it {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u != v && !adj[u][v] {
                adj[u][v] = true;
                adj[v][u] = true;
                edges.push((u, v));
                progress = true;
            } else {
                leftover.extend_from_slice(pair);
            }
        }
        leftover.extend_from_slice(it.remainder());
        if !progress {
            // check whether any admissible pair is left at all
            let admissible = leftover.iter().enumerate().any(|(i, &a)| {
                leftover[i + 1..]
                    .iter()
                    .any(|&b| a != b && !adj[a.min(b)][a.max(b)])
            });
            if !admissible {
                return None;
            }
        }
        stubs = leftover;
    }
    edges.sort_unstable();
    Some(edges)
}

/// QAOA MaxCut ansatz on a random `degree`-regular graph: H on every qubit,
/// then per layer RZZ(gamma) per edge and RX(beta) per qubit.
pub fn gen_qaoa_maxcut(
    n: usize,
    degree: usize,
    layers: usize,
    seed: u64,
) -> Result<Circuit, BenchError> {
    if layers == 0 {
        return Err(BenchError::InvalidSize("QAOA needs at least one layer".into()));
    }
    let edges = random_regular_graph(n, degree, seed)?;
    let mut gates: Vec<Gate> = (0..n).map(Gate::h).collect();
    for _ in 0..layers {
        gates.extend(edges.iter().map(|&(u, v)| Gate::rzz(QAOA_GAMMA, u, v)));
        gates.extend((0..n).map(|q| Gate::rx(QAOA_BETA, q)));
    }
    Ok(Circuit::from_gates(n, gates).expect("generated gates are in range"))
}

/// Quantum Fourier transform without the final qubit-reversal swaps.
pub fn gen_qft(n: usize) -> Result<Circuit, BenchError> {
    if n == 0 {
        return Err(BenchError::InvalidSize("QFT needs at least one qubit".into()));
    }
    let mut gates = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        gates.push(Gate::h(i));
        for j in i + 1..n {
            gates.push(Gate::cphase(PI / f64::powi(2.0, (j - i) as i32), j, i));
        }
    }
    Ok(Circuit::from_gates(n, gates).expect("generated gates are in range"))
}

/// Single-qubit gate count with the initial H layer of a one-layer QAOA
/// merged into the first mixer (reported alongside the raw count).
pub fn qaoa_merged_one_qubit_count(n: usize, layers: usize) -> usize {
    n * layers
}

pub fn write_circuit(circuit: &Circuit, path: impl AsRef<Path>) -> Result<(), BenchError> {
    std::fs::write(path, to_qasm(circuit))?;
    Ok(())
}

pub fn read_circuit(path: impl AsRef<Path>) -> Result<Circuit, BenchError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)?;
    parse_circuit(&src).map_err(|source| BenchError::Parse {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tlim_smallest() {
        let c = gen_tlim(2, 1).unwrap();
        assert_eq!(c.two_qubit_count(), 1);
        assert_eq!(c.one_qubit_count(), 4);
    }

    #[test]
    fn tlim_small_grid() {
        let c = gen_tlim(4, 3).unwrap();
        assert_eq!(c.two_qubit_count(), 9);
        assert_eq!(c.one_qubit_count(), 24);
        assert_eq!(c.layer_depth(), 12);
    }

    #[test]
    fn tlim_invalid() {
        assert!(gen_tlim(1, 3).is_err());
        assert!(gen_tlim(4, 0).is_err());
    }

    #[test]
    fn qft_sizes() {
        let c = gen_qft(1).unwrap();
        assert_eq!(c.gates(), &[Gate::h(0)]);
        let c = gen_qft(8).unwrap();
        assert_eq!(c.two_qubit_count(), 28);
        assert_eq!(c.one_qubit_count(), 8);
        assert_eq!(c.layer_depth(), 15);
    }

    #[test]
    fn qaoa_cycle_on_four_nodes() {
        let edges = random_regular_graph(4, 2, 0).unwrap();
        assert_eq!(edges.len(), 4);
        let mut deg = [0; 4];
        for (u, v) in &edges {
            deg[*u] += 1;
            deg[*v] += 1;
        }
        assert_eq!(deg, [2; 4]);
        let c = gen_qaoa_maxcut(4, 2, 1, 0).unwrap();
        assert_eq!(c.two_qubit_count(), 4);
        assert_eq!(c.one_qubit_count(), 8);
    }

    #[test]
    fn qaoa_infeasible() {
        assert!(matches!(
            gen_qaoa_maxcut(5, 3, 1, 0),
            Err(BenchError::InvalidSize(_))
        ));
        assert!(gen_qaoa_maxcut(4, 4, 1, 0).is_err());
        assert!(gen_qaoa_maxcut(4, 2, 0, 0).is_err());
    }

    #[test]
    fn qaoa_deterministic_per_seed() {
        assert_eq!(
            gen_qaoa_maxcut(16, 4, 2, 9).unwrap(),
            gen_qaoa_maxcut(16, 4, 2, 9).unwrap()
        );
        assert_ne!(
            random_regular_graph(16, 4, 1).unwrap(),
            random_regular_graph(16, 4, 2).unwrap()
        );
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("dqc-bench-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("qft8.qasm");
        let c = gen_qft(8).unwrap();
        write_circuit(&c, &p).unwrap();
        assert_eq!(read_circuit(&p).unwrap(), c);
        std::fs::write(&p, "OPENQASM 2.0;\nqreg q[3];\nccx q[0],q[1],q[2];\n").unwrap();
        let e = read_circuit(&p).unwrap_err();
        assert!(e.to_string().contains("ccx"));
        std::fs::remove_dir_all(&dir).ok();
    }
}
