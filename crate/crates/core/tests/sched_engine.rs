use dqc_core::bench::{gen_qaoa_maxcut, gen_qft, gen_tlim};
use dqc_core::engine::{ideal_depth, replay, run, sweep, Design, LogRecord, SimConfig};
use dqc_core::experiment::partition_circuit;
use dqc_core::linalg::{circuit_unitary, equivalent_up_to_phase};
use dqc_core::partition::{annotate_remote, DistributedCircuit};
use dqc_core::schedule::{compile_variant, reorder, segment_circuit, segment_size, Policy, VariantTable};
use dqc_core::verify::random_segment;
use dqc_core::Circuit;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn position(order: &[usize], g: usize) -> usize {
    order.iter().position(|&x| x == g).unwrap()
}

fn distributed(c: Circuit, caps: [usize; 2]) -> DistributedCircuit {
    let a = partition_circuit(&c, &caps, 1).unwrap();
    annotate_remote(&c, &a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variant_positions_idempotence_and_permutation(seed in any::<u64>(), m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dc = random_segment(10, &mut rng);
        let gates = dc.circuit.gates();
        for s in segment_circuit(&dc, m) {
            let original: Vec<usize> = s.indices().collect();
            for policy in Policy::ALL {
                let v = compile_variant(&dc, &s, policy);
                let mut sorted = v.clone();
                sorted.sort_unstable();
                prop_assert_eq!(&sorted, &original);
                prop_assert_eq!(reorder(gates, dc.remote_flags(), &v, policy), v.clone());
                for &g in &original {
                    if !dc.is_remote(g) {
                        continue;
                    }
                    let (before, after) = (position(&original, g), position(&v, g));
                    match policy {
                        Policy::Asap => prop_assert!(after <= before),
                        Policy::Alap => prop_assert!(after >= before),
                        Policy::Original => prop_assert_eq!(after, before),
                    }
                }
            }
        }
    }

    #[test]
    fn stitched_variants_preserve_the_circuit(seed in any::<u64>(), m in 1usize..4, pick in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dc = random_segment(6, &mut rng);
        let table = VariantTable::build(&dc, m);
        // contiguous segments tile the circuit in order
        let tiled: Vec<usize> = table.segments.iter().flat_map(|s| s.segment.indices()).collect();
        prop_assert_eq!(tiled, (0..dc.circuit.len()).collect::<Vec<_>>());
        let order: Vec<usize> = table
            .segments
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.get(Policy::ALL[((pick >> (2 * (i % 32))) % 3) as usize]).to_vec())
            .collect();
        let u = circuit_unitary(&dc.circuit).unwrap();
        let v = circuit_unitary(&dc.circuit.permuted(&order)).unwrap();
        prop_assert!(equivalent_up_to_phase(&u, &v).unwrap());
    }
}

fn small_benches() -> Vec<DistributedCircuit> {
    vec![
        distributed(gen_tlim(12, 4).unwrap(), [6, 6]),
        distributed(gen_qaoa_maxcut(12, 4, 1, 3).unwrap(), [6, 6]),
        distributed(gen_qft(10).unwrap(), [5, 5]),
    ]
}

fn config(design: Design, pairs: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(design);
    cfg.ent.p_succ_override = Some(0.4);
    cfg.ent.n_comm_pairs = pairs;
    cfg.ent.n_buffer_pairs = pairs;
    cfg.seed = seed;
    cfg
}

#[test]
fn depth_never_beats_ideal_and_links_balance() {
    for dc in small_benches() {
        let ideal = ideal_depth(&dc.circuit, &SimConfig::new(Design::Ideal).engine.latencies);
        for design in Design::ALL {
            for seed in 0..8 {
                let r = run(&dc, &config(design, 4, seed)).unwrap();
                assert!(r.depth >= ideal - 1e-9, "{design} seed {seed}: {} < {ideal}", r.depth);
                assert!(r.fidelity > 0.0 && r.fidelity <= 1.0);
                assert!(r.stats.is_conserved());
                if design != Design::Ideal {
                    assert_eq!(r.stats.remote_gates, dc.remote_count() as u64);
                    assert_eq!(r.stats.links.consumed, dc.remote_count() as u64);
                }
            }
        }
    }
}

#[test]
fn more_pairs_never_raise_mean_depth() {
    let dc = distributed(gen_qaoa_maxcut(16, 6, 1, 2).unwrap(), [8, 8]);
    let seeds: Vec<u64> = (0..40).collect();
    for design in [Design::SyncBuf, Design::AsyncBuf, Design::AdaptBuf, Design::InitBuf] {
        let means: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&p| sweep(&dc, &config(design, p, 0), &seeds).unwrap().depth_mean)
            .collect();
        for w in means.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{design}: {means:?}");
        }
    }
}

/// Longest path of `order` with remote gates costing one teleportation.
fn teleport_path(dc: &DistributedCircuit, order: &[usize], lat: &dqc_core::engine::Latencies) -> f64 {
    let c = dc.circuit.permuted(order);
    let dag = dqc_core::dag::build_dag(&c);
    dag.weighted_longest_path(|i| {
        if dc.is_remote(order[i]) {
            lat.remote()
        } else {
            lat.local(c.gates()[i].kind())
        }
    })
}

#[test]
fn certain_generation_bounds_depth() {
    // p = 1 with ample pairs: past the first attempt cycle every remote gate
    // costs one teleportation on the order actually executed
    for dc in small_benches() {
        for design in [Design::SyncBuf, Design::AsyncBuf, Design::AdaptBuf] {
            let mut cfg = config(design, 32, 0);
            cfg.ent.p_succ_override = Some(1.0);
            cfg.record_log = true;
            let lat = cfg.engine.latencies.clone();
            let r = run(&dc, &cfg).unwrap();
            let order: Vec<usize> = if design == Design::AdaptBuf {
                let table = VariantTable::build(&dc, segment_size(32, 1.0));
                let mut chosen = vec![Policy::Original; table.len()];
                for rec in &r.log {
                    if let LogRecord::Segment { index, policy, .. } = rec {
                        chosen[*index] = *policy;
                    }
                }
                table.segments.iter().zip(&chosen).flat_map(|(s, &p)| s.get(p).to_vec()).collect()
            } else {
                (0..dc.circuit.len()).collect()
            };
            let bound = teleport_path(&dc, &order, &lat) + cfg.ent.t_eg;
            assert!(r.depth <= bound + 1e-9, "{design}: {} > {bound}", r.depth);
        }
    }
}

#[test]
fn sync_and_async_share_the_attempt_rate() {
    let dc = distributed(gen_qft(12).unwrap(), [6, 6]);
    let gen_rate = |design| {
        let r = run(&dc, &config(design, 6, 3)).unwrap();
        r.stats.links.generated as f64 / r.depth
    };
    let (s, a) = (gen_rate(Design::SyncBuf), gen_rate(Design::AsyncBuf));
    assert!((s - a).abs() / s < 0.25, "{s} vs {a}");
}

#[test]
fn logs_replay_to_the_same_metrics() {
    for dc in small_benches() {
        for design in Design::ALL {
            let mut cfg = config(design, 4, 5);
            cfg.record_log = true;
            let r = run(&dc, &cfg).unwrap();
            let (depth, fidelity) = replay(&r.log, dc.circuit.n_qubits(), cfg.noise.kappa, cfg.noise.idle_mode);
            assert_eq!(depth, r.depth);
            assert!((fidelity - r.fidelity).abs() <= 1e-12 * r.fidelity.max(1e-300));
        }
    }
}
