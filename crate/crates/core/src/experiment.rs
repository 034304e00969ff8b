//! Experiment configuration files, sweeps over designs x benchmarks x
//! seeds, and CSV/summary reports.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{gen_qaoa_maxcut, gen_qft, gen_tlim, read_circuit, BenchError};
use crate::circuit::Circuit;
use crate::engine::{
    ideal_depth, mean_std, remote_table, run_with_table, Design, EngineError, EngineParams, Latencies,
    SegmentTrigger, SimConfig, SimResult,
};
use crate::entnet::{EntParams, Storage};
use crate::noise::NoiseParams;
use crate::partition::{
    annotate_remote, bipartition, interaction_graph, load_assignment, Assignment, DistributedCircuit,
    PartitionError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config {path}: {source}")]
    Config {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("config: {0}")]
    Invalid(String),
    #[error("benchmark {name}: {source}")]
    Bench {
        name: String,
        #[source]
        source: BenchError,
    },
    #[error("benchmark {name}: {source}")]
    Partition {
        name: String,
        #[source]
        source: PartitionError,
    },
    #[error("{design} on {bench}, seed {seed}: {source}")]
    Run {
        design: Design,
        bench: String,
        seed: u64,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How a benchmark circuit is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BenchSpec {
    Tlim { n: usize, steps: usize },
    Qaoa { n: usize, degree: usize, layers: usize, seed: u64 },
    Qft { n: usize },
    File { path: PathBuf },
}

impl BenchSpec {
    pub fn build(&self) -> Result<Circuit, BenchError> {
        match self {
            BenchSpec::Tlim { n, steps } => gen_tlim(*n, *steps),
            BenchSpec::Qaoa { n, degree, layers, seed } => gen_qaoa_maxcut(*n, *degree, *layers, *seed),
            BenchSpec::Qft { n } => gen_qft(*n),
            BenchSpec::File { path } => read_circuit(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub name: String,
    #[serde(flatten)]
    pub spec: BenchSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    pub benchmarks: Vec<Benchmark>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSection {
    pub capacities: Vec<usize>,
    pub seed: u64,
    /// Assignment file applied to every benchmark instead of partitioning.
    pub file: Option<PathBuf>,
}

impl Default for PartitionSection {
    fn default() -> Self {
        PartitionSection {
            capacities: vec![16, 16],
            seed: 0,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub designs: Vec<Design>,
    pub runs: usize,
    pub first_seed: u64,
    pub latencies: Latencies,
    pub original_storage: Storage,
    pub segment_trigger: SegmentTrigger,
    pub segment_size: Option<usize>,
    pub max_time: f64,
}

impl Default for EngineSection {
    fn default() -> Self {
        let p = EngineParams::default();
        EngineSection {
            designs: Design::ALL.to_vec(),
            runs: 50,
            first_seed: 0,
            latencies: p.latencies,
            original_storage: p.original_storage,
            segment_trigger: p.segment_trigger,
            segment_size: p.segment_size,
            max_time: p.max_time,
        }
    }
}

impl EngineSection {
    pub fn params(&self) -> EngineParams {
        EngineParams {
            latencies: self.latencies.clone(),
            original_storage: self.original_storage,
            segment_trigger: self.segment_trigger,
            segment_size: self.segment_size,
            max_time: self.max_time,
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|k| self.first_seed + k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub partition: PartitionSection,
    #[serde(default)]
    pub entnet: EntParams,
    #[serde(default)]
    pub noise: NoiseParams,
    #[serde(default)]
    pub engine: EngineSection,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Loads a config; relative benchmark and assignment paths resolve
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text).map_err(|source| ExperimentError::Config {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for b in &mut cfg.benchmark.benchmarks {
            if let BenchSpec::File { path } = &mut b.spec {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        if let Some(f) = &mut cfg.partition.file {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.benchmark.benchmarks.is_empty() {
            return Err(ExperimentError::Invalid("no benchmarks".into()));
        }
        if self.engine.designs.is_empty() {
            return Err(ExperimentError::Invalid("no designs".into()));
        }
        if self.engine.runs == 0 {
            return Err(ExperimentError::Invalid("runs must be at least 1".into()));
        }
        self.entnet.validate().map_err(EngineError::from)?;
        self.noise.validate().map_err(EngineError::from)?;
        self.engine.latencies.validate()?;
        Ok(())
    }

    pub fn sim_config(&self, design: Design, seed: u64) -> SimConfig {
        SimConfig {
            design,
            ent: self.entnet.clone(),
            noise: self.noise.clone(),
            engine: self.engine.params(),
            seed,
            record_log: false,
        }
    }
}

/// A benchmark ready to simulate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub dc: DistributedCircuit,
    pub ideal_depth: f64,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Vec<Prepared>, ExperimentError> {
    cfg.benchmark
        .benchmarks
        .iter()
        .map(|b| {
            let name = b.name.clone();
            let circuit = b.spec.build().map_err(|source| ExperimentError::Bench {
                name: name.clone(),
                source,
            })?;
            let perr = |source| ExperimentError::Partition {
                name: name.clone(),
                source,
            };
            let assignment = match &cfg.partition.file {
                Some(f) => load_assignment(f, &cfg.partition.capacities).map_err(perr)?,
                None => partition_circuit(&circuit, &cfg.partition.capacities, cfg.partition.seed).map_err(perr)?,
            };
            let dc = annotate_remote(&circuit, &assignment).map_err(perr)?;
            let ideal_depth = ideal_depth(&dc.circuit, &cfg.engine.latencies);
            Ok(Prepared { name, dc, ideal_depth })
        })
        .collect()
}

/// Two-node min-cut assignment; a single node needs no partitioning.
pub fn partition_circuit(circuit: &Circuit, capacities: &[usize], seed: u64) -> Result<Assignment, PartitionError> {
    match capacities {
        [c] => Assignment::new(vec![0; circuit.n_qubits()], vec![*c]),
        [c1, c2] => bipartition(&interaction_graph(circuit), [*c1, *c2], seed),
        _ => Err(PartitionError::Malformed {
            line: 0,
            message: format!("{} nodes requested, only 1 or 2 supported", capacities.len()),
        }),
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub design: Design,
    pub benchmark: String,
    pub seed: u64,
    pub depth: f64,
    pub fidelity: f64,
    pub links_generated: u64,
    pub links_consumed: u64,
    pub links_discarded: u64,
    pub links_blocked: u64,
}

impl Row {
    fn new(bench: &str, r: &SimResult) -> Self {
        Row {
            design: r.design,
            benchmark: bench.to_string(),
            seed: r.seed,
            depth: r.depth,
            fidelity: r.fidelity,
            links_generated: r.stats.links.generated,
            links_consumed: r.stats.links.consumed,
            links_discarded: r.stats.links.discarded,
            links_blocked: r.stats.links.blocked,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub benches: Vec<Prepared>,
    /// Full results, ordered by design, then benchmark, then seed.
    pub results: Vec<(String, SimResult)>,
}

impl Experiment {
    pub fn rows(&self) -> Vec<Row> {
        self.results.iter().map(|(b, r)| Row::new(b, r)).collect()
    }

    pub fn select<'a>(&'a self, design: Design, bench: &'a str) -> impl Iterator<Item = &'a SimResult> + 'a {
        self.results
            .iter()
            .filter(move |(b, r)| r.design == design && b == bench)
            .map(|(_, r)| r)
    }

    pub fn mean_depth(&self, design: Design, bench: &str) -> f64 {
        mean(self.select(design, bench).map(|r| r.depth))
    }

    pub fn mean_fidelity(&self, design: Design, bench: &str) -> f64 {
        mean(self.select(design, bench).map(|r| r.fidelity))
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut designs: Vec<Design> = Vec::new();
        for (_, r) in &self.results {
            if !designs.contains(&r.design) {
                designs.push(r.design);
            }
        }
        let mut out = Vec::new();
        for b in &self.benches {
            for &d in &designs {
                let depths: Vec<f64> = self.select(d, &b.name).map(|r| r.depth).collect();
                let fids: Vec<f64> = self.select(d, &b.name).map(|r| r.fidelity).collect();
                if depths.is_empty() {
                    continue;
                }
                let (depth_mean, depth_std) = mean_std(&depths);
                let (fidelity_mean, fidelity_std) = mean_std(&fids);
                out.push(SummaryRow {
                    benchmark: b.name.clone(),
                    design: d,
                    runs: depths.len(),
                    depth_mean,
                    depth_std,
                    depth_norm: depth_mean / b.ideal_depth,
                    fidelity_mean,
                    fidelity_std,
                });
            }
        }
        out
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Runs every (design, benchmark, seed) combination in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, ExperimentError> {
    cfg.validate()?;
    let benches = prepare(cfg)?;
    let table = remote_table(&cfg.noise)?;
    let seeds = cfg.engine.seeds();
    let mut jobs: Vec<(Design, usize, u64)> = Vec::new();
    for &d in &cfg.engine.designs {
        for b in 0..benches.len() {
            jobs.extend(seeds.iter().map(|&s| (d, b, s)));
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(design, b, seed)| {
            let bench = &benches[b];
            run_with_table(&bench.dc, &cfg.sim_config(design, seed), &table)
                .map(|r| (bench.name.clone(), r))
                .map_err(|source| ExperimentError::Run {
                    design,
                    bench: bench.name.clone(),
                    seed,
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Experiment { benches, results })
}

/// Writes rows as CSV, optionally preceded by a `#` comment line.
pub fn write_csv<W: Write>(rows: &[Row], mut out: W, header_comment: Option<&str>) -> Result<(), ExperimentError> {
    if let Some(c) = header_comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(text: &str) -> Result<Vec<Row>, ExperimentError> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    Ok(rdr.deserialize().collect::<Result<Vec<Row>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub benchmark: String,
    pub design: Design,
    pub runs: usize,
    pub depth_mean: f64,
    pub depth_std: f64,
    /// Mean depth over the monolithic ideal depth.
    pub depth_norm: f64,
    pub fidelity_mean: f64,
    pub fidelity_std: f64,
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "{:<14} {:<10} {:>5} {:>10} {:>8} {:>8} {:>10}\n",
        "benchmark", "design", "runs", "depth", "std", "norm", "fidelity"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<14} {:<10} {:>5} {:>10.2} {:>8.2} {:>8.3} {:>10.4e}\n",
            r.benchmark,
            r.design.name(),
            r.runs,
            r.depth_mean,
            r.depth_std,
            r.depth_norm,
            r.fidelity_mean
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "benchmark": {"benchmarks": [
            {"name": "qft6", "family": "qft", "n": 6},
            {"name": "qaoa8", "family": "qaoa", "n": 8, "degree": 3, "layers": 1, "seed": 2}
        ]},
        "partition": {"capacities": [4, 4], "seed": 1},
        "entnet": {"p_succ_override": 0.4, "n_comm_pairs": 2, "n_buffer_pairs": 2},
        "engine": {"designs": ["sync_buf", "ideal"], "runs": 3}
    }"#;

    #[test]
    fn parses_and_runs_small_config() {
        let cfg = ExperimentConfig::from_json(SMALL).unwrap();
        let exp = run_experiment(&cfg).unwrap();
        let rows = exp.rows();
        assert_eq!(rows.len(), 2 * 2 * 3);
        assert_eq!(rows[0].design, Design::SyncBuf);
        assert_eq!((rows[0].benchmark.as_str(), rows[0].seed), ("qft6", 0));
        assert!(rows.iter().all(|r| r.depth.is_finite() && r.fidelity.is_finite()));
        let s = exp.summary();
        assert_eq!(s.len(), 4);
        let ideal = s.iter().find(|r| r.design == Design::Ideal).unwrap();
        assert!((ideal.depth_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ExperimentConfig::from_json(SMALL).unwrap();
        let rows = run_experiment(&cfg).unwrap().rows();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf, Some("generated 0")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# generated 0\ndesign,benchmark,seed,depth,fidelity,links_generated"));
        assert_eq!(read_csv(&text).unwrap(), rows);
    }

    #[test]
    fn rejects_unknown_fields_and_empty_runs() {
        let bad = SMALL.replace("\"runs\": 3", "\"runs\": 3, \"colour\": 1");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let zero = ExperimentConfig::from_json(&SMALL.replace("\"runs\": 3", "\"runs\": 0")).unwrap();
        assert!(matches!(zero.validate(), Err(ExperimentError::Invalid(_))));
    }
}
