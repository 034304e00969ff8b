use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use dqc_core::bench::{self, gen_qaoa_maxcut, gen_qft, gen_tlim, BenchError};
use dqc_core::engine::{self, write_log, Design, EngineError};
use dqc_core::entnet::attempt_success_prob;
use dqc_core::experiment::{
    format_summary, partition_circuit, prepare, run_experiment, write_csv, BenchSpec, Benchmark,
    BenchmarkSection, ExperimentConfig, ExperimentError,
};
use dqc_core::partition::{interaction_graph, PartitionError};
use dqc_core::schedule::{segment_size, VariantTable};
use dqc_core::verify::{verify, VerifyError};

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("DQC_THREADS={0:?} is not a positive integer")]
    Threads(String),
    #[error(transparent)]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Usage(String),
    #[error("{failed} of {total} segments not equivalent")]
    NotEquivalent { failed: usize, total: usize },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

#[derive(Parser)]
#[command(name = "dqc", version, about = "Distributed quantum circuit co-simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Tlim,
    Qaoa,
    Qft,
}

#[derive(clap::Args)]
struct Source {
    /// Experiment config (JSON); supplies entnet, noise, engine and
    /// partition settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark name from the config (defaults to the first one).
    #[arg(long, conflicts_with = "circuit")]
    bench: Option<String>,
    /// Circuit file to use instead of a config benchmark.
    #[arg(long)]
    circuit: Option<PathBuf>,
    /// Assignment file to use instead of partitioning.
    #[arg(long)]
    assignment: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark circuit.
    Gen {
        #[arg(long, value_enum)]
        bench: Family,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Partition a circuit onto nodes and write the assignment.
    Partition {
        #[arg(long)]
        circuit: PathBuf,
        /// Comma-separated node capacities.
        #[arg(long, value_delimiter = ',', default_value = "16,16")]
        capacities: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Pre-compile the ASAP/ALAP/original variants of every segment.
    Compile {
        #[command(flatten)]
        source: Source,
        /// Remote gates per segment (defaults to comm pairs x p_succ).
        #[arg(long)]
        m: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one design on one benchmark for one seed.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        design: Design,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Result JSON destination (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Event log destination.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run every design, benchmark and seed of a config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Override the number of seeds.
        #[arg(long)]
        runs: Option<usize>,
        /// Summary table destination (stderr if omitted).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Check unitary equivalence of scheduled variants on random segments.
    Verify {
        /// Maximum segment width in qubits.
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        segments: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => io::stdout().write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            benchmark: BenchmarkSection { benchmarks: Vec::new() },
            partition: Default::default(),
            entnet: Default::default(),
            noise: Default::default(),
            engine: Default::default(),
        },
    })
}

/// Config narrowed to the single benchmark chosen by `source`.
fn resolve(source: &Source) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_config(source.config.as_deref())?;
    if let Some(path) = &source.circuit {
        let name = path.file_stem().map_or("circuit".into(), |s| s.to_string_lossy().into_owned());
        cfg.benchmark.benchmarks = vec![Benchmark { name, spec: BenchSpec::File { path: path.clone() } }];
    } else {
        let all = std::mem::take(&mut cfg.benchmark.benchmarks);
        let chosen = match &source.bench {
            Some(name) => all.into_iter().find(|b| &b.name == name),
            None => all.into_iter().next(),
        };
        let chosen = chosen.ok_or_else(|| {
            CliError::Usage(match &source.bench {
                Some(n) => format!("benchmark {n:?} not in config"),
                None => "no benchmark: pass --circuit or a --config with benchmarks".into(),
            })
        })?;
        cfg.benchmark.benchmarks = vec![chosen];
    }
    if let Some(a) = &source.assignment {
        cfg.partition.file = Some(a.clone());
    }
    if cfg.partition.file.is_none() && source.circuit.is_some() && source.config.is_none() {
        // without a config, size the two nodes to the circuit
        let n = bench::read_circuit(source.circuit.as_ref().expect("checked"))?.n_qubits();
        cfg.partition.capacities = vec![n.div_ceil(2), n / 2];
    }
    Ok(cfg)
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { bench, n, steps, degree, layers, seed, output } => {
            let c = match bench {
                Family::Tlim => gen_tlim(n, steps)?,
                Family::Qaoa => gen_qaoa_maxcut(n, degree, layers, seed)?,
                Family::Qft => gen_qft(n)?,
            };
            emit(output.as_deref(), &dqc_core::qasm::to_qasm(&c))?;
            eprintln!(
                "{} qubits, {} 2Q, {} 1Q, depth {}",
                c.n_qubits(),
                c.two_qubit_count(),
                c.one_qubit_count(),
                c.layer_depth()
            );
        }
        Command::Partition { circuit, capacities, seed, output } => {
            let c = bench::read_circuit(&circuit)?;
            let a = partition_circuit(&c, &capacities, seed)?;
            let cut = interaction_graph(&c).cut_weight(a.nodes());
            emit(output.as_deref(), &a.to_text())?;
            eprintln!("cut weight {cut}");
        }
        Command::Compile { source, m, output } => {
            let cfg = resolve(&source)?;
            let bench = prepare(&cfg)?.remove(0);
            let m = m.or(cfg.engine.segment_size).unwrap_or_else(|| {
                segment_size(cfg.entnet.n_comm_pairs, attempt_success_prob(&cfg.entnet))
            });
            let table = VariantTable::build(&bench.dc, m);
            emit(output.as_deref(), &table.to_json())?;
            eprintln!("{}: {} remote gates, m = {m}, {} segments", bench.name, bench.dc.remote_count(), table.len());
        }
        Command::Simulate { source, design, seed, output, log } => {
            let cfg = resolve(&source)?;
            cfg.validate()?;
            let bench = prepare(&cfg)?.remove(0);
            let mut sim = cfg.sim_config(design, seed);
            sim.record_log = log.is_some();
            let result = engine::run(&bench.dc, &sim)?;
            if let Some(p) = &log {
                fs::write(p, write_log(&result.log)).map_err(io_err(p))?;
            }
            let mut json = serde_json::to_string_pretty(&result)?;
            json.push('\n');
            emit(output.as_deref(), &json)?;
            eprintln!(
                "{} {}: depth {:.3} (ideal {:.3}), fidelity {:.6}",
                bench.name, design, result.depth, bench.ideal_depth, result.fidelity
            );
        }
        Command::Sweep { config, output, runs, summary } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(r) = runs {
                cfg.engine.runs = r;
            }
            let exp = run_experiment(&cfg)?;
            let comment = format!("dqc sweep config={} generated_unix={}", config.display(), unix_time());
            let mut buf = Vec::new();
            write_csv(&exp.rows(), &mut buf, Some(&comment))?;
            match &output {
                Some(p) => fs::write(p, &buf).map_err(io_err(p))?,
                None => io::stdout().write_all(&buf).map_err(io_err(Path::new("<stdout>")))?,
            }
            let table = format_summary(&exp.summary());
            match &summary {
                Some(p) => fs::write(p, &table).map_err(io_err(p))?,
                None => eprint!("{table}"),
            }
        }
        Command::Verify { n, segments, seed } => {
            let report = verify(n, segments, seed)?;
            println!("{report}");
            eprintln!("{} segments with moved remote gates", report.nontrivial());
            if !report.all_passed() {
                return Err(CliError::NotEquivalent {
                    failed: report.total() - report.passed(),
                    total: report.total(),
                });
            }
        }
    }
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DQC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or(CliError::Threads(v))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprint!(": {s}");
                src = s.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}
