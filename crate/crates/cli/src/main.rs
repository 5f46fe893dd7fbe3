//! `tripdd`: file-based stages of the route prediction pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 resource limit exceeded.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use tripdd_core::compile::{deserialize, model_count, smooth, validate, write_diagram, CompileError, CompileOptions};
use tripdd_core::encode::{encode_relaxed, read_dimacs, write_dimacs, EncodeError};
use tripdd_core::eval::{benchmark_runtime, evaluate_suite, EvalConfig, EvalError};
use tripdd_core::graph::{
    abstract_graph, build_grid_graph, generate_synthetic_trips, load_graph, read_trips, write_trips, Abstraction,
    GraphError, VertexId,
};
use tripdd_core::inference::{finalize_params, InferenceError, ModelMeta};
use tripdd_core::route::{derive_seed, Method, RouteError, RouteModel, RouteQuery, SampleConfig};
use tripdd_core::{compile_cnf, DiagramError};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "tripdd", version, about = "Route prediction with probabilistic decision diagrams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a width x height lattice road graph (JSON: {"nodes":[{id,x,y}], "edges":[{u,v,length}]}).
    GenGrid {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition a road graph into square cells (JSON: cell_size, region_graph, vertex_to_region).
    Abstract {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        cell_size: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic trips that avoid the regions of the shortest path (JSONL, one id array per line).
    GenTrips {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        abstraction: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a graph's simple trips as DIMACS CNF, plus a `.vars` sidecar.
    Encode {
        /// Road graph to encode.
        #[arg(long, conflicts_with = "abstraction", required_unless_present = "abstraction")]
        graph: Option<PathBuf>,
        /// Encode the region graph of this abstraction instead.
        #[arg(long)]
        abstraction: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile DIMACS CNF into a smooth diagram with uniform parameters and validate it.
    Compile {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Order::Interleaved)]
        order: Order,
        #[arg(long, default_value_t = CompileOptions::DEFAULT_NODE_BUDGET)]
        node_budget: usize,
        /// Seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long, default_value_t = CompileOptions::DEFAULT_MAX_VARS)]
        max_vars: u32,
    },
    /// Learn branch parameters from road trips; writes the diagram and `<out>.meta.json`.
    Learn {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trips: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer queries (JSONL {"s","t"}) by single-pass sampling.
    Sample(SampleArgs),
    /// Answer queries by stepwise sampling.
    SampleStepwise(SampleArgs),
    /// Score methods on test trips by exact and epsilon match rate.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        trips: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [Method::SinglePass, Method::Shortest])]
        methods: Vec<Method>,
        #[arg(long, default_value_t = EvalConfig::DEFAULT_SAMPLES)]
        samples: usize,
        /// Defaults to the median edge length of the road graph.
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        budget: Budget,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time methods per query relative to the shortest-path baseline.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, conflicts_with = "trips", required_unless_present = "trips")]
        queries: Option<PathBuf>,
        /// Use the endpoints of these trips as queries.
        #[arg(long)]
        trips: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = Method::ALL)]
        methods: Vec<Method>,
        #[command(flatten)]
        budget: Budget,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check determinism, decomposability and smoothness of a diagram.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the model count of a smooth diagram.
    Count {
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    /// n and s variable of each vertex adjacent, vertices ascending.
    Interleaved,
    Natural,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    abstraction: PathBuf,
    /// Diagram over the abstraction's region encoding.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct Budget {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = SampleConfig::DEFAULT_MAX_ATTEMPTS)]
    max_attempts: usize,
    /// Seconds per query.
    #[arg(long, default_value_t = SampleConfig::DEFAULT_TIME_BUDGET.as_secs_f64())]
    time_budget: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    queries: PathBuf,
    /// JSONL: {"trip", "attempts", "elapsed_ms", "method"}.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    budget: Budget,
    /// Samples drawn per attempt.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Record wall-clock time; otherwise `elapsed_ms` is 0 so output is reproducible.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Resource(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Resource(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Resource(m) => f.write_str(m),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Data(e.to_string())
            }
        }
    )*};
}
data_errors!(GraphError, DiagramError, InferenceError, std::io::Error, serde_json::Error);

impl From<EncodeError> for Failure {
    fn from(e: EncodeError) -> Self {
        match e {
            EncodeError::TooLarge(_) => Failure::Resource(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Diagram(_) => Failure::Data(e.to_string()),
            _ => Failure::Resource(e.to_string()),
        }
    }
}

impl From<RouteError> for Failure {
    fn from(e: RouteError) -> Self {
        match e {
            RouteError::Compile(c) => c.into(),
            RouteError::Encode(c) => c.into(),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Route(r) => r.into(),
            EvalError::TooLarge(_) => Failure::Resource(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn seed_or_default(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        eprintln!("seed: {DEFAULT_SEED} (default)");
        DEFAULT_SEED
    })
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, Failure> {
    let reader = BufReader::new(fs::File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Failure::Data(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn load_model(args: &ModelArgs) -> Result<RouteModel, Failure> {
    let road = load_graph(&args.graph)?;
    let abstraction = Abstraction::load(&args.abstraction)?;
    let diagram = deserialize(&args.model)?;
    Ok(RouteModel::new(road, abstraction, diagram)?)
}

fn sample_config(b: &Budget) -> Result<SampleConfig, Failure> {
    if !(b.time_budget >= 0.0) || !b.time_budget.is_finite() {
        return Err(Failure::Usage(format!("invalid time budget {}", b.time_budget)));
    }
    Ok(SampleConfig {
        max_attempts: b.max_attempts,
        time_budget: Duration::from_secs_f64(b.time_budget),
        k_per_attempt: 1,
        seed: seed_or_default(b.seed),
    })
}

#[derive(Serialize)]
struct ResultLine {
    trip: Option<Vec<VertexId>>,
    attempts: usize,
    elapsed_ms: f64,
    method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn run_sample(args: &SampleArgs, method: Method) -> Result<(), Failure> {
    let model = load_model(&args.model)?;
    let queries: Vec<RouteQuery> = read_jsonl(&args.queries)?;
    let mut cfg = sample_config(&args.budget)?;
    cfg.k_per_attempt = args.k.max(1);
    let mut out = BufWriter::new(fs::File::create(&args.out)?);
    let (mut found, mut failed) = (0, 0);
    for (i, &q) in queries.iter().enumerate() {
        let qc = SampleConfig { seed: derive_seed(cfg.seed, i as u64), ..cfg.clone() };
        let line = match model.run(method, q, &qc) {
            Ok(o) => ResultLine {
                trip: o.trip.map(|t| t.vertices),
                attempts: o.attempts,
                elapsed_ms: if args.timing { o.elapsed.as_secs_f64() * 1e3 } else { 0.0 },
                method,
                error: None,
            },
            Err(e @ RouteError::Unsatisfiable(..)) => {
                ResultLine { trip: None, attempts: 0, elapsed_ms: 0.0, method, error: Some(e.to_string()) }
            }
            Err(e) => return Err(e.into()),
        };
        if line.trip.is_some() {
            found += 1;
        } else {
            failed += 1;
        }
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    out.flush()?;
    println!("{} queries: {found} answered, {failed} failed", queries.len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenGrid { width, height, spacing, out } => {
            if width == 0 || height == 0 || !(spacing > 0.0) {
                return Err(Failure::Usage("width and height must be positive, spacing > 0".into()));
            }
            let g = build_grid_graph(width, height, spacing);
            g.save(&out)?;
            println!("{} vertices, {} edges", g.vertex_count(), g.edge_count());
        }
        Command::Abstract { graph, cell_size, out } => {
            let a = abstract_graph(&load_graph(&graph)?, cell_size)?;
            a.save(&out)?;
            println!("{} regions, {} region edges", a.region_count(), a.region_graph.edge_count());
        }
        Command::GenTrips { graph, abstraction, count, seed, out } => {
            let g = load_graph(&graph)?;
            let a = Abstraction::load(&abstraction)?;
            a.check_against(&g)?;
            let trips = generate_synthetic_trips(&g, &a, count, seed_or_default(seed))?;
            write_trips(&out, &trips)?;
            println!("{} trips", trips.len());
        }
        Command::Encode { graph, abstraction, out } => {
            let g = match (graph, abstraction) {
                (Some(p), _) => load_graph(&p)?,
                (None, Some(p)) => Abstraction::load(&p)?.region_graph,
                (None, None) => unreachable!("clap requires one of the inputs"),
            };
            let f = encode_relaxed(&g)?;
            write_dimacs(&f, Some(&g), &out)?;
            println!("{} variables, {} clauses", f.num_vars, f.clauses.len());
        }
        Command::Compile { cnf, out, order, node_budget, timeout, max_vars } => {
            let f = read_dimacs(&cnf)?;
            let mut opts = match order {
                Order::Interleaved => CompileOptions::for_formula(&f),
                Order::Natural => CompileOptions::natural(f.num_vars),
            };
            opts.node_budget = node_budget;
            opts.max_vars = max_vars;
            opts.timeout = match timeout {
                Some(t) if t >= 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
                Some(t) => return Err(Failure::Usage(format!("invalid timeout {t}"))),
                None => None,
            };
            let raw = compile_cnf(&f, &opts)?;
            let mut d = smooth(&raw)?;
            finalize_params(&mut d);
            let report = validate(&d);
            print!("{report}");
            if !report.all_hold() {
                return Err(Failure::Data("compiled diagram fails validation".into()));
            }
            write_diagram(&d, &out)?;
            println!("{} nodes ({} before smoothing), {} variables", d.len(), raw.len(), d.num_vars());
        }
        Command::Learn { model, trips, out } => {
            let mut m = load_model(&model)?;
            let data = read_trips(&trips)?;
            let mut meta = ModelMeta::load(&model.model)?;
            let stats = m.train(&data)?;
            meta.trained_instances += stats.trained;
            meta.rejected_instances += stats.rejected + stats.single_region + stats.not_simple;
            write_diagram(m.diagram(), &out)?;
            meta.save(&out)?;
            println!(
                "trained {}, rejected {} (unsatisfying {}, single region {}, not simple {})",
                stats.trained,
                stats.rejected + stats.single_region + stats.not_simple,
                stats.rejected,
                stats.single_region,
                stats.not_simple
            );
        }
        Command::Sample(args) => run_sample(&args, Method::SinglePass)?,
        Command::SampleStepwise(args) => run_sample(&args, Method::Stepwise)?,
        Command::Eval { model, trips, methods, samples, epsilon, budget, workers, out } => {
            let m = load_model(&model)?;
            let tests = read_trips(&trips)?;
            let cfg = EvalConfig { samples_per_instance: samples, epsilon, sample: sample_config(&budget)?, workers };
            let report = evaluate_suite(&m, &tests, &methods, &cfg)?;
            print!("{}", report.to_table());
            if let Some(out) = out {
                fs::write(out, report.to_json() + "\n")?;
            }
        }
        Command::Bench { model, queries, trips, methods, budget, workers, out } => {
            let m = load_model(&model)?;
            let queries: Vec<RouteQuery> = match (queries, trips) {
                (Some(q), _) => read_jsonl(&q)?,
                (None, Some(t)) => read_trips(&t)?
                    .iter()
                    .filter_map(|t| t.terminals().map(|(s, t)| RouteQuery { s, t }))
                    .collect(),
                (None, None) => unreachable!("clap requires one of the inputs"),
            };
            let cfg = EvalConfig { sample: sample_config(&budget)?, workers, ..EvalConfig::default() };
            let report = benchmark_runtime(&m, &queries, &methods, &cfg)?;
            print!("{}", report.to_table());
            if let Some(out) = out {
                fs::write(out, report.to_json() + "\n")?;
            }
        }
        Command::Validate { model } => {
            let d = deserialize(&model)?;
            let report = validate(&d);
            print!("{report}");
            if !report.all_hold() {
                return Err(Failure::Data("diagram fails validation".into()));
            }
        }
        Command::Count { model } => {
            println!("{}", model_count(&deserialize(&model)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
