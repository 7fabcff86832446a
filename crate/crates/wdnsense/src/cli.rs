//! Command-line driver. Each subcommand reads documents, calls one pipeline
//! step and writes documents back.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wdnsense_core::anneal::{AnnealConfig, AnnealResult, BRUTE_FORCE_LIMIT, DEFAULT_RUNS, DEFAULT_SWEEPS};
use wdnsense_core::grid::grid_network;
use wdnsense_core::placement::{build_placement_qubo, decode, random_baseline, PlacementReport};
use wdnsense_core::{CardinalityMode, DemandModel, Hyperparams, MarkStatus, Network, Pins, Session, VariableRegistry};

use crate::error::{Error, Result};
use crate::files;
use crate::formats::{
    histogram_csv, BaselineDoc, CentralityDoc, NetworkDoc, QuboDoc, ReportDoc, ResultDoc, SessionDoc,
};
use crate::parallel;
use crate::pipeline::{self, SolverKind};
use crate::service::{self, ServeConfig};

#[derive(Debug, Parser)]
#[command(name = "wdnsense", version, about = "Pressure-sensor placement on water distribution networks")]
pub struct Cli {
    /// Accept unknown keys in input documents instead of rejecting them.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic k x k grid network with two sources.
    Generate(GenerateArgs),
    /// Compute tailored edge centrality for a network.
    Centrality(CentralityArgs),
    /// Assemble the placement QUBO and write it out.
    Build(BuildArgs),
    /// Solve the placement problem; writes result.json and report.json.
    Solve(SolveArgs),
    /// Score a result against the network and a random placement baseline.
    Evaluate(EvaluateArgs),
    /// Update an installation session with marks and re-solve.
    Replan(ReplanArgs),
    /// Energy density table of a result, as `center,density` rows.
    Histogram(HistogramArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Grid side length k.
    #[arg(long, default_value_t = 5)]
    pub size: usize,
    /// Seed for demands and accessibility flags.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output network document.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CentralityArgs {
    /// Network document.
    #[arg(long)]
    pub network: PathBuf,
    /// Output edge-weight document.
    #[arg(long)]
    pub out: PathBuf,
    /// Also include normalized node betweenness in the document.
    #[arg(long)]
    pub with_nodes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Exactly s sensors.
    Equality,
    /// At most s sensors, via one-hot slack variables.
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemandModelArg {
    /// f(x) = 1 - x.
    Linear,
    /// f(x) = exp(-x).
    Exponential,
}

#[derive(Debug, Clone, Args)]
pub struct HyperparamArgs {
    /// Number of sensors s.
    #[arg(long)]
    pub sensors: Option<usize>,
    /// Weight A of the uncovered-pipe term.
    #[arg(long, default_value_t = 1.0)]
    pub hp_a: f64,
    /// Weight B of the cardinality penalty.
    #[arg(long, default_value_t = 30.0)]
    pub hp_b: f64,
    /// Weight C of the low-demand cost.
    #[arg(long, default_value_t = 5.0)]
    pub hp_c: f64,
    /// Weight D of the inaccessibility cost.
    #[arg(long, default_value_t = 1.0)]
    pub hp_d: f64,
    /// Pin/forbid weight E for sessions [default: 10 B].
    #[arg(long)]
    pub hp_e: Option<f64>,
    /// Cardinality constraint form.
    #[arg(long, value_enum, default_value_t = ModeArg::Equality)]
    pub mode: ModeArg,
    /// Demand cost model f.
    #[arg(long, value_enum, default_value_t = DemandModelArg::Linear)]
    pub demand_model: DemandModelArg,
}

impl HyperparamArgs {
    pub fn resolve(&self) -> Result<Hyperparams> {
        let sensors = self
            .sensors
            .ok_or_else(|| Error::Usage("--sensors is required".to_string()))?;
        let mut hp = Hyperparams::new(self.hp_a, self.hp_b, self.hp_c, self.hp_d, sensors);
        if let Some(e) = self.hp_e {
            hp.e = e;
        }
        hp.mode = match self.mode {
            ModeArg::Equality => CardinalityMode::Equality,
            ModeArg::AtMost => CardinalityMode::AtMost,
        };
        hp.demand_model = match self.demand_model {
            DemandModelArg::Linear => DemandModel::Linear,
            DemandModelArg::Exponential => DemandModel::Exponential,
        };
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScheduleArgs {
    /// Number of independent annealing runs.
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    pub runs: usize,
    /// Sweeps over all variables per run.
    #[arg(long, default_value_t = DEFAULT_SWEEPS)]
    pub sweeps: usize,
    /// Initial temperature [default: calibrated from the model].
    #[arg(long)]
    pub t_hot: Option<f64>,
    /// Final temperature [default: 1e-3 t_hot].
    #[arg(long)]
    pub t_cold: Option<f64>,
    /// Seed for all randomness in the solve.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minimizer to use.
    #[arg(long, value_enum, default_value_t = SolverKind::Sa)]
    pub solver: SolverKind,
    /// Largest model the exact solver will enumerate.
    #[arg(long, default_value_t = BRUTE_FORCE_LIMIT)]
    pub exact_limit: usize,
}

impl ScheduleArgs {
    pub fn config(&self) -> AnnealConfig {
        AnnealConfig {
            t_hot: self.t_hot,
            t_cold: self.t_cold,
            sweeps: self.sweeps,
            runs: self.runs,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Network document.
    #[arg(long)]
    pub network: PathBuf,
    /// Edge-weight document [default: computed from the network].
    #[arg(long)]
    pub centrality: Option<PathBuf>,
    /// Session document whose installed/rejected nodes are pinned.
    #[arg(long)]
    pub session: Option<PathBuf>,
    #[command(flatten)]
    pub hyperparams: HyperparamArgs,
    /// Output QUBO document.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Network document.
    #[arg(long)]
    pub network: PathBuf,
    /// Edge-weight document [default: computed from the network].
    #[arg(long)]
    pub centrality: Option<PathBuf>,
    #[command(flatten)]
    pub hyperparams: HyperparamArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Directory for result.json and report.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Network document.
    #[arg(long)]
    pub network: PathBuf,
    /// Edge-weight document [default: computed from the network].
    #[arg(long)]
    pub centrality: Option<PathBuf>,
    /// Result document to score.
    #[arg(long)]
    pub result: PathBuf,
    #[command(flatten)]
    pub hyperparams: HyperparamArgs,
    /// Random placements drawn for the baseline; 0 skips it.
    #[arg(long, default_value_t = 10_000)]
    pub baseline_trials: usize,
    /// Seed for the baseline draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output report document [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplanArgs {
    /// Network document.
    #[arg(long)]
    pub network: PathBuf,
    /// Edge-weight document [default: computed from the network].
    #[arg(long)]
    pub centrality: Option<PathBuf>,
    /// Session document; created from the hyperparameter flags if missing.
    #[arg(long)]
    pub session: PathBuf,
    /// Record a node as installed or rejected, as NODE=installed|rejected. Repeatable.
    #[arg(long, value_parser = parse_mark)]
    pub mark: Vec<(String, MarkStatus)>,
    /// Clear the mark on a node before applying --mark. Repeatable.
    #[arg(long)]
    pub unmark: Vec<String>,
    #[command(flatten)]
    pub hyperparams: HyperparamArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Directory for result.json and report.json [default: not written].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HistogramArgs {
    /// Result document.
    #[arg(long)]
    pub result: PathBuf,
    /// Number of equal-width bins.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Output table [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Network document [default: the 5 x 5 desk grid, seed 42].
    #[arg(long)]
    pub network: Option<PathBuf>,
    /// Edge-weight document [default: computed from the network].
    #[arg(long)]
    pub centrality: Option<PathBuf>,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    /// Port to listen on.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory holding sessions, jobs and results.
    #[arg(long, default_value = "wdnsense-data")]
    pub data_dir: PathBuf,
    /// Jobs allowed to run at once [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
}

fn parse_mark(raw: &str) -> std::result::Result<(String, MarkStatus), String> {
    let (node, status) = raw
        .rsplit_once('=')
        .ok_or_else(|| format!("`{raw}` is not NODE=installed|rejected"))?;
    let status = match status {
        "installed" => MarkStatus::Installed,
        "rejected" => MarkStatus::Rejected,
        other => return Err(format!("unknown status `{other}` (expected installed or rejected)")),
    };
    if node.is_empty() {
        return Err("empty node id".to_string());
    }
    Ok((node.to_string(), status))
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let strict = !cli.lenient;
    match cli.command {
        Command::Generate(args) => generate(args),
        Command::Centrality(args) => centrality(args, strict),
        Command::Build(args) => build(args, strict),
        Command::Solve(args) => solve(args, strict, out),
        Command::Evaluate(args) => evaluate(args, strict, out),
        Command::Replan(args) => replan(args, strict, out),
        Command::Histogram(args) => histogram(args, strict, out),
        Command::Serve(args) => serve(args, strict),
    }
}

fn print(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn generate(args: GenerateArgs) -> Result<()> {
    if args.size < 2 {
        return Err(Error::Usage("--size must be at least 2".to_string()));
    }
    let net = grid_network(args.size, args.seed)?;
    files::write_doc(&args.out, &NetworkDoc::from_network(&net))
}

fn centrality(args: CentralityArgs, strict: bool) -> Result<()> {
    let net = pipeline::load_network(&args.network, strict)?;
    let (edges, nodes) = parallel::tailored_centrality(&net)?;
    let doc = CentralityDoc::new(&edges, args.with_nodes.then_some(nodes));
    files::write_doc(&args.out, &doc)
}

fn load_session(path: &Path, net: &Network, strict: bool) -> Result<Session> {
    let doc: SessionDoc = files::read_doc(path, strict)?;
    files::in_file(path, doc.into_session(net))
}

fn build(args: BuildArgs, strict: bool) -> Result<()> {
    let net = pipeline::load_network(&args.network, strict)?;
    let weights = pipeline::load_or_compute_centrality(&net, args.centrality.as_deref(), strict)?;
    let (hp, pins) = match &args.session {
        Some(path) => {
            let session = load_session(path, &net, strict)?;
            (session.hyperparams, Some(session.pins))
        }
        None => (args.hyperparams.resolve()?, None),
    };
    let model = build_placement_qubo(&net, &weights, &hp, pins.as_ref())?;
    files::write_doc(&args.out, &QuboDoc::from_model(&model))
}

fn write_solution(dir: &Path, solver: &str, result: &AnnealResult, registry: &VariableRegistry, report: &PlacementReport) -> Result<()> {
    files::write_doc(&dir.join("result.json"), &ResultDoc::new(solver, result, registry))?;
    files::write_doc(&dir.join("report.json"), &ReportDoc::new(report))
}

fn summary(report: &PlacementReport, hp: &Hyperparams) -> String {
    let selected: Vec<&str> = report.selected.iter().map(String::as_str).collect();
    format!(
        "best energy {}\nsensors {} (target {}, {})\naccessible {}\ndemand coverage {:.4}\nuncovered weight {}\nselected {}\n",
        report.energy,
        report.sensor_count,
        hp.sensors,
        if report.constraint_satisfied { "satisfied" } else { "violated" },
        report.accessible_count,
        report.demand_coverage,
        report.uncovered_weight,
        selected.join(",")
    )
}

fn solve(args: SolveArgs, strict: bool, out: &mut dyn Write) -> Result<()> {
    let net = pipeline::load_network(&args.network, strict)?;
    let weights = pipeline::load_or_compute_centrality(&net, args.centrality.as_deref(), strict)?;
    let hp = args.hyperparams.resolve()?;
    let solver = args.schedule.solver.build(args.schedule.config(), args.schedule.exact_limit);
    let model = build_placement_qubo(&net, &weights, &hp, None)?.freeze();
    let result = solver.minimize(&model)?;
    let best = result.best_run();
    let report = decode(&net, &weights, &hp, model.registry(), &best.assignment, best.energy);
    write_solution(&args.out_dir, solver.name(), &result, model.registry(), &report)?;
    print(out, &summary(&report, &hp))
}

fn evaluate(args: EvaluateArgs, strict: bool, out: &mut dyn Write) -> Result<()> {
    let net = pipeline::load_network(&args.network, strict)?;
    let weights = pipeline::load_or_compute_centrality(&net, args.centrality.as_deref(), strict)?;
    let hp = args.hyperparams.resolve()?;
    let result: ResultDoc = files::read_doc(&args.result, strict)?;
    files::in_file(&args.result, result.check())?;
    let report = pipeline::evaluate_selection(&net, &weights, &hp, &result.best_assignment, result.best_energy)?;
    let mut doc = ReportDoc::new(&report);
    if args.baseline_trials > 0 {
        let baseline = random_baseline(&net, report.sensor_count.max(1), args.baseline_trials, args.seed)?;
        doc.baseline = Some(BaselineDoc::from(baseline));
    }
    match &args.out {
        Some(path) => files::write_doc(path, &doc),
        None => print(out, &crate::formats::to_pretty(&doc)),
    }
}

fn replan(args: ReplanArgs, strict: bool, out: &mut dyn Write) -> Result<()> {
    let net = pipeline::load_network(&args.network, strict)?;
    let weights = pipeline::load_or_compute_centrality(&net, args.centrality.as_deref(), strict)?;
    let mut session = if args.session.exists() {
        load_session(&args.session, &net, strict)?
    } else {
        let id = args
            .session
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("session")
            .to_string();
        Session::new(id, args.hyperparams.resolve()?)?
    };
    for node in &args.unmark {
        session.unmark(&net, node)?;
    }
    for (node, status) in &args.mark {
        session.mark(&net, node, *status)?;
    }
    // marks are kept even if the solve below fails
    files::write_doc(&args.session, &SessionDoc::new(&session))?;

    let solver = args.schedule.solver.build(args.schedule.config(), args.schedule.exact_limit);
    let pins: Pins = session.pins.clone();
    let (report, result) = session.replan(&net, &weights, solver.as_ref())?;
    files::write_doc(&args.session, &SessionDoc::new(&session))?;
    if let Some(dir) = &args.out_dir {
        let model = build_placement_qubo(&net, &weights, &session.hyperparams, Some(&pins))?;
        write_solution(dir, solver.name(), &result, model.registry(), &report)?;
    }
    print(out, &summary(&report, &session.hyperparams))
}

fn histogram(args: HistogramArgs, strict: bool, out: &mut dyn Write) -> Result<()> {
    let result: ResultDoc = files::read_doc(&args.result, strict)?;
    files::in_file(&args.result, result.check())?;
    let bins = wdnsense_core::anneal::histogram(&result.energies, args.bins)?;
    let table = histogram_csv(&bins);
    match &args.out {
        Some(path) => files::write_atomic(path, &table),
        None => print(out, &table),
    }
}

fn serve(args: ServeArgs, strict: bool) -> Result<()> {
    let net = match &args.network {
        Some(path) => pipeline::load_network(path, strict)?,
        None => wdnsense_core::grid::desk_network(),
    };
    let weights = pipeline::load_or_compute_centrality(&net, args.centrality.as_deref(), strict)?;
    let config = ServeConfig {
        data_dir: args.data_dir,
        workers: args.workers,
    };
    let addr = format!("{}:{}", args.bind, args.port);
    service::serve_blocking(net, weights, config, &addr)
}

/// One-line JSON error for stderr.
pub fn error_line(err: &Error) -> String {
    serde_json::json!({ "error": { "kind": err.kind(), "message": err.to_string() } }).to_string()
}
