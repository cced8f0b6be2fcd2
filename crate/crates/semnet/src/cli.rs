//! Command-line front end.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use semnet_core::dataset::{generate_dataset, GraphSummary};
use semnet_core::engine::{check_inputs, Algorithm, SimConfig, SweepAxis};
use semnet_core::mobility::generate_trace_with;
use semnet_core::{NodeId, SemanticNetwork};

use crate::config::{load_config, load_inputs, InputFiles};
use crate::error::Error;
use crate::format;
use crate::output::{self, RunOptions};
use crate::sweep;

#[derive(Debug, Parser)]
#[command(
    name = "semnet",
    version,
    about = "Semantic knowledge and content dissemination over opportunistic contacts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one simulation and write its output directory.
    Run(RunArgs),
    /// Sweep one parameter over several values and seeds.
    Sweep(SweepArgs),
    /// Generate a contact trace only.
    GenTrace(GenTraceArgs),
    /// Generate the item and assignment files only.
    GenDataset(GenDatasetArgs),
    /// Recompute the metrics series from a run's saved snapshots.
    Analyze(AnalyzeArgs),
    /// Check a configuration and any trace or dataset files it names.
    Validate(ValidateArgs),
}

/// Preset selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Scenario {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    /// 50-node single-community stand-in for scenario 1.
    Desk,
}

#[derive(Debug, Default, Args)]
pub struct SimArgs {
    /// JSON config with sections algorithm, mobility, dataset, exchange, engine.
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    /// Forgetting threshold in seconds ("inf" disables forgetting).
    #[arg(long)]
    pub f_min: Option<f64>,
    /// Retrieval threshold in seconds.
    #[arg(long)]
    pub w_min: Option<f64>,
    #[arg(long)]
    pub tag_limit: Option<usize>,
    #[arg(long)]
    pub data_limit: Option<usize>,
    #[arg(long)]
    pub theta_rec: Option<u32>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub snapshot_interval: Option<f64>,
    /// Contact trace to use instead of generated mobility.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Item file to use instead of the generated dataset (needs --assignment).
    #[arg(long)]
    pub items: Option<PathBuf>,
    #[arg(long)]
    pub assignment: Option<PathBuf>,
}

impl SimArgs {
    /// The config these flags describe, before validation.
    pub fn resolve(&self) -> Result<(SimConfig, InputFiles), Error> {
        let (mut cfg, mut files) = match (&self.config, self.scenario) {
            (Some(path), _) => {
                let f = load_config(path)?;
                (f.sim, f.inputs)
            }
            (None, Some(Scenario::Desk)) => (SimConfig::desk_scenario(), InputFiles::default()),
            (None, Some(s)) => {
                let n = match s {
                    Scenario::One => 1,
                    Scenario::Two => 2,
                    _ => 3,
                };
                (SimConfig::scenario(n).expect("preset exists"), InputFiles::default())
            }
            (None, None) => (SimConfig::default(), InputFiles::default()),
        };
        if let Some(v) = self.algorithm {
            cfg.algorithm = v;
        }
        if let Some(v) = self.f_min {
            cfg.engine.f_min = v;
        }
        if let Some(v) = self.w_min {
            cfg.exchange.w_min_seconds = v;
        }
        if let Some(v) = self.tag_limit {
            cfg.exchange.tag_limit = v;
        }
        if let Some(v) = self.data_limit {
            cfg.exchange.data_limit = v;
        }
        if let Some(v) = self.theta_rec {
            cfg.exchange.theta_rec = v;
        }
        if let Some(v) = self.duration {
            cfg.engine.duration = v;
        }
        if let Some(v) = self.seed {
            cfg.engine.seed = v;
        }
        if let Some(v) = self.snapshot_interval {
            cfg.engine.snapshot_interval = v;
        }
        for (flag, slot) in [
            (&self.trace, &mut files.trace),
            (&self.items, &mut files.items),
            (&self.assignment, &mut files.assignment),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        Ok((cfg, files))
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Save every node's network and items at every tick.
    #[arg(long)]
    pub snapshots: bool,
    /// Also write per-node metrics at every tick to nodes.csv.
    #[arg(long)]
    pub node_metrics: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// One of f-min, w-min, tag-limit, data-limit, theta-rec.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Comma-separated values.
    #[arg(long)]
    pub values: String,
    /// Inclusive range `a..b` or comma-separated list.
    #[arg(long, default_value = "1..10")]
    pub seeds: String,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Trace file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also dump every sampled position to this file.
    #[arg(long)]
    pub positions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Directory receiving dataset.txt and assignment.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Output directory of a run made with --snapshots.
    pub run_dir: PathBuf,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let (cfg, files) = args.sim.resolve()?;
    let inputs = load_inputs(&cfg, &files)?;
    let opts = RunOptions {
        snapshots: args.snapshots,
        node_metrics: args.node_metrics,
    };
    let out = output::run_to_dir(&cfg, &inputs, &args.out_dir, opts)?;
    let m = out.summary.final_metrics;
    println!(
        "t={} kd={:.4} cvg={:.4} f={:.4} w={:.4} converged {:.4} at {}",
        m.time, m.kd, m.cvg, m.f_measure, m.mean_edge_weight, out.summary.convergence.cvg, out.summary.convergence.time
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let (cfg, files) = args.sim.resolve()?;
    cfg.validate()?;
    let values = sweep::parse_values(&args.values)?;
    let seeds = sweep::parse_seeds(&args.seeds)?;
    let work = || sweep::sweep(&cfg, &files, args.axis, &values, &seeds);
    let cells = match args.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Runtime(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    sweep::write_sweep(&args.out_dir, args.axis, &cells)?;
    for c in &cells {
        let m = c.mean_final();
        println!(
            "{}={} runs={} kd={:.4} cvg={:.4} f={:.4} convergence_time={:.1}",
            args.axis.name(),
            c.value,
            c.runs.len(),
            m.kd,
            m.cvg,
            m.f_measure,
            c.mean_convergence_time()
        );
    }
    Ok(())
}

fn cmd_gen_trace(args: &GenTraceArgs) -> Result<(), Error> {
    let (cfg, _) = args.sim.resolve()?;
    cfg.validate()?;
    let mobility = cfg.resolved().mobility;
    let mut positions = args.positions.as_deref().map(create).transpose()?;
    let mut failure = None;
    let trace = generate_trace_with(&mobility, |t, node, x, y| {
        if let (Some(w), None) = (&mut positions, &failure) {
            if let Err(e) = format::write_position(w, t, node, x, y) {
                failure = Some(e);
            }
        }
    })?;
    if let (Some(path), Some(e)) = (&args.positions, failure) {
        return Err(Error::io(path, e));
    }
    if let (Some(path), Some(mut w)) = (&args.positions, positions) {
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let mut w = create(&args.out)?;
    format::write_trace(&mut w, &trace.contacts).map_err(|e| Error::io(&args.out, e))?;
    w.flush().map_err(|e| Error::io(&args.out, e))?;
    println!("{} contacts", trace.contacts.len());
    Ok(())
}

fn cmd_gen_dataset(args: &GenDatasetArgs) -> Result<(), Error> {
    let (cfg, _) = args.sim.resolve()?;
    cfg.validate()?;
    let cfg = cfg.resolved();
    let m = &cfg.mobility;
    let clusters: Vec<u32> = (0..m.num_nodes)
        .map(|i| {
            cfg.dataset
                .cluster_of(NodeId(i), m.community_of(NodeId(i)), m.num_communities)
        })
        .collect();
    let ds = generate_dataset(&cfg.dataset, &clusters)?;
    let path = args.out_dir.join(output::ITEMS_FILE);
    let mut w = create(&path)?;
    format::write_items(&mut w, ds.items.values()).map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    let path = args.out_dir.join(output::ASSIGNMENT_FILE);
    let mut w = create(&path)?;
    format::write_assignment(&mut w, &ds.assignment).map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    let global = SemanticNetwork::build_initial(ds.items.values(), 0.0).map_err(|e| Error::Runtime(e.to_string()))?;
    let g = GraphSummary::of(&global);
    println!(
        "{} items, global graph {} vertices {} edges diameter {:?}",
        ds.items.len(),
        g.vertices,
        g.edges,
        g.diameter
    );
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Error> {
    let records = output::analyze_dir(&args.run_dir)?;
    let csv_err = |p: &Path, e: csv::Error| Error::io(p, io::Error::other(e));
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            output::write_metrics(&mut w, &records).map_err(|e| csv_err(path, e))?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => output::write_metrics(io::stdout().lock(), &records).map_err(|e| csv_err(Path::new("<stdout>"), e)),
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Error> {
    let (cfg, files) = args.sim.resolve()?;
    cfg.validate()?;
    if !files.is_empty() {
        let inputs = load_inputs(&cfg, &files)?;
        check_inputs(&inputs)?;
    }
    println!("ok");
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenTrace(a) => cmd_gen_trace(a),
        Command::GenDataset(a) => cmd_gen_dataset(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
