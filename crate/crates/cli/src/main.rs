use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lfmr::forwarding::RoutingMode;
use lfmr::metrics::{self, average_delay, average_utilization, throughput};
use lfmr::scenario::{self, load_topology, Outputs, PointError, Scenario, ScenarioError, SweepError};
use lfmr::sim::{RunReport, SimError};
use lfmr::Topology;

const EXIT_VALIDATION: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "lfmr", version, about = "Loop-free multipath routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a topology (and optionally a scenario) and report path diversity.
    Validate {
        #[arg(long)]
        topology: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Run one scenario in one mode.
    Run(RunArgs),
    /// Run a scenario under MP, SP and ECMP with the same seed.
    Compare(RunArgs),
    /// Run every (mode, rate, repetition) point of a sweep scenario.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Replaces the scenario's topology.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    mode: Option<RoutingMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Divide every protocol timer by ten.
    #[arg(long)]
    fast_control: bool,
    /// Write the full event trace next to the CSVs.
    #[arg(long)]
    trace: bool,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = if is_io(&error) { EXIT_IO } else { EXIT_VALIDATION };
        Failure { code, error }
    }
}

fn is_io(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<std::io::Error>()
            || matches!(c.downcast_ref::<ScenarioError>(), Some(ScenarioError::Io { .. }))
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Validate { topology, scenario } => validate(topology, scenario),
        Command::Run(a) => run(&a),
        Command::Compare(a) => compare(&a),
        Command::Sweep(a) => sweep(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn read_topology(path: &Path) -> Result<Topology> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Topology::parse(&text).with_context(|| format!("invalid topology {}", path.display()))
}

fn validate(topology: Option<PathBuf>, scenario: Option<PathBuf>) -> Result<(), Failure> {
    let topo = match (&topology, &scenario) {
        (Some(t), _) => read_topology(t)?,
        (None, Some(s)) => Scenario::load(s)?.topology,
        (None, None) => bail_usage("give --topology or --scenario")?,
    };
    if let (Some(t), Some(s)) = (&topology, &scenario) {
        let base = s.parent().unwrap_or(Path::new("."));
        let text = std::fs::read_to_string(s).with_context(|| format!("cannot read {}", s.display()))?;
        Scenario::parse(&text, base, Some((topo.clone(), t.display().to_string())))?;
    }
    let mut out = String::new();
    writeln!(out, "nodes: {}", topo.node_count()).unwrap();
    writeln!(out, "links: {}", topo.links().len()).unwrap();
    // Parsing already rejects disconnected graphs.
    writeln!(out, "connected: {}", if topo.is_connected() { "yes" } else { "no" }).unwrap();
    writeln!(out, "disjoint paths (source destination count):").unwrap();
    for s in topo.nodes() {
        for d in topo.nodes().filter(|&d| d > s) {
            writeln!(out, "{s} {d} {}", topo.node_disjoint_paths(s, d)).unwrap();
        }
    }
    print!("{out}");
    Ok(())
}

fn bail_usage<T>(msg: &str) -> Result<T, Failure> {
    Err(Failure {
        code: EXIT_VALIDATION,
        error: anyhow::anyhow!("{msg}"),
    })
}

fn load(a: &RunArgs) -> Result<Scenario, Failure> {
    let mut s = match &a.topology {
        None => Scenario::load(&a.scenario)?,
        Some(t) => {
            let text = std::fs::read_to_string(&a.scenario)
                .with_context(|| format!("cannot read {}", a.scenario.display()))?;
            let topo = load_topology(&t.display().to_string(), Path::new("."))?;
            let base = a.scenario.parent().unwrap_or(Path::new("."));
            Scenario::parse(&text, base, Some(topo))?
        }
    };
    if let Some(mode) = a.mode {
        s.config = s.with_mode(mode);
        if let Some(axis) = &mut s.sweep {
            axis.modes = vec![s.config.mode];
        }
    }
    if let Some(seed) = a.seed {
        s.config.traffic.seed = seed;
    }
    if a.fast_control {
        s.config.protocol = s.config.protocol.fast_control();
    }
    s.config.trace = a.trace;
    Ok(s)
}

fn write_outputs(dir: &Path, files: &Outputs) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, body) in files {
        write_atomic(&dir.join(name), body)?;
    }
    Ok(())
}

fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, body).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Turns an invariant violation into exit code 2 after saving its trace.
fn sim_failure(err: SimError, context: String, out: &Path) -> Failure {
    let SimError::Invariant { recent, .. } = &err else {
        return Failure {
            code: EXIT_VALIDATION,
            error: anyhow::Error::new(err).context(context),
        };
    };
    let path = out.join("violation_trace.txt");
    let mut body = recent.join("\n");
    body.push('\n');
    let saved = std::fs::create_dir_all(out)
        .map_err(anyhow::Error::from)
        .and_then(|_| write_atomic(&path, &body));
    let note = match saved {
        Ok(()) => format!("trace written to {}", path.display()),
        Err(e) => format!("trace could not be written: {e:#}"),
    };
    Failure {
        code: EXIT_INVARIANT,
        error: anyhow::Error::new(err).context(format!("{context}; {note}")),
    }
}

fn point_failure(e: PointError, out: &Path) -> Failure {
    let context = format!(
        "{} at load {} (repetition {}, seed {})",
        e.mode, e.rate, e.repetition, e.seed
    );
    sim_failure(e.source, context, out)
}

fn summary_line(r: &RunReport) -> String {
    let m = &r.metrics;
    let delay = average_delay(m).map_or("-".to_string(), |d| format!("{d:.4}"));
    format!(
        "{} load={} delay={} throughput={:.3} util={:.3} delivered={} injected={} dropped={}",
        m.mode.name(),
        m.load_point,
        delay,
        throughput(m),
        average_utilization(m),
        m.delivered,
        m.injected,
        m.dropped
    )
}

fn trace_body(r: &RunReport) -> String {
    let mut s = r.trace.join("\n");
    s.push('\n');
    s
}

fn run(a: &RunArgs) -> Result<(), Failure> {
    let s = load(a)?;
    let r = scenario::run_single(&s)
        .map_err(|e| sim_failure(e, format!("{} run failed", s.config.mode), &a.out))?;
    let mut files = scenario::run_outputs(&r.metrics, s.delay_bin);
    if a.trace {
        files.insert("trace.txt".into(), trace_body(&r));
    }
    write_outputs(&a.out, &files)?;
    println!("{}", summary_line(&r));
    Ok(())
}

fn compare(a: &RunArgs) -> Result<(), Failure> {
    let s = load(a)?;
    let reports = scenario::compare(&s).map_err(|e| point_failure(e, &a.out))?;
    let runs: Vec<_> = reports.iter().map(|r| r.metrics.clone()).collect();
    let mut files = scenario::compare_outputs(&runs, s.delay_bin);
    if a.trace {
        for r in &reports {
            files.insert(format!("trace_{}.txt", r.metrics.mode.name()), trace_body(r));
        }
    }
    write_outputs(&a.out, &files)?;
    for r in &reports {
        println!("{}", summary_line(r));
    }
    Ok(())
}

fn sweep(a: &RunArgs) -> Result<(), Failure> {
    let s = load(a)?;
    let Some(axis) = s.sweep.clone() else {
        return bail_usage("scenario has no `sweep_rates`");
    };
    let reports = match scenario::sweep(&s) {
        Ok(r) => r,
        Err(SweepError::Point(e)) => return Err(point_failure(e, &a.out)),
        Err(SweepError::Scenario(e)) => return Err(e.into()),
    };
    let points = scenario::sweep_points(&axis);
    let runs: Vec<_> = reports.iter().map(|r| r.metrics.clone()).collect();
    let mut index = String::from("row,mode,load,repetition,seed\n");
    for (row, p) in points.iter().enumerate() {
        let seed = s.config.traffic.seed.wrapping_add(p.repetition as u64);
        writeln!(
            index,
            "{},{},{},{},{seed}",
            row + 1,
            p.mode.name(),
            lfmr::format::sig9(p.rate.unwrap_or_default()),
            p.repetition
        )
        .unwrap();
    }
    let files = Outputs::from([
        ("summary.csv".to_string(), metrics::summary_csv(&runs)),
        ("points.csv".to_string(), index),
    ]);
    write_outputs(&a.out, &files)?;
    for r in &reports {
        println!("{}", summary_line(r));
    }
    Ok(())
}
