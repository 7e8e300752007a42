//! Scenario files and the runners behind the command-line tool.
//!
//! A scenario is a plain-text file of `key = value` lines; `#` starts a
//! comment. Keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `topology` | topology file, relative to the scenario file, or `builtin:network1` |
//! | `mode` | `mp`, `sp` or `ecmp` |
//! | `seed` | base seed |
//! | `duration`, `warmup` | seconds; warmup defaults to five update periods |
//! | `service_rate` | packets per second per link server |
//! | `flow` | `<source> <destination> <rate>`; repeatable |
//! | `all_pairs_rate` | adds a flow at this rate between every ordered node pair |
//! | `size_law` | `exp <mean bits>` or `fixed <bits>` |
//! | `fast_control` | `true` divides every timer by ten |
//! | `hello_period`, `update_period`, `move_timeout` | seconds |
//! | `neighbor_remove_multiplier`, `timeout_multiplier` | multiples of the periods |
//! | `k`, `acceptance_floor`, `move_holddown` | move rule parameters |
//! | `ecmp_tolerance` | relative capacity tolerance for ECMP ties |
//! | `control_latency`, `control_loss` | control-plane delivery |
//! | `control_loss_kinds` | comma-separated packet kinds subject to loss |
//! | `hop_limit`, `queue_limit` | data-plane limits |
//! | `delay_bin` | delay histogram bin width in seconds |
//! | `check_invariants` | `false` skips the per-event consistency checks |
//! | `sweep_rates` | rates to sweep; replaces every flow's rate |
//! | `repetitions` | runs per sweep point, seeds `seed`, `seed + 1`, ... |
//! | `modes` | modes to sweep |

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::forwarding::{RoutingMode, DEFAULT_ECMP_TOLERANCE};
use crate::metrics::{self, RunMetrics};
use crate::protocol::{PacketKind, ProtocolConfig};
use crate::sim::{self, Flow, RunReport, SimConfig, SimError, SizeLaw, TrafficSpec};
use crate::topology::{NodeId, Topology, TopologyError, NETWORK1};

pub const DEFAULT_DELAY_BIN: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("topology {path}: {source}")]
    Topology {
        path: String,
        source: TopologyError,
    },
    #[error("{0}")]
    Invalid(String),
}

/// A run that failed inside a sweep or comparison.
#[derive(Debug, thiserror::Error)]
#[error("{mode} at load {rate} (repetition {repetition}, seed {seed}): {source}")]
pub struct PointError {
    pub mode: RoutingMode,
    pub rate: f64,
    pub repetition: usize,
    pub seed: u64,
    #[source]
    pub source: SimError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub rates: Vec<f64>,
    pub repetitions: usize,
    pub modes: Vec<RoutingMode>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    /// Where the topology came from, for diagnostics.
    pub topology_source: String,
    pub config: SimConfig,
    pub delay_bin: f64,
    pub sweep: Option<SweepAxis>,
}

#[derive(Default)]
struct Raw {
    topology: Option<(usize, String)>,
    mode: Option<RoutingMode>,
    seed: Option<u64>,
    duration: Option<f64>,
    warmup: Option<f64>,
    service_rate: Option<f64>,
    flows: Vec<(usize, u32, u32, f64)>,
    all_pairs_rate: Option<f64>,
    size_law: Option<SizeLaw>,
    fast_control: bool,
    timers: Vec<(String, f64)>,
    ecmp_tolerance: Option<f64>,
    control_latency: Option<f64>,
    control_loss: Option<f64>,
    control_loss_kinds: BTreeSet<PacketKind>,
    hop_limit: Option<u32>,
    queue_limit: Option<usize>,
    delay_bin: Option<f64>,
    check_invariants: Option<bool>,
    sweep_rates: Option<Vec<f64>>,
    repetitions: Option<usize>,
    modes: Option<Vec<RoutingMode>>,
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T, ScenarioError> {
    v.parse().map_err(|_| ScenarioError::Parse {
        line,
        msg: format!("bad value `{v}` for `{key}`"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>, ScenarioError> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

impl Raw {
    fn parse(source: &str) -> Result<Raw, ScenarioError> {
        let mut raw = Raw::default();
        for (i, text) in source.lines().enumerate() {
            let line = i + 1;
            let text = text.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let Some((key, value)) = text.split_once('=') else {
                return Err(ScenarioError::Parse {
                    line,
                    msg: format!("expected `key = value`, got `{text}`"),
                });
            };
            let (key, v) = (key.trim(), value.trim());
            match key {
                "topology" => raw.topology = Some((line, v.to_string())),
                "mode" => {
                    raw.mode = Some(
                        v.parse()
                            .map_err(|msg| ScenarioError::Parse { line, msg })?,
                    )
                }
                "seed" => raw.seed = Some(parse_value(line, key, v)?),
                "duration" => raw.duration = Some(parse_value(line, key, v)?),
                "warmup" => raw.warmup = Some(parse_value(line, key, v)?),
                "service_rate" => raw.service_rate = Some(parse_value(line, key, v)?),
                "flow" => {
                    let parts: Vec<&str> = v.split_whitespace().collect();
                    let [s, d, r] = parts[..] else {
                        return Err(ScenarioError::Parse {
                            line,
                            msg: format!("expected `flow = <source> <destination> <rate>`, got `{v}`"),
                        });
                    };
                    raw.flows.push((
                        line,
                        parse_value(line, key, s)?,
                        parse_value(line, key, d)?,
                        parse_value(line, key, r)?,
                    ));
                }
                "all_pairs_rate" => raw.all_pairs_rate = Some(parse_value(line, key, v)?),
                "size_law" => {
                    raw.size_law = Some(
                        v.parse()
                            .map_err(|msg| ScenarioError::Parse { line, msg })?,
                    )
                }
                "fast_control" => raw.fast_control = parse_value(line, key, v)?,
                "hello_period"
                | "update_period"
                | "neighbor_remove_multiplier"
                | "timeout_multiplier"
                | "move_timeout"
                | "k"
                | "acceptance_floor"
                | "move_holddown" => raw.timers.push((key.to_string(), parse_value(line, key, v)?)),
                "ecmp_tolerance" => raw.ecmp_tolerance = Some(parse_value(line, key, v)?),
                "control_latency" => raw.control_latency = Some(parse_value(line, key, v)?),
                "control_loss" => raw.control_loss = Some(parse_value(line, key, v)?),
                "control_loss_kinds" => {
                    for kind in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        raw.control_loss_kinds.insert(
                            kind.parse()
                                .map_err(|msg| ScenarioError::Parse { line, msg })?,
                        );
                    }
                }
                "hop_limit" => raw.hop_limit = Some(parse_value(line, key, v)?),
                "queue_limit" => raw.queue_limit = Some(parse_value(line, key, v)?),
                "delay_bin" => raw.delay_bin = Some(parse_value(line, key, v)?),
                "check_invariants" => raw.check_invariants = Some(parse_value(line, key, v)?),
                "sweep_rates" => raw.sweep_rates = Some(parse_list(line, key, v)?),
                "repetitions" => raw.repetitions = Some(parse_value(line, key, v)?),
                "modes" => {
                    let modes = v
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse().map_err(|msg| ScenarioError::Parse { line, msg }))
                        .collect::<Result<Vec<RoutingMode>, _>>()?;
                    raw.modes = Some(modes);
                }
                other => {
                    return Err(ScenarioError::Parse {
                        line,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(raw)
    }
}

fn with_tolerance(mode: RoutingMode, tolerance: f64) -> RoutingMode {
    match mode {
        RoutingMode::Ecmp { .. } => RoutingMode::Ecmp { tolerance },
        other => other,
    }
}

/// Loads a topology named in a scenario: `builtin:network1` or a path.
pub fn load_topology(spec: &str, base: &Path) -> Result<(Topology, String), ScenarioError> {
    if spec == "builtin:network1" {
        let t = Topology::parse(NETWORK1).map_err(|source| ScenarioError::Topology {
            path: spec.to_string(),
            source,
        })?;
        return Ok((t, spec.to_string()));
    }
    let path = base.join(spec);
    let text = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
        path: path.clone(),
        source,
    })?;
    let t = Topology::parse(&text).map_err(|source| ScenarioError::Topology {
        path: path.display().to_string(),
        source,
    })?;
    Ok((t, path.display().to_string()))
}

impl Scenario {
    /// Reads a scenario file; relative topology paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::parse(&text, base, None)
    }

    /// Parses scenario text. `topology` replaces the file's own topology
    /// line when given.
    pub fn parse(
        text: &str,
        base: &Path,
        topology: Option<(Topology, String)>,
    ) -> Result<Scenario, ScenarioError> {
        let raw = Raw::parse(text)?;
        let (topology, topology_source) = match (topology, &raw.topology) {
            (Some(t), _) => t,
            (None, Some((_, spec))) => load_topology(spec, base)?,
            (None, None) => {
                return Err(ScenarioError::Invalid("no `topology` given".into()));
            }
        };

        let mut protocol = ProtocolConfig::default();
        if raw.fast_control {
            protocol = protocol.fast_control();
        }
        for (key, v) in &raw.timers {
            let t = &mut protocol.timers;
            match key.as_str() {
                "hello_period" => t.hello_period = *v,
                "update_period" => t.update_period = *v,
                "neighbor_remove_multiplier" => t.neighbor_remove_multiplier = *v,
                "timeout_multiplier" => t.timeout_multiplier = *v,
                "move_timeout" => t.move_timeout = *v,
                "k" => t.k_threshold = *v,
                "acceptance_floor" => protocol.acceptance_floor = *v,
                "move_holddown" => protocol.move_holddown = *v,
                _ => unreachable!("timer keys are filtered by the parser"),
            }
        }

        let size = raw.size_law.unwrap_or_default();
        let mut flows = Vec::new();
        for &(line, s, d, rate) in &raw.flows {
            for end in [s, d] {
                if !topology.contains(NodeId(end)) {
                    return Err(ScenarioError::Parse {
                        line,
                        msg: format!("flow endpoint {end} is not in the topology"),
                    });
                }
            }
            flows.push(Flow {
                source: NodeId(s),
                destination: NodeId(d),
                rate,
                size,
            });
        }
        if let Some(rate) = raw.all_pairs_rate {
            for s in topology.nodes() {
                for d in topology.nodes().filter(|&d| d != s) {
                    flows.push(Flow {
                        source: s,
                        destination: d,
                        rate,
                        size,
                    });
                }
            }
        }

        let tolerance = raw.ecmp_tolerance.unwrap_or(DEFAULT_ECMP_TOLERANCE);
        let mode = with_tolerance(raw.mode.unwrap_or(RoutingMode::Mp), tolerance);

        let warmup = raw
            .warmup
            .unwrap_or_else(|| SimConfig::default_warmup(&protocol));
        let duration = raw
            .duration
            .ok_or_else(|| ScenarioError::Invalid("no `duration` given".into()))?;
        let traffic = TrafficSpec {
            flows,
            service_rate: raw.service_rate.unwrap_or(25.0),
            duration,
            warmup,
            seed: raw.seed.unwrap_or(0),
        };
        let mut config = SimConfig::new(mode, traffic);
        config.protocol = protocol;
        if let Some(l) = raw.control_latency {
            config.control.latency = l;
        }
        if let Some(l) = raw.control_loss {
            config.control.loss = l;
        }
        config.control.loss_kinds = raw.control_loss_kinds;
        if let Some(h) = raw.hop_limit {
            config.hop_limit = h;
        }
        config.queue_limit = raw.queue_limit;
        if let Some(c) = raw.check_invariants {
            config.check_invariants = c;
        }
        config
            .validate(&topology)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;

        let delay_bin = raw.delay_bin.unwrap_or(DEFAULT_DELAY_BIN);
        if !(delay_bin > 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "delay_bin must be positive, got {delay_bin}"
            )));
        }

        let sweep = match (raw.sweep_rates, raw.repetitions, raw.modes) {
            (None, None, None) => None,
            (rates, reps, modes) => {
                let rates = rates.unwrap_or_default();
                if rates.is_empty() {
                    return Err(ScenarioError::Invalid("`sweep_rates` is empty".into()));
                }
                if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
                    return Err(ScenarioError::Invalid(format!(
                        "sweep rates must be positive, got {r}"
                    )));
                }
                if config.traffic.flows.is_empty() {
                    return Err(ScenarioError::Invalid(
                        "a sweep needs at least one flow to scale".into(),
                    ));
                }
                let repetitions = reps.unwrap_or(1);
                if repetitions == 0 {
                    return Err(ScenarioError::Invalid("`repetitions` must be at least 1".into()));
                }
                let modes: Vec<RoutingMode> = modes
                    .unwrap_or_else(|| vec![mode])
                    .into_iter()
                    .map(|m| with_tolerance(m, tolerance))
                    .collect();
                if modes.is_empty() {
                    return Err(ScenarioError::Invalid("`modes` is empty".into()));
                }
                Some(SweepAxis {
                    rates,
                    repetitions,
                    modes,
                })
            }
        };

        Ok(Scenario {
            topology,
            topology_source,
            config,
            delay_bin,
            sweep,
        })
    }

    /// The same scenario in another mode; ECMP keeps the configured tolerance.
    pub fn with_mode(&self, mode: RoutingMode) -> SimConfig {
        let mut c = self.config.clone();
        c.mode = match (mode, self.config.mode) {
            (RoutingMode::Ecmp { .. }, RoutingMode::Ecmp { tolerance }) => {
                RoutingMode::Ecmp { tolerance }
            }
            _ => mode,
        };
        c
    }
}

/// Output files of a finished run, by file name.
pub type Outputs = BTreeMap<String, String>;

/// `summary.csv`, `delay_hist.csv` and `link_util.csv` for one run.
pub fn run_outputs(m: &RunMetrics, delay_bin: f64) -> Outputs {
    Outputs::from([
        ("summary.csv".to_string(), metrics::summary_csv([m])),
        (
            "delay_hist.csv".to_string(),
            metrics::delay_hist_csv(&metrics::delay_distribution(m, delay_bin)),
        ),
        ("link_util.csv".to_string(), metrics::link_util_csv(m)),
    ])
}

/// A joined `summary.csv` plus per-mode histogram and link files.
pub fn compare_outputs(runs: &[RunMetrics], delay_bin: f64) -> Outputs {
    let mut out = Outputs::new();
    out.insert("summary.csv".into(), metrics::summary_csv(runs));
    for m in runs {
        let mode = m.mode.name();
        out.insert(
            format!("delay_hist_{mode}.csv"),
            metrics::delay_hist_csv(&metrics::delay_distribution(m, delay_bin)),
        );
        out.insert(format!("link_util_{mode}.csv"), metrics::link_util_csv(m));
    }
    out
}

pub fn run_single(s: &Scenario) -> Result<RunReport, SimError> {
    sim::run(&s.topology, &s.config)
}

/// One point of a sweep or comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub mode: RoutingMode,
    /// Flow rate, or `None` to keep the scenario's own rates.
    pub rate: Option<f64>,
    pub repetition: usize,
}

impl Scenario {
    fn point_config(&self, p: &Point) -> SimConfig {
        let mut c = self.with_mode(p.mode);
        if let Some(rate) = p.rate {
            for f in &mut c.traffic.flows {
                f.rate = rate;
            }
        }
        c.traffic.seed = self.config.traffic.seed.wrapping_add(p.repetition as u64);
        c
    }
}

/// Runs every point, spreading them over worker threads. Results come back
/// in the order of `points` whatever the scheduling.
pub fn run_points(s: &Scenario, points: &[Point], threads: usize) -> Result<Vec<RunReport>, PointError> {
    let results: Vec<Mutex<Option<Result<RunReport, SimError>>>> =
        points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, points.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(p) = points.get(i) else { break };
                let r = sim::run(&s.topology, &s.point_config(p));
                *results[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    results
        .into_iter()
        .zip(points)
        .map(|(slot, p)| {
            let r = slot
                .into_inner()
                .expect("result slot")
                .expect("every point runs");
            r.map_err(|source| {
                let c = s.point_config(p);
                PointError {
                    mode: p.mode,
                    rate: p.rate.unwrap_or_else(|| c.traffic.load_point()),
                    repetition: p.repetition,
                    seed: c.traffic.seed,
                    source,
                }
            })
        })
        .collect()
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// The scenario under MP, SP and ECMP with identical seeds.
pub fn compare(s: &Scenario) -> Result<Vec<RunReport>, PointError> {
    let points: Vec<Point> = RoutingMode::all()
        .into_iter()
        .map(|mode| Point {
            mode,
            rate: None,
            repetition: 0,
        })
        .collect();
    run_points(s, &points, default_threads())
}

/// Points of a sweep, ordered by mode, then rate, then repetition.
pub fn sweep_points(axis: &SweepAxis) -> Vec<Point> {
    let mut points = Vec::new();
    for &mode in &axis.modes {
        for &rate in &axis.rates {
            for repetition in 0..axis.repetitions {
                points.push(Point {
                    mode,
                    rate: Some(rate),
                    repetition,
                });
            }
        }
    }
    points
}

pub fn sweep(s: &Scenario) -> Result<Vec<RunReport>, SweepError> {
    let axis = s
        .sweep
        .as_ref()
        .ok_or_else(|| ScenarioError::Invalid("scenario has no `sweep_rates`".into()))?;
    Ok(run_points(s, &sweep_points(axis), default_threads())?)
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Point(#[from] PointError),
}
