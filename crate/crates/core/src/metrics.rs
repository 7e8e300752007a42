//! Statistics over a finished run and their CSV encodings.
//!
//! Everything here is a pure function of [`RunMetrics`], so statistics can
//! be recomputed from a stored run without re-simulating.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::format::sig9;
use crate::forwarding::RoutingMode;
use crate::topology::NodeId;

pub const SUMMARY_HEADER: &str =
    "mode,load,avg_delay,throughput,avg_util,used_link_fraction,delivered,injected,dropped";
pub const DELAY_HIST_HEADER: &str = "bin_lo,bin_hi,count";
pub const LINK_UTIL_HEADER: &str = "from,to,avg_util";

/// Number of equal-width utilisation bins over `[0, 1]`.
pub const UTIL_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub mode: RoutingMode,
    /// Offered load the run was made at, in packets per second.
    pub load_point: f64,
    /// End-to-end delay of every packet delivered in the measured interval.
    pub delay_samples: Vec<f64>,
    pub delivered: u64,
    pub injected: u64,
    pub dropped: u64,
    /// Length of the measured interval.
    pub sim_time: f64,
    /// Busy fraction of each directed link, one sample per equal-length
    /// measurement window.
    pub per_link_utilization: BTreeMap<(NodeId, NodeId), Vec<f64>>,
    pub hop_limit_drops: u64,
}

impl RunMetrics {
    pub fn empty(mode: RoutingMode, load_point: f64) -> Self {
        RunMetrics {
            mode,
            load_point,
            delay_samples: Vec::new(),
            delivered: 0,
            injected: 0,
            dropped: 0,
            sim_time: 0.0,
            per_link_utilization: BTreeMap::new(),
            hop_limit_drops: 0,
        }
    }

    /// Checks the structural invariants: counts add up and every
    /// utilisation sample lies in `[0, 1]`.
    pub fn validate(&self) -> Result<(), String> {
        if self.delivered + self.dropped > self.injected {
            return Err(format!(
                "delivered {} + dropped {} exceeds injected {}",
                self.delivered, self.dropped, self.injected
            ));
        }
        if self.delay_samples.len() as u64 != self.delivered {
            return Err(format!(
                "{} delay samples for {} delivered packets",
                self.delay_samples.len(),
                self.delivered
            ));
        }
        for (&(a, b), samples) in &self.per_link_utilization {
            if let Some(u) = samples.iter().find(|u| !(0.0..=1.0).contains(*u)) {
                return Err(format!("utilisation sample {u} on {a}->{b}"));
            }
        }
        Ok(())
    }
}

/// Index of the half-open bin `[k*w, (k+1)*w)` holding `x`, consistent
/// with the bin edges as they are computed in floating point.
fn bin_index(x: f64, w: f64) -> i64 {
    let mut k = (x / w).floor() as i64;
    if x >= (k + 1) as f64 * w {
        k += 1;
    } else if x < k as f64 * w {
        k -= 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayHistogram {
    pub bin_width: f64,
    /// Bin index to count; only nonempty bins are stored.
    pub counts: BTreeMap<i64, u64>,
}

impl DelayHistogram {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `(lo, hi, count)` for every bin between the first and last nonempty
    /// one, empty bins included.
    pub fn rows(&self) -> Vec<(f64, f64, u64)> {
        let (Some(&first), Some(&last)) = (self.counts.keys().next(), self.counts.keys().last())
        else {
            return Vec::new();
        };
        (first..=last)
            .map(|k| {
                (
                    k as f64 * self.bin_width,
                    (k + 1) as f64 * self.bin_width,
                    self.counts.get(&k).copied().unwrap_or(0),
                )
            })
            .collect()
    }
}

/// Histogram of delay samples with half-open bins of width `bin_width`;
/// a sample on a boundary falls in the upper bin.
///
/// # Panics
///
/// If `bin_width` is not positive.
pub fn delay_distribution(m: &RunMetrics, bin_width: f64) -> DelayHistogram {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut counts = BTreeMap::new();
    for &x in &m.delay_samples {
        *counts.entry(bin_index(x, bin_width)).or_insert(0) += 1;
    }
    DelayHistogram { bin_width, counts }
}

pub fn average_delay(m: &RunMetrics) -> Option<f64> {
    if m.delay_samples.is_empty() {
        None
    } else {
        Some(m.delay_samples.iter().sum::<f64>() / m.delay_samples.len() as f64)
    }
}

/// Delivered packets per second of measured time.
pub fn throughput(m: &RunMetrics) -> f64 {
    if m.sim_time > 0.0 {
        m.delivered as f64 / m.sim_time
    } else {
        0.0
    }
}

/// Time-averaged utilisation of every directed link. Windows have equal
/// length, so this is the plain mean of the samples.
pub fn link_averages(m: &RunMetrics) -> BTreeMap<(NodeId, NodeId), f64> {
    m.per_link_utilization
        .iter()
        .map(|(&k, s)| {
            let avg = if s.is_empty() {
                0.0
            } else {
                s.iter().sum::<f64>() / s.len() as f64
            };
            (k, avg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilizationHistogram {
    /// Decile index (0 for `[0, 0.1)`, ... 9 for `[0.9, 1.0]`) to number of
    /// used links; idle links are left out.
    pub counts: BTreeMap<usize, u64>,
    /// Fraction of all links whose average exceeds the threshold.
    pub used_link_fraction: f64,
}

/// Decile histogram of per-link average utilisation over the links with an
/// average above `used_threshold` (0 means any traffic at all counts).
pub fn utilization_distribution(m: &RunMetrics, used_threshold: f64) -> UtilizationHistogram {
    let avgs = link_averages(m);
    let mut counts = BTreeMap::new();
    let mut used = 0usize;
    for &u in avgs.values() {
        if u > used_threshold {
            used += 1;
            // Scaling first keeps decimal edges such as 0.3 in the upper bin.
            let k = ((u * UTIL_BINS as f64).floor() as usize).min(UTIL_BINS - 1);
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    let used_link_fraction = if avgs.is_empty() {
        0.0
    } else {
        used as f64 / avgs.len() as f64
    };
    UtilizationHistogram {
        counts,
        used_link_fraction,
    }
}

/// Mean over all links of their time-averaged utilisation, idle links
/// counted as zero.
pub fn average_utilization(m: &RunMetrics) -> f64 {
    let avgs = link_averages(m);
    if avgs.is_empty() {
        0.0
    } else {
        avgs.values().sum::<f64>() / avgs.len() as f64
    }
}

/// Pools two runs of the same mode: samples are concatenated, counts and
/// measured time added. The load point is taken from `a`.
pub fn merge(a: &RunMetrics, b: &RunMetrics) -> RunMetrics {
    let mut out = a.clone();
    out.delay_samples.extend_from_slice(&b.delay_samples);
    out.delivered += b.delivered;
    out.injected += b.injected;
    out.dropped += b.dropped;
    out.sim_time += b.sim_time;
    out.hop_limit_drops += b.hop_limit_drops;
    for (k, s) in &b.per_link_utilization {
        out.per_link_utilization
            .entry(*k)
            .or_default()
            .extend_from_slice(s);
    }
    out
}

pub fn summary_row(m: &RunMetrics) -> String {
    let util = utilization_distribution(m, 0.0);
    format!(
        "{},{},{},{},{},{},{},{},{}",
        m.mode.name(),
        sig9(m.load_point),
        average_delay(m).map(sig9).unwrap_or_default(),
        sig9(throughput(m)),
        sig9(average_utilization(m)),
        sig9(util.used_link_fraction),
        m.delivered,
        m.injected,
        m.dropped
    )
}

pub fn summary_csv<'a>(runs: impl IntoIterator<Item = &'a RunMetrics>) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for m in runs {
        out.push_str(&summary_row(m));
        out.push('\n');
    }
    out
}

pub fn delay_hist_csv(h: &DelayHistogram) -> String {
    let mut out = String::from(DELAY_HIST_HEADER);
    out.push('\n');
    for (lo, hi, c) in h.rows() {
        writeln!(out, "{},{},{c}", sig9(lo), sig9(hi)).expect("writing to a String");
    }
    out
}

pub fn link_util_csv(m: &RunMetrics) -> String {
    let mut out = String::from(LINK_UTIL_HEADER);
    out.push('\n');
    for ((a, b), u) in link_averages(m) {
        writeln!(out, "{a},{b},{}", sig9(u)).expect("writing to a String");
    }
    out
}
