use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::topology::{NodeId, Topology};

use super::{substream, SimError, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeLaw {
    /// Every packet has this many bits.
    Fixed(f64),
    Exponential { mean: f64 },
}

impl Default for SizeLaw {
    fn default() -> Self {
        SizeLaw::Exponential { mean: 8000.0 }
    }
}

impl SizeLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SizeLaw::Fixed(bits) => bits,
            SizeLaw::Exponential { mean } => Exp::new(1.0 / mean)
                .expect("validated mean")
                .sample(rng),
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            SizeLaw::Fixed(bits) => bits,
            SizeLaw::Exponential { mean } => mean,
        }
    }
}

impl fmt::Display for SizeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeLaw::Fixed(bits) => write!(f, "fixed {bits}"),
            SizeLaw::Exponential { mean } => write!(f, "exp {mean}"),
        }
    }
}

impl FromStr for SizeLaw {
    type Err = String;

    /// `fixed <bits>` or `exp <mean bits>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split_whitespace();
        let (Some(kind), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("expected `fixed <bits>` or `exp <mean>`, got `{s}`"));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| format!("bad packet size `{value}`"))?;
        let law = match kind {
            "fixed" => SizeLaw::Fixed(value),
            "exp" => SizeLaw::Exponential { mean: value },
            other => return Err(format!("unknown size law `{other}`")),
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(format!("packet size must be positive, got {value}"));
        }
        Ok(law)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub source: NodeId,
    pub destination: NodeId,
    /// Packets per second.
    pub rate: f64,
    pub size: SizeLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    pub flows: Vec<Flow>,
    /// Packets per second served by each link server.
    pub service_rate: f64,
    pub duration: f64,
    pub warmup: f64,
    pub seed: u64,
}

impl TrafficSpec {
    /// The offered load a run is reported at: the common flow rate when all
    /// flows share one, otherwise their sum.
    pub fn load_point(&self) -> f64 {
        match self.flows.first() {
            None => 0.0,
            Some(f) if self.flows.iter().all(|g| g.rate == f.rate) => f.rate,
            Some(_) => self.flows.iter().map(|f| f.rate).sum(),
        }
    }

    pub fn validate(&self, topology: &Topology) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.service_rate > 0.0 && self.service_rate.is_finite()) {
            return bad(format!("service rate must be positive, got {}", self.service_rate));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.warmup >= 0.0 && self.warmup < self.duration) {
            return bad(format!(
                "warmup {} must be non-negative and shorter than duration {}",
                self.warmup, self.duration
            ));
        }
        for (i, f) in self.flows.iter().enumerate() {
            for end in [f.source, f.destination] {
                if !topology.contains(end) {
                    return bad(format!("flow {i}: unknown node {end}"));
                }
            }
            if f.source == f.destination {
                return bad(format!("flow {i}: source and destination are both {}", f.source));
            }
            if !(f.rate > 0.0 && f.rate.is_finite()) {
                return bad(format!("flow {i}: rate must be positive, got {}", f.rate));
            }
            let m = f.size.mean();
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("flow {i}: packet size must be positive, got {m}"));
            }
        }
        Ok(())
    }
}

/// Poisson packet source for one flow, on its own random substream.
pub struct FlowSource {
    pub flow: Flow,
    interarrival: Exp<f64>,
    rng: ChaCha8Rng,
}

impl FlowSource {
    pub fn new(flow: Flow, index: usize, seed: u64) -> Self {
        FlowSource {
            interarrival: Exp::new(flow.rate).expect("validated rate"),
            rng: substream(seed, Stream::Traffic, index as u64),
            flow,
        }
    }

    pub fn next_gap(&mut self) -> f64 {
        self.interarrival.sample(&mut self.rng)
    }

    pub fn next_size(&mut self) -> f64 {
        self.flow.size.sample(&mut self.rng)
    }
}
