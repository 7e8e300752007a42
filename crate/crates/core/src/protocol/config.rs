/// Timer periods and the forward-set growth threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TimerConfig {
    /// Hello period, seconds.
    pub hello_period: f64,
    /// NeighborUpdate period, seconds. Also the utilisation observation window.
    pub update_period: f64,
    /// NeighborRemove fires after this many hello periods without a Hello.
    pub neighbor_remove_multiplier: f64,
    /// Timeout fires after this many update periods without a NeighborUpdate.
    pub timeout_multiplier: f64,
    /// Move timer, seconds.
    pub move_timeout: f64,
    /// Fraction of the current total capacity a new forward neighbour must add.
    pub k_threshold: f64,
}

impl Default for TimerConfig {
    fn default() -> Self {
        TimerConfig {
            hello_period: 15.0,
            update_period: 30.0,
            neighbor_remove_multiplier: 3.0,
            timeout_multiplier: 5.0,
            move_timeout: 30.0,
            k_threshold: 0.1,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("{name} must lie in [{lo}, {hi}], got {value}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

fn positive(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::NotPositive { name, value })
    }
}

fn within(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange {
            name,
            value,
            lo,
            hi,
        })
    }
}

impl TimerConfig {
    /// Every timer constant divided by ten; multipliers and K unchanged.
    pub fn fast_control(&self) -> Self {
        TimerConfig {
            hello_period: self.hello_period / 10.0,
            update_period: self.update_period / 10.0,
            move_timeout: self.move_timeout / 10.0,
            ..self.clone()
        }
    }

    pub fn neighbor_remove_interval(&self) -> f64 {
        self.neighbor_remove_multiplier * self.hello_period
    }

    pub fn timeout_interval(&self) -> f64 {
        self.timeout_multiplier * self.update_period
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        positive("hello_period", self.hello_period)?;
        positive("update_period", self.update_period)?;
        positive("move_timeout", self.move_timeout)?;
        within(
            "neighbor_remove_multiplier",
            self.neighbor_remove_multiplier,
            2.0,
            4.0,
        )?;
        within("timeout_multiplier", self.timeout_multiplier, 5.0, 6.0)?;
        positive("k_threshold", self.k_threshold)?;
        if self.k_threshold >= 1.0 {
            return Err(ConfigError::OutOfRange {
                name: "k_threshold",
                value: self.k_threshold,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(())
    }
}

/// Full per-node protocol configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub timers: TimerConfig,
    /// A ForwardMoveRequest is accepted only if the responder keeps at least
    /// this fraction of its current total capacity.
    pub acceptance_floor: f64,
    /// After accepting a request from `l` for `d`, a node does not itself
    /// ask `l` to become forward for `d` for this many seconds.
    pub move_holddown: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let timers = TimerConfig::default();
        let move_holddown = timers.update_period;
        ProtocolConfig {
            timers,
            acceptance_floor: 0.8,
            move_holddown,
        }
    }
}

impl ProtocolConfig {
    pub fn fast_control(&self) -> Self {
        ProtocolConfig {
            timers: self.timers.fast_control(),
            acceptance_floor: self.acceptance_floor,
            move_holddown: self.move_holddown / 10.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.timers.validate()?;
        within("acceptance_floor", self.acceptance_floor, 0.0, 1.0)?;
        if !(self.move_holddown >= 0.0) {
            return Err(ConfigError::NotPositive {
                name: "move_holddown",
                value: self.move_holddown,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let t = TimerConfig::default();
        assert_eq!(t.hello_period, 15.0);
        assert_eq!(t.update_period, 30.0);
        assert_eq!(t.neighbor_remove_multiplier, 3.0);
        assert_eq!(t.timeout_multiplier, 5.0);
        assert_eq!(t.move_timeout, 30.0);
        assert_eq!(t.k_threshold, 0.1);
        assert_eq!(ProtocolConfig::default().acceptance_floor, 0.8);
        t.validate().unwrap();
    }

    #[test]
    fn fast_control_scales_periods_only() {
        let f = TimerConfig::default().fast_control();
        assert_eq!(f.hello_period, 1.5);
        assert_eq!(f.update_period, 3.0);
        assert_eq!(f.move_timeout, 3.0);
        assert_eq!(f.neighbor_remove_multiplier, 3.0);
        assert_eq!(f.k_threshold, 0.1);
        assert_eq!(f.neighbor_remove_interval(), 4.5);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let mut t = TimerConfig::default();
        t.timeout_multiplier = 4.0;
        assert!(t.validate().is_err());
        let mut t = TimerConfig::default();
        t.k_threshold = 1.5;
        assert!(t.validate().is_err());
        let mut t = TimerConfig::default();
        t.hello_period = 0.0;
        assert!(t.validate().is_err());
    }
}
