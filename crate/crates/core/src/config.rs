use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid config value for {field}: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

/// Engine parameters. Durations are in seconds of event time.
///
/// `assign_radius` and `outlier_threshold` are cosine *distances*
/// (`1 - similarity`), so they compare directly with each other.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub init_agents: usize,
    pub init_agent_cap: usize,
    pub timeslot: i64,
    pub comm_int: i64,
    pub slid_win_int: i64,
    pub assign_radius: f64,
    pub outlier_threshold: f64,
    pub no_topics: usize,
    pub no_keywords: usize,
    pub agent_fading_rate: f64,
    pub del_agent_weight_threshold: f64,
    pub seed: u64,
    pub topic_match_fraction: f64,
}

impl Default for Config {
    /// The FA CUP column with the tighter radius/threshold pair.
    fn default() -> Self {
        Config {
            init_agents: 5,
            init_agent_cap: 2,
            timeslot: 60,
            comm_int: 60,
            slid_win_int: 60,
            assign_radius: 0.25,
            outlier_threshold: 0.27,
            no_topics: 8,
            no_keywords: 9,
            agent_fading_rate: 0.0,
            del_agent_weight_threshold: 0.0,
            seed: 0,
            topic_match_fraction: 0.5,
        }
    }
}

fn invalid(field: &'static str, reason: &str) -> ConfigError {
    ConfigError {
        field,
        reason: String::from(reason),
    }
}

impl Config {
    /// Number of points consumed by the bootstrap.
    pub fn bootstrap_size(&self) -> usize {
        self.init_agents * self.init_agent_cap
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.init_agents == 0 {
            return Err(invalid("init_agents", "must be positive"));
        }
        if self.init_agent_cap == 0 {
            return Err(invalid("init_agent_cap", "must be positive"));
        }
        for (field, secs) in [
            ("timeslot", self.timeslot),
            ("comm_int", self.comm_int),
            ("slid_win_int", self.slid_win_int),
        ] {
            if secs <= 0 {
                return Err(invalid(field, "must be a positive duration"));
            }
        }
        for (field, d) in [
            ("assign_radius", self.assign_radius),
            ("outlier_threshold", self.outlier_threshold),
        ] {
            if !(d > 0.0 && d < 2.0) {
                return Err(invalid(field, "must lie in (0, 2)"));
            }
        }
        if self.no_topics == 0 {
            return Err(invalid("no_topics", "must be positive"));
        }
        if self.no_keywords == 0 {
            return Err(invalid("no_keywords", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.agent_fading_rate) {
            return Err(invalid("agent_fading_rate", "must lie in [0, 1]"));
        }
        if !(self.del_agent_weight_threshold >= 0.0 && self.del_agent_weight_threshold.is_finite()) {
            return Err(invalid("del_agent_weight_threshold", "must be a finite value >= 0"));
        }
        if !(self.topic_match_fraction > 0.0 && self.topic_match_fraction <= 1.0) {
            return Err(invalid("topic_match_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.bootstrap_size(), 10);
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = |c: Config| c.validate().unwrap_err().field;
        let d = Config::default;
        assert_eq!(
            bad(Config {
                assign_radius: 2.0,
                ..d()
            }),
            "assign_radius"
        );
        assert_eq!(
            bad(Config {
                agent_fading_rate: 1.5,
                ..d()
            }),
            "agent_fading_rate"
        );
        assert_eq!(bad(Config { comm_int: 0, ..d() }), "comm_int");
        assert!(Config {
            topic_match_fraction: 0.0,
            ..d()
        }
        .validate()
        .is_err());
    }
}
