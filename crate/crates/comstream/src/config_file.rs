//! Flat `key = value` configuration files.
//!
//! Keys are the snake_case field names of [`Config`]. `#` starts a comment.
//! Durations take an `s`, `m` or `h` suffix (`90m`, `1.5h`); a bare number
//! means seconds. Keys missing from the file keep their defaults.

use std::fmt::Write as _;
use std::path::Path;

use comstream_core::Config;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("bad value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error(transparent)]
    Invalid(#[from] comstream_core::config::ConfigError),
}

pub const KEYS: [&str; 13] = [
    "init_agents",
    "init_agent_cap",
    "timeslot",
    "comm_int",
    "slid_win_int",
    "assign_radius",
    "outlier_threshold",
    "no_topics",
    "no_keywords",
    "agent_fading_rate",
    "del_agent_weight_threshold",
    "seed",
    "topic_match_fraction",
];

fn value_error(key: &str, value: &str, reason: impl ToString) -> ConfigFileError {
    ConfigFileError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

/// Parses `90`, `90s`, `1m`, `1.5h` into whole seconds.
pub fn parse_duration(text: &str) -> Result<i64, String> {
    let text = text.trim();
    let (number, unit) = match text.char_indices().last() {
        Some((i, 's')) => (&text[..i], 1.0),
        Some((i, 'm')) => (&text[..i], 60.0),
        Some((i, 'h')) => (&text[..i], 3600.0),
        _ => (text, 1.0),
    };
    let n: f64 = number.trim().parse().map_err(|_| format!("not a duration: {text:?}"))?;
    let secs = n * unit;
    if !secs.is_finite() || secs.fract().abs() > 1e-9 {
        return Err(format!("{text:?} is not a whole number of seconds"));
    }
    Ok(secs.round() as i64)
}

pub fn format_duration(secs: i64) -> String {
    if secs != 0 && secs % 3600 == 0 {
        format!("{}h", secs / 3600)
    } else if secs != 0 && secs % 60 == 0 {
        format!("{}m", secs / 60)
    } else {
        format!("{secs}s")
    }
}

/// Sets one key on `config`. Shared by the file parser and CLI overrides.
pub fn set_key(config: &mut Config, key: &str, value: &str) -> Result<(), ConfigFileError> {
    fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigFileError>
    where
        T::Err: ToString,
    {
        value.trim().parse().map_err(|e: T::Err| value_error(key, value, e))
    }
    let dur = |value: &str| parse_duration(value).map_err(|e| value_error(key, value, e));
    match key {
        "init_agents" => config.init_agents = num(key, value)?,
        "init_agent_cap" => config.init_agent_cap = num(key, value)?,
        "timeslot" => config.timeslot = dur(value)?,
        "comm_int" => config.comm_int = dur(value)?,
        "slid_win_int" => config.slid_win_int = dur(value)?,
        "assign_radius" => config.assign_radius = num(key, value)?,
        "outlier_threshold" => config.outlier_threshold = num(key, value)?,
        "no_topics" => config.no_topics = num(key, value)?,
        "no_keywords" => config.no_keywords = num(key, value)?,
        "agent_fading_rate" => config.agent_fading_rate = num(key, value)?,
        "del_agent_weight_threshold" => config.del_agent_weight_threshold = num(key, value)?,
        "seed" => config.seed = num(key, value)?,
        "topic_match_fraction" => config.topic_match_fraction = num(key, value)?,
        _ => {
            return Err(ConfigFileError::UnknownKey {
                line: 0,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Applies the settings in `text` on top of `base`. Does not validate.
pub fn apply_str(base: Config, text: &str) -> Result<Config, ConfigFileError> {
    let mut config = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigFileError::Syntax { line: i + 1 })?;
        let key = key.trim();
        set_key(&mut config, key, value.trim()).map_err(|e| match e {
            ConfigFileError::UnknownKey { key, .. } => ConfigFileError::UnknownKey { line: i + 1, key },
            other => other,
        })?;
    }
    Ok(config)
}

pub fn parse_str(text: &str) -> Result<Config, ConfigFileError> {
    let config = apply_str(Config::default(), text)?;
    config.validate()?;
    Ok(config)
}

pub fn load(path: &Path) -> Result<Config, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

/// Renders every key. `parse_str(&render(c)) == c` for any valid config.
pub fn render(config: &Config) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("init_agents", config.init_agents.to_string());
    line("init_agent_cap", config.init_agent_cap.to_string());
    line("timeslot", format_duration(config.timeslot));
    line("comm_int", format_duration(config.comm_int));
    line("slid_win_int", format_duration(config.slid_win_int));
    line("assign_radius", config.assign_radius.to_string());
    line("outlier_threshold", config.outlier_threshold.to_string());
    line("no_topics", config.no_topics.to_string());
    line("no_keywords", config.no_keywords.to_string());
    line("agent_fading_rate", config.agent_fading_rate.to_string());
    line(
        "del_agent_weight_threshold",
        config.del_agent_weight_threshold.to_string(),
    );
    line("seed", config.seed.to_string());
    line("topic_match_fraction", config.topic_match_fraction.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn durations() {
        assert_eq!(parse_duration("1m"), Ok(60));
        assert_eq!(parse_duration("1.5h"), Ok(5400));
        assert_eq!(parse_duration("24h"), Ok(86400));
        assert_eq!(parse_duration("45"), Ok(45));
        assert_eq!(parse_duration("30s"), Ok(30));
        assert!(parse_duration("0.5s").is_err());
        assert!(parse_duration("soon").is_err());
        assert_eq!(format_duration(5400), "90m");
        assert_eq!(format_duration(86400), "24h");
        assert_eq!(format_duration(61), "61s");
    }

    #[test]
    fn parses_file() {
        let c = parse_str("# comment\ncomm_int = 1.5h\nassign_radius=0.2  # inline\n\nseed = 9\n").unwrap();
        assert_eq!(c.comm_int, 5400);
        assert_eq!(c.assign_radius, 0.2);
        assert_eq!(c.seed, 9);
        assert_eq!(c.timeslot, Config::default().timeslot);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_str("nonsense"),
            Err(ConfigFileError::Syntax { line: 1 })
        ));
        assert!(matches!(
            parse_str("\nbogus = 1"),
            Err(ConfigFileError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(
            parse_str("no_topics = -1"),
            Err(ConfigFileError::Value { .. })
        ));
        assert!(matches!(
            parse_str("assign_radius = 3"),
            Err(ConfigFileError::Invalid(_))
        ));
    }

    proptest! {
        #[test]
        fn render_round_trips(
            agents in 1usize..10, cap in 1usize..10,
            slot in 1i64..200_000, comm in 1i64..200_000, win in 1i64..200_000,
            radius in 0.01f64..1.99, outlier in 0.01f64..1.99,
            topics in 1usize..30, kws in 1usize..30,
            rate in 0.0f64..=1.0, del in 0.0f64..5.0, seed: u64, frac in 0.01f64..=1.0,
        ) {
            let c = Config {
                init_agents: agents, init_agent_cap: cap, timeslot: slot, comm_int: comm,
                slid_win_int: win, assign_radius: radius, outlier_threshold: outlier,
                no_topics: topics, no_keywords: kws, agent_fading_rate: rate,
                del_agent_weight_threshold: del, seed, topic_match_fraction: frac,
            };
            prop_assert_eq!(parse_str(&render(&c)).unwrap(), c);
        }
    }
}
