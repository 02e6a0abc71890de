//! Flat key-value configuration for all pipeline parameters.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are
//! rejected. Missing keys keep their tuned defaults. `idle_timeout_s`
//! accepts `off` to disable battery saving.

use std::path::Path;

use thiserror::Error;

use crate::controller::ControllerParams;

/// Environment variable holding a config path used when none is given.
pub const CONFIG_ENV_VAR: &str = "JOURNEYS_CONFIG";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for {key}: {value:?}")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Unreadable(String),
}

fn set(params: &mut ControllerParams, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
    fn parse<T: std::str::FromStr>(
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<T, ConfigError> {
        value.parse().map_err(|_| ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        })
    }
    match key {
        "window" => params.window = parse(key, value, line)?,
        "v_inst" => params.gps.v_inst = parse(key, value, line)?,
        "v_cum" => params.gps.v_cum = parse(key, value, line)?,
        "chain_len" => params.gps.chain_len = parse(key, value, line)?,
        "hysteresis_len" => params.gps.hysteresis_len = parse(key, value, line)?,
        "displacement_m" => params.gps.displacement_m = parse(key, value, line)?,
        "sat_min" => params.gps.sat_min = parse(key, value, line)?,
        "sat_timeout_s" => params.gps.sat_timeout_s = parse(key, value, line)?,
        "watchdog_timeout_s" => params.gps.watchdog_timeout_s = parse(key, value, line)?,
        "low_len_m" => params.post.low_len_m = parse(key, value, line)?,
        "high_len_m" => params.post.high_len_m = parse(key, value, line)?,
        "join_gap_s" => params.post.join_gap_s = parse(key, value, line)?,
        "join_tolerance" => params.post.join_tolerance = parse(key, value, line)?,
        "join_avg_count" => params.post.join_avg_count = parse(key, value, line)?,
        "tail_speed_mps" => params.post.tail_speed_mps = parse(key, value, line)?,
        "tail_max_cuts" => params.post.tail_max_cuts = parse(key, value, line)?,
        "accel_first_len" => params.motion.first_len = parse(key, value, line)?,
        "accel_first_threshold" => params.motion.first_threshold = parse(key, value, line)?,
        "accel_second_len" => params.motion.second_len = parse(key, value, line)?,
        "accel_second_threshold" => params.motion.second_threshold = parse(key, value, line)?,
        "accel_second_windows" => params.motion.second_windows = parse(key, value, line)?,
        "idle_timeout_s" => {
            params.idle_timeout_s = if value.eq_ignore_ascii_case("off") {
                None
            } else {
                Some(parse(key, value, line)?)
            }
        }
        "reacquire_delay_s" => params.reacquire_delay_s = parse(key, value, line)?,
        _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
    }
    Ok(())
}

fn validate(params: &ControllerParams) -> Result<(), ConfigError> {
    if params.window == 0 {
        return Err(ConfigError::Invalid("window must be at least 1".into()));
    }
    params.gps.validate().map_err(ConfigError::Invalid)?;
    params.post.validate().map_err(ConfigError::Invalid)?;
    params.motion.validate().map_err(ConfigError::Invalid)?;
    if params.reacquire_delay_s < 0.0 {
        return Err(ConfigError::Invalid("reacquire delay must be non-negative".into()));
    }
    Ok(())
}

/// Parses a config text into parameters, starting from the defaults.
pub fn parse_config(text: &str) -> Result<ControllerParams, ConfigError> {
    let mut params = ControllerParams::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        set(&mut params, key.trim(), value.trim(), i + 1)?;
    }
    validate(&params)?;
    Ok(params)
}

/// Loads parameters from `path`, else from `$JOURNEYS_CONFIG`, else defaults.
pub fn load_config(path: Option<&Path>) -> Result<ControllerParams, ConfigError> {
    let chosen = match path {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os(CONFIG_ENV_VAR).map(std::path::PathBuf::from),
    };
    match chosen {
        None => Ok(ControllerParams::default()),
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| ConfigError::Unreadable(format!("{}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

/// Renders parameters in the flat format, with the defaults documented.
pub fn render_config(p: &ControllerParams) -> String {
    let idle = p.idle_timeout_s.map(|v| v.to_string()).unwrap_or_else(|| "off".into());
    format!(
        "# journey pipeline parameters\n\
         window = {}\n\
         v_inst = {}\n\
         v_cum = {}\n\
         chain_len = {}\n\
         hysteresis_len = {}\n\
         displacement_m = {}\n\
         sat_min = {}\n\
         sat_timeout_s = {}\n\
         watchdog_timeout_s = {}\n\
         low_len_m = {}\n\
         high_len_m = {}\n\
         join_gap_s = {}\n\
         join_tolerance = {}\n\
         join_avg_count = {}\n\
         tail_speed_mps = {}\n\
         tail_max_cuts = {}\n\
         accel_first_len = {}\n\
         accel_first_threshold = {}\n\
         accel_second_len = {}\n\
         accel_second_threshold = {}\n\
         accel_second_windows = {}\n\
         idle_timeout_s = {}\n\
         reacquire_delay_s = {}\n",
        p.window,
        p.gps.v_inst,
        p.gps.v_cum,
        p.gps.chain_len,
        p.gps.hysteresis_len,
        p.gps.displacement_m,
        p.gps.sat_min,
        p.gps.sat_timeout_s,
        p.gps.watchdog_timeout_s,
        p.post.low_len_m,
        p.post.high_len_m,
        p.post.join_gap_s,
        p.post.join_tolerance,
        p.post.join_avg_count,
        p.post.tail_speed_mps,
        p.post.tail_max_cuts,
        p.motion.first_len,
        p.motion.first_threshold,
        p.motion.second_len,
        p.motion.second_threshold,
        p.motion.second_windows,
        idle,
        p.reacquire_delay_s,
    )
}
