//! Flat `key = value` configuration files.
//!
//! One entry per line; `#` starts a comment; values may be wrapped in double
//! quotes; lists are comma separated. Missing keys keep their defaults and
//! unknown or repeated keys are errors. Accepted keys:
//!
//! | key | value | range |
//! |---|---|---|
//! | `scheme` | list of `ssd_dc`, `ssd_dc_k<K>`, `alamouti_dc`, `nodiv_dc` | non-empty, K in 1..=6 |
//! | `m` | antenna count | ≥ 1 |
//! | `spacing` | element spacing in wavelengths | (0, 1] |
//! | `q` | beam count | ≥ 1 (≥ 2 for Alamouti) |
//! | `k` | blocks per frame | 1..=6 |
//! | `j` | data symbols per block | ≥ 1 |
//! | `np` | pilot length | ≥ 1 |
//! | `mode` | `ideal`, `aligned`, `continuum` | |
//! | `paths` | continuum path count | ≥ 1 |
//! | `aod_density` | `uniform_angle`, `uniform_cosine` | |
//! | `carrier_hz`, `symbol_rate_hz` | Hz | > 0 |
//! | `speed_mps` | m/s | ≥ 0 |
//! | `snr_db_list` | list of dB values | non-empty, no NaN |
//! | `seed` | master seed | u64 |
//! | `max_trials`, `target_errors` | counts | ≥ 1 |
//! | `csi` | `estimated`, `perfect` | |
//! | `weights` | `uniform` or M real taper values | finite, not all zero |
//! | `fit_window_db` | two dB values `lo,hi` | lo < hi |
//! | `parallel` | `true`, `false` | |

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::Error;
use crate::sim::{SchemeSpec, SimConfig};
use crate::Result;

pub const KEYS: &[&str] = &[
    "scheme",
    "m",
    "spacing",
    "q",
    "k",
    "j",
    "np",
    "mode",
    "paths",
    "aod_density",
    "carrier_hz",
    "speed_mps",
    "symbol_rate_hz",
    "snr_db_list",
    "seed",
    "max_trials",
    "target_errors",
    "csi",
    "weights",
    "fit_window_db",
    "parallel",
];

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

fn unquote(value: &str) -> &str {
    value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value)
}

/// Applies one `key = value` entry to `cfg`.
pub fn apply_entry(cfg: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let v = unquote(value.trim()).trim();
    match key {
        "scheme" => {
            cfg.schemes = list(key, v)?;
            if cfg.schemes.is_empty() {
                return Err(Error::config(key, "no schemes given"));
            }
        }
        "m" => cfg.num_antennas = scalar(key, v)?,
        "spacing" => cfg.spacing = scalar(key, v)?,
        "q" => cfg.num_beams = scalar(key, v)?,
        "k" => cfg.k = scalar(key, v)?,
        "j" => cfg.j = scalar(key, v)?,
        "np" => cfg.pilot_len = scalar(key, v)?,
        "mode" => cfg.mode = scalar(key, v)?,
        "paths" => cfg.num_paths = scalar(key, v)?,
        "aod_density" => cfg.aod_density = scalar(key, v)?,
        "carrier_hz" => cfg.carrier_hz = scalar(key, v)?,
        "speed_mps" => cfg.speed_mps = scalar(key, v)?,
        "symbol_rate_hz" => cfg.symbol_rate_hz = scalar(key, v)?,
        "snr_db_list" => cfg.snr_db = list(key, v)?,
        "seed" => cfg.seed = scalar(key, v)?,
        "max_trials" => cfg.max_trials = scalar(key, v)?,
        "target_errors" => cfg.target_errors = scalar(key, v)?,
        "csi" => cfg.csi = scalar(key, v)?,
        "weights" => {
            cfg.weights = if v == "uniform" {
                None
            } else {
                Some(list(key, v)?)
            };
        }
        "fit_window_db" => {
            let w: Vec<f64> = list(key, v)?;
            match w[..] {
                [lo, hi] => cfg.fit_window_db = (lo, hi),
                _ => return Err(Error::config(key, "expected two values `lo,hi`")),
            }
        }
        "parallel" => cfg.parallel = scalar(key, v)?,
        other => return Err(Error::config(other, "unknown key")),
    }
    Ok(())
}

/// Parses configuration text on top of the defaults and validates the result.
pub fn parse_config_str(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(
                line.split_whitespace().next().unwrap_or(line),
                format!("line {}: expected `key = value`", lineno + 1),
            )
        })?;
        let key = key.trim();
        if seen.iter().any(|k| k == key) {
            return Err(Error::config(
                key,
                format!("line {}: repeated key", lineno + 1),
            ));
        }
        apply_entry(&mut cfg, key, value)?;
        seen.push(key.to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

/// Renders every key of `cfg` in file syntax; parsing the output gives back
/// an equal configuration.
pub fn render_config(cfg: &SimConfig) -> String {
    let weights = match &cfg.weights {
        None => "uniform".to_string(),
        Some(w) => join(w),
    };
    let schemes: Vec<SchemeSpec> = cfg.schemes.clone();
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("scheme", join(&schemes));
    put("m", cfg.num_antennas.to_string());
    put("spacing", cfg.spacing.to_string());
    put("q", cfg.num_beams.to_string());
    put("k", cfg.k.to_string());
    put("j", cfg.j.to_string());
    put("np", cfg.pilot_len.to_string());
    put("mode", cfg.mode.to_string());
    put("paths", cfg.num_paths.to_string());
    put("aod_density", cfg.aod_density.name().to_string());
    put("carrier_hz", cfg.carrier_hz.to_string());
    put("speed_mps", cfg.speed_mps.to_string());
    put("symbol_rate_hz", cfg.symbol_rate_hz.to_string());
    put("snr_db_list", join(&cfg.snr_db));
    put("seed", cfg.seed.to_string());
    put("max_trials", cfg.max_trials.to_string());
    put("target_errors", cfg.target_errors.to_string());
    put("csi", cfg.csi.to_string());
    put("weights", weights);
    put(
        "fit_window_db",
        format!("{},{}", cfg.fit_window_db.0, cfg.fit_window_db.1),
    );
    put("parallel", cfg.parallel.to_string());
    out
}
