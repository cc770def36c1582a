//! Result files: CSV, human-readable report and run manifest.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::render_config;
use crate::sim::{SerPoint, SimConfig, SweepResult};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "scheme,snr_db,trials,symbols,errors,ser,ser_stderr";

/// CSV text for `result`: the fixed header, then one row per point in result
/// order. SNR is printed in shortest round-trip decimal form, SER and its
/// standard error as `{:.6e}`.
pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::with_capacity(64 * (result.points.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for p in &result.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6e},{:.6e}",
            p.scheme, p.snr_db, p.trials, p.symbols, p.errors, p.ser, p.ser_stderr
        );
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, csv_string(result))?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub scheme: String,
    pub snr_db: f64,
    pub trials: u64,
    pub symbols: u64,
    pub errors: u64,
    pub ser: f64,
    pub ser_stderr: f64,
}

/// Reads back text written by [`csv_string`].
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::InvalidArgument("CSV header mismatch".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::InvalidArgument(format!("CSV row {}: bad {what}", i + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad("field count"));
            }
            Ok(CsvRow {
                scheme: f[0].to_string(),
                snr_db: f[1].parse().map_err(|_| bad("snr_db"))?,
                trials: f[2].parse().map_err(|_| bad("trials"))?,
                symbols: f[3].parse().map_err(|_| bad("symbols"))?,
                errors: f[4].parse().map_err(|_| bad("errors"))?,
                ser: f[5].parse().map_err(|_| bad("ser"))?,
                ser_stderr: f[6].parse().map_err(|_| bad("ser_stderr"))?,
            })
        })
        .collect()
}

fn fmt_db(x: f64) -> String {
    format!("{x}")
}

fn disjoint(a: &SerPoint, b: &SerPoint) -> bool {
    let (alo, ahi) = a.confidence_95();
    let (blo, bhi) = b.confidence_95();
    ahi < blo || bhi < alo
}

/// Highest SNR at which every scheme in `result` has a point.
fn highest_common_snr(result: &SweepResult) -> Option<f64> {
    let schemes = result.schemes();
    let mut snrs: Vec<f64> = result
        .curve(schemes.first()?)
        .iter()
        .map(|p| p.snr_db)
        .collect();
    snrs.retain(|&s| schemes.iter().all(|sch| result.point(sch, s).is_some()));
    snrs.into_iter().max_by(f64::total_cmp)
}

/// Text report: an SER table (one column per scheme, `*` marks points that
/// stopped at the trial cap), the fitted diversity order of every scheme, and
/// pairwise comparisons plus an ordering line at the highest common SNR.
pub fn emit_report(result: &SweepResult) -> String {
    let mut out = String::new();
    let schemes = result.schemes();
    let mut snrs: Vec<f64> = result.points.iter().map(|p| p.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();

    let width = schemes.iter().map(|s| s.len()).max().unwrap_or(0).max(13);
    let _ = write!(out, "{:>8}", "snr_db");
    for s in &schemes {
        let _ = write!(out, "  {s:>width$}");
    }
    out.push('\n');
    for &snr in &snrs {
        let _ = write!(out, "{:>8}", fmt_db(snr));
        for s in &schemes {
            let cell = match result.point(s, snr) {
                Some(p) => format!("{:.3e}{}", p.ser, if p.target_met { " " } else { "*" }),
                None => "-".to_string(),
            };
            let _ = write!(out, "  {cell:>width$}");
        }
        out.push('\n');
    }
    if result.points.iter().any(|p| !p.target_met) {
        out.push_str("* error target not met (trial cap reached)\n");
    }
    out.push('\n');

    for s in &schemes {
        match result.fit(s) {
            Some(f) => {
                let (lo, hi) = f.window_db;
                match f.order {
                    Some(d) => {
                        let _ = writeln!(
                            out,
                            "{s}: diversity order ≈ {d:.2} (window {}–{} dB)",
                            fmt_db(lo),
                            fmt_db(hi)
                        );
                    }
                    None => {
                        let _ = writeln!(
                            out,
                            "{s}: fit unavailable (window {}–{} dB)",
                            fmt_db(lo),
                            fmt_db(hi)
                        );
                    }
                }
            }
            None => {
                let _ = writeln!(out, "{s}: fit unavailable");
            }
        }
    }

    if schemes.len() >= 2 {
        if let Some(snr) = highest_common_snr(result) {
            out.push('\n');
            let _ = writeln!(out, "comparison at {} dB:", fmt_db(snr));
            let mut at: Vec<&SerPoint> = schemes
                .iter()
                .filter_map(|s| result.point(s, snr))
                .collect();
            for (i, a) in at.iter().enumerate() {
                for b in &at[i + 1..] {
                    let verdict = if disjoint(a, b) {
                        "95% intervals disjoint"
                    } else {
                        "95% intervals overlap"
                    };
                    let _ = writeln!(
                        out,
                        "  {} {:.3e} vs {} {:.3e} ({verdict})",
                        a.scheme, a.ser, b.scheme, b.ser
                    );
                }
            }
            at.sort_by(|a, b| a.ser.total_cmp(&b.ser));
            let mut line = String::from("ordering (SER ascending): ");
            for (i, p) in at.iter().enumerate() {
                if i > 0 {
                    line.push_str(if disjoint(at[i - 1], p) {
                        " < "
                    } else {
                        " ≈ "
                    });
                }
                line.push_str(&p.scheme);
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

/// Everything needed to rerun a sweep: the fully resolved configuration
/// (which carries the master seed) and the tool version. No wall-clock time
/// is recorded so that identical runs give identical manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: SimConfig,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(config: SimConfig) -> Self {
        Self {
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Manifest text; it is itself a valid configuration file.
    pub fn render(&self) -> String {
        format!(
            "# dcdiv {}\n# master seed {}\n{}",
            self.tool_version,
            self.config.seed,
            render_config(&self.config)
        )
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
