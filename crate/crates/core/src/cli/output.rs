use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::liouvillian::{Frame, StepControl, TRACE_DRIFT_LIMIT, TRUNCATION_WARNING_THRESHOLD};
use crate::magnonics::EffectiveParams;
use crate::protocols::TAIL_FRACTION;

use super::config::{NormalizedInput, RunMode, Source};

pub const UNIT_CONVENTION: &str =
    "SI throughout; rates and frequencies are angular (rad/s), inputs in Hz/kHz/MHz/GHz are multiplied by 2π, eV by e/ħ";
pub const PRECEDENCE: &str = "variant > overrides > derived from physical > first sweep point > default";

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()
}

/// CSV cell for a per-row status; commas and newlines are replaced.
pub fn status_cell(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceMeta {
    pub dim_magnon: usize,
    pub dim_photon: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverMeta {
    pub frame: Frame,
    pub control: StepControl,
    pub trace_drift_limit: f64,
    pub tail_fraction: f64,
    pub truncation_warning_threshold: f64,
}

impl SolverMeta {
    pub fn new(frame: Frame, control: StepControl) -> Self {
        SolverMeta {
            frame,
            control,
            trace_drift_limit: TRACE_DRIFT_LIMIT,
            tail_fraction: TAIL_FRACTION,
            truncation_warning_threshold: TRUNCATION_WARNING_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub label: Option<String>,
    pub params: EffectiveParams,
    pub sources: BTreeMap<&'static str, Source>,
    /// rad/s per V/m.
    pub coupling_per_field: Option<f64>,
    pub output: Option<String>,
    pub results: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct Metadata<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub name: &'a str,
    pub mode: RunMode,
    pub unit_convention: &'static str,
    pub precedence: &'static str,
    pub inputs: &'a [NormalizedInput],
    pub space: SpaceMeta,
    pub solver: SolverMeta,
    pub runs: Vec<RunMeta>,
    pub outputs: Vec<String>,
}

pub fn write_metadata(path: &Path, meta: &Metadata<'_>) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(meta).map_err(io::Error::other)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn output_path(dir: &Path, stem: &str, suffix: &str, ext: &str) -> PathBuf {
    if suffix.is_empty() {
        dir.join(format!("{stem}.{ext}"))
    } else {
        dir.join(format!("{stem}_{suffix}.{ext}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0 / 3.0, 6.283185307179586e4, 1e-300, -2.5e28, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn status_is_one_cell() {
        assert_eq!(status_cell("a, b\nc"), "a; b;c");
    }
}
