//! Dry-run checks of a configuration.

use std::fmt;

use crate::hilbert::FockSpace;

use super::config::{ExperimentConfig, RunMode, Source, DEFAULT_Q_SWITCH_CONTRAST};

/// The magnon truncation should exceed this many times n_th.
pub const TRUNCATION_FACTOR: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Violation,
    Warning,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Violation => "violation",
            Severity::Warning => "warning",
        };
        write!(f, "{tag} {}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub findings: Vec<Finding>,
}

impl Report {
    fn violation(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Violation,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn violations(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Violation)
    }

    pub fn is_clean(&self) -> bool {
        self.violations().next().is_none()
    }
}

/// Schema and physics sanity checks of config text, without solving.
pub fn validate_text(text: &str, default_name: &str) -> Report {
    let mut report = Report::default();
    match ExperimentConfig::parse(text, default_name) {
        Ok(cfg) => check(&cfg, &mut report),
        Err(e) => report.violation(e.path, e.message),
    }
    report
}

fn check(cfg: &ExperimentConfig, report: &mut Report) {
    if let Err(e) = FockSpace::new(cfg.dim_magnon, cfg.dim_photon) {
        let key = if cfg.dim_magnon < 2 { "space.dim_magnon" } else { "space.dim_photon" };
        report.violation(key, e.to_string());
    }
    if let Some(p) = &cfg.physical {
        if let Err((name, reason)) = p.config.validate() {
            report.violation(format!("physical.{name}"), reason);
            // derived values would only repeat the same problem
            return;
        }
    }
    let runs = match cfg.resolve_all() {
        Ok(r) => r,
        Err(e) => {
            report.violation(e.path, e.message);
            return;
        }
    };
    if matches!(cfg.mode, RunMode::Sweep | RunMode::Qswitch) && runs.len() > 1 {
        report.violation("variants", "sweep and qswitch modes take a single base run");
    }
    for (i, r) in runs.iter().enumerate() {
        let p = &r.params;
        let key_of = |field: &str| match r.sources.get(field) {
            Some(Source::Variant) => format!("variants[{i}].{field}"),
            Some(Source::Override) => format!("overrides.{field}"),
            _ => format!("physical ({field} derived)"),
        };
        for (field, v) in [
            ("G_h", p.g_h),
            ("kappa_0", p.kappa_0),
            ("kappa_h", p.kappa_h),
            ("n_th", p.n_th),
            ("omega_0", p.omega_0),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                report.violation(key_of(field), format!("must be finite and ≥ 0, got {v}"));
            }
        }
        if !p.detuning.is_finite() {
            report.violation(key_of("detuning"), "must be finite");
        }
        if p.kappa_h == 0.0 && cfg.mode != RunMode::Params && cfg.mode != RunMode::Dispersion {
            report.violation(key_of("kappa_h"), "cavity decay must be positive for cooling");
        }
        if p.n_th.is_finite() && !(TRUNCATION_FACTOR * p.n_th < cfg.dim_magnon as f64) {
            report.warning(
                "space.dim_magnon",
                format!(
                    "truncation {} is not above {TRUNCATION_FACTOR}·n_th = {}",
                    cfg.dim_magnon,
                    TRUNCATION_FACTOR * p.n_th
                ),
            );
        }
        if cfg.mode == RunMode::Steady && p.kappa_0 == 0.0 && p.g_h == 0.0 {
            report.warning(key_of("kappa_0"), "magnon is decoupled; steady state is not unique");
        }
    }
    if let (Some(t), RunMode::Cool) = (cfg.t_end, cfg.mode) {
        if !(t > 0.0) {
            report.violation("time.t_end", "must be positive");
        }
    }
    if let Some(q) = &cfg.qswitch {
        let base = runs.first().map(|r| r.params.kappa_h).unwrap_or(0.0);
        let low = q.kappa_low.unwrap_or(base);
        let high = q.kappa_high.unwrap_or(DEFAULT_Q_SWITCH_CONTRAST * low);
        if !(low >= 0.0) {
            report.violation("qswitch.kappa_low", "must be ≥ 0");
        }
        if !(high > low) {
            report.violation("qswitch.kappa_high", "must exceed kappa_low");
        }
        for (key, t) in [("qswitch.hold_time", q.hold_time), ("qswitch.dump_time", q.dump_time)] {
            if let Some(t) = t {
                if !(t > 0.0) {
                    report.violation(key, "must be positive");
                }
            }
        }
        if q.hold_time.is_none() && q.g_values.iter().any(|&g| !(g > 0.0)) {
            report.violation("qswitch.G_h", "default hold time needs every G_h > 0");
        }
    }
}
