//! Experiment configuration files (TOML).
//!
//! Every error carries the dotted key path of the offending entry. Unknown
//! keys are rejected so that typos do not silently fall back to defaults.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroUsize;

use serde::Serialize;
use toml::{Table, Value};

use crate::error::Error;
use crate::liouvillian::{Frame, StepControl};
use crate::magnonics::{
    coupling_per_field, derive_effective_params, EffectiveParams, Lattice, LatticeKind, PhysicalConfig,
};
use crate::protocols::{logspace, SweepParam};

use super::quantity::{parse_quantity, Dim};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

type CfgResult<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Params,
    Dispersion,
    Cool,
    Steady,
    Sweep,
    Qswitch,
}

impl RunMode {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "params" => RunMode::Params,
            "dispersion" => RunMode::Dispersion,
            "cool" => RunMode::Cool,
            "steady" => RunMode::Steady,
            "sweep" => RunMode::Sweep,
            "qswitch" => RunMode::Qswitch,
            _ => return None,
        })
    }
}

/// One input as written and as normalized.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalizedInput {
    pub key: String,
    pub raw: String,
    pub si: f64,
    pub si_unit: &'static str,
}

/// Direct values for [`EffectiveParams`] fields.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub omega_0: Option<f64>,
    pub detuning: Option<f64>,
    pub g_h: Option<f64>,
    pub kappa_0: Option<f64>,
    pub kappa_h: Option<f64>,
    pub n_th: Option<f64>,
}

const OVERRIDE_KEYS: [(&str, Dim); 6] = [
    ("omega_0", Dim::Rate),
    ("detuning", Dim::Rate),
    ("G_h", Dim::Rate),
    ("kappa_0", Dim::Rate),
    ("kappa_h", Dim::Rate),
    ("n_th", Dim::Dimensionless),
];

impl Overrides {
    fn slot(&mut self, key: &str) -> &mut Option<f64> {
        match key {
            "omega_0" => &mut self.omega_0,
            "detuning" => &mut self.detuning,
            "G_h" => &mut self.g_h,
            "kappa_0" => &mut self.kappa_0,
            "kappa_h" => &mut self.kappa_h,
            _ => &mut self.n_th,
        }
    }

    fn get(&self, key: &str) -> Option<f64> {
        let mut copy = *self;
        *copy.slot(key)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub label: String,
    pub overrides: Overrides,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalInputs {
    pub config: PhysicalConfig,
    /// Occupation at which the four-magnon rate is evaluated.
    pub n_0_ref: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxisSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QSwitchSpec {
    pub g_values: Vec<f64>,
    pub kappa_low: Option<f64>,
    pub kappa_high: Option<f64>,
    pub hold_time: Option<f64>,
    pub dump_time: Option<f64>,
    pub cycles: NonZeroUsize,
}

pub const DEFAULT_Q_SWITCH_CYCLES: usize = 20;
/// κ_high / κ_low when `kappa_high` is not given.
pub const DEFAULT_Q_SWITCH_CONTRAST: f64 = 100.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionSpec {
    pub direction: [f64; 3],
    pub k_max: Option<f64>,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: RunMode,
    pub dim_magnon: usize,
    pub dim_photon: usize,
    pub physical: Option<PhysicalInputs>,
    pub overrides: Overrides,
    pub t_end: Option<f64>,
    pub samples: usize,
    pub variants: Vec<Variant>,
    pub sweep_axes: Vec<AxisSpec>,
    pub qswitch: Option<QSwitchSpec>,
    pub dispersion: Option<DispersionSpec>,
    pub control: StepControl,
    pub frame: Frame,
    pub inputs: Vec<NormalizedInput>,
}

pub const DEFAULT_DIM: usize = 12;
pub const DEFAULT_SAMPLES: usize = 401;

/// Where a resolved parameter came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    Derived,
    Override,
    Variant,
    /// Swept; the base value is the first point of the axis.
    Axis,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub label: Option<String>,
    pub params: EffectiveParams,
    pub sources: BTreeMap<&'static str, Source>,
    /// G_h per pump field (rad/s per V/m), when physical inputs exist.
    pub coupling_per_field: Option<f64>,
}

struct Node<'a> {
    path: String,
    table: &'a Table,
    seen: RefCell<BTreeSet<String>>,
}

impl<'a> Node<'a> {
    fn new(path: String, table: &'a Table) -> Self {
        Node {
            path,
            table,
            seen: RefCell::new(BTreeSet::new()),
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn get(&self, k: &str) -> Option<&'a Value> {
        self.seen.borrow_mut().insert(k.to_string());
        self.table.get(k)
    }

    fn err(&self, k: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::new(self.key(k), msg)
    }

    fn quantity(&self, k: &str, dim: Dim, log: &mut Vec<NormalizedInput>) -> CfgResult<Option<f64>> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => quantity_value(&self.key(k), v, dim, log).map(Some),
        }
    }

    fn required(&self, k: &str, dim: Dim, log: &mut Vec<NormalizedInput>) -> CfgResult<f64> {
        self.quantity(k, dim, log)?
            .ok_or_else(|| self.err(k, "missing required key"))
    }

    fn string(&self, k: &str) -> CfgResult<Option<&'a str>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(self.err(k, "expected a string")),
        }
    }

    fn count(&self, k: &str) -> CfgResult<Option<usize>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(self.err(k, "expected a non-negative integer")),
        }
    }

    fn table(&self, k: &str) -> CfgResult<Option<Node<'a>>> {
        match self.get(k) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Node::new(self.key(k), t))),
            Some(_) => Err(self.err(k, "expected a table")),
        }
    }

    fn tables(&self, k: &str) -> CfgResult<Vec<Node<'a>>> {
        match self.get(k) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Table(t) => Ok(Node::new(format!("{}[{i}]", self.key(k)), t)),
                    _ => Err(ConfigError::new(format!("{}[{i}]", self.key(k)), "expected a table")),
                })
                .collect(),
            Some(_) => Err(self.err(k, "expected an array of tables")),
        }
    }

    fn finish(&self) -> CfgResult<()> {
        let seen = self.seen.borrow();
        match self.table.keys().find(|k| !seen.contains(k.as_str())) {
            Some(k) => Err(self.err(k, "unknown key")),
            None => Ok(()),
        }
    }
}

fn quantity_value(path: &str, v: &Value, dim: Dim, log: &mut Vec<NormalizedInput>) -> CfgResult<f64> {
    let (raw, si) = match v {
        Value::Float(x) => (x.to_string(), *x),
        Value::Integer(i) => (i.to_string(), *i as f64),
        Value::String(s) => (s.clone(), parse_quantity(s, dim).map_err(|m| ConfigError::new(path, m))?),
        _ => return Err(ConfigError::new(path, "expected a number or a \"<number> <unit>\" string")),
    };
    if !si.is_finite() {
        return Err(ConfigError::new(path, "must be finite"));
    }
    log.push(NormalizedInput {
        key: path.to_string(),
        raw,
        si,
        si_unit: dim.si_unit(),
    });
    Ok(si)
}

fn read_overrides(node: &Node<'_>, log: &mut Vec<NormalizedInput>) -> CfgResult<Overrides> {
    let mut o = Overrides::default();
    for (k, dim) in OVERRIDE_KEYS {
        *o.slot(k) = node.quantity(k, dim, log)?;
    }
    Ok(o)
}

fn read_physical(node: &Node<'_>, log: &mut Vec<NormalizedInput>) -> CfgResult<PhysicalInputs> {
    let lattice_node = node
        .table("lattice")?
        .ok_or_else(|| node.err("lattice", "missing required table"))?;
    let kind = match lattice_node.string("kind")? {
        Some("fcc") => LatticeKind::Fcc,
        Some("simple_cubic") | Some("sc") => LatticeKind::SimpleCubic,
        Some(other) => return Err(lattice_node.err("kind", format!("unknown lattice `{other}`"))),
        None => return Err(lattice_node.err("kind", "missing required key")),
    };
    let constant = lattice_node.required("constant", Dim::Length, log)?;
    lattice_node.finish()?;

    let config = PhysicalConfig {
        gamma_n: node.required("gamma_n", Dim::Gyromagnetic, log)?,
        b_field: node.required("B_field", Dim::MagneticField, log)?,
        j_exchange: node.required("J_exchange", Dim::Rate, log)?,
        spin_i: node.required("spin_I", Dim::Dimensionless, log)?,
        lattice: Lattice { kind, constant },
        rho_n: node.required("rho_n", Dim::Density, log)?,
        g_onq: node.required("g_onq", Dim::OnqResponse, log)?,
        e_pump: node.required("E_pump", Dim::ElectricField, log)?,
        omega_h: node.required("omega_h", Dim::Rate, log)?,
        q_h: node.required("Q_h", Dim::Dimensionless, log)?,
        temperature: node.required("temperature", Dim::Temperature, log)?,
        n_spins: node.quantity("N_spins", Dim::Dimensionless, log)?,
        v_h: node.quantity("V_h", Dim::Volume, log)?,
    };
    let n_0_ref = node.quantity("n_0_ref", Dim::Dimensionless, log)?;
    node.finish()?;
    Ok(PhysicalInputs { config, n_0_ref })
}

fn read_axis_values(node: &Node<'_>, dim: Dim, log: &mut Vec<NormalizedInput>) -> CfgResult<Vec<f64>> {
    if let Some(v) = node.get("values") {
        let path = node.key("values");
        let items = match v {
            Value::Array(a) => a,
            _ => return Err(ConfigError::new(path, "expected an array")),
        };
        let values = items
            .iter()
            .enumerate()
            .map(|(i, x)| quantity_value(&format!("{path}[{i}]"), x, dim, log))
            .collect::<CfgResult<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(ConfigError::new(path, "must not be empty"));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConfigError::new(path, "must be strictly increasing"));
        }
        for k in ["from", "to", "points", "spacing"] {
            if node.table.contains_key(k) {
                return Err(node.err(k, "cannot be combined with `values`"));
            }
        }
        return Ok(values);
    }
    let from = node.required("from", dim, log)?;
    let to = node.required("to", dim, log)?;
    let points = node
        .count("points")?
        .ok_or_else(|| node.err("points", "missing required key"))?;
    if points == 0 {
        return Err(node.err("points", "must be at least 1"));
    }
    if points > 1 && !(to > from) {
        return Err(node.err("to", "must exceed `from`"));
    }
    match node.string("spacing")?.unwrap_or("log") {
        "log" => logspace(from, to, points).map_err(|e| node.err("from", e.to_string())),
        "linear" => Ok(if points == 1 {
            vec![from]
        } else {
            (0..points)
                .map(|k| from + (to - from) * k as f64 / (points - 1) as f64)
                .collect()
        }),
        other => Err(node.err("spacing", format!("expected `log` or `linear`, got `{other}`"))),
    }
}

fn sweep_dim(p: SweepParam) -> Dim {
    match p {
        SweepParam::NTh => Dim::Dimensionless,
        _ => Dim::Rate,
    }
}

impl ExperimentConfig {
    /// Parses a configuration from TOML text. `default_name` is used when the
    /// file has no `name` key.
    pub fn parse(text: &str, default_name: &str) -> CfgResult<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("", format!("invalid TOML: {}", e.message())))?;
        let root = Node::new(String::new(), &table);
        let mut log = Vec::new();

        let name = root.string("name")?.unwrap_or(default_name).to_string();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(root.err("name", "must be a non-empty file stem"));
        }
        let mode = match root.string("mode")? {
            Some(m) => RunMode::parse(m).ok_or_else(|| {
                root.err(
                    "mode",
                    format!("unknown mode `{m}` (expected params, dispersion, cool, steady, sweep or qswitch)"),
                )
            })?,
            None => return Err(root.err("mode", "missing required key")),
        };

        let (mut dim_magnon, mut dim_photon) = (DEFAULT_DIM, DEFAULT_DIM);
        if let Some(space) = root.table("space")? {
            dim_magnon = space.count("dim_magnon")?.unwrap_or(DEFAULT_DIM);
            dim_photon = space.count("dim_photon")?.unwrap_or(DEFAULT_DIM);
            space.finish()?;
        }

        let physical = match root.table("physical")? {
            Some(node) => Some(read_physical(&node, &mut log)?),
            None => None,
        };
        let overrides = match root.table("overrides")? {
            Some(node) => {
                let o = read_overrides(&node, &mut log)?;
                node.finish()?;
                o
            }
            None => Overrides::default(),
        };

        let (mut t_end, mut samples) = (None, DEFAULT_SAMPLES);
        if let Some(time) = root.table("time")? {
            t_end = time.quantity("t_end", Dim::Time, &mut log)?;
            samples = time.count("samples")?.unwrap_or(DEFAULT_SAMPLES);
            if samples < 2 {
                return Err(time.err("samples", "need at least 2"));
            }
            time.finish()?;
        }

        let mut variants = Vec::new();
        for node in root.tables("variants")? {
            let label = node
                .string("label")?
                .ok_or_else(|| node.err("label", "missing required key"))?
                .to_string();
            if label.is_empty() || label.contains(['/', '\\', ',']) {
                return Err(node.err("label", "must be a non-empty plain name"));
            }
            if variants.iter().any(|v: &Variant| v.label == label) {
                return Err(node.err("label", format!("duplicate label `{label}`")));
            }
            let o = read_overrides(&node, &mut log)?;
            node.finish()?;
            variants.push(Variant { label, overrides: o });
        }

        let mut sweep_axes = Vec::new();
        if let Some(sweep) = root.table("sweep")? {
            for node in sweep.tables("axes")? {
                let name = node
                    .string("param")?
                    .ok_or_else(|| node.err("param", "missing required key"))?;
                let param = SweepParam::parse(name)
                    .ok_or_else(|| node.err("param", format!("cannot sweep `{name}`")))?;
                let values = read_axis_values(&node, sweep_dim(param), &mut log)?;
                node.finish()?;
                if sweep_axes.iter().any(|a: &AxisSpec| a.param == param) {
                    return Err(node.err("param", format!("`{name}` swept twice")));
                }
                sweep_axes.push(AxisSpec { param, values });
            }
            if sweep_axes.len() > crate::protocols::MAX_SWEEP_AXES {
                return Err(sweep.err("axes", "at most 3 axes"));
            }
            sweep.finish()?;
        }

        let qswitch = match root.table("qswitch")? {
            Some(node) => {
                let g_node = node
                    .table("G_h")?
                    .ok_or_else(|| node.err("G_h", "missing required table"))?;
                let g_values = read_axis_values(&g_node, Dim::Rate, &mut log)?;
                g_node.finish()?;
                let cycles = node.count("cycles")?.unwrap_or(DEFAULT_Q_SWITCH_CYCLES);
                let spec = QSwitchSpec {
                    g_values,
                    kappa_low: node.quantity("kappa_low", Dim::Rate, &mut log)?,
                    kappa_high: node.quantity("kappa_high", Dim::Rate, &mut log)?,
                    hold_time: node.quantity("hold_time", Dim::Time, &mut log)?,
                    dump_time: node.quantity("dump_time", Dim::Time, &mut log)?,
                    cycles: NonZeroUsize::new(cycles).ok_or_else(|| node.err("cycles", "must be at least 1"))?,
                };
                node.finish()?;
                Some(spec)
            }
            None => None,
        };

        let dispersion = match root.table("dispersion")? {
            Some(node) => {
                let direction = match node.get("direction") {
                    None => [1.0, 0.0, 0.0],
                    Some(Value::Array(a)) if a.len() == 3 => {
                        let mut d = [0.0; 3];
                        for (i, x) in a.iter().enumerate() {
                            d[i] = match x {
                                Value::Float(f) => *f,
                                Value::Integer(n) => *n as f64,
                                _ => return Err(node.err("direction", "expected three numbers")),
                            };
                        }
                        d
                    }
                    Some(_) => return Err(node.err("direction", "expected three numbers")),
                };
                if direction.iter().all(|&x| x == 0.0) || direction.iter().any(|x| !x.is_finite()) {
                    return Err(node.err("direction", "must be a finite nonzero vector"));
                }
                let spec = DispersionSpec {
                    direction,
                    k_max: node.quantity("k_max", Dim::Wavenumber, &mut log)?,
                    points: node.count("points")?.unwrap_or(101),
                };
                if spec.points < 2 {
                    return Err(node.err("points", "need at least 2"));
                }
                node.finish()?;
                Some(spec)
            }
            None => None,
        };

        let mut control = StepControl::default();
        let mut frame = Frame::Shifted;
        if let Some(node) = root.table("solver")? {
            if let Some(v) = node.quantity("rtol", Dim::Dimensionless, &mut log)? {
                control.rtol = v;
            }
            if let Some(v) = node.quantity("atol", Dim::Dimensionless, &mut log)? {
                control.atol = v;
            }
            if let Some(v) = node.count("max_steps")? {
                control.max_steps = v;
            }
            frame = match node.string("frame")? {
                None | Some("shifted") => Frame::Shifted,
                Some("pump") => Frame::Pump,
                Some(other) => return Err(node.err("frame", format!("expected `shifted` or `pump`, got `{other}`"))),
            };
            if !(control.rtol > 0.0) || !(control.atol > 0.0) {
                return Err(node.err("rtol", "tolerances must be positive"));
            }
            node.finish()?;
        }
        root.finish()?;

        let cfg = ExperimentConfig {
            name,
            mode,
            dim_magnon,
            dim_photon,
            physical,
            overrides,
            t_end,
            samples,
            variants,
            sweep_axes,
            qswitch,
            dispersion,
            control,
            frame,
            inputs: log,
        };
        cfg.check_mode_sections()?;
        Ok(cfg)
    }

    fn check_mode_sections(&self) -> CfgResult<()> {
        match self.mode {
            RunMode::Sweep if self.sweep_axes.is_empty() => {
                Err(ConfigError::new("sweep.axes", "sweep mode needs at least one axis"))
            }
            RunMode::Qswitch if self.qswitch.is_none() => {
                Err(ConfigError::new("qswitch", "qswitch mode needs a [qswitch] table"))
            }
            RunMode::Dispersion if self.physical.is_none() => {
                Err(ConfigError::new("physical", "dispersion mode needs a [physical] table"))
            }
            _ => Ok(()),
        }
    }

    /// Resolved parameters for every run: one per variant, or a single
    /// unlabelled run when there are none.
    pub fn resolve_all(&self) -> CfgResult<Vec<Resolved>> {
        if self.variants.is_empty() {
            Ok(vec![self.resolve(None)?])
        } else {
            self.variants.iter().map(|v| self.resolve(Some(v))).collect()
        }
    }

    fn axis_start(&self, key: &str) -> Option<f64> {
        match self.mode {
            RunMode::Sweep => self
                .sweep_axes
                .iter()
                .find(|a| a.param.name() == key)
                .map(|a| a.values[0]),
            RunMode::Qswitch if key == "G_h" => self.qswitch.as_ref().map(|q| q.g_values[0]),
            _ => None,
        }
    }

    /// Precedence: variant value, then `[overrides]`, then values derived
    /// from `[physical]`, then the first point of a sweep axis, then zero for
    /// ω₀ and Δ.
    pub fn resolve(&self, variant: Option<&Variant>) -> CfgResult<Resolved> {
        let (derived, per_field) = match &self.physical {
            Some(p) => {
                let params = derive_effective_params(&p.config, p.n_0_ref).map_err(physical_error)?;
                (Some(params), Some(coupling_per_field(&p.config)))
            }
            None => (None, None),
        };
        let mut sources = BTreeMap::new();
        let mut value = |key: &'static str, derived_value: Option<f64>| -> CfgResult<f64> {
            if let Some(v) = variant.and_then(|v| v.overrides.get(key)) {
                sources.insert(key, Source::Variant);
                return Ok(v);
            }
            if let Some(v) = self.overrides.get(key) {
                sources.insert(key, Source::Override);
                return Ok(v);
            }
            if let Some(v) = derived_value {
                sources.insert(key, Source::Derived);
                return Ok(v);
            }
            if let Some(v) = self.axis_start(key) {
                sources.insert(key, Source::Axis);
                return Ok(v);
            }
            if matches!(key, "omega_0" | "detuning") {
                sources.insert(key, Source::Default);
                return Ok(0.0);
            }
            Err(ConfigError::new(
                format!("overrides.{key}"),
                "required when there is no [physical] table",
            ))
        };
        let params = EffectiveParams {
            omega_0: value("omega_0", derived.map(|d| d.omega_0))?,
            detuning: value("detuning", derived.map(|d| d.detuning))?,
            g_h: value("G_h", derived.map(|d| d.g_h))?,
            kappa_0: value("kappa_0", derived.map(|d| d.kappa_0))?,
            kappa_h: value("kappa_h", derived.map(|d| d.kappa_h))?,
            n_th: value("n_th", derived.map(|d| d.n_th))?,
        };
        Ok(Resolved {
            label: variant.map(|v| v.label.clone()),
            params,
            sources,
            coupling_per_field: per_field,
        })
    }
}

/// Maps a derivation error onto the `physical` key that caused it.
pub fn physical_error(e: Error) -> ConfigError {
    match e {
        Error::InvalidArgument { name, reason } => ConfigError::new(format!("physical.{name}"), reason),
        other => ConfigError::new("physical", other.to_string()),
    }
}
