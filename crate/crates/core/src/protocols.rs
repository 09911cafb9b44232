//! Cooling experiments on top of the two-mode master equation.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{thermal_entropy, DensityMatrix, FockSpace, Mode};
use crate::liouvillian::{
    build_generator_in, propagate_with, steady_state, Frame, PropagateOptions, RateSchedule,
    StepControl, TrajectoryRecord, CAVITY_DECAY,
};
use crate::magnonics::EffectiveParams;

fn check_rate(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite and ≥ 0, got {v}")));
    }
    Ok(())
}

/// Closed-form steady magnon population in the weak-coupling limit,
/// `n_th κ₀κ_h / (4G² + κ₀κ_h)`.
pub fn weak_coupling_steady(n_th: f64, g_h: f64, kappa_0: f64, kappa_h: f64) -> Result<f64> {
    check_rate("n_th", n_th)?;
    check_rate("G_h", g_h)?;
    check_rate("kappa_0", kappa_0)?;
    check_rate("kappa_h", kappa_h)?;
    let den = 4.0 * g_h * g_h + kappa_0 * kappa_h;
    if den == 0.0 {
        return Err(Error::invalid("kappa_0", "4G² + κ₀κ_h vanishes"));
    }
    Ok(n_th * kappa_0 * kappa_h / den)
}

/// Limit of continuous cooling set by back-heating, `n_th κ₀/κ_h`.
pub fn backheating_floor(n_th: f64, kappa_0: f64, kappa_h: f64) -> Result<f64> {
    check_rate("n_th", n_th)?;
    check_rate("kappa_0", kappa_0)?;
    check_rate("kappa_h", kappa_h)?;
    if kappa_h == 0.0 {
        return Err(Error::invalid("kappa_h", "must be > 0"));
    }
    Ok(n_th * kappa_0 / kappa_h)
}

#[derive(Clone, Debug)]
pub struct CoolingOutcome {
    pub n0_steady: f64,
    /// Entropy of the reduced magnon state over the same window (nats).
    pub entropy_steady: f64,
    /// Thermal entropy at `n0_steady`.
    pub entropy_thermal_ref: f64,
    /// Dominant oscillation of n₀(t) (rad/s), strong coupling only.
    pub swap_frequency: Option<f64>,
    /// Decay rate of the excitation envelope (rad/s), strong coupling only.
    pub envelope_rate: Option<f64>,
    /// Set when the envelope was requested but fewer than 3 usable maxima
    /// were found.
    pub envelope_fit_failed: bool,
    pub trajectory: TrajectoryRecord,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingOptions {
    /// Number of uniformly spaced samples, both ends included.
    pub samples: usize,
    pub frame: Frame,
    pub control: StepControl,
}

impl Default for CoolingOptions {
    fn default() -> Self {
        CoolingOptions {
            samples: 401,
            frame: Frame::Shifted,
            control: StepControl::default(),
        }
    }
}

/// Fraction of the grid averaged for steady-state metrics.
pub const TAIL_FRACTION: f64 = 0.1;

pub fn uniform_grid(t_end: f64, samples: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::invalid("t_end", format!("must be finite and > 0, got {t_end}")));
    }
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least 2"));
    }
    let last = (samples - 1) as f64;
    Ok((0..samples).map(|k| t_end * k as f64 / last).collect())
}

pub fn initial_state(params: &EffectiveParams, space: FockSpace) -> Result<DensityMatrix> {
    DensityMatrix::thermal(space, params.n_th, 0.0)
}

pub fn run_cooling(params: &EffectiveParams, space: FockSpace, t_end: f64) -> Result<CoolingOutcome> {
    run_cooling_with(params, space, t_end, &CoolingOptions::default())
}

/// Continuous cooling from a thermal magnon and an empty cavity.
pub fn run_cooling_with(
    params: &EffectiveParams,
    space: FockSpace,
    t_end: f64,
    opts: &CoolingOptions,
) -> Result<CoolingOutcome> {
    let grid = uniform_grid(t_end, opts.samples)?;
    let gen = build_generator_in(params, space, opts.frame)?;
    let rho0 = initial_state(params, space)?;
    let traj = propagate_with(&gen, &rho0, &grid, &PropagateOptions { control: opts.control })?;

    let n0_steady = tail_mean(&traj.n_magnon);
    let entropy_steady = tail_mean(&traj.entropy_magnon);
    let strong = params.kappa_h <= params.g_h && params.g_h > 0.0;
    let (swap_frequency, envelope_rate) = if strong {
        let detrended: Vec<f64> = traj
            .n_magnon
            .iter()
            .zip(&traj.n_photon)
            .map(|(a, b)| a - 0.5 * (a + b))
            .collect();
        let total: Vec<f64> = traj.n_magnon.iter().zip(&traj.n_photon).map(|(a, b)| a + b).collect();
        (
            dominant_frequency(&traj.times, &detrended),
            envelope_fit(&traj.times, &traj.n_magnon, &total),
        )
    } else {
        (None, None)
    };

    Ok(CoolingOutcome {
        n0_steady,
        entropy_steady,
        entropy_thermal_ref: thermal_entropy(n0_steady.max(0.0))?,
        swap_frequency,
        envelope_rate,
        envelope_fit_failed: strong && envelope_rate.is_none(),
        trajectory: traj,
    })
}

fn tail_mean(v: &[f64]) -> f64 {
    let k = ((v.len() as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, v.len());
    v[v.len() - k..].iter().sum::<f64>() / k as f64
}

/// Angular frequency of the strongest nonzero spectral peak of `y`.
///
/// Non-uniform samples are resampled linearly onto a uniform grid. The coarse
/// DFT peak is refined by a dense scan of the discrete-time transform within
/// one bin on either side.
pub fn dominant_frequency(times: &[f64], y: &[f64]) -> Option<f64> {
    let n = times.len();
    if n < 4 || y.len() != n {
        return None;
    }
    let span = times[n - 1] - times[0];
    if !(span > 0.0) {
        return None;
    }
    let dt = span / (n - 1) as f64;
    let uniform: Vec<f64> = (0..n)
        .map(|k| interpolate(times, y, times[0] + k as f64 * dt))
        .collect();
    let mean = uniform.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = uniform.iter().map(|v| v - mean).collect();

    // power at angular frequency ω
    let power = |w: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in centered.iter().enumerate() {
            let ph = w * k as f64 * dt;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        re * re + im * im
    };
    let bin = 2.0 * PI / (n as f64 * dt);
    let (best_k, best_p) = (1..n / 2)
        .map(|k| (k, power(k as f64 * bin)))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if best_k == 0 || !(best_p > 0.0) {
        return None;
    }
    let lo = (best_k as f64 - 1.0) * bin;
    let steps = 400;
    let (w, _) = (0..=steps)
        .map(|j| {
            let w = lo + 2.0 * bin * j as f64 / steps as f64;
            (w, power(w))
        })
        .fold((0.0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    (w > 0.0).then_some(w)
}

fn interpolate(times: &[f64], y: &[f64], t: f64) -> f64 {
    let i = times.partition_point(|&s| s <= t);
    if i == 0 {
        return y[0];
    }
    if i >= times.len() {
        return y[times.len() - 1];
    }
    let (t0, t1) = (times[i - 1], times[i]);
    let f = (t - t0) / (t1 - t0);
    y[i - 1] + f * (y[i] - y[i - 1])
}

/// Decay rate of the total excitation `total` sampled at the local maxima
/// of `n0`, relative to its long-time floor. Needs at least three maxima
/// clearly above the floor.
pub fn envelope_fit(times: &[f64], n0: &[f64], total: &[f64]) -> Option<f64> {
    let n = times.len();
    if n < 3 || n0.len() != n || total.len() != n {
        return None;
    }
    let floor = tail_mean(total).max(0.0);
    let threshold = floor.max(1e-12);
    let mut pts = Vec::new();
    for i in 1..n - 1 {
        if n0[i] > n0[i - 1] && n0[i] >= n0[i + 1] {
            let excess = total[i] - floor;
            if excess > threshold {
                pts.push((times[i], excess.ln()));
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let tx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ty = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tx) * (p.1 - ty)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tx).powi(2)).sum();
    let rate = -sxy / sxx;
    (rate.is_finite() && rate > 0.0).then_some(rate)
}

/// Alternating low-loss transfer and high-loss dump of the cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSwitchSchedule {
    kappa_low: f64,
    kappa_high: f64,
    hold_time: f64,
    dump_time: f64,
    cycles: NonZeroUsize,
}

impl QSwitchSchedule {
    pub fn new(
        kappa_low: f64,
        kappa_high: f64,
        hold_time: f64,
        dump_time: f64,
        cycles: NonZeroUsize,
    ) -> Result<Self> {
        check_rate("kappa_low", kappa_low)?;
        check_rate("kappa_high", kappa_high)?;
        if !(kappa_low < kappa_high) {
            return Err(Error::invalid("kappa_high", "must exceed kappa_low"));
        }
        for (name, t) in [("hold_time", hold_time), ("dump_time", dump_time)] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {t}")));
            }
        }
        Ok(QSwitchSchedule {
            kappa_low,
            kappa_high,
            hold_time,
            dump_time,
            cycles,
        })
    }

    /// Hold for half a swap, π/(2G), then dump for 5/κ_high.
    pub fn with_defaults(g_h: f64, kappa_low: f64, kappa_high: f64, cycles: NonZeroUsize) -> Result<Self> {
        if !(g_h > 0.0) || !g_h.is_finite() {
            return Err(Error::invalid("G_h", "default hold time needs G_h > 0"));
        }
        if !(kappa_high > 0.0) {
            return Err(Error::invalid("kappa_high", "must be > 0"));
        }
        Self::new(kappa_low, kappa_high, PI / (2.0 * g_h), 5.0 / kappa_high, cycles)
    }

    pub fn kappa_low(&self) -> f64 {
        self.kappa_low
    }

    pub fn kappa_high(&self) -> f64 {
        self.kappa_high
    }

    pub fn hold_time(&self) -> f64 {
        self.hold_time
    }

    pub fn dump_time(&self) -> f64 {
        self.dump_time
    }

    pub fn cycles(&self) -> NonZeroUsize {
        self.cycles
    }

    pub fn total_time(&self) -> f64 {
        self.boundaries().last().copied().unwrap_or(0.0)
    }

    /// 0, end of first hold, end of first dump, … , end of last dump.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        let mut now = 0.0;
        for _ in 0..self.cycles.get() {
            now += self.hold_time;
            t.push(now);
            now += self.dump_time;
            t.push(now);
        }
        t
    }

    pub fn rate_schedule(&self) -> Result<RateSchedule> {
        let b = self.boundaries();
        let segs = b[..b.len() - 1]
            .iter()
            .enumerate()
            .map(|(k, &t)| (t, if k % 2 == 0 { self.kappa_low } else { self.kappa_high }))
            .collect();
        RateSchedule::new(segs)
    }
}

pub fn run_q_switched(
    params: &EffectiveParams,
    space: FockSpace,
    schedule: &QSwitchSchedule,
) -> Result<CoolingOutcome> {
    run_q_switched_with(params, space, schedule, &CoolingOptions::default())
}

/// Q-switched cooling from the same initial state as [`run_cooling`]. The
/// cavity decay follows `schedule`; `params.kappa_h` is not used. The
/// trajectory is sampled at every switch, and the reported population is
/// the one at the end of the last dump. `opts.samples` is ignored.
pub fn run_q_switched_with(
    params: &EffectiveParams,
    space: FockSpace,
    schedule: &QSwitchSchedule,
    opts: &CoolingOptions,
) -> Result<CoolingOutcome> {
    let mut gen = build_generator_in(params, space, opts.frame)?;
    gen.set_schedule(CAVITY_DECAY, schedule.rate_schedule()?)?;
    let rho0 = initial_state(params, space)?;
    let traj = propagate_with(
        &gen,
        &rho0,
        &schedule.boundaries(),
        &PropagateOptions { control: opts.control },
    )?;
    let n0 = *traj.n_magnon.last().expect("grid is never empty");
    let s = *traj.entropy_magnon.last().expect("grid is never empty");
    Ok(CoolingOutcome {
        n0_steady: n0,
        entropy_steady: s,
        entropy_thermal_ref: thermal_entropy(n0.max(0.0))?,
        swap_frequency: None,
        envelope_rate: None,
        envelope_fit_failed: false,
        trajectory: traj,
    })
}

/// Parameter that a sweep axis varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "G_h")]
    GH,
    #[serde(rename = "kappa_0")]
    Kappa0,
    #[serde(rename = "kappa_h")]
    KappaH,
    #[serde(rename = "n_th")]
    NTh,
    #[serde(rename = "detuning")]
    Detuning,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::GH => "G_h",
            SweepParam::Kappa0 => "kappa_0",
            SweepParam::KappaH => "kappa_h",
            SweepParam::NTh => "n_th",
            SweepParam::Detuning => "detuning",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SweepParam::GH,
            SweepParam::Kappa0,
            SweepParam::KappaH,
            SweepParam::NTh,
            SweepParam::Detuning,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }

    fn apply(self, p: &mut EffectiveParams, v: f64) {
        match self {
            SweepParam::GH => p.g_h = v,
            SweepParam::Kappa0 => p.kappa_0 = v,
            SweepParam::KappaH => p.kappa_h = v,
            SweepParam::NTh => p.n_th = v,
            SweepParam::Detuning => p.detuning = v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    param: SweepParam,
    values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("axis", format!("`{}` has no values", param.name())));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "axis",
                format!("`{}` values must be finite and strictly increasing", param.name()),
            ));
        }
        Ok(SweepAxis { param, values })
    }

    pub fn param(&self) -> SweepParam {
        self.param
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `n` points spaced evenly in log from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > 0.0) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("logspace", "bounds must be finite and > 0"));
    }
    match n {
        0 => Err(Error::invalid("logspace", "need at least one point")),
        1 => Ok(vec![lo]),
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            Ok((0..n)
                .map(|k| {
                    if k == 0 {
                        lo
                    } else if k == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug)]
pub struct SweepPoint {
    /// One value per axis, in axis order.
    pub coords: Vec<f64>,
    pub params: EffectiveParams,
    pub n0: Result<f64>,
    pub closed_form: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<NonZeroUsize>,
}

pub const MAX_SWEEP_AXES: usize = 3;

/// Steady-state population on the Cartesian product of `axes`, first axis
/// varying slowest. Points that fail keep their error and do not stop the
/// sweep.
pub fn sweep_steady(
    base: &EffectiveParams,
    space: FockSpace,
    axes: &[SweepAxis],
    opts: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if axes.len() > MAX_SWEEP_AXES {
        return Err(Error::invalid("axes", format!("at most {MAX_SWEEP_AXES} axes")));
    }
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.param == a.param) {
            return Err(Error::invalid("axes", format!("`{}` appears twice", a.param.name())));
        }
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let point = |flat: usize| -> SweepPoint {
        let mut rem = flat;
        let mut coords = vec![0.0; axes.len()];
        for (k, a) in axes.iter().enumerate().rev() {
            coords[k] = a.values[rem % a.values.len()];
            rem /= a.values.len();
        }
        let mut p = *base;
        for (a, &v) in axes.iter().zip(&coords) {
            a.param.apply(&mut p, v);
        }
        let n0 = build_generator_in(&p, space, Frame::Shifted)
            .and_then(|g| steady_state(&g))
            .map(|rho| rho.population(Mode::Magnon));
        let closed_form = weak_coupling_steady(p.n_th, p.g_h, p.kappa_0, p.kappa_h).ok();
        SweepPoint {
            coords,
            params: p,
            n0,
            closed_form,
        }
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.get());
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    Ok(pool.install(|| (0..total).into_par_iter().map(point).collect()))
}
