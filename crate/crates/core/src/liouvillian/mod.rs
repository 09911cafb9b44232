//! Rotating-frame Hamiltonian, Lindblad generator, time propagation and
//! steady states for the magnon–cavity system.
//!
//! The master equation is
//!
//! ```text
//! dρ/dt = i[ρ, H] + κ_h ξ[b]ρ + κ₀(n_th + 1) ξ[a]ρ + κ₀ n_th ξ[a†]ρ
//! ξ[o]ρ = oρo† − ½(o†oρ + ρo†o)
//! ```

mod band;
mod diagnostics;
mod integrate;
mod propagate;
mod sparse;
mod steady;

pub use diagnostics::{validate_state, StateDiagnostics, TRUNCATION_WARNING_THRESHOLD};
pub use integrate::StepControl;
pub use propagate::{propagate, propagate_with, PropagateOptions, TrajectoryRecord, TRACE_DRIFT_LIMIT};
pub use steady::steady_state;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, max_abs, creation, number, CMatrix, FockSpace, Mode, Operator, C64};
use crate::magnonics::EffectiveParams;

/// Labels of the three channels built by [`build_generator`].
pub const CAVITY_DECAY: &str = "cavity_decay";
pub const MAGNON_LOSS: &str = "magnon_loss";
pub const MAGNON_GAIN: &str = "magnon_gain";

/// Reference frame of the Hamiltonian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Rotating at the pump frequency: H = ω₀a†a + (ω₀ + Δ)b†b + G(b†a + a†b).
    Pump,
    /// Additionally rotating both modes at ω₀: H = Δb†b + G(b†a + a†b).
    /// The dropped term ω₀(a†a + b†b) commutes with H, every jump operator's
    /// dissipator and the observables.
    #[default]
    Shifted,
}

/// Piecewise-constant rate: `segments[k] = (start_time, rate)`, the first
/// starting at t = 0. The last rate holds forever.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSchedule {
    segments: Vec<(f64, f64)>,
}

impl RateSchedule {
    pub fn new(segments: Vec<(f64, f64)>) -> Result<Self> {
        match segments.first() {
            Some(&(t0, _)) if t0 == 0.0 => {}
            _ => return Err(Error::invalid("schedule", "first segment must start at t = 0")),
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::invalid("schedule", "segment starts must be strictly increasing"));
        }
        if segments.iter().any(|&(t, r)| !(r >= 0.0) || !r.is_finite() || !t.is_finite()) {
            return Err(Error::invalid("schedule", "rates must be finite and ≥ 0"));
        }
        Ok(RateSchedule { segments })
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|&(start, _)| start <= t);
        self.segments[idx.saturating_sub(1)].1
    }

    /// Times after 0 at which the rate changes value.
    pub fn switch_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().skip(1).map(|&(t, _)| t)
    }

    pub fn max_rate(&self) -> f64 {
        self.segments.iter().map(|s| s.1).fold(0.0, f64::max)
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }
}

/// One dissipative channel `rate · ξ[jump]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dissipator {
    pub label: String,
    pub rate: f64,
    pub jump: Operator,
    /// Overrides `rate` when present.
    pub schedule: Option<RateSchedule>,
}

impl Dissipator {
    pub fn new(label: impl Into<String>, rate: f64, jump: Operator) -> Self {
        Dissipator {
            label: label.into(),
            rate,
            jump,
            schedule: None,
        }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        match &self.schedule {
            Some(s) => s.rate_at(t),
            None => self.rate,
        }
    }

    /// Whether the channel is ever active.
    pub fn is_active(&self) -> bool {
        match &self.schedule {
            Some(s) => s.max_rate() > 0.0,
            None => self.rate > 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladGenerator {
    space: FockSpace,
    hamiltonian: Operator,
    dissipators: Vec<Dissipator>,
}

impl LindbladGenerator {
    pub fn new(hamiltonian: Operator, dissipators: Vec<Dissipator>) -> Result<Self> {
        let space = hamiltonian.space();
        let scale = max_abs(hamiltonian.matrix()).max(1.0);
        if hamiltonian.hermiticity_defect() > 1e-12 * scale {
            return Err(Error::invalid("hamiltonian", "must be hermitian"));
        }
        for d in &dissipators {
            if d.jump.space() != space {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: d.jump.space().dim(),
                });
            }
            if !(d.rate >= 0.0) || !d.rate.is_finite() {
                return Err(Error::invalid("rate", format!("`{}` rate must be ≥ 0", d.label)));
            }
        }
        Ok(LindbladGenerator {
            space,
            hamiltonian,
            dissipators,
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    pub fn dissipator(&self, label: &str) -> Option<&Dissipator> {
        self.dissipators.iter().find(|d| d.label == label)
    }

    /// Attaches a piecewise-constant schedule to the channel named `label`.
    pub fn set_schedule(&mut self, label: &str, schedule: RateSchedule) -> Result<()> {
        let d = self
            .dissipators
            .iter_mut()
            .find(|d| d.label == label)
            .ok_or_else(|| Error::invalid("label", format!("no dissipator named `{label}`")))?;
        d.schedule = Some(schedule);
        Ok(())
    }

    pub fn is_time_independent(&self) -> bool {
        self.dissipators.iter().all(|d| d.schedule.is_none())
    }

    /// Largest rate any channel reaches.
    pub fn max_rate(&self) -> f64 {
        self.dissipators
            .iter()
            .map(|d| match &d.schedule {
                Some(s) => s.max_rate(),
                None => d.rate,
            })
            .fold(0.0, f64::max)
    }

    /// Sorted, deduplicated switch times of all schedules.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .dissipators
            .iter()
            .filter_map(|d| d.schedule.as_ref())
            .flat_map(|s| s.switch_times())
            .collect();
        t.sort_by(|a, b| a.total_cmp(b));
        t.dedup();
        t
    }

    /// dρ/dt at time `t`, evaluated densely.
    pub fn apply(&self, rho: &CMatrix, t: f64) -> CMatrix {
        let h = self.hamiltonian.matrix();
        let i = C64::new(0.0, 1.0);
        let mut out = (rho * h - h * rho) * i;
        for d in &self.dissipators {
            let rate = d.rate_at(t);
            if rate == 0.0 {
                continue;
            }
            let c = d.jump.matrix();
            let cd = c.adjoint();
            let cdc = &cd * c;
            let term = c * rho * &cd - (&cdc * rho + rho * &cdc) * C64::new(0.5, 0.0);
            out += term * C64::new(rate, 0.0);
        }
        out
    }
}

/// Hamiltonian in the pump frame.
pub fn build_hamiltonian(params: &EffectiveParams, space: FockSpace) -> Operator {
    build_hamiltonian_in(params, space, Frame::Pump)
}

pub fn build_hamiltonian_in(params: &EffectiveParams, space: FockSpace, frame: Frame) -> Operator {
    let a = annihilation(space, Mode::Magnon);
    let b = annihilation(space, Mode::Photon);
    let exchange = &(&b.adjoint() * &a) + &(&a.adjoint() * &b);
    let (w_magnon, w_photon) = match frame {
        Frame::Pump => (params.omega_0, params.omega_0 + params.detuning),
        Frame::Shifted => (0.0, params.detuning),
    };
    let mut h = exchange.scale(C64::new(params.g_h, 0.0));
    if w_magnon != 0.0 {
        h = &h + &number(space, Mode::Magnon).scale(C64::new(w_magnon, 0.0));
    }
    if w_photon != 0.0 {
        h = &h + &number(space, Mode::Photon).scale(C64::new(w_photon, 0.0));
    }
    h
}

/// Generator in the shifted frame.
pub fn build_generator(params: &EffectiveParams, space: FockSpace) -> Result<LindbladGenerator> {
    build_generator_in(params, space, Frame::Shifted)
}

/// The cavity is taken at zero temperature; the magnon bath at `n_th`.
pub fn build_generator_in(
    params: &EffectiveParams,
    space: FockSpace,
    frame: Frame,
) -> Result<LindbladGenerator> {
    params.validate()?;
    let h = build_hamiltonian_in(params, space, frame);
    let dissipators = vec![
        Dissipator::new(CAVITY_DECAY, params.kappa_h, annihilation(space, Mode::Photon)),
        Dissipator::new(
            MAGNON_LOSS,
            params.kappa_0 * (params.n_th + 1.0),
            annihilation(space, Mode::Magnon),
        ),
        Dissipator::new(
            MAGNON_GAIN,
            params.kappa_0 * params.n_th,
            creation(space, Mode::Magnon),
        ),
    ];
    LindbladGenerator::new(h, dissipators)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{hermiticity_defect, trace, DensityMatrix};
    use crate::units::{khz, mhz};

    fn params(g: f64) -> EffectiveParams {
        EffectiveParams {
            omega_0: mhz(7.3),
            detuning: 0.0,
            g_h: g,
            kappa_0: khz(0.1),
            kappa_h: mhz(1.0),
            n_th: 1.0,
        }
    }

    fn eigenvalues(m: &CMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        e
    }

    #[test]
    fn decoupled_hamiltonian_spectrum() {
        let s = FockSpace::new(4, 3).unwrap();
        let p = params(0.0);
        let h = build_hamiltonian(&p, s);
        let mut expected: Vec<f64> = (0..s.dim())
            .map(|i| {
                let (a, b) = s.levels(i);
                p.omega_0 * (a + b) as f64
            })
            .collect();
        expected.sort_by(|a, b| a.total_cmp(b));
        for (e, x) in eigenvalues(h.matrix()).iter().zip(expected) {
            assert!((e - x).abs() < 1e-6 * p.omega_0);
        }
    }

    #[test]
    fn single_excitation_splitting() {
        // 2×2 oracle: in span{|1,0⟩, |0,1⟩} at Δ = 0, H = [[ω₀, G], [G, ω₀]].
        let s = FockSpace::new(3, 3).unwrap();
        let g = khz(10.0);
        let p = params(g);
        let h = build_hamiltonian(&p, s);
        let idx = [s.index(1, 0), s.index(0, 1)];
        let block = CMatrix::from_fn(2, 2, |r, c| h.matrix()[(idx[r], idx[c])]);
        let e = eigenvalues(&block);
        assert!(((e[1] - e[0]) - 2.0 * g).abs() < 1e-9 * g);
        assert!((block[(0, 1)].re - g).abs() < 1e-12 * g);
    }

    #[test]
    fn hamiltonians_are_hermitian() {
        let s = FockSpace::new(5, 4).unwrap();
        let mut p = params(mhz(1.0));
        p.detuning = khz(3.0);
        for frame in [Frame::Pump, Frame::Shifted] {
            assert!(build_hamiltonian_in(&p, s, frame).hermiticity_defect() < 1e-12);
        }
    }

    #[test]
    fn zero_temperature_drops_gain_channel() {
        let s = FockSpace::new(3, 3).unwrap();
        let mut p = params(khz(10.0));
        p.n_th = 0.0;
        let gen = build_generator(&p, s).unwrap();
        let active: Vec<&str> = gen
            .dissipators()
            .iter()
            .filter(|d| d.rate > 0.0)
            .map(|d| d.label.as_str())
            .collect();
        assert_eq!(active, vec![CAVITY_DECAY, MAGNON_LOSS]);
    }

    #[test]
    fn generator_is_traceless_and_hermiticity_preserving() {
        let s = FockSpace::new(4, 4).unwrap();
        let gen = build_generator_in(&params(mhz(1.0)), s, Frame::Pump).unwrap();
        let mixed = CMatrix::identity(16, 16) * C64::new(1.0 / 16.0, 0.0);
        let out = gen.apply(&mixed, 0.0);
        assert!(trace(&out).norm() < 1e-6);
        let rho = DensityMatrix::thermal(s, 1.0, 0.3).unwrap();
        let out = gen.apply(rho.matrix(), 0.0);
        assert!(trace(&out).norm() < 1e-9 * gen.max_rate());
        assert!(hermiticity_defect(&out) < 1e-9 * gen.max_rate());
    }

    #[test]
    fn rejects_mismatched_jump() {
        let s = FockSpace::new(3, 3).unwrap();
        let other = FockSpace::new(2, 3).unwrap();
        let h = build_hamiltonian(&params(0.0), s);
        let d = Dissipator::new("x", 1.0, annihilation(other, Mode::Magnon));
        assert!(LindbladGenerator::new(h, vec![d]).is_err());
    }

    #[test]
    fn schedule_lookup() {
        let s = RateSchedule::new(vec![(0.0, 1.0), (2.0, 5.0), (3.0, 0.5)]).unwrap();
        assert_eq!(s.rate_at(0.0), 1.0);
        assert_eq!(s.rate_at(1.999), 1.0);
        assert_eq!(s.rate_at(2.0), 5.0);
        assert_eq!(s.rate_at(10.0), 0.5);
        assert_eq!(s.switch_times().collect::<Vec<_>>(), vec![2.0, 3.0]);
        assert!(RateSchedule::new(vec![(1.0, 1.0)]).is_err());
        assert!(RateSchedule::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(RateSchedule::new(vec![(0.0, -1.0)]).is_err());
    }
}
