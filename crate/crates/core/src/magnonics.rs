//! From physical inputs to master-equation parameters.
//!
//! Magnon dispersion of a nearest-neighbour Heisenberg ensemble, four-magnon
//! relaxation, thermal occupation, the cavity zero-point field and the
//! collective ONQ coupling. All rates are angular (rad/s).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{BOHR_RADIUS, EPSILON_0, E_CHARGE, HBAR, K_B};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeKind {
    SimpleCubic,
    Fcc,
}

/// Cubic Bravais lattice with conventional lattice constant `constant` (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub kind: LatticeKind,
    pub constant: f64,
}

impl Lattice {
    pub fn coordination_number(&self) -> usize {
        match self.kind {
            LatticeKind::SimpleCubic => 6,
            LatticeKind::Fcc => 12,
        }
    }

    /// Nearest-neighbour displacement vectors (m).
    pub fn neighbors(&self) -> Vec<[f64; 3]> {
        let a = self.constant;
        match self.kind {
            LatticeKind::SimpleCubic => {
                let mut v = Vec::with_capacity(6);
                for axis in 0..3 {
                    for sign in [1.0, -1.0] {
                        let mut d = [0.0; 3];
                        d[axis] = sign * a;
                        v.push(d);
                    }
                }
                v
            }
            LatticeKind::Fcc => {
                let h = a / 2.0;
                let mut v = Vec::with_capacity(12);
                for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                    for si in [1.0, -1.0] {
                        for sj in [1.0, -1.0] {
                            let mut d = [0.0; 3];
                            d[i] = si * h;
                            d[j] = sj * h;
                            v.push(d);
                        }
                    }
                }
                v
            }
        }
    }

    /// Z(k) = Σ_δ cos(k·δ).
    pub fn structure_factor(&self, k: [f64; 3]) -> f64 {
        self.neighbors()
            .iter()
            .map(|d| (k[0] * d[0] + k[1] * d[1] + k[2] * d[2]).cos())
            .sum()
    }
}

/// Raw physical inputs, SI with angular rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Nuclear gyromagnetic ratio (rad·s⁻¹·T⁻¹).
    pub gamma_n: f64,
    /// Static magnetic field (T).
    pub b_field: f64,
    /// Nearest-neighbour Heisenberg coupling over ħ (rad/s).
    pub j_exchange: f64,
    /// Nuclear spin quantum number.
    pub spin_i: f64,
    pub lattice: Lattice,
    /// Nuclear number density (m⁻³).
    pub rho_n: f64,
    /// ONQ response (rad·s⁻¹ per (V/m)²).
    pub g_onq: f64,
    /// Pump field amplitude (V/m).
    pub e_pump: f64,
    /// Cavity photon energy over ħ (rad/s).
    pub omega_h: f64,
    pub q_h: f64,
    /// Bath temperature (K).
    pub temperature: f64,
    pub n_spins: Option<f64>,
    /// Cavity mode volume (m³).
    pub v_h: Option<f64>,
}

impl PhysicalConfig {
    /// Spin density entering the collective coupling: `N/V_h` when both are
    /// given, otherwise `rho_n`.
    pub fn spin_density(&self) -> f64 {
        match (self.n_spins, self.v_h) {
            (Some(n), Some(v)) => n / v,
            _ => self.rho_n,
        }
    }

    /// Checks positivity of every magnitude and the spin quantum number.
    /// Returns the dotted field name of the first violation.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let positive = [
            ("gamma_n", self.gamma_n),
            ("B_field", self.b_field),
            ("J_exchange", self.j_exchange),
            ("rho_n", self.rho_n),
            ("g_onq", self.g_onq),
            ("omega_h", self.omega_h),
            ("Q_h", self.q_h),
            ("temperature", self.temperature),
            ("lattice.constant", self.lattice.constant),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err((name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.e_pump >= 0.0) || !self.e_pump.is_finite() {
            return Err(("E_pump", format!("must be non-negative, got {}", self.e_pump)));
        }
        if !is_spin(self.spin_i) {
            return Err((
                "spin_I",
                format!("must be a positive half-integer, got {}", self.spin_i),
            ));
        }
        for (name, v) in [("N_spins", self.n_spins), ("V_h", self.v_h)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err((name, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

fn is_spin(i: f64) -> bool {
    i >= 0.5 && ((2.0 * i).round() - 2.0 * i).abs() < 1e-12
}

/// Parameters of the two-mode master equation (rad/s, except `n_th`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub omega_0: f64,
    /// Δ = (ω_h − ω_p) − ω₀.
    pub detuning: f64,
    #[serde(rename = "G_h")]
    pub g_h: f64,
    pub kappa_0: f64,
    pub kappa_h: f64,
    pub n_th: f64,
}

impl EffectiveParams {
    /// Parameters with ω₀ = 0 and Δ = 0; the cooling dynamics in the shifted
    /// frame depend only on the remaining four.
    pub fn new(g_h: f64, kappa_0: f64, kappa_h: f64, n_th: f64) -> Self {
        EffectiveParams {
            omega_0: 0.0,
            detuning: 0.0,
            g_h,
            kappa_0,
            kappa_h,
            n_th,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_0", self.omega_0),
            ("G_h", self.g_h),
            ("kappa_0", self.kappa_0),
            ("kappa_h", self.kappa_h),
            ("n_th", self.n_th),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if !self.detuning.is_finite() {
            return Err(Error::invalid("detuning", "must be finite"));
        }
        Ok(())
    }
}

/// ω_k = γ_n𝓑 + 𝓙·I·[z_c − Z(k)], `k` in m⁻¹.
pub fn magnon_dispersion(k: [f64; 3], cfg: &PhysicalConfig) -> f64 {
    let lattice = &cfg.lattice;
    let z_c = lattice.coordination_number() as f64;
    cfg.gamma_n * cfg.b_field + cfg.j_exchange * cfg.spin_i * (z_c - lattice.structure_factor(k))
}

/// (π/2)·(3/(4π))^{4/3}.
pub fn four_magnon_prefactor() -> f64 {
    PI / 2.0 * (3.0 / (4.0 * PI)).powf(4.0 / 3.0)
}

/// Four-magnon relaxation rate of the near-Γ mode at occupation `n_0`.
pub fn four_magnon_rate(cfg: &PhysicalConfig, n_0: f64) -> Result<f64> {
    if !(n_0 >= 0.0) || !n_0.is_finite() {
        return Err(Error::invalid("n_0", format!("must be finite and ≥ 0, got {n_0}")));
    }
    if !(cfg.j_exchange > 0.0) || !(cfg.spin_i > 0.0) {
        return Err(Error::invalid("J_exchange", "J and I must be positive"));
    }
    Ok(four_magnon_prefactor() * cfg.j_exchange / cfg.spin_i * n_0 * (n_0 + 1.0))
}

/// Bose–Einstein occupation [exp(ħω₀/k_BT) − 1]⁻¹. Zero at T = 0.
pub fn thermal_occupation(omega_0: f64, temperature: f64) -> Result<f64> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::invalid("temperature", format!("must be ≥ 0, got {temperature}")));
    }
    if !(omega_0 > 0.0) || !omega_0.is_finite() {
        return Err(Error::invalid(
            "omega_0",
            format!("must be positive for a finite thermal occupation, got {omega_0}"),
        ));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega_0 / (K_B * temperature)).exp_m1())
}

/// Vacuum field amplitude of a cavity mode, sqrt(ħω_h / 2ε₀V_h) in V/m.
pub fn zero_point_field(omega_h: f64, v_h: f64) -> f64 {
    (HBAR * omega_h / (2.0 * EPSILON_0 * v_h)).sqrt()
}

/// G_h = g·√N·𝓔_p·𝓔_h^zpf.
///
/// Only N/V_h enters, so the result is computed from the spin density.
pub fn collective_coupling(cfg: &PhysicalConfig) -> f64 {
    let density = cfg.spin_density();
    // √N·sqrt(ħω/2ε₀V) = sqrt(N/V)·sqrt(ħω/2ε₀)
    cfg.g_onq * cfg.e_pump * zero_point_field(cfg.omega_h, 1.0 / density)
}

/// G_h per unit pump field (rad·s⁻¹ per V/m).
pub fn coupling_per_field(cfg: &PhysicalConfig) -> f64 {
    cfg.g_onq * zero_point_field(cfg.omega_h, 1.0 / cfg.spin_density())
}

/// Order-of-magnitude ONQ response from a single gap-edge transition:
/// 𝓓 ≈ [g_S/(2I(2I−1))]·e⁴q/(4πε₀a₀)·1/(E_g(E_g−ω_p)), g_S = 2.
///
/// `q` in m², energies as angular rates; returns rad·s⁻¹ per (V/m)².
pub fn onq_estimate(spin_i: f64, q: f64, e_gap: f64, omega_p: f64) -> Result<f64> {
    if !is_spin(spin_i) || spin_i < 1.0 {
        return Err(Error::invalid(
            "spin_I",
            format!("quadrupole coupling needs I ≥ 1, got {spin_i}"),
        ));
    }
    if !(e_gap > 0.0) {
        return Err(Error::invalid("E_g", "must be positive"));
    }
    if !(omega_p < e_gap) || !(omega_p >= 0.0) {
        return Err(Error::invalid(
            "omega_p",
            format!("pump must lie below the gap (0 ≤ ω_p < E_g), got ω_p/E_g = {}", omega_p / e_gap),
        ));
    }
    const SPIN_DEGENERACY: f64 = 2.0;
    let spin_factor = SPIN_DEGENERACY / (2.0 * spin_i * (2.0 * spin_i - 1.0));
    let coulomb = E_CHARGE.powi(4) * q / (4.0 * PI * EPSILON_0 * BOHR_RADIUS);
    let energy = HBAR * HBAR * e_gap * (e_gap - omega_p);
    Ok(spin_factor * coulomb / energy / HBAR)
}

/// One electronic level of a toy band structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectronicState {
    /// Energy over ħ (rad/s).
    pub energy: f64,
    /// Occupation in [0, 1].
    pub occupation: f64,
}

/// User-supplied electronic data for the sum-over-states ONQ response.
#[derive(Clone, Debug, PartialEq)]
pub struct ElectronicToyModel {
    pub states: Vec<ElectronicState>,
    /// `position[i][(m, n)] = ⟨m|r_i|n⟩` (m).
    pub position: [DMatrix<Complex64>; 3],
    /// `efg[i][j][(m, n)]` (V·m⁻²).
    pub efg: [[DMatrix<Complex64>; 3]; 3],
    /// Nuclear quadrupole moment (m²).
    pub q: f64,
    pub spin_i: f64,
}

impl ElectronicToyModel {
    /// Model with all matrix elements zero.
    pub fn new(states: Vec<ElectronicState>, q: f64, spin_i: f64) -> Self {
        let n = states.len();
        let z = || DMatrix::<Complex64>::zeros(n, n);
        ElectronicToyModel {
            states,
            position: [z(), z(), z()],
            efg: [[z(), z(), z()], [z(), z(), z()], [z(), z(), z()]],
            q,
            spin_i,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        if self.states.iter().any(|s| !(0.0..=1.0).contains(&s.occupation)) {
            return Err(Error::invalid("occupation", "must lie in [0, 1]"));
        }
        let blocks = self.position.iter().chain(self.efg.iter().flatten());
        for m in blocks {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows(),
                });
            }
            if crate::hilbert::hermiticity_defect(m) > 1e-12 * m.norm().max(f64::MIN_POSITIVE) {
                return Err(Error::invalid("matrix elements", "must be hermitian"));
            }
        }
        if !is_spin(self.spin_i) || self.spin_i < 1.0 {
            return Err(Error::invalid("spin_I", "quadrupole coupling needs I ≥ 1"));
        }
        Ok(())
    }
}

/// Resonance guard for [`onq_sum_over_states`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceTolerance {
    /// Denominators smaller than `relative × (smallest nonzero level gap)`
    /// are rejected.
    pub relative: f64,
}

impl Default for ResonanceTolerance {
    fn default() -> Self {
        ResonanceTolerance { relative: 1e-6 }
    }
}

/// Cartesian index 0, 1, 2 for x, y, z.
pub type Axis = usize;

/// Sum-over-states second-order quadrupole response 𝓓_ij^pq(ω_p − ω_q; ω_p, −ω_q)
/// in the single-particle approximation, including the (p ↔ q) exchange
/// term. Returns rad·s⁻¹ per (V/m)².
#[allow(clippy::too_many_arguments)]
pub fn onq_sum_over_states(
    model: &ElectronicToyModel,
    omega_p: f64,
    omega_q: f64,
    i: Axis,
    j: Axis,
    p: Axis,
    q: Axis,
    tolerance: ResonanceTolerance,
) -> Result<Complex64> {
    if [i, j, p, q].iter().any(|&a| a > 2) {
        return Err(Error::invalid("axis", "Cartesian indices are 0, 1, 2"));
    }
    if model.states.is_empty() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    model.validate()?;

    let threshold = tolerance.relative * smallest_gap(&model.states, omega_p, omega_q);
    let direct = onq_branch(model, omega_p, -omega_q, i, j, p, q, threshold)?;
    let exchanged = onq_branch(model, -omega_q, omega_p, i, j, q, p, threshold)?;

    let s = model.spin_i;
    let prefactor = E_CHARGE.powi(3) * model.q / (2.0 * s * (2.0 * s - 1.0)) / HBAR.powi(3);
    Ok((direct + exchanged) * prefactor)
}

fn smallest_gap(states: &[ElectronicState], omega_p: f64, omega_q: f64) -> f64 {
    let mut gap = f64::INFINITY;
    for (a, sa) in states.iter().enumerate() {
        for sb in &states[a + 1..] {
            let d = (sa.energy - sb.energy).abs();
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
    }
    if gap.is_finite() {
        gap
    } else {
        omega_p.abs().max(omega_q.abs()).max(1.0)
    }
}

/// Σ_mnl [V_ij]_mn / (E_mn − (w1 + w2)) × { f_lm [r_a]_nl [r_b]_lm / (E_ml − w1)
///   − f_nl [r_b]_nl [r_a]_lm / (E_ln − w1) }, energies in rad/s.
#[allow(clippy::too_many_arguments)]
fn onq_branch(
    model: &ElectronicToyModel,
    w1: f64,
    w2: f64,
    i: Axis,
    j: Axis,
    a: Axis,
    b: Axis,
    threshold: f64,
) -> Result<Complex64> {
    let n_states = model.states.len();
    let e = |k: usize| model.states[k].energy;
    let f = |k: usize| model.states[k].occupation;
    let v = &model.efg[i][j];
    let ra = &model.position[a];
    let rb = &model.position[b];
    let zero = Complex64::new(0.0, 0.0);

    let guard = |den: f64, m: usize, n: usize, l: usize| -> Result<f64> {
        if den.abs() <= threshold {
            Err(Error::Resonance { m, n, l, value: den.abs() })
        } else {
            Ok(den)
        }
    };

    let mut total = zero;
    for m in 0..n_states {
        for n in 0..n_states {
            let vmn = v[(m, n)];
            if vmn == zero {
                continue;
            }
            for l in 0..n_states {
                let first = (f(l) - f(m)) * ra[(n, l)] * rb[(l, m)];
                let second = (f(n) - f(l)) * rb[(n, l)] * ra[(l, m)];
                if first == zero && second == zero {
                    continue;
                }
                let outer = guard(e(m) - e(n) - (w1 + w2), m, n, l)?;
                let mut bracket = zero;
                if first != zero {
                    bracket += first / guard(e(m) - e(l) - w1, m, n, l)?;
                }
                if second != zero {
                    bracket -= second / guard(e(l) - e(n) - w1, m, n, l)?;
                }
                total += vmn / outer * bracket;
            }
        }
    }
    Ok(total)
}

/// Derives master-equation parameters. `n_0_ref` is the occupation at which
/// κ₀ is evaluated; `None` uses n_th.
///
/// The detuning is zero: the cavity sits on the anti-Stokes sideband.
pub fn derive_effective_params(cfg: &PhysicalConfig, n_0_ref: Option<f64>) -> Result<EffectiveParams> {
    if let Err((name, reason)) = cfg.validate() {
        return Err(Error::invalid(name, reason));
    }
    let omega_0 = cfg.gamma_n * cfg.b_field;
    let n_th = thermal_occupation(omega_0, cfg.temperature)?;
    let kappa_0 = four_magnon_rate(cfg, n_0_ref.unwrap_or(n_th))?;
    Ok(EffectiveParams {
        omega_0,
        detuning: 0.0,
        g_h: collective_coupling(cfg),
        kappa_0,
        kappa_h: cfg.omega_h / cfg.q_h,
        n_th,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ev, hz, hz_per_mv_m_sq, khz, mhz, BARN};

    pub(crate) fn gaas() -> PhysicalConfig {
        PhysicalConfig {
            gamma_n: mhz(7.315),
            b_field: 1.0,
            j_exchange: khz(0.3),
            spin_i: 1.5,
            lattice: Lattice {
                kind: LatticeKind::Fcc,
                constant: 5.653e-10,
            },
            rho_n: 1e28,
            g_onq: hz_per_mv_m_sq(0.2),
            e_pump: 1e6,
            omega_h: ev(1.0),
            q_h: 1e10,
            temperature: 0.5e-3,
            n_spins: None,
            v_h: None,
        }
    }

    #[test]
    fn dispersion_at_gamma() {
        for kind in [LatticeKind::SimpleCubic, LatticeKind::Fcc] {
            let mut cfg = gaas();
            cfg.lattice.kind = kind;
            assert_eq!(magnon_dispersion([0.0; 3], &cfg), cfg.gamma_n * cfg.b_field);
        }
    }

    #[test]
    fn simple_cubic_zone_corner() {
        let mut cfg = gaas();
        cfg.lattice.kind = LatticeKind::SimpleCubic;
        let k = PI / cfg.lattice.constant;
        let w = magnon_dispersion([k, k, k], &cfg);
        let expected = cfg.gamma_n * cfg.b_field + 12.0 * cfg.j_exchange * cfg.spin_i;
        assert!((w - expected).abs() < 1e-9 * expected);
        assert!((cfg.lattice.structure_factor([k, k, k]) + 6.0).abs() < 1e-12);
    }

    #[test]
    fn fcc_neighbor_shell() {
        let l = Lattice {
            kind: LatticeKind::Fcc,
            constant: 2.0,
        };
        let n = l.neighbors();
        assert_eq!(n.len(), 12);
        for d in n {
            assert!(((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn prefactor_by_logs() {
        // independent route: exp of the log
        let oracle = (PI / 2.0).ln() + 4.0 / 3.0 * (3.0f64.ln() - (4.0 * PI).ln());
        assert!((four_magnon_prefactor() - oracle.exp()).abs() < 1e-15);
        assert!((four_magnon_prefactor() - 0.2325).abs() < 1e-3);
    }

    #[test]
    fn four_magnon_rate_limits() {
        let cfg = gaas();
        assert_eq!(four_magnon_rate(&cfg, 0.0).unwrap(), 0.0);
        assert!(four_magnon_rate(&cfg, -0.5).is_err());
        let k1 = four_magnon_rate(&cfg, 1.0).unwrap();
        assert!(k1 > khz(0.1) * 0.5 && k1 < khz(1.0));
    }

    #[test]
    fn thermal_occupation_values() {
        // ħω/kT = ln 2
        let t = 1e-3;
        let omega = 2f64.ln() * K_B * t / HBAR;
        assert!((thermal_occupation(omega, t).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(thermal_occupation(mhz(10.0), 0.0).unwrap(), 0.0);
        assert!(thermal_occupation(ev(1.0), 1e-3).unwrap() < 1e-300);
        assert!(thermal_occupation(0.0, 1e-3).is_err());
        // ω₀ = 2π·10 MHz at 1 mK: x = ħω/kT, n = 1/(eˣ − 1)
        let x = HBAR * mhz(10.0) / (K_B * 1e-3);
        let n = thermal_occupation(mhz(10.0), 1e-3).unwrap();
        assert!((n - 1.0 / (x.exp() - 1.0)).abs() < 1e-12);
        assert!((n - 1.6).abs() < 0.05);
    }

    #[test]
    fn zero_point_field_scaling() {
        let e1 = zero_point_field(ev(1.0), 1e-18);
        let e4 = zero_point_field(ev(1.0), 4e-18);
        assert!((e1 / e4 - 2.0).abs() < 1e-12);
        // N = 1 spin in V = 1/ρ_n
        let e = zero_point_field(ev(1.0), 1e-28);
        assert!((e / 9.5e9 - 1.0).abs() < 0.01, "{e}");
    }

    #[test]
    fn coupling_anchor() {
        let cfg = gaas();
        let g = collective_coupling(&cfg);
        assert!((g / khz(1.9) - 1.0).abs() < 0.03, "{}", g / khz(1.0));
        let mut off = cfg.clone();
        off.e_pump = 0.0;
        assert_eq!(collective_coupling(&off), 0.0);
    }

    #[test]
    fn coupling_sqrt_n_law() {
        let mut cfg = gaas();
        cfg.n_spins = Some(1e10);
        cfg.v_h = Some(1e-18);
        let g1 = collective_coupling(&cfg);
        cfg.n_spins = Some(4e10);
        let g4 = collective_coupling(&cfg);
        assert!((g4 / g1 - 2.0).abs() < 1e-12);
        cfg.v_h = Some(4e-18);
        assert!((collective_coupling(&cfg) / g1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn onq_estimate_for_arsenic() {
        let d = onq_estimate(1.5, 0.314 * BARN, ev(1.42), ev(1.42 - 0.2)).unwrap();
        let in_quoted_units = crate::units::to_hz_per_mv_m_sq(d);
        assert!((in_quoted_units / 0.24 - 1.0).abs() < 0.1, "{in_quoted_units}");
        assert!((in_quoted_units / 0.20 - 1.0).abs() < 0.5);
        assert!(onq_estimate(1.5, 0.314 * BARN, ev(1.42), ev(1.42)).is_err());
        assert!(onq_estimate(1.5, 0.314 * BARN, ev(1.42), ev(1.5)).is_err());
        assert!(onq_estimate(0.5, 0.314 * BARN, ev(1.42), ev(1.0)).is_err());
    }

    #[test]
    fn onq_estimate_diverges_at_gap() {
        let near = onq_estimate(1.5, BARN, ev(1.42), ev(1.42) * (1.0 - 1e-9)).unwrap();
        let far = onq_estimate(1.5, BARN, ev(1.42), ev(1.0)).unwrap();
        assert!(near / far > 1e6);
    }

    fn two_level(v0: f64, v1: f64, r: Complex64) -> ElectronicToyModel {
        let states = vec![
            ElectronicState {
                energy: 0.0,
                occupation: 1.0,
            },
            ElectronicState {
                energy: ev(1.5),
                occupation: 0.0,
            },
        ];
        let mut m = ElectronicToyModel::new(states, 0.3 * BARN, 1.5);
        m.position[0][(0, 1)] = r;
        m.position[0][(1, 0)] = r.conj();
        m.efg[2][2][(0, 0)] = Complex64::new(v0, 0.0);
        m.efg[2][2][(1, 1)] = Complex64::new(v1, 0.0);
        m
    }

    #[test]
    fn sum_over_states_empty_model() {
        let m = ElectronicToyModel::new(Vec::new(), BARN, 1.5);
        let d = onq_sum_over_states(&m, 1.0, 0.5, 2, 2, 0, 0, ResonanceTolerance::default()).unwrap();
        assert_eq!(d, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sum_over_states_two_level_hand_expansion() {
        let r = Complex64::new(0.8e-10, 0.3e-10);
        let (v0, v1) = (3.0e21, -1.0e21);
        let model = two_level(v0, v1, r);
        let (wp, wq) = (ev(1.0), ev(0.9));
        let got = onq_sum_over_states(&model, wp, wq, 2, 2, 0, 0, ResonanceTolerance::default()).unwrap();

        // Hand expansion. Only diagonal V survives with l ≠ m = n:
        //   m = n = 0, l = 1: V00/(−Ω) [ (f1−f0)|r|²/(E01 − w1) − (f0−f1)|r|²/(E10 − w1) ]
        //   m = n = 1, l = 0: V11/(−Ω) [ (f0−f1)|r|²/(E10 − w1) − (f1−f0)|r|²/(E01 − w1) ]
        // with Ω = w1 + w2 = ωp − ωq in both branches, w1 = ωp or −ωq.
        let e1 = ev(1.5);
        let r2 = r.norm_sqr();
        let branch = |w1: f64| {
            let omega = wp - wq;
            let a = -r2 / (-e1 - w1) - r2 / (e1 - w1);
            let b = r2 / (e1 - w1) + r2 / (-e1 - w1);
            v0 / -omega * a + v1 / -omega * b
        };
        let pref = E_CHARGE.powi(3) * 0.3 * BARN / (2.0 * 1.5 * 2.0) / HBAR.powi(3);
        let expected = (branch(wp) + branch(-wq)) * pref;
        assert!((got.re - expected).abs() < 1e-12 * expected.abs(), "{got} vs {expected}");
        assert!(got.im.abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn sum_over_states_exchange_symmetry() {
        let model = two_level(2.0e21, 0.5e21, Complex64::new(1e-10, 0.0));
        let mut model = model;
        model.position[1][(0, 1)] = Complex64::new(0.2e-10, 0.4e-10);
        model.position[1][(1, 0)] = Complex64::new(0.2e-10, -0.4e-10);
        let tol = ResonanceTolerance::default();
        let (wp, wq) = (ev(1.1), ev(0.7));
        let a = onq_sum_over_states(&model, wp, wq, 2, 2, 0, 1, tol).unwrap();
        let b = onq_sum_over_states(&model, -wq, -wp, 2, 2, 1, 0, tol).unwrap();
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn sum_over_states_zero_efg() {
        let model = two_level(0.0, 0.0, Complex64::new(1e-10, 0.0));
        let d = onq_sum_over_states(&model, ev(1.0), ev(0.5), 2, 2, 0, 0, ResonanceTolerance::default())
            .unwrap();
        assert_eq!(d, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn sum_over_states_resonance_rejected() {
        let model = two_level(1e21, 0.0, Complex64::new(1e-10, 0.0));
        let err = onq_sum_over_states(&model, ev(1.5), ev(0.3), 2, 2, 0, 0, ResonanceTolerance::default())
            .unwrap_err();
        assert!(matches!(err, Error::Resonance { .. }), "{err}");
    }

    #[test]
    fn derived_parameters() {
        let cfg = gaas();
        let p = derive_effective_params(&cfg, None).unwrap();
        assert_eq!(p.omega_0, cfg.gamma_n * cfg.b_field);
        assert_eq!(p.detuning, 0.0);
        assert!((p.kappa_h / hz(2.4e4) - 1.0).abs() < 0.02);
        assert_eq!(p.kappa_0, four_magnon_rate(&cfg, p.n_th).unwrap());
        assert!(p.n_th > 0.9 && p.n_th < 1.1);

        let mut zero_b = cfg.clone();
        zero_b.b_field = 0.0;
        assert!(derive_effective_params(&zero_b, None).is_err());
    }

    #[test]
    fn quality_factor_for_one_megahertz() {
        // Q_h = ω_h/κ_h with κ_h = 2π·1 MHz
        let q = ev(1.0) / mhz(1.0);
        assert!((q / 2.42e8 - 1.0).abs() < 0.01);
    }
}
