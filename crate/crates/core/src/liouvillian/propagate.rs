use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_spectrum, CMatrix, DensityMatrix, FockSpace, Mode, C64};

use super::integrate::{Dopri5, StepControl};
use super::sparse::{Csr, SuperOperator};
use super::LindbladGenerator;

/// |Tr ρ − 1| beyond which propagation aborts.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub control: StepControl,
}

/// Observables sampled on the requested time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub n_magnon: Vec<f64>,
    pub n_photon: Vec<f64>,
    /// Entropy of the reduced magnon state (nats).
    pub entropy_magnon: Vec<f64>,
    pub trace_error: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub final_state: DensityMatrix,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn propagate(gen: &LindbladGenerator, rho0: &DensityMatrix, t_grid: &[f64]) -> Result<TrajectoryRecord> {
    propagate_with(gen, rho0, t_grid, &PropagateOptions::default())
}

/// Integrates the master equation and samples observables at `t_grid`.
///
/// The state is evolved in the smallest subspace of operator space that
/// contains ρ₀ and is invariant under the generator, stepping exactly onto
/// every grid point and every schedule switch.
pub fn propagate_with(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    opts: &PropagateOptions,
) -> Result<TrajectoryRecord> {
    let space = gen.space();
    if rho0.space() != space {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: rho0.space().dim(),
        });
    }
    match t_grid.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => return Err(Error::invalid("t_grid", "must start at 0")),
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("t_grid", "must be finite and strictly increasing"));
    }

    let d = space.dim();
    let sup = SuperOperator::new(gen);
    let seed: Vec<usize> = (0..d * d)
        .filter(|&k| rho0.matrix()[(k / d, k % d)] != C64::new(0.0, 0.0))
        .collect();
    let subset = sup.reachable(&seed);
    let mut local = vec![usize::MAX; d * d];
    for (pos, &g) in subset.iter().enumerate() {
        local[g] = pos;
    }
    let partner: Vec<usize> = subset.iter().map(|&g| local[sup.transpose_index(g)]).collect();
    let diagonal: Vec<usize> = (0..d).map(|m| local[m * d + m]).filter(|&p| p != usize::MAX).collect();

    let mut y: Vec<C64> = subset.iter().map(|&g| rho0.matrix()[(g / d, g % d)]).collect();

    let t_end = *t_grid.last().unwrap();
    let mut breaks: Vec<f64> = gen.switch_times().into_iter().filter(|&s| s > 0.0 && s < t_end).collect();
    breaks.push(f64::INFINITY);

    let mut record = Recorder::new(space, t_grid.len());
    record.push(0.0, &to_matrix(d, &subset, &y));

    let mut ig = Dopri5::new(subset.len(), opts.control);
    let mut post = |t: f64, y: &mut [C64]| -> Result<()> {
        for (i, &p) in partner.iter().enumerate() {
            if p > i {
                let avg_ip = (y[i] + y[p].conj()) * 0.5;
                y[i] = avg_ip;
                y[p] = avg_ip.conj();
            } else if p == i {
                y[i] = C64::new(y[i].re, 0.0);
            }
        }
        let tr: f64 = diagonal.iter().map(|&k| y[k].re).sum();
        let drift = (tr - 1.0).abs();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { time: t, drift });
        }
        Ok(())
    };

    let mut t = 0.0;
    let mut seg_start = 0.0;
    for &seg_end in &breaks {
        let rates: Vec<f64> = gen.dissipators().iter().map(|x| x.rate_at(seg_start)).collect();
        let csr = Csr::from_sorted(subset.len(), &sup.restrict(&subset, &rates));
        let rhs = |x: &[C64], dx: &mut [C64]| csr.matvec(x, dx);
        ig.reset_rhs();
        let t_from = t;
        for &target in t_grid.iter().filter(|&&tg| tg > t_from && tg <= seg_end) {
            ig.advance(&rhs, &mut t, target, &mut y, &mut post)?;
            record.push(t, &to_matrix(d, &subset, &y));
        }
        if seg_end.is_finite() && t < seg_end {
            ig.advance(&rhs, &mut t, seg_end, &mut y, &mut post)?;
        }
        if t >= t_end {
            break;
        }
        seg_start = seg_end;
    }

    let final_state = DensityMatrix::new(space, to_matrix(d, &subset, &y)).map_err(|e| {
        Error::IntegrationFailure {
            time: t,
            reason: format!("final state failed validation: {e}"),
        }
    })?;
    Ok(record.finish(final_state, ig.accepted, ig.rejected))
}

fn to_matrix(d: usize, subset: &[usize], y: &[C64]) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for (&g, &v) in subset.iter().zip(y) {
        m[(g / d, g % d)] = v;
    }
    m
}

struct Recorder {
    space: FockSpace,
    times: Vec<f64>,
    n_magnon: Vec<f64>,
    n_photon: Vec<f64>,
    entropy: Vec<f64>,
    trace_error: Vec<f64>,
    min_eig: Vec<f64>,
}

impl Recorder {
    fn new(space: FockSpace, n: usize) -> Self {
        Recorder {
            space,
            times: Vec::with_capacity(n),
            n_magnon: Vec::with_capacity(n),
            n_photon: Vec::with_capacity(n),
            entropy: Vec::with_capacity(n),
            trace_error: Vec::with_capacity(n),
            min_eig: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, m: &CMatrix) {
        let rho = DensityMatrix::new_unchecked(self.space, m.clone()).expect("dimension fixed by space");
        self.times.push(t);
        self.n_magnon.push(rho.population(Mode::Magnon));
        self.n_photon.push(rho.population(Mode::Photon));
        self.entropy.push(rho.partial_trace(Mode::Magnon).entropy());
        let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
        self.trace_error.push((tr - 1.0).abs());
        self.min_eig.push(hermitian_spectrum(m).first().copied().unwrap_or(0.0));
    }

    fn finish(self, final_state: DensityMatrix, accepted: usize, rejected: usize) -> TrajectoryRecord {
        TrajectoryRecord {
            times: self.times,
            n_magnon: self.n_magnon,
            n_photon: self.n_photon,
            entropy_magnon: self.entropy,
            trace_error: self.trace_error,
            min_eigenvalue: self.min_eig,
            final_state,
            accepted_steps: accepted,
            rejected_steps: rejected,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{build_generator, RateSchedule, CAVITY_DECAY};
    use crate::magnonics::EffectiveParams;

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn closed_free_evolution_keeps_populations() {
        let s = FockSpace::new(5, 5).unwrap();
        let mut p = EffectiveParams::new(0.0, 0.0, 0.0, 1.0);
        p.omega_0 = 3.0;
        let gen = build_generator(&p, s).unwrap();
        let rho = DensityMatrix::thermal(s, 1.0, 0.0).unwrap();
        let rec = propagate(&gen, &rho, &grid(5.0, 11)).unwrap();
        for n in &rec.n_magnon {
            assert!((n - rec.n_magnon[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn lossless_swap_matches_closed_form() {
        // n_a(t) = cos²(Gt) for |1, 0⟩ with no dissipation
        let s = FockSpace::new(3, 3).unwrap();
        let g = 2.0;
        let gen = build_generator(&EffectiveParams::new(g, 0.0, 0.0, 0.0), s).unwrap();
        let rho = DensityMatrix::fock(s, 1, 0).unwrap();
        let rec = propagate(&gen, &rho, &grid(3.0, 31)).unwrap();
        for (t, n) in rec.times.iter().zip(&rec.n_magnon) {
            assert!((n - (g * t).cos().powi(2)).abs() < 1e-7, "t = {t}");
        }
        assert!(rec.trace_error.iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn thermalization_of_isolated_magnon() {
        // Magnon alone relaxes toward n_th: n(t) = n_th + (n0 − n_th)e^{−κt}
        // exactly, as long as truncation is negligible.
        let s = FockSpace::new(24, 2).unwrap();
        let gen = build_generator(&EffectiveParams::new(0.0, 1.0, 0.0, 0.5), s).unwrap();
        let rho = DensityMatrix::fock(s, 0, 0).unwrap();
        let rec = propagate(&gen, &rho, &grid(4.0, 9)).unwrap();
        for (t, n) in rec.times.iter().zip(&rec.n_magnon) {
            let exact = 0.5 * (1.0 - (-t).exp());
            assert!((n - exact).abs() < 1e-6, "t = {t}: {n} vs {exact}");
        }
    }

    #[test]
    fn schedule_switch_respected() {
        // photon decays at rate 1 until t = 1, then at rate 5
        let s = FockSpace::new(2, 3).unwrap();
        let mut gen = build_generator(&EffectiveParams::new(0.0, 0.0, 1.0, 0.0), s).unwrap();
        gen.set_schedule(CAVITY_DECAY, RateSchedule::new(vec![(0.0, 1.0), (1.0, 5.0)]).unwrap())
            .unwrap();
        let rho = DensityMatrix::fock(s, 0, 1).unwrap();
        let rec = propagate(&gen, &rho, &[0.0, 0.5, 1.5]).unwrap();
        assert!((rec.n_photon[1] - (-0.5f64).exp()).abs() < 1e-8);
        assert!((rec.n_photon[2] - (-1.0 - 2.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn grid_validation() {
        let s = FockSpace::new(2, 2).unwrap();
        let gen = build_generator(&EffectiveParams::new(1.0, 1.0, 1.0, 0.0), s).unwrap();
        let rho = DensityMatrix::vacuum(s);
        assert!(propagate(&gen, &rho, &[0.1, 0.2]).is_err());
        assert!(propagate(&gen, &rho, &[0.0, 0.2, 0.2]).is_err());
        assert!(propagate(&gen, &rho, &[]).is_err());
    }
}
