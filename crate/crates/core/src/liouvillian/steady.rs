use crate::error::{Error, Result};
use crate::hilbert::{hermitian_part, max_abs, CMatrix, DensityMatrix, C64};

use super::band;
use super::sparse::{Csr, SuperOperator};
use super::LindbladGenerator;

/// Relative residual ‖Lρ‖_max / (largest rate) accepted for a fixed point.
const RESIDUAL_TOL: f64 = 1e-8;
const PIN_CANDIDATES: usize = 3;

/// Unique stationary state of a time-independent generator.
///
/// Only the connected block of operator space that contains the diagonal is
/// solved. One diagonal element is pinned to 1, which removes the null
/// direction, and the result is normalized to unit trace afterwards.
pub fn steady_state(gen: &LindbladGenerator) -> Result<DensityMatrix> {
    if !gen.is_time_independent() {
        return Err(Error::invalid("generator", "steady state needs time-independent rates"));
    }
    if !gen.dissipators().iter().any(|d| d.rate > 0.0) {
        return Err(Error::NonUniqueSteadyState(
            "no dissipative channel is active".into(),
        ));
    }

    let space = gen.space();
    let d = space.dim();
    let sup = SuperOperator::new(gen);
    let mut comps = sup.diagonal_components();
    if comps.len() != 1 {
        return Err(Error::NonUniqueSteadyState(format!(
            "{} disconnected blocks of populations",
            comps.len()
        )));
    }
    let subset = comps.pop().unwrap();
    let n = subset.len();
    let rates: Vec<f64> = gen.dissipators().iter().map(|x| x.rate).collect();
    let entries = sup.restrict(&subset, &rates);
    let scale = gen.max_rate().max(max_abs(gen.hamiltonian().matrix()));

    let local_of = |g: usize| subset.binary_search(&g).ok();
    let candidates: Vec<usize> = (0..d)
        .filter_map(|m| local_of(m * d + m))
        .take(PIN_CANDIDATES)
        .collect();

    let zero = C64::new(0.0, 0.0);
    let mut last_reason = String::new();
    for &pin in &candidates {
        let shift = |k: usize| if k < pin { k } else { k - 1 };
        let mut rhs = vec![zero; n - 1];
        let mut reduced = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            if r == pin {
                continue;
            }
            if c == pin {
                rhs[shift(r)] -= v;
            } else {
                reduced.push((shift(r), shift(c), v));
            }
        }
        let x = match band::solve(n - 1, &reduced, &rhs) {
            Ok(x) => x,
            Err(s) => {
                last_reason = format!("singular at vectorized index {}", subset[s.column]);
                continue;
            }
        };
        let mut full = Vec::with_capacity(n);
        full.extend_from_slice(&x[..pin]);
        full.push(C64::new(1.0, 0.0));
        full.extend_from_slice(&x[pin..]);

        let mut m = CMatrix::zeros(d, d);
        for (&g, &v) in subset.iter().zip(&full) {
            m[(g / d, g % d)] = v;
        }
        let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
        if !(tr.is_finite() && tr.abs() > 0.0) {
            last_reason = "zero trace".into();
            continue;
        }
        let m = hermitian_part(&(m / C64::new(tr, 0.0)));

        let y: Vec<C64> = subset.iter().map(|&g| m[(g / d, g % d)]).collect();
        let mut ly = vec![zero; n];
        Csr::from_sorted(n, &entries).matvec(&y, &mut ly);
        let residual = ly.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if residual > RESIDUAL_TOL * scale {
            last_reason = format!("fixed-point residual {residual:e}");
            continue;
        }
        match DensityMatrix::new(space, m) {
            Ok(rho) => return Ok(rho),
            Err(e) => last_reason = e.to_string(),
        }
    }
    Err(Error::NonUniqueSteadyState(format!(
        "no admissible solution after {} pins: {last_reason}",
        candidates.len()
    )))
}
