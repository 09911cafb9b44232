use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_spectrum, hermiticity_defect, trace, CMatrix, DensityMatrix, FockSpace, Mode, C64};

/// Population of the highest Fock level above which results are flagged as
/// truncation-limited.
pub const TRUNCATION_WARNING_THRESHOLD: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    /// Reduced population of the top magnon level.
    pub top_level_occupation_magnon: f64,
    pub top_level_occupation_photon: f64,
    pub truncation_warning: bool,
}

impl StateDiagnostics {
    pub fn of(rho: &DensityMatrix) -> Self {
        measure(rho.space(), rho.matrix())
    }
}

fn measure(space: FockSpace, m: &CMatrix) -> StateDiagnostics {
    let top = |mode: Mode| -> f64 {
        let last = space.mode_dim(mode) - 1;
        (0..space.dim())
            .filter(|&i| space.level(i, mode) == last)
            .map(|i| m[(i, i)].re)
            .sum()
    };
    let (ta, tb) = (top(Mode::Magnon), top(Mode::Photon));
    StateDiagnostics {
        hermiticity_defect: hermiticity_defect(m),
        trace_defect: (trace(m) - C64::new(1.0, 0.0)).norm(),
        min_eigenvalue: hermitian_spectrum(m).first().copied().unwrap_or(0.0),
        top_level_occupation_magnon: ta,
        top_level_occupation_photon: tb,
        truncation_warning: ta > TRUNCATION_WARNING_THRESHOLD || tb > TRUNCATION_WARNING_THRESHOLD,
    }
}

/// Checks `m` as a density matrix on `space` and reports the diagnostics.
/// Fails with [`Error::InvalidState`] when any invariant is broken.
pub fn validate_state(space: FockSpace, m: &CMatrix) -> Result<StateDiagnostics> {
    let rho = DensityMatrix::new(space, m.clone())?;
    let diag = measure(space, rho.matrix());
    if !diag.min_eigenvalue.is_finite() {
        return Err(Error::InvalidState("non-finite spectrum".into()));
    }
    Ok(diag)
}
