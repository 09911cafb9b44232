//! Truncated two-mode bosonic algebra.
//!
//! The joint space is `magnon ⊗ photon` with the magnon index varying slower:
//! the basis state `|n_a, n_b⟩` sits at index `n_a * dim_photon + n_b`.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Maximum allowed ‖ρ − ρ†‖_max for a valid state.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Maximum allowed |Tr ρ − 1| for a valid state.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue tolerated for a valid state.
pub const MIN_EIGENVALUE_TOL: f64 = -1e-8;
/// Eigenvalues below this are treated as zero inside the entropy.
pub const ENTROPY_CLAMP: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Magnon,
    Photon,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Magnon => "magnon",
            Mode::Photon => "photon",
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::Magnon => Mode::Photon,
            Mode::Photon => Mode::Magnon,
        }
    }
}

/// Joint truncated Fock space of the magnon mode and the cavity photon mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockSpace {
    dim_magnon: usize,
    dim_photon: usize,
}

impl FockSpace {
    pub fn new(dim_magnon: usize, dim_photon: usize) -> Result<Self> {
        if dim_magnon < 2 {
            return Err(Error::InvalidDimension {
                mode: "magnon",
                dim: dim_magnon,
            });
        }
        if dim_photon < 2 {
            return Err(Error::InvalidDimension {
                mode: "photon",
                dim: dim_photon,
            });
        }
        Ok(FockSpace {
            dim_magnon,
            dim_photon,
        })
    }

    pub fn dim_magnon(&self) -> usize {
        self.dim_magnon
    }

    pub fn dim_photon(&self) -> usize {
        self.dim_photon
    }

    pub fn mode_dim(&self, mode: Mode) -> usize {
        match mode {
            Mode::Magnon => self.dim_magnon,
            Mode::Photon => self.dim_photon,
        }
    }

    /// Joint dimension.
    pub fn dim(&self) -> usize {
        self.dim_magnon * self.dim_photon
    }

    pub fn index(&self, n_magnon: usize, n_photon: usize) -> usize {
        debug_assert!(n_magnon < self.dim_magnon && n_photon < self.dim_photon);
        n_magnon * self.dim_photon + n_photon
    }

    /// Inverse of [`FockSpace::index`]: `(n_magnon, n_photon)`.
    pub fn levels(&self, index: usize) -> (usize, usize) {
        (index / self.dim_photon, index % self.dim_photon)
    }

    pub fn level(&self, index: usize, mode: Mode) -> usize {
        let (a, b) = self.levels(index);
        match mode {
            Mode::Magnon => a,
            Mode::Photon => b,
        }
    }
}

/// Convenience constructor mirroring [`FockSpace::new`].
pub fn make_space(dim_magnon: usize, dim_photon: usize) -> Result<FockSpace> {
    FockSpace::new(dim_magnon, dim_photon)
}

/// Dense operator on the joint space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: FockSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn from_matrix(space: FockSpace, matrix: CMatrix) -> Result<Self> {
        check_square(&space, &matrix)?;
        Ok(Operator { space, matrix })
    }

    pub fn zeros(space: FockSpace) -> Self {
        let d = space.dim();
        Operator {
            space,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: FockSpace) -> Self {
        let d = space.dim();
        Operator {
            space,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            space: self.space,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator {
            space: self.space,
            matrix: &self.matrix * factor,
        }
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        &(self * other) - &(other * self)
    }

    /// Largest |A_ij − conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operators act on different spaces");
        Operator {
            space: self.space,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operators act on different spaces");
        Operator {
            space: self.space,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operators act on different spaces");
        Operator {
            space: self.space,
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

fn check_square(space: &FockSpace, matrix: &CMatrix) -> Result<()> {
    let d = space.dim();
    if matrix.nrows() != d || matrix.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if matrix.nrows() != d {
                matrix.nrows()
            } else {
                matrix.ncols()
            },
        });
    }
    Ok(())
}

/// Lowering operator of a single truncated mode: entry `(n−1, n) = √n`.
pub fn single_mode_annihilation(dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Lowering operator of `mode`, tensored with the identity on the other mode.
pub fn annihilation(space: FockSpace, mode: Mode) -> Operator {
    let d = space.dim();
    let mut m = CMatrix::zeros(d, d);
    for col in 0..d {
        let (na, nb) = space.levels(col);
        match mode {
            Mode::Magnon if na > 0 => {
                m[(space.index(na - 1, nb), col)] = C64::new((na as f64).sqrt(), 0.0)
            }
            Mode::Photon if nb > 0 => {
                m[(space.index(na, nb - 1), col)] = C64::new((nb as f64).sqrt(), 0.0)
            }
            _ => {}
        }
    }
    Operator { space, matrix: m }
}

pub fn creation(space: FockSpace, mode: Mode) -> Operator {
    annihilation(space, mode).adjoint()
}

/// Number operator `a†a` of `mode`, built directly as a diagonal.
pub fn number(space: FockSpace, mode: Mode) -> Operator {
    let d = space.dim();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(space.level(i, mode) as f64, 0.0);
    }
    Operator { space, matrix: m }
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
///
/// The matrix is split into the connected blocks of its sparsity pattern
/// first; states produced by the solvers are block diagonal in the total
/// excitation number, which keeps this cheap at joint dims of a few hundred.
pub fn hermitian_spectrum(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    let n = h.nrows();
    let mut label = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        label[start] = id;
        let mut head = 0;
        while head < members.len() {
            let i = members[head];
            head += 1;
            for j in 0..n {
                if label[j] == usize::MAX && h[(i, j)] != C64::new(0.0, 0.0) {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        blocks.push(members);
    }

    let mut spectrum = Vec::with_capacity(n);
    for block in blocks {
        if block.len() == 1 {
            spectrum.push(h[(block[0], block[0])].re);
            continue;
        }
        let sub = CMatrix::from_fn(block.len(), block.len(), |r, c| h[(block[r], block[c])]);
        spectrum.extend(sub.symmetric_eigenvalues().iter().copied());
    }
    spectrum.sort_by(|a, b| a.total_cmp(b));
    spectrum
}

/// −Σ λ ln λ over the spectrum of a density matrix (nats).
pub fn von_neumann_entropy(m: &CMatrix) -> f64 {
    hermitian_spectrum(m)
        .into_iter()
        .filter(|&l| l >= ENTROPY_CLAMP)
        .map(|l| -l * l.ln())
        .sum()
}

/// Entropy of an untruncated thermal bosonic state with mean occupation `n`.
pub fn thermal_entropy(n: f64) -> Result<f64> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::invalid("n", format!("must be finite and ≥ 0, got {n}")));
    }
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok((n + 1.0) * (n + 1.0).ln() - n * n.ln())
}

/// Diagonal weights of a truncated geometric distribution with mean `n`
/// before truncation, renormalized to unit sum.
pub fn thermal_weights(n: f64, dim: usize) -> Result<Vec<f64>> {
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::invalid(
            "occupation",
            format!("must be finite and ≥ 0, got {n}"),
        ));
    }
    let ratio = n / (n + 1.0);
    let mut w: Vec<f64> = std::iter::successors(Some(1.0), |p| Some(p * ratio))
        .take(dim)
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|p| *p /= total);
    Ok(w)
}

/// A validated joint density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: FockSpace,
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Wraps `matrix` after checking hermiticity, unit trace and positivity.
    pub fn new(space: FockSpace, matrix: CMatrix) -> Result<Self> {
        check_square(&space, &matrix)?;
        check_density(&matrix)?;
        Ok(DensityMatrix { space, matrix })
    }

    /// Wraps `matrix` without validation. Only the dimension is checked.
    pub fn new_unchecked(space: FockSpace, matrix: CMatrix) -> Result<Self> {
        check_square(&space, &matrix)?;
        Ok(DensityMatrix { space, matrix })
    }

    /// Product of per-mode truncated thermal states.
    pub fn thermal(space: FockSpace, n_magnon: f64, n_photon: f64) -> Result<Self> {
        let wa = thermal_weights(n_magnon, space.dim_magnon())?;
        let wb = thermal_weights(n_photon, space.dim_photon())?;
        let d = space.dim();
        let mut m = CMatrix::zeros(d, d);
        for i in 0..d {
            let (a, b) = space.levels(i);
            m[(i, i)] = C64::new(wa[a] * wb[b], 0.0);
        }
        Ok(DensityMatrix { space, matrix: m })
    }

    /// Pure Fock state `|n_magnon, n_photon⟩`.
    pub fn fock(space: FockSpace, n_magnon: usize, n_photon: usize) -> Result<Self> {
        if n_magnon >= space.dim_magnon() {
            return Err(Error::invalid("n_magnon", "outside the truncation"));
        }
        if n_photon >= space.dim_photon() {
            return Err(Error::invalid("n_photon", "outside the truncation"));
        }
        let d = space.dim();
        let mut m = CMatrix::zeros(d, d);
        let i = space.index(n_magnon, n_photon);
        m[(i, i)] = C64::new(1.0, 0.0);
        Ok(DensityMatrix { space, matrix: m })
    }

    pub fn vacuum(space: FockSpace) -> Self {
        Self::fock(space, 0, 0).expect("vacuum is inside every truncation")
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `Tr(ρ a†a)` for the named mode.
    pub fn population(&self, mode: Mode) -> f64 {
        (0..self.space.dim())
            .map(|i| self.matrix[(i, i)].re * self.space.level(i, mode) as f64)
            .sum()
    }

    /// Reduced state of `keep`, tracing out the other mode.
    pub fn partial_trace(&self, keep: Mode) -> ReducedState {
        let s = self.space;
        let dk = s.mode_dim(keep);
        let dt = s.mode_dim(keep.other());
        let joint = |k: usize, t: usize| match keep {
            Mode::Magnon => s.index(k, t),
            Mode::Photon => s.index(t, k),
        };
        let m = CMatrix::from_fn(dk, dk, |r, c| {
            (0..dt)
                .map(|t| self.matrix[(joint(r, t), joint(c, t))])
                .sum()
        });
        ReducedState {
            mode: keep,
            matrix: m,
        }
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(&self.matrix)
    }
}

fn check_density(m: &CMatrix) -> Result<()> {
    let herm = hermiticity_defect(m);
    if herm > HERMITIAN_TOL {
        return Err(Error::InvalidState(format!(
            "hermiticity defect {herm:e} exceeds {HERMITIAN_TOL:e}"
        )));
    }
    let tr = trace(m);
    let tr_defect = (tr - C64::new(1.0, 0.0)).norm();
    if tr_defect > TRACE_TOL {
        return Err(Error::InvalidState(format!(
            "trace defect {tr_defect:e} exceeds {TRACE_TOL:e}"
        )));
    }
    let min_eig = hermitian_spectrum(m).first().copied().unwrap_or(0.0);
    if min_eig < MIN_EIGENVALUE_TOL {
        return Err(Error::InvalidState(format!(
            "minimum eigenvalue {min_eig:e} below {MIN_EIGENVALUE_TOL:e}"
        )));
    }
    Ok(())
}

pub fn thermal_state(space: FockSpace, n_magnon: f64, n_photon: f64) -> Result<DensityMatrix> {
    DensityMatrix::thermal(space, n_magnon, n_photon)
}

pub fn mode_population(rho: &DensityMatrix, mode: Mode) -> f64 {
    rho.population(mode)
}

pub fn partial_trace(rho: &DensityMatrix, keep: Mode) -> ReducedState {
    rho.partial_trace(keep)
}

/// Single-mode density matrix obtained by a partial trace.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    mode: Mode,
    matrix: CMatrix,
}

impl ReducedState {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn population(&self) -> f64 {
        (0..self.dim()).map(|k| self.matrix[(k, k)].re * k as f64).sum()
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(&self.matrix)
    }

    /// Same invariants as [`DensityMatrix::new`].
    pub fn validate(&self) -> Result<()> {
        check_density(&self.matrix)
    }
}
