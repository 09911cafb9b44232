//! Vectorized Liouvillian in sparse form.
//!
//! `ρ` is flattened row-major: element `(m, n)` sits at `m * d + n`. The
//! Hamiltonian part and each dissipator are stored separately at unit rate so
//! that piecewise-constant schedules only need a re-weighting.

use std::collections::VecDeque;

use crate::hilbert::{CMatrix, C64};

use super::LindbladGenerator;

pub(crate) type Entry = (usize, usize, C64);

pub(crate) struct SuperOperator {
    d: usize,
    hamiltonian: Vec<Entry>,
    channels: Vec<Vec<Entry>>,
    active: Vec<bool>,
}

fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != C64::new(0.0, 0.0) {
                out.push((r, c, v));
            }
        }
    }
    out
}

impl SuperOperator {
    pub(crate) fn new(gen: &LindbladGenerator) -> Self {
        let d = gen.space().dim();
        let idx = |m: usize, n: usize| m * d + n;
        let i = C64::new(0.0, 1.0);

        // i[ρ, H] = −iHρ + iρH
        let mut hamiltonian = Vec::new();
        for (m, k, h) in nonzeros(gen.hamiltonian().matrix()) {
            for n in 0..d {
                hamiltonian.push((idx(m, n), idx(k, n), -i * h));
                hamiltonian.push((idx(n, k), idx(n, m), i * h));
            }
        }

        let mut channels = Vec::new();
        let mut active = Vec::new();
        for diss in gen.dissipators() {
            let c = diss.jump.matrix();
            let cdc = c.adjoint() * c;
            let nz = nonzeros(c);
            let mut entries = Vec::new();
            for &(m, k, cmk) in &nz {
                for &(n, l, cnl) in &nz {
                    entries.push((idx(m, n), idx(k, l), cmk * cnl.conj()));
                }
            }
            for (m, k, v) in nonzeros(&cdc) {
                for n in 0..d {
                    entries.push((idx(m, n), idx(k, n), -0.5 * v));
                    entries.push((idx(n, k), idx(n, m), -0.5 * v));
                }
            }
            channels.push(entries);
            active.push(diss.is_active());
        }
        SuperOperator {
            d,
            hamiltonian,
            channels,
            active,
        }
    }

    pub(crate) fn transpose_index(&self, k: usize) -> usize {
        (k % self.d) * self.d + k / self.d
    }

    fn active_entries(&self) -> impl Iterator<Item = &Entry> {
        self.hamiltonian.iter().chain(
            self.channels
                .iter()
                .zip(&self.active)
                .filter(|(_, &a)| a)
                .flat_map(|(e, _)| e.iter()),
        )
    }

    /// Forward adjacency `col → rows` of every active term.
    fn forward_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.d * self.d];
        for &(r, c, _) in self.active_entries() {
            if r != c {
                adj[c].push(r);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Smallest set of vectorized indices containing `seed` that the dynamics
    /// can never leave, closed under transposition. Sorted.
    pub(crate) fn reachable(&self, seed: &[usize]) -> Vec<usize> {
        let adj = self.forward_adjacency();
        let mut seen = vec![false; self.d * self.d];
        let mut queue = VecDeque::new();
        for &s in seed {
            for k in [s, self.transpose_index(s)] {
                if !seen[k] {
                    seen[k] = true;
                    queue.push_back(k);
                }
            }
        }
        while let Some(k) = queue.pop_front() {
            for &r in &adj[k] {
                for x in [r, self.transpose_index(r)] {
                    if !seen[x] {
                        seen[x] = true;
                        queue.push_back(x);
                    }
                }
            }
        }
        (0..seen.len()).filter(|&k| seen[k]).collect()
    }

    /// Connected components (undirected) of the active sparsity pattern
    /// that contain at least one diagonal element `(m, m)`.
    pub(crate) fn diagonal_components(&self) -> Vec<Vec<usize>> {
        let n = self.d * self.d;
        let mut adj = vec![Vec::new(); n];
        for &(r, c, _) in self.active_entries() {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut components = Vec::new();
        for m in 0..self.d {
            let start = m * self.d + m;
            if label[start] != usize::MAX {
                continue;
            }
            let id = components.len();
            label[start] = id;
            let mut members = vec![start];
            let mut head = 0;
            while head < members.len() {
                let k = members[head];
                head += 1;
                for &x in &adj[k] {
                    if label[x] == usize::MAX {
                        label[x] = id;
                        members.push(x);
                    }
                }
            }
            members.sort_unstable();
            components.push(members);
        }
        components
    }

    /// Restriction to `subset` (sorted global indices) with channel `j`
    /// weighted by `rates[j]`, duplicates summed. Local indices refer to
    /// positions in `subset`.
    pub(crate) fn restrict(&self, subset: &[usize], rates: &[f64]) -> Vec<Entry> {
        let mut local = vec![usize::MAX; self.d * self.d];
        for (pos, &g) in subset.iter().enumerate() {
            local[g] = pos;
        }
        let mut out: Vec<Entry> = Vec::new();
        let mut push = |entries: &[Entry], w: f64| {
            for &(r, c, v) in entries {
                let (lr, lc) = (local[r], local[c]);
                if lr != usize::MAX && lc != usize::MAX {
                    out.push((lr, lc, v * w));
                }
            }
        };
        push(&self.hamiltonian, 1.0);
        for (entries, &rate) in self.channels.iter().zip(rates) {
            if rate != 0.0 {
                push(entries, rate);
            }
        }
        coalesce(out)
    }
}

/// Sorts by (row, col), sums duplicates and drops exact zeros.
pub(crate) fn coalesce(mut entries: Vec<Entry>) -> Vec<Entry> {
    entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
    let mut out: Vec<Entry> = Vec::with_capacity(entries.len());
    for (r, c, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == r && last.1 == c => last.2 += v,
            _ => out.push((r, c, v)),
        }
    }
    out.retain(|e| e.2 != C64::new(0.0, 0.0));
    out
}

/// Compressed sparse rows.
pub(crate) struct Csr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl Csr {
    /// `entries` must be sorted by row (as produced by [`coalesce`]).
    pub(crate) fn from_sorted(n: usize, entries: &[Entry]) -> Self {
        let mut indptr = vec![0usize; n + 1];
        for &(r, _, _) in entries {
            indptr[r + 1] += 1;
        }
        for k in 0..n {
            indptr[k + 1] += indptr[k];
        }
        Csr {
            indptr,
            indices: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        }
    }

    pub(crate) fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
            let mut acc = C64::new(0.0, 0.0);
            for k in lo..hi {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{DensityMatrix, FockSpace};
    use crate::liouvillian::build_generator;
    use crate::magnonics::EffectiveParams;

    fn gen() -> LindbladGenerator {
        let s = FockSpace::new(4, 3).unwrap();
        let mut p = EffectiveParams::new(0.7, 0.1, 1.3, 0.8);
        p.detuning = 0.25;
        build_generator(&p, s).unwrap()
    }

    #[test]
    fn sparse_matches_dense_application() {
        let g = gen();
        let d = g.space().dim();
        let s = FockSpace::new(4, 3).unwrap();
        let mut rho = DensityMatrix::thermal(s, 0.6, 0.2).unwrap().into_matrix();
        rho[(1, 3)] = C64::new(0.01, 0.02);
        rho[(3, 1)] = C64::new(0.01, -0.02);
        let sup = SuperOperator::new(&g);
        let all: Vec<usize> = (0..d * d).collect();
        let rates: Vec<f64> = g.dissipators().iter().map(|x| x.rate).collect();
        let csr = Csr::from_sorted(d * d, &sup.restrict(&all, &rates));
        let x: Vec<C64> = (0..d * d).map(|k| rho[(k / d, k % d)]).collect();
        let mut y = vec![C64::new(0.0, 0.0); d * d];
        csr.matvec(&x, &mut y);
        let dense = g.apply(&rho, 0.0);
        for k in 0..d * d {
            assert!((y[k] - dense[(k / d, k % d)]).norm() < 1e-13);
        }
    }

    #[test]
    fn diagonal_states_stay_in_equal_excitation_block() {
        let g = gen();
        let s = g.space();
        let sup = SuperOperator::new(&g);
        let seed: Vec<usize> = (0..s.dim()).map(|m| m * s.dim() + m).collect();
        let reach = sup.reachable(&seed);
        for k in &reach {
            let (m, n) = (k / s.dim(), k % s.dim());
            let (a1, b1) = s.levels(m);
            let (a2, b2) = s.levels(n);
            assert_eq!(a1 + b1, a2 + b2);
        }
        let comps = sup.diagonal_components();
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0], reach);
    }
}
