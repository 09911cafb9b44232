//! Banded LU with partial pivoting after a reverse Cuthill–McKee reordering.
//!
//! The equal-excitation block of the Liouvillian couples only neighbouring
//! excitation shells, so RCM brings it to a narrow band and the solve costs
//! O(n·kl·(kl + ku)) instead of O(n³).

use std::collections::VecDeque;

use crate::hilbert::C64;

use super::sparse::Entry;

#[derive(Debug)]
pub(crate) struct Singular {
    pub column: usize,
}

/// Reverse Cuthill–McKee ordering of the symmetrized pattern.
/// Returns `order[new] = old`.
pub(crate) fn rcm_order(n: usize, entries: &[Entry]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(r, c, _) in entries {
        if r != c {
            adj[r].push(c);
            adj[c].push(r);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&k| (degree[k], k));

    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(start, &adj);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(k) = queue.pop_front() {
            order.push(k);
            let mut next: Vec<usize> = adj[k].iter().copied().filter(|&x| !visited[x]).collect();
            next.sort_by_key(|&x| (degree[x], x));
            for x in next {
                visited[x] = true;
                queue.push_back(x);
            }
        }
    }
    order.reverse();
    order
}

/// Repeated BFS to the farthest low-degree node.
fn pseudo_peripheral(start: usize, adj: &[Vec<usize>]) -> usize {
    let mut root = start;
    let mut best_depth = 0;
    for _ in 0..8 {
        let (depth, far) = bfs_levels(root, adj);
        if depth <= best_depth && root != start {
            break;
        }
        best_depth = depth;
        if far == root {
            break;
        }
        root = far;
    }
    root
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> (usize, usize) {
    let mut level = std::collections::HashMap::new();
    level.insert(root, 0usize);
    let mut queue = VecDeque::from([root]);
    let mut last = (0, root);
    while let Some(k) = queue.pop_front() {
        let lk = level[&k];
        if lk > last.0 || (lk == last.0 && adj[k].len() < adj[last.1].len()) {
            last = (lk, k);
        }
        for &x in &adj[k] {
            if !level.contains_key(&x) {
                level.insert(x, lk + 1);
                queue.push_back(x);
            }
        }
    }
    last
}

/// Solves `A x = b` for square `A` given as (row, col, value) entries.
pub(crate) fn solve(n: usize, entries: &[Entry], rhs: &[C64]) -> Result<Vec<C64>, Singular> {
    let order = rcm_order(n, entries);
    let mut position = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }

    let (mut kl, mut ku) = (0usize, 0usize);
    let mut scale = 0.0_f64;
    for &(r, c, v) in entries {
        let (pr, pc) = (position[r], position[c]);
        if pr > pc {
            kl = kl.max(pr - pc);
        } else {
            ku = ku.max(pc - pr);
        }
        scale = scale.max(v.norm());
    }

    // Row i stores columns i − kl ..= i + ku + kl.
    let width = 2 * kl + ku + 1;
    let zero = C64::new(0.0, 0.0);
    let mut band = vec![zero; n * width];
    let at = |i: usize, j: usize| i * width + (j + kl - i);
    for &(r, c, v) in entries {
        let (pr, pc) = (position[r], position[c]);
        band[at(pr, pc)] += v;
    }
    let mut b: Vec<C64> = order.iter().map(|&old| rhs[old]).collect();

    let tiny = scale * 1e-14;
    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let last_col = (k + ku + kl).min(n - 1);

        let (mut piv, mut piv_abs) = (k, band[at(k, k)].norm());
        for r in k + 1..=last_row {
            let v = band[at(r, k)].norm();
            if v > piv_abs {
                piv = r;
                piv_abs = v;
            }
        }
        if !(piv_abs > tiny) {
            return Err(Singular { column: order[k] });
        }
        if piv != k {
            for j in k..=last_col {
                band.swap(at(k, j), at(piv, j));
            }
            b.swap(k, piv);
        }

        let pivot = band[at(k, k)];
        for r in k + 1..=last_row {
            let factor = band[at(r, k)] / pivot;
            if factor == zero {
                continue;
            }
            band[at(r, k)] = zero;
            for j in k + 1..=last_col {
                let u = band[at(k, j)];
                if u != zero {
                    band[at(r, j)] -= factor * u;
                }
            }
            let bk = b[k];
            b[r] -= factor * bk;
        }
    }

    let mut x = vec![zero; n];
    for k in (0..n).rev() {
        let last_col = (k + ku + kl).min(n - 1);
        let mut acc = b[k];
        for j in k + 1..=last_col {
            acc -= band[at(k, j)] * x[j];
        }
        x[k] = acc / band[at(k, k)];
    }

    let mut out = vec![zero; n];
    for (new, &old) in order.iter().enumerate() {
        out[old] = x[new];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn matches_dense_lu_on_scrambled_band() {
        let n = 40;
        let mut seed = 7u64;
        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = ((lcg(&mut seed) + 0.5) * (i + 1) as f64) as usize % (i + 1);
                p.swap(i, j);
            }
            p
        };
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                // small diagonal forces pivoting
                let diag = if i == j { 0.01 } else { 0.0 };
                let v = C64::new(lcg(&mut seed) + diag, lcg(&mut seed));
                entries.push((perm[i], perm[j], v));
            }
        }
        let rhs: Vec<C64> = (0..n).map(|_| C64::new(lcg(&mut seed), lcg(&mut seed))).collect();
        let x = solve(n, &entries, &rhs).unwrap();

        let mut a = DMatrix::<C64>::zeros(n, n);
        for &(r, c, v) in &entries {
            a[(r, c)] += v;
        }
        let dense = a.clone().lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let big = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for k in 0..n {
            assert!((x[k] - dense[k]).norm() < 1e-9 * big, "{k}");
        }
    }

    #[test]
    fn singular_detected() {
        let one = C64::new(1.0, 0.0);
        let entries = vec![(0, 0, one), (0, 1, one), (1, 0, one), (1, 1, one)];
        assert!(solve(2, &entries, &[one, one]).is_err());
    }
}
