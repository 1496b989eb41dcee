//! Exhaustive enumeration of small configuration spaces: boxes, fixed
//! particle-number sectors, allowed-move graphs and a dense stationary
//! solver for the sector chains.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{Configuration, Kernel, RateFunction};

/// A fully enumerated configuration space with its allowed moves.
#[derive(Debug, Clone)]
pub struct EnumeratedSpace {
    pub states: Vec<Configuration>,
    index: HashMap<Vec<u32>, usize>,
    /// Per state: `(x, y, rate, target state)` for every move with
    /// positive rate that stays inside the enumerated space.
    pub moves: Vec<Vec<(usize, usize, f64, usize)>>,
}

impl EnumeratedSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, eta: &Configuration) -> Option<usize> {
        self.index.get(eta.occupancies()).copied()
    }

    fn from_states(
        states: Vec<Configuration>,
        b: &RateFunction,
        kernel: &Kernel,
        box_cap: u32,
    ) -> Result<Self> {
        let index: HashMap<Vec<u32>, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.occupancies().to_vec(), i))
            .collect();
        let mut moves = Vec::with_capacity(states.len());
        for eta in &states {
            let mut out = Vec::new();
            for (x, y, pxy) in kernel.edges() {
                if eta.get(x) == 0 || eta.get(y) >= box_cap {
                    continue;
                }
                let rate = pxy * b.rate(eta.get(x), eta.get(y))?;
                if rate > 0.0 {
                    let mut occ = eta.occupancies().to_vec();
                    occ[x] -= 1;
                    occ[y] += 1;
                    let target = *index
                        .get(&occ)
                        .ok_or_else(|| Error::invalid("move leaves enumerated space"))?;
                    out.push((x, y, rate, target));
                }
            }
            moves.push(out);
        }
        Ok(EnumeratedSpace {
            states,
            index,
            moves,
        })
    }
}

/// All configurations of `sites` sites with occupancies in `{0, ..., cap}`.
pub fn enumerate_box(sites: usize, cap: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; sites];
    loop {
        out.push(current.clone());
        let mut i = 0;
        loop {
            if i == sites {
                return out;
            }
            if current[i] < cap {
                current[i] += 1;
                for c in current.iter_mut().take(i) {
                    *c = 0;
                }
                break;
            }
            i += 1;
        }
    }
}

/// All configurations with occupancies `<= cap` summing to `total`.
pub fn enumerate_sector(sites: usize, cap: u32, total: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; sites];
    fn rec(current: &mut Vec<u32>, pos: usize, remaining: u32, cap: u32, out: &mut Vec<Vec<u32>>) {
        if pos + 1 == current.len() {
            if remaining <= cap {
                current[pos] = remaining;
                out.push(current.clone());
            }
            return;
        }
        for v in 0..=remaining.min(cap) {
            current[pos] = v;
            rec(current, pos + 1, remaining - v, cap, out);
        }
    }
    rec(&mut current, 0, total, cap, &mut out);
    out
}

/// Enumerate the box `{0..box_cap}^sites` with its allowed moves. Moves
/// that would push an occupancy above `box_cap` are excluded, which for
/// finite alphabets is already forced by `b(., max) = 0`.
pub fn enumerate_box_space(
    b: &RateFunction,
    kernel: &Kernel,
    box_cap: u32,
) -> Result<EnumeratedSpace> {
    b.range().check(box_cap)?;
    let states = enumerate_box(kernel.sites(), box_cap)
        .into_iter()
        .map(|occ| Configuration::new(occ, b.range()))
        .collect::<Result<Vec<_>>>()?;
    EnumeratedSpace::from_states(states, b, kernel, box_cap)
}

/// Enumerate the particle-number sector `sum eta = total`, which is closed
/// under the conservative moves.
pub fn enumerate_sector_space(
    b: &RateFunction,
    kernel: &Kernel,
    total: u32,
) -> Result<EnumeratedSpace> {
    let cap = b.range().cap().min(total.max(1));
    b.range().check(total.min(cap))?;
    if total > cap * kernel.sites() as u32 {
        return Err(Error::invalid(format!(
            "sector {total} empty: capacity is {}",
            cap * kernel.sites() as u32
        )));
    }
    let states = enumerate_sector(kernel.sites(), cap, total)
        .into_iter()
        .map(|occ| Configuration::new(occ, b.range()))
        .collect::<Result<Vec<_>>>()?;
    EnumeratedSpace::from_states(states, b, kernel, cap)
}

/// Strongly connected components of the allowed-move graph, each sorted,
/// in order of their smallest state index.
pub fn communication_classes(space: &EnumeratedSpace) -> Vec<Vec<usize>> {
    // Kosaraju: order by forward DFS finish times, then sweep the
    // transpose.
    let n = space.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // Iterative DFS with an explicit phase marker.
        let mut stack = vec![(start, false)];
        while let Some((s, done)) = stack.pop() {
            if done {
                order.push(s);
                continue;
            }
            if seen[s] {
                continue;
            }
            seen[s] = true;
            stack.push((s, true));
            for &(_, _, _, t) in &space.moves[s] {
                if !seen[t] {
                    stack.push((t, false));
                }
            }
        }
    }
    let mut transpose = vec![Vec::new(); n];
    for (s, moves) in space.moves.iter().enumerate() {
        for &(_, _, _, t) in moves {
            transpose[t].push(s);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &start in order.iter().rev() {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = Vec::new();
        let mut stack = vec![start];
        comp[start] = id;
        while let Some(s) = stack.pop() {
            members.push(s);
            for &t in &transpose[s] {
                if comp[t] == usize::MAX {
                    comp[t] = id;
                    stack.push(t);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Stationary law of the jump chain on an enumerated (sector) space by a
/// dense linear solve of `pi L = 0`, `sum pi = 1`.
pub fn stationary_law(space: &EnumeratedSpace) -> Result<Vec<f64>> {
    let n = space.len();
    if n == 0 {
        return Err(Error::invalid("empty space"));
    }
    // M = L^T with the last equation replaced by normalization.
    let mut m = vec![vec![0.0_f64; n]; n];
    for (s, moves) in space.moves.iter().enumerate() {
        for &(_, _, rate, t) in moves {
            m[t][s] += rate;
            m[s][s] -= rate;
        }
    }
    for col in 0..n {
        m[n - 1][col] = 1.0;
    }
    let mut rhs = vec![0.0_f64; n];
    rhs[n - 1] = 1.0;
    solve_dense(&mut m, &mut rhs)?;
    Ok(rhs)
}

/// In-place Gaussian elimination with partial pivoting; solution left in
/// `rhs`.
fn solve_dense(m: &mut [Vec<f64>], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::invalid("singular sector generator"));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        rhs[col] /= m[col][col];
        for row in 0..col {
            rhs[row] -= m[row][col] * rhs[col];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_and_sector_counts() {
        assert_eq!(enumerate_box(3, 2).len(), 27);
        assert_eq!(enumerate_sector(3, 2, 3).len(), 7);
        // Sector states all sum correctly.
        for occ in enumerate_sector(4, 2, 5) {
            assert_eq!(occ.iter().sum::<u32>(), 5);
        }
    }

    #[test]
    fn exclusion_cycle_components_are_level_sets() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let space = enumerate_box_space(&b, &p, 1).unwrap();
        let classes = communication_classes(&space);
        assert_eq!(classes.len(), 4); // m = 0..3
        for class in classes {
            let totals: Vec<u64> = class.iter().map(|&s| space.states[s].total()).collect();
            assert!(totals.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn stationary_solve_uniform_on_symmetric_sector() {
        let b = RateFunction::exclusion().unwrap();
        let p = Kernel::cycle(3).unwrap();
        let space = enumerate_sector_space(&b, &p, 1).unwrap();
        let pi = stationary_law(&space).unwrap();
        assert_eq!(pi.len(), 3);
        for &x in &pi {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
