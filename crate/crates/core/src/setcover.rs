//! Exact and greedy set cover over universes of at most 64 elements.
//!
//! Sets and the universe are bitmasks. The exact solver branches on the
//! uncovered element with the fewest covering sets and prunes with the
//! `⌈|uncovered| / largest remaining set⌉` bound. Among optimal covers it
//! returns the lexicographically smallest sorted index list.

use crate::error::{Error, Result};

pub const MAX_UNIVERSE: usize = 64;

#[inline]
fn full_mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Greedy cover: repeatedly take the set covering the most uncovered
/// elements, lowest index on ties. `None` if the sets do not cover.
pub fn greedy(universe: usize, sets: &[u64]) -> Option<Vec<usize>> {
    let mut uncovered = full_mask(universe);
    let mut chosen = Vec::new();
    while uncovered != 0 {
        let (best, gain) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, (s & uncovered).count_ones()))
            .fold((usize::MAX, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if gain == 0 {
            return None;
        }
        chosen.push(best);
        uncovered &= !sets[best];
    }
    chosen.sort_unstable();
    Some(chosen)
}

struct Solver<'a> {
    sets: &'a [u64],
    /// `covering[e]`: indices of the sets containing `e`.
    covering: Vec<Vec<usize>>,
}

impl<'a> Solver<'a> {
    fn new(universe: usize, sets: &'a [u64]) -> Self {
        let mut covering = vec![Vec::new(); universe];
        for (i, &s) in sets.iter().enumerate() {
            let mut m = s & full_mask(universe);
            while m != 0 {
                covering[m.trailing_zeros() as usize].push(i);
                m &= m - 1;
            }
        }
        Self { sets, covering }
    }

    /// Whether `uncovered` can be covered by at most `budget` of the sets
    /// flagged in `allowed`. `allowed` is restored before returning.
    fn feasible(&self, uncovered: u64, budget: usize, allowed: &mut Vec<bool>) -> bool {
        if uncovered == 0 {
            return true;
        }
        if budget == 0 {
            return false;
        }
        let need = uncovered.count_ones() as usize;
        let widest = self
            .sets
            .iter()
            .enumerate()
            .filter(|(i, _)| allowed[*i])
            .map(|(_, s)| (s & uncovered).count_ones() as usize)
            .max()
            .unwrap_or(0);
        if widest == 0 || need.div_ceil(widest) > budget {
            return false;
        }
        let mut pick = None;
        let mut fewest = usize::MAX;
        let mut m = uncovered;
        while m != 0 {
            let e = m.trailing_zeros() as usize;
            m &= m - 1;
            let k = self.covering[e].iter().filter(|&&i| allowed[i]).count();
            if k < fewest {
                fewest = k;
                pick = Some(e);
            }
        }
        let e = pick.unwrap();
        if fewest == 0 {
            return false;
        }
        let branches: Vec<usize> = self.covering[e].iter().copied().filter(|&i| allowed[i]).collect();
        let mut removed = Vec::new();
        let mut found = false;
        for i in branches {
            if self.feasible(uncovered & !self.sets[i], budget - 1, allowed) {
                found = true;
                break;
            }
            // Every cover containing `i` was explored in this branch.
            allowed[i] = false;
            removed.push(i);
        }
        for i in removed {
            allowed[i] = true;
        }
        found
    }
}

/// Minimum cover, lexicographically smallest among the optimal ones.
/// `Ok(None)` if the sets do not cover the universe.
pub fn exact(universe: usize, sets: &[u64]) -> Result<Option<Vec<usize>>> {
    if universe > MAX_UNIVERSE {
        return Err(Error::SizeLimit { size: universe, limit: MAX_UNIVERSE });
    }
    let Some(warm) = greedy(universe, sets) else {
        return Ok(None);
    };
    let solver = Solver::new(universe, sets);
    let full = full_mask(universe);
    let mut allowed = vec![true; sets.len()];
    let mut k = 0;
    while k < warm.len() && !solver.feasible(full, k, &mut allowed) {
        k += 1;
    }
    // Fix members one at a time, smallest index first.
    let mut chosen = Vec::with_capacity(k);
    let mut uncovered = full;
    let mut next = 0;
    while uncovered != 0 {
        let budget = k - chosen.len();
        let pick = (next..sets.len()).find(|&i| {
            let mut allowed: Vec<bool> = (0..sets.len()).map(|j| j > i).collect();
            sets[i] & uncovered != 0 && solver.feasible(uncovered & !sets[i], budget - 1, &mut allowed)
        });
        debug_assert!(pick.is_some());
        let Some(i) = pick else { break };
        chosen.push(i);
        uncovered &= !sets[i];
        next = i + 1;
    }
    Ok(Some(chosen))
}

/// Whether the listed sets cover the universe.
pub fn covers(universe: usize, sets: &[u64], chosen: &[usize]) -> bool {
    chosen.iter().fold(0u64, |acc, &i| acc | sets[i]) & full_mask(universe) == full_mask(universe)
}
