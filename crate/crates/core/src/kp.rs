//! Exact and heuristic 0-1 knapsack solvers.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::instances::{KpInstance, KpSolution};

/// Default DP work budget, counted in `items x (capacity + 1)` table cells.
pub const DEFAULT_DP_CELL_BUDGET: u64 = 1 << 31;
pub const DEFAULT_BB_NODE_BUDGET: u64 = 10_000_000;

pub fn solve_kp_dp(inst: &KpInstance) -> Result<KpSolution> {
    solve_kp_dp_with_budget(inst, DEFAULT_DP_CELL_BUDGET)
}

/// Pseudo-polynomial DP over capacities with one decision bit per
/// `(item, capacity)` cell for reconstruction.
///
/// When including an item ties with excluding it, exclusion wins, so the
/// reconstructed set is deterministic.
pub fn solve_kp_dp_with_budget(inst: &KpInstance, cell_budget: u64) -> Result<KpSolution> {
    inst.validate()?;
    let cap = inst.capacity as usize;
    let items = fitting_items(inst);
    let cells = (items.len() as u64).saturating_mul(inst.capacity + 1);
    if cells > cell_budget {
        return Err(Error::ResourceLimit(format!(
            "dp needs {cells} cells, budget is {cell_budget}; use branch-and-bound instead"
        )));
    }

    let words = (cap + 1).div_ceil(64);
    let mut take = vec![0u64; items.len() * words];
    let mut best = vec![0u64; cap + 1];
    for (row, &i) in items.iter().enumerate() {
        let (w, v) = (inst.weights[i] as usize, inst.values[i]);
        let bits = &mut take[row * words..(row + 1) * words];
        for c in (w..=cap).rev() {
            let with = best[c - w] + v;
            if with > best[c] {
                best[c] = with;
                bits[c / 64] |= 1 << (c % 64);
            }
        }
    }

    let mut selected = vec![false; inst.len()];
    let mut c = cap;
    for (row, &i) in items.iter().enumerate().rev() {
        if take[row * words + c / 64] >> (c % 64) & 1 == 1 {
            selected[i] = true;
            c -= inst.weights[i] as usize;
        }
    }
    let sol = KpSolution::from_selection(inst, selected);
    debug_assert_eq!(sol.objective, best[cap]);
    Ok(sol)
}

/// Result of a budgeted branch-and-bound run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbOutcome {
    pub solution: KpSolution,
    /// `false` when the node budget ran out before the tree was exhausted.
    pub certified: bool,
    pub nodes: u64,
}

pub fn solve_kp_bb(inst: &KpInstance) -> Result<BbOutcome> {
    solve_kp_bb_with_budget(inst, DEFAULT_BB_NODE_BUDGET)
}

/// Depth-first branch-and-bound, include branch first, pruned by the Dantzig
/// fractional bound over items sorted by value/weight ratio.
pub fn solve_kp_bb_with_budget(inst: &KpInstance, node_budget: u64) -> Result<BbOutcome> {
    inst.validate()?;
    let order = ratio_order(inst, fitting_items(inst));
    let mut search = KpSearch {
        weights: order.iter().map(|&i| inst.weights[i]).collect(),
        values: order.iter().map(|&i| inst.values[i]).collect(),
        path: vec![false; order.len()],
        best_value: 0,
        best_path: vec![false; order.len()],
        nodes: 0,
        budget: node_budget,
        exhausted: false,
    };
    search.descend(0, inst.capacity, 0);

    let mut selected = vec![false; inst.len()];
    for (pos, &i) in order.iter().enumerate() {
        selected[i] = search.best_path[pos];
    }
    Ok(BbOutcome {
        solution: KpSolution::from_selection(inst, selected),
        certified: !search.exhausted,
        nodes: search.nodes,
    })
}

struct KpSearch {
    weights: Vec<u64>,
    values: Vec<u64>,
    path: Vec<bool>,
    best_value: u64,
    best_path: Vec<bool>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl KpSearch {
    /// Dantzig bound for the subtree rooted at `depth`.
    fn bound(&self, depth: usize, residual: u64, value: u64) -> u64 {
        let mut room = residual;
        let mut total = value;
        for k in depth..self.weights.len() {
            let (w, v) = (self.weights[k], self.values[k]);
            if w <= room {
                room -= w;
                total += v;
            } else {
                // Objective is integral, so the floor of the fractional part is still a bound.
                return total + (u128::from(v) * u128::from(room) / u128::from(w)) as u64;
            }
        }
        total
    }

    fn descend(&mut self, depth: usize, residual: u64, value: u64) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if value > self.best_value {
            self.best_value = value;
            // Entries at or beyond `depth` are always false here.
            self.best_path.copy_from_slice(&self.path);
        }
        if depth == self.weights.len() || self.bound(depth, residual, value) <= self.best_value {
            return;
        }
        let (w, v) = (self.weights[depth], self.values[depth]);
        if w <= residual {
            self.path[depth] = true;
            self.descend(depth + 1, residual - w, value + v);
            self.path[depth] = false;
        }
        self.descend(depth + 1, residual, value);
    }
}

/// Greedy by value/weight ratio: scan items best ratio first (ties by lower
/// index) and take every item that still fits.
pub fn greedy_ratio(inst: &KpInstance) -> KpSolution {
    let mut residual = inst.capacity;
    let mut selected = vec![false; inst.len()];
    for i in ratio_order(inst, fitting_items(inst)) {
        if inst.weights[i] <= residual {
            residual -= inst.weights[i];
            selected[i] = true;
        }
    }
    KpSolution::from_selection(inst, selected)
}

/// Items sorted by `v/w` descending, lower index first on ties. Zero-weight
/// items sort ahead of everything.
pub fn ratio_order(inst: &KpInstance, mut items: Vec<usize>) -> Vec<usize> {
    items.sort_by(|&a, &b| compare_ratio(inst, b, a).then(a.cmp(&b)));
    items
}

fn compare_ratio(inst: &KpInstance, a: usize, b: usize) -> Ordering {
    let lhs = u128::from(inst.values[a]) * u128::from(inst.weights[b]);
    let rhs = u128::from(inst.values[b]) * u128::from(inst.weights[a]);
    match (inst.weights[a], inst.weights[b]) {
        (0, 0) => inst.values[a].cmp(&inst.values[b]),
        (0, _) => Ordering::Greater,
        (_, 0) => Ordering::Less,
        _ => lhs.cmp(&rhs),
    }
}

fn fitting_items(inst: &KpInstance) -> Vec<usize> {
    (0..inst.len())
        .filter(|&i| inst.weights[i] <= inst.capacity)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KpViolation {
    CapacityExceeded { used: u64, capacity: u64, excess: u64 },
    ObjectiveMismatch { stored: u64, actual: u64 },
    WeightMismatch { stored: u64, actual: u64 },
}

pub const BRUTE_FORCE_MAX_ITEMS: usize = 25;

/// Enumerates every subset. The lowest subset bitmask wins ties.
pub fn brute_force_kp(inst: &KpInstance) -> Result<KpSolution> {
    let n = inst.len();
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(Error::ResourceLimit(format!(
            "{n} items is beyond exhaustive enumeration ({BRUTE_FORCE_MAX_ITEMS} max)"
        )));
    }
    let mut best = (0u64, 0u32);
    for mask in 0u32..1 << n {
        let (mut w, mut v) = (0u64, 0u64);
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            w += inst.weights[i];
            v += inst.values[i];
        }
        if w <= inst.capacity && v > best.0 {
            best = (v, mask);
        }
    }
    let selected = (0..n).map(|i| best.1 >> i & 1 == 1).collect();
    Ok(KpSolution::from_selection(inst, selected))
}

/// Checks a solution against its instance. An empty list means the solution is valid.
pub fn validate_kp(inst: &KpInstance, sol: &KpSolution) -> Result<Vec<KpViolation>> {
    if sol.selected.len() != inst.len() {
        return Err(Error::InvalidArgument(format!(
            "selection has {} entries for {} items",
            sol.selected.len(),
            inst.len()
        )));
    }
    let actual = KpSolution::from_selection(inst, sol.selected.clone());
    let mut violations = Vec::new();
    if actual.weight_used > inst.capacity {
        violations.push(KpViolation::CapacityExceeded {
            used: actual.weight_used,
            capacity: inst.capacity,
            excess: actual.weight_used - inst.capacity,
        });
    }
    if sol.objective != actual.objective {
        violations.push(KpViolation::ObjectiveMismatch {
            stored: sol.objective,
            actual: actual.objective,
        });
    }
    if sol.weight_used != actual.weight_used {
        violations.push(KpViolation::WeightMismatch {
            stored: sol.weight_used,
            actual: actual.weight_used,
        });
    }
    Ok(violations)
}
