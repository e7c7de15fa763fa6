use crate::error::{Error, Result};
use crate::instances::{JspInstance, Schedule};

pub const BRUTE_FORCE_MAX_OPS: usize = 12;
/// Cap on the product of per-machine permutation counts.
pub const BRUTE_FORCE_MAX_ORDERINGS: u128 = 50_000_000;

/// Exhaustive oracle: tries every processing order on every machine,
/// evaluates each combination by longest path through the precedence and
/// machine-order arcs (skipping cyclic ones), and keeps the shortest.
///
/// Every optimal schedule is the earliest-start realization of its machine
/// orders, so the minimum over all combinations is the optimum.
pub fn brute_force_jsp(inst: &JspInstance) -> Result<Schedule> {
    inst.validate()?;
    let n_ops = inst.n_operations();
    if n_ops > BRUTE_FORCE_MAX_OPS {
        return Err(Error::ResourceLimit(format!(
            "{n_ops} operations exceed the exhaustive limit of {BRUTE_FORCE_MAX_OPS}"
        )));
    }

    // Flat operations and their job predecessors.
    let mut durations = Vec::with_capacity(n_ops);
    let mut job_pred = Vec::with_capacity(n_ops);
    let mut on_machine: Vec<Vec<usize>> = vec![Vec::new(); inst.n_machines];
    for route in &inst.routes {
        for (k, op) in route.iter().enumerate() {
            let idx = durations.len();
            job_pred.push((k > 0).then(|| idx - 1));
            durations.push(op.duration);
            on_machine[op.machine].push(idx);
        }
    }

    let perms: Vec<Vec<Vec<usize>>> = on_machine.iter().map(|ops| permutations(ops)).collect();
    let combos: u128 = perms.iter().map(|p| p.len() as u128).product();
    if combos > BRUTE_FORCE_MAX_ORDERINGS {
        return Err(Error::ResourceLimit(format!(
            "{combos} machine orderings exceed the exhaustive limit of {BRUTE_FORCE_MAX_ORDERINGS}"
        )));
    }

    let mut choice = vec![0usize; perms.len()];
    let mut best: Option<(u64, Vec<u64>)> = None;
    let mut machine_pred = vec![None; n_ops];
    loop {
        for (m, perm) in perms.iter().enumerate() {
            let order = &perm[choice[m]];
            for (i, &op) in order.iter().enumerate() {
                machine_pred[op] = (i > 0).then(|| order[i - 1]);
            }
        }
        if let Some(starts) = earliest_starts(&durations, &job_pred, &machine_pred) {
            let makespan = starts
                .iter()
                .zip(&durations)
                .map(|(s, p)| s + p)
                .max()
                .unwrap_or(0);
            if best.as_ref().map_or(true, |(b, _)| makespan < *b) {
                best = Some((makespan, starts));
            }
        }
        // Mixed-radix increment over the per-machine choices.
        let mut m = 0;
        loop {
            if m == choice.len() {
                let (_, flat) = best.expect("the job-order combination is acyclic");
                let mut it = flat.into_iter();
                let starts = inst
                    .routes
                    .iter()
                    .map(|r| it.by_ref().take(r.len()).collect())
                    .collect();
                return Ok(Schedule::from_starts(inst, starts));
            }
            choice[m] += 1;
            if choice[m] < perms[m].len() {
                break;
            }
            choice[m] = 0;
            m += 1;
        }
    }
}

/// Longest-path start times, or `None` when the arcs contain a cycle.
fn earliest_starts(
    durations: &[u64],
    job_pred: &[Option<usize>],
    machine_pred: &[Option<usize>],
) -> Option<Vec<u64>> {
    let n = durations.len();
    let mut start: Vec<Option<u64>> = vec![None; n];
    let mut done = 0;
    while done < n {
        let mut progressed = false;
        for o in 0..n {
            if start[o].is_some() {
                continue;
            }
            let ready = |p: Option<usize>| match p {
                None => Some(0),
                Some(p) => start[p].map(|s| s + durations[p]),
            };
            if let (Some(a), Some(b)) = (ready(job_pred[o]), ready(machine_pred[o])) {
                start[o] = Some(a.max(b));
                done += 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    start.into_iter().collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}
