//! Job-shop scheduling: the disjunctive model, exact solvers, dispatching
//! rules, schedule validation and Gantt text.

mod bb;
mod brute;
mod dispatch;
mod state;

pub use bb::{solve_jsp_bb, JspBbOutcome, DEFAULT_JSP_NODE_BUDGET};
pub use brute::{brute_force_jsp, BRUTE_FORCE_MAX_OPS, BRUTE_FORCE_MAX_ORDERINGS};
pub use dispatch::{dispatch, DispatchRule};
pub use state::JspState;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::instances::{JspInstance, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpRef {
    pub job: usize,
    pub position: usize,
    pub machine: usize,
    pub duration: u64,
}

/// Big-M disjunctive formulation of an instance.
///
/// Operations are flattened job by job. `precedence` holds conjunctive arcs
/// `(pred, succ)`; `pairs` holds every unordered same-machine pair `(a, b)`
/// with `a < b`, one binary ordering variable each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjunctiveModel {
    pub ops: Vec<OpRef>,
    pub precedence: Vec<(usize, usize)>,
    pub pairs: Vec<(usize, usize)>,
    pub big_m: u64,
}

pub fn build_disjunctive(inst: &JspInstance) -> DisjunctiveModel {
    let mut ops = Vec::with_capacity(inst.n_operations());
    let mut precedence = Vec::new();
    for (job, route) in inst.routes.iter().enumerate() {
        for (position, op) in route.iter().enumerate() {
            if position > 0 {
                precedence.push((ops.len() - 1, ops.len()));
            }
            ops.push(OpRef {
                job,
                position,
                machine: op.machine,
                duration: op.duration,
            });
        }
    }
    let mut pairs = Vec::new();
    for a in 0..ops.len() {
        for b in a + 1..ops.len() {
            if ops[a].machine == ops[b].machine {
                pairs.push((a, b));
            }
        }
    }
    DisjunctiveModel {
        big_m: inst.total_work(),
        ops,
        precedence,
        pairs,
    }
}

impl DisjunctiveModel {
    /// Flattens `[job][position]` start times into model order.
    pub fn flatten(&self, starts: &[Vec<u64>]) -> Vec<u64> {
        self.ops.iter().map(|o| starts[o.job][o.position]).collect()
    }

    /// Ordering variables implied by start times: `y_ab = 1` when `a` starts first.
    pub fn orientation(&self, flat_starts: &[u64]) -> Vec<bool> {
        self.pairs
            .iter()
            .map(|&(a, b)| flat_starts[a] <= flat_starts[b])
            .collect()
    }

    /// Evaluates every constraint of the mixed-integer model for a given
    /// assignment of start times, ordering variables and makespan.
    pub fn satisfies(&self, flat_starts: &[u64], y: &[bool], makespan: u64) -> bool {
        let s = |o: usize| flat_starts[o] as i128;
        let p = |o: usize| self.ops[o].duration as i128;
        let big_m = self.big_m as i128;
        let prec = self.precedence.iter().all(|&(a, b)| s(b) >= s(a) + p(a));
        let disj = self.pairs.iter().zip(y).all(|(&(a, b), &yab)| {
            let yab = i128::from(yab);
            s(a) + p(a) <= s(b) + big_m * (1 - yab) && s(b) + p(b) <= s(a) + big_m * yab
        });
        let cmax = (0..self.ops.len()).all(|o| makespan as i128 >= s(o) + p(o));
        prec && disj && cmax
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    Precedence {
        job: usize,
        position: usize,
        start: u64,
        earliest: u64,
    },
    Overlap {
        machine: usize,
        first: (usize, usize),
        second: (usize, usize),
        amount: u64,
    },
    MakespanMismatch {
        stored: u64,
        actual: u64,
    },
}

/// Checks job precedence, machine exclusivity and the stored makespan.
/// Start times are unsigned, so non-negativity holds by construction.
/// An empty list means the schedule is feasible.
pub fn validate_schedule(inst: &JspInstance, sched: &Schedule) -> Result<Vec<ScheduleViolation>> {
    let shape_ok = sched.starts.len() == inst.n_jobs
        && sched
            .starts
            .iter()
            .zip(&inst.routes)
            .all(|(s, r)| s.len() == r.len());
    if !shape_ok {
        return Err(Error::InvalidArgument(
            "schedule shape does not match the instance routes".into(),
        ));
    }
    let model = build_disjunctive(inst);
    let flat = model.flatten(&sched.starts);
    let mut violations = Vec::new();
    for &(a, b) in &model.precedence {
        let earliest = flat[a] + model.ops[a].duration;
        if flat[b] < earliest {
            violations.push(ScheduleViolation::Precedence {
                job: model.ops[b].job,
                position: model.ops[b].position,
                start: flat[b],
                earliest,
            });
        }
    }
    for &(a, b) in &model.pairs {
        let (ea, eb) = (flat[a] + model.ops[a].duration, flat[b] + model.ops[b].duration);
        let overlap = ea.min(eb).saturating_sub(flat[a].max(flat[b]));
        if overlap > 0 {
            let (oa, ob) = (model.ops[a], model.ops[b]);
            violations.push(ScheduleViolation::Overlap {
                machine: oa.machine,
                first: (oa.job, oa.position),
                second: (ob.job, ob.position),
                amount: overlap,
            });
        }
    }
    let actual = Schedule::from_starts(inst, sched.starts.clone()).makespan;
    if actual != sched.makespan {
        violations.push(ScheduleViolation::MakespanMismatch {
            stored: sched.makespan,
            actual,
        });
    }
    Ok(violations)
}

/// Renders one line per machine, e.g. `Machine M1: [0–3] J1-1, [3–5] J3-2`.
/// Machines, jobs and positions are printed 1-based.
pub fn render_gantt(inst: &JspInstance, sched: &Schedule) -> String {
    let mut per_machine: Vec<Vec<(u64, u64, usize, usize)>> = vec![Vec::new(); inst.n_machines];
    for (j, route) in inst.routes.iter().enumerate() {
        for (k, op) in route.iter().enumerate() {
            let s = sched.starts[j][k];
            per_machine[op.machine].push((s, s + op.duration, j, k));
        }
    }
    let mut out = String::new();
    for (m, mut slots) in per_machine.into_iter().enumerate() {
        slots.sort_unstable();
        let body: Vec<String> = slots
            .iter()
            .map(|(s, e, j, k)| format!("[{s}–{e}] J{}-{}", j + 1, k + 1))
            .collect();
        let _ = writeln!(out, "Machine M{}: {}", m + 1, body.join(", "));
    }
    out
}

/// Parses text in the [`render_gantt`] layout back into a schedule. Accepts
/// `–`, `--` or `-` between interval ends.
pub fn parse_gantt(inst: &JspInstance, text: &str) -> Result<Schedule> {
    let mut starts: Vec<Vec<Option<u64>>> = inst.routes.iter().map(|r| vec![None; r.len()]).collect();
    let bad = |line: usize, message: String| Error::Parse { line, message };
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (head, body) = line
            .split_once(':')
            .ok_or_else(|| bad(line_no, "expected `Machine Mk: ...`".into()))?;
        let machine: usize = head
            .trim()
            .strip_prefix("Machine M")
            .and_then(|s| s.parse().ok())
            .filter(|&m| m >= 1 && m <= inst.n_machines)
            .ok_or_else(|| bad(line_no, format!("bad machine label {head:?}")))?;
        for slot in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (interval, op) = slot
                .strip_prefix('[')
                .and_then(|s| s.split_once(']'))
                .ok_or_else(|| bad(line_no, format!("bad slot {slot:?}")))?;
            let interval = interval.replace("--", "–").replace('-', "–");
            let (s, e) = interval
                .split_once('–')
                .and_then(|(s, e)| Some((s.trim().parse::<u64>().ok()?, e.trim().parse::<u64>().ok()?)))
                .ok_or_else(|| bad(line_no, format!("bad interval in {slot:?}")))?;
            let (j, k) = op
                .trim()
                .strip_prefix('J')
                .and_then(|s| s.split_once('-'))
                .and_then(|(j, k)| Some((j.parse::<usize>().ok()?, k.parse::<usize>().ok()?)))
                .filter(|&(j, k)| j >= 1 && k >= 1)
                .ok_or_else(|| bad(line_no, format!("bad operation label in {slot:?}")))?;
            let (j, k) = (j - 1, k - 1);
            let op = inst
                .routes
                .get(j)
                .and_then(|r| r.get(k))
                .ok_or_else(|| bad(line_no, format!("J{}-{} not in instance", j + 1, k + 1)))?;
            if op.machine != machine - 1 {
                return Err(bad(line_no, format!("J{}-{} does not run on M{machine}", j + 1, k + 1)));
            }
            if e < s || e - s != op.duration {
                return Err(bad(line_no, format!("J{}-{} lasts {}, interval is [{s}, {e}]", j + 1, k + 1, op.duration)));
            }
            if starts[j][k].replace(s).is_some() {
                return Err(bad(line_no, format!("J{}-{} listed twice", j + 1, k + 1)));
            }
        }
    }
    let starts = starts
        .into_iter()
        .enumerate()
        .map(|(j, row)| {
            row.into_iter()
                .enumerate()
                .map(|(k, s)| {
                    s.ok_or_else(|| Error::Parse {
                        line: 0,
                        message: format!("J{}-{} missing from chart", j + 1, k + 1),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Schedule::from_starts(inst, starts))
}

/// `max(max machine load, max job length)`, valid for every feasible schedule.
pub fn trivial_lower_bound(inst: &JspInstance) -> u64 {
    let mut load = vec![0u64; inst.n_machines];
    let mut longest_job = 0;
    for route in &inst.routes {
        longest_job = longest_job.max(route.iter().map(|o| o.duration).sum());
        for op in route {
            load[op.machine] += op.duration;
        }
    }
    load.into_iter().max().unwrap_or(0).max(longest_job)
}
