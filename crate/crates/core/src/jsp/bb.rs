use super::{dispatch, DispatchRule, JspState};
use crate::error::Result;
use crate::instances::{JspInstance, Schedule};

pub const DEFAULT_JSP_NODE_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JspBbOutcome {
    pub schedule: Schedule,
    /// `true` when the search tree was exhausted, proving optimality.
    pub certified: bool,
    pub nodes: u64,
}

/// Depth-first branch-and-bound over active schedules.
///
/// Each node applies the Giffler-Thompson step: among every job's next
/// operation pick the one completing earliest (lowest job on ties), then
/// branch on every operation waiting for the same machine that could start
/// before that completion. Children are visited by earliest start, then job
/// index. A node is pruned when [`JspState::lower_bound`] reaches the
/// incumbent, which is seeded with the best dispatching-rule schedule.
pub fn solve_jsp_bb(inst: &JspInstance, node_budget: u64) -> Result<JspBbOutcome> {
    inst.validate()?;
    let incumbent = [DispatchRule::Mwr, DispatchRule::Spt, DispatchRule::Fifo]
        .into_iter()
        .map(|rule| dispatch(inst, rule))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by_key(|s| s.makespan)
        .expect("three rules");
    let mut search = Search {
        best: incumbent,
        nodes: 0,
        budget: node_budget,
        exhausted: false,
    };
    search.descend(JspState::new(inst))?;
    Ok(JspBbOutcome {
        schedule: search.best,
        certified: !search.exhausted,
        nodes: search.nodes,
    })
}

struct Search {
    best: Schedule,
    nodes: u64,
    budget: u64,
    exhausted: bool,
}

impl Search {
    fn descend(&mut self, state: JspState<'_>) -> Result<()> {
        if self.exhausted {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return Ok(());
        }
        if state.is_complete() {
            if state.current_makespan() < self.best.makespan {
                self.best = state.into_schedule()?;
            }
            return Ok(());
        }
        if state.lower_bound() >= self.best.makespan {
            return Ok(());
        }

        let inst = state.instance();
        let next = state.next_positions();
        let (pivot_job, pivot_end) = (0..inst.n_jobs)
            .filter_map(|j| {
                let est = state.earliest_start(j)?;
                Some((j, est + inst.routes[j][next[j]].duration))
            })
            .min_by_key(|&(j, end)| (end, j))
            .expect("incomplete state has a ready operation");
        let machine = inst.routes[pivot_job][next[pivot_job]].machine;

        let mut children: Vec<(u64, usize)> = (0..inst.n_jobs)
            .filter_map(|j| {
                let op = inst.routes[j].get(next[j])?;
                let est = state.earliest_start(j)?;
                (op.machine == machine && est < pivot_end).then_some((est, j))
            })
            .collect();
        children.sort_unstable();

        for (_, job) in children {
            let mut child = state.clone();
            child.schedule_next(job)?;
            self.descend(child)?;
            if self.exhausted {
                break;
            }
        }
        Ok(())
    }
}
