use crate::error::{Error, Result};
use crate::instances::{JspInstance, Schedule};

/// Partial schedule built by appending operations to machines.
///
/// Every transition starts the chosen job's next operation at
/// `max(job ready, machine ready)`, so any completed rollout is feasible.
/// All release dates are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JspState<'a> {
    inst: &'a JspInstance,
    next: Vec<usize>,
    job_ready: Vec<u64>,
    machine_ready: Vec<u64>,
    starts: Vec<Vec<u64>>,
    scheduled: usize,
}

impl<'a> JspState<'a> {
    pub fn new(inst: &'a JspInstance) -> Self {
        Self {
            inst,
            next: vec![0; inst.n_jobs],
            job_ready: vec![0; inst.n_jobs],
            machine_ready: vec![0; inst.n_machines],
            starts: inst.routes.iter().map(|r| vec![0; r.len()]).collect(),
            scheduled: 0,
        }
    }

    pub fn instance(&self) -> &'a JspInstance {
        self.inst
    }

    /// Position of each job's next unscheduled operation (route length when done).
    pub fn next_positions(&self) -> &[usize] {
        &self.next
    }

    pub fn job_ready(&self) -> &[u64] {
        &self.job_ready
    }

    pub fn machine_ready(&self) -> &[u64] {
        &self.machine_ready
    }

    pub fn scheduled_count(&self) -> usize {
        self.scheduled
    }

    pub fn is_complete(&self) -> bool {
        self.scheduled == self.inst.n_operations()
    }

    pub fn is_scheduled(&self, job: usize, position: usize) -> bool {
        position < self.next[job]
    }

    /// Start time of a scheduled operation.
    pub fn start_of(&self, job: usize, position: usize) -> Option<u64> {
        self.is_scheduled(job, position)
            .then(|| self.starts[job][position])
    }

    pub fn has_next(&self, job: usize) -> bool {
        self.next[job] < self.inst.routes[job].len()
    }

    /// Earliest start of the job's next operation, if any remains.
    pub fn earliest_start(&self, job: usize) -> Option<u64> {
        let op = self.inst.routes[job].get(self.next[job])?;
        Some(self.job_ready[job].max(self.machine_ready[op.machine]))
    }

    /// Schedules the next operation of `job`; returns its start time.
    pub fn schedule_next(&mut self, job: usize) -> Result<u64> {
        let Some(start) = self.earliest_start(job) else {
            return Err(Error::IllegalAction {
                action: job,
                reason: format!("job {job} has no unscheduled operation"),
            });
        };
        let pos = self.next[job];
        let op = self.inst.routes[job][pos];
        let end = start + op.duration;
        self.starts[job][pos] = start;
        self.job_ready[job] = end;
        self.machine_ready[op.machine] = end;
        self.next[job] += 1;
        self.scheduled += 1;
        Ok(start)
    }

    /// Completion time of everything scheduled so far.
    pub fn current_makespan(&self) -> u64 {
        self.job_ready.iter().copied().max().unwrap_or(0)
    }

    pub fn into_schedule(self) -> Result<Schedule> {
        if !self.is_complete() {
            return Err(Error::State(format!(
                "{} of {} operations scheduled",
                self.scheduled,
                self.inst.n_operations()
            )));
        }
        Ok(Schedule::from_starts(self.inst, self.starts))
    }

    /// Lower bound on the makespan of every completion of this state.
    ///
    /// The maximum of the current makespan, a per-job bound (earliest start of
    /// the next operation plus remaining work) and a per-machine bound
    /// (earliest head plus remaining load plus shortest tail).
    pub fn lower_bound(&self) -> u64 {
        let inst = self.inst;
        let mut bound = self.current_makespan();
        let m = inst.n_machines;
        let mut min_head = vec![u64::MAX; m];
        let mut load = vec![0u64; m];
        let mut min_tail = vec![u64::MAX; m];
        for (j, route) in inst.routes.iter().enumerate() {
            let Some(mut head) = self.earliest_start(j) else {
                continue;
            };
            let remaining: u64 = route[self.next[j]..].iter().map(|o| o.duration).sum();
            bound = bound.max(head + remaining);
            let mut tail = remaining;
            for op in &route[self.next[j]..] {
                tail -= op.duration;
                min_head[op.machine] = min_head[op.machine].min(head);
                load[op.machine] += op.duration;
                min_tail[op.machine] = min_tail[op.machine].min(tail);
                head += op.duration;
            }
        }
        for k in 0..m {
            if load[k] > 0 {
                let start = min_head[k].max(self.machine_ready[k]);
                bound = bound.max(start + load[k] + min_tail[k]);
            }
        }
        bound
    }
}
