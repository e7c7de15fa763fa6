use super::JspState;
use crate::error::Result;
use crate::instances::{JspInstance, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispatchRule {
    /// Shortest processing time.
    Spt,
    /// Most work remaining in the job.
    Mwr,
    /// Lowest job index.
    Fifo,
}

impl std::str::FromStr for DispatchRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "spt" => Ok(Self::Spt),
            "mwr" => Ok(Self::Mwr),
            "fifo" => Ok(Self::Fifo),
            other => Err(format!("unknown dispatch rule {other:?}")),
        }
    }
}

/// Non-delay list scheduling: at each step only operations that can start at
/// the earliest possible time compete, and the rule picks one (job index
/// breaks ties).
pub fn dispatch(inst: &JspInstance, rule: DispatchRule) -> Result<Schedule> {
    inst.validate()?;
    let remaining: Vec<Vec<u64>> = inst
        .routes
        .iter()
        .map(|r| {
            let mut acc = 0;
            let mut rem: Vec<u64> = r
                .iter()
                .rev()
                .map(|o| {
                    acc += o.duration;
                    acc
                })
                .collect();
            rem.reverse();
            rem
        })
        .collect();

    let mut state = JspState::new(inst);
    while !state.is_complete() {
        let ready: Vec<(usize, u64)> = (0..inst.n_jobs)
            .filter_map(|j| Some((j, state.earliest_start(j)?)))
            .collect();
        let t = ready.iter().map(|&(_, s)| s).min().expect("ready operation");
        let next = state.next_positions();
        let job = ready
            .iter()
            .filter(|&&(_, s)| s == t)
            .map(|&(j, _)| j)
            .min_by_key(|&j| {
                let key = match rule {
                    DispatchRule::Spt => inst.routes[j][next[j]].duration as i64,
                    DispatchRule::Mwr => -(remaining[j][next[j]] as i64),
                    DispatchRule::Fifo => 0,
                };
                (key, j)
            })
            .expect("at least one candidate");
        state.schedule_next(job)?;
    }
    state.into_schedule()
}
