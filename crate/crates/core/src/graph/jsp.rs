use super::{Edge, EdgeKind, Environment, HetGraph, Node, NodeType};
use crate::error::{Error, Result};
use crate::instances::Schedule;
use crate::jsp::JspState;

impl<'a> JspState<'a> {
    /// Schedules the operation with flat index `op`, which must be its job's
    /// next operation. Returns the new state and the assigned start time.
    pub fn apply_action(&self, op: usize) -> Result<(Self, u64)> {
        let job = self.job_of_action(op)?;
        let mut next = self.clone();
        let start = next.schedule_next(job)?;
        Ok((next, start))
    }

    fn job_of_action(&self, op: usize) -> Result<usize> {
        let inst = self.instance();
        let mut base = 0;
        for (j, route) in inst.routes.iter().enumerate() {
            if op < base + route.len() {
                let pos = op - base;
                if pos != self.next_positions()[j] {
                    return Err(Error::IllegalAction {
                        action: op,
                        reason: format!("J{}-{} is not its job's next operation", j + 1, pos + 1),
                    });
                }
                return Ok(j);
            }
            base += route.len();
        }
        Err(Error::IllegalAction {
            action: op,
            reason: format!("only {base} operations"),
        })
    }
}

impl<'a> Environment for JspState<'a> {
    type Outcome = Schedule;

    /// Operation nodes in flat order, then one node per machine.
    ///
    /// Operation features: duration / max duration, machine / machine count,
    /// scheduled flag, start (scheduled) or chain-based earliest-start
    /// estimate (unscheduled) over the horizon `Σp`. Machine feature: ready
    /// time over the horizon.
    fn encode(&self) -> HetGraph {
        let inst = self.instance();
        let horizon = inst.total_work().max(1) as f64;
        let max_p = inst.max_duration().max(1) as f64;
        let n_ops = inst.n_operations();
        let offsets = inst.job_offsets();

        let mut nodes = Vec::with_capacity(n_ops + inst.n_machines);
        let mut mask = vec![false; n_ops];
        for (j, route) in inst.routes.iter().enumerate() {
            let mut estimate = self.earliest_start(j).unwrap_or(0);
            for (k, op) in route.iter().enumerate() {
                let (flag, start) = match self.start_of(j, k) {
                    Some(s) => (1.0, s),
                    None => {
                        let s = estimate;
                        estimate += op.duration;
                        (0.0, s)
                    }
                };
                nodes.push(Node {
                    ty: NodeType::Operation,
                    features: vec![
                        op.duration as f64 / max_p,
                        op.machine as f64 / inst.n_machines as f64,
                        flag,
                        start as f64 / horizon,
                    ],
                });
            }
            if self.has_next(j) {
                mask[offsets[j] + self.next_positions()[j]] = true;
            }
        }
        for &ready in self.machine_ready() {
            nodes.push(Node {
                ty: NodeType::Machine,
                features: vec![ready as f64 / horizon],
            });
        }

        let mut edges = Vec::new();
        let mut open_on_machine: Vec<Vec<usize>> = vec![Vec::new(); inst.n_machines];
        for (j, route) in inst.routes.iter().enumerate() {
            for (k, op) in route.iter().enumerate() {
                let o = offsets[j] + k;
                if k > 0 {
                    edges.push(Edge { src: o - 1, dst: o, kind: EdgeKind::Conjunctive });
                    edges.push(Edge { src: o, dst: o - 1, kind: EdgeKind::Conjunctive });
                }
                let m = n_ops + op.machine;
                edges.push(Edge { src: o, dst: m, kind: EdgeKind::OperationMachine });
                edges.push(Edge { src: m, dst: o, kind: EdgeKind::MachineOperation });
                if !self.is_scheduled(j, k) {
                    open_on_machine[op.machine].push(o);
                }
            }
        }
        for ops in &open_on_machine {
            for &a in ops {
                for &b in ops {
                    if a != b {
                        edges.push(Edge { src: a, dst: b, kind: EdgeKind::Disjunctive });
                    }
                }
            }
        }

        HetGraph {
            node_types: vec![NodeType::Operation, NodeType::Machine],
            nodes,
            edges,
            actions: (0..n_ops).collect(),
            mask,
        }
    }

    fn apply_action(&self, action: usize) -> Result<Self> {
        JspState::apply_action(self, action).map(|(s, _)| s)
    }

    fn is_terminal(&self) -> bool {
        self.is_complete()
    }

    fn finish(self) -> Result<Schedule> {
        self.into_schedule()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::toy_job_shop;

    #[test]
    fn fresh_toy_has_one_action_per_job() {
        let inst = toy_job_shop();
        let g = JspState::new(&inst).encode();
        g.validate().unwrap();
        assert_eq!(g.feasible_actions().collect::<Vec<_>>(), vec![0, 3, 6]);
        // 9 ops + 3 machines; 3 machines x 3 open ops form 6 directed disjunctive edges each.
        assert_eq!(g.nodes.len(), 12);
        let disj = g.edges.iter().filter(|e| e.kind == EdgeKind::Disjunctive).count();
        assert_eq!(disj, 18);
    }

    #[test]
    fn first_cut_starts_at_zero_and_frees_m1_at_three() {
        let inst = toy_job_shop();
        let (s, start) = JspState::new(&inst).apply_action(0).unwrap();
        assert_eq!(start, 0);
        assert_eq!(s.machine_ready()[0], 3);
        let g = s.encode();
        assert_eq!(g.feasible_actions().collect::<Vec<_>>(), vec![1, 3, 6]);
        let disj = g.edges.iter().filter(|e| e.kind == EdgeKind::Disjunctive).count();
        assert_eq!(disj, 14);
    }

    #[test]
    fn non_next_operation_is_illegal() {
        let inst = toy_job_shop();
        let s = JspState::new(&inst);
        assert!(matches!(s.apply_action(1), Err(Error::IllegalAction { action: 1, .. })));
        assert!(matches!(s.apply_action(99), Err(Error::IllegalAction { .. })));
    }

    #[test]
    fn complete_rollout_masks_everything() {
        let inst = toy_job_shop();
        let mut s = JspState::new(&inst);
        for op in [0, 3, 6, 1, 4, 7, 2, 5, 8] {
            s = Environment::apply_action(&s, op).unwrap();
        }
        assert!(s.is_terminal());
        assert!(!s.encode().has_feasible_action());
    }
}
