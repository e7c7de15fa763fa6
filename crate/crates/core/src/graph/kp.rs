use super::{Edge, EdgeKind, Environment, HetGraph, Node, NodeType};
use crate::error::{Error, Result};
use crate::instances::{KpInstance, KpSolution};

/// Items chosen so far and the capacity left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KpState<'a> {
    inst: &'a KpInstance,
    selected: Vec<bool>,
    residual: u64,
}

impl<'a> KpState<'a> {
    pub fn new(inst: &'a KpInstance) -> Self {
        Self {
            inst,
            selected: vec![false; inst.len()],
            residual: inst.capacity,
        }
    }

    pub fn instance(&self) -> &'a KpInstance {
        self.inst
    }

    pub fn selected(&self) -> &[bool] {
        &self.selected
    }

    pub fn residual_capacity(&self) -> u64 {
        self.residual
    }

    pub fn is_selectable(&self, item: usize) -> bool {
        !self.selected[item] && self.inst.weights[item] <= self.residual
    }
}

impl<'a> Environment for KpState<'a> {
    type Outcome = KpSolution;

    /// Item nodes `0..n` with `(w/s, v/s)`, then one capacity node with
    /// `residual/s`, linked to every item in both directions.
    fn encode(&self) -> HetGraph {
        let inst = self.inst;
        let s = inst.scale as f64;
        let n = inst.len();
        let mut nodes: Vec<Node> = (0..n)
            .map(|i| Node {
                ty: NodeType::Item,
                features: vec![inst.weights[i] as f64 / s, inst.values[i] as f64 / s],
            })
            .collect();
        nodes.push(Node {
            ty: NodeType::Capacity,
            features: vec![self.residual as f64 / s],
        });
        let edges = (0..n)
            .flat_map(|i| {
                [
                    Edge { src: i, dst: n, kind: EdgeKind::ItemCapacity },
                    Edge { src: n, dst: i, kind: EdgeKind::CapacityItem },
                ]
            })
            .collect();
        HetGraph {
            node_types: vec![NodeType::Item, NodeType::Capacity],
            nodes,
            edges,
            actions: (0..n).collect(),
            mask: (0..n).map(|i| self.is_selectable(i)).collect(),
        }
    }

    fn apply_action(&self, action: usize) -> Result<Self> {
        if action >= self.inst.len() {
            return Err(Error::IllegalAction {
                action,
                reason: format!("only {} items", self.inst.len()),
            });
        }
        if !self.is_selectable(action) {
            return Err(Error::IllegalAction {
                action,
                reason: "item is masked (already taken or too heavy)".into(),
            });
        }
        let mut next = self.clone();
        next.selected[action] = true;
        next.residual -= self.inst.weights[action];
        Ok(next)
    }

    fn is_terminal(&self) -> bool {
        !(0..self.inst.len()).any(|i| self.is_selectable(i))
    }

    fn finish(self) -> Result<KpSolution> {
        Ok(KpSolution::from_selection(self.inst, self.selected))
    }
}
