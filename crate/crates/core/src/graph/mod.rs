//! Typed-graph views of knapsack and job-shop states, with feasibility masks
//! over the action nodes.

mod jsp;
mod kp;

pub use kp::KpState;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeType {
    Item,
    Capacity,
    Operation,
    Machine,
}

impl NodeType {
    pub const ALL: [NodeType; 4] = [
        NodeType::Item,
        NodeType::Capacity,
        NodeType::Operation,
        NodeType::Machine,
    ];

    /// Number of input features carried by nodes of this type.
    pub fn feature_width(self) -> usize {
        match self {
            NodeType::Item => 2,
            NodeType::Capacity => 1,
            NodeType::Operation => 4,
            NodeType::Machine => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::Item => "item",
            NodeType::Capacity => "capacity",
            NodeType::Operation => "operation",
            NodeType::Machine => "machine",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    ItemCapacity,
    CapacityItem,
    /// Technological precedence inside a job, in either direction.
    Conjunctive,
    /// Two unscheduled operations competing for the same machine.
    Disjunctive,
    OperationMachine,
    MachineOperation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub ty: NodeType,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HetGraph {
    /// Distinct node types present, in first-appearance order.
    pub node_types: Vec<NodeType>,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    /// Node index of each action, in action order.
    pub actions: Vec<usize>,
    /// `true` where the action is currently selectable.
    pub mask: Vec<bool>,
}

impl HetGraph {
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>, actions: Vec<usize>, mask: Vec<bool>) -> Result<Self> {
        let mut node_types = Vec::new();
        for n in &nodes {
            if !node_types.contains(&n.ty) {
                node_types.push(n.ty);
            }
        }
        let g = Self {
            node_types,
            nodes,
            edges,
            actions,
            mask,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.features.len() != n.ty.feature_width() {
                return Err(Error::InvalidArgument(format!(
                    "node {i} ({}) has {} features, expected {}",
                    n.ty.name(),
                    n.features.len(),
                    n.ty.feature_width()
                )));
            }
        }
        if self.mask.len() != self.actions.len() {
            return Err(Error::InvalidArgument("mask and action lists differ in length".into()));
        }
        let n = self.nodes.len();
        if let Some(e) = self.edges.iter().find(|e| e.src >= n || e.dst >= n) {
            return Err(Error::InvalidArgument(format!("edge {e:?} references a missing node")));
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= n) {
            return Err(Error::InvalidArgument(format!("action node {a} does not exist")));
        }
        Ok(())
    }

    pub fn feasible_actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, m)| m.then_some(i))
    }

    pub fn has_feasible_action(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }
}

/// A decision process whose states encode to [`HetGraph`]s.
pub trait Environment: Clone {
    type Outcome;

    fn encode(&self) -> HetGraph;

    /// Takes the action with the given index in [`HetGraph::actions`].
    /// Masked actions are rejected with [`Error::IllegalAction`].
    fn apply_action(&self, action: usize) -> Result<Self>;

    fn is_terminal(&self) -> bool;

    fn finish(self) -> Result<Self::Outcome>;
}
