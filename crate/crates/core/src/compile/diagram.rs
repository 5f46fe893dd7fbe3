use fixedbitset::FixedBitSet;
use rustc_hash::FxHashMap;

use super::DiagramError;
use crate::encode::{Assignment, Var};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNode {
    pub var: Var,
    pub lo: NodeId,
    pub hi: NodeId,
    pub lo_count: u64,
    pub hi_count: u64,
    pub lo_param: f64,
    pub hi_param: f64,
}

impl DecisionNode {
    pub fn new(var: Var, lo: NodeId, hi: NodeId) -> Self {
        Self { var, lo, hi, lo_count: 0, hi_count: 0, lo_param: 0.5, hi_param: 0.5 }
    }

    pub fn child(&self, value: bool) -> NodeId {
        if value {
            self.hi
        } else {
            self.lo
        }
    }

    pub fn param(&self, value: bool) -> f64 {
        if value {
            self.hi_param
        } else {
            self.lo_param
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    True,
    False,
    Decision(DecisionNode),
    Conjunction(Vec<NodeId>),
}

impl Node {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::True | Node::False => Vec::new(),
            Node::Decision(d) => vec![d.lo, d.hi],
            Node::Conjunction(c) => c.clone(),
        }
    }
}

/// Probabilistic OBDD[and]: decision nodes carry learning counters and
/// branch parameters. Node ids are topological: every child id is smaller
/// than its parent's.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDiagram {
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: NodeId,
    pub(crate) num_vars: u32,
}

impl ProbDiagram {
    /// Checks topological order, child arity and variable ranges.
    pub fn from_parts(nodes: Vec<Node>, root: NodeId, num_vars: u32) -> Result<Self, DiagramError> {
        if root >= nodes.len() {
            return Err(DiagramError::Structure(format!("root {root} out of range")));
        }
        for (id, node) in nodes.iter().enumerate() {
            let check = |c: NodeId| {
                if c >= id {
                    Err(DiagramError::Structure(format!("node {id} references child {c} that is not below it")))
                } else {
                    Ok(())
                }
            };
            match node {
                Node::True | Node::False => {}
                Node::Decision(d) => {
                    if d.var == 0 || d.var > num_vars {
                        return Err(DiagramError::Structure(format!("node {id} decides on variable {} out of range", d.var)));
                    }
                    check(d.lo)?;
                    check(d.hi)?;
                }
                Node::Conjunction(cs) => {
                    if cs.len() < 2 {
                        return Err(DiagramError::Structure(format!("conjunction node {id} has fewer than two children")));
                    }
                    cs.iter().try_for_each(|&c| check(c))?;
                }
            }
        }
        Ok(Self { nodes, root, num_vars })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn decision(&self, id: NodeId) -> Option<&DecisionNode> {
        match &self.nodes[id] {
            Node::Decision(d) => Some(d),
            _ => None,
        }
    }

    pub(crate) fn decision_mut(&mut self, id: NodeId) -> Option<&mut DecisionNode> {
        match &mut self.nodes[id] {
            Node::Decision(d) => Some(d),
            _ => None,
        }
    }

    pub fn decisions(&self) -> impl Iterator<Item = (NodeId, &DecisionNode)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Decision(d) => Some((i, d)),
            _ => None,
        })
    }

    /// `(lo_count, hi_count)` per node; zeros for non-decision nodes.
    pub fn counters(&self) -> Vec<(u64, u64)> {
        self.nodes
            .iter()
            .map(|n| match n {
                Node::Decision(d) => (d.lo_count, d.hi_count),
                _ => (0, 0),
            })
            .collect()
    }

    /// Variable set below each node, computed bottom-up.
    pub fn var_sets(&self) -> Vec<FixedBitSet> {
        let width = self.num_vars as usize + 1;
        let mut sets: Vec<FixedBitSet> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut s = FixedBitSet::with_capacity(width);
            match node {
                Node::True | Node::False => {}
                Node::Decision(d) => {
                    s.insert(d.var as usize);
                    s.union_with(&sets[d.lo]);
                    s.union_with(&sets[d.hi]);
                }
                Node::Conjunction(cs) => {
                    for &c in cs {
                        s.union_with(&sets[c]);
                    }
                }
            }
            sets.push(s);
        }
        sets
    }

    /// Whether the root mentions every variable `1..=num_vars`.
    pub fn root_scope_complete(&self) -> bool {
        self.var_sets()[self.root].count_ones(1..) == self.num_vars as usize
    }

    /// Top-down traversal under a complete assignment; true iff no false
    /// leaf is reached.
    pub fn accepts(&self, a: &Assignment) -> bool {
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::True => {}
                Node::False => return false,
                Node::Conjunction(cs) => stack.extend(cs.iter().copied()),
                Node::Decision(d) => match a.get(d.var) {
                    Some(v) => stack.push(d.child(v)),
                    None => return false,
                },
            }
        }
        true
    }

    /// Number of parents of each node.
    pub fn parent_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nodes.len()];
        for node in &self.nodes {
            match node {
                Node::Decision(d) => {
                    counts[d.lo] += 1;
                    counts[d.hi] += 1;
                }
                Node::Conjunction(cs) => cs.iter().for_each(|&c| counts[c] += 1),
                _ => {}
            }
        }
        counts
    }

    /// Zeroes all counters and resets parameters to 0.5.
    pub fn reset_parameters(&mut self) {
        for n in &mut self.nodes {
            if let Node::Decision(d) = n {
                d.lo_count = 0;
                d.hi_count = 0;
                d.lo_param = 0.5;
                d.hi_param = 0.5;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum NodeKey {
    Decision(Var, NodeId, NodeId),
    Conjunction(Vec<NodeId>),
}

/// Incremental, hash-consed diagram construction.
#[derive(Debug, Default)]
pub struct DiagramBuilder {
    nodes: Vec<Node>,
    unique: FxHashMap<NodeKey, NodeId>,
    true_id: Option<NodeId>,
    false_id: Option<NodeId>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn true_node(&mut self) -> NodeId {
        if let Some(id) = self.true_id {
            return id;
        }
        let id = self.push(Node::True);
        self.true_id = Some(id);
        id
    }

    pub fn false_node(&mut self) -> NodeId {
        if let Some(id) = self.false_id {
            return id;
        }
        let id = self.push(Node::False);
        self.false_id = Some(id);
        id
    }

    /// Shared decision node; an existing `(var, lo, hi)` node is reused.
    pub fn decision(&mut self, var: Var, lo: NodeId, hi: NodeId) -> NodeId {
        let key = NodeKey::Decision(var, lo, hi);
        if let Some(&id) = self.unique.get(&key) {
            return id;
        }
        let id = self.push(Node::Decision(DecisionNode::new(var, lo, hi)));
        self.unique.insert(key, id);
        id
    }

    /// Decision node that is never shared with another parent.
    pub fn fresh_decision(&mut self, node: DecisionNode) -> NodeId {
        self.push(Node::Decision(node))
    }

    /// Shared conjunction node over at least two children.
    pub fn conjunction(&mut self, children: Vec<NodeId>) -> NodeId {
        assert!(children.len() >= 2, "conjunction needs at least two children");
        let key = NodeKey::Conjunction(children.clone());
        if let Some(&id) = self.unique.get(&key) {
            return id;
        }
        let id = self.push(Node::Conjunction(children));
        self.unique.insert(key, id);
        id
    }

    /// Conjunction node that is never shared with another parent.
    pub fn fresh_conjunction(&mut self, children: Vec<NodeId>) -> NodeId {
        assert!(children.len() >= 2, "conjunction needs at least two children");
        self.push(Node::Conjunction(children))
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn finish(self, root: NodeId, num_vars: u32) -> Result<ProbDiagram, DiagramError> {
        ProbDiagram::from_parts(self.nodes, root, num_vars)
    }
}
