//! OBDD[and] diagrams: compilation from CNF, smoothing, property checks,
//! model counting and a line-oriented text format.

mod compiler;
mod diagram;
mod format;

use fixedbitset::FixedBitSet;
use thiserror::Error;

pub use compiler::{compile_cnf, CompileOptions};
pub use diagram::{DecisionNode, DiagramBuilder, Node, NodeId, ProbDiagram};
pub use format::{deserialize, parse_diagram, serialize, write_diagram, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum DiagramError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("diagram format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("malformed diagram: {0}")]
    Structure(String),
    #[error("diagram is not smooth at node {0}")]
    NotSmooth(NodeId),
    #[error("diagram is not decomposable at node {0}")]
    NotDecomposable(NodeId),
    #[error("model count overflows 128 bits")]
    CountOverflow,
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("formula has {vars} variables, compiler ceiling is {max}")]
    TooManyVars { vars: u32, max: u32 },
    #[error("node budget of {0} exceeded")]
    NodeBudget(usize),
    #[error("compilation timed out")]
    Timeout,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

/// Outcome of one structural property check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PropertyCheck {
    pub holds: bool,
    /// First offending node, by id.
    pub witness: Option<NodeId>,
}

impl PropertyCheck {
    fn from_witness(witness: Option<NodeId>) -> Self {
        Self { holds: witness.is_none(), witness }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    pub determinism: PropertyCheck,
    pub decomposability: PropertyCheck,
    pub smoothness: PropertyCheck,
}

impl ValidationReport {
    pub fn all_hold(&self) -> bool {
        self.determinism.holds && self.decomposability.holds && self.smoothness.holds
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let line = |f: &mut std::fmt::Formatter<'_>, name: &str, p: &PropertyCheck| match p.witness {
            None => writeln!(f, "{name:<16} PASS"),
            Some(w) => writeln!(f, "{name:<16} FAIL (node {w})"),
        };
        line(f, "determinism", &self.determinism)?;
        line(f, "decomposability", &self.decomposability)?;
        line(f, "smoothness", &self.smoothness)
    }
}

fn disjoint(a: &FixedBitSet, b: &FixedBitSet) -> bool {
    a.is_disjoint(b)
}

/// Checks determinism (a decision node's variable does not reappear below
/// it), decomposability and smoothness. Never fails.
pub fn validate(d: &ProbDiagram) -> ValidationReport {
    let sets = d.var_sets();
    let mut determinism = None;
    let mut decomposability = None;
    let mut smoothness = None;
    for (id, node) in d.nodes().iter().enumerate() {
        match node {
            Node::Decision(dn) => {
                if determinism.is_none()
                    && (sets[dn.lo].contains(dn.var as usize) || sets[dn.hi].contains(dn.var as usize))
                {
                    determinism = Some(id);
                }
                if smoothness.is_none() && sets[dn.lo] != sets[dn.hi] {
                    smoothness = Some(id);
                }
            }
            Node::Conjunction(cs) => {
                if decomposability.is_none() {
                    'pairs: for (i, &a) in cs.iter().enumerate() {
                        for &b in &cs[i + 1..] {
                            if !disjoint(&sets[a], &sets[b]) {
                                decomposability = Some(id);
                                break 'pairs;
                            }
                        }
                    }
                }
            }
            Node::True | Node::False => {}
        }
    }
    ValidationReport {
        determinism: PropertyCheck::from_witness(determinism),
        decomposability: PropertyCheck::from_witness(decomposability),
        smoothness: PropertyCheck::from_witness(smoothness),
    }
}

/// Pads every decision branch with the variables only its sibling mentions.
///
/// For a decision node whose branches disagree on their variable sets, the
/// deficient branch is replaced by a new conjunction of the original child
/// and one fresh decision node per missing variable, both branches of which
/// reach true (parameters 0.5, counters 0). Already-smooth nodes are copied
/// unchanged, along with all counters and parameters.
pub fn smooth(d: &ProbDiagram) -> Result<ProbDiagram, DiagramError> {
    let report = validate(d);
    if let Some(w) = report.decomposability.witness {
        return Err(DiagramError::NotDecomposable(w));
    }
    let sets = d.var_sets();
    let mut nodes: Vec<Node> = Vec::with_capacity(d.len());
    let mut map: Vec<NodeId> = Vec::with_capacity(d.len());
    let mut true_id: Option<NodeId> = d.nodes().iter().position(|n| matches!(n, Node::True));

    for (id, node) in d.nodes().iter().enumerate() {
        let new = match node {
            Node::True | Node::False => node.clone(),
            Node::Conjunction(cs) => Node::Conjunction(cs.iter().map(|&c| map[c]).collect()),
            Node::Decision(dn) => {
                let mut pad = |child: NodeId, missing: FixedBitSet, nodes: &mut Vec<Node>| -> NodeId {
                    if missing.is_clear() {
                        return map[child];
                    }
                    let t = *true_id.get_or_insert_with(|| {
                        nodes.push(Node::True);
                        nodes.len() - 1
                    });
                    let mut children = vec![map[child]];
                    for v in missing.ones() {
                        nodes.push(Node::Decision(DecisionNode::new(v as u32, t, t)));
                        children.push(nodes.len() - 1);
                    }
                    nodes.push(Node::Conjunction(children));
                    nodes.len() - 1
                };
                let mut missing_hi = sets[dn.lo].clone();
                missing_hi.difference_with(&sets[dn.hi]);
                let mut missing_lo = sets[dn.hi].clone();
                missing_lo.difference_with(&sets[dn.lo]);
                let hi = pad(dn.hi, missing_hi, &mut nodes);
                let lo = pad(dn.lo, missing_lo, &mut nodes);
                Node::Decision(DecisionNode { lo, hi, ..dn.clone() })
            }
        };
        debug_assert_eq!(map.len(), id);
        nodes.push(new);
        map.push(nodes.len() - 1);
    }
    ProbDiagram::from_parts(nodes, map[d.root()], d.num_vars())
}

/// Number of complete assignments over `num_vars` variables accepted by a
/// smooth diagram. Variables outside the root's scope count as free.
pub fn model_count(d: &ProbDiagram) -> Result<u128, DiagramError> {
    if let Some(w) = validate(d).smoothness.witness {
        return Err(DiagramError::NotSmooth(w));
    }
    let mut counts: Vec<u128> = Vec::with_capacity(d.len());
    for node in d.nodes() {
        let c = match node {
            Node::True => 1,
            Node::False => 0,
            Node::Decision(dn) => counts[dn.lo].checked_add(counts[dn.hi]).ok_or(DiagramError::CountOverflow)?,
            Node::Conjunction(cs) => cs
                .iter()
                .try_fold(1u128, |acc, &c| acc.checked_mul(counts[c]))
                .ok_or(DiagramError::CountOverflow)?,
        };
        counts.push(c);
    }
    let scope = d.var_sets()[d.root()].count_ones(1..) as u32;
    let free = d.num_vars() - scope;
    let factor = 1u128.checked_shl(free).filter(|_| free < 128).ok_or(DiagramError::CountOverflow)?;
    counts[d.root()].checked_mul(factor).ok_or(DiagramError::CountOverflow)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const X: u32 = 1;
    pub const Y: u32 = 2;
    pub const Z: u32 = 3;

    /// Non-smooth diagram of (x or y) and (not x or not z):
    /// x --lo--> y (hi: true, lo: false), x --hi--> z (lo: true, hi: false).
    /// Ids: 0 false, 1 true, 2 y, 3 z, 4 x (root).
    pub fn psi1() -> ProbDiagram {
        let mut b = DiagramBuilder::new();
        let f = b.false_node();
        let t = b.true_node();
        let y = b.decision(Y, f, t);
        let z = b.decision(Z, t, f);
        let x = b.decision(X, y, z);
        b.finish(x, 3).unwrap()
    }
}
