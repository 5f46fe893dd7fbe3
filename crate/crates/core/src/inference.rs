//! Counter-based parameter learning, probability computation and
//! conditional sampling on smooth probabilistic diagrams.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compile::{DiagramError, Node, NodeId, ProbDiagram};
use crate::encode::{Assignment, Var};

/// Above this many variables, probabilities are accumulated in log space.
pub const LOG_SPACE_THRESHOLD: u32 = 40;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("assignment does not satisfy the diagram (reached false at node {0})")]
    Rejected(NodeId),
    #[error("assignment leaves variable {0} unbound")]
    Incomplete(Var),
    #[error("variable {var} out of range 1..={num_vars}")]
    VarOutOfRange { var: Var, num_vars: u32 },
    #[error("conditioning assignment has probability zero")]
    UnsatisfiableCondition,
    #[error("diagram root does not mention every variable")]
    IncompleteScope,
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata error: {0}")]
    Json(#[from] serde_json::Error),
}

fn check_range(d: &ProbDiagram, a: &Assignment) -> Result<(), InferenceError> {
    match a.bindings().map(|(v, _)| v).find(|&v| v > d.num_vars()) {
        Some(var) => Err(InferenceError::VarOutOfRange { var, num_vars: d.num_vars() }),
        None => Ok(()),
    }
}

/// Decision nodes visited by the top-down traversal under a complete
/// assignment, with the branch taken at each.
pub fn trace(d: &ProbDiagram, a: &Assignment) -> Result<Vec<(NodeId, bool)>, InferenceError> {
    check_range(d, a)?;
    let mut path = Vec::new();
    let mut stack = vec![d.root()];
    while let Some(id) = stack.pop() {
        match d.node(id) {
            Node::True => {}
            Node::False => return Err(InferenceError::Rejected(id)),
            Node::Conjunction(cs) => stack.extend(cs.iter().rev().copied()),
            Node::Decision(dn) => {
                let value = a.get(dn.var).ok_or(InferenceError::Incomplete(dn.var))?;
                path.push((id, value));
                stack.push(dn.child(value));
            }
        }
    }
    Ok(path)
}

/// Increments the branch counter of every decision node on the
/// assignment's traversal. A rejected assignment leaves the diagram
/// untouched.
pub fn prob_learn(d: &mut ProbDiagram, a: &Assignment) -> Result<(), InferenceError> {
    let path = trace(d, a)?;
    for (id, value) in path {
        let dn = d.decision_mut(id).expect("trace only yields decision nodes");
        if value {
            dn.hi_count += 1;
        } else {
            dn.lo_count += 1;
        }
    }
    Ok(())
}

/// Add-one smoothed branch parameters from the counters.
pub fn finalize_params(d: &mut ProbDiagram) {
    for node in &mut d.nodes {
        if let Node::Decision(dn) = node {
            let total = (dn.lo_count + dn.hi_count) as f64 + 2.0;
            dn.hi_param = (dn.hi_count as f64 + 1.0) / total;
            dn.lo_param = 1.0 - dn.hi_param;
        }
    }
}

/// Training bookkeeping persisted next to a learned diagram.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub trained_instances: u64,
    pub rejected_instances: u64,
    pub seed_history: Vec<u64>,
}

impl ModelMeta {
    pub fn sidecar_path(diagram_path: impl AsRef<Path>) -> PathBuf {
        let mut s = diagram_path.as_ref().as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    }

    pub fn save(&self, diagram_path: impl AsRef<Path>) -> Result<(), InferenceError> {
        fs::write(Self::sidecar_path(diagram_path), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Reads the sidecar; a missing file yields empty metadata.
    pub fn load(diagram_path: impl AsRef<Path>) -> Result<Self, InferenceError> {
        match fs::read_to_string(Self::sidecar_path(diagram_path)) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    /// Learns from every assignment, counting rather than propagating
    /// rejections.
    pub fn learn_all<'a>(&mut self, d: &mut ProbDiagram, data: impl IntoIterator<Item = &'a Assignment>) -> Result<(), InferenceError> {
        for a in data {
            match prob_learn(d, a) {
                Ok(()) => self.trained_instances += 1,
                Err(InferenceError::Rejected(_)) => self.rejected_instances += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Bottom-up weights, linear or natural-log.
struct Weights {
    log: bool,
    values: Vec<f64>,
}

impl Weights {
    fn compute(d: &ProbDiagram, cond: &Assignment) -> Self {
        let log = d.num_vars() > LOG_SPACE_THRESHOLD;
        let (one, zero) = if log { (0.0, f64::NEG_INFINITY) } else { (1.0, 0.0) };
        let mul = |a: f64, b: f64| if log { a + b } else { a * b };
        let scale = |p: f64, w: f64| if log { p.ln() + w } else { p * w };
        let add = |a: f64, b: f64| {
            if !log {
                a + b
            } else if a == f64::NEG_INFINITY {
                b
            } else if b == f64::NEG_INFINITY {
                a
            } else {
                let m = a.max(b);
                m + ((a - m).exp() + (b - m).exp()).ln()
            }
        };
        let mut values: Vec<f64> = Vec::with_capacity(d.len());
        for node in d.nodes() {
            let w = match node {
                Node::True => one,
                Node::False => zero,
                Node::Conjunction(cs) => cs.iter().fold(one, |acc, &c| mul(acc, values[c])),
                Node::Decision(dn) => match cond.get(dn.var) {
                    Some(v) => scale(dn.param(v), values[dn.child(v)]),
                    None => add(scale(dn.lo_param, values[dn.lo]), scale(dn.hi_param, values[dn.hi])),
                },
            };
            values.push(w);
        }
        Self { log, values }
    }

    fn linear(&self, id: NodeId) -> f64 {
        if self.log {
            self.values[id].exp()
        } else {
            self.values[id]
        }
    }

    fn is_zero(&self, id: NodeId) -> bool {
        if self.log {
            self.values[id] == f64::NEG_INFINITY
        } else {
            self.values[id] == 0.0
        }
    }

    /// Probability of taking the hi branch at an unbound decision node.
    fn hi_share(&self, lo_param: f64, hi_param: f64, lo: NodeId, hi: NodeId) -> f64 {
        if self.log {
            let l = lo_param.ln() + self.values[lo];
            let h = hi_param.ln() + self.values[hi];
            if h == f64::NEG_INFINITY {
                0.0
            } else if l == f64::NEG_INFINITY {
                1.0
            } else {
                1.0 / (1.0 + (l - h).exp())
            }
        } else {
            let l = lo_param * self.values[lo];
            let h = hi_param * self.values[hi];
            if l + h == 0.0 {
                0.0
            } else {
                h / (l + h)
            }
        }
    }
}

/// Weight of all satisfying completions of a (possibly partial)
/// assignment. For a complete assignment this is its joint probability.
pub fn compute_prob(d: &ProbDiagram, a: &Assignment) -> Result<f64, InferenceError> {
    check_range(d, a)?;
    Ok(Weights::compute(d, a).linear(d.root()))
}

/// Draws complete satisfying assignments that agree with a fixed
/// conditioning assignment. Weights are computed once per condition.
pub struct Sampler<'d> {
    d: &'d ProbDiagram,
    cond: Assignment,
    weights: Weights,
    /// Probability of the hi branch per node (unused for non-decisions and
    /// bound variables).
    hi_share: Vec<f64>,
}

impl<'d> Sampler<'d> {
    pub fn new(d: &'d ProbDiagram, cond: &Assignment) -> Result<Self, InferenceError> {
        if !d.root_scope_complete() {
            return Err(InferenceError::IncompleteScope);
        }
        Self::with_trusted_scope(d, cond)
    }

    /// As [`Sampler::new`], for diagrams whose scope was checked earlier.
    pub(crate) fn with_trusted_scope(d: &'d ProbDiagram, cond: &Assignment) -> Result<Self, InferenceError> {
        check_range(d, cond)?;
        let mut padded = Assignment::empty(d.num_vars());
        for (v, b) in cond.bindings() {
            padded.set(v, b);
        }
        let weights = Weights::compute(d, &padded);
        if weights.is_zero(d.root()) {
            return Err(InferenceError::UnsatisfiableCondition);
        }
        let hi_share = d
            .nodes()
            .iter()
            .map(|n| match n {
                Node::Decision(dn) if padded.get(dn.var).is_none() => {
                    weights.hi_share(dn.lo_param, dn.hi_param, dn.lo, dn.hi)
                }
                _ => 0.0,
            })
            .collect();
        Ok(Self { d, cond: padded, weights, hi_share })
    }

    /// Probability of the conditioning assignment.
    pub fn condition_prob(&self) -> f64 {
        self.weights.linear(self.d.root())
    }

    /// One sample. Consumes one uniform draw per decision node on an
    /// unbound variable, in ascending node order.
    pub fn sample(&self, rng: &mut impl Rng) -> Assignment {
        let mut choice = vec![false; self.d.len()];
        for (id, node) in self.d.nodes().iter().enumerate() {
            if let Node::Decision(dn) = node {
                choice[id] = match self.cond.get(dn.var) {
                    Some(v) => v,
                    None => rng.gen::<f64>() < self.hi_share[id],
                };
            }
        }
        let mut out = self.cond.clone();
        let mut stack = vec![self.d.root()];
        while let Some(id) = stack.pop() {
            match self.d.node(id) {
                Node::True | Node::False => {}
                Node::Conjunction(cs) => stack.extend(cs.iter().copied()),
                Node::Decision(dn) => {
                    out.set(dn.var, choice[id]);
                    stack.push(dn.child(choice[id]));
                }
            }
        }
        out
    }
}

/// `k` independent samples conditioned on `cond`, deterministic in `seed`.
pub fn prob_sample(d: &ProbDiagram, cond: &Assignment, k: usize, seed: u64) -> Result<Vec<Assignment>, InferenceError> {
    if k == 0 {
        return Err(InferenceError::ZeroSamples);
    }
    let sampler = Sampler::new(d, cond)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k).map(|_| sampler.sample(&mut rng)).collect())
}
