//! Top-down CNF to OBDD[and] compilation.
//!
//! Each residual formula is unit-propagated, split into variable-disjoint
//! components (emitted as conjunctions), and each component is decided on
//! its earliest variable in the given order. Results are cached on the
//! canonical residual clause set.

use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;

use super::diagram::{DecisionNode, DiagramBuilder, NodeId, ProbDiagram};
use super::CompileError;
use crate::encode::{CnfFormula, Lit, Var};

type Clause = Vec<Lit>;

#[derive(Debug, Clone)]
pub struct CompileOptions {
    /// Variable order, earliest first. Variables missing from the list are
    /// ordered after it by index.
    pub order: Vec<Var>,
    pub node_budget: usize,
    pub timeout: Option<Duration>,
    pub max_vars: u32,
}

impl CompileOptions {
    pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;
    pub const DEFAULT_MAX_VARS: u32 = 64;

    /// Interleaved per-vertex order when the formula carries a variable map,
    /// natural order otherwise.
    pub fn for_formula(f: &CnfFormula) -> Self {
        let order = match &f.var_map {
            Some(vm) => vm.interleaved_order(),
            None => (1..=f.num_vars).collect(),
        };
        Self::with_order(order)
    }

    pub fn natural(num_vars: u32) -> Self {
        Self::with_order((1..=num_vars).collect())
    }

    pub fn with_order(order: Vec<Var>) -> Self {
        Self {
            order,
            node_budget: Self::DEFAULT_NODE_BUDGET,
            timeout: None,
            max_vars: Self::DEFAULT_MAX_VARS,
        }
    }
}

struct Compiler {
    rank: Vec<u32>,
    builder: DiagramBuilder,
    formula_cache: FxHashMap<Vec<Clause>, NodeId>,
    component_cache: FxHashMap<Vec<Clause>, NodeId>,
    num_vars: u32,
    node_budget: usize,
    deadline: Option<Instant>,
    calls: u64,
}

impl Compiler {
    fn check_resources(&mut self) -> Result<(), CompileError> {
        if self.builder.len() > self.node_budget {
            return Err(CompileError::NodeBudget(self.node_budget));
        }
        self.calls += 1;
        if self.calls % 256 == 0 {
            if let Some(deadline) = self.deadline {
                if Instant::now() > deadline {
                    return Err(CompileError::Timeout);
                }
            }
        }
        Ok(())
    }

    /// Literal node: `var` fixed to `value`.
    fn literal(&mut self, lit: Lit) -> NodeId {
        let t = self.builder.true_node();
        let f = self.builder.false_node();
        if lit > 0 {
            self.builder.decision(lit as Var, f, t)
        } else {
            self.builder.decision(lit.unsigned_abs(), t, f)
        }
    }

    /// Conjunction of `children`, flattening nested conjunctions and
    /// dropping true leaves.
    fn conjoin(&mut self, children: Vec<NodeId>) -> NodeId {
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            match self.builder.node(c) {
                super::Node::True => {}
                super::Node::False => return self.builder.false_node(),
                super::Node::Conjunction(cs) => flat.extend(cs.iter().copied()),
                super::Node::Decision(_) => flat.push(c),
            }
        }
        match flat.len() {
            0 => self.builder.true_node(),
            1 => flat[0],
            _ => {
                flat.sort_unstable();
                self.builder.conjunction(flat)
            }
        }
    }

    fn compile_formula(&mut self, clauses: Vec<Clause>) -> Result<NodeId, CompileError> {
        self.check_resources()?;
        if clauses.is_empty() {
            return Ok(self.builder.true_node());
        }
        if let Some(&id) = self.formula_cache.get(&clauses) {
            return Ok(id);
        }
        let id = match unit_propagate(&clauses, self.num_vars) {
            None => self.builder.false_node(),
            Some((implied, residual)) => {
                let mut children: Vec<NodeId> = implied.iter().map(|&l| self.literal(l)).collect();
                let mut failed = false;
                for comp in components(residual) {
                    let c = self.compile_component(comp)?;
                    if matches!(self.builder.node(c), super::Node::False) {
                        failed = true;
                        break;
                    }
                    children.push(c);
                }
                if failed {
                    self.builder.false_node()
                } else {
                    self.conjoin(children)
                }
            }
        };
        self.formula_cache.insert(clauses, id);
        Ok(id)
    }

    fn compile_component(&mut self, clauses: Vec<Clause>) -> Result<NodeId, CompileError> {
        if let Some(&id) = self.component_cache.get(&clauses) {
            return Ok(id);
        }
        let var = clauses
            .iter()
            .flatten()
            .map(|l| l.unsigned_abs())
            .min_by_key(|&v| (self.rank[v as usize], v))
            .expect("component has at least one literal");
        let lo = match condition(&clauses, -(var as Lit)) {
            Some(c) => self.compile_formula(c)?,
            None => self.builder.false_node(),
        };
        let hi = match condition(&clauses, var as Lit) {
            Some(c) => self.compile_formula(c)?,
            None => self.builder.false_node(),
        };
        let is_false = |b: &DiagramBuilder, n: NodeId| matches!(b.node(n), super::Node::False);
        let id = match (is_false(&self.builder, lo), is_false(&self.builder, hi)) {
            (true, true) => self.builder.false_node(),
            (true, false) => {
                let lit = self.literal(var as Lit);
                self.conjoin(vec![lit, hi])
            }
            (false, true) => {
                let lit = self.literal(-(var as Lit));
                self.conjoin(vec![lit, lo])
            }
            (false, false) => self.builder.decision(var, lo, hi),
        };
        self.component_cache.insert(clauses, id);
        Ok(id)
    }
}

/// Sorted, duplicate-free clause set without tautologies.
fn normalize(clauses: &[Clause]) -> Vec<Clause> {
    let mut out: Vec<Clause> = Vec::with_capacity(clauses.len());
    'outer: for c in clauses {
        let mut c = c.clone();
        c.sort_unstable_by_key(|&l| (l.unsigned_abs(), l));
        c.dedup();
        for w in c.windows(2) {
            if w[0] == -w[1] {
                continue 'outer;
            }
        }
        out.push(c);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Sets `lit` true. `None` when a clause becomes empty.
fn condition(clauses: &[Clause], lit: Lit) -> Option<Vec<Clause>> {
    let mut out = Vec::with_capacity(clauses.len());
    for c in clauses {
        if c.contains(&lit) {
            continue;
        }
        if c.contains(&-lit) {
            let reduced: Clause = c.iter().copied().filter(|&l| l != -lit).collect();
            if reduced.is_empty() {
                return None;
            }
            out.push(reduced);
        } else {
            out.push(c.clone());
        }
    }
    out.sort_unstable();
    out.dedup();
    Some(out)
}

/// Returns the implied literals (ascending by variable) and the residual
/// normalized clause set, or `None` on conflict.
fn unit_propagate(clauses: &[Clause], num_vars: u32) -> Option<(Vec<Lit>, Vec<Clause>)> {
    let mut value: Vec<i8> = vec![0; num_vars as usize + 1];
    let lit_value = |value: &[i8], l: Lit| -> i8 {
        let v = value[l.unsigned_abs() as usize];
        if l > 0 {
            v
        } else {
            -v
        }
    };
    let mut implied = Vec::new();
    loop {
        let mut changed = false;
        for c in clauses {
            let mut free = None;
            let mut free_count = 0;
            let mut satisfied = false;
            for &l in c {
                match lit_value(&value, l) {
                    1 => {
                        satisfied = true;
                        break;
                    }
                    0 => {
                        free_count += 1;
                        free = Some(l);
                    }
                    _ => {}
                }
            }
            if satisfied {
                continue;
            }
            match free_count {
                0 => return None,
                1 => {
                    let l = free.unwrap();
                    value[l.unsigned_abs() as usize] = if l > 0 { 1 } else { -1 };
                    implied.push(l);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    if implied.is_empty() {
        return Some((implied, clauses.to_vec()));
    }
    let mut residual = Vec::with_capacity(clauses.len());
    for c in clauses {
        if c.iter().any(|&l| lit_value(&value, l) == 1) {
            continue;
        }
        residual.push(c.iter().copied().filter(|&l| lit_value(&value, l) == 0).collect::<Clause>());
    }
    residual.sort_unstable();
    residual.dedup();
    implied.sort_unstable_by_key(|l| l.unsigned_abs());
    Some((implied, residual))
}

/// Splits a clause set into groups with disjoint variables. Components come
/// out ordered by their smallest variable.
fn components(clauses: Vec<Clause>) -> Vec<Vec<Clause>> {
    if clauses.is_empty() {
        return Vec::new();
    }
    let max_var = clauses.iter().flatten().map(|l| l.unsigned_abs()).max().unwrap() as usize;
    let mut parent: Vec<usize> = (0..=max_var).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for c in &clauses {
        let first = c[0].unsigned_abs() as usize;
        for l in &c[1..] {
            let (a, b) = (find(&mut parent, first), find(&mut parent, l.unsigned_abs() as usize));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: FxHashMap<usize, Vec<Clause>> = FxHashMap::default();
    for c in clauses {
        let r = find(&mut parent, c[0].unsigned_abs() as usize);
        groups.entry(r).or_default().push(c);
    }
    let mut out: Vec<(usize, Vec<Clause>)> = groups.into_iter().collect();
    out.sort_unstable_by_key(|(r, _)| *r);
    out.into_iter().map(|(_, g)| g).collect()
}

/// Compiles `f` into a diagram whose models over all `num_vars` variables
/// are exactly the formula's solutions. Variables the formula leaves
/// unconstrained are attached at the root as decision nodes whose branches
/// both reach true. Counters are zero and parameters 0.5; the result is not
/// smoothed.
pub fn compile_cnf(f: &CnfFormula, opts: &CompileOptions) -> Result<ProbDiagram, CompileError> {
    if f.num_vars > opts.max_vars {
        return Err(CompileError::TooManyVars { vars: f.num_vars, max: opts.max_vars });
    }
    let n = f.num_vars as usize;
    let mut rank = vec![u32::MAX; n + 1];
    let mut next = 0u32;
    for &v in &opts.order {
        if v as usize <= n && v > 0 && rank[v as usize] == u32::MAX {
            rank[v as usize] = next;
            next += 1;
        }
    }
    for r in rank.iter_mut().skip(1) {
        if *r == u32::MAX {
            *r = next;
            next += 1;
        }
    }
    let mut c = Compiler {
        rank,
        builder: DiagramBuilder::new(),
        formula_cache: FxHashMap::default(),
        component_cache: FxHashMap::default(),
        num_vars: f.num_vars,
        node_budget: opts.node_budget,
        deadline: opts.timeout.map(|t| Instant::now() + t),
        calls: 0,
    };
    if f.clauses.iter().any(Vec::is_empty) {
        let root = c.builder.false_node();
        return Ok(c.builder.finish(root, f.num_vars)?);
    }
    let mut root = c.compile_formula(normalize(&f.clauses))?;

    if !matches!(c.builder.node(root), super::Node::False) {
        let mut mentioned = vec![false; n + 1];
        let mut stack = vec![root];
        let mut seen = vec![false; c.builder.len()];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                continue;
            }
            match c.builder.node(id) {
                super::Node::Decision(d) => {
                    mentioned[d.var as usize] = true;
                    stack.push(d.lo);
                    stack.push(d.hi);
                }
                super::Node::Conjunction(cs) => stack.extend(cs.iter().copied()),
                _ => {}
            }
        }
        let mut free: Vec<Var> = (1..=f.num_vars).filter(|&v| !mentioned[v as usize]).collect();
        if !free.is_empty() {
            free.sort_by_key(|&v| c.rank[v as usize]);
            let t = c.builder.true_node();
            let mut children = vec![root];
            for v in free {
                children.push(c.builder.fresh_decision(DecisionNode::new(v, t, t)));
            }
            root = c.conjoin(children);
        }
    }
    if c.builder.len() > opts.node_budget {
        return Err(CompileError::NodeBudget(opts.node_budget));
    }
    Ok(c.builder.finish(root, f.num_vars)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::Node;

    #[test]
    fn unit_clause() {
        let f = CnfFormula::new(1, vec![vec![1]]).unwrap();
        let d = compile_cnf(&f, &CompileOptions::natural(1)).unwrap();
        assert_eq!(d.len(), 3);
        let root = d.decision(d.root()).unwrap();
        assert_eq!(root.var, 1);
        assert_eq!(d.node(root.lo), &Node::False);
        assert_eq!(d.node(root.hi), &Node::True);
    }

    #[test]
    fn unsatisfiable() {
        let f = CnfFormula::new(1, vec![vec![1], vec![-1]]).unwrap();
        let d = compile_cnf(&f, &CompileOptions::natural(1)).unwrap();
        assert_eq!(d.node(d.root()), &Node::False);
    }

    #[test]
    fn free_variables_attached_at_root() {
        let f = CnfFormula::new(3, vec![vec![2]]).unwrap();
        let d = compile_cnf(&f, &CompileOptions::natural(3)).unwrap();
        assert!(d.root_scope_complete());
    }

    #[test]
    fn propagation_and_components() {
        let clauses = vec![vec![1], vec![-1, 2], vec![3, 4], vec![5, -6]];
        let (implied, residual) = unit_propagate(&clauses, 6).unwrap();
        assert_eq!(implied, vec![1, 2]);
        assert_eq!(residual, vec![vec![3, 4], vec![5, -6]]);
        assert_eq!(components(residual).len(), 2);
        assert!(unit_propagate(&[vec![1], vec![-1]], 1).is_none());
    }

    #[test]
    fn budget_and_var_ceiling() {
        let f = CnfFormula::new(3, vec![vec![1, 2], vec![-1, -3]]).unwrap();
        let mut opts = CompileOptions::natural(3);
        opts.node_budget = 2;
        assert!(matches!(compile_cnf(&f, &opts), Err(CompileError::NodeBudget(2))));
        let mut opts = CompileOptions::natural(3);
        opts.max_vars = 2;
        assert!(matches!(compile_cnf(&f, &opts), Err(CompileError::TooManyVars { .. })));
    }

    #[test]
    fn deterministic() {
        let f = crate::encode::encode_relaxed(&crate::graph::build_grid_graph(3, 2, 1.0)).unwrap();
        let opts = CompileOptions::for_formula(&f);
        assert_eq!(compile_cnf(&f, &opts).unwrap(), compile_cnf(&f, &opts).unwrap());
    }
}
