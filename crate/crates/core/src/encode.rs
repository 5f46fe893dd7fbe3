//! Relaxed CNF encoding of a graph's simple trips.
//!
//! Every vertex `i` (dense index) owns two variables: `n_i`, true when the
//! vertex lies on the trip, and `s_i`, true when it is a trip terminal. The
//! formula is the conjunction of five clause families, emitted in order:
//!
//! * H1: some vertex is a terminal.
//! * H2: a trip vertex has a trip neighbor.
//! * H3: no three terminals.
//! * H4: a terminal is on the trip and has at most one trip neighbor.
//! * H5: a non-terminal trip vertex with one trip neighbor has exactly one
//!   other trip neighbor.
//!
//! Solutions are exactly one simple path (between the two terminals) plus
//! any number of vertex-disjoint cycles that do not touch it.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::graph::{is_simple_trip, GraphError, RoadGraph, Trip, VertexId};

/// DIMACS literal: variable index, negative when negated.
pub type Lit = i32;
/// 1-based DIMACS variable index.
pub type Var = u32;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph has {0} vertices; the encoding needs at least 2")]
    TooFewVertices(usize),
    #[error("trip is not a simple trip")]
    NotSimple,
    #[error("single-vertex trips cannot be encoded")]
    SingleVertexTrip,
    #[error("formula has {0} variables; exhaustive enumeration supports at most {max}", max = MAX_ENUMERATION_VARS)]
    TooLarge(u32),
    #[error("DIMACS parse error at line {line}: {msg}")]
    Dimacs { line: usize, msg: String },
}

/// Vertex <-> variable layout: `n(i) = i + 1`, `s(i) = |V| + i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarMap {
    pub vertex_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Node,
    Terminal,
}

impl VarMap {
    pub fn new(vertex_count: usize) -> Self {
        Self { vertex_count }
    }

    pub fn num_vars(&self) -> u32 {
        2 * self.vertex_count as u32
    }

    pub fn n_var(&self, index: usize) -> Var {
        debug_assert!(index < self.vertex_count);
        index as Var + 1
    }

    pub fn s_var(&self, index: usize) -> Var {
        debug_assert!(index < self.vertex_count);
        (self.vertex_count + index) as Var + 1
    }

    /// Inverse mapping: which vertex index and kind a variable stands for.
    pub fn decode(&self, var: Var) -> Option<(VarKind, usize)> {
        let v = var as usize;
        if v == 0 || v > 2 * self.vertex_count {
            None
        } else if v <= self.vertex_count {
            Some((VarKind::Node, v - 1))
        } else {
            Some((VarKind::Terminal, v - self.vertex_count - 1))
        }
    }

    /// Interleaved order `n_0, s_0, n_1, s_1, ...`.
    pub fn interleaved_order(&self) -> Vec<Var> {
        (0..self.vertex_count).flat_map(|i| [self.n_var(i), self.s_var(i)]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseTag {
    H1,
    H2,
    H3,
    H4,
    H5,
    /// Clause of unknown origin (e.g. read from a DIMACS file).
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
    pub tags: Vec<ClauseTag>,
    pub var_map: Option<VarMap>,
}

impl CnfFormula {
    /// Builds a formula with external clauses, checking literal ranges and
    /// rejecting empty clauses.
    pub fn new(num_vars: u32, clauses: Vec<Vec<Lit>>) -> Result<Self, EncodeError> {
        for (i, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(EncodeError::Dimacs { line: 0, msg: format!("clause {i} is empty") });
            }
            if let Some(&l) = c.iter().find(|&&l| l == 0 || l.unsigned_abs() > num_vars) {
                return Err(EncodeError::Dimacs { line: 0, msg: format!("literal {l} out of range 1..={num_vars}") });
            }
        }
        let tags = vec![ClauseTag::External; clauses.len()];
        Ok(Self { num_vars, clauses, tags, var_map: None })
    }

    /// Evaluates the formula under a complete assignment.
    pub fn is_satisfied_by(&self, a: &Assignment) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| a.get(l.unsigned_abs()) == Some(l > 0)))
    }

    pub fn clauses_tagged(&self, tag: ClauseTag) -> impl Iterator<Item = &Vec<Lit>> {
        self.clauses.iter().zip(&self.tags).filter(move |(_, &t)| t == tag).map(|(c, _)| c)
    }

    /// Copy without the clauses of one family.
    pub fn without(&self, tag: ClauseTag) -> Self {
        let (clauses, tags) = self
            .clauses
            .iter()
            .zip(&self.tags)
            .filter(|(_, &t)| t != tag)
            .map(|(c, &t)| (c.clone(), t))
            .unzip();
        Self { num_vars: self.num_vars, clauses, tags, var_map: self.var_map }
    }
}

/// Partial or complete truth assignment over variables `1..=num_vars`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn empty(num_vars: u32) -> Self {
        Self { values: vec![None; num_vars as usize] }
    }

    pub fn from_bools(values: &[bool]) -> Self {
        Self { values: values.iter().map(|&b| Some(b)).collect() }
    }

    /// Assignment from literals; variables not mentioned stay unbound.
    pub fn from_lits(num_vars: u32, lits: &[Lit]) -> Self {
        let mut a = Self::empty(num_vars);
        for &l in lits {
            a.set(l.unsigned_abs(), l > 0);
        }
        a
    }

    pub fn num_vars(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values.get(var as usize - 1).copied().flatten()
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.values[var as usize - 1] = Some(value);
    }

    pub fn unset(&mut self, var: Var) {
        self.values[var as usize - 1] = None;
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn bound_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Bound variables with their values, ascending.
    pub fn bindings(&self) -> impl Iterator<Item = (Var, bool)> + '_ {
        self.values.iter().enumerate().filter_map(|(i, v)| v.map(|b| (i as Var + 1, b)))
    }

    /// True iff every variable bound in `partial` has the same value here.
    pub fn agrees_with(&self, partial: &Assignment) -> bool {
        partial.bindings().all(|(v, b)| self.get(v) == Some(b))
    }

    pub fn true_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.bindings().filter(|&(_, b)| b).map(|(v, _)| v)
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lits: Vec<String> = self.bindings().map(|(v, b)| if b { format!("{v}") } else { format!("-{v}") }).collect();
        write!(f, "[{}]", lits.join(" "))
    }
}

/// Emits the relaxed encoding of `g` (clause families H1..H5 in order,
/// vertices ascending).
pub fn encode_relaxed(g: &RoadGraph) -> Result<CnfFormula, EncodeError> {
    let n = g.vertex_count();
    if n < 2 {
        return Err(EncodeError::TooFewVertices(n));
    }
    let vm = VarMap::new(n);
    let nv = |i: usize| vm.n_var(i) as Lit;
    let sv = |i: usize| vm.s_var(i) as Lit;
    let adj: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors_of_index(i).collect()).collect();
    let mut clauses = Vec::new();
    let mut tags = Vec::new();
    let mut emit = |c: Vec<Lit>, t: ClauseTag| {
        clauses.push(c);
        tags.push(t);
    };

    emit((0..n).map(sv).collect(), ClauseTag::H1);

    for i in 0..n {
        let mut c = vec![-nv(i)];
        c.extend(adj[i].iter().map(|&j| nv(j)));
        emit(c, ClauseTag::H2);
    }

    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                emit(vec![-sv(i), -sv(j), -sv(k)], ClauseTag::H3);
            }
        }
    }

    for i in 0..n {
        emit(vec![-sv(i), nv(i)], ClauseTag::H4);
        for (a, &j) in adj[i].iter().enumerate() {
            for &k in &adj[i][a + 1..] {
                emit(vec![-sv(i), -nv(j), -nv(k)], ClauseTag::H4);
            }
        }
    }

    for i in 0..n {
        for &j in &adj[i] {
            let others: Vec<usize> = adj[i].iter().copied().filter(|&k| k != j).collect();
            let mut c = vec![-nv(i), -nv(j), sv(i)];
            c.extend(others.iter().map(|&k| nv(k)));
            emit(c, ClauseTag::H5);
            for (a, &l) in others.iter().enumerate() {
                for &m in &others[a + 1..] {
                    emit(vec![-nv(i), -nv(j), sv(i), -nv(l), -nv(m)], ClauseTag::H5);
                }
            }
        }
    }

    Ok(CnfFormula { num_vars: vm.num_vars(), clauses, tags, var_map: Some(vm) })
}

/// Assignment of a simple trip: its vertices on, its two ends terminal.
pub fn trip_to_assignment(g: &RoadGraph, trip: &Trip) -> Result<Assignment, EncodeError> {
    if trip.len() < 2 {
        return Err(EncodeError::SingleVertexTrip);
    }
    if !is_simple_trip(g, trip)? {
        return Err(EncodeError::NotSimple);
    }
    let vm = VarMap::new(g.vertex_count());
    let mut values = vec![false; vm.num_vars() as usize];
    let index = |v: VertexId| g.index_of(v).ok_or(GraphError::UnknownVertex(v));
    for &v in &trip.vertices {
        values[vm.n_var(index(v)?) as usize - 1] = true;
    }
    let (s, t) = trip.terminals().expect("trip has at least two vertices");
    values[vm.s_var(index(s)?) as usize - 1] = true;
    values[vm.s_var(index(t)?) as usize - 1] = true;
    Ok(Assignment::from_bools(&values))
}

pub const MAX_ENUMERATION_VARS: u32 = 24;

/// All satisfying complete assignments, in lexicographic order with
/// variable 1 most significant and false before true.
pub fn enumerate_solutions(f: &CnfFormula) -> Result<Vec<Assignment>, EncodeError> {
    if f.num_vars > MAX_ENUMERATION_VARS {
        return Err(EncodeError::TooLarge(f.num_vars));
    }
    let n = f.num_vars;
    // bit (n - v) of the counter holds variable v
    let bit = |v: u32| 1u32 << (n - v);
    let masks: Vec<(u32, u32)> = f
        .clauses
        .iter()
        .map(|c| {
            c.iter().fold((0, 0), |(pos, neg), &l| {
                if l > 0 {
                    (pos | bit(l as u32), neg)
                } else {
                    (pos, neg | bit(l.unsigned_abs()))
                }
            })
        })
        .collect();
    let mut out = Vec::new();
    for word in 0..(1u64 << n) {
        let w = word as u32;
        if masks.iter().all(|&(pos, neg)| w & pos != 0 || !w & neg != 0) {
            let values: Vec<bool> = (1..=n).map(|v| w & bit(v) != 0).collect();
            out.push(Assignment::from_bools(&values));
        }
    }
    Ok(out)
}

pub fn to_dimacs(f: &CnfFormula) -> String {
    let mut s = format!("p cnf {} {}\n", f.num_vars, f.clauses.len());
    for c in &f.clauses {
        for l in c {
            s.push_str(&l.to_string());
            s.push(' ');
        }
        s.push_str("0\n");
    }
    s
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula, EncodeError> {
    let err = |line: usize, msg: String| EncodeError::Dimacs { line, msg };
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if header.is_some() || parts.len() != 4 || parts[1] != "cnf" {
                return Err(err(lineno, format!("malformed header {line:?}")));
            }
            let vars = parts[2].parse().map_err(|_| err(lineno, format!("bad variable count {:?}", parts[2])))?;
            let count = parts[3].parse().map_err(|_| err(lineno, format!("bad clause count {:?}", parts[3])))?;
            header = Some((vars, count));
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(err(lineno, "clause before header".into()));
        };
        for tok in line.split_whitespace() {
            let l: Lit = tok.parse().map_err(|_| err(lineno, format!("bad literal {tok:?}")))?;
            if l == 0 {
                if current.is_empty() {
                    return Err(err(lineno, "empty clause".into()));
                }
                clauses.push(std::mem::take(&mut current));
            } else if l.unsigned_abs() > num_vars {
                return Err(err(lineno, format!("literal {l} exceeds declared variable count {num_vars}")));
            } else {
                current.push(l);
            }
        }
    }
    let Some((num_vars, count)) = header else {
        return Err(err(0, "missing header".into()));
    };
    if !current.is_empty() {
        clauses.push(current);
    }
    if clauses.len() != count {
        return Err(err(0, format!("header declares {count} clauses, found {}", clauses.len())));
    }
    CnfFormula::new(num_vars, clauses)
}

/// Sidecar listing `n <vertex> <var>` and `s <vertex> <var>` lines.
pub fn vars_sidecar(g: &RoadGraph, vm: &VarMap) -> String {
    let mut s = String::new();
    for i in 0..vm.vertex_count {
        s.push_str(&format!("n {} {}\n", g.id_at(i), vm.n_var(i)));
    }
    for i in 0..vm.vertex_count {
        s.push_str(&format!("s {} {}\n", g.id_at(i), vm.s_var(i)));
    }
    s
}

/// Writes `path` and, when the formula carries a variable map, `<path>.vars`.
pub fn write_dimacs(f: &CnfFormula, g: Option<&RoadGraph>, path: impl AsRef<Path>) -> Result<(), EncodeError> {
    let path = path.as_ref();
    let mut out = fs::File::create(path)?;
    out.write_all(to_dimacs(f).as_bytes())?;
    if let (Some(vm), Some(g)) = (f.var_map.as_ref(), g) {
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".vars");
        fs::write(sidecar, vars_sidecar(g, vm))?;
    }
    Ok(())
}

/// Reads a DIMACS file; a `<path>.vars` sidecar, when present, restores
/// the variable map.
pub fn read_dimacs(path: impl AsRef<Path>) -> Result<CnfFormula, EncodeError> {
    let path = path.as_ref();
    let mut f = parse_dimacs(&fs::read_to_string(path)?)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".vars");
    match fs::read_to_string(&sidecar) {
        Ok(text) => f.var_map = Some(parse_vars_sidecar(&text, f.num_vars)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    Ok(f)
}

/// Checks that a sidecar follows the standard layout for `num_vars`.
pub fn parse_vars_sidecar(text: &str, num_vars: u32) -> Result<VarMap, EncodeError> {
    let vm = VarMap::new(num_vars as usize / 2);
    if num_vars % 2 != 0 {
        return Err(EncodeError::Dimacs { line: 0, msg: format!("variable map needs an even variable count, got {num_vars}") });
    }
    let mut lines = 0;
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let expected = if i < vm.vertex_count { ("n", vm.n_var(i)) } else if i < 2 * vm.vertex_count { ("s", vm.s_var(i - vm.vertex_count)) } else { ("", 0) };
        let var = toks.get(2).and_then(|t| t.parse::<Var>().ok());
        if toks.len() != 3 || toks[0] != expected.0 || var != Some(expected.1) {
            return Err(EncodeError::Dimacs { line: i + 1, msg: format!("unexpected variable map line {line:?}") });
        }
        lines += 1;
    }
    if lines != 2 * vm.vertex_count {
        return Err(EncodeError::Dimacs { line: 0, msg: format!("variable map lists {lines} variables, expected {num_vars}") });
    }
    Ok(vm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_grid_graph;

    #[test]
    fn var_map_layout() {
        let vm = VarMap::new(9);
        assert_eq!(vm.num_vars(), 18);
        assert_eq!(vm.n_var(0), 1);
        assert_eq!(vm.s_var(0), 10);
        assert_eq!(vm.decode(10), Some((VarKind::Terminal, 0)));
        assert_eq!(vm.decode(9), Some((VarKind::Node, 8)));
        assert_eq!(vm.decode(19), None);
        assert_eq!(vm.interleaved_order()[..4], [1, 10, 2, 11]);
    }

    #[test]
    fn grid_2x2_clause_counts() {
        let f = encode_relaxed(&build_grid_graph(2, 2, 1.0)).unwrap();
        assert_eq!(f.num_vars, 8);
        let count = |t| f.clauses_tagged(t).count();
        assert_eq!(
            [count(ClauseTag::H1), count(ClauseTag::H2), count(ClauseTag::H3), count(ClauseTag::H4), count(ClauseTag::H5)],
            [1, 4, 4, 8, 8]
        );
        assert_eq!(f.clauses.len(), 25);
        // family order is fixed
        let mut seen = f.tags.clone();
        seen.dedup();
        assert_eq!(seen, vec![ClauseTag::H1, ClauseTag::H2, ClauseTag::H3, ClauseTag::H4, ClauseTag::H5]);
    }

    #[test]
    fn grid_3x3_has_18_vars() {
        assert_eq!(encode_relaxed(&build_grid_graph(3, 3, 1.0)).unwrap().num_vars, 18);
    }

    #[test]
    fn degree_one_h5_reduces() {
        // path 0 - 1: vertex 0 has no other neighbor
        let g = build_grid_graph(2, 1, 1.0);
        let f = encode_relaxed(&g).unwrap();
        let h5: Vec<_> = f.clauses_tagged(ClauseTag::H5).cloned().collect();
        assert!(h5.contains(&vec![-1, -2, 3]));
        assert_eq!(enumerate_solutions(&f).unwrap().len(), 1);
    }

    #[test]
    fn too_few_vertices() {
        assert!(matches!(encode_relaxed(&build_grid_graph(1, 1, 1.0)), Err(EncodeError::TooFewVertices(1))));
    }

    #[test]
    fn trip_assignments() {
        let g = build_grid_graph(2, 2, 1.0);
        let f = encode_relaxed(&g).unwrap();
        // ids 0,1,2,3 stand for the 1-based corners 1..4
        let a = trip_to_assignment(&g, &Trip::new(vec![0, 1])).unwrap();
        assert_eq!(a.true_vars().collect::<Vec<_>>(), vec![1, 2, 5, 6]);
        assert!(f.is_satisfied_by(&a));
        let b = trip_to_assignment(&g, &Trip::new(vec![0, 1, 3])).unwrap();
        assert_eq!(b.true_vars().collect::<Vec<_>>(), vec![1, 2, 4, 5, 8]);
        assert!(f.is_satisfied_by(&b));
        assert!(matches!(trip_to_assignment(&g, &Trip::new(vec![0])), Err(EncodeError::SingleVertexTrip)));
        let g3 = build_grid_graph(3, 3, 1.0);
        assert!(matches!(trip_to_assignment(&g3, &Trip::new(vec![3, 4, 5, 8, 7])), Err(EncodeError::NotSimple)));
    }

    #[test]
    fn enumeration_basics() {
        let empty = CnfFormula::new(1, vec![]).unwrap();
        assert_eq!(enumerate_solutions(&empty).unwrap().len(), 2);
        let unit = CnfFormula::new(1, vec![vec![1]]).unwrap();
        let sols = enumerate_solutions(&unit).unwrap();
        assert_eq!(sols, vec![Assignment::from_bools(&[true])]);
        let f = CnfFormula::new(2, vec![vec![1, 2]]).unwrap();
        let sols = enumerate_solutions(&f).unwrap();
        assert_eq!(
            sols,
            vec![
                Assignment::from_bools(&[false, true]),
                Assignment::from_bools(&[true, false]),
                Assignment::from_bools(&[true, true])
            ]
        );
        let big = CnfFormula::new(25, vec![]).unwrap();
        assert!(matches!(enumerate_solutions(&big), Err(EncodeError::TooLarge(25))));
    }

    #[test]
    fn grid_2x2_has_8_solutions() {
        // 4 single-edge trips and 4 three-vertex trips; the four Hamiltonian
        // paths have adjacent terminals, which H4 excludes.
        let g = build_grid_graph(2, 2, 1.0);
        let f = encode_relaxed(&g).unwrap();
        assert_eq!(enumerate_solutions(&f).unwrap().len(), 8);
        let hamiltonian = trip_to_assignment(&g, &Trip::new(vec![0, 1, 3, 2])).unwrap();
        assert!(!f.is_satisfied_by(&hamiltonian));
    }

    #[test]
    fn removing_h3_enlarges_solutions() {
        let f = encode_relaxed(&build_grid_graph(3, 3, 1.0)).unwrap();
        let with = enumerate_solutions(&f).unwrap().len();
        let without = enumerate_solutions(&f.without(ClauseTag::H3)).unwrap().len();
        assert!(without > with, "{without} vs {with}");
    }

    #[test]
    fn dimacs_round_trip() {
        let f = encode_relaxed(&build_grid_graph(2, 2, 1.0)).unwrap();
        let text = to_dimacs(&f);
        assert!(text.starts_with("p cnf 8 25\n"));
        let back = parse_dimacs(&text).unwrap();
        assert_eq!(back.num_vars, f.num_vars);
        let mut a = back.clauses.clone();
        let mut b = f.clauses.clone();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn dimacs_edge_cases() {
        let f = parse_dimacs("c comment\np cnf 3 2\n1 -2 0 3\n0\n").unwrap();
        assert_eq!(f.clauses, vec![vec![1, -2], vec![3]]);
        assert!(parse_dimacs("p cnf 2 1\n1 3 0\n").is_err());
        assert!(parse_dimacs("p cnf x 1\n1 0\n").is_err());
        assert!(parse_dimacs("1 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 0\n").is_err());
    }

    #[test]
    fn dimacs_files_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid_graph(2, 2, 1.0);
        let f = encode_relaxed(&g).unwrap();
        let path = dir.path().join("g.cnf");
        write_dimacs(&f, Some(&g), &path).unwrap();
        let vars = fs::read_to_string(dir.path().join("g.cnf.vars")).unwrap();
        assert!(vars.starts_with("n 0 1\n"));
        assert!(vars.contains("s 3 8\n"));
        let back = read_dimacs(&path).unwrap();
        assert_eq!(back.clauses.len(), 25);
        assert_eq!(back.var_map, Some(VarMap::new(4)));
        fs::write(dir.path().join("g.cnf.vars"), "n 0 2\n").unwrap();
        assert!(read_dimacs(&path).is_err());
        fs::remove_file(dir.path().join("g.cnf.vars")).unwrap();
        assert_eq!(read_dimacs(&path).unwrap().var_map, None);
    }
}
