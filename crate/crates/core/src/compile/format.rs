//! Text format, one node per line (line `i` after the header is node `i`):
//!
//! ```text
//! prob 1 <num_nodes> <num_vars>
//! T
//! F
//! D <var> <lo> <hi> <lo_count> <hi_count> <lo_param> <hi_param>
//! A <k> <child_1> ... <child_k>
//! root <id>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::diagram::{DecisionNode, Node, ProbDiagram};
use super::DiagramError;

pub const FORMAT_VERSION: u32 = 1;
const PARAM_SUM_TOLERANCE: f64 = 1e-9;

pub fn serialize(d: &ProbDiagram) -> String {
    let mut s = String::with_capacity(d.len() * 24);
    writeln!(s, "prob {FORMAT_VERSION} {} {}", d.len(), d.num_vars()).unwrap();
    for node in d.nodes() {
        match node {
            Node::True => s.push_str("T\n"),
            Node::False => s.push_str("F\n"),
            Node::Decision(n) => writeln!(
                s,
                "D {} {} {} {} {} {:.16e} {:.16e}",
                n.var, n.lo, n.hi, n.lo_count, n.hi_count, n.lo_param, n.hi_param
            )
            .unwrap(),
            Node::Conjunction(cs) => {
                write!(s, "A {}", cs.len()).unwrap();
                for c in cs {
                    write!(s, " {c}").unwrap();
                }
                s.push('\n');
            }
        }
    }
    writeln!(s, "root {}", d.root()).unwrap();
    s
}

pub fn parse_diagram(text: &str) -> Result<ProbDiagram, DiagramError> {
    let err = |line: usize, msg: String| DiagramError::Format { line, msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "prob" {
        return Err(err(hline, format!("malformed header {header:?}")));
    }
    if h[1] != FORMAT_VERSION.to_string() {
        return Err(err(hline, format!("unsupported version {}", h[1])));
    }
    let num_nodes: usize = h[2].parse().map_err(|_| err(hline, "bad node count".into()))?;
    let num_vars: u32 = h[3].parse().map_err(|_| err(hline, "bad variable count".into()))?;

    let mut nodes = Vec::with_capacity(num_nodes);
    let mut root = None;
    for (lineno, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let id = nodes.len();
        let int = |t: &str| t.parse::<usize>().map_err(|_| err(lineno, format!("bad integer {t:?}")));
        let child = |t: &str| {
            let c = int(t)?;
            if c >= id {
                Err(err(lineno, format!("node {id} references child {c} that is not below it")))
            } else {
                Ok(c)
            }
        };
        if root.is_some() {
            return Err(err(lineno, "content after root line".into()));
        }
        match toks[0] {
            "T" if toks.len() == 1 => nodes.push(Node::True),
            "F" if toks.len() == 1 => nodes.push(Node::False),
            "D" if toks.len() == 8 => {
                let var = int(toks[1])? as u32;
                let (lo, hi) = (child(toks[2])?, child(toks[3])?);
                let counts = (int(toks[4])? as u64, int(toks[5])? as u64);
                let param = |t: &str| t.parse::<f64>().map_err(|_| err(lineno, format!("bad parameter {t:?}")));
                let (lo_param, hi_param) = (param(toks[6])?, param(toks[7])?);
                if !((lo_param + hi_param) - 1.0).abs().le(&PARAM_SUM_TOLERANCE) || lo_param < 0.0 || hi_param < 0.0 {
                    return Err(err(lineno, format!("parameters {lo_param} and {hi_param} do not sum to 1")));
                }
                nodes.push(Node::Decision(DecisionNode {
                    var,
                    lo,
                    hi,
                    lo_count: counts.0,
                    hi_count: counts.1,
                    lo_param,
                    hi_param,
                }));
            }
            "A" if toks.len() >= 2 => {
                let k = int(toks[1])?;
                if toks.len() != k + 2 {
                    return Err(err(lineno, format!("conjunction declares {k} children, found {}", toks.len() - 2)));
                }
                let cs = toks[2..].iter().map(|t| child(t)).collect::<Result<Vec<_>, _>>()?;
                nodes.push(Node::Conjunction(cs));
            }
            "root" if toks.len() == 2 => root = Some(int(toks[1])?),
            _ => return Err(err(lineno, format!("unrecognized line {line:?}"))),
        }
    }
    let root = root.ok_or_else(|| err(0, "missing root line".into()))?;
    if nodes.len() != num_nodes {
        return Err(err(0, format!("header declares {num_nodes} nodes, found {}", nodes.len())));
    }
    ProbDiagram::from_parts(nodes, root, num_vars)
}

pub fn write_diagram(d: &ProbDiagram, path: impl AsRef<Path>) -> Result<(), DiagramError> {
    fs::write(path, serialize(d))?;
    Ok(())
}

pub fn deserialize(path: impl AsRef<Path>) -> Result<ProbDiagram, DiagramError> {
    parse_diagram(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::fixtures::psi1;
    use crate::compile::smooth;
    use proptest::prelude::*;

    #[test]
    fn round_trip_smooth_psi() {
        let mut d = smooth(&psi1()).unwrap();
        let root = d.root();
        let n = d.decision_mut(root).unwrap();
        n.lo_count = 3;
        n.hi_count = 5;
        n.hi_param = 6.0 / 10.0;
        n.lo_param = 1.0 - n.hi_param;
        let text = serialize(&d);
        assert!(text.starts_with("prob 1 9 3\n"));
        assert!(text.ends_with(&format!("root {root}\n")));
        assert_eq!(parse_diagram(&text).unwrap(), d);
        assert_eq!(serialize(&parse_diagram(&text).unwrap()), text);
    }

    #[test]
    fn rejects_bad_files() {
        let forward = "prob 1 3 1\nF\nD 1 0 2 0 0 0.5 0.5\nT\nroot 1\n";
        assert!(matches!(parse_diagram(forward), Err(DiagramError::Format { line: 3, .. })));
        let params = "prob 1 3 1\nF\nT\nD 1 0 1 0 0 0.3 0.6\nroot 2\n";
        assert!(matches!(parse_diagram(params), Err(DiagramError::Format { line: 4, .. })));
        let version = "prob 2 1 0\nT\nroot 0\n";
        assert!(matches!(parse_diagram(version), Err(DiagramError::Format { line: 1, .. })));
        assert!(parse_diagram("prob 1 2 0\nT\nroot 0\n").is_err());
        assert!(parse_diagram("prob 1 1 0\nT\n").is_err());
    }

    proptest! {
        #[test]
        fn params_survive_round_trip(p in 0.0f64..=1.0, lo in 0u64..1000, hi in 0u64..1000) {
            let mut d = psi1();
            let root = d.root();
            let n = d.decision_mut(root).unwrap();
            n.hi_param = p;
            n.lo_param = 1.0 - p;
            n.lo_count = lo;
            n.hi_count = hi;
            prop_assert_eq!(parse_diagram(&serialize(&d)).unwrap(), d);
        }
    }
}
