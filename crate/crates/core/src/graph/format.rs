//! Graph interchange format.
//!
//! ```text
//! graphcond-graph 1
//! vertices 8
//! terminals 0 7
//! edge 0 1 3.0e-1
//! edge 0 6 7.9e-1
//! ```
//!
//! `terminals` lists `w1` then `w2`. Edge endpoints may appear in either
//! order; parallel edges are merged on load.

use std::fmt::Write as _;

use thiserror::Error;

use super::{CircuitGraph, GraphError};
use crate::sample::real;

pub const GRAPH_HEADER: &str = "graphcond-graph";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphParseError {
    #[error("graph line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid graph: {0}")]
    Invalid(#[from] GraphError),
}

fn syntax(line: usize, message: impl Into<String>) -> GraphParseError {
    GraphParseError::Syntax {
        line,
        message: message.into(),
    }
}

pub(super) fn write_graph(g: &CircuitGraph) -> String {
    let (w1, w2) = g.terminals();
    let mut s = format!(
        "{GRAPH_HEADER} 1\nvertices {}\nterminals {w1} {w2}\n",
        g.n_vertices()
    );
    for e in g.edges() {
        let _ = writeln!(s, "edge {} {} {}", e.a, e.b, real(e.conductance));
    }
    s
}

pub(super) fn parse_graph(text: &str) -> Result<CircuitGraph, GraphParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (n, header) = lines.next().ok_or_else(|| syntax(0, "empty document"))?;
    if header.split_whitespace().collect::<Vec<_>>() != [GRAPH_HEADER, "1"] {
        return Err(syntax(n, format!("expected `{GRAPH_HEADER} 1` header")));
    }
    let mut vertices: Option<usize> = None;
    let mut terminals: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    for (n, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| syntax(n, format!("bad integer `{s}`")))
        };
        match (f[0], f.len()) {
            ("vertices", 2) if vertices.is_none() => vertices = Some(int(f[1])?),
            ("terminals", 3) if terminals.is_none() => terminals = Some((int(f[1])?, int(f[2])?)),
            ("edge", 4) => {
                let c: f64 = f[3]
                    .parse()
                    .map_err(|_| syntax(n, format!("bad number `{}`", f[3])))?;
                edges.push((int(f[1])?, int(f[2])?, c));
            }
            ("vertices" | "terminals", _) => {
                return Err(syntax(n, format!("malformed or repeated `{}`", f[0])))
            }
            ("edge", _) => return Err(syntax(n, "edge needs two vertices and a conductance")),
            (other, _) => return Err(syntax(n, format!("unknown record `{other}`"))),
        }
    }
    let vertices = vertices.ok_or_else(|| syntax(0, "missing `vertices`"))?;
    let (w1, w2) = terminals.ok_or_else(|| syntax(0, "missing `terminals`"))?;
    Ok(CircuitGraph::new(vertices, w1, w2, edges)?)
}
