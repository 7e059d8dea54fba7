//! Edge-list topology files.
//!
//! ```text
//! # comment
//! 3
//! names: A B C
//! A B
//! 1 2
//! ```
//!
//! The first non-comment line is the node count; an optional `names:` line
//! follows. Each remaining line is a directed edge given by 0-based indices
//! or node names.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::MixedGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub graph: MixedGraph,
    pub names: Vec<String>,
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_topology(&text)
}

pub fn parse_topology(text: &str) -> Result<Topology> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let bad = |line: usize, msg: String| Error::Validation(format!("topology line {line}: {msg}"));
    let (line, header) = lines.next().ok_or_else(|| Error::Validation("empty topology file".into()))?;
    let p: usize = header
        .parse()
        .map_err(|_| bad(line, format!("expected node count, got '{header}'")))?;
    if p == 0 {
        return Err(bad(line, "node count must be positive".into()));
    }
    let mut names: Vec<String> = (0..p).map(|j| format!("X{j}")).collect();
    if let Some(&(line, l)) = lines.peek() {
        if let Some(rest) = l.strip_prefix("names:") {
            let given: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if given.len() != p {
                return Err(bad(line, format!("{} names for {p} nodes", given.len())));
            }
            names = given;
            lines.next();
        }
    }
    let node = |line: usize, tok: &str| -> Result<usize> {
        if let Some(j) = names.iter().position(|n| n == tok) {
            return Ok(j);
        }
        match tok.parse::<usize>() {
            Ok(j) if j < p => Ok(j),
            _ => Err(bad(line, format!("unknown node '{tok}'"))),
        }
    };
    let mut edges = Vec::new();
    for (line, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(bad(line, format!("expected 'from to', got '{l}'")));
        }
        let (a, b) = (node(line, toks[0])?, node(line, toks[1])?);
        if a == b {
            return Err(bad(line, format!("self-loop on '{}'", toks[0])));
        }
        edges.push((a, b));
    }
    let graph = MixedGraph::from_edges(p, &edges, &[])?;
    if graph.has_directed_cycle() {
        return Err(Error::Validation("topology contains a directed cycle".into()));
    }
    Ok(Topology { graph, names })
}
