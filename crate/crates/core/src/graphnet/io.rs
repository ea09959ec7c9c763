//! Text format: a block is `I E` followed by `E` lines `j i` (0-based arc
//! `j -> i`, self-loops never stored). Sequences separate blocks with `---`.

use std::fmt::Write as _;
use std::path::Path;

use super::digraph::{Digraph, GraphSequence};
use crate::error::{Error, Result};

fn format_block(g: &Digraph, out: &mut String) {
    let _ = writeln!(out, "{} {}", g.num_nodes(), g.num_edges());
    for (j, i) in g.edges() {
        let _ = writeln!(out, "{j} {i}");
    }
}

pub fn format_graph_sequence(seq: &GraphSequence) -> String {
    let mut out = String::new();
    for (k, g) in seq.slots().iter().enumerate() {
        if k > 0 {
            out.push_str("---\n");
        }
        format_block(g, &mut out);
    }
    out
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::parse("graph", format!("line {line}: missing field")))?;
    tok.parse()
        .map_err(|_| Error::parse("graph", format!("line {line}: bad integer {tok:?}")))
}

fn parse_block(lines: &[(usize, &str)]) -> Result<Digraph> {
    let (first_no, first) = lines
        .first()
        .ok_or_else(|| Error::parse("graph", "empty graph block"))?;
    let mut head = first.split_whitespace();
    let n = parse_usize(head.next(), *first_no)?;
    let e = parse_usize(head.next(), *first_no)?;
    if lines.len() - 1 != e {
        return Err(Error::parse(
            "graph",
            format!("header announces {e} edges, found {}", lines.len() - 1),
        ));
    }
    let mut g = Digraph::empty(n)?;
    for &(no, line) in &lines[1..] {
        let mut it = line.split_whitespace();
        let j = parse_usize(it.next(), no)?;
        let i = parse_usize(it.next(), no)?;
        if j == i {
            return Err(Error::parse("graph", format!("line {no}: self-loop stored")));
        }
        g.add_edge(j, i)?;
    }
    Ok(g)
}

pub fn parse_graph_sequence(text: &str) -> Result<GraphSequence> {
    let mut blocks: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "---" {
            blocks.push(Vec::new());
        } else {
            blocks.last_mut().unwrap().push((no + 1, line));
        }
    }
    let slots = blocks
        .iter()
        .map(|b| parse_block(b))
        .collect::<Result<Vec<_>>>()?;
    let len = slots.len();
    Ok(GraphSequence::new(slots)?.with_window(len))
}

pub fn read_graph_sequence(path: &Path) -> Result<GraphSequence> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_graph_sequence(&text)
}

pub fn write_graph_sequence(path: &Path, seq: &GraphSequence) -> Result<()> {
    std::fs::write(path, format_graph_sequence(seq)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_sequence() {
        let a = Digraph::from_edges(3, [(0, 1), (2, 0)]).unwrap();
        let b = Digraph::from_edges(3, [(1, 2)]).unwrap();
        let seq = GraphSequence::new(vec![a, b]).unwrap().with_window(2);
        let text = format_graph_sequence(&seq);
        assert_eq!(text, "3 2\n0 1\n2 0\n---\n3 1\n1 2\n");
        assert_eq!(parse_graph_sequence(&text).unwrap(), seq);
    }

    #[test]
    fn rejects_edge_count_mismatch() {
        assert!(parse_graph_sequence("3 2\n0 1\n").is_err());
    }

    #[test]
    fn rejects_stored_self_loop() {
        assert!(parse_graph_sequence("2 1\n1 1\n").is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_graph_sequence("3 x\n").is_err());
        assert!(parse_graph_sequence("2 1\n0 5\n").is_err());
    }
}
