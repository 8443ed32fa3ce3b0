//! Plain-text persistence for graphs.
//!
//! The format is line oriented and versioned:
//!
//! ```text
//! adgraph v1
//! 0 VAR x1
//! 1 LN 0
//! 2 VAR x2
//! 3 MUL 0 2
//! 4 ADD 1 3
//! 5 SIN 2
//! 6 SUB 4 5
//! outputs 6
//! ```
//!
//! One node per line: its id (ids are dense and ascending, starting at
//! 0), an operation tag, then a payload (`CONST` takes a literal, `VAR`
//! a name) or the input ids. A final `outputs` line lists the output
//! ids in order. Constants print with Rust's shortest round-trip
//! formatting, so serializing, parsing and serializing again yields the
//! identical byte string, and values survive exactly (`inf`, `-inf`
//! and `NaN` included, though a NaN's payload bits are not preserved).
//!
//! Deserialized graphs are fully validated; a file that parses but
//! breaks a structural invariant (edge to a later node, wrong operand
//! count, missing outputs) is rejected.

use std::fmt;

use crate::graph::{Graph, Node, NodeId, Violation};
use crate::op::OpKind;

pub const FORMAT_HEADER: &str = "adgraph v1";

/// A file that could not be read back as a graph.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphFileError {
    /// The header line is missing or names another version.
    VersionMismatch { found: String },
    /// A line could not be parsed; `line` is 1-based.
    Malformed { line: usize, message: String },
    /// The file parsed but the graph breaks structural invariants.
    Invalid { violations: Vec<Violation> },
}

impl fmt::Display for GraphFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFileError::VersionMismatch { found } => {
                write!(f, "expected header '{FORMAT_HEADER}', found '{found}'")
            }
            GraphFileError::Malformed { line, message } => {
                write!(f, "line {line}: {message}")
            }
            GraphFileError::Invalid { violations } => {
                write!(f, "invalid graph: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for GraphFileError {}

fn op_tag(op: &OpKind) -> &'static str {
    match op {
        OpKind::Const(_) => "CONST",
        OpKind::Var(_) => "VAR",
        OpKind::Add => "ADD",
        OpKind::Sub => "SUB",
        OpKind::Mul => "MUL",
        OpKind::Div => "DIV",
        OpKind::Neg => "NEG",
        OpKind::Ln => "LN",
        OpKind::Sin => "SIN",
        OpKind::Cos => "COS",
        OpKind::Exp => "EXP",
        OpKind::Pow => "POW",
    }
}

// Variable names in files are one step wider than the source language:
// a leading underscore is allowed, which is how seed variables travel.
fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Writes a graph in the versioned text format. Output is canonical:
/// the same graph always produces the same bytes.
pub fn serialize(graph: &Graph) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    for (i, node) in graph.nodes().iter().enumerate() {
        out.push_str(&i.to_string());
        out.push(' ');
        out.push_str(op_tag(&node.op));
        match &node.op {
            OpKind::Const(value) => {
                out.push(' ');
                out.push_str(&value.to_string());
            }
            OpKind::Var(name) => {
                debug_assert!(is_valid_name(name), "unserializable variable name {name:?}");
                out.push(' ');
                out.push_str(name);
            }
            _ => {
                for input in &node.inputs {
                    out.push(' ');
                    out.push_str(&input.index().to_string());
                }
            }
        }
        out.push('\n');
    }
    out.push_str("outputs");
    for output in graph.outputs() {
        out.push(' ');
        out.push_str(&output.index().to_string());
    }
    out.push('\n');
    out
}

/// Parses the text format back into a validated graph.
pub fn deserialize(text: &str) -> Result<Graph, GraphFileError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let header = lines.next();
    match header {
        Some((_, line)) if line == FORMAT_HEADER => {}
        Some((_, line)) => {
            return Err(GraphFileError::VersionMismatch { found: line.to_string() })
        }
        None => return Err(GraphFileError::VersionMismatch { found: String::new() }),
    }
    let malformed = |line: usize, message: String| GraphFileError::Malformed { line, message };
    let mut nodes: Vec<Node> = Vec::new();
    let mut outputs: Option<Vec<NodeId>> = None;
    for (line_no, line) in lines {
        if line.is_empty() {
            return Err(malformed(line_no, "blank line".to_string()));
        }
        let mut fields = line.split_ascii_whitespace();
        let first = fields.next().expect("non-empty line has a first field");
        if outputs.is_some() {
            return Err(malformed(line_no, format!("unexpected line after outputs: '{line}'")));
        }
        if first == "outputs" {
            let ids: Vec<NodeId> = fields
                .map(|f| {
                    f.parse::<usize>().map(NodeId).map_err(|_| {
                        malformed(line_no, format!("output id '{f}' is not a number"))
                    })
                })
                .collect::<Result<_, _>>()?;
            outputs = Some(ids);
            continue;
        }
        let id: usize = first
            .parse()
            .map_err(|_| malformed(line_no, format!("node id '{first}' is not a number")))?;
        if id != nodes.len() {
            return Err(malformed(
                line_no,
                format!("expected node id {}, found {id}", nodes.len()),
            ));
        }
        let tag = fields
            .next()
            .ok_or_else(|| malformed(line_no, "missing operation tag".to_string()))?;
        let rest: Vec<&str> = fields.collect();
        let node = match tag {
            "CONST" => {
                if rest.len() != 1 {
                    return Err(malformed(line_no, "CONST takes exactly one value".to_string()));
                }
                let value: f64 = rest[0].parse().map_err(|_| {
                    malformed(line_no, format!("'{}' is not a number", rest[0]))
                })?;
                Node { op: OpKind::Const(value), inputs: vec![] }
            }
            "VAR" => {
                if rest.len() != 1 {
                    return Err(malformed(line_no, "VAR takes exactly one name".to_string()));
                }
                if !is_valid_name(rest[0]) {
                    return Err(malformed(
                        line_no,
                        format!("'{}' is not a valid variable name", rest[0]),
                    ));
                }
                Node { op: OpKind::Var(rest[0].to_string()), inputs: vec![] }
            }
            _ => {
                let op = match tag {
                    "ADD" => OpKind::Add,
                    "SUB" => OpKind::Sub,
                    "MUL" => OpKind::Mul,
                    "DIV" => OpKind::Div,
                    "NEG" => OpKind::Neg,
                    "LN" => OpKind::Ln,
                    "SIN" => OpKind::Sin,
                    "COS" => OpKind::Cos,
                    "EXP" => OpKind::Exp,
                    "POW" => OpKind::Pow,
                    other => {
                        return Err(malformed(
                            line_no,
                            format!("unknown operation tag '{other}'"),
                        ))
                    }
                };
                let inputs: Vec<NodeId> = rest
                    .iter()
                    .map(|f| {
                        f.parse::<usize>().map(NodeId).map_err(|_| {
                            malformed(line_no, format!("input id '{f}' is not a number"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
                Node { op, inputs }
            }
        };
        nodes.push(node);
    }
    let outputs = outputs.ok_or_else(|| GraphFileError::Malformed {
        line: nodes.len() + 1,
        message: "missing outputs line".to_string(),
    })?;
    let graph = Graph::from_parts(nodes, outputs);
    let violations = graph.validate();
    if !violations.is_empty() {
        return Err(GraphFileError::Invalid { violations });
    }
    Ok(graph)
}
