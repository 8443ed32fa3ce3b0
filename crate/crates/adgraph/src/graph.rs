//! The computation-graph data model.
//!
//! A [`Graph`] is an immutable straight-line program: a list of nodes in
//! which every edge points from a node to one with a strictly smaller
//! index. That ordering makes graphs acyclic by construction and gives a
//! canonical evaluation order for free. Graphs are built either through
//! [`GraphBuilder`], which enforces the invariants as nodes are added, or
//! permissively through [`Graph::from_parts`] (used by deserialization),
//! after which [`Graph::validate`] reports any violations.

use std::collections::BTreeMap;
use std::fmt;

use crate::op::OpKind;

/// Index of a node within a [`Graph`]. Dense, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// One primitive instruction: an operation and its ordered input edges.
///
/// Input order is semantic: `Sub` computes `inputs[0] - inputs[1]`,
/// `Div` computes `inputs[0] / inputs[1]`, and `Pow` computes
/// `inputs[0] ^ inputs[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub op: OpKind,
    pub inputs: Vec<NodeId>,
}

/// An invariant violation found by [`Graph::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// A node's input count does not match its operation's arity.
    ArityMismatch { node: NodeId, expected: usize, got: usize },
    /// An edge points at a node with an equal or larger index.
    NonTopologicalEdge { node: NodeId, input: NodeId },
    /// An output id is out of range.
    OutputOutOfRange { output: NodeId, len: usize },
    /// The graph has no outputs.
    NoOutputs,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ArityMismatch { node, expected, got } => {
                write!(f, "{node}: expected {expected} inputs, got {got}")
            }
            Violation::NonTopologicalEdge { node, input } => {
                write!(f, "non-topological edge: {node} reads from {input}")
            }
            Violation::OutputOutOfRange { output, len } => {
                write!(f, "output {output} out of range for {len} nodes")
            }
            Violation::NoOutputs => write!(f, "no outputs"),
        }
    }
}

impl std::error::Error for Violation {}

/// Error raised by [`GraphBuilder`] on a malformed construction step.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    ArityMismatch { op: String, expected: usize, got: usize },
    DanglingInput { input: NodeId, len: usize },
    DanglingOutput { output: NodeId, len: usize },
    NoOutputs,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::ArityMismatch { op, expected, got } => {
                write!(f, "{op} expects {expected} inputs, got {got}")
            }
            GraphError::DanglingInput { input, len } => {
                write!(f, "input {input} does not exist (graph has {len} nodes)")
            }
            GraphError::DanglingOutput { output, len } => {
                write!(f, "output {output} does not exist (graph has {len} nodes)")
            }
            GraphError::NoOutputs => write!(f, "a graph needs at least one output"),
        }
    }
}

impl std::error::Error for GraphError {}

/// An immutable directed acyclic program over primitive operations.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    nodes: Vec<Node>,
    outputs: Vec<NodeId>,
}

impl Graph {
    /// Assembles a graph without checking any invariants.
    ///
    /// Callers that cannot guarantee well-formedness (deserializers,
    /// tests) should run [`Graph::validate`] afterwards. Dead nodes are
    /// permitted; they are only removed by optimization passes.
    pub fn from_parts(nodes: Vec<Node>, outputs: Vec<NodeId>) -> Self {
        Graph { nodes, outputs }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    /// Node ids in 0..len order.
    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Var nodes in id order, with their names.
    pub fn var_nodes(&self) -> impl Iterator<Item = (NodeId, &str)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match &n.op {
            OpKind::Var(name) => Some((NodeId(i), name.as_str())),
            _ => None,
        })
    }

    /// Distinct variable names in first-occurrence order.
    ///
    /// Two `Var` nodes with the same name denote the same variable: they
    /// receive the same bound value and their derivative contributions
    /// are summed.
    pub fn var_names(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for (_, name) in self.var_nodes() {
            if !seen.contains(&name) {
                seen.push(name);
            }
        }
        seen
    }

    /// Checks every structural invariant and returns all violations.
    ///
    /// An empty result means the graph is well-formed. Cycles cannot be
    /// expressed at all: an edge may only point at a smaller index, so
    /// the only ordering defect reportable is a non-topological edge.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let expected = node.op.arity();
            if node.inputs.len() != expected {
                violations.push(Violation::ArityMismatch {
                    node: NodeId(i),
                    expected,
                    got: node.inputs.len(),
                });
            }
            for &input in &node.inputs {
                if input.0 >= i {
                    violations.push(Violation::NonTopologicalEdge { node: NodeId(i), input });
                }
            }
        }
        if self.outputs.is_empty() {
            violations.push(Violation::NoOutputs);
        }
        for &output in &self.outputs {
            if output.0 >= self.nodes.len() {
                violations.push(Violation::OutputOutOfRange { output, len: self.nodes.len() });
            }
        }
        violations
    }

    /// Nodes reachable from the outputs.
    pub fn live_set(&self) -> Vec<bool> {
        let mut live = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> =
            self.outputs.iter().copied().filter(|o| o.0 < self.nodes.len()).collect();
        while let Some(id) = stack.pop() {
            if live[id.0] {
                continue;
            }
            live[id.0] = true;
            stack.extend_from_slice(&self.nodes[id.0].inputs);
        }
        live
    }
}

/// Incremental, checked graph construction.
///
/// Node ids are handed out densely in insertion order, so every graph a
/// builder produces satisfies the topological-edge invariant.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Appends a node and returns its fresh id, strictly greater than
    /// every input id.
    pub fn add_node(&mut self, op: OpKind, inputs: Vec<NodeId>) -> Result<NodeId, GraphError> {
        if inputs.len() != op.arity() {
            return Err(GraphError::ArityMismatch {
                op: op.to_string(),
                expected: op.arity(),
                got: inputs.len(),
            });
        }
        for &input in &inputs {
            if input.0 >= self.nodes.len() {
                return Err(GraphError::DanglingInput { input, len: self.nodes.len() });
            }
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, inputs });
        Ok(id)
    }

    /// Convenience wrappers for the common shapes.
    pub fn var(&mut self, name: &str) -> NodeId {
        self.add_node(OpKind::Var(name.to_string()), vec![]).expect("var is zero-arity")
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.add_node(OpKind::Const(value), vec![]).expect("const is zero-arity")
    }

    pub fn unary(&mut self, op: OpKind, input: NodeId) -> Result<NodeId, GraphError> {
        self.add_node(op, vec![input])
    }

    pub fn binary(&mut self, op: OpKind, lhs: NodeId, rhs: NodeId) -> Result<NodeId, GraphError> {
        self.add_node(op, vec![lhs, rhs])
    }

    /// Seals the graph with the given outputs.
    pub fn finish(self, outputs: Vec<NodeId>) -> Result<Graph, GraphError> {
        if outputs.is_empty() {
            return Err(GraphError::NoOutputs);
        }
        for &output in &outputs {
            if output.0 >= self.nodes.len() {
                return Err(GraphError::DanglingOutput { output, len: self.nodes.len() });
            }
        }
        Ok(Graph { nodes: self.nodes, outputs })
    }
}

/// Values for the free variables of a graph, keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    values: BTreeMap<String, f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (S, f64)>>(iter: T) -> Self {
        Bindings { values: iter.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }
}
