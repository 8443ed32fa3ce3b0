//! Reverse-mode differentiation as graph construction.
//!
//! Where [`crate::tape`] interleaves differentiation with a concrete
//! evaluation, [`build_adjoint`] differentiates the graph itself, once,
//! with no values in sight. The result is an ordinary [`Graph`] that
//! embeds the primal nodes unchanged and adds, for each live primal
//! node, an adjoint subgraph:
//!
//! ```text
//! adjoint(v) = sum over consumers c of v of
//!              adjoint(c) * d c / d v   (as graph nodes)
//! ```
//!
//! Output adjoints start from fresh seed variables (`__seed`, or
//! `__seed0`, `__seed1`, ... when there are several outputs), so one
//! built graph serves any seed direction and any input point: evaluate
//! it many times, fold it, serialize it, feed it back to the executor.
//! Partial subgraphs reuse primal nodes where the derivative already
//! exists in the graph (the factor `x1` for a product, the node itself
//! for `exp`), and nodes the outputs cannot reach get no adjoint at
//! all; a variable none of the outputs depend on gets gradient `0`.
//!
//! [`constant_fold`] cleans up afterwards: subtrees with all-constant
//! operands collapse to their value, products with an exact unit factor
//! drop the multiply, and anything unreachable from the outputs is
//! removed. Folding a constant subtree that violates a primitive's
//! domain is an error, the same eager stance the executor takes.

use std::collections::BTreeMap;
use std::fmt;

use crate::exec::{evaluate, EvalError};
use crate::graph::{Bindings, Graph, GraphBuilder, NodeId};
use crate::op::{primitive_value, DomainError, OpKind};

/// A primal graph extended with its adjoint computation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointProgram {
    graph: Graph,
    seed_names: Vec<String>,
    primal_output_count: usize,
    gradient_names: Vec<String>,
}

/// One evaluation of an [`AdjointProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointValues {
    /// The primal outputs, in the original order.
    pub outputs: Vec<f64>,
    /// Variable adjoints, by name in sorted order.
    pub gradient: Vec<(String, f64)>,
}

impl AdjointProgram {
    /// The combined graph. Its outputs are the primal outputs followed
    /// by one gradient per variable name, sorted by name.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Seed variable names, one per primal output, in output order.
    pub fn seed_names(&self) -> &[String] {
        &self.seed_names
    }

    pub fn primal_output_count(&self) -> usize {
        self.primal_output_count
    }

    /// Variable names the gradient outputs correspond to, in order.
    pub fn gradient_names(&self) -> &[String] {
        &self.gradient_names
    }

    /// Evaluates the combined graph at a point with the given output
    /// seeds. Panics unless there is exactly one seed per primal
    /// output; seed bindings are injected by name.
    pub fn eval(&self, bindings: &Bindings, seeds: &[f64]) -> Result<AdjointValues, EvalError> {
        assert_eq!(seeds.len(), self.seed_names.len(), "one seed per primal output");
        let mut bound = bindings.clone();
        for (name, &seed) in self.seed_names.iter().zip(seeds) {
            bound.set(name.clone(), seed);
        }
        let valuation = evaluate(&self.graph, &bound)?;
        let outputs = valuation.outputs()[..self.primal_output_count].to_vec();
        let gradient = self
            .gradient_names
            .iter()
            .cloned()
            .zip(valuation.outputs()[self.primal_output_count..].iter().copied())
            .collect();
        Ok(AdjointValues { outputs, gradient })
    }

    /// Constant-folds the combined graph. Output positions, seed names
    /// and gradient names are unaffected; only node structure changes.
    pub fn fold(&self) -> Result<AdjointProgram, FoldError> {
        Ok(AdjointProgram {
            graph: constant_fold(&self.graph)?,
            seed_names: self.seed_names.clone(),
            primal_output_count: self.primal_output_count,
            gradient_names: self.gradient_names.clone(),
        })
    }
}

/// Differentiates the graph structurally, producing the combined
/// primal-plus-adjoint program. Purely symbolic: no bindings are
/// involved, and the input graph is embedded unchanged.
pub fn build_adjoint(graph: &Graph) -> AdjointProgram {
    assert!(
        graph.var_nodes().all(|(_, name)| !name.starts_with("__seed")),
        "the __seed name prefix is reserved for output seeds"
    );
    let mut builder = GraphBuilder::new();
    for node in graph.nodes() {
        builder
            .add_node(node.op.clone(), node.inputs.clone())
            .expect("a well-formed graph re-adds cleanly");
    }
    let seed_names: Vec<String> = if graph.outputs().len() == 1 {
        vec!["__seed".to_string()]
    } else {
        (0..graph.outputs().len()).map(|k| format!("__seed{k}")).collect()
    };
    let seed_ids: Vec<NodeId> = seed_names.iter().map(|name| builder.var(name)).collect();

    let live = graph.live_set();
    // Consumer edges among live nodes, in (consumer, position) order.
    let mut consumers: Vec<Vec<(NodeId, usize)>> = vec![Vec::new(); graph.len()];
    for id in graph.ids() {
        if !live[id.index()] {
            continue;
        }
        for (pos, &input) in graph.node(id).inputs.iter().enumerate() {
            consumers[input.index()].push((id, pos));
        }
    }

    // Reverse order guarantees every consumer's adjoint exists before
    // the node it consumes is processed.
    let mut adjoint_of: Vec<Option<NodeId>> = vec![None; graph.len()];
    for i in (0..graph.len()).rev() {
        if !live[i] {
            continue;
        }
        let id = NodeId(i);
        let mut contributions: Vec<NodeId> = Vec::new();
        for (k, &output) in graph.outputs().iter().enumerate() {
            if output == id {
                contributions.push(seed_ids[k]);
            }
        }
        for &(consumer, pos) in &consumers[i] {
            let adj = adjoint_of[consumer.index()].expect("consumer already processed");
            let partial = partial_node(&mut builder, graph, consumer, pos);
            let term = builder.binary(OpKind::Mul, adj, partial).expect("operands exist");
            contributions.push(term);
        }
        adjoint_of[i] = Some(sum_tree(&mut builder, &contributions));
    }

    let mut by_name: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
    for (id, name) in graph.var_nodes() {
        by_name.entry(name).or_default().push(id);
    }
    let mut gradient_names = Vec::new();
    let mut outputs = graph.outputs().to_vec();
    for (name, var_ids) in by_name {
        let adjs: Vec<NodeId> =
            var_ids.iter().filter_map(|v| adjoint_of[v.index()]).collect();
        let node = if adjs.is_empty() {
            builder.constant(0.0)
        } else {
            sum_tree(&mut builder, &adjs)
        };
        gradient_names.push(name.to_string());
        outputs.push(node);
    }

    let primal_output_count = graph.outputs().len();
    let combined = builder.finish(outputs).expect("primal outputs are preserved");
    AdjointProgram { graph: combined, seed_names, primal_output_count, gradient_names }
}

/// Balanced sum so deep fan-out does not build a lopsided chain.
fn sum_tree(builder: &mut GraphBuilder, terms: &[NodeId]) -> NodeId {
    match terms.len() {
        0 => unreachable!("live nodes always have a contribution"),
        1 => terms[0],
        n => {
            let mid = n / 2;
            let lhs = sum_tree(builder, &terms[..mid]);
            let rhs = sum_tree(builder, &terms[mid..]);
            builder.binary(OpKind::Add, lhs, rhs).expect("operands exist")
        }
    }
}

/// Builds d consumer / d inputs[pos] as graph nodes, matching the
/// executor's partial formulas shape for shape so the two reverse
/// modes see identical rounding per term.
fn partial_node(
    builder: &mut GraphBuilder,
    graph: &Graph,
    consumer: NodeId,
    pos: usize,
) -> NodeId {
    let node = graph.node(consumer);
    let x = |k: usize| node.inputs[k];
    let ok = "operands exist";
    match (&node.op, pos) {
        (OpKind::Add, _) => builder.constant(1.0),
        (OpKind::Sub, 0) => builder.constant(1.0),
        (OpKind::Sub, 1) => builder.constant(-1.0),
        (OpKind::Mul, 0) => x(1),
        (OpKind::Mul, 1) => x(0),
        (OpKind::Div, 0) => {
            let one = builder.constant(1.0);
            builder.binary(OpKind::Div, one, x(1)).expect(ok)
        }
        (OpKind::Div, 1) => {
            let sq = builder.binary(OpKind::Mul, x(1), x(1)).expect(ok);
            let ratio = builder.binary(OpKind::Div, x(0), sq).expect(ok);
            builder.unary(OpKind::Neg, ratio).expect(ok)
        }
        (OpKind::Neg, _) => builder.constant(-1.0),
        (OpKind::Ln, _) => {
            let one = builder.constant(1.0);
            builder.binary(OpKind::Div, one, x(0)).expect(ok)
        }
        (OpKind::Sin, _) => builder.unary(OpKind::Cos, x(0)).expect(ok),
        (OpKind::Cos, _) => {
            let sin = builder.unary(OpKind::Sin, x(0)).expect(ok);
            builder.unary(OpKind::Neg, sin).expect(ok)
        }
        // d exp(u) / d u is the consumer's own value.
        (OpKind::Exp, _) => consumer,
        (OpKind::Pow, 0) => {
            let one = builder.constant(1.0);
            let down = builder.binary(OpKind::Sub, x(1), one).expect(ok);
            let pow = builder.binary(OpKind::Pow, x(0), down).expect(ok);
            builder.binary(OpKind::Mul, x(1), pow).expect(ok)
        }
        (OpKind::Pow, 1) => {
            let ln = builder.unary(OpKind::Ln, x(0)).expect(ok);
            builder.binary(OpKind::Mul, consumer, ln).expect(ok)
        }
        (op, pos) => unreachable!("no operand {pos} on {op}"),
    }
}

/// The gradient of a single-output graph via a throwaway adjoint
/// program seeded with 1. Panics on multi-output graphs; build the
/// program explicitly to choose seeds.
pub fn two_phase_grad(graph: &Graph, bindings: &Bindings) -> Result<Vec<(String, f64)>, EvalError> {
    assert_eq!(graph.outputs().len(), 1, "two_phase_grad needs a single output");
    Ok(build_adjoint(graph).eval(bindings, &[1.0])?.gradient)
}

/// Constant folding failed on a constant subtree with no value.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldError {
    Domain { node: NodeId, op: String, source: DomainError },
}

impl fmt::Display for FoldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldError::Domain { node, op, source } => {
                write!(f, "folding {op} at {node}: {source}")
            }
        }
    }
}

impl std::error::Error for FoldError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            FoldError::Domain { source, .. } => Some(source),
        }
    }
}

/// Simplifies a graph without changing any observable value.
///
/// Three rewrites, applied to a fixpoint in one pass:
/// - a node whose operands are all constants becomes a constant;
/// - a product with an exact `1.0` factor becomes its other operand
///   (exact under IEEE 754, so even bit patterns are preserved);
/// - nodes unreachable from the outputs are dropped.
///
/// No other algebraic identity is applied. Variables stay variables;
/// a variable is only removed if the outputs never depended on it.
pub fn constant_fold(graph: &Graph) -> Result<Graph, FoldError> {
    assert!(graph.validate().is_empty(), "constant_fold needs a well-formed graph");
    let n = graph.len();
    let mut const_val: Vec<Option<f64>> = vec![None; n];
    let mut alias: Vec<usize> = (0..n).collect();
    // Aliases always point at strictly smaller ids, so chasing them
    // terminates.
    let root = |alias: &[usize], mut i: usize| {
        while alias[i] != i {
            i = alias[i];
        }
        i
    };
    for i in 0..n {
        let node = graph.node(NodeId(i));
        match &node.op {
            OpKind::Const(c) => const_val[i] = Some(*c),
            OpKind::Var(_) => {}
            op => {
                let resolved: Vec<usize> =
                    node.inputs.iter().map(|&x| root(&alias, x.index())).collect();
                let vals: Vec<Option<f64>> = resolved.iter().map(|&x| const_val[x]).collect();
                if vals.iter().all(|v| v.is_some()) {
                    let inputs: Vec<f64> = vals.iter().map(|v| v.unwrap()).collect();
                    let value = primitive_value(op, &inputs).map_err(|source| {
                        FoldError::Domain {
                            node: NodeId(i),
                            op: op.symbol().to_string(),
                            source,
                        }
                    })?;
                    const_val[i] = Some(value);
                } else if *op == OpKind::Mul {
                    if vals[0] == Some(1.0) {
                        alias[i] = resolved[1];
                    } else if vals[1] == Some(1.0) {
                        alias[i] = resolved[0];
                    }
                }
            }
        }
    }

    // Liveness over the rewritten structure: folded nodes are leaves.
    let mut live = vec![false; n];
    let mut stack: Vec<usize> =
        graph.outputs().iter().map(|o| root(&alias, o.index())).collect();
    while let Some(i) = stack.pop() {
        if live[i] {
            continue;
        }
        live[i] = true;
        if const_val[i].is_some() {
            continue;
        }
        for &input in &graph.node(NodeId(i)).inputs {
            stack.push(root(&alias, input.index()));
        }
    }

    let mut map: Vec<Option<NodeId>> = vec![None; n];
    let mut builder = GraphBuilder::new();
    for i in 0..n {
        if !live[i] || alias[i] != i {
            continue;
        }
        let node = graph.node(NodeId(i));
        let new_id = match (const_val[i], &node.op) {
            (Some(value), _) => builder.constant(value),
            (None, OpKind::Var(name)) => builder.var(name),
            (None, op) => {
                let inputs: Vec<NodeId> = node
                    .inputs
                    .iter()
                    .map(|&x| map[root(&alias, x.index())].expect("live inputs emitted first"))
                    .collect();
                builder.add_node(op.clone(), inputs).expect("folding preserves well-formedness")
            }
        };
        map[i] = Some(new_id);
    }
    let outputs = graph
        .outputs()
        .iter()
        .map(|&o| map[root(&alias, o.index())].expect("outputs are live"))
        .collect();
    Ok(builder.finish(outputs).expect("outputs are preserved"))
}
