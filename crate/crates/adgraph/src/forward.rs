//! Forward-mode differentiation.
//!
//! [`jvp`] propagates a tangent alongside every value in a single
//! sweep: each node's tangent is the sum over its operands of the
//! partial derivative times the operand's tangent. One sweep yields the
//! directional derivative of every output along the seeded input
//! direction, at constant memory overhead.
//!
//! A full gradient needs one sweep per variable ([`gradient_forward`]),
//! which is the right trade only when inputs are few; with many inputs
//! and one output, the reverse sweeps in [`crate::tape`] and
//! [`crate::adjoint`] get the whole gradient in one pass.

use std::fmt;

use crate::exec::EvalError;
use crate::graph::{Bindings, Graph, NodeId};
use crate::op::{primitive_partial, primitive_value, OpKind};

/// Forward-mode failure.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardError {
    Eval(EvalError),
    /// A forward gradient is per-output; this graph has several.
    MultipleOutputs { count: usize },
}

impl fmt::Display for ForwardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForwardError::Eval(e) => write!(f, "{e}"),
            ForwardError::MultipleOutputs { count } => {
                write!(f, "forward gradient needs a single output, graph has {count}")
            }
        }
    }
}

impl std::error::Error for ForwardError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ForwardError::Eval(e) => Some(e),
            ForwardError::MultipleOutputs { .. } => None,
        }
    }
}

impl From<EvalError> for ForwardError {
    fn from(e: EvalError) -> Self {
        ForwardError::Eval(e)
    }
}

/// A primal value and its tangent for every node, after one dual sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValuation {
    values: Vec<f64>,
    tangents: Vec<f64>,
    outputs: Vec<f64>,
    output_tangents: Vec<f64>,
    firings: usize,
}

impl DualValuation {
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.index()]
    }

    pub fn tangent(&self, id: NodeId) -> f64 {
        self.tangents[id.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tangents(&self) -> &[f64] {
        &self.tangents
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn output_tangents(&self) -> &[f64] {
        &self.output_tangents
    }

    pub fn firings(&self) -> usize {
        self.firings
    }
}

/// One dual sweep: primal and tangent together, ascending node order.
///
/// `seeds` gives the tangent of each variable; unseeded variables get
/// tangent 0, so a sparse direction needs only its nonzero entries.
pub fn jvp(graph: &Graph, bindings: &Bindings, seeds: &Bindings) -> Result<DualValuation, EvalError> {
    let violations = graph.validate();
    if !violations.is_empty() {
        return Err(EvalError::InvalidGraph { violations });
    }
    let mut values = vec![0.0; graph.len()];
    let mut tangents = vec![0.0; graph.len()];
    for id in graph.ids() {
        let node = graph.node(id);
        match &node.op {
            OpKind::Var(name) => {
                values[id.index()] = bindings
                    .get(name)
                    .ok_or_else(|| EvalError::MissingBinding { name: name.clone() })?;
                tangents[id.index()] = seeds.get(name).unwrap_or(0.0);
            }
            op => {
                let inputs: Vec<f64> =
                    node.inputs.iter().map(|&i| values[i.index()]).collect();
                let to_domain = |source| EvalError::Domain {
                    node: id,
                    op: op.symbol().to_string(),
                    source,
                };
                values[id.index()] = primitive_value(op, &inputs).map_err(to_domain)?;
                let mut tangent = 0.0;
                for (k, &input) in node.inputs.iter().enumerate() {
                    let partial = primitive_partial(op, &inputs, k).map_err(to_domain)?;
                    tangent += partial * tangents[input.index()];
                }
                tangents[id.index()] = tangent;
            }
        }
    }
    let outputs = graph.outputs().iter().map(|&o| values[o.index()]).collect();
    let output_tangents = graph.outputs().iter().map(|&o| tangents[o.index()]).collect();
    let firings = graph.len();
    Ok(DualValuation { values, tangents, outputs, output_tangents, firings })
}

/// A gradient assembled from unit-seeded forward sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardGradient {
    /// Variable adjoints in first-use order.
    pub gradient: Vec<(String, f64)>,
    /// One pass per distinct variable.
    pub passes: usize,
    /// Total node firings across all passes.
    pub firings: usize,
}

/// The full gradient of a single-output graph, one sweep per variable.
pub fn gradient_forward(graph: &Graph, bindings: &Bindings) -> Result<ForwardGradient, ForwardError> {
    if graph.outputs().len() != 1 {
        return Err(ForwardError::MultipleOutputs { count: graph.outputs().len() });
    }
    let mut gradient = Vec::new();
    let mut firings = 0usize;
    for name in graph.var_names() {
        let mut seeds = Bindings::new();
        seeds.set(name, 1.0);
        let dual = jvp(graph, bindings, &seeds)?;
        firings += dual.firings();
        gradient.push((name.to_string(), dual.output_tangents()[0]));
    }
    let passes = gradient.len();
    Ok(ForwardGradient { gradient, passes, firings })
}
