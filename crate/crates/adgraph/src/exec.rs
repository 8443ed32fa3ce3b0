//! Dataflow evaluation of a [`Graph`].
//!
//! Execution is modeled as node firing: a node is fireable once all of
//! its inputs have produced values, and firing it computes its own value
//! exactly once. The executor keeps the fireable frontier in a ready
//! set; a schedule repeatedly picks one ready node to fire. Because the
//! value table is single-assignment and every operation is pure, the
//! final [`Valuation`] is the same for every schedule, bit for bit. The
//! default schedule fires the lowest-numbered ready node.

use std::collections::BTreeSet;
use std::fmt;

use crate::graph::{Bindings, Graph, NodeId, Violation};
use crate::op::{primitive_value, DomainError, OpKind};

/// Evaluation failure.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    /// The graph does not satisfy its structural invariants.
    InvalidGraph { violations: Vec<Violation> },
    /// A `Var` node has no bound value.
    MissingBinding { name: String },
    /// A primitive was applied outside its domain.
    Domain { node: NodeId, op: String, source: DomainError },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::InvalidGraph { violations } => {
                write!(f, "invalid graph: ")?;
                for (i, v) in violations.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
            EvalError::MissingBinding { name } => write!(f, "no binding for variable {name}"),
            EvalError::Domain { node, op, source } => {
                write!(f, "{op} at {node}: {source}")
            }
        }
    }
}

impl std::error::Error for EvalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            EvalError::Domain { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// The result of a complete evaluation: one value per node, the output
/// values in declaration order, and how many firings it took.
#[derive(Debug, Clone, PartialEq)]
pub struct Valuation {
    values: Vec<f64>,
    outputs: Vec<f64>,
    firings: usize,
}

impl Valuation {
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.index()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn firings(&self) -> usize {
        self.firings
    }
}

/// In-flight evaluation state, exposed so callers can drive or observe
/// the schedule one firing at a time.
pub struct EvalState<'g> {
    graph: &'g Graph,
    bindings: &'g Bindings,
    values: Vec<Option<f64>>,
    pending: Vec<usize>,
    ready: BTreeSet<NodeId>,
    // consumers[i] lists each node that reads node i, once per edge, so
    // a node reading the same input twice is decremented twice.
    consumers: Vec<Vec<NodeId>>,
    firings: usize,
}

impl<'g> EvalState<'g> {
    /// Prepares an evaluation. Fails fast on structural violations or
    /// unbound variables so the outcome does not depend on schedule.
    pub fn new(graph: &'g Graph, bindings: &'g Bindings) -> Result<Self, EvalError> {
        let violations = graph.validate();
        if !violations.is_empty() {
            return Err(EvalError::InvalidGraph { violations });
        }
        for (_, name) in graph.var_nodes() {
            if bindings.get(name).is_none() {
                return Err(EvalError::MissingBinding { name: name.to_string() });
            }
        }
        let mut pending = vec![0usize; graph.len()];
        let mut consumers = vec![Vec::new(); graph.len()];
        for id in graph.ids() {
            let node = graph.node(id);
            pending[id.index()] = node.inputs.len();
            for &input in &node.inputs {
                consumers[input.index()].push(id);
            }
        }
        let ready = graph.ids().filter(|id| pending[id.index()] == 0).collect();
        Ok(EvalState {
            graph,
            bindings,
            values: vec![None; graph.len()],
            pending,
            ready,
            consumers,
            firings: 0,
        })
    }

    /// The fireable frontier, ascending by id.
    pub fn ready_set(&self) -> Vec<NodeId> {
        self.ready.iter().copied().collect()
    }

    pub fn is_complete(&self) -> bool {
        self.firings == self.graph.len()
    }

    pub fn firings(&self) -> usize {
        self.firings
    }

    pub fn value(&self, id: NodeId) -> Option<f64> {
        self.values[id.index()]
    }

    /// Fires one ready node: computes its value and moves any consumer
    /// whose last pending input this was into the ready set.
    ///
    /// Panics if `id` is not in the ready set; schedules may only pick
    /// from the frontier they were shown.
    pub fn fire(&mut self, id: NodeId) -> Result<(), EvalError> {
        assert!(self.ready.remove(&id), "fired node {id} is not ready");
        let node = self.graph.node(id);
        let value = match &node.op {
            OpKind::Var(name) => {
                self.bindings.get(name).ok_or_else(|| EvalError::MissingBinding {
                    name: name.clone(),
                })?
            }
            op => {
                let inputs: Vec<f64> = node
                    .inputs
                    .iter()
                    .map(|&i| self.values[i.index()].expect("input fired before consumer"))
                    .collect();
                primitive_value(op, &inputs).map_err(|source| EvalError::Domain {
                    node: id,
                    op: op.symbol().to_string(),
                    source,
                })?
            }
        };
        self.values[id.index()] = Some(value);
        self.firings += 1;
        for &consumer in &self.consumers[id.index()] {
            self.pending[consumer.index()] -= 1;
            if self.pending[consumer.index()] == 0 {
                self.ready.insert(consumer);
            }
        }
        Ok(())
    }

    /// Consumes the state once every node has fired.
    pub fn finish(self) -> Valuation {
        assert!(self.is_complete(), "finish called before all nodes fired");
        let values: Vec<f64> =
            self.values.into_iter().map(|v| v.expect("complete state has all values")).collect();
        let outputs = self.graph.outputs().iter().map(|&o| values[o.index()]).collect();
        Valuation { values, outputs, firings: self.firings }
    }
}

/// Evaluates with the default lowest-id schedule.
pub fn evaluate(graph: &Graph, bindings: &Bindings) -> Result<Valuation, EvalError> {
    evaluate_with_schedule(graph, bindings, |_| 0)
}

/// Evaluates, letting `pick` choose which ready node fires next.
///
/// `pick` is shown the current frontier (ascending by id) and returns an
/// index into it. Every pick makes progress, so evaluation always
/// terminates after exactly one firing per node.
pub fn evaluate_with_schedule(
    graph: &Graph,
    bindings: &Bindings,
    mut pick: impl FnMut(&[NodeId]) -> usize,
) -> Result<Valuation, EvalError> {
    let mut state = EvalState::new(graph, bindings)?;
    while !state.is_complete() {
        let frontier = state.ready_set();
        assert!(!frontier.is_empty(), "no ready nodes but evaluation incomplete");
        let choice = pick(&frontier);
        state.fire(frontier[choice])?;
    }
    Ok(state.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use proptest::prelude::*;

    fn example_graph() -> Graph {
        let mut b = GraphBuilder::new();
        let x1 = b.var("x1");
        let x2 = b.var("x2");
        let ln = b.unary(OpKind::Ln, x1).unwrap();
        let mul = b.binary(OpKind::Mul, x1, x2).unwrap();
        let sin = b.unary(OpKind::Sin, x2).unwrap();
        let add = b.binary(OpKind::Add, ln, mul).unwrap();
        let sub = b.binary(OpKind::Sub, add, sin).unwrap();
        b.finish(vec![sub]).unwrap()
    }

    fn example_bindings() -> Bindings {
        [("x1", 2.0), ("x2", 5.0)].into_iter().collect()
    }

    #[test]
    fn example_evaluates_to_reference_value() {
        let v = evaluate(&example_graph(), &example_bindings()).unwrap();
        // ln 2 + 2*5 - sin 5, checked by hand.
        assert_eq!(v.outputs(), &[11.652071455223084]);
        assert_eq!(v.value(NodeId(2)), 2.0f64.ln());
        assert_eq!(v.value(NodeId(3)), 10.0);
        assert_eq!(v.value(NodeId(4)), 5.0f64.sin());
        assert_eq!(v.firings(), 7);
    }

    #[test]
    fn identity_graph_passes_the_binding_through() {
        let mut b = GraphBuilder::new();
        let x = b.var("x");
        let g = b.finish(vec![x]).unwrap();
        let v = evaluate(&g, &[("x", 7.0)].into_iter().collect()).unwrap();
        assert_eq!(v.outputs(), &[7.0]);
    }

    #[test]
    fn three_statement_program_by_hand() {
        // Z = A*B + C; W = Z + 4; Y = Z*Z - (3*Z + B)
        let mut b = GraphBuilder::new();
        let a = b.var("A");
        let bb = b.var("B");
        let c = b.var("C");
        let ab = b.binary(OpKind::Mul, a, bb).unwrap();
        let z = b.binary(OpKind::Add, ab, c).unwrap();
        let four = b.constant(4.0);
        let w = b.binary(OpKind::Add, z, four).unwrap();
        let zz = b.binary(OpKind::Mul, z, z).unwrap();
        let three = b.constant(3.0);
        let tz = b.binary(OpKind::Mul, three, z).unwrap();
        let tzb = b.binary(OpKind::Add, tz, bb).unwrap();
        let y = b.binary(OpKind::Sub, zz, tzb).unwrap();
        let g = b.finish(vec![z, w, y]).unwrap();
        let bindings = [("A", 2.0), ("B", 3.0), ("C", 1.0)].into_iter().collect();
        let v = evaluate(&g, &bindings).unwrap();
        assert_eq!(v.outputs(), &[7.0, 11.0, 25.0]);
    }

    #[test]
    fn ready_set_advances_as_dependencies_resolve() {
        let g = example_graph();
        let bindings = example_bindings();
        let mut state = EvalState::new(&g, &bindings).unwrap();
        assert_eq!(state.ready_set(), vec![NodeId(0), NodeId(1)]);
        state.fire(NodeId(0)).unwrap();
        assert_eq!(state.ready_set(), vec![NodeId(1), NodeId(2)]);
        state.fire(NodeId(1)).unwrap();
        // Both variables are in: ln, mul, sin are all fireable at once.
        assert_eq!(state.ready_set(), vec![NodeId(2), NodeId(3), NodeId(4)]);
        state.fire(NodeId(4)).unwrap();
        state.fire(NodeId(3)).unwrap();
        state.fire(NodeId(2)).unwrap();
        assert_eq!(state.ready_set(), vec![NodeId(5)]);
        state.fire(NodeId(5)).unwrap();
        state.fire(NodeId(6)).unwrap();
        assert!(state.ready_set().is_empty());
        assert!(state.is_complete());
        let v = state.finish();
        assert_eq!(v.outputs(), &[11.652071455223084]);
    }

    #[test]
    fn schedules_agree_bit_for_bit() {
        let g = example_graph();
        let bindings = example_bindings();
        let lowest = evaluate(&g, &bindings).unwrap();
        let highest =
            evaluate_with_schedule(&g, &bindings, |ready| ready.len() - 1).unwrap();
        let mut turn = 0usize;
        let rotating = evaluate_with_schedule(&g, &bindings, |ready| {
            turn += 1;
            turn % ready.len()
        })
        .unwrap();
        let bits =
            |v: &Valuation| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&lowest), bits(&highest));
        assert_eq!(bits(&lowest), bits(&rotating));
    }

    #[test]
    fn every_node_fires_exactly_once_even_when_dead() {
        let mut b = GraphBuilder::new();
        let x = b.var("x");
        let _dead = b.unary(OpKind::Exp, x).unwrap();
        let out = b.unary(OpKind::Neg, x).unwrap();
        let g = b.finish(vec![out]).unwrap();
        let v = evaluate(&g, &[("x", 1.0)].into_iter().collect()).unwrap();
        assert_eq!(v.firings(), 3);
        assert_eq!(v.outputs(), &[-1.0]);
    }

    #[test]
    fn long_chain_fires_once_per_node() {
        let mut b = GraphBuilder::new();
        let mut cur = b.var("x");
        for _ in 0..999 {
            cur = b.unary(OpKind::Neg, cur).unwrap();
        }
        let g = b.finish(vec![cur]).unwrap();
        let v = evaluate(&g, &[("x", 2.5)].into_iter().collect()).unwrap();
        assert_eq!(v.firings(), 1000);
        // 999 negations flip the sign an odd number of times.
        assert_eq!(v.outputs(), &[-2.5]);
    }

    #[test]
    fn missing_binding_is_reported_before_any_firing() {
        let g = example_graph();
        let err = evaluate(&g, &[("x1", 2.0)].into_iter().collect::<Bindings>()).unwrap_err();
        assert_eq!(err, EvalError::MissingBinding { name: "x2".to_string() });
    }

    #[test]
    fn domain_error_names_the_failing_node() {
        let mut b = GraphBuilder::new();
        let x = b.var("x");
        let ln = b.unary(OpKind::Ln, x).unwrap();
        let g = b.finish(vec![ln]).unwrap();
        let err = evaluate(&g, &[("x", -1.0)].into_iter().collect::<Bindings>()).unwrap_err();
        match err {
            EvalError::Domain { node, op, source } => {
                assert_eq!(node, NodeId(1));
                assert_eq!(op, "ln");
                assert_eq!(source, DomainError::LnNonPositive { arg: -1.0 });
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_graph_is_rejected_up_front() {
        let g = Graph::from_parts(vec![], vec![]);
        let err = evaluate(&g, &Bindings::new()).unwrap_err();
        assert!(matches!(err, EvalError::InvalidGraph { .. }));
    }

    proptest! {
        /// Any picker sequence completes in exactly one firing per node
        /// and reproduces the default schedule's values.
        #[test]
        fn arbitrary_schedules_terminate_and_agree(picks in proptest::collection::vec(0usize..64, 0..64)) {
            let g = example_graph();
            let bindings = example_bindings();
            let reference = evaluate(&g, &bindings).unwrap();
            let mut i = 0usize;
            let v = evaluate_with_schedule(&g, &bindings, |ready| {
                let p = picks.get(i).copied().unwrap_or(0);
                i += 1;
                p % ready.len()
            }).unwrap();
            prop_assert_eq!(v.firings(), g.len());
            for id in g.ids() {
                prop_assert_eq!(v.value(id).to_bits(), reference.value(id).to_bits());
            }
        }
    }
}
