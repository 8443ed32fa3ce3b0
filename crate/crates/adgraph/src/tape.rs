//! Tape-based reverse-mode differentiation.
//!
//! [`record`] runs the graph forward once and transcribes every
//! operation it executes, in execution order, into a [`Tape`]: a linear
//! list of entries that remember their operation, operand values and
//! result. Differentiation then never touches the graph again.
//! [`Tape::backward`] sweeps the entries once in reverse, pushing each
//! entry's adjoint onto its operands:
//!
//! ```text
//! adjoint[input] += adjoint[result] * d result / d input
//! ```
//!
//! Values live in slots. The distinct variable names get the first
//! slots, in first-use order, so two `Var` nodes with the same name
//! share a slot and their derivative contributions sum. Every other
//! node (constants included) gets one entry and one fresh slot, so the
//! sweep cost is one multiply-accumulate per operand of the recorded
//! program. The sweep is strict: every entry is processed, whether or
//! not its adjoint is zero.

use std::fmt;

use crate::exec::{evaluate, EvalError};
use crate::graph::{Bindings, Graph, NodeId};
use crate::op::{primitive_partial, DomainError, OpKind};

/// One recorded operation.
#[derive(Debug, Clone, PartialEq)]
pub struct TapeEntry {
    pub result_slot: usize,
    pub op: OpKind,
    pub input_slots: Vec<usize>,
    pub input_values: Vec<f64>,
    pub result_value: f64,
}

/// Reverse-mode failure.
#[derive(Debug, Clone, PartialEq)]
pub enum TapeError {
    /// The forward recording pass failed.
    Eval(EvalError),
    /// An unseeded backward sweep needs exactly one output.
    MultipleOutputs { count: usize },
    /// A seeded sweep got the wrong number of seeds.
    SeedCountMismatch { expected: usize, got: usize },
    /// A partial derivative does not exist at the recorded point.
    Domain { entry: usize, op: String, source: DomainError },
}

impl fmt::Display for TapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapeError::Eval(e) => write!(f, "{e}"),
            TapeError::MultipleOutputs { count } => {
                write!(f, "backward needs a single output, graph has {count}")
            }
            TapeError::SeedCountMismatch { expected, got } => {
                write!(f, "expected {expected} output seeds, got {got}")
            }
            TapeError::Domain { entry, op, source } => {
                write!(f, "{op} at tape entry {entry}: {source}")
            }
        }
    }
}

impl std::error::Error for TapeError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            TapeError::Eval(e) => Some(e),
            TapeError::Domain { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<EvalError> for TapeError {
    fn from(e: EvalError) -> Self {
        TapeError::Eval(e)
    }
}

/// The transcript of one forward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape {
    entries: Vec<TapeEntry>,
    variable_slots: Vec<(String, usize)>,
    output_slots: Vec<usize>,
    node_slots: Vec<usize>,
    values: Vec<f64>,
}

impl Tape {
    pub fn entries(&self) -> &[TapeEntry] {
        &self.entries
    }

    /// Distinct variable names and their slots, in first-use order.
    pub fn variable_slots(&self) -> &[(String, usize)] {
        &self.variable_slots
    }

    pub fn output_slots(&self) -> &[usize] {
        &self.output_slots
    }

    pub fn node_slot(&self, id: NodeId) -> usize {
        self.node_slots[id.index()]
    }

    pub fn slot_count(&self) -> usize {
        self.values.len()
    }

    pub fn value_of_slot(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.output_slots.iter().map(|&s| self.values[s]).collect()
    }

    /// Reverse sweep over a single-output tape, seeded with 1.
    pub fn backward(&self) -> Result<AdjointState, TapeError> {
        if self.output_slots.len() != 1 {
            return Err(TapeError::MultipleOutputs { count: self.output_slots.len() });
        }
        self.backward_seeded(&[1.0])
    }

    /// Reverse sweep with one adjoint seed per output.
    ///
    /// Entries are processed strictly last to first. Every consumer of
    /// a slot was recorded after the entry that produced it, so a
    /// slot's adjoint is complete before it is propagated.
    pub fn backward_seeded(&self, seeds: &[f64]) -> Result<AdjointState, TapeError> {
        if seeds.len() != self.output_slots.len() {
            return Err(TapeError::SeedCountMismatch {
                expected: self.output_slots.len(),
                got: seeds.len(),
            });
        }
        let mut adjoints = vec![0.0; self.values.len()];
        let mut contributions = vec![0usize; self.values.len()];
        let mut accumulations = 0usize;
        for (&slot, &seed) in self.output_slots.iter().zip(seeds) {
            adjoints[slot] += seed;
            contributions[slot] += 1;
        }
        for (i, entry) in self.entries.iter().enumerate().rev() {
            let adj = adjoints[entry.result_slot];
            for (k, &input_slot) in entry.input_slots.iter().enumerate() {
                let partial = primitive_partial(&entry.op, &entry.input_values, k).map_err(
                    |source| TapeError::Domain {
                        entry: i,
                        op: entry.op.symbol().to_string(),
                        source,
                    },
                )?;
                adjoints[input_slot] += adj * partial;
                contributions[input_slot] += 1;
                accumulations += 1;
            }
        }
        Ok(AdjointState { adjoints, contributions, accumulations })
    }

    /// Variable adjoints in first-use order.
    pub fn gradient(&self, state: &AdjointState) -> Vec<(String, f64)> {
        self.variable_slots
            .iter()
            .map(|(name, slot)| (name.clone(), state.adjoint(*slot)))
            .collect()
    }
}

/// Adjoints after a backward sweep, plus sweep statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    adjoints: Vec<f64>,
    contributions: Vec<usize>,
    accumulations: usize,
}

impl AdjointState {
    pub fn adjoint(&self, slot: usize) -> f64 {
        self.adjoints[slot]
    }

    pub fn adjoints(&self) -> &[f64] {
        &self.adjoints
    }

    /// How many summands landed in a slot (seeds included).
    pub fn contributions(&self, slot: usize) -> usize {
        self.contributions[slot]
    }

    /// Total multiply-accumulate operations in the sweep: one per
    /// operand of every entry.
    pub fn accumulations(&self) -> usize {
        self.accumulations
    }
}

/// Runs the graph forward and transcribes it.
///
/// The recording order is ascending node id, which is one of the valid
/// firing schedules, so the tape holds exactly one entry per non-`Var`
/// node and the recorded values match [`evaluate`] bit for bit.
pub fn record(graph: &Graph, bindings: &Bindings) -> Result<Tape, TapeError> {
    let valuation = evaluate(graph, bindings)?;
    let mut variable_slots: Vec<(String, usize)> = Vec::new();
    let mut node_slots = vec![usize::MAX; graph.len()];
    for (id, name) in graph.var_nodes() {
        let slot = match variable_slots.iter().find(|(n, _)| n == name) {
            Some((_, slot)) => *slot,
            None => {
                variable_slots.push((name.to_string(), variable_slots.len()));
                variable_slots.len() - 1
            }
        };
        node_slots[id.index()] = slot;
    }
    let mut values: Vec<f64> = variable_slots
        .iter()
        .map(|(name, _)| bindings.get(name).expect("evaluate checked bindings"))
        .collect();
    let mut entries = Vec::new();
    for id in graph.ids() {
        let node = graph.node(id);
        if matches!(node.op, OpKind::Var(_)) {
            continue;
        }
        let result_slot = values.len();
        node_slots[id.index()] = result_slot;
        let input_slots: Vec<usize> =
            node.inputs.iter().map(|&i| node_slots[i.index()]).collect();
        let input_values: Vec<f64> = input_slots.iter().map(|&s| values[s]).collect();
        let result_value = valuation.value(id);
        values.push(result_value);
        entries.push(TapeEntry {
            result_slot,
            op: node.op.clone(),
            input_slots,
            input_values,
            result_value,
        });
    }
    let output_slots = graph.outputs().iter().map(|&o| node_slots[o.index()]).collect();
    Ok(Tape { entries, variable_slots, output_slots, node_slots, values })
}

/// Records and sweeps in one step: the gradient of a single-output
/// graph, by variable name in first-use order.
pub fn grad(graph: &Graph, bindings: &Bindings) -> Result<Vec<(String, f64)>, TapeError> {
    let tape = record(graph, bindings)?;
    let state = tape.backward()?;
    Ok(tape.gradient(&state))
}
