//! Human-readable evaluation traces.
//!
//! [`render_trace`] runs a graph at a point and lays the computation
//! out as two aligned tables: the forward primal trace, one row per
//! slot in execution order, and the reverse adjoint trace, one row per
//! derivative accumulation in sweep order, each row showing its value
//! after the update.
//!
//! Rows use the classic numbering: with k variables, the variables are
//! `v-(k-1) .. v0` in first-use order and computed values continue
//! `v1, v2, ...` in execution order. An adjoint is the primed name
//! (`v'2`, `x'1`), a first write is shown as an assignment, and later
//! writes spell out the running sum, so fan-out is visible as repeated
//! rows for the same slot.

use std::fmt;

use crate::graph::{Bindings, Graph};
use crate::op::OpKind;
use crate::parser::NameMap;
use crate::tape::{record, Tape, TapeError};

/// One line of a trace: `label = form = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub label: String,
    pub form: String,
    pub value: f64,
}

/// A rendered forward/reverse trace pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub primal: Vec<TraceRow>,
    pub adjoint: Vec<TraceRow>,
    decimals: usize,
}

impl fmt::Display for TraceTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let section = |f: &mut fmt::Formatter<'_>, title: &str, rows: &[TraceRow]| {
            writeln!(f, "{title}")?;
            let label_width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0);
            let form_width = rows.iter().map(|r| r.form.len()).max().unwrap_or(0);
            for row in rows {
                writeln!(
                    f,
                    "{:<label_width$} = {:<form_width$} = {:.prec$}",
                    row.label,
                    row.form,
                    row.value,
                    prec = self.decimals,
                )?;
            }
            Ok(())
        };
        section(f, "forward primal trace", &self.primal)?;
        writeln!(f)?;
        section(f, "reverse adjoint trace", &self.adjoint)
    }
}

/// Slot naming: variables count down to v0, computed values up from v1.
fn slot_labels(tape: &Tape) -> Vec<String> {
    let var_count = tape.variable_slots().len();
    let mut labels: Vec<String> = (0..var_count)
        .map(|j| format!("v{}", j as isize - (var_count as isize - 1)))
        .collect();
    labels.extend((0..tape.entries().len()).map(|m| format!("v{}", m + 1)));
    labels
}

/// Per-node labels for the same numbering, derived from the graph
/// alone (shared with the DOT renderer).
pub(crate) fn node_labels(graph: &Graph) -> Vec<String> {
    let var_names = graph.var_names();
    let var_count = var_names.len();
    let mut next_entry = 0usize;
    graph
        .nodes()
        .iter()
        .map(|node| match &node.op {
            OpKind::Var(name) => {
                let j = var_names.iter().position(|n| n == name).expect("name is known");
                format!("v{}", j as isize - (var_count as isize - 1))
            }
            _ => {
                next_entry += 1;
                format!("v{next_entry}")
            }
        })
        .collect()
}

/// The adjoint spelling of a label: `v2` -> `v'2`, `x1` -> `x'1`.
fn prime(label: &str) -> String {
    let split = label.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(label.len());
    format!("{}'{}", &label[..split], &label[split..])
}

fn entry_form(op: &OpKind, inputs: &[&str]) -> String {
    match op {
        OpKind::Const(v) => v.to_string(),
        OpKind::Var(_) => unreachable!("variables are not tape entries"),
        OpKind::Neg => format!("-{}", inputs[0]),
        OpKind::Ln | OpKind::Sin | OpKind::Cos | OpKind::Exp => {
            format!("{} {}", op.symbol(), inputs[0])
        }
        binary => format!("{} {} {}", inputs[0], binary.symbol(), inputs[1]),
    }
}

/// The symbolic factor `d result / d inputs[wrt]`, or `None` when the
/// partial is exactly 1 and the factor can be left out.
fn partial_form(op: &OpKind, inputs: &[&str], wrt: usize) -> Option<String> {
    let a = inputs[0];
    match (op, wrt) {
        (OpKind::Add, _) | (OpKind::Sub, 0) => None,
        (OpKind::Sub, 1) | (OpKind::Neg, _) => Some("-1".to_string()),
        (OpKind::Mul, 0) => Some(inputs[1].to_string()),
        (OpKind::Mul, 1) => Some(a.to_string()),
        (OpKind::Div, 0) => Some(format!("(1 / {})", inputs[1])),
        (OpKind::Div, 1) => Some(format!("(-{a} / ({b} * {b}))", b = inputs[1])),
        (OpKind::Ln, _) => Some(format!("(1 / {a})")),
        (OpKind::Sin, _) => Some(format!("cos({a})")),
        (OpKind::Cos, _) => Some(format!("(-sin({a}))")),
        (OpKind::Exp, _) => Some(format!("exp({a})")),
        (OpKind::Pow, 0) => Some(format!("({b} * {a}^({b} - 1))", b = inputs[1])),
        (OpKind::Pow, 1) => Some(format!("({a}^{b} * ln({a}))", b = inputs[1])),
        (op, wrt) => unreachable!("no operand {wrt} on {op}"),
    }
}

/// Records the graph at a point and renders both trace tables.
///
/// Every output is seeded with adjoint 1. `names` supplies the output
/// rows (`y = v5`) and the seed forms (`v'5 = y'`); it must come from
/// the same lowering that produced `graph`.
pub fn render_trace(
    graph: &Graph,
    names: &NameMap,
    bindings: &Bindings,
    decimals: usize,
) -> Result<TraceTable, TapeError> {
    let tape = record(graph, bindings)?;
    let labels = slot_labels(&tape);

    let mut primal = Vec::new();
    for (name, slot) in tape.variable_slots() {
        primal.push(TraceRow {
            label: labels[*slot].clone(),
            form: name.clone(),
            value: tape.value_of_slot(*slot),
        });
    }
    for entry in tape.entries() {
        let inputs: Vec<&str> = entry.input_slots.iter().map(|&s| labels[s].as_str()).collect();
        primal.push(TraceRow {
            label: labels[entry.result_slot].clone(),
            form: entry_form(&entry.op, &inputs),
            value: entry.result_value,
        });
    }
    for (name, node) in names.targets() {
        let slot = tape.node_slot(*node);
        primal.push(TraceRow {
            label: name.clone(),
            form: labels[slot].clone(),
            value: tape.value_of_slot(slot),
        });
    }

    // The reverse sweep, row by row; mirrors Tape::backward_seeded with
    // all-ones seeds.
    let mut adjoint = Vec::new();
    let mut adjoints = vec![0.0; tape.slot_count()];
    let mut touched = vec![false; tape.slot_count()];
    for (k, &slot) in tape.output_slots().iter().enumerate() {
        adjoints[slot] += 1.0;
        let seed_name = prime(&names.targets()[k].0);
        let form = if touched[slot] {
            format!("{} + {seed_name}", prime(&labels[slot]))
        } else {
            seed_name
        };
        touched[slot] = true;
        adjoint.push(TraceRow { label: prime(&labels[slot]), form, value: adjoints[slot] });
    }
    for (i, entry) in tape.entries().iter().enumerate().rev() {
        let adj = adjoints[entry.result_slot];
        let adj_label = prime(&labels[entry.result_slot]);
        let inputs: Vec<&str> = entry.input_slots.iter().map(|&s| labels[s].as_str()).collect();
        for (wrt, &slot) in entry.input_slots.iter().enumerate() {
            let partial = crate::op::primitive_partial(&entry.op, &entry.input_values, wrt)
                .map_err(|source| TapeError::Domain {
                    entry: i,
                    op: entry.op.symbol().to_string(),
                    source,
                })?;
            adjoints[slot] += adj * partial;
            let core = match partial_form(&entry.op, &inputs, wrt).as_deref() {
                None => adj_label.clone(),
                Some("-1") => format!("-{adj_label}"),
                Some(factor) => format!("{adj_label} * {factor}"),
            };
            let label = prime(&labels[slot]);
            let form = if touched[slot] { format!("{label} + {core}") } else { core };
            touched[slot] = true;
            adjoint.push(TraceRow { label, form, value: adjoints[slot] });
        }
    }
    for (name, slot) in tape.variable_slots() {
        adjoint.push(TraceRow {
            label: prime(name),
            form: prime(&labels[*slot]),
            value: adjoints[*slot],
        });
    }

    Ok(TraceTable { primal, adjoint, decimals })
}
