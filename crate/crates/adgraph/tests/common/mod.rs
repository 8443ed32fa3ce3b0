//! Fixtures shared by the integration suites.
#![allow(dead_code)]

use adgraph::{compile, Bindings, Graph, GraphBuilder, NameMap, OpKind};
use rand::Rng;

/// The worked example used throughout the docs:
/// `y = ln(x1) + x1*x2 - sin(x2)` at (2, 5).
pub fn worked_example() -> (Graph, NameMap, Bindings) {
    let (g, names) = compile("y := ln(x1) + x1*x2 - sin(x2)").unwrap();
    let bindings = [("x1", 2.0), ("x2", 5.0)].into_iter().collect();
    (g, names, bindings)
}

/// A three-target program with fan-out through the shared
/// intermediate Z, at {A:2, B:3, C:1}. Hand arithmetic gives
/// Z=7, W=11, Y=25 and dY/d{A,B,C} = {33, 21, 11}.
pub fn three_target_program() -> (Graph, NameMap, Bindings) {
    let src = "Z := A*B + C\nW := Z + 4\nY := Z^2 - (3*Z + B)";
    let (g, names) = compile(src).unwrap();
    let bindings = [("A", 2.0), ("B", 3.0), ("C", 1.0)].into_iter().collect();
    (g, names, bindings)
}

/// `|a - b| / max(|a|, |b|, 1)` — absolute near zero, relative at scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

pub struct RandomProgram {
    pub graph: Graph,
    pub bindings: Bindings,
}

/// Sampling margins. Finite-difference probes move an input by 1e-6;
/// intermediate values shift by at most that times the local
/// sensitivity, so a 0.5 margin on every domain boundary keeps both
/// the program and all its probes inside every primitive's domain,
/// and the value cap keeps curvature (hence truncation error) small.
const VALUE_CAP: f64 = 8.0;
const BOUNDARY_MARGIN: f64 = 0.5;

fn safe_operands(op: &OpKind, ins: &[f64]) -> bool {
    match op {
        OpKind::Ln => ins[0] >= BOUNDARY_MARGIN,
        OpKind::Div => ins[1].abs() >= BOUNDARY_MARGIN,
        OpKind::Exp => ins[0] <= 2.0,
        // Positive base keeps both power partials defined; a small
        // exponent keeps them bounded.
        OpKind::Pow => ins[0] >= BOUNDARY_MARGIN && ins[1].abs() <= 3.0,
        _ => true,
    }
}

/// One random straight-line program (at most 50 nodes over the full
/// primitive set) with a point that is domain-safe for evaluation,
/// differentiation, and central-difference probing.
pub fn random_program(rng: &mut impl Rng) -> RandomProgram {
    loop {
        if let Some(p) = try_random_program(&mut *rng) {
            return p;
        }
    }
}

/// Nodes are grown one at a time; a candidate operation is kept only
/// if its operands satisfy [`safe_operands`] and its value stays under
/// the cap, so safety is enforced by construction rather than by
/// retrying whole programs. `None` only when growth stalls before the
/// first operation lands.
fn try_random_program(rng: &mut impl Rng) -> Option<RandomProgram> {
    let ops: &[(OpKind, u32)] = &[
        (OpKind::Add, 4),
        (OpKind::Sub, 3),
        (OpKind::Mul, 4),
        (OpKind::Div, 2),
        (OpKind::Neg, 1),
        (OpKind::Ln, 1),
        (OpKind::Sin, 2),
        (OpKind::Cos, 2),
        (OpKind::Exp, 1),
        (OpKind::Pow, 1),
    ];
    let weight_total: u32 = ops.iter().map(|(_, w)| w).sum();

    let n_vars = rng.gen_range(1..=4);
    let mut builder = GraphBuilder::new();
    let mut values = Vec::new();
    let mut bindings = Bindings::new();
    let mut ids = Vec::new();
    for i in 0..n_vars {
        let name = format!("x{i}");
        let value = rng.gen_range(0.6..3.0);
        ids.push(builder.var(&name));
        values.push(value);
        bindings.set(name, value);
    }
    for _ in 0..rng.gen_range(0..=2) {
        // One-decimal constants read like hand-written programs.
        let value = (rng.gen_range(0.6_f64..4.0) * 10.0).round() / 10.0;
        ids.push(builder.constant(value));
        values.push(value);
    }
    let leaves = ids.len();

    let target_len = rng.gen_range(leaves + 1..=50);
    'grow: while ids.len() < target_len {
        for _ in 0..20 {
            let mut roll = rng.gen_range(0..weight_total);
            let op = ops
                .iter()
                .find(|(_, w)| {
                    let hit = roll < *w;
                    roll = roll.saturating_sub(*w);
                    hit
                })
                .map(|(op, _)| op.clone())
                .unwrap();
            let n = ids.len();
            let operands: Vec<usize> = (0..op.arity())
                .map(|_| {
                    // Half the picks favor recent nodes so programs get
                    // deep instead of stopping one layer over the leaves.
                    if n > 6 && rng.gen_bool(0.5) {
                        rng.gen_range(n - 6..n)
                    } else {
                        rng.gen_range(0..n)
                    }
                })
                .collect();
            let operand_values: Vec<f64> = operands.iter().map(|&i| values[i]).collect();
            if !safe_operands(&op, &operand_values) {
                continue;
            }
            let value = match adgraph::primitive_value(&op, &operand_values) {
                Ok(v) if v.is_finite() && v.abs() <= VALUE_CAP => v,
                _ => continue,
            };
            let operand_ids = operands.iter().map(|&i| ids[i]).collect();
            ids.push(builder.add_node(op, operand_ids).unwrap());
            values.push(value);
            continue 'grow;
        }
        break;
    }

    let last = *ids.last().unwrap();
    let graph = builder.finish(vec![last]).unwrap();
    (graph.len() > leaves).then_some(RandomProgram { graph, bindings })
}
