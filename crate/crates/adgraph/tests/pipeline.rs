//! Cross-module flows: source text in one end, numbers out the other.

mod common;

use adgraph::{
    build_adjoint, compile, deserialize, evaluate, grad, gradcheck, gradient_forward, parse,
    record, render, render_trace, serialize, to_dot, two_phase_grad, Bindings, EvalError,
    GraphBuilder, OpKind, SourceErrorKind, DEFAULT_STEP, DEFAULT_TOL,
};
use common::{rel_err, three_target_program, worked_example};

#[test]
fn source_survives_a_render_round_trip() {
    let src = "r2 := xx*xx + yy*yy\nE := exp(-r2 / 2) * cos(3 * xx)\n";
    let program = parse(src).unwrap();
    let again = parse(&render(&program)).unwrap();
    assert_eq!(program.statements, again.statements);

    let bindings: Bindings = [("xx", 0.4), ("yy", -1.2)].into_iter().collect();
    let (g1, _) = compile(src).unwrap();
    let (g2, _) = compile(&render(&program)).unwrap();
    let v1 = evaluate(&g1, &bindings).unwrap();
    let v2 = evaluate(&g2, &bindings).unwrap();
    assert_eq!(v1.outputs(), v2.outputs());
}

#[test]
fn reloaded_graphs_differentiate_identically() {
    let (g, _, b) = worked_example();
    let reloaded = deserialize(&serialize(&g)).unwrap();
    let original = grad(&g, &b).unwrap();
    let again = grad(&reloaded, &b).unwrap();
    for ((name_a, grad_a), (name_b, grad_b)) in original.iter().zip(&again) {
        assert_eq!(name_a, name_b);
        assert_eq!(grad_a.to_bits(), grad_b.to_bits(), "d/d{name_a} changed across a reload");
    }
}

#[test]
fn folding_preserves_adjoint_results_across_points() {
    let (g, _, _) = worked_example();
    let adjoint = build_adjoint(&g);
    let folded = adjoint.fold().unwrap();
    assert!(folded.graph().len() < adjoint.graph().len());
    for (x1, x2) in [(2.0, 5.0), (0.7, -3.0), (11.0, 0.25)] {
        let point: Bindings = [("x1", x1), ("x2", x2)].into_iter().collect();
        let full = adjoint.eval(&point, &[1.0]).unwrap();
        let slim = folded.eval(&point, &[1.0]).unwrap();
        assert_eq!(full.outputs[0].to_bits(), slim.outputs[0].to_bits());
        for ((name, a), (_, b)) in full.gradient.iter().zip(&slim.gradient) {
            assert_eq!(a.to_bits(), b.to_bits(), "d/d{name} at ({x1}, {x2})");
        }
    }
}

#[test]
fn gradients_agree_on_a_handwritten_model() {
    // Sigmoid-squashed reading of a two-parameter line; every mode and
    // the numeric check should meet on it.
    let (g, _) = compile("loss := (1 / (1 + exp(-(w*t + q))) - 0.25)^2").unwrap();
    let point: Bindings = [("w", 0.8), ("t", -1.4), ("q", 0.3)].into_iter().collect();

    let forward = gradient_forward(&g, &point).unwrap().gradient;
    let taped = grad(&g, &point).unwrap();
    let adjoint = two_phase_grad(&g, &point).unwrap();
    let report = gradcheck(&g, &point, DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(report.pass, "{report}");

    let by_name = |v: &[(String, f64)], n: &str| v.iter().find(|(k, _)| k == n).unwrap().1;
    for name in ["w", "t", "q"] {
        let f = by_name(&forward, name);
        assert!(rel_err(f, by_name(&taped, name)) < 1e-12);
        assert!(rel_err(f, by_name(&adjoint, name)) < 1e-12);
    }
}

#[test]
fn parse_errors_point_at_the_offending_token() {
    let cases = [
        ("y := 2 x", SourceErrorKind::Syntax, 1, 8),
        ("y := ln 2", SourceErrorKind::Syntax, 1, 6),
        ("a := b := 2", SourceErrorKind::Syntax, 1, 8),
        ("y := q + r\nq := 1", SourceErrorKind::Scope, 1, 6),
    ];
    for (src, kind, line, col) in cases {
        let err = compile(src).unwrap_err();
        assert_eq!(err.kind, kind, "{src:?}: {err}");
        assert_eq!((err.pos.line, err.pos.col), (line, col), "{src:?}: {err}");
    }
}

#[test]
fn runtime_errors_name_their_node() {
    let (g, _) = compile("y := ln(x) / d").unwrap();

    let missing = evaluate(&g, &[("x", 1.0)].into_iter().collect()).unwrap_err();
    assert!(matches!(&missing, EvalError::MissingBinding { name } if name == "d"));

    let at_zero = evaluate(&g, &[("x", 0.0), ("d", 1.0)].into_iter().collect()).unwrap_err();
    match &at_zero {
        EvalError::Domain { node, op, .. } => {
            assert_eq!(g.node(*node).op, OpKind::Ln);
            assert_eq!(op, "ln");
        }
        other => panic!("wanted a domain error, got {other}"),
    }
    assert!(at_zero.to_string().contains("ln"), "{at_zero}");
}

#[test]
fn gradcheck_refuses_to_vouch_near_a_boundary() {
    let (g, _) = compile("y := ln(x)").unwrap();
    let report =
        gradcheck(&g, &[("x", 4e-7)].into_iter().collect(), DEFAULT_STEP, DEFAULT_TOL).unwrap();
    assert!(!report.pass);
    assert!(report.entries.iter().any(|e| !e.conclusive));
}

#[test]
fn one_compile_feeds_every_renderer() {
    let (g, names, b) = three_target_program();

    let table = render_trace(&g, &names, &b, 3).unwrap();
    // One primal row per variable, per operation, per target alias.
    let operations = g.nodes().iter().filter(|n| !matches!(n.op, OpKind::Var(_))).count();
    assert_eq!(table.primal.len(), 3 + operations + 3);
    let text = table.to_string();
    assert!(text.contains("forward primal trace"), "{text}");
    assert!(text.contains("reverse adjoint trace"), "{text}");

    let dot = to_dot(&g, Some(&names));
    assert_eq!(dot.matches(" -> ").count(), g.nodes().iter().map(|n| n.inputs.len()).sum());
    for alias in ["[Z]", "[W]", "[Y]"] {
        assert!(dot.contains(alias), "{dot}");
    }
}

#[test]
fn long_chains_stay_exact_in_every_mode() {
    let mut builder = GraphBuilder::new();
    let mut node = builder.var("x");
    let one = builder.constant(1.0);
    for _ in 0..200 {
        node = builder.binary(OpKind::Add, node, one).unwrap();
    }
    let g = builder.finish(vec![node]).unwrap();
    let b: Bindings = [("x", 0.5)].into_iter().collect();

    assert_eq!(evaluate(&g, &b).unwrap().outputs(), &[200.5]);
    assert_eq!(grad(&g, &b).unwrap()[0].1, 1.0);
    assert_eq!(gradient_forward(&g, &b).unwrap().gradient[0].1, 1.0);
    assert_eq!(two_phase_grad(&g, &b).unwrap()[0].1, 1.0);
    let tape = record(&g, &b).unwrap();
    assert_eq!(tape.entries().len(), 201);
}

#[test]
fn files_written_by_hand_differentiate() {
    let text = "adgraph v1\n\
                0 VAR x\n\
                1 MUL 0 0\n\
                2 CONST 3\n\
                3 MUL 2 0\n\
                4 ADD 1 3\n\
                outputs 4\n";
    let g = deserialize(text).unwrap();
    let b: Bindings = [("x", 2.0)].into_iter().collect();
    // d/dx of x^2 + 3x is 2x + 3.
    assert_eq!(grad(&g, &b).unwrap(), vec![("x".to_string(), 7.0)]);
    let adjoint = build_adjoint(&g);
    assert_eq!(adjoint.eval(&b, &[1.0]).unwrap().gradient[0].1, 7.0);
}
