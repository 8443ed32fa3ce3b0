//! Scalar automatic differentiation over explicit dataflow graphs.
//!
//! A computation is a [`Graph`]: numbered nodes holding a primitive
//! operation and the ids of their operands, plus a list of output
//! nodes. Graphs come from the [`parser`] DSL, from [`GraphBuilder`],
//! or from the [`graphfile`] text format, and every consumer works on
//! the same structure:
//!
//! * [`exec`] evaluates by firing nodes whose inputs are ready; any
//!   firing order produces bit-identical results.
//! * [`forward`] pushes tangents through one sweep per direction.
//! * [`tape`] records an evaluation and runs the adjoint sweep
//!   backwards over it — one pass for the whole gradient.
//! * [`adjoint`] goes one step further and builds the adjoint
//!   computation as a new `Graph`, which can be folded, saved, and
//!   re-evaluated at many points without re-deriving anything.
//! * [`gradcheck`] arbitrates between analytic and finite-difference
//!   derivatives.
//! * [`trace`] and [`dot`] render evaluations and structures for
//!   inspection.
//!
//! ```
//! use adgraph::{compile, evaluate, grad};
//!
//! let (graph, _names) = compile("y := ln(x1) + x1*x2 - sin(x2)").unwrap();
//! let point = [("x1", 2.0), ("x2", 5.0)].into_iter().collect();
//!
//! let value = evaluate(&graph, &point).unwrap();
//! assert_eq!(value.outputs()[0], 11.652071455223084);
//!
//! let gradient = grad(&graph, &point).unwrap();
//! assert_eq!(gradient[0], ("x1".to_string(), 5.5));
//! ```

pub mod adjoint;
pub mod dot;
pub mod exec;
pub mod forward;
pub mod gradcheck;
pub mod graph;
pub mod graphfile;
pub mod op;
pub mod parser;
pub mod tape;
pub mod trace;

pub use adjoint::{
    build_adjoint, constant_fold, two_phase_grad, AdjointProgram, AdjointValues, FoldError,
};
pub use dot::to_dot;
pub use exec::{evaluate, evaluate_with_schedule, EvalError, EvalState, Valuation};
pub use forward::{gradient_forward, jvp, DualValuation, ForwardError, ForwardGradient};
pub use gradcheck::{gradcheck, GradCheckEntry, GradCheckReport, DEFAULT_STEP, DEFAULT_TOL};
pub use graph::{Bindings, Graph, GraphBuilder, GraphError, Node, NodeId, Violation};
pub use graphfile::{deserialize, serialize, GraphFileError};
pub use op::{primitive_partial, primitive_value, DomainError, OpKind};
pub use parser::{compile, lower, parse, render, NameMap, Program, SourceError, SourceErrorKind};
pub use tape::{grad, record, AdjointState, Tape, TapeEntry, TapeError};
pub use trace::{render_trace, TraceRow, TraceTable};
