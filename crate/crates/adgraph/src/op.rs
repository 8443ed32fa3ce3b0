//! Primitive operations: value and partial-derivative rules.
//!
//! Every other module is built on this table. Each operation kind has a
//! fixed arity, a value rule, and one partial-derivative rule per input:
//!
//! | op       | value            | d/dx0            | d/dx1          |
//! |----------|------------------|------------------|----------------|
//! | Add      | x0 + x1          | 1                | 1              |
//! | Sub      | x0 - x1          | 1                | -1             |
//! | Mul      | x0 * x1          | x1               | x0             |
//! | Div      | x0 / x1          | 1/x1             | -x0/x1^2       |
//! | Neg      | -x0              | -1               |                |
//! | Ln       | ln(x0)           | 1/x0             |                |
//! | Sin      | sin(x0)          | cos(x0)          |                |
//! | Cos      | cos(x0)          | -sin(x0)         |                |
//! | Exp      | exp(x0)          | exp(x0)          |                |
//! | Pow      | x0 ^ x1          | x1 * x0^(x1-1)   | x0^x1 * ln(x0) |
//!
//! Domain violations (log of a non-positive number, division by zero,
//! fractional powers of negatives) are raised eagerly as errors rather
//! than letting NaNs propagate silently.

use std::fmt;

/// The kind of a computation-graph node.
///
/// `Const` and `Var` are the leaves (arity 0); everything else consumes
/// the values of its input edges in order.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// Literal scalar value.
    Const(f64),
    /// Named input variable, bound at evaluation time.
    Var(String),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Ln,
    Sin,
    Cos,
    Exp,
    Pow,
}

impl OpKind {
    /// Number of inputs this operation consumes.
    pub fn arity(&self) -> usize {
        match self {
            OpKind::Const(_) | OpKind::Var(_) => 0,
            OpKind::Neg | OpKind::Ln | OpKind::Sin | OpKind::Cos | OpKind::Exp => 1,
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div | OpKind::Pow => 2,
        }
    }

    /// Short lowercase symbol used in trace tables and DOT labels.
    pub fn symbol(&self) -> &'static str {
        match self {
            OpKind::Const(_) => "const",
            OpKind::Var(_) => "var",
            OpKind::Add => "+",
            OpKind::Sub => "-",
            OpKind::Mul => "*",
            OpKind::Div => "/",
            OpKind::Neg => "neg",
            OpKind::Ln => "ln",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Exp => "exp",
            OpKind::Pow => "^",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::Const(v) => write!(f, "const {v}"),
            OpKind::Var(name) => write!(f, "var {name}"),
            other => f.write_str(other.symbol()),
        }
    }
}

/// A primitive evaluation or differentiation left its mathematical domain.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainError {
    /// `ln` of a non-positive argument.
    LnNonPositive { arg: f64 },
    /// Division with a zero divisor.
    DivisionByZero { numerator: f64 },
    /// Negative base raised to a non-integer exponent.
    PowNegativeBase { base: f64, exponent: f64 },
    /// Derivative of `pow` with respect to the exponent needs `ln(base)`,
    /// which requires a strictly positive base.
    PowExponentNonPositiveBase { base: f64 },
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::LnNonPositive { arg } => {
                write!(f, "ln of non-positive argument {arg}")
            }
            DomainError::DivisionByZero { numerator } => {
                write!(f, "division of {numerator} by zero")
            }
            DomainError::PowNegativeBase { base, exponent } => {
                write!(f, "negative base {base} raised to non-integer exponent {exponent}")
            }
            DomainError::PowExponentNonPositiveBase { base } => {
                write!(f, "derivative with respect to the exponent requires a positive base, got {base}")
            }
        }
    }
}

impl std::error::Error for DomainError {}

fn is_integer(x: f64) -> bool {
    x.is_finite() && x == x.trunc()
}

/// Evaluates one primitive at the given input values.
///
/// `inputs` must have exactly `op.arity()` elements.
pub fn primitive_value(op: &OpKind, inputs: &[f64]) -> Result<f64, DomainError> {
    assert_eq!(
        inputs.len(),
        op.arity(),
        "primitive_value: {op} expects {} inputs, got {}",
        op.arity(),
        inputs.len()
    );
    match op {
        OpKind::Const(v) => Ok(*v),
        OpKind::Var(_) => {
            unreachable!("variable values come from bindings, not primitive_value")
        }
        OpKind::Add => Ok(inputs[0] + inputs[1]),
        OpKind::Sub => Ok(inputs[0] - inputs[1]),
        OpKind::Mul => Ok(inputs[0] * inputs[1]),
        OpKind::Div => {
            if inputs[1] == 0.0 {
                Err(DomainError::DivisionByZero { numerator: inputs[0] })
            } else {
                Ok(inputs[0] / inputs[1])
            }
        }
        OpKind::Neg => Ok(-inputs[0]),
        OpKind::Ln => {
            if inputs[0] <= 0.0 {
                Err(DomainError::LnNonPositive { arg: inputs[0] })
            } else {
                Ok(inputs[0].ln())
            }
        }
        OpKind::Sin => Ok(inputs[0].sin()),
        OpKind::Cos => Ok(inputs[0].cos()),
        OpKind::Exp => Ok(inputs[0].exp()),
        OpKind::Pow => {
            if inputs[0] < 0.0 && !is_integer(inputs[1]) {
                Err(DomainError::PowNegativeBase { base: inputs[0], exponent: inputs[1] })
            } else {
                Ok(inputs[0].powf(inputs[1]))
            }
        }
    }
}

/// Evaluates the partial derivative of one primitive with respect to its
/// `wrt`-th input, at the given input values.
pub fn primitive_partial(op: &OpKind, inputs: &[f64], wrt: usize) -> Result<f64, DomainError> {
    assert_eq!(
        inputs.len(),
        op.arity(),
        "primitive_partial: {op} expects {} inputs, got {}",
        op.arity(),
        inputs.len()
    );
    assert!(
        wrt < op.arity(),
        "primitive_partial: {op} has {} inputs, no input {wrt}",
        op.arity()
    );
    match op {
        OpKind::Const(_) | OpKind::Var(_) => unreachable!("leaves have no inputs"),
        OpKind::Add => Ok(1.0),
        OpKind::Sub => Ok(if wrt == 0 { 1.0 } else { -1.0 }),
        OpKind::Mul => Ok(if wrt == 0 { inputs[1] } else { inputs[0] }),
        OpKind::Div => {
            if inputs[1] == 0.0 {
                Err(DomainError::DivisionByZero { numerator: inputs[0] })
            } else if wrt == 0 {
                Ok(1.0 / inputs[1])
            } else {
                Ok(-inputs[0] / (inputs[1] * inputs[1]))
            }
        }
        OpKind::Neg => Ok(-1.0),
        OpKind::Ln => {
            if inputs[0] <= 0.0 {
                Err(DomainError::LnNonPositive { arg: inputs[0] })
            } else {
                Ok(1.0 / inputs[0])
            }
        }
        OpKind::Sin => Ok(inputs[0].cos()),
        OpKind::Cos => Ok(-inputs[0].sin()),
        OpKind::Exp => Ok(inputs[0].exp()),
        OpKind::Pow => {
            let (base, exponent) = (inputs[0], inputs[1]);
            if base < 0.0 && !is_integer(exponent) {
                return Err(DomainError::PowNegativeBase { base, exponent });
            }
            if wrt == 0 {
                if base < 0.0 && !is_integer(exponent - 1.0) {
                    return Err(DomainError::PowNegativeBase { base, exponent: exponent - 1.0 });
                }
                Ok(exponent * base.powf(exponent - 1.0))
            } else {
                if base <= 0.0 {
                    return Err(DomainError::PowExponentNonPositiveBase { base });
                }
                Ok(base.powf(exponent) * base.ln())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPS: &[OpKind] = &[
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Neg,
        OpKind::Ln,
        OpKind::Sin,
        OpKind::Cos,
        OpKind::Exp,
        OpKind::Pow,
    ];

    #[test]
    fn arity_table() {
        assert_eq!(OpKind::Const(1.0).arity(), 0);
        assert_eq!(OpKind::Var("x".into()).arity(), 0);
        for op in [OpKind::Neg, OpKind::Ln, OpKind::Sin, OpKind::Cos, OpKind::Exp] {
            assert_eq!(op.arity(), 1, "{op}");
        }
        for op in [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div, OpKind::Pow] {
            assert_eq!(op.arity(), 2, "{op}");
        }
    }

    #[test]
    fn values_match_reference_points() {
        // ln(2) = 0.693, 2 * 5 = 10, sin(5) = -0.959 to three decimals.
        let ln2 = primitive_value(&OpKind::Ln, &[2.0]).unwrap();
        assert!((ln2 - 0.693).abs() < 5e-4);
        assert_eq!(ln2, 2.0_f64.ln());

        assert_eq!(primitive_value(&OpKind::Mul, &[2.0, 5.0]).unwrap(), 10.0);
        assert_eq!(primitive_value(&OpKind::Add, &[0.0, 0.0]).unwrap(), 0.0);

        let sin5 = primitive_value(&OpKind::Sin, &[5.0]).unwrap();
        assert!((sin5 - (-0.959)).abs() < 5e-4);
        assert_eq!(sin5, 5.0_f64.sin());
    }

    #[test]
    fn partials_match_reference_points() {
        assert_eq!(primitive_partial(&OpKind::Mul, &[2.0, 5.0], 0).unwrap(), 5.0);
        assert_eq!(primitive_partial(&OpKind::Sub, &[10.693, -0.959], 1).unwrap(), -1.0);
        assert_eq!(primitive_partial(&OpKind::Ln, &[2.0], 0).unwrap(), 0.5);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            primitive_value(&OpKind::Ln, &[0.0]),
            Err(DomainError::LnNonPositive { .. })
        ));
        assert!(matches!(
            primitive_value(&OpKind::Ln, &[-1.0]),
            Err(DomainError::LnNonPositive { .. })
        ));
        assert!(matches!(
            primitive_value(&OpKind::Div, &[1.0, 0.0]),
            Err(DomainError::DivisionByZero { .. })
        ));
        assert!(matches!(
            primitive_value(&OpKind::Pow, &[-2.0, 0.5]),
            Err(DomainError::PowNegativeBase { .. })
        ));
        // Integer exponents of negative bases are fine.
        assert_eq!(primitive_value(&OpKind::Pow, &[-2.0, 3.0]).unwrap(), -8.0);
        // ...but the exponent partial needs ln(base).
        assert!(matches!(
            primitive_partial(&OpKind::Pow, &[-2.0, 3.0], 1),
            Err(DomainError::PowExponentNonPositiveBase { .. })
        ));
        assert!(matches!(
            primitive_partial(&OpKind::Pow, &[0.0, 3.0], 1),
            Err(DomainError::PowExponentNonPositiveBase { .. })
        ));
    }

    /// Central finite difference of `primitive_value`, the independent
    /// oracle the analytic partial table is checked against.
    fn central_difference(op: &OpKind, inputs: &[f64], wrt: usize, h: f64) -> f64 {
        let mut lo = inputs.to_vec();
        let mut hi = inputs.to_vec();
        lo[wrt] -= h;
        hi[wrt] += h;
        let f_hi = primitive_value(op, &hi).unwrap();
        let f_lo = primitive_value(op, &lo).unwrap();
        (f_hi - f_lo) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    /// Picks inputs in [-3, 3] that keep `op` (and the finite-difference
    /// probes at distance h) away from domain boundaries.
    fn safe_inputs(op: &OpKind, raw: (f64, f64)) -> Vec<f64> {
        let (a, b) = raw;
        match op {
            OpKind::Ln => vec![a.abs() + 0.1],
            OpKind::Div => vec![a, if b.abs() < 0.1 { b + 0.5 } else { b }],
            OpKind::Pow => vec![a.abs() + 0.1, b],
            _ => {
                if op.arity() == 1 {
                    vec![a]
                } else {
                    vec![a, b]
                }
            }
        }
    }

    #[test]
    fn partials_agree_with_central_differences() {
        // Deterministic grid over [-3, 3]^2; h = 1e-6, rel tol 1e-5.
        let grid: Vec<f64> = (-6..=6).map(|i| i as f64 * 0.5).collect();
        for op in OPS {
            for &a in &grid {
                for &b in &grid {
                    let inputs = safe_inputs(op, (a, b));
                    for wrt in 0..op.arity() {
                        let analytic = primitive_partial(op, &inputs, wrt).unwrap();
                        let numeric = central_difference(op, &inputs, wrt, 1e-6);
                        let err = rel_err(analytic, numeric);
                        assert!(
                            err <= 1e-5 || (analytic.abs() < 1e-7 && numeric.abs() < 1e-7),
                            "{op} at {inputs:?} wrt {wrt}: analytic {analytic} vs numeric {numeric} (rel {err})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn every_op_has_arity_many_partials() {
        for op in OPS {
            let inputs = safe_inputs(op, (1.5, 2.5));
            for wrt in 0..op.arity() {
                primitive_partial(op, &inputs, wrt).unwrap();
            }
        }
    }
}
