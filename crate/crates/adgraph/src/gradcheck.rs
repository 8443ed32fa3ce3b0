//! Numerical validation of analytic gradients.
//!
//! [`gradcheck`] compares the reverse-mode gradient of a single-output
//! graph against central finite differences, one variable at a time:
//!
//! ```text
//! numeric = (f(x + h) - f(x - h)) / 2h
//! ```
//!
//! The discrepancy is `|analytic - numeric| / max(|analytic|,
//! |numeric|, 1)`; the unit floor makes the measure absolute near zero
//! and relative for large magnitudes. A probe that steps outside a
//! primitive's domain makes that entry inconclusive rather than failed;
//! an inconclusive entry still prevents an overall pass, because
//! nothing was verified.
//!
//! The defaults pair `h = 1e-6` with tolerance `1e-5`, which keeps the
//! truncation and cancellation noise of well-scaled problems an order
//! of magnitude under the tolerance. Poorly scaled problems genuinely
//! fail: `ln(x)` checked at `x = 1e-5` has curvature on the order of
//! `1/x^2`, the probe is no longer small against it, and the report
//! says so.

use std::fmt;

use crate::exec::evaluate;
use crate::graph::{Bindings, Graph};
use crate::tape::{grad, TapeError};

pub const DEFAULT_STEP: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-5;

/// One variable's comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub analytic: f64,
    /// Central difference, absent when a probe left the domain.
    pub numeric: Option<f64>,
    pub rel_error: Option<f64>,
    pub conclusive: bool,
}

/// The outcome of checking every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    /// Largest discrepancy among conclusive entries (0 if none).
    pub max_rel_error: f64,
    pub step: f64,
    pub tol: f64,
    /// True when every entry is conclusive and within tolerance.
    pub pass: bool,
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            match (e.numeric, e.rel_error) {
                (Some(numeric), Some(rel)) => writeln!(
                    f,
                    "d/d{}: analytic {:e} numeric {numeric:e} rel {rel:.3e}",
                    e.name, e.analytic
                )?,
                _ => writeln!(
                    f,
                    "d/d{}: analytic {:e} numeric inconclusive (probe left the domain)",
                    e.name, e.analytic
                )?,
            }
        }
        writeln!(
            f,
            "max rel error {:.3e} against tolerance {:e} at step {:e}: {}",
            self.max_rel_error,
            self.tol,
            self.step,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

fn discrepancy(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Checks the reverse-mode gradient of a single-output graph at a
/// point against central differences with step `h`.
pub fn gradcheck(
    graph: &Graph,
    bindings: &Bindings,
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, TapeError> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let analytic = grad(graph, bindings)?;
    let mut entries = Vec::new();
    for (name, a) in analytic {
        let base = bindings.get(&name).expect("gradient variables are bound");
        let probe = |delta: f64| -> Option<f64> {
            let mut shifted = bindings.clone();
            shifted.set(name.clone(), base + delta);
            // The unperturbed point evaluated already, so any failure
            // here is the probe crossing a domain boundary.
            evaluate(graph, &shifted).ok().map(|v| v.outputs()[0])
        };
        let numeric = match (probe(h), probe(-h)) {
            (Some(hi), Some(lo)) => Some((hi - lo) / (2.0 * h)),
            _ => None,
        };
        let rel_error = numeric.map(|n| discrepancy(a, n));
        entries.push(GradCheckEntry {
            name,
            analytic: a,
            numeric,
            rel_error,
            conclusive: numeric.is_some(),
        });
    }
    let max_rel_error = entries.iter().filter_map(|e| e.rel_error).fold(0.0, f64::max);
    let pass = entries.iter().all(|e| e.conclusive) && max_rel_error <= tol;
    Ok(GradCheckReport { entries, max_rel_error, step: h, tol, pass })
}
