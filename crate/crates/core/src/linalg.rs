//! Matrix-free conjugate gradient in a diagonally weighted inner product.

use crate::error::{Error, Result};

/// Stopping rule for [`conjugate_gradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual `‖b − Ax‖_W / ‖b‖_W`.
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual after each iteration, starting with the initial one.
    pub history: Vec<f64>,
}

/// `Σ wᵢ xᵢ yᵢ`.
pub fn weighted_dot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum()
}

/// Solves `A x = b` for `A` self-adjoint and positive definite in `⟨·,·⟩_W`.
///
/// Running out of iterations is not an error: the outcome carries the last
/// iterate with `converged = false`. A non-positive curvature is.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    w: &[f64],
    opts: CgOptions,
) -> Result<CgOutcome> {
    let n = b.len();
    let b_norm = weighted_dot(w, b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            converged: true,
            history: vec![0.0],
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = weighted_dot(w, &r, &r);
    let mut history = vec![1.0];
    for it in 1..=opts.max_iters {
        let ap = apply(&p)?;
        let pap = weighted_dot(w, &p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            return Err(Error::CgStagnation {
                tol: opts.tol,
                iterations: it,
                last: *history.last().unwrap(),
                history,
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = weighted_dot(w, &r, &r);
        let rel = rr_new.sqrt() / b_norm;
        history.push(rel);
        if rel <= opts.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                converged: true,
                history,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(CgOutcome {
        x,
        iterations: opts.max_iters,
        converged: false,
        history,
    })
}

impl CgOutcome {
    /// Turns a non-converged outcome into [`Error::CgStagnation`].
    pub fn require_converged(self, tol: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::CgStagnation {
                tol,
                iterations: self.iterations,
                last: *self.history.last().unwrap_or(&f64::NAN),
                history: self.history,
            })
        }
    }
}

/// Relative mismatch `|a − b| / max(|a|, |b|)` of two inner products.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
