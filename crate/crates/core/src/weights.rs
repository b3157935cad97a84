//! Carleman weights `ψ(x, t) = ψ₀(x) − βt² + C₁` and `φ = e^{λψ}`, parameter
//! feasibility, and the minimal observation time.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{certify, ConvexBody, DomainSpec, GeometryCertificate, Sampling};

/// Default safety margin added to `C₁` above the bare `ψ > 1` requirement.
pub const DEFAULT_C1_MARGIN: f64 = 0.1;

/// Largest exponent accepted before `e^x` is considered to overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// Full parameter set of the weight pair on the window `(−T, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub d: f64,
    pub delta: f64,
    pub beta: f64,
    pub c1: f64,
    pub lambda: f64,
    pub s: f64,
    /// Half-window length `T`.
    pub t_half: f64,
}

impl WeightParams {
    /// Chooses `β` at the midpoint of the admissible window and `C₁` with the
    /// default margin.
    pub fn auto(
        cert: &GeometryCertificate,
        d: f64,
        delta: f64,
        t_half: f64,
        lambda: f64,
        s: f64,
    ) -> Result<Self> {
        let window = beta_window(cert, d, delta, t_half)?;
        let beta = 0.5 * (window.lo + window.hi);
        Ok(Self {
            d,
            delta,
            beta,
            c1: pick_c1(beta, t_half, cert, DEFAULT_C1_MARGIN),
            lambda,
            s,
            t_half,
        })
    }

    pub fn with_scales(self, s: f64, lambda: f64) -> Self {
        Self { s, lambda, ..self }
    }

    /// Checks the hard requirements of the weight itself: positive speeds and
    /// window, `λ, s ≥ 1`, `β > 0` and `ψ > 1` on `Ω̄ × [−T, T]`.
    pub fn validate(&self, cert: &GeometryCertificate) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("delta", self.delta),
            ("beta", self.beta),
            ("T", self.t_half),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Infeasible(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda >= 1.0) || !(self.s >= 1.0) {
            return Err(Error::Infeasible(format!(
                "lambda and s must be >= 1, got lambda = {}, s = {}",
                self.lambda, self.s
            )));
        }
        let psi_min = cert.psi0_min() - self.beta * self.t_half * self.t_half + self.c1;
        if !(psi_min > 1.0) {
            return Err(Error::Infeasible(format!(
                "min psi = {psi_min} is not > 1; increase c1"
            )));
        }
        Ok(())
    }

    /// `C′d(δ − d) − 8βδ`, the coefficient of the tangential surface term.
    pub fn tangential_coefficient(&self, cert: &GeometryCertificate) -> f64 {
        cert.c_prime * self.d * (self.delta - self.d) - 8.0 * self.beta * self.delta
    }

    /// Feasibility flags for reporting.
    pub fn feasibility(&self, cert: &GeometryCertificate) -> Feasibility {
        let window = beta_window(cert, self.d, self.delta, self.t_half).ok();
        Feasibility {
            delta_exceeds_d: cert.dim == 1 || self.delta > self.d,
            beta_in_window: window.is_some_and(|w| w.contains(self.beta)),
            psi_above_one: cert.psi0_min() - self.beta * self.t_half * self.t_half + self.c1 > 1.0,
            tangential_coefficient: self.tangential_coefficient(cert),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub delta_exceeds_d: bool,
    pub beta_in_window: bool,
    pub psi_above_one: bool,
    pub tangential_coefficient: f64,
}

impl Feasibility {
    pub fn all(&self) -> bool {
        self.delta_exceeds_d && self.beta_in_window && self.psi_above_one
    }
}

/// Open interval of admissible `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaWindow {
    pub lo: f64,
    pub hi: f64,
}

impl BetaWindow {
    pub fn contains(&self, beta: f64) -> bool {
        beta > self.lo && beta < self.hi
    }
}

fn check_speeds(cert: &GeometryCertificate, d: f64, delta: f64) -> Result<()> {
    if !(d > 0.0 && delta > 0.0) {
        return Err(Error::Infeasible(format!(
            "wave speeds must be positive (d = {d}, delta = {delta})"
        )));
    }
    // A point has no tangential directions: the surface term and its gate vanish in 1D.
    if cert.dim >= 2 && delta <= d {
        return Err(Error::Infeasible(format!(
            "delta = {delta} must exceed d = {d}; the case delta <= d is not covered"
        )));
    }
    Ok(())
}

/// `min(ρd, C′d(δ − d)/(8δ))`, or `ρd` in 1D.
pub fn beta_upper(cert: &GeometryCertificate, d: f64, delta: f64) -> Result<f64> {
    check_speeds(cert, d, delta)?;
    let convexity = cert.rho * d;
    if cert.dim == 1 {
        return Ok(convexity);
    }
    Ok(convexity.min(cert.c_prime * d * (delta - d) / (8.0 * delta)))
}

/// Minimal time `T* = √(max ψ₀ − min ψ₀) / √(β_hi)`.
pub fn minimal_time(cert: &GeometryCertificate, d: f64, delta: f64) -> Result<f64> {
    let hi = beta_upper(cert, d, delta)?;
    let osc = cert.psi0_max() - cert.psi0_min();
    Ok(osc.max(0.0).sqrt() / hi.sqrt())
}

/// `T*` of the centered annulus `B_{r2} \ B̄_{r1}` the solver meshes.
pub fn annulus_minimal_time(dim: usize, r1: f64, r2: f64, d: f64, delta: f64) -> Result<f64> {
    let cert = certify(&DomainSpec::annulus(dim, r1, r2)?, Sampling::default())?;
    minimal_time(&cert, d, delta)
}

/// `((d₁² − d₀²)/T², β_hi)`; empty exactly when `T ≤ T*`.
pub fn beta_window(cert: &GeometryCertificate, d: f64, delta: f64, t: f64) -> Result<BetaWindow> {
    let hi = beta_upper(cert, d, delta)?;
    let t_star = minimal_time(cert, d, delta)?;
    let lo = (cert.psi0_max() - cert.psi0_min()) / (t * t);
    if !(t > t_star) {
        return Err(Error::EmptyBetaWindow { lo, hi, t, t_star });
    }
    Ok(BetaWindow { lo, hi })
}

/// `C₁ = 1 + βT² − d₀² + margin`, so that `min ψ = 1 + margin`.
pub fn pick_c1(beta: f64, t: f64, cert: &GeometryCertificate, margin: f64) -> f64 {
    1.0 + beta * t * t - cert.psi0_min() + margin
}

/// Weight values and derivatives at one space-time point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEval {
    pub psi: f64,
    pub phi: f64,
    pub dpsi_dt: f64,
    pub grad_psi: DVector<f64>,
    pub d2psi_dt2: f64,
    pub hess_psi: DMatrix<f64>,
    pub dphi_dt: f64,
    pub grad_phi: DVector<f64>,
    pub d2phi_dt2: f64,
    /// `b(ψ) = |∂ₜψ|² − d|∇ψ|²`.
    pub b_psi: f64,
}

pub fn psi(params: &WeightParams, body: &ConvexBody, x: &[f64], t: f64) -> Result<f64> {
    Ok(body.psi0(x)? - params.beta * t * t + params.c1)
}

pub fn eval_weights(params: &WeightParams, body: &ConvexBody, x: &[f64], t: f64) -> Result<WeightEval> {
    let psi = psi(params, body, x, t)?;
    let exponent = params.lambda * psi;
    if exponent > MAX_EXPONENT {
        return Err(Error::WeightOverflow {
            exponent,
            advice: "rescale lambda or work with log-weights".into(),
        });
    }
    let phi = exponent.exp();
    let lambda = params.lambda;
    let dpsi_dt = -2.0 * params.beta * t;
    let d2psi_dt2 = -2.0 * params.beta;
    let grad_psi = body.psi0_gradient(x)?;
    let hess_psi = body.psi0_hessian(x)?;
    let grad_phi = &grad_psi * (lambda * phi);
    Ok(WeightEval {
        psi,
        phi,
        dpsi_dt,
        dphi_dt: lambda * phi * dpsi_dt,
        d2phi_dt2: lambda * phi * (d2psi_dt2 + lambda * dpsi_dt * dpsi_dt),
        b_psi: dpsi_dt * dpsi_dt - params.d * grad_psi.norm_squared(),
        grad_psi,
        d2psi_dt2,
        hess_psi,
        grad_phi,
    })
}
