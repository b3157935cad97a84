//! Annular domains `Ω = Ω₀ \ Ω̄₁`, the Minkowski gauge of the convex obstacle
//! `Ω₁`, the squared gauge `ψ₀ = μ²` with its derivatives, and sampled
//! certification of the properties the Carleman weight relies on.
//!
//! Normals follow a single convention: `ν` points out of `Ω`. On the inner
//! boundary `Γ¹ = ∂Ω₁` it therefore points into the obstacle, toward the
//! origin, and `∂νψ₀ < 0` there.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default finite-difference step for radial-profile derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-3;
/// Smallest admissible finite-difference step.
pub const MIN_FD_STEP: f64 = 1e-8;
/// Tolerance of the `ψ₀ = 1` check on the inner boundary.
pub const UNIT_LEVEL_TOL: f64 = 1e-8;

/// Strictly positive, periodic boundary radius `R(θ)` of a planar star-shaped
/// body, given by equispaced samples and evaluated through its trigonometric
/// interpolant (smooth and exact at the samples).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    samples: Vec<f64>,
    cos_coef: Vec<f64>,
    sin_coef: Vec<f64>,
    nyquist: f64,
    fd_step: f64,
}

impl RadialProfile {
    /// `samples[k]` is the boundary radius in direction `2πk/n`.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_step(samples, DEFAULT_FD_STEP)
    }

    pub fn with_step(samples: Vec<f64>, fd_step: f64) -> Result<Self> {
        let n = samples.len();
        if n < 3 {
            return Err(Error::InvalidBody(format!(
                "radial profile needs at least 3 samples, got {n}"
            )));
        }
        if let Some((k, r)) = samples
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::InvalidBody(format!(
                "radial profile sample {k} is not strictly positive ({r})"
            )));
        }
        if !(fd_step.is_finite() && fd_step >= MIN_FD_STEP) {
            return Err(Error::Config(format!(
                "finite-difference step {fd_step:e} is below the admissible minimum {MIN_FD_STEP:e}"
            )));
        }

        let nf = n as f64;
        let m_max = (n - 1) / 2;
        let mut cos_coef = vec![0.0; m_max + 1];
        let mut sin_coef = vec![0.0; m_max + 1];
        cos_coef[0] = samples.iter().sum::<f64>() / nf;
        for m in 1..=m_max {
            let (mut c, mut s) = (0.0, 0.0);
            for (k, r) in samples.iter().enumerate() {
                let arg = 2.0 * PI * (m * k) as f64 / nf;
                c += r * arg.cos();
                s += r * arg.sin();
            }
            cos_coef[m] = 2.0 * c / nf;
            sin_coef[m] = 2.0 * s / nf;
        }
        let nyquist = if n % 2 == 0 {
            samples
                .iter()
                .enumerate()
                .map(|(k, r)| if k % 2 == 0 { *r } else { -*r })
                .sum::<f64>()
                / nf
        } else {
            0.0
        };

        let profile = Self {
            samples,
            cos_coef,
            sin_coef,
            nyquist,
            fd_step,
        };
        // The interpolant can dip below zero between positive samples.
        let probe = 8 * n;
        for k in 0..probe {
            let theta = 2.0 * PI * k as f64 / probe as f64;
            let r = profile.radius(theta);
            if !(r > 0.0) {
                return Err(Error::InvalidBody(format!(
                    "interpolated radial profile is not positive at theta = {theta} ({r})"
                )));
            }
        }
        Ok(profile)
    }

    /// Samples a radius function at `n` equispaced directions.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect())
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn radius(&self, theta: f64) -> f64 {
        let mut r = self.cos_coef[0];
        for m in 1..self.cos_coef.len() {
            let arg = m as f64 * theta;
            r += self.cos_coef[m] * arg.cos() + self.sin_coef[m] * arg.sin();
        }
        if self.nyquist != 0.0 {
            r += self.nyquist * (0.5 * self.samples.len() as f64 * theta).cos();
        }
        r
    }

    fn max_radius(&self) -> f64 {
        let probe = 8 * self.samples.len();
        (0..probe)
            .map(|k| self.radius(2.0 * PI * k as f64 / probe as f64))
            .fold(f64::MIN, f64::max)
    }
}

/// The convex obstacle `Ω₁`, containing the origin in its interior.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexBody {
    Ball { dim: usize, radius: f64 },
    Ellipsoid { semi_axes: Vec<f64> },
    /// Planar body described by its boundary radius as a function of angle.
    RadialProfile(RadialProfile),
}

impl ConvexBody {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let body = ConvexBody::Ball { dim, radius };
        body.validate()?;
        Ok(body)
    }

    pub fn ellipsoid(semi_axes: Vec<f64>) -> Result<Self> {
        let body = ConvexBody::Ellipsoid { semi_axes };
        body.validate()?;
        Ok(body)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Ball { dim, radius } => {
                check_dim(*dim)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidBody(format!("ball radius must be > 0, got {radius}")));
                }
            }
            ConvexBody::Ellipsoid { semi_axes } => {
                check_dim(semi_axes.len())?;
                if let Some(a) = semi_axes.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
                    return Err(Error::InvalidBody(format!("semi-axis must be > 0, got {a}")));
                }
            }
            ConvexBody::RadialProfile(p) => {
                if let Some(r) = p.samples.iter().find(|r| !(**r > 0.0)) {
                    return Err(Error::InvalidBody(format!("profile sample must be > 0, got {r}")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball { dim, .. } => *dim,
            ConvexBody::Ellipsoid { semi_axes } => semi_axes.len(),
            ConvexBody::RadialProfile(_) => 2,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, ConvexBody::RadialProfile(_))
    }

    /// Largest distance from the origin to `∂Ω₁`.
    pub fn max_boundary_radius(&self) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => *radius,
            ConvexBody::Ellipsoid { semi_axes } => semi_axes.iter().cloned().fold(0.0, f64::max),
            ConvexBody::RadialProfile(p) => p.max_radius(),
        }
    }

    /// Minkowski gauge `μ(x) = inf{λ > 0 : x ∈ λΩ₁}`.
    pub fn gauge(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.gauge_unchecked(x))
    }

    fn gauge_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => norm(x) / radius,
            ConvexBody::Ellipsoid { semi_axes } => x
                .iter()
                .zip(semi_axes)
                .map(|(xi, a)| (xi / a).powi(2))
                .sum::<f64>()
                .sqrt(),
            ConvexBody::RadialProfile(p) => {
                let r = norm(x);
                if r == 0.0 {
                    0.0
                } else {
                    r / p.radius(x[1].atan2(x[0]))
                }
            }
        }
    }

    /// `ψ₀(x) = μ(x)²`.
    pub fn psi0(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.psi0_unchecked(x))
    }

    fn psi0_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            ConvexBody::Ball { radius, .. } => x.iter().map(|v| v * v).sum::<f64>() / (radius * radius),
            ConvexBody::Ellipsoid { semi_axes } => {
                x.iter().zip(semi_axes).map(|(xi, a)| (xi / a).powi(2)).sum()
            }
            ConvexBody::RadialProfile(_) => self.gauge_unchecked(x).powi(2),
        }
    }

    pub fn psi0_gradient(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        Ok(match self {
            ConvexBody::Ball { radius, .. } => {
                DVector::from_iterator(x.len(), x.iter().map(|v| 2.0 * v / (radius * radius)))
            }
            ConvexBody::Ellipsoid { semi_axes } => DVector::from_iterator(
                x.len(),
                x.iter().zip(semi_axes).map(|(v, a)| 2.0 * v / (a * a)),
            ),
            ConvexBody::RadialProfile(p) => {
                central_gradient(|y| self.psi0_unchecked(y), x, p.fd_step)
            }
        })
    }

    pub fn psi0_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = x.len();
        Ok(match self {
            ConvexBody::Ball { radius, .. } => {
                DMatrix::identity(n, n) * (2.0 / (radius * radius))
            }
            ConvexBody::Ellipsoid { semi_axes } => DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                semi_axes.iter().map(|a| 2.0 / (a * a)),
            )),
            ConvexBody::RadialProfile(p) => {
                central_hessian(|y| self.psi0_unchecked(y), x, p.fd_step)
            }
        })
    }

    /// Point of `∂Ω₁` in the unit direction `omega`.
    pub fn boundary_point(&self, omega: &[f64]) -> Vec<f64> {
        let mu = self.gauge_unchecked(omega);
        omega.iter().map(|w| w / mu).collect()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, body lives in dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidBody(format!("dimension must be 1, 2 or 3, got {dim}")))
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Second-order central-difference gradient.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DVector<f64> {
    let mut y = x.to_vec();
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        }),
    )
}

/// Second-order central-difference Hessian (symmetric by construction).
pub fn central_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut y = x.to_vec();
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// The annulus-like domain `Ω = B_{r₂} \ Ω̄₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub inner: ConvexBody,
    pub outer_radius: f64,
}

impl DomainSpec {
    pub fn new(inner: ConvexBody, outer_radius: f64) -> Result<Self> {
        let domain = Self {
            inner,
            outer_radius,
        };
        domain.validate()?;
        Ok(domain)
    }

    /// Centered ball of radius `r1` inside `B_{r2}`: the domain the solver meshes.
    pub fn annulus(dim: usize, r1: f64, r2: f64) -> Result<Self> {
        Self::new(ConvexBody::ball(dim, r1)?, r2)
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        let r_in = self.inner.max_boundary_radius();
        if !(self.outer_radius.is_finite() && r_in < self.outer_radius) {
            return Err(Error::InvalidDomain(format!(
                "inner body reaches radius {r_in}, which is not strictly inside the outer radius {}",
                self.outer_radius
            )));
        }
        Ok(())
    }
}

/// Sampling density for [`certify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub bulk: usize,
    pub boundary: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            bulk: 10_000,
            boundary: 1_000,
        }
    }
}

/// Outcome of one sampled property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    /// Worst value of the checked quantity over the samples.
    pub worst: f64,
    /// Sample point attaining `worst`.
    pub witness: Vec<f64>,
}

/// Numerically certified constants of the weight `ψ₀` on a sampled domain.
///
/// `rho` and `c_prime` are sample minima: refinement can only lower them up
/// to discretization error, so they are lower-confidence certificates rather
/// than proofs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryCertificate {
    pub rho: f64,
    pub c_prime: f64,
    pub d0: f64,
    pub d1: f64,
    /// Fraction of sampled outer-boundary points with `∂νψ₀ ≥ 0`.
    pub gamma_fraction: f64,
    pub dim: usize,
    pub checks: Vec<PropertyCheck>,
}

impl GeometryCertificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `γ` covers every sampled point of the outer boundary.
    pub fn gamma_is_full(&self) -> bool {
        self.gamma_fraction == 1.0
    }

    pub fn psi0_min(&self) -> f64 {
        self.d0 * self.d0
    }

    pub fn psi0_max(&self) -> f64 {
        self.d1 * self.d1
    }
}

fn unit_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count.max(4))
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count.max(4) as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            // Axis directions plus a Fibonacci lattice on the sphere.
            let mut dirs: Vec<Vec<f64>> = (0..3)
                .flat_map(|i| {
                    [1.0, -1.0].into_iter().map(move |s| {
                        let mut v = vec![0.0; 3];
                        v[i] = s;
                        v
                    })
                })
                .collect();
            let n = count.max(8);
            let golden = PI * (3.0 - 5f64.sqrt());
            for k in 0..n {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                let rho = (1.0 - z * z).sqrt();
                let a = golden * k as f64;
                dirs.push(vec![rho * a.cos(), rho * a.sin(), z]);
            }
            dirs
        }
    }
}

#[derive(Clone)]
struct Extreme {
    value: f64,
    point: Vec<f64>,
}

impl Extreme {
    fn min_of(a: Extreme, b: Extreme) -> Extreme {
        if b.value < a.value { b } else { a }
    }
    fn max_of(a: Extreme, b: Extreme) -> Extreme {
        if b.value > a.value { b } else { a }
    }
    fn new(value: f64, point: &[f64]) -> Self {
        Self {
            value,
            point: point.to_vec(),
        }
    }
}

struct BulkStats {
    min_eig: Extreme,
    min_grad: Extreme,
    min_mu: Extreme,
    max_mu: Extreme,
}

/// Certifies the weight properties on a sampled closure of the domain.
///
/// Bulk samples lie on rays from the inner boundary point to the outer circle;
/// inner-boundary samples are the ray origins. A failing property yields a
/// certificate with `pass = false` and the worst witness; a non-positive
/// convexity constant is an error.
pub fn certify(domain: &DomainSpec, sampling: Sampling) -> Result<GeometryCertificate> {
    domain.validate()?;
    let body = &domain.inner;
    let dim = domain.dim();
    let r2 = domain.outer_radius;

    let boundary_dirs = unit_directions(dim, sampling.boundary);
    let bulk_dirs = unit_directions(dim, (sampling.bulk as f64).sqrt().ceil() as usize);
    let n_rad = (sampling.bulk / bulk_dirs.len()).max(2);

    let bulk = bulk_dirs
        .par_iter()
        .map(|omega| -> Result<BulkStats> {
            let start = body.boundary_point(omega);
            let r_start = norm(&start);
            let mut stats: Option<BulkStats> = None;
            for k in 0..n_rad {
                let r = r_start + (r2 - r_start) * k as f64 / (n_rad - 1) as f64;
                let x: Vec<f64> = if k == 0 {
                    start.clone()
                } else {
                    omega.iter().map(|w| w * r).collect()
                };
                let hess = body.psi0_hessian(&x)?;
                let eig = SymmetricEigen::new(hess).eigenvalues.min();
                let grad = body.psi0_gradient(&x)?.norm();
                let mu = body.gauge(&x)?;
                let cur = BulkStats {
                    min_eig: Extreme::new(eig, &x),
                    min_grad: Extreme::new(grad, &x),
                    min_mu: Extreme::new(mu, &x),
                    max_mu: Extreme::new(mu, &x),
                };
                stats = Some(match stats {
                    None => cur,
                    Some(s) => merge_bulk(s, cur),
                });
            }
            Ok(stats.expect("at least two radial samples"))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .reduce(merge_bulk)
        .expect("at least one direction");

    let mut unit_dev = Extreme::new(f64::MIN, &[]);
    let mut max_dnu = Extreme::new(f64::MIN, &[]);
    let mut min_abs_dnu = Extreme::new(f64::MAX, &[]);
    for omega in &boundary_dirs {
        let x = body.boundary_point(omega);
        let dev = (body.psi0(&x)? - 1.0).abs();
        unit_dev = Extreme::max_of(unit_dev, Extreme::new(dev, &x));
        let grad = body.psi0_gradient(&x)?;
        // ν = -∇ψ₀/|∇ψ₀| on Γ¹, so ∂νψ₀ = -|∇ψ₀|.
        let dnu = -grad.norm();
        max_dnu = Extreme::max_of(max_dnu, Extreme::new(dnu, &x));
        min_abs_dnu = Extreme::min_of(min_abs_dnu, Extreme::new(dnu.abs(), &x));
    }

    let mut in_gamma = 0usize;
    for omega in &boundary_dirs {
        let x: Vec<f64> = omega.iter().map(|w| w * r2).collect();
        let grad = body.psi0_gradient(&x)?;
        let dnu: f64 = grad.iter().zip(omega).map(|(g, w)| g * w).sum();
        if dnu >= 0.0 {
            in_gamma += 1;
        }
    }

    let rho = 0.5 * bulk.min_eig.value;
    if !(rho > 0.0) {
        return Err(Error::NotStronglyConvex {
            rho,
            witness: bulk.min_eig.point,
        });
    }

    let checks = vec![
        PropertyCheck {
            name: "smoothness".into(),
            pass: true,
            worst: 0.0,
            witness: vec![],
        },
        PropertyCheck {
            name: "unit_level_on_inner_boundary".into(),
            pass: unit_dev.value <= UNIT_LEVEL_TOL,
            worst: unit_dev.value,
            witness: unit_dev.point,
        },
        PropertyCheck {
            name: "nonvanishing_gradient".into(),
            pass: bulk.min_grad.value > 0.0,
            worst: bulk.min_grad.value,
            witness: bulk.min_grad.point,
        },
        PropertyCheck {
            name: "strong_convexity".into(),
            pass: rho > 0.0,
            worst: rho,
            witness: bulk.min_eig.point.clone(),
        },
        PropertyCheck {
            name: "negative_normal_derivative_on_inner_boundary".into(),
            pass: max_dnu.value < 0.0,
            worst: max_dnu.value,
            witness: max_dnu.point,
        },
    ];

    Ok(GeometryCertificate {
        rho,
        c_prime: min_abs_dnu.value,
        d0: bulk.min_mu.value,
        d1: bulk.max_mu.value,
        gamma_fraction: in_gamma as f64 / boundary_dirs.len() as f64,
        dim,
        checks,
    })
}

fn merge_bulk(a: BulkStats, b: BulkStats) -> BulkStats {
    BulkStats {
        min_eig: Extreme::min_of(a.min_eig, b.min_eig),
        min_grad: Extreme::min_of(a.min_grad, b.min_grad),
        min_mu: Extreme::min_of(a.min_mu, b.min_mu),
        max_mu: Extreme::max_of(a.max_mu, b.max_mu),
    }
}

/// Basis in which a surface Hessian is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianBasis {
    /// Coordinate basis `(∂θ, ∂φ)` of the spherical parameterization.
    Coordinate,
    /// Orthonormal frame `(∂θ / sin φ, ∂φ)`.
    Frame,
}

const COUNTEREXAMPLE_SOURCE: [f64; 3] = [0.0, 0.0, 2.0];

/// Spherical parameterization `Φ(θ, φ) = (cos θ sin φ, sin θ sin φ, cos φ)` of the unit sphere.
pub fn sphere_point(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.cos() * phi.sin(), theta.sin() * phi.sin(), phi.cos())
}

/// Riemannian Hessian on the unit sphere of `ζ(x) = |x − x₀|²` with
/// `x₀ = (0, 0, 2)`, computed as `∂ᵢ∂ⱼf − Γᵏᵢⱼ∂ₖf` for `f = ζ∘Φ` under the
/// round metric `g = diag(sin²φ, 1)`.
pub fn counterexample_surface_hessian(theta: f64, phi: f64) -> Result<Matrix2<f64>> {
    let (s, c) = phi.sin_cos();
    if s.abs() < 1e-12 {
        return Err(Error::SingularChart { phi, sin_phi: s });
    }
    let (st, ct) = theta.sin_cos();
    let x0 = Vector3::from(COUNTEREXAMPLE_SOURCE);
    let x = sphere_point(theta, phi);
    let grad_zeta = 2.0 * (x - x0);
    // ∇²ζ = 2𝕀, so the pullback of the ambient Hessian is 2 g.
    let d_theta = Vector3::new(-st * s, ct * s, 0.0);
    let d_phi = Vector3::new(ct * c, st * c, -s);
    let d_tt = Vector3::new(-ct * s, -st * s, 0.0);
    let d_tp = Vector3::new(-st * c, ct * c, 0.0);
    let d_pp = Vector3::new(-ct * s, -st * s, -c);

    let tangents = [d_theta, d_phi];
    let second = [[d_tt, d_tp], [d_tp, d_pp]];
    let df = [grad_zeta.dot(&d_theta), grad_zeta.dot(&d_phi)];

    // Christoffel symbols Γᵏᵢⱼ of g = diag(sin²φ, 1), index 0 = θ, 1 = φ.
    let mut christoffel = [[[0.0; 2]; 2]; 2];
    christoffel[0][0][1] = c / s;
    christoffel[0][1][0] = c / s;
    christoffel[1][0][0] = -s * c;

    let mut hess = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let ddf = 2.0 * tangents[i].dot(&tangents[j]) + grad_zeta.dot(&second[i][j]);
            let corr: f64 = (0..2).map(|k| christoffel[k][i][j] * df[k]).sum();
            hess[(i, j)] = ddf - corr;
        }
    }
    Ok(hess)
}

/// Surface Hessian in the requested basis.
pub fn counterexample_hessian_in(basis: HessianBasis, theta: f64, phi: f64) -> Result<Matrix2<f64>> {
    let mut h = counterexample_surface_hessian(theta, phi)?;
    if basis == HessianBasis::Frame {
        let s = phi.sin();
        h[(0, 0)] /= s * s;
        h[(0, 1)] /= s;
        h[(1, 0)] /= s;
    }
    Ok(h)
}

/// Spectral-norm distance `‖H − 2𝕀‖₂` of a symmetric 2×2 matrix.
pub fn spectral_distance_to_2i(h: &Matrix2<f64>) -> f64 {
    let diff = h - Matrix2::identity() * 2.0;
    diff.symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_disk_profile(n: usize) -> ConvexBody {
        ConvexBody::RadialProfile(RadialProfile::new(vec![1.0; n]).unwrap())
    }

    #[test]
    fn gauge_of_ball_and_ellipsoid() {
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        assert_eq!(ball.gauge(&[0.5, 0.0]).unwrap(), 0.5);
        let ell = ConvexBody::ellipsoid(vec![2.0, 1.0]).unwrap();
        assert_eq!(ell.gauge(&[2.0, 0.0]).unwrap(), 1.0);
    }

    /// Bisection on λ against the inscribed polygon of the samples.
    fn polygon_gauge(samples: &[f64], x: &[f64]) -> f64 {
        let n = samples.len();
        let inside = |p: &[f64]| {
            let vert = |k: usize| {
                let t = 2.0 * PI * (k % n) as f64 / n as f64;
                (samples[k % n] * t.cos(), samples[k % n] * t.sin())
            };
            (0..n).all(|k| {
                let (ax, ay) = vert(k);
                let (bx, by) = vert(k + 1);
                (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) >= -1e-15
            })
        };
        let (mut lo, mut hi) = (1e-9, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let scaled = [x[0] / mid, x[1] / mid];
            if inside(&scaled) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn radial_profile_gauge_matches_bisection_oracle() {
        let samples = vec![1.0; 64];
        let body = unit_disk_profile(64);
        let x = [0.0, 0.25];
        let oracle = polygon_gauge(&samples, &x);
        assert!((oracle - 0.25).abs() < 1e-6, "oracle {oracle}");
        assert!((body.gauge(&x).unwrap() - oracle).abs() < 1e-6);
    }

    #[test]
    fn nonpositive_profile_rejected() {
        let mut s = vec![1.0; 16];
        s[3] = 0.0;
        assert!(matches!(RadialProfile::new(s), Err(Error::InvalidBody(_))));
        let s = vec![1.0, -0.5, 1.0, 1.0];
        assert!(matches!(RadialProfile::new(s), Err(Error::InvalidBody(_))));
    }

    #[test]
    fn tiny_fd_step_is_a_config_error() {
        assert!(matches!(
            RadialProfile::with_step(vec![1.0; 16], 1e-12),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn psi0_derivatives_of_analytic_bodies() {
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        assert_eq!(ball.psi0(&[1.0, 0.0]).unwrap(), 1.0);
        let g = ball.psi0_gradient(&[1.0, 0.0]).unwrap();
        assert_eq!((g[0], g[1]), (2.0, 0.0));
        assert_eq!(ball.psi0_hessian(&[1.0, 0.0]).unwrap(), DMatrix::identity(2, 2) * 2.0);

        let ell = ConvexBody::ellipsoid(vec![2.0, 1.0]).unwrap();
        assert_eq!(ell.psi0(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ell.psi0_gradient(&[0.0, 0.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn radial_profile_hessian_matches_ball() {
        let body = unit_disk_profile(64);
        let h = body.psi0_hessian(&[0.5, 0.5]).unwrap();
        let diff = (h - DMatrix::identity(2, 2) * 2.0).abs().max();
        assert!(diff < 1e-4, "diff {diff}");
    }

    #[test]
    fn elliptic_profile_interpolant_reproduces_ellipse() {
        let (a, b) = (1.0, 0.5);
        let p = RadialProfile::from_fn(128, |t| {
            1.0 / ((t.cos() / a).powi(2) + (t.sin() / b).powi(2)).sqrt()
        })
        .unwrap();
        let body = ConvexBody::RadialProfile(p);
        let ell = ConvexBody::ellipsoid(vec![a, b]).unwrap();
        for x in [[0.3, 0.7], [-1.1, 0.2], [0.05, -0.9]] {
            let err = (body.psi0(&x).unwrap() - ell.psi0(&x).unwrap()).abs();
            assert!(err < 1e-9, "err {err}");
        }
    }

    #[test]
    fn finite_difference_hessian_is_second_order() {
        // μ(x) = |x| for the unit ball is not polynomial, so truncation error is visible.
        let ball = ConvexBody::ball(2, 1.0).unwrap();
        let x = [0.8, 0.6];
        let r = norm(&x);
        let exact = DMatrix::from_fn(2, 2, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            (delta - x[i] * x[j] / (r * r)) / r
        });
        let err = |h: f64| {
            (central_hessian(|y| ball.gauge_unchecked(y), &x, h) - &exact)
                .abs()
                .max()
        };
        let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
        let p1 = (e1 / e2).log2();
        let p2 = (e2 / e3).log2();
        assert!(p1 >= 1.9 && p2 >= 1.9, "orders {p1} {p2}");
    }

    #[test]
    fn certify_unit_ball_annulus() {
        let domain = DomainSpec::new(ConvexBody::ball(2, 1.0).unwrap(), 2.0).unwrap();
        let cert = certify(&domain, Sampling::default()).unwrap();
        assert!((cert.rho - 1.0).abs() < 1e-10);
        assert!((cert.c_prime - 2.0).abs() < 1e-10);
        assert!((cert.d0 - 1.0).abs() < 1e-12);
        assert!((cert.d1 - 2.0).abs() < 1e-12);
        assert!(cert.gamma_is_full());
        assert!(cert.passed());
    }

    #[test]
    fn certify_ellipse_convexity_constant() {
        let domain = DomainSpec::new(ConvexBody::ellipsoid(vec![1.0, 0.5]).unwrap(), 3.0).unwrap();
        let cert = certify(&domain, Sampling::default()).unwrap();
        // Eigenvalues of diag(2/aᵢ²) are {2, 8}.
        assert!((cert.rho - 1.0).abs() < 1e-12);
        assert!(cert.passed());
    }

    #[test]
    fn inner_body_must_fit_inside() {
        let err = DomainSpec::new(ConvexBody::ball(2, 2.0).unwrap(), 2.0).unwrap_err();
        assert!(matches!(err, Error::InvalidDomain(_)));
    }

    #[test]
    fn non_convex_profile_fails_certification() {
        // A deep dent makes the level set non-convex.
        let p = RadialProfile::from_fn(64, |t| 1.0 + 0.3 * (4.0 * t).cos()).unwrap();
        let domain = DomainSpec::new(ConvexBody::RadialProfile(p), 3.0).unwrap();
        assert!(matches!(
            certify(&domain, Sampling { bulk: 2000, boundary: 200 }),
            Err(Error::NotStronglyConvex { .. })
        ));
    }

    #[test]
    fn counterexample_matches_closed_form() {
        let h = counterexample_surface_hessian(0.3, PI / 3.0).unwrap();
        assert!((h[(0, 0)] - 1.5).abs() < 1e-12);
        assert!((h[(1, 1)] - 2.0).abs() < 1e-12);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
        assert!(h[(0, 1)].abs() < 1e-14);

        let h = counterexample_surface_hessian(1.0, PI / 2.0).unwrap();
        assert!(h.abs().max() < 1e-14);
        assert!((spectral_distance_to_2i(&h) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn counterexample_rejects_poles() {
        assert!(matches!(
            counterexample_surface_hessian(0.0, 0.0),
            Err(Error::SingularChart { .. })
        ));
        assert!(matches!(
            counterexample_surface_hessian(0.0, PI),
            Err(Error::SingularChart { .. })
        ));
    }

    #[test]
    fn frame_basis_rescales_theta_entry() {
        let phi = 1.1;
        let h = counterexample_hessian_in(HessianBasis::Frame, 0.2, phi).unwrap();
        assert!((h[(0, 0)] - 4.0 * phi.cos()).abs() < 1e-12);
        assert!((h[(1, 1)] - 4.0 * phi.cos()).abs() < 1e-12);
    }
}
