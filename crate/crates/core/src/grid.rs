//! Structured discretization of the annulus `r₁ < r < r₂` (polar, periodic in
//! θ) or of the interval `(r₁, r₂)` in 1D, with quadrature weights, boundary
//! index sets and one-sided normal-derivative stencils.
//!
//! Node `(i, j)` sits at radius `r₁ + iΔr` and angle `jΔθ`; ring `0` is the
//! dynamic boundary `Γ¹` and ring `nr − 1` is the Dirichlet boundary `Γ⁰`.
//! In 1D there is a single "angle" and `Δθ` is taken as 1 so that every
//! measure reduces to `dr` in the bulk and counting measure on the boundary.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default safety factor applied to the CFL bound.
pub const DEFAULT_CFL_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `Γ¹`, the dynamic boundary at `r₁`.
    Inner,
    /// `Γ⁰`, the Dirichlet boundary at `r₂`.
    Outer,
}

/// Spatial part of a grid description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub nr: usize,
    #[serde(default = "default_ntheta")]
    pub ntheta: usize,
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    /// Angular sub-interval `[a, b]` (radians) of the outer circle designating `γ`.
    #[serde(default)]
    pub gamma_arc: Option<[f64; 2]>,
}

fn default_ntheta() -> usize {
    1
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_SAFETY
}

impl GridConfig {
    pub fn one_d(nr: usize, r1: f64, r2: f64) -> Self {
        Self {
            dim: 1,
            nr,
            ntheta: 1,
            r1,
            r2,
            cfl_safety: DEFAULT_CFL_SAFETY,
            gamma_arc: None,
        }
    }

    pub fn annulus(nr: usize, ntheta: usize, r1: f64, r2: f64) -> Self {
        Self {
            dim: 2,
            nr,
            ntheta,
            r1,
            r2,
            cfl_safety: DEFAULT_CFL_SAFETY,
            gamma_arc: None,
        }
    }
}

/// Uniform time levels `t₀ + nΔt`, `n = 0..=nt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
}

impl TimeAxis {
    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.nt)
    }

    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    /// Trapezoidal weights over the levels.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt; self.nt + 1];
        w[0] *= 0.5;
        w[self.nt] *= 0.5;
        w
    }
}

/// Requested time window; `nt = None` picks the coarsest CFL-admissible step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_start: f64,
    pub t_end: f64,
    pub nt: Option<usize>,
}

impl TimeSpec {
    pub fn forward(t: f64) -> Self {
        Self {
            t_start: 0.0,
            t_end: t,
            nt: None,
        }
    }

    /// Symmetric window `(−T, T)`.
    pub fn extended(t: f64) -> Self {
        Self {
            t_start: -t,
            t_end: t,
            nt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub nr: usize,
    pub ntheta: usize,
    pub r1: f64,
    pub r2: f64,
    pub dr: f64,
    pub dtheta: f64,
    pub cfl_safety: f64,
    pub time: TimeAxis,
    pub gamma_arc: Option<[f64; 2]>,
    gamma: Vec<usize>,
}

impl Grid {
    /// Builds the grid and checks the CFL bound for speeds `√d`, `√δ`.
    pub fn build(cfg: &GridConfig, d: f64, delta: f64, time: TimeSpec) -> Result<Self> {
        if !(cfg.dim == 1 || cfg.dim == 2) {
            return Err(Error::Config(format!("grid.dim must be 1 or 2, got {}", cfg.dim)));
        }
        if cfg.nr < 8 {
            return Err(Error::Config(format!("grid.nr must be >= 8, got {}", cfg.nr)));
        }
        if cfg.dim == 2 && cfg.ntheta < 8 {
            return Err(Error::Config(format!("grid.ntheta must be >= 8, got {}", cfg.ntheta)));
        }
        if !(cfg.r1 > 0.0 && cfg.r1 < cfg.r2 && cfg.r2.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < r1 < r2, got r1 = {}, r2 = {}",
                cfg.r1, cfg.r2
            )));
        }
        if !(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety must lie in (0, 1], got {}", cfg.cfl_safety)));
        }
        if !(d > 0.0 && delta > 0.0) {
            return Err(Error::Config(format!("speeds must be positive: d = {d}, delta = {delta}")));
        }
        let span = time.t_end - time.t_start;
        if !(span > 0.0) {
            return Err(Error::Config(format!(
                "time window must have positive length, got [{}, {}]",
                time.t_start, time.t_end
            )));
        }

        let ntheta = if cfg.dim == 1 { 1 } else { cfg.ntheta };
        let dtheta = if cfg.dim == 1 { 1.0 } else { 2.0 * PI / ntheta as f64 };
        let dr = (cfg.r2 - cfg.r1) / (cfg.nr - 1) as f64;
        let mut grid = Self {
            dim: cfg.dim,
            nr: cfg.nr,
            ntheta,
            r1: cfg.r1,
            r2: cfg.r2,
            dr,
            dtheta,
            cfl_safety: cfg.cfl_safety,
            time: TimeAxis {
                t0: time.t_start,
                dt: 0.0,
                nt: 0,
            },
            gamma_arc: cfg.gamma_arc,
            gamma: Vec::new(),
        };
        let dt_max = grid.cfl_dt_max(d, delta);
        let nt = match time.nt {
            Some(nt) => {
                let dt = span / nt.max(1) as f64;
                if dt > dt_max * (1.0 + 1e-12) {
                    return Err(Error::Cfl { dt, dt_max });
                }
                nt.max(1)
            }
            None => (span / dt_max - 1e-9).ceil().max(1.0) as usize,
        };
        grid.time = TimeAxis {
            t0: time.t_start,
            dt: span / nt as f64,
            nt,
        };
        grid.gamma = grid.compute_gamma();
        Ok(grid)
    }

    /// Same spatial grid on a different time axis.
    pub fn with_time(&self, d: f64, delta: f64, time: TimeSpec) -> Result<Self> {
        let cfg = GridConfig {
            dim: self.dim,
            nr: self.nr,
            ntheta: self.ntheta,
            r1: self.r1,
            r2: self.r2,
            cfl_safety: self.cfl_safety,
            gamma_arc: self.gamma_arc,
        };
        Self::build(&cfg, d, delta, time)
    }

    /// Same spatial grid with an explicitly given uniform time axis.
    pub fn with_axis(&self, axis: TimeAxis) -> Self {
        Self {
            time: axis,
            ..self.clone()
        }
    }

    pub fn cfl_dt_max(&self, d: f64, delta: f64) -> f64 {
        if self.dim == 1 {
            self.cfl_safety * self.dr / d.sqrt()
        } else {
            self.cfl_safety * self.dr.min(self.r1 * self.dtheta) / d.max(delta).sqrt()
        }
    }

    fn compute_gamma(&self) -> Vec<usize> {
        // ∂νψ₀ = 2r₂/r₁² > 0 on the whole outer circle for the centered ball,
        // so γ is cut out by the arc alone.
        (0..self.ntheta)
            .filter(|&j| match (self.dim, self.gamma_arc) {
                (1, _) | (_, None) => true,
                (_, Some([a, b])) => {
                    let t = self.theta(j);
                    let span = (b - a).rem_euclid(2.0 * PI);
                    if b - a >= 2.0 * PI {
                        return true;
                    }
                    (t - a).rem_euclid(2.0 * PI) <= span + 1e-12
                }
            })
            .collect()
    }

    /// Angular indices of the outer-ring nodes forming `γ`.
    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j
    }

    pub fn n_nodes(&self) -> usize {
        self.nr * self.ntheta
    }

    /// Nodes carrying unknowns: every ring but the Dirichlet one.
    pub fn n_active(&self) -> usize {
        (self.nr - 1) * self.ntheta
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i == self.nr - 1 {
            self.r2
        } else {
            self.r1 + i as f64 * self.dr
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            j as f64 * self.dtheta
        }
    }

    /// Cartesian coordinates of node `(i, j)` (a single coordinate in 1D).
    pub fn coords(&self, i: usize, j: usize) -> Vec<f64> {
        let r = self.radius(i);
        if self.dim == 1 {
            vec![r]
        } else {
            let t = self.theta(j);
            vec![r * t.cos(), r * t.sin()]
        }
    }

    /// Radial trapezoid weight `∫ dr` share of ring `i`.
    pub fn radial_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nr - 1 {
            0.5 * self.dr
        } else {
            self.dr
        }
    }

    /// Radial metric factor: `r` in 2D, 1 in 1D.
    pub fn metric(&self, r: f64) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            r
        }
    }

    /// Bulk quadrature weight of a node on ring `i` (`r dr dθ` measure).
    pub fn bulk_weight(&self, i: usize) -> f64 {
        self.radial_weight(i) * self.metric(self.radius(i)) * self.dtheta
    }

    /// Surface quadrature weight of one node of the given boundary (`r dθ`, or 1 in 1D).
    pub fn surface_weight(&self, which: Boundary) -> f64 {
        let r = match which {
            Boundary::Inner => self.r1,
            Boundary::Outer => self.r2,
        };
        self.metric(r) * self.dtheta
    }

    pub fn quadrature_bulk(&self) -> Vec<f64> {
        (0..self.nr)
            .flat_map(|i| std::iter::repeat_n(self.bulk_weight(i), self.ntheta))
            .collect()
    }

    pub fn quadrature_surface(&self, which: Boundary) -> Vec<f64> {
        vec![self.surface_weight(which); self.ntheta]
    }

    /// Coefficient `r_{i+½}Δθ/Δr` of the radial edge between rings `i` and `i + 1`.
    pub fn radial_edge(&self, i: usize) -> f64 {
        let r_half = 0.5 * (self.radius(i) + self.radius(i + 1));
        self.metric(r_half) * self.dtheta / self.dr
    }

    /// Coefficient `w_i/(r_iΔθ)` of the angular edges on ring `i` (2D only).
    pub fn angular_edge(&self, i: usize) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            self.radial_weight(i) / (self.radius(i) * self.dtheta)
        }
    }

    /// Coefficient `1/(r₁Δθ)` of the angular edges of the surface `Γ¹`.
    pub fn surface_edge(&self) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            1.0 / (self.r1 * self.dtheta)
        }
    }

    /// Outward (out of `Ω`) normal derivative on a boundary ring by the
    /// one-sided three-point stencil.
    pub fn normal_derivative(&self, field: &[f64], which: Boundary) -> Vec<f64> {
        let h2 = 2.0 * self.dr;
        (0..self.ntheta)
            .map(|j| match which {
                Boundary::Inner => {
                    let (u0, u1, u2) = (field[self.idx(0, j)], field[self.idx(1, j)], field[self.idx(2, j)]);
                    -(-3.0 * u0 + 4.0 * u1 - u2) / h2
                }
                Boundary::Outer => {
                    let n = self.nr - 1;
                    let (u0, u1, u2) = (
                        field[self.idx(n, j)],
                        field[self.idx(n - 1, j)],
                        field[self.idx(n - 2, j)],
                    );
                    (3.0 * u0 - 4.0 * u1 + u2) / h2
                }
            })
            .collect()
    }

    pub fn integrate_bulk(&self, field: &[f64]) -> f64 {
        (0..self.nr)
            .map(|i| self.bulk_weight(i) * field[i * self.ntheta..(i + 1) * self.ntheta].iter().sum::<f64>())
            .sum()
    }

    pub fn integrate_surface(&self, values: &[f64], which: Boundary) -> f64 {
        self.surface_weight(which) * values.iter().sum::<f64>()
    }

    /// Samples a function of `(r, θ)` on every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> BulkField {
        let mut v = Vec::with_capacity(self.n_nodes());
        for i in 0..self.nr {
            let r = self.radius(i);
            for j in 0..self.ntheta {
                v.push(f(r, self.theta(j)));
            }
        }
        BulkField(v)
    }

    /// Writes node coordinates and values as CSV.
    pub fn write_field_csv(&self, field: &[f64], out: &mut impl Write) -> Result<()> {
        if self.dim == 1 {
            writeln!(out, "r,value")?;
        } else {
            writeln!(out, "r,theta,x,y,value")?;
        }
        for i in 0..self.nr {
            for j in 0..self.ntheta {
                let v = field[self.idx(i, j)];
                if self.dim == 1 {
                    writeln!(out, "{:.12e},{:.12e}", self.radius(i), v)?;
                } else {
                    let c = self.coords(i, j);
                    writeln!(
                        out,
                        "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                        self.radius(i),
                        self.theta(j),
                        c[0],
                        c[1],
                        v
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Values on every node of the grid, one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkField(pub Vec<f64>);

/// Values on the nodes of `Γ¹`, one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceField(pub Vec<f64>);

impl BulkField {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.n_nodes()])
    }

    /// Trace on the inner ring.
    pub fn trace(&self, grid: &Grid) -> SurfaceField {
        SurfaceField(self.0[..grid.ntheta].to_vec())
    }
}

impl SurfaceField {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.ntheta])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annulus(n: usize) -> Grid {
        Grid::build(&GridConfig::annulus(n, n, 1.0, 2.0), 1.0, 2.0, TimeSpec::forward(1.0)).unwrap()
    }

    #[test]
    fn bulk_quadrature_integrates_constants() {
        let g = annulus(128);
        let area: f64 = g.quadrature_bulk().iter().sum();
        assert!((area - 3.0 * PI).abs() < 1e-3);
    }

    #[test]
    fn surface_integral_of_r_squared() {
        let g = annulus(32);
        let f = g.sample(|r, _| r * r);
        let trace = BulkField(f.0).trace(&g);
        assert!((g.integrate_surface(&trace.0, Boundary::Inner) - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn normal_derivative_sign_convention() {
        let g = annulus(16);
        let f = g.sample(|r, _| r);
        for v in g.normal_derivative(&f.0, Boundary::Outer) {
            assert!((v - 1.0).abs() < 1e-12);
        }
        for v in g.normal_derivative(&f.0, Boundary::Inner) {
            assert!((v + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_derivative_is_second_order() {
        let err = |n: usize| {
            let g = annulus(n);
            let f = g.sample(|r, _| (2.0 * r).sin());
            let exact = 2.0 * (4.0f64).cos();
            g.normal_derivative(&f.0, Boundary::Outer)
                .iter()
                .map(|v| (v - exact).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(16), err(31), err(61));
        assert!((e1 / e2).log2() > 1.9 && (e2 / e3).log2() > 1.9);
    }

    #[test]
    fn quadrature_is_second_order() {
        let err = |n: usize| {
            let g = annulus(n);
            let f = g.sample(|r, t| r.powi(3) * (1.0 + t.cos()));
            // ∫∫ r³(1 + cos θ) r dr dθ = 2π (r₂⁵ − r₁⁵)/5.
            (g.integrate_bulk(&f.0) - 2.0 * PI * 31.0 / 5.0).abs()
        };
        let (e1, e2) = (err(16), err(31));
        assert!((e1 / e2).log2() > 1.9);
    }

    #[test]
    fn cfl_violation_reports_admissible_step() {
        let cfg = GridConfig::annulus(16, 16, 1.0, 2.0);
        let err = Grid::build(
            &cfg,
            1.0,
            2.0,
            TimeSpec {
                t_start: 0.0,
                t_end: 1.0,
                nt: Some(2),
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Cfl { .. }));
    }

    #[test]
    fn gamma_defaults_to_full_circle_and_respects_arc() {
        let g = annulus(16);
        assert_eq!(g.gamma().len(), 16);
        let mut cfg = GridConfig::annulus(16, 16, 1.0, 2.0);
        cfg.gamma_arc = Some([0.0, PI]);
        let g = Grid::build(&cfg, 1.0, 2.0, TimeSpec::forward(1.0)).unwrap();
        assert_eq!(g.gamma(), &(0..=8).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn time_axis_covers_window() {
        let g = annulus(16);
        assert!((g.time.nt as f64 * g.time.dt - 1.0).abs() < 1e-14);
        assert!(g.time.dt <= g.cfl_dt_max(1.0, 2.0));
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid::build(&GridConfig::annulus(4, 16, 1.0, 2.0), 1.0, 2.0, TimeSpec::forward(1.0)).is_err());
        assert!(Grid::build(&GridConfig::one_d(16, 2.0, 1.0), 1.0, 2.0, TimeSpec::forward(1.0)).is_err());
    }
}
