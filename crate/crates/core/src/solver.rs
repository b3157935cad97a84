//! Explicit leapfrog solver for the bulk wave equation coupled to the dynamic
//! boundary condition on `Γ¹` and a Dirichlet condition on `Γ⁰`.
//!
//! The semi-discrete system is `M ü + K u = M_b f + M_s g` with a lumped mass
//! `M` (bulk trapezoid weights plus the surface weight on the inner ring) and
//! a symmetric stiffness `K` assembled from the discrete energy
//!
//! ```text
//! ½ d Σ r_{i+½}Δθ/Δr (u_{i+1,j} − u_{i,j})² + ½ d Σ w_i/(r_iΔθ) (u_{i,j+1} − u_{i,j})²
//!   + ½ δ Σ 1/(r₁Δθ) (u_{0,j+1} − u_{0,j})² + ½ Σ (m_b q_Ω + m_s q_Γ) u²
//! ```
//!
//! Ring `0` stores both `y` on `Γ¹` and `y_Γ`, so the trace coupling holds by
//! construction. The half-cell bulk mass on ring `0` makes the two-point radial
//! difference a second-order approximation of `d ∂νy` in the surface equation.

use crate::error::{Error, Result};
use crate::grid::{Boundary, BulkField, Grid, SurfaceField, TimeAxis};

/// Max-norm beyond which a run is declared unstable.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// PDE coefficients: speeds squared and bounded potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub d: f64,
    pub delta: f64,
    pub q_bulk: BulkField,
    pub q_surf: SurfaceField,
}

impl Coefficients {
    pub fn constant(grid: &Grid, d: f64, delta: f64, q_bulk: f64, q_surf: f64) -> Self {
        Self {
            d,
            delta,
            q_bulk: BulkField(vec![q_bulk; grid.n_nodes()]),
            q_surf: SurfaceField(vec![q_surf; grid.ntheta]),
        }
    }

    pub fn free(grid: &Grid, d: f64, delta: f64) -> Self {
        Self::constant(grid, d, delta, 0.0, 0.0)
    }

    /// `(‖q_Ω‖∞, ‖q_Γ‖∞)`.
    pub fn potential_bounds(&self) -> (f64, f64) {
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (max(&self.q_bulk.0), max(&self.q_surf.0))
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.q_bulk.0.len() != grid.n_nodes() || self.q_surf.0.len() != grid.ntheta {
            return Err(Error::Dimension("potential fields do not match the grid".into()));
        }
        let (qb, qs) = self.potential_bounds();
        if !(qb.is_finite() && qs.is_finite()) {
            return Err(Error::NonFinite("potentials must be bounded".into()));
        }
        if !(self.d > 0.0 && self.delta > 0.0) {
            return Err(Error::Config(format!(
                "speeds must be positive, got d = {}, delta = {}",
                self.d, self.delta
            )));
        }
        Ok(())
    }
}

/// Source terms `f` (bulk) and `g` (on `Γ¹`) sampled level by level.
pub trait Forcing: Sync {
    /// Writes `f` on every node and `g` on the inner-ring nodes at level `n`, time `t`.
    fn eval(&self, n: usize, t: f64, f: &mut [f64], g: &mut [f64]);

    fn is_zero(&self) -> bool {
        false
    }
}

/// No sources.
pub struct NoForcing;

impl Forcing for NoForcing {
    fn eval(&self, _: usize, _: f64, f: &mut [f64], g: &mut [f64]) {
        f.fill(0.0);
        g.fill(0.0);
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Sources given as closures of `(r, θ, t)`.
pub struct FnForcing<F, G> {
    grid: Grid,
    f: F,
    g: G,
}

impl<F, G> FnForcing<F, G>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    /// `f(r, θ, t)` in the bulk and `g(θ, t)` on `Γ¹`.
    pub fn new(grid: &Grid, f: F, g: G) -> Self {
        Self {
            grid: grid.clone(),
            f,
            g,
        }
    }
}

impl<F, G> Forcing for FnForcing<F, G>
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
    G: Fn(f64, f64) -> f64 + Sync,
{
    fn eval(&self, _: usize, t: f64, f: &mut [f64], g: &mut [f64]) {
        let grid = &self.grid;
        for i in 0..grid.nr {
            let r = grid.radius(i);
            for j in 0..grid.ntheta {
                f[grid.idx(i, j)] = (self.f)(r, grid.theta(j), t);
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (self.g)(grid.theta(j), t);
        }
    }
}

/// Separable sources `f = a(x) r(t)`, `g = b(x) r(t)` with `r` sampled per level.
pub struct SeparableForcing<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub profile: &'a [f64],
}

impl Forcing for SeparableForcing<'_> {
    fn eval(&self, n: usize, _: f64, f: &mut [f64], g: &mut [f64]) {
        let r = self.profile[n];
        for (fi, ai) in f.iter_mut().zip(self.a) {
            *fi = ai * r;
        }
        for (gi, bi) in g.iter_mut().zip(self.b) {
            *gi = bi * r;
        }
    }
}

/// Dirichlet values on the outer ring per level.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Zero,
    /// `levels[n][j]` is the value at outer node `j`; must vanish off `γ`.
    Levels(Vec<Vec<f64>>),
}

impl BoundaryData {
    /// Control supported on `γ`: `values[n][k]` is the value at `grid.gamma()[k]`.
    pub fn on_gamma(grid: &Grid, values: &[Vec<f64>]) -> Result<Self> {
        if values.len() != grid.time.levels() {
            return Err(Error::Dimension(format!(
                "control has {} levels, grid has {}",
                values.len(),
                grid.time.levels()
            )));
        }
        let gamma = grid.gamma();
        let levels = values
            .iter()
            .map(|row| {
                if row.len() != gamma.len() {
                    return Err(Error::Dimension("control row does not match gamma".into()));
                }
                let mut ring = vec![0.0; grid.ntheta];
                for (k, &j) in gamma.iter().enumerate() {
                    ring[j] = row[k];
                }
                Ok(ring)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundaryData::Levels(levels))
    }

    fn write(&self, n: usize, ring: &mut [f64]) {
        match self {
            BoundaryData::Zero => ring.fill(0.0),
            BoundaryData::Levels(levels) => ring.copy_from_slice(&levels[n]),
        }
    }
}

/// Initial (or terminal) data `(y, y_Γ, ∂ₜy, ∂ₜy_Γ)`; the surface parts are ring 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub y0: BulkField,
    pub y1: BulkField,
}

impl InitialState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            y0: BulkField::zeros(grid),
            y1: BulkField::zeros(grid),
        }
    }

    /// Checks that the surface data are the traces of the bulk data.
    pub fn from_pairs(
        grid: &Grid,
        y0: BulkField,
        y0_surf: &SurfaceField,
        y1: BulkField,
        y1_surf: &SurfaceField,
    ) -> Result<Self> {
        let mismatch = |bulk: &BulkField, surf: &SurfaceField| {
            bulk.0[..grid.ntheta]
                .iter()
                .zip(&surf.0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let worst = mismatch(&y0, y0_surf).max(mismatch(&y1, y1_surf));
        if worst > 1e-12 {
            return Err(Error::Config(format!(
                "initial data violate the trace coupling y_Γ = y|Γ¹ (mismatch {worst:e})"
            )));
        }
        Ok(Self { y0, y1 })
    }
}

/// Discrete mass and stiffness of the coupled bulk/surface system.
pub struct WaveOperator<'a> {
    pub grid: &'a Grid,
    pub coeffs: &'a Coefficients,
    /// Lumped mass on active nodes.
    mass: Vec<f64>,
    /// Bulk share of the mass on every node (Dirichlet ring included).
    bulk_mass: Vec<f64>,
    surf_mass: f64,
}

impl<'a> WaveOperator<'a> {
    pub fn new(grid: &'a Grid, coeffs: &'a Coefficients) -> Result<Self> {
        coeffs.validate(grid)?;
        if grid.nr < 3 {
            return Err(Error::Config("need at least three rings".into()));
        }
        let surf_mass = grid.surface_weight(Boundary::Inner);
        let bulk_mass: Vec<f64> = grid.quadrature_bulk();
        let mut mass = bulk_mass[..grid.n_active()].to_vec();
        for m in mass.iter_mut().take(grid.ntheta) {
            *m += surf_mass;
        }
        Ok(Self {
            grid,
            coeffs,
            mass,
            bulk_mass,
            surf_mass,
        })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bulk_mass(&self) -> &[f64] {
        &self.bulk_mass
    }

    pub fn surf_mass(&self) -> f64 {
        self.surf_mass
    }

    /// `out = K u` on active nodes; `u` holds every node (Dirichlet ring included).
    pub fn apply_stiffness(&self, u: &[f64], out: &mut [f64], with_potential: bool) {
        let g = self.grid;
        let (d, delta) = (self.coeffs.d, self.coeffs.delta);
        let nth = g.ntheta;
        let last = g.nr - 2;
        for i in 0..=last {
            let e_in = if i > 0 { d * g.radial_edge(i - 1) } else { 0.0 };
            let e_out = d * g.radial_edge(i);
            let mut a = d * g.angular_edge(i);
            if i == 0 {
                a += delta * g.surface_edge();
            }
            for j in 0..nth {
                let k = i * nth + j;
                let uk = u[k];
                let mut acc = e_out * (uk - u[k + nth]);
                if i > 0 {
                    acc += e_in * (uk - u[k - nth]);
                }
                if a != 0.0 {
                    let jp = if j + 1 == nth { i * nth } else { k + 1 };
                    let jm = if j == 0 { i * nth + nth - 1 } else { k - 1 };
                    acc += a * (2.0 * uk - u[jp] - u[jm]);
                }
                if with_potential {
                    let mut q = self.bulk_mass[k] * self.coeffs.q_bulk.0[k];
                    if i == 0 {
                        q += self.surf_mass * self.coeffs.q_surf.0[j];
                    }
                    acc += q * uk;
                }
                out[k] = acc;
            }
        }
    }

    /// Transpose of the Dirichlet coupling: `ring = K_{Γ⁰,active} w`.
    pub fn dirichlet_coupling_transpose(&self, w: &[f64], ring: &mut [f64]) {
        let g = self.grid;
        let e = self.coeffs.d * g.radial_edge(g.nr - 2);
        let base = (g.nr - 2) * g.ntheta;
        for (j, r) in ring.iter_mut().enumerate() {
            *r = -e * w[base + j];
        }
    }

    /// Discrete energy `½∫(|∂ₜy|² + d|∇y|²) + ½∫_Γ¹(|∂ₜy_Γ|² + δ|∇_Γy_Γ|²)`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        let g = self.grid;
        let kinetic: f64 = (0..g.n_nodes())
            .map(|k| self.bulk_mass[k] * v[k] * v[k])
            .sum::<f64>()
            + self.surf_mass * v[..g.ntheta].iter().map(|x| x * x).sum::<f64>();
        0.5 * kinetic + 0.5 * self.stiffness_form(u, false)
    }

    /// `uᵀKu` over every edge of the grid, Dirichlet ring included.
    pub fn stiffness_form(&self, u: &[f64], with_potential: bool) -> f64 {
        let g = self.grid;
        let (d, delta) = (self.coeffs.d, self.coeffs.delta);
        let nth = g.ntheta;
        let mut total = 0.0;
        for i in 0..g.nr {
            let mut a = d * g.angular_edge(i);
            if i == 0 {
                a += delta * g.surface_edge();
            }
            for j in 0..nth {
                let k = i * nth + j;
                if i + 1 < g.nr {
                    let diff = u[k + nth] - u[k];
                    total += d * g.radial_edge(i) * diff * diff;
                }
                if a != 0.0 {
                    let jp = if j + 1 == nth { i * nth } else { k + 1 };
                    let diff = u[jp] - u[k];
                    total += a * diff * diff;
                }
                if with_potential {
                    let mut q = self.bulk_mass[k] * self.coeffs.q_bulk.0[k];
                    if i == 0 {
                        q += self.surf_mass * self.coeffs.q_surf.0[j];
                    }
                    total += q * u[k] * u[k];
                }
            }
        }
        total
    }

    /// Acceleration source `M⁻¹(M_b f + M_s g)` on active nodes.
    fn source_acceleration(&self, f: &[f64], gs: &[f64], out: &mut [f64]) {
        let nth = self.grid.ntheta;
        for (k, o) in out.iter_mut().enumerate() {
            let mut load = self.bulk_mass[k] * f[k];
            if k < nth {
                load += self.surf_mass * gs[k];
            }
            *o = load / self.mass[k];
        }
    }
}

/// Levels and the two ghost levels of a leapfrog run, in step order.
struct RunOutput {
    levels: Vec<Vec<f64>>,
    ghost_prev: Vec<f64>,
    ghost_next: Vec<f64>,
}

/// Leapfrog in step order: `step = ±dt`, `forcing`/`dirichlet` indexed by step.
fn run(
    op: &WaveOperator,
    step: f64,
    nt: usize,
    t_of: impl Fn(usize) -> f64,
    init: &InitialState,
    forcing: &dyn Forcing,
    dirichlet: impl Fn(usize, &mut [f64]),
) -> Result<RunOutput> {
    let g = op.grid;
    let na = g.n_active();
    let nn = g.n_nodes();
    let tau2 = step * step;

    let mut f = vec![0.0; nn];
    let mut gs = vec![0.0; g.ntheta];
    let mut src = vec![0.0; na];
    let mut ku = vec![0.0; na];

    let mut accel = |u: &[f64], n: usize, out: &mut [f64]| {
        op.apply_stiffness(u, &mut ku, true);
        if forcing.is_zero() {
            for k in 0..na {
                out[k] = -ku[k] / op.mass[k];
            }
        } else {
            forcing.eval(n, t_of(n), &mut f, &mut gs);
            op.source_acceleration(&f, &gs, &mut src);
            for k in 0..na {
                out[k] = src[k] - ku[k] / op.mass[k];
            }
        }
    };

    let mut levels = Vec::with_capacity(nt + 1);
    let mut u0 = init.y0.0.clone();
    dirichlet(0, &mut u0[na..]);
    let mut acc = vec![0.0; na];
    accel(&u0, 0, &mut acc);

    let mut u1 = vec![0.0; nn];
    let mut ghost_prev = vec![0.0; nn];
    for k in 0..na {
        let half = 0.5 * tau2 * acc[k];
        u1[k] = u0[k] + step * init.y1.0[k] + half;
        ghost_prev[k] = u0[k] - step * init.y1.0[k] + half;
    }
    dirichlet(1.min(nt), &mut u1[na..]);
    ghost_prev[na..].copy_from_slice(&u0[na..]);
    check_level(&u0, 0)?;
    levels.push(u0);
    if nt == 0 {
        let ghost_next = u1;
        return Ok(RunOutput {
            levels,
            ghost_prev,
            ghost_next,
        });
    }
    check_level(&u1, 1)?;
    levels.push(u1);

    for n in 1..=nt {
        let (prev, cur) = (&levels[n - 1], &levels[n]);
        accel(cur, n, &mut acc);
        let mut next = vec![0.0; nn];
        for k in 0..na {
            next[k] = 2.0 * cur[k] - prev[k] + tau2 * acc[k];
        }
        if n < nt {
            dirichlet(n + 1, &mut next[na..]);
            check_level(&next, n + 1)?;
            levels.push(next);
        } else {
            next[na..].copy_from_slice(&cur[na..]);
            return Ok(RunOutput {
                levels,
                ghost_prev,
                ghost_next: next,
            });
        }
    }
    unreachable!("loop returns at n = nt")
}

fn check_level(u: &[f64], level: usize) -> Result<()> {
    let norm = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !norm.is_finite() || norm > BLOW_UP_THRESHOLD {
        return Err(Error::BlowUp { level, norm });
    }
    Ok(())
}

/// Space-time solution `(y, y_Γ)` on a grid's time axis.
///
/// `levels[n]` holds every node at `t₀ + nΔt`; ring 0 doubles as `y_Γ`. The
/// ghost levels `t₀ − Δt` and `t_end + Δt` continue the same recursion and give
/// centered velocities at the end levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub levels: Vec<Vec<f64>>,
    pub ghost_before: Vec<f64>,
    pub ghost_after: Vec<f64>,
}

impl Trajectory {
    pub fn time(&self) -> &TimeAxis {
        &self.grid.time
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    /// `y_Γ` at level `n`.
    pub fn surface(&self, n: usize) -> &[f64] {
        &self.levels[n][..self.grid.ntheta]
    }

    /// Centered velocity at level `n`.
    pub fn velocity(&self, n: usize) -> Vec<f64> {
        let nt = self.grid.time.nt;
        let prev = if n == 0 { &self.ghost_before } else { &self.levels[n - 1] };
        let next = if n == nt { &self.ghost_after } else { &self.levels[n + 1] };
        let h2 = 2.0 * self.grid.time.dt;
        prev.iter().zip(next).map(|(a, b)| (b - a) / h2).collect()
    }

    pub fn zeros(grid: &Grid) -> Self {
        let z = vec![0.0; grid.n_nodes()];
        Self {
            grid: grid.clone(),
            levels: vec![z.clone(); grid.time.levels()],
            ghost_before: z.clone(),
            ghost_after: z,
        }
    }

    /// Builds a trajectory by sampling `y(r, θ, t)` on every level and both ghosts.
    pub fn sample(grid: &Grid, y: impl Fn(f64, f64, f64) -> f64) -> Self {
        let at = |t: f64| grid.sample(|r, th| y(r, th, t)).0;
        let ax = grid.time;
        Self {
            grid: grid.clone(),
            levels: (0..=ax.nt).map(|n| at(ax.t(n))).collect(),
            ghost_before: at(ax.t0 - ax.dt),
            ghost_after: at(ax.t_end() + ax.dt),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// `α · self`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| alpha * x).collect::<Vec<_>>();
        Self {
            grid: self.grid.clone(),
            levels: self.levels.iter().map(s).collect(),
            ghost_before: s(&self.ghost_before),
            ghost_after: s(&self.ghost_after),
        }
    }

    /// Dumps the trajectory at a level as CSV.
    pub fn write_level_csv(&self, n: usize, out: &mut impl std::io::Write) -> Result<()> {
        self.grid.write_field_csv(&self.levels[n], out)
    }
}

/// Solves the forward system on `grid.time` from `init`.
pub fn solve_forward(
    grid: &Grid,
    coeffs: &Coefficients,
    forcing: &dyn Forcing,
    dirichlet: &BoundaryData,
    init: &InitialState,
) -> Result<Trajectory> {
    let op = WaveOperator::new(grid, coeffs)?;
    check_init(grid, init)?;
    if let BoundaryData::Levels(l) = dirichlet {
        if l.len() != grid.time.levels() {
            return Err(Error::Dimension(format!(
                "Dirichlet data has {} levels, expected {}",
                l.len(),
                grid.time.levels()
            )));
        }
    }
    let ax = grid.time;
    let na = grid.n_active();
    let mut init = init.clone();
    dirichlet.write(0, &mut init.y0.0[na..]);
    let out = run(&op, ax.dt, ax.nt, |n| ax.t(n), &init, forcing, |n, ring| {
        dirichlet.write(n, ring)
    })?;
    Ok(Trajectory {
        grid: grid.clone(),
        levels: out.levels,
        ghost_before: out.ghost_prev,
        ghost_after: out.ghost_next,
    })
}

/// Solves the homogeneous system backward from terminal data at `t_end`.
pub fn solve_adjoint(grid: &Grid, coeffs: &Coefficients, terminal: &InitialState) -> Result<Trajectory> {
    let op = WaveOperator::new(grid, coeffs)?;
    check_init(grid, terminal)?;
    let ax = grid.time;
    let mut terminal = terminal.clone();
    let na = grid.n_active();
    terminal.y0.0[na..].fill(0.0);
    // Backward in time: the step is −Δt, so velocities flip sign.
    let init = InitialState {
        y0: terminal.y0,
        y1: BulkField(terminal.y1.0.iter().map(|v| -v).collect()),
    };
    let out = run(&op, ax.dt, ax.nt, |k| ax.t(ax.nt - k), &init, &NoForcing, |_, ring| {
        ring.fill(0.0)
    })?;
    let mut levels = out.levels;
    levels.reverse();
    Ok(Trajectory {
        grid: grid.clone(),
        levels,
        ghost_before: out.ghost_next,
        ghost_after: out.ghost_prev,
    })
}

fn check_init(grid: &Grid, init: &InitialState) -> Result<()> {
    if init.y0.0.len() != grid.n_nodes() || init.y1.0.len() != grid.n_nodes() {
        return Err(Error::Dimension("initial data do not match the grid".into()));
    }
    Ok(())
}

/// Energy `E(t)` at a level.
pub fn energy(traj: &Trajectory, coeffs: &Coefficients, level: usize) -> Result<f64> {
    let op = WaveOperator::new(&traj.grid, coeffs)?;
    Ok(op.energy(&traj.levels[level], &traj.velocity(level)))
}

/// `I²` at a level: unhalved energy norms plus `‖q_Ω y‖² + ‖q_Γ y_Γ‖²`.
pub fn energy_i2(traj: &Trajectory, coeffs: &Coefficients, level: usize) -> Result<f64> {
    let op = WaveOperator::new(&traj.grid, coeffs)?;
    let u = &traj.levels[level];
    let g = &traj.grid;
    let pot_bulk: f64 = (0..g.n_nodes())
        .map(|k| op.bulk_mass()[k] * (coeffs.q_bulk.0[k] * u[k]).powi(2))
        .sum();
    let pot_surf: f64 = (0..g.ntheta)
        .map(|j| op.surf_mass() * (coeffs.q_surf.0[j] * u[j]).powi(2))
        .sum();
    Ok(2.0 * op.energy(u, &traj.velocity(level)) + pot_bulk + pot_surf)
}

/// `∂νy` on `γ` at every level: `trace[n][k]` at outer node `grid.gamma()[k]`.
pub fn flux_trace(traj: &Trajectory) -> Vec<Vec<f64>> {
    let g = &traj.grid;
    traj.levels
        .iter()
        .map(|u| {
            let dn = g.normal_derivative(u, Boundary::Outer);
            g.gamma().iter().map(|&j| dn[j]).collect()
        })
        .collect()
}

/// Time derivative of a sampled series: centered inside, one-sided
/// second-order at both ends. Needs at least three levels.
pub fn d_dt(series: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let n = series.len();
    assert!(n >= 3, "time derivative needs at least three levels");
    let width = series[0].len();
    (0..n)
        .map(|l| {
            (0..width)
                .map(|k| {
                    let s = |m: usize| series[m][k];
                    if l == 0 {
                        (-3.0 * s(0) + 4.0 * s(1) - s(2)) / (2.0 * dt)
                    } else if l == n - 1 {
                        (3.0 * s(n - 1) - 4.0 * s(n - 2) + s(n - 3)) / (2.0 * dt)
                    } else {
                        (s(l + 1) - s(l - 1)) / (2.0 * dt)
                    }
                })
                .collect()
        })
        .collect()
}

/// Transpose of [`d_dt`] (as a linear map on the stacked series).
pub fn d_dt_transpose(cot: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let n = cot.len();
    let width = cot[0].len();
    let mut out = vec![vec![0.0; width]; n];
    let h2 = 2.0 * dt;
    for k in 0..width {
        let c = |m: usize| cot[m][k];
        out[0][k] += -3.0 * c(0) / h2;
        out[1][k] += 4.0 * c(0) / h2;
        out[2][k] += -c(0) / h2;
        for l in 1..n - 1 {
            out[l + 1][k] += c(l) / h2;
            out[l - 1][k] -= c(l) / h2;
        }
        out[n - 1][k] += 3.0 * c(n - 1) / h2;
        out[n - 2][k] += -4.0 * c(n - 1) / h2;
        out[n - 3][k] += c(n - 1) / h2;
    }
    out
}

/// Odd extension of a series given on `[0, T]` to `[−T, T]`.
pub fn odd_extend(series: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    let magnitude = series[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if magnitude > tol {
        return Err(Error::ExtensionMismatch { magnitude, tol });
    }
    let mut out: Vec<Vec<f64>> = series[1..]
        .iter()
        .rev()
        .map(|v| v.iter().map(|x| -x).collect())
        .collect();
    out.push(vec![0.0; series[0].len()]);
    out.extend(series[1..].iter().cloned());
    Ok(out)
}

/// Odd extension of a trajectory on `[0, T]` to `[−T, T]`.
pub fn odd_extend_trajectory(traj: &Trajectory, tol: f64) -> Result<Trajectory> {
    let ax = traj.grid.time;
    if ax.t0 != 0.0 {
        return Err(Error::Config("odd extension expects a trajectory starting at t = 0".into()));
    }
    let levels = odd_extend(&traj.levels, tol)?;
    let grid = traj.grid.with_axis(TimeAxis {
        t0: -ax.t_end(),
        dt: ax.dt,
        nt: 2 * ax.nt,
    });
    Ok(Trajectory {
        grid,
        levels,
        ghost_before: traj.ghost_after.iter().map(|x| -x).collect(),
        ghost_after: traj.ghost_after.clone(),
    })
}

/// Discrete PDE residuals `(f, g)` of a trajectory at every level.
///
/// Interior rows use the scheme's own operator with a central (one-sided at
/// the end levels) second time difference. The total row residual on `Γ¹`
/// mixes `f` and `g` with weights `m_b, m_s`; `f` there is extrapolated from
/// rings 1 and 2 and `g` recovered from the mix. `f` on the Dirichlet ring is
/// extrapolated likewise.
pub fn residuals(traj: &Trajectory, coeffs: &Coefficients) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let g = &traj.grid;
    let op = WaveOperator::new(g, coeffs)?;
    let nt = g.time.nt;
    let dt2 = g.time.dt * g.time.dt;
    let nth = g.ntheta;
    let na = g.n_active();
    let mut ku = vec![0.0; na];
    let mut f_all = Vec::with_capacity(nt + 1);
    let mut g_all = Vec::with_capacity(nt + 1);
    for n in 0..=nt {
        let lvl = |m: isize| -> &[f64] {
            if m < 0 {
                &traj.ghost_before
            } else if m as usize > nt {
                &traj.ghost_after
            } else {
                &traj.levels[m as usize]
            }
        };
        let n_i = n as isize;
        let (a, b, c) = (lvl(n_i - 1), lvl(n_i), lvl(n_i + 1));
        op.apply_stiffness(b, &mut ku, true);
        let mut row = vec![0.0; na];
        for k in 0..na {
            row[k] = (c[k] - 2.0 * b[k] + a[k]) / dt2 + ku[k] / op.mass()[k];
        }
        let mut f = vec![0.0; g.n_nodes()];
        f[nth..na].copy_from_slice(&row[nth..na]);
        let mut gs = vec![0.0; nth];
        for j in 0..nth {
            let f0 = 2.0 * f[nth + j] - f[2 * nth + j];
            f[j] = f0;
            let mb = op.bulk_mass()[j];
            gs[j] = ((mb + op.surf_mass()) * row[j] - mb * f0) / op.surf_mass();
            let last = (g.nr - 1) * nth + j;
            f[last] = 2.0 * f[last - nth] - f[last - 2 * nth];
        }
        if f.iter().chain(gs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("residual at level {n}")));
        }
        f_all.push(f);
        g_all.push(gs);
    }
    Ok((f_all, g_all))
}

/// Linear leapfrog map on active unknowns and its exact transpose, used by the
/// measurement, observation and control operators.
pub(crate) struct LinearLeapfrog<'a> {
    pub op: WaveOperator<'a>,
    pub dt: f64,
    pub nt: usize,
}

/// Inputs of [`LinearLeapfrog::forward`].
pub(crate) struct LinearInputs<'b> {
    pub y0: Option<&'b [f64]>,
    pub y1: Option<&'b [f64]>,
    /// Acceleration source `M⁻¹ load` on active nodes at step `k`.
    pub accel: Option<&'b dyn Fn(usize, &mut [f64])>,
    /// Outer-ring values at step `k`.
    pub dirichlet: Option<&'b dyn Fn(usize, &mut [f64])>,
}

/// Cotangents of the transposed run.
pub(crate) struct LinearAdjoint {
    pub y0_bar: Vec<f64>,
    pub y1_bar: Vec<f64>,
}

impl<'a> LinearLeapfrog<'a> {
    pub fn new(grid: &'a Grid, coeffs: &'a Coefficients) -> Result<Self> {
        Ok(Self {
            op: WaveOperator::new(grid, coeffs)?,
            dt: grid.time.dt,
            nt: grid.time.nt,
        })
    }

    fn accel_of(&self, u: &[f64], ku: &mut [f64], out: &mut [f64]) {
        self.op.apply_stiffness(u, ku, true);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -ku[k] / self.op.mass()[k];
        }
    }

    /// Runs the recursion and hands every level (all nodes) to `observe`.
    pub fn forward(&self, inputs: &LinearInputs, mut observe: impl FnMut(usize, &[f64])) {
        let g = self.op.grid;
        let (na, nn) = (g.n_active(), g.n_nodes());
        let tau2 = self.dt * self.dt;
        let mut src = vec![0.0; na];
        let mut acc = vec![0.0; na];
        let mut ku = vec![0.0; na];

        let mut prev = vec![0.0; nn];
        if let Some(y0) = inputs.y0 {
            prev[..na].copy_from_slice(&y0[..na]);
        }
        if let Some(dir) = inputs.dirichlet {
            dir(0, &mut prev[na..]);
        }
        observe(0, &prev);
        if self.nt == 0 {
            return;
        }
        self.accel_of(&prev, &mut ku, &mut acc);
        if let Some(a) = inputs.accel {
            a(0, &mut src);
            acc.iter_mut().zip(&src).for_each(|(x, s)| *x += s);
        }
        let mut cur = vec![0.0; nn];
        for k in 0..na {
            let v = inputs.y1.map_or(0.0, |y1| y1[k]);
            cur[k] = prev[k] + self.dt * v + 0.5 * tau2 * acc[k];
        }
        if let Some(dir) = inputs.dirichlet {
            dir(1, &mut cur[na..]);
        }
        observe(1, &cur);
        for n in 1..self.nt {
            self.accel_of(&cur, &mut ku, &mut acc);
            if let Some(a) = inputs.accel {
                a(n, &mut src);
                acc.iter_mut().zip(&src).for_each(|(x, s)| *x += s);
            }
            let mut next = vec![0.0; nn];
            for k in 0..na {
                next[k] = 2.0 * cur[k] - prev[k] + tau2 * acc[k];
            }
            if let Some(dir) = inputs.dirichlet {
                dir(n + 1, &mut next[na..]);
            }
            observe(n + 1, &next);
            prev = cur;
            cur = next;
        }
    }

    /// Exact transpose of [`Self::forward`].
    ///
    /// `cotangent(k, c)` adds the cotangent of level `k` into `c` (all nodes).
    /// `accel_bar(k, ā)` receives the cotangent of the acceleration source and
    /// `dirichlet_bar(k, v̄)` that of the outer-ring values at step `k`.
    pub fn transpose(
        &self,
        mut cotangent: impl FnMut(usize, &mut [f64]),
        mut accel_bar: impl FnMut(usize, &[f64]),
        mut dirichlet_bar: impl FnMut(usize, &[f64]),
    ) -> LinearAdjoint {
        let g = self.op.grid;
        let (na, nn, nth) = (g.n_active(), g.n_nodes(), g.ntheta);
        let nt = self.nt;
        let tau2 = self.dt * self.dt;
        let mass = self.op.mass();

        let mut c = vec![0.0; nn];
        // ū^{k+1}, ū^{k+2} as full vectors (Dirichlet entries kept at zero).
        let mut next1 = vec![0.0; nn];
        let mut next2 = vec![0.0; nn];
        let mut w = vec![0.0; nn];
        let mut kw = vec![0.0; na];
        let mut ring = vec![0.0; nth];
        let mut a_bar = vec![0.0; na];

        if nt == 0 {
            c.fill(0.0);
            cotangent(0, &mut c);
            accel_bar(0, &a_bar);
            dirichlet_bar(0, &c[na..]);
            return LinearAdjoint {
                y0_bar: c[..na].to_vec(),
                y1_bar: vec![0.0; na],
            };
        }

        c.fill(0.0);
        cotangent(nt, &mut c);
        accel_bar(nt, &a_bar);
        dirichlet_bar(nt, &c[na..]);
        next1[..na].copy_from_slice(&c[..na]);

        // Steps k = nt−1 .. 1: u^{k+1} = 2u^k − u^{k−1} + τ²(a^k − M⁻¹K[u^k; v^k]).
        for k in (1..nt).rev() {
            c.fill(0.0);
            cotangent(k, &mut c);
            for i in 0..na {
                w[i] = next1[i] / mass[i];
                a_bar[i] = tau2 * next1[i];
            }
            accel_bar(k, &a_bar);
            self.op.apply_stiffness(&w, &mut kw, true);
            self.op.dirichlet_coupling_transpose(&w, &mut ring);
            for (j, r) in ring.iter_mut().enumerate() {
                *r = c[na + j] - tau2 * *r;
            }
            dirichlet_bar(k, &ring);
            let mut cur = vec![0.0; nn];
            for i in 0..na {
                cur[i] = c[i] + 2.0 * next1[i] - tau2 * kw[i] - next2[i];
            }
            next2 = std::mem::replace(&mut next1, cur);
        }

        // Step 0: u¹ = u⁰ + τ y₁ + ½τ²(a⁰ − M⁻¹K[u⁰; v⁰]), and u² carries −u⁰.
        c.fill(0.0);
        cotangent(0, &mut c);
        for i in 0..na {
            w[i] = next1[i] / mass[i];
            a_bar[i] = 0.5 * tau2 * next1[i];
        }
        accel_bar(0, &a_bar);
        self.op.apply_stiffness(&w, &mut kw, true);
        self.op.dirichlet_coupling_transpose(&w, &mut ring);
        for (j, r) in ring.iter_mut().enumerate() {
            *r = c[na + j] - 0.5 * tau2 * *r;
        }
        dirichlet_bar(0, &ring);
        let y0_bar = (0..na)
            .map(|i| c[i] + next1[i] - 0.5 * tau2 * kw[i] - next2[i])
            .collect();
        let y1_bar = next1[..na].iter().map(|x| self.dt * x).collect();
        LinearAdjoint { y0_bar, y1_bar }
    }
}
