//! Observability constant of the backward adjoint system and HUM boundary
//! control synthesis.
//!
//! The observation map `O` sends terminal data `(z₀, z₁)` on the active nodes
//! to the outer normal flux on `γ` of the backward solution. With the
//! observation Gramian `H = Oᵀ W O` and the energy form `E`, the constant is
//! the top of the pencil `E x = c H x`. Because the backward solution only
//! depends on `T − t`, windows sharing `Δt` nest and `H` grows with `T`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, TimeAxis};
use crate::linalg::{conjugate_gradient, relative_gap, weighted_dot, CgOptions};
use crate::solver::{
    energy, solve_forward, BoundaryData, Coefficients, InitialState, LinearInputs, LinearLeapfrog, NoForcing,
};
use crate::weights::annulus_minimal_time;

/// Largest active-node count for which the dense filtered variant is formed.
pub const MAX_DENSE_NODES: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityOptions {
    /// Relative change of the Rayleigh quotient that stops the power iteration.
    pub power_tol: f64,
    pub max_power_iters: usize,
    /// Relative residual of the inner Gramian solves.
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    /// Number of low-frequency spatial modes kept by the filtered variant.
    pub filter_modes: usize,
    pub seed: u64,
}

impl Default for ObservabilityOptions {
    fn default() -> Self {
        Self {
            power_tol: 1e-6,
            max_power_iters: 200,
            inner_tol: 1e-10,
            max_inner_iters: 2000,
            filter_modes: 8,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub t: f64,
    pub two_t_star: f64,
    pub c_obs: f64,
    /// Same quotient restricted to the lowest spatial modes.
    pub c_obs_filtered: Option<f64>,
    pub power_iters: usize,
    pub converged: bool,
    /// Rayleigh quotient after each power step.
    pub rayleigh_history: Vec<f64>,
    /// `T > 2T*`.
    pub within_guarantee: bool,
}

/// Observation map and its transpose on one grid.
pub struct Observation<'a> {
    grid: &'a Grid,
    leapfrog: LinearLeapfrog<'a>,
    flux_weights: Vec<f64>,
}

impl<'a> Observation<'a> {
    pub fn new(grid: &'a Grid, coeffs: &'a Coefficients) -> Result<Self> {
        if grid.dim == 2 && coeffs.delta <= coeffs.d {
            return Err(Error::Infeasible(format!(
                "observability requires delta > d in 2D, got d = {}, delta = {}",
                coeffs.d, coeffs.delta
            )));
        }
        let sw = grid.surface_weight(Boundary::Outer);
        Ok(Self {
            grid,
            leapfrog: LinearLeapfrog::new(grid, coeffs)?,
            flux_weights: grid.time.weights().iter().map(|w| w * sw).collect(),
        })
    }

    /// Length of the data vector `(z₀, z₁)`.
    pub fn n_data(&self) -> usize {
        2 * self.grid.n_active()
    }

    fn stencil(&self) -> [(usize, f64); 2] {
        let h2 = 2.0 * self.grid.dr;
        [(self.grid.nr - 2, -4.0 / h2), (self.grid.nr - 3, 1.0 / h2)]
    }

    /// `∂νz` on `γ` per step, step `k` being time `T − kΔt`.
    pub fn observe(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let na = self.grid.n_active();
        let y1: Vec<f64> = x[na..].iter().map(|v| -v).collect();
        let g = self.grid;
        let gamma = g.gamma();
        let stencil = self.stencil();
        let mut flux = Vec::with_capacity(g.time.levels());
        self.leapfrog.forward(
            &LinearInputs {
                y0: Some(&x[..na]),
                y1: Some(&y1),
                accel: None,
                dirichlet: None,
            },
            |_, u| {
                flux.push(
                    gamma
                        .iter()
                        .map(|&j| stencil.iter().map(|&(i, c)| c * u[g.idx(i, j)]).sum())
                        .collect::<Vec<f64>>(),
                );
            },
        );
        flux
    }

    fn observe_transpose(&self, flux_bar: &[Vec<f64>]) -> Vec<f64> {
        let g = self.grid;
        let gamma = g.gamma();
        let stencil = self.stencil();
        let adj = self.leapfrog.transpose(
            |k, c| {
                for (m, &j) in gamma.iter().enumerate() {
                    for &(i, coef) in &stencil {
                        c[g.idx(i, j)] += coef * flux_bar[k][m];
                    }
                }
            },
            |_, _| {},
            |_, _| {},
        );
        let mut out = adj.y0_bar;
        out.extend(adj.y1_bar.iter().map(|v| -v));
        out
    }

    /// `‖∂νz‖²_{L²(γ×(0,T))}`.
    pub fn flux_norm2(&self, x: &[f64]) -> f64 {
        self.observe(x)
            .iter()
            .zip(&self.flux_weights)
            .map(|(row, w)| w * row.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `H x = Oᵀ W O x`.
    pub fn gramian(&self, x: &[f64]) -> Vec<f64> {
        let weighted: Vec<Vec<f64>> = self
            .observe(x)
            .into_iter()
            .zip(&self.flux_weights)
            .map(|(row, w)| row.into_iter().map(|v| w * v).collect())
            .collect();
        self.observe_transpose(&weighted)
    }

    /// `E x`: the halved energy form, `½K_d` on `z₀` and `½M` on `z₁`.
    pub fn energy_operator(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let na = g.n_active();
        let op = &self.leapfrog.op;
        let mut full = x[..na].to_vec();
        full.resize(g.n_nodes(), 0.0);
        let mut kz = vec![0.0; na];
        op.apply_stiffness(&full, &mut kz, false);
        let mut out: Vec<f64> = kz.iter().map(|v| 0.5 * v).collect();
        out.extend(x[na..].iter().zip(op.mass()).map(|(v, m)| 0.5 * m * v));
        out
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        dot(x, &self.energy_operator(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Estimates `c_obs = sup E(z)/‖∂νz‖²` by power iteration on `H⁻¹E`.
pub fn observability_constant(
    grid: &Grid,
    coeffs: &Coefficients,
    opts: &ObservabilityOptions,
) -> Result<ObservabilityReport> {
    let obs = Observation::new(grid, coeffs)?;
    let t = grid.time.t_end();
    let two_t_star = 2.0 * annulus_minimal_time(grid.dim, grid.r1, grid.r2, coeffs.d, coeffs.delta)?;
    let n = obs.n_data();
    let ones = vec![1.0; n];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=opts.max_power_iters {
        iters = it;
        let ex = obs.energy_operator(&x);
        let solve = conjugate_gradient(
            |v| Ok(obs.gramian(v)),
            &ex,
            &ones,
            CgOptions {
                tol: opts.inner_tol,
                max_iters: opts.max_inner_iters,
            },
        )?;
        let y = solve.x;
        // H y = E x, so yᵀHy = yᵀEx without another Gramian product.
        let ey = obs.energy(&y);
        let rho = ey / dot(&y, &ex);
        if !rho.is_finite() {
            return Err(Error::NonFinite("observability Rayleigh quotient".into()));
        }
        let scale = 1.0 / ey.sqrt();
        x = y.iter().map(|v| v * scale).collect();
        let prev = history.last().copied();
        history.push(rho);
        if let Some(p) = prev {
            if (rho - p).abs() <= opts.power_tol * rho {
                converged = true;
                break;
            }
        }
    }
    let c_obs_filtered = if opts.filter_modes > 0 && grid.n_active() <= MAX_DENSE_NODES {
        Some(filtered_constant(&obs, opts.filter_modes)?)
    } else {
        None
    };
    Ok(ObservabilityReport {
        t,
        two_t_star,
        c_obs: *history.last().unwrap_or(&f64::NAN),
        c_obs_filtered,
        power_iters: iters,
        converged,
        rayleigh_history: history,
        within_guarantee: t > two_t_star,
    })
}

/// Dense Gramian `H` over the whole data space (small grids only).
pub fn dense_gramian(obs: &Observation) -> DMatrix<f64> {
    let n = obs.n_data();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            obs.gramian(&e)
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Top generalized eigenvalue of `(E, H)` on a basis given by columns.
pub fn pencil_top(obs: &Observation, basis: &DMatrix<f64>) -> Result<f64> {
    let k = basis.ncols();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| basis.column(j).iter().copied().collect()).collect();
    let fluxes: Vec<Vec<Vec<f64>>> = cols.par_iter().map(|c| obs.observe(c)).collect();
    let energies: Vec<Vec<f64>> = cols.iter().map(|c| obs.energy_operator(c)).collect();
    let h: DMatrix<f64> = DMatrix::from_fn(k, k, |i, j| {
        fluxes[i]
            .iter()
            .zip(&fluxes[j])
            .zip(&obs.flux_weights)
            .map(|((a, b), w)| w * dot(a, b))
            .sum::<f64>()
    });
    let e: DMatrix<f64> = DMatrix::from_fn(k, k, |i, j| dot(&cols[i], &energies[j]));
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NonFinite("observation Gramian is not positive definite on the basis".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::NonFinite("singular Gramian factor".into()))?;
    let c: DMatrix<f64> = &l_inv * &e * l_inv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok(SymmetricEigen::new(c).eigenvalues.max())
}

/// Restriction to the lowest `modes` eigenmodes of `K_d φ = ω² M φ`, used for
/// both `z₀` and `z₁`.
fn filtered_constant(obs: &Observation, modes: usize) -> Result<f64> {
    let g = obs.grid;
    let na = g.n_active();
    let op = &obs.leapfrog.op;
    let inv_sqrt_m: Vec<f64> = op.mass().iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut full = vec![0.0; g.n_nodes()];
    let mut col = vec![0.0; na];
    let mut a = DMatrix::zeros(na, na);
    for j in 0..na {
        full.fill(0.0);
        full[j] = inv_sqrt_m[j];
        op.apply_stiffness(&full, &mut col, false);
        for i in 0..na {
            a[(i, j)] = inv_sqrt_m[i] * col[i];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..na).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let k = modes.min(na);
    let mut basis = DMatrix::zeros(2 * na, 2 * k);
    for (m, &idx) in order.iter().take(k).enumerate() {
        for i in 0..na {
            let phi = inv_sqrt_m[i] * eig.eigenvectors[(i, idx)];
            basis[(i, m)] = phi;
            basis[(na + i, k + m)] = phi;
        }
    }
    pencil_top(obs, &basis)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub factor: f64,
    pub t: f64,
    pub c_obs_raw: f64,
    pub c_obs_filtered: Option<f64>,
    pub converged: bool,
    pub within_guarantee: bool,
}

/// `c_obs` over `T = factor · 2T*`, all windows sharing the step of the longest.
pub fn observability_sweep(
    grid: &Grid,
    coeffs: &Coefficients,
    factors: &[f64],
    opts: &ObservabilityOptions,
) -> Result<Vec<SweepRow>> {
    let two_t_star = 2.0 * annulus_minimal_time(grid.dim, grid.r1, grid.r2, coeffs.d, coeffs.delta)?;
    let t_max = factors.iter().fold(0.0f64, |m, f| m.max(*f)) * two_t_star;
    let dt = grid.cfl_dt_max(coeffs.d, coeffs.delta);
    let dt = t_max / (t_max / dt).ceil();
    factors
        .par_iter()
        .map(|&factor| {
            let t = factor * two_t_star;
            let nt = ((t / dt).round() as usize).max(2);
            let g = grid.with_axis(TimeAxis { t0: 0.0, dt, nt });
            let rep = observability_constant(&g, coeffs, opts)?;
            Ok(SweepRow {
                factor,
                t: g.time.t_end(),
                c_obs_raw: rep.c_obs,
                c_obs_filtered: rep.c_obs_filtered,
                converged: rep.converged,
                within_guarantee: rep.within_guarantee,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], out: &mut impl std::io::Write) -> Result<()> {
    writeln!(out, "factor,T,c_obs_raw,c_obs_filtered,converged,within_guarantee")?;
    for r in rows {
        let filtered = r.c_obs_filtered.map_or_else(String::new, |v| format!("{v:.12e}"));
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{},{},{}",
            r.factor, r.t, r.c_obs_raw, filtered, r.converged, r.within_guarantee
        )?;
    }
    Ok(())
}

/// Boundary control map `L : v ↦ (u^{N−1}, u^N)` and its adjoint.
///
/// The control acts on `γ` at levels `0..=N−2`; the last two outer-ring
/// levels stay zero so that a vanishing terminal pair means a vanishing
/// terminal state, ghost level included.
pub struct ControlMap<'a> {
    grid: &'a Grid,
    leapfrog: LinearLeapfrog<'a>,
    state_weights: Vec<f64>,
    control_weight: f64,
}

impl<'a> ControlMap<'a> {
    pub fn new(grid: &'a Grid, coeffs: &'a Coefficients) -> Result<Self> {
        if grid.time.nt < 3 {
            return Err(Error::Config("control needs at least four time levels".into()));
        }
        let leapfrog = LinearLeapfrog::new(grid, coeffs)?;
        let mut state_weights = leapfrog.op.mass().to_vec();
        state_weights.extend_from_slice(leapfrog.op.mass());
        Ok(Self {
            grid,
            control_weight: grid.time.dt * grid.surface_weight(Boundary::Outer),
            leapfrog,
            state_weights,
        })
    }

    pub fn n_controls(&self) -> usize {
        (self.grid.time.nt - 1) * self.grid.gamma().len()
    }

    pub fn state_weights(&self) -> &[f64] {
        &self.state_weights
    }

    /// Terminal pair of the run from `init` with control `v` (`None` = no control).
    pub fn terminal_pair(&self, init: Option<&InitialState>, v: Option<&[f64]>) -> Vec<f64> {
        let g = self.grid;
        let (na, nt) = (g.n_active(), g.time.nt);
        let gamma = g.gamma();
        let ng = gamma.len();
        let dir = |k: usize, ring: &mut [f64]| {
            ring.fill(0.0);
            if let Some(v) = v {
                if k + 1 < nt {
                    for (m, &j) in gamma.iter().enumerate() {
                        ring[j] = v[k * ng + m];
                    }
                }
            }
        };
        let mut pair = vec![0.0; 2 * na];
        self.leapfrog.forward(
            &LinearInputs {
                y0: init.map(|s| &s.y0.0[..]),
                y1: init.map(|s| &s.y1.0[..]),
                accel: None,
                dirichlet: Some(&dir),
            },
            |k, u| {
                if k + 1 == nt {
                    pair[..na].copy_from_slice(&u[..na]);
                } else if k == nt {
                    pair[na..].copy_from_slice(&u[..na]);
                }
            },
        );
        pair
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.terminal_pair(None, Some(v))
    }

    /// `L* ξ` in the weighted inner products.
    pub fn adjoint(&self, xi: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let (na, nt) = (g.n_active(), g.time.nt);
        let gamma = g.gamma();
        let ng = gamma.len();
        let mut v = vec![0.0; self.n_controls()];
        self.leapfrog.transpose(
            |k, c| {
                let off = if k + 1 == nt {
                    0
                } else if k == nt {
                    na
                } else {
                    return;
                };
                for i in 0..na {
                    c[i] += self.state_weights[off + i] * xi[off + i];
                }
            },
            |_, _| {},
            |k, ring| {
                if k + 1 < nt {
                    for (m, &j) in gamma.iter().enumerate() {
                        v[k * ng + m] = ring[j] / self.control_weight;
                    }
                }
            },
        );
        v
    }

    /// `Λ ξ = L L* ξ`.
    pub fn gramian(&self, xi: &[f64]) -> Vec<f64> {
        self.apply(&self.adjoint(xi))
    }

    /// `v[k][γ]` over every level, zero on the last two.
    pub fn expand(&self, v: &[f64]) -> Vec<Vec<f64>> {
        let ng = self.grid.gamma().len();
        let mut rows: Vec<Vec<f64>> = v.chunks(ng).map(<[f64]>::to_vec).collect();
        rows.resize(self.grid.time.levels(), vec![0.0; ng]);
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    /// `v[n][k]` at level `n` and outer node `grid.gamma()[k]`.
    pub v: Vec<Vec<f64>>,
    /// Controlled over uncontrolled energy at `T`; `None` when both vanish.
    pub terminal_energy_ratio: Option<f64>,
    pub controlled_energy: f64,
    pub uncontrolled_energy: f64,
    pub cg_residual_history: Vec<f64>,
    pub cg_iterations: usize,
    pub converged: bool,
    pub within_guarantee: bool,
}

/// Minimal-norm boundary control steering `init` to rest at `T`.
pub fn hum_control(
    grid: &Grid,
    coeffs: &Coefficients,
    init: &InitialState,
    cg_tol: f64,
    max_iters: usize,
) -> Result<ControlResult> {
    let map = ControlMap::new(grid, coeffs)?;
    let two_t_star = 2.0 * annulus_minimal_time(grid.dim, grid.r1, grid.r2, coeffs.d, coeffs.delta)?;
    let free = map.terminal_pair(Some(init), None);
    let rhs: Vec<f64> = free.iter().map(|v| -v).collect();
    let out = conjugate_gradient(
        |xi| Ok(map.gramian(xi)),
        &rhs,
        map.state_weights(),
        CgOptions { tol: cg_tol, max_iters },
    )?;
    let v = map.expand(&map.adjoint(&out.x));

    let uncontrolled = solve_forward(grid, coeffs, &NoForcing, &BoundaryData::Zero, init)?;
    let controlled = solve_forward(grid, coeffs, &NoForcing, &BoundaryData::on_gamma(grid, &v)?, init)?;
    let nt = grid.time.nt;
    let e_free = energy(&uncontrolled, coeffs, nt)?;
    let e_ctrl = energy(&controlled, coeffs, nt)?;
    Ok(ControlResult {
        v,
        terminal_energy_ratio: (e_free > 0.0).then(|| e_ctrl / e_free),
        controlled_energy: e_ctrl,
        uncontrolled_energy: e_free,
        cg_residual_history: out.history,
        cg_iterations: out.iterations,
        converged: out.converged,
        within_guarantee: grid.time.t_end() > two_t_star,
    })
}

/// Worst relative gap of `⟨Λx, y⟩` against `⟨x, Λy⟩` over random pairs.
pub fn gramian_symmetry(grid: &Grid, coeffs: &Coefficients, pairs: usize, seed: u64) -> Result<f64> {
    let map = ControlMap::new(grid, coeffs)?;
    let w = map.state_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = weighted_dot(w, &map.gramian(&x), &y);
        let rhs = weighted_dot(w, &x, &map.gramian(&y));
        worst = worst.max(relative_gap(lhs, rhs));
    }
    Ok(worst)
}

/// Worst relative gap of `⟨Ox, φ⟩` against `⟨x, Oᵀφ⟩` over random pairs.
pub fn observation_adjoint_test(grid: &Grid, coeffs: &Coefficients, pairs: usize, seed: u64) -> Result<f64> {
    let obs = Observation::new(grid, coeffs)?;
    let ng = grid.gamma().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..obs.n_data()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi: Vec<Vec<f64>> = (0..grid.time.levels())
            .map(|_| (0..ng).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ox = obs.observe(&x);
        let lhs: f64 = ox.iter().zip(&phi).map(|(a, b)| dot(a, b)).sum();
        let rhs = dot(&x, &obs.observe_transpose(&phi));
        worst = worst.max(relative_gap(lhs, rhs));
    }
    Ok(worst)
}
