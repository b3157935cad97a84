//! Inverse source problem: separable admissible sources, the flux measurement
//! map `(a, b) ↦ ∂ₜ∂νy|γ`, its exact discrete adjoint, Tikhonov reconstruction
//! and Monte-Carlo stability ratios.
//!
//! Parameters are `a` on the interior rings followed by `b` on `Γ¹`. The
//! inner ring carries both `a` and `b` through one lumped row, so only their
//! mix is observable there; `a` on `Γ¹` is therefore the linear extrapolation
//! `2a₁ − a₂` and the Dirichlet ring never feeds the solution. Both spaces
//! carry their quadrature inner products, so the adjoint is `F* = W_p⁻¹ Fᵀ W_m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, BulkField, Grid, SurfaceField};
use crate::linalg::{conjugate_gradient, relative_gap, weighted_dot, CgOptions};
use crate::solver::{
    d_dt, d_dt_transpose, flux_trace, solve_forward, BoundaryData, Coefficients, InitialState,
    LinearInputs, LinearLeapfrog, SeparableForcing,
};
use crate::weights::annulus_minimal_time;

/// Relative tolerance of the adjoint inner-product gate.
pub const ADJOINT_GATE_TOL: f64 = 1e-8;

/// Temporal factor `r(t) = 1 + Σ amp·sin(ω t)`, so `r(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalProfile {
    /// `(amplitude, angular frequency)` pairs.
    pub modes: Vec<(f64, f64)>,
}

impl TemporalProfile {
    pub fn constant() -> Self {
        Self { modes: vec![] }
    }

    pub fn value(&self, t: f64) -> f64 {
        1.0 + self.modes.iter().map(|(a, w)| a * (w * t).sin()).sum::<f64>()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.modes.iter().map(|(a, w)| a * w * (w * t).cos()).sum()
    }

    /// Upper bound `Σ|amp·ω|` of `|r′|`.
    pub fn derivative_bound(&self) -> f64 {
        self.modes.iter().map(|(a, w)| (a * w).abs()).sum()
    }
}

/// `f = a(x) r(t)`, `g = b(x) r(t)` with `r` sampled on the grid's time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableSource {
    pub a: BulkField,
    pub b: SurfaceField,
    pub r: Vec<f64>,
    pub r_prime: Vec<f64>,
    pub c0: f64,
}

impl SeparableSource {
    pub fn new(grid: &Grid, a: BulkField, b: SurfaceField, profile: &TemporalProfile, c0: f64) -> Result<Self> {
        if a.0.len() != grid.n_nodes() || b.0.len() != grid.ntheta {
            return Err(Error::Dimension("source amplitudes do not match the grid".into()));
        }
        let ax = grid.time;
        Ok(Self {
            a,
            b,
            r: (0..=ax.nt).map(|n| profile.value(ax.t(n))).collect(),
            r_prime: (0..=ax.nt).map(|n| profile.derivative(ax.t(n))).collect(),
            c0,
        })
    }

    /// Compactly supported radial bump `cos²(π(r − center)/(2·width))` in `a`, `b = 0`.
    pub fn bump(grid: &Grid, center: f64, width: f64, profile: &TemporalProfile, c0: f64) -> Result<Self> {
        let a = grid.sample(|r, _| {
            let z = (r - center) / width;
            if z.abs() < 1.0 {
                (0.5 * std::f64::consts::PI * z).cos().powi(2)
            } else {
                0.0
            }
        });
        Self::new(grid, a, SurfaceField::zeros(grid), profile, c0)
    }

    /// `‖f‖_{L²(Ω×(0,T))} + ‖g‖_{L²(Γ¹×(0,T))}`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        let tw = grid.time.weights();
        let r_norm = tw.iter().zip(&self.r).map(|(w, r)| w * r * r).sum::<f64>().sqrt();
        let a2: f64 = grid.quadrature_bulk().iter().zip(&self.a.0).map(|(w, a)| w * a * a).sum();
        let b2: f64 = grid
            .quadrature_surface(Boundary::Inner)
            .iter()
            .zip(&self.b.0)
            .map(|(w, b)| w * b * b)
            .sum();
        (a2.sqrt() + b2.sqrt()) * r_norm
    }
}

/// Membership in the admissible set: `r(0) = 1` and `max|r′| ≤ C0`.
pub fn check_admissible(source: &SeparableSource, c0: f64) -> bool {
    let max_rp = source.r_prime.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    source.r.first().is_some_and(|r0| (r0 - 1.0).abs() < 1e-14) && max_rp <= c0
}

/// `∂ₜ∂νy` on `γ × (0, T)` by a full forward solve from zero initial data.
pub fn forward_measure(source: &SeparableSource, grid: &Grid, coeffs: &Coefficients) -> Result<Vec<Vec<f64>>> {
    let forcing = SeparableForcing {
        a: &source.a.0,
        b: &source.b.0,
        profile: &source.r,
    };
    let traj = solve_forward(grid, coeffs, &forcing, &BoundaryData::Zero, &InitialState::zeros(grid))?;
    Ok(d_dt(&flux_trace(&traj), grid.time.dt))
}

/// Linear measurement map for a fixed temporal profile.
pub struct MeasurementModel<'a> {
    pub grid: &'a Grid,
    pub coeffs: &'a Coefficients,
    pub profile: Vec<f64>,
    leapfrog: LinearLeapfrog<'a>,
    param_weights: Vec<f64>,
    data_weights: Vec<f64>,
}

impl<'a> MeasurementModel<'a> {
    pub fn new(grid: &'a Grid, coeffs: &'a Coefficients, profile: Vec<f64>) -> Result<Self> {
        if profile.len() != grid.time.levels() {
            return Err(Error::Dimension(format!(
                "profile has {} samples, grid has {} levels",
                profile.len(),
                grid.time.levels()
            )));
        }
        if grid.time.nt < 2 {
            return Err(Error::Config("measurement needs at least three time levels".into()));
        }
        let leapfrog = LinearLeapfrog::new(grid, coeffs)?;
        let na = grid.n_active();
        let mut param_weights = leapfrog.op.bulk_mass()[grid.ntheta..na].to_vec();
        param_weights.extend(std::iter::repeat_n(leapfrog.op.surf_mass(), grid.ntheta));
        let sw = grid.surface_weight(Boundary::Outer);
        let ng = grid.gamma().len();
        let data_weights = grid
            .time
            .weights()
            .iter()
            .flat_map(|tw| std::iter::repeat_n(tw * sw, ng))
            .collect();
        Ok(Self {
            grid,
            coeffs,
            profile,
            leapfrog,
            param_weights,
            data_weights,
        })
    }

    pub fn n_params(&self) -> usize {
        self.grid.n_active()
    }

    pub fn n_data(&self) -> usize {
        self.grid.time.levels() * self.grid.gamma().len()
    }

    pub fn param_weights(&self) -> &[f64] {
        &self.param_weights
    }

    pub fn data_weights(&self) -> &[f64] {
        &self.data_weights
    }

    pub fn pack(&self, a: &BulkField, b: &SurfaceField) -> Vec<f64> {
        let mut x = a.0[self.grid.ntheta..self.grid.n_active()].to_vec();
        x.extend_from_slice(&b.0);
        x
    }

    pub fn unpack(&self, x: &[f64]) -> (BulkField, SurfaceField) {
        let (na, nth) = (self.grid.n_active(), self.grid.ntheta);
        let interior = na - nth;
        let mut a: Vec<f64> = (0..nth).map(|j| 2.0 * x[j] - x[nth + j]).collect();
        a.extend_from_slice(&x[..interior]);
        a.resize(self.grid.n_nodes(), 0.0);
        (BulkField(a), SurfaceField(x[interior..].to_vec()))
    }

    /// Flattens a `[level][γ]` series into the data vector.
    pub fn flatten(series: &[Vec<f64>]) -> Vec<f64> {
        series.iter().flatten().copied().collect()
    }

    pub fn unflatten(&self, m: &[f64]) -> Vec<Vec<f64>> {
        m.chunks(self.grid.gamma().len()).map(<[f64]>::to_vec).collect()
    }

    /// Outer normal stencil `(3u_N − 4u_{N−1} + u_{N−2})/(2Δr)` with `u_N = 0`.
    fn flux_stencil(&self) -> [(usize, f64); 2] {
        let h2 = 2.0 * self.grid.dr;
        [(self.grid.nr - 2, -4.0 / h2), (self.grid.nr - 3, 1.0 / h2)]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        let na = g.n_active();
        let nth = g.ntheta;
        let op = &self.leapfrog.op;
        let (mass, bm, sm) = (op.mass(), op.bulk_mass(), op.surf_mass());
        let interior = na - nth;
        let spatial: Vec<f64> = (0..na)
            .map(|k| {
                if k < nth {
                    (bm[k] * (2.0 * x[k] - x[nth + k]) + sm * x[interior + k]) / mass[k]
                } else {
                    bm[k] * x[k - nth] / mass[k]
                }
            })
            .collect();
        let accel = |n: usize, out: &mut [f64]| {
            let r = self.profile[n];
            out.iter_mut().zip(&spatial).for_each(|(o, s)| *o = r * s);
        };
        let gamma = g.gamma();
        let stencil = self.flux_stencil();
        let mut flux = Vec::with_capacity(g.time.levels());
        self.leapfrog.forward(
            &LinearInputs {
                y0: None,
                y1: None,
                accel: Some(&accel),
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
        let m = Self::flatten(&d_dt(&flux, g.time.dt));
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("measurement".into()));
        }
        Ok(m)
    }

    /// Euclidean transpose `Fᵀ`.
    pub fn apply_transpose(&self, m: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let na = g.n_active();
        let nth = g.ntheta;
        let gamma = g.gamma();
        let flux_bar = d_dt_transpose(&self.unflatten(m), g.time.dt);
        let stencil = self.flux_stencil();
        let op = &self.leapfrog.op;
        let mut spatial_bar = vec![0.0; na];
        self.leapfrog.transpose(
            |n, c| {
                for (k, &j) in gamma.iter().enumerate() {
                    for &(i, coef) in &stencil {
                        c[g.idx(i, j)] += coef * flux_bar[n][k];
                    }
                }
            },
            |n, abar| {
                let r = self.profile[n];
                spatial_bar.iter_mut().zip(abar).for_each(|(s, a)| *s += r * a);
            },
            |_, _| {},
        );
        let (mass, bm, sm) = (op.mass(), op.bulk_mass(), op.surf_mass());
        let interior = na - nth;
        let mut x = vec![0.0; na];
        for k in nth..na {
            x[k - nth] = bm[k] / mass[k] * spatial_bar[k];
        }
        for j in 0..nth {
            let s0 = bm[j] / mass[j] * spatial_bar[j];
            x[j] += 2.0 * s0;
            x[nth + j] -= s0;
            x[interior + j] = sm / mass[j] * spatial_bar[j];
        }
        x
    }

    /// Adjoint in the weighted inner products.
    pub fn adjoint(&self, m: &[f64]) -> Vec<f64> {
        let wm: Vec<f64> = m.iter().zip(&self.data_weights).map(|(v, w)| v * w).collect();
        self.apply_transpose(&wm)
            .iter()
            .zip(&self.param_weights)
            .map(|(v, w)| v / w)
            .collect()
    }

    /// Worst relative gap of `⟨Fx, y⟩` against `⟨x, F*y⟩` over random pairs.
    pub fn adjoint_test(&self, pairs: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..pairs {
            let x: Vec<f64> = (0..self.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..self.n_data()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = weighted_dot(&self.data_weights, &self.apply(&x)?, &y);
            let rhs = weighted_dot(&self.param_weights, &x, &self.adjoint(&y));
            worst = worst.max(relative_gap(lhs, rhs));
        }
        Ok(worst)
    }

    pub fn data_norm(&self, m: &[f64]) -> f64 {
        weighted_dot(&self.data_weights, m, m).sqrt()
    }

    pub fn param_norm(&self, x: &[f64]) -> f64 {
        weighted_dot(&self.param_weights, x, x).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub alpha: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub a: BulkField,
    pub b: SurfaceField,
    pub alpha: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    /// `‖F(a, b) − m_obs‖` in the data norm.
    pub misfit: f64,
}

/// Tikhonov reconstruction by CG on `(F*F + α) x = F* m_obs`.
pub fn reconstruct(model: &MeasurementModel, m_obs: &[f64], config: &ReconstructionConfig) -> Result<Reconstruction> {
    if m_obs.len() != model.n_data() {
        return Err(Error::Dimension(format!(
            "data has {} entries, model expects {}",
            m_obs.len(),
            model.n_data()
        )));
    }
    if !(config.alpha >= 0.0) {
        return Err(Error::Config("alpha must be nonnegative".into()));
    }
    let gap = model.adjoint_test(2, 0x5eed)?;
    if gap > ADJOINT_GATE_TOL {
        return Err(Error::AdjointMismatch {
            rel_err: gap,
            tol: ADJOINT_GATE_TOL,
        });
    }
    let rhs = model.adjoint(m_obs);
    let out = conjugate_gradient(
        |x| {
            let fx = model.apply(x)?;
            let mut y = model.adjoint(&fx);
            y.iter_mut().zip(x).for_each(|(y, x)| *y += config.alpha * x);
            Ok(y)
        },
        &rhs,
        model.param_weights(),
        CgOptions {
            tol: config.cg_tol,
            max_iters: config.cg_max_iters,
        },
    )?
    .require_converged(config.cg_tol)?;
    let fx = model.apply(&out.x)?;
    let resid: Vec<f64> = fx.iter().zip(m_obs).map(|(a, b)| a - b).collect();
    let (a, b) = model.unpack(&out.x);
    Ok(Reconstruction {
        a,
        b,
        alpha: config.alpha,
        iterations: out.iterations,
        history: out.history,
        misfit: model.data_norm(&resid),
    })
}

/// Discrepancy principle: the largest `α` in `alphas` (scanned in decreasing
/// order) whose misfit is at most `tau · noise_level`.
pub fn reconstruct_discrepancy(
    model: &MeasurementModel,
    m_obs: &[f64],
    noise_level: f64,
    tau: f64,
    alphas: &[f64],
    config: &ReconstructionConfig,
) -> Result<Reconstruction> {
    let mut sorted = alphas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut last = None;
    for alpha in sorted {
        let rec = reconstruct(model, m_obs, &ReconstructionConfig { alpha, ..*config })?;
        if rec.misfit <= tau * noise_level {
            return Ok(rec);
        }
        last = Some(rec);
    }
    last.ok_or_else(|| Error::Config("discrepancy principle needs at least one alpha".into()))
}

/// Relative `L²` error of a reconstruction, with `a` and `b` in their own norms.
pub fn relative_error(grid: &Grid, truth: (&BulkField, &SurfaceField), rec: (&BulkField, &SurfaceField)) -> f64 {
    let wb = grid.quadrature_bulk();
    let ws = grid.quadrature_surface(Boundary::Inner);
    let n2 = |w: &[f64], x: &[f64]| weighted_dot(w, x, x);
    let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>();
    let err = n2(&wb, &diff(&truth.0 .0, &rec.0 .0)) + n2(&ws, &diff(&truth.1 .0, &rec.1 .0));
    let norm = n2(&wb, &truth.0 .0) + n2(&ws, &truth.1 .0);
    (err / norm).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub c0: f64,
    /// Run even when `T ≤ T*`, for contrast; the report records the flag.
    pub allow_below_minimal_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSample {
    pub index: usize,
    pub source_norm: f64,
    pub measurement_norm: f64,
    pub ratio: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub samples: Vec<LipschitzSample>,
    pub min: f64,
    pub max: f64,
    pub median: f64,
    pub spread: f64,
    pub t: f64,
    pub t_star: f64,
    pub above_minimal_time: bool,
    pub all_admissible: bool,
}

impl LipschitzReport {
    pub fn from_samples(samples: Vec<LipschitzSample>, t: f64, t_star: f64) -> Self {
        let mut ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let n = ratios.len();
        let (min, max) = (ratios.first().copied().unwrap_or(0.0), ratios.last().copied().unwrap_or(0.0));
        let median = match n {
            0 => 0.0,
            _ if n % 2 == 1 => ratios[n / 2],
            _ => 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]),
        };
        Self {
            all_admissible: samples.iter().all(|s| s.admissible),
            samples,
            min,
            max,
            median,
            spread: if min > 0.0 { max / min } else { f64::INFINITY },
            t,
            t_star,
            above_minimal_time: t > t_star,
        }
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "index,source_norm,measurement_norm,ratio,admissible")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{}",
                s.index, s.source_norm, s.measurement_norm, s.ratio, s.admissible
            )?;
        }
        Ok(())
    }
}

/// Random smooth admissible source drawn from the `index`-th stream of `seed`.
pub fn random_source(grid: &Grid, seed: u64, index: usize, c0: f64) -> Result<SeparableSource> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let (r1, r2) = (grid.r1, grid.r2);
    let width = 0.15 * (r2 - r1);
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(r1..r2),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            )
        })
        .collect();
    let a = grid.sample(|r, th| {
        let taper = (r2 - r) / (r2 - r1);
        bumps
            .iter()
            .map(|&(amp, c, e, f)| {
                amp * (-(r - c).powi(2) / (2.0 * width * width)).exp() * (1.0 + e * th.cos() + f * th.sin())
            })
            .sum::<f64>()
            * taper
    });
    let coef: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let b = SurfaceField(
        (0..grid.ntheta)
            .map(|j| {
                let th = grid.theta(j);
                coef[0] + 0.5 * (coef[1] * th.cos() + coef[2] * th.sin())
            })
            .collect(),
    );
    let mut profile = TemporalProfile {
        modes: (0..2)
            .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.5..2.0)))
            .collect(),
    };
    let bound = profile.derivative_bound();
    if bound > 0.9 * c0 {
        let scale = 0.9 * c0 / bound;
        profile.modes.iter_mut().for_each(|m| m.0 *= scale);
    }
    SeparableSource::new(grid, a, b, &profile, c0)
}

/// Monte-Carlo stability ratios `(‖f‖ + ‖g‖) / ‖∂ₜ∂νy‖` on `γ × (0, T)`.
pub fn lipschitz_experiment(grid: &Grid, coeffs: &Coefficients, config: &LipschitzConfig) -> Result<LipschitzReport> {
    let t_star = annulus_minimal_time(grid.dim, grid.r1, grid.r2, coeffs.d, coeffs.delta)?;
    let t = grid.time.t_end();
    if t <= t_star && !config.allow_below_minimal_time {
        return Err(Error::Infeasible(format!(
            "T = {t} does not exceed the minimal time T* = {t_star}"
        )));
    }
    let samples = (0..config.n_samples)
        .into_par_iter()
        .map(|index| {
            let source = random_source(grid, config.seed, index, config.c0)?;
            let m = forward_measure(&source, grid, coeffs)?;
            Ok(sample_ratio(grid, &source, &m, index, config.c0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LipschitzReport::from_samples(samples, t, t_star))
}

/// One row of the stability report.
pub fn sample_ratio(grid: &Grid, source: &SeparableSource, m: &[Vec<f64>], index: usize, c0: f64) -> LipschitzSample {
    let tw = grid.time.weights();
    let sw = grid.surface_weight(Boundary::Outer);
    let m2: f64 = m
        .iter()
        .zip(&tw)
        .map(|(row, w)| w * sw * row.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let source_norm = source.norm(grid);
    let measurement_norm = m2.sqrt();
    LipschitzSample {
        index,
        source_norm,
        measurement_norm,
        ratio: source_norm / measurement_norm,
        admissible: check_admissible(source, c0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridConfig, TimeSpec};

    fn setup(t: f64) -> (Grid, Coefficients) {
        let g = Grid::build(&GridConfig::one_d(24, 1.0, 2.0), 1.0, 2.0, TimeSpec::forward(t)).unwrap();
        let c = Coefficients::constant(&g, 1.0, 2.0, 0.2, 0.1);
        (g, c)
    }

    #[test]
    fn zero_source_gives_zero_measurement() {
        let (g, c) = setup(1.0);
        let src = SeparableSource::new(&g, BulkField::zeros(&g), SurfaceField::zeros(&g), &TemporalProfile::constant(), 1.0)
            .unwrap();
        let m = forward_measure(&src, &g, &c).unwrap();
        assert!(m.iter().flatten().all(|&v| v == 0.0));
        let model = MeasurementModel::new(&g, &c, src.r.clone()).unwrap();
        assert!(model.adjoint(&vec![0.0; model.n_data()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn model_matches_full_solver() {
        let (g, c) = setup(1.5);
        let mut src = random_source(&g, 3, 0, 1.0).unwrap();
        let model = MeasurementModel::new(&g, &c, src.r.clone()).unwrap();
        let x = model.pack(&src.a, &src.b);
        src.a = model.unpack(&x).0;
        let direct = MeasurementModel::flatten(&forward_measure(&src, &g, &c).unwrap());
        let via = model.apply(&x).unwrap();
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in direct.iter().zip(&via) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        let (g, c) = setup(1.5);
        let profile = TemporalProfile { modes: vec![(0.3, 1.0)] };
        let src = SeparableSource::new(&g, BulkField::zeros(&g), SurfaceField::zeros(&g), &profile, 1.0).unwrap();
        let model = MeasurementModel::new(&g, &c, src.r).unwrap();
        assert!(model.adjoint_test(4, 11).unwrap() < 1e-12);
    }

    #[test]
    fn admissibility_is_derivative_bound() {
        let (g, _) = setup(2.0);
        let profile = TemporalProfile { modes: vec![(0.5, 2.0)] };
        let src = SeparableSource::new(&g, BulkField::zeros(&g), SurfaceField::zeros(&g), &profile, 1.0).unwrap();
        assert!(check_admissible(&src, 1.0));
        assert!(check_admissible(&src, 2.0));
        assert!(!check_admissible(&src, 0.99));
    }

    #[test]
    fn zero_data_reconstructs_zero() {
        let (g, c) = setup(1.0);
        let model = MeasurementModel::new(&g, &c, vec![1.0; g.time.levels()]).unwrap();
        let rec = reconstruct(
            &model,
            &vec![0.0; model.n_data()],
            &ReconstructionConfig { alpha: 1e-3, cg_tol: 1e-10, cg_max_iters: 10 },
        )
        .unwrap();
        assert!(rec.a.0.iter().chain(&rec.b.0).all(|&v| v == 0.0));
    }

    #[test]
    fn below_minimal_time_needs_opt_in() {
        let (g, c) = setup(1.0);
        let cfg = LipschitzConfig { n_samples: 1, seed: 1, c0: 1.0, allow_below_minimal_time: false };
        assert!(matches!(lipschitz_experiment(&g, &c, &cfg), Err(Error::Infeasible(_))));
        let rep = lipschitz_experiment(&g, &c, &LipschitzConfig { allow_below_minimal_time: true, ..cfg }).unwrap();
        assert!(!rep.above_minimal_time);
        assert_eq!(rep.samples.len(), 1);
    }
}
