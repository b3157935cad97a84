//! Term-by-term audit of the Carleman inequality on a discrete trajectory.
//!
//! Every integral is evaluated with grid quadrature in log space: the weight
//! `e^{2sφ}` times its polynomial prefactor becomes `exp(2sφ + k·λψ + ln(…) − A)`
//! with a common anchor `A`, so the ratio of both sides does not depend on `A`.
//! The constant of the inequality is unknown, so the audit reports
//! `LHS / RHS` with unit constant on every right-hand term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, GeometryCertificate};
use crate::grid::{Boundary, Grid};
use crate::solver::{residuals, Coefficients, Trajectory};
use crate::weights::{Feasibility, WeightParams, MAX_EXPONENT};

/// Left-hand terms in ledger order.
pub const LHS_TERMS: [&str; 7] = [
    "bulk_y",
    "bulk_grad",
    "bulk_dt",
    "surf_y",
    "surf_flux",
    "surf_dt",
    "surf_tangential",
];

/// Right-hand terms in ledger order; the last eight sit at `t = ±T`.
pub const RHS_TERMS: [&str; 11] = [
    "source_bulk",
    "source_surf",
    "obs_gamma",
    "bulk_energy_plus_t",
    "bulk_y_plus_t",
    "bulk_energy_minus_t",
    "bulk_y_minus_t",
    "surf_dt_plus_t",
    "surf_dt_minus_t",
    "surf_y_plus_t",
    "surf_y_minus_t",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanLedger {
    pub s: f64,
    pub lambda: f64,
    pub lhs: Vec<LedgerTerm>,
    pub rhs: Vec<LedgerTerm>,
    pub total_lhs: f64,
    pub total_rhs: f64,
    /// `total_lhs / total_rhs`, or 0 for a vanishing trajectory.
    pub ratio: f64,
    /// Log-weight anchor `A`: true integrals are the stored values times `e^A`.
    pub scale: f64,
    /// `C′d(δ − d) − 8βδ`.
    pub tangential_coefficient: f64,
    /// Sign of the tangential term: −1, 0 or 1, exact even when the stored
    /// entry underflows under the global anchor.
    pub tangential_sign: i8,
    /// Natural log of the tangential term's absolute value, without anchor.
    pub tangential_log_magnitude: f64,
    pub feasibility: Feasibility,
}

impl CarlemanLedger {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.lhs
            .iter()
            .chain(&self.rhs)
            .find(|t| t.name == name)
            .map(|t| t.value)
    }

    /// One row per term: `side,term,value`.
    pub fn write_csv(&self, out: &mut impl std::io::Write) -> Result<()> {
        writeln!(out, "side,term,value")?;
        for t in &self.lhs {
            writeln!(out, "lhs,{},{:.12e}", t.name, t.value)?;
        }
        for t in &self.rhs {
            writeln!(out, "rhs,{},{:.12e}", t.name, t.value)?;
        }
        Ok(())
    }
}

/// Precomputed inputs shared by every `(s, λ)` evaluation of one trajectory.
pub struct AuditInput<'a> {
    pub traj: &'a Trajectory,
    pub cert: &'a GeometryCertificate,
    /// `ψ₀` at every spatial node.
    psi0: Vec<f64>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

impl<'a> AuditInput<'a> {
    /// Recovers `f, g` as residuals of the trajectory and tabulates `ψ₀`.
    pub fn new(
        traj: &'a Trajectory,
        coeffs: &Coefficients,
        body: &ConvexBody,
        cert: &'a GeometryCertificate,
    ) -> Result<Self> {
        let grid = &traj.grid;
        if grid.time.nt < 2 {
            return Err(Error::Config("audit needs at least three time levels".into()));
        }
        let mut psi0 = Vec::with_capacity(grid.n_nodes());
        for i in 0..grid.nr {
            for j in 0..grid.ntheta {
                psi0.push(body.psi0(&grid.coords(i, j))?);
            }
        }
        let (f, g) = residuals(traj, coeffs)?;
        Ok(Self {
            traj,
            cert,
            psi0,
            f,
            g,
        })
    }
}

/// Spatial derivatives of one level: `|∇y|²` per node, `∂νy` on both rings and
/// `|∇_Γy_Γ|²` on `Γ¹`.
struct LevelDerivatives {
    grad2: Vec<f64>,
    flux_inner: Vec<f64>,
    flux_outer: Vec<f64>,
    tangential2: Vec<f64>,
}

fn level_derivatives(grid: &Grid, u: &[f64]) -> LevelDerivatives {
    let (nr, nth) = (grid.nr, grid.ntheta);
    let dr = grid.dr;
    let mut grad2 = vec![0.0; grid.n_nodes()];
    for i in 0..nr {
        let r = grid.radius(i);
        for j in 0..nth {
            let at = |ii: usize| u[grid.idx(ii, j)];
            let d_r = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dr)
            } else if i == nr - 1 {
                (3.0 * at(nr - 1) - 4.0 * at(nr - 2) + at(nr - 3)) / (2.0 * dr)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * dr)
            };
            let d_t = if grid.dim == 2 {
                let jp = (j + 1) % nth;
                let jm = (j + nth - 1) % nth;
                (u[grid.idx(i, jp)] - u[grid.idx(i, jm)]) / (2.0 * r * grid.dtheta)
            } else {
                0.0
            };
            grad2[grid.idx(i, j)] = d_r * d_r + d_t * d_t;
        }
    }
    let tangential2 = (0..nth)
        .map(|j| {
            if grid.dim == 2 {
                let jp = (j + 1) % nth;
                let jm = (j + nth - 1) % nth;
                let d = (u[jp] - u[jm]) / (2.0 * grid.r1 * grid.dtheta);
                d * d
            } else {
                0.0
            }
        })
        .collect();
    LevelDerivatives {
        grad2,
        flux_inner: grid.normal_derivative(u, Boundary::Inner),
        flux_outer: grid.normal_derivative(u, Boundary::Outer),
        tangential2,
    }
}

/// Evaluates the ledger with the default anchor.
pub fn evaluate(input: &AuditInput, params: &WeightParams) -> Result<CarlemanLedger> {
    evaluate_with_anchor(input, params, 0.0)
}

/// Evaluates the ledger with the anchor shifted by `anchor_shift`.
pub fn evaluate_with_anchor(input: &AuditInput, params: &WeightParams, anchor_shift: f64) -> Result<CarlemanLedger> {
    params.validate(input.cert)?;
    let traj = input.traj;
    let grid = &traj.grid;
    let ax = grid.time;
    let (s, lambda) = (params.s, params.lambda);
    let nn = grid.n_nodes();
    let nth = grid.ntheta;
    let psi_at = |k: usize, t: f64| input.psi0[k] - params.beta * t * t + params.c1;

    // Anchor: the largest log-integrand prefactor over the space-time grid.
    let psi_max = (0..=ax.nt)
        .flat_map(|n| (0..nn).map(move |k| (k, ax.t(n))))
        .map(|(k, t)| psi_at(k, t))
        .fold(f64::NEG_INFINITY, f64::max);
    if lambda * psi_max > MAX_EXPONENT {
        return Err(Error::WeightOverflow {
            exponent: lambda * psi_max,
            advice: "reduce lambda or C1 so that lambda * psi stays below 700".into(),
        });
    }
    let ln_sl = (s * lambda).ln();
    let anchor = 2.0 * s * (lambda * psi_max).exp() + 3.0 * (lambda * psi_max + ln_sl) + anchor_shift;
    // exp(2sφ + k(λψ + ln sλ) − A).
    let weight = |psi: f64, k: f64| (2.0 * s * (lambda * psi).exp() + k * (lambda * psi + ln_sl) - anchor).exp();

    let wb = grid.quadrature_bulk();
    let ws_in = grid.surface_weight(Boundary::Inner);
    let ws_out = grid.surface_weight(Boundary::Outer);
    let tw = ax.weights();
    let gamma = grid.gamma();
    let outer = (grid.nr - 1) * nth;

    // Interior-in-time integrals, one partial sum per level.
    let per_level: Vec<[f64; 10]> = (0..=ax.nt)
        .into_par_iter()
        .map(|n| {
            let t = ax.t(n);
            let u = traj.level(n);
            let v = traj.velocity(n);
            let der = level_derivatives(grid, u);
            let mut acc = [0.0; 10];
            for k in 0..nn {
                let psi = psi_at(k, t);
                let w1 = weight(psi, 1.0) * wb[k];
                if w1 == 0.0 {
                    continue;
                }
                acc[0] += weight(psi, 3.0) * wb[k] * u[k] * u[k];
                acc[1] += w1 * der.grad2[k];
                acc[2] += w1 * v[k] * v[k];
                acc[7] += weight(psi, 0.0) * wb[k] * input.f[n][k] * input.f[n][k];
            }
            for j in 0..nth {
                let psi = psi_at(j, t);
                let w1 = weight(psi, 1.0) * ws_in;
                acc[3] += weight(psi, 3.0) * ws_in * u[j] * u[j];
                acc[4] += w1 * der.flux_inner[j] * der.flux_inner[j];
                acc[5] += w1 * v[j] * v[j];
                acc[6] += w1 * der.tangential2[j];
                acc[8] += weight(psi, 0.0) * ws_in * input.g[n][j] * input.g[n][j];
            }
            for &j in gamma {
                let psi = psi_at(outer + j, t);
                acc[9] += weight(psi, 1.0) * ws_out * der.flux_outer[j] * der.flux_outer[j];
            }
            acc.iter_mut().for_each(|a| *a *= tw[n]);
            acc
        })
        .collect();
    let mut sums = [0.0; 10];
    for acc in &per_level {
        for (s, a) in sums.iter_mut().zip(acc) {
            *s += a;
        }
    }

    // Terms at t = ±T with one-sided time derivatives.
    let ends = |n: usize| -> [f64; 4] {
        let t = ax.t(n);
        let u = traj.level(n);
        let h2 = 2.0 * ax.dt;
        let vel: Vec<f64> = if n == 0 {
            (0..nn)
                .map(|k| (-3.0 * u[k] + 4.0 * traj.level(1)[k] - traj.level(2)[k]) / h2)
                .collect()
        } else {
            (0..nn)
                .map(|k| (3.0 * u[k] - 4.0 * traj.level(n - 1)[k] + traj.level(n - 2)[k]) / h2)
                .collect()
        };
        let der = level_derivatives(grid, u);
        let mut out = [0.0; 4];
        for k in 0..nn {
            let psi = psi_at(k, t);
            out[0] += weight(psi, 1.0) * wb[k] * (vel[k] * vel[k] + der.grad2[k]);
            out[1] += weight(psi, 3.0) * wb[k] * u[k] * u[k];
        }
        for j in 0..nth {
            let psi = psi_at(j, t);
            out[2] += weight(psi, 1.0) * ws_in * vel[j] * vel[j];
            out[3] += weight(psi, 3.0) * ws_in * u[j] * u[j];
        }
        out
    };
    let plus = ends(ax.nt);
    let minus = ends(0);

    let coef = params.tangential_coefficient(input.cert);
    let lhs_values = [sums[0], sums[1], sums[2], sums[3], sums[4], sums[5], coef * sums[6]];
    let rhs_values = [
        sums[7], sums[8], sums[9], plus[0], plus[1], minus[0], minus[1], plus[2], minus[2], plus[3], minus[3],
    ];
    if lhs_values.iter().chain(&rhs_values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Carleman ledger term".into()));
    }
    let total_lhs: f64 = lhs_values.iter().sum();
    let total_rhs: f64 = rhs_values.iter().sum();
    let ratio = if total_rhs == 0.0 && total_lhs == 0.0 {
        0.0
    } else {
        total_lhs / total_rhs
    };
    // The tangential integral can underflow under the global anchor, so its
    // sign comes from a surface-local anchor.
    let local_log = |n: usize, j: usize| {
        let psi = psi_at(j, ax.t(n));
        2.0 * s * (lambda * psi).exp() + lambda * psi + ln_sl
    };
    let surf_anchor = (0..=ax.nt)
        .flat_map(|n| (0..nth).map(move |j| (n, j)))
        .map(|(n, j)| local_log(n, j))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut local = 0.0;
    for n in 0..=ax.nt {
        let der = level_derivatives(grid, traj.level(n));
        for j in 0..nth {
            local += tw[n] * ws_in * (local_log(n, j) - surf_anchor).exp() * der.tangential2[j];
        }
    }
    let tangential_log_magnitude = local.ln() + surf_anchor + coef.abs().ln();
    Ok(CarlemanLedger {
        s,
        lambda,
        lhs: LHS_TERMS
            .iter()
            .zip(lhs_values)
            .map(|(n, v)| LedgerTerm { name: n.to_string(), value: v })
            .collect(),
        rhs: RHS_TERMS
            .iter()
            .zip(rhs_values)
            .map(|(n, v)| LedgerTerm { name: n.to_string(), value: v })
            .collect(),
        total_lhs,
        total_rhs,
        ratio,
        scale: anchor,
        tangential_coefficient: coef,
        tangential_sign: if local > 0.0 { coef.signum() as i8 * (coef != 0.0) as i8 } else { 0 },
        tangential_log_magnitude,
        feasibility: params.feasibility(input.cert),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub s: f64,
    pub ratio: f64,
    /// `(term, share of its side's total)` for every term.
    pub shares: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Smallest `(s₁, λ₁)` beyond which doubling `s` moves the ratio by less than 10%.
    pub empirical_threshold: Option<(f64, f64)>,
}

/// Relative change under doubling of `s` below which the ratio counts as stable.
pub const STABILITY_TOL: f64 = 0.1;

/// Evaluates every `(λ, s)` pair; rows sorted by `(λ, s)`.
pub fn scan(input: &AuditInput, params: &WeightParams, s_list: &[f64], lambda_list: &[f64]) -> Result<ScanReport> {
    let mut pairs: Vec<(f64, f64)> = lambda_list
        .iter()
        .flat_map(|&l| s_list.iter().map(move |&s| (l, s)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let rows = pairs
        .par_iter()
        .map(|&(lambda, s)| {
            let ledger = evaluate(input, &params.with_scales(s, lambda))?;
            let share = |t: &LedgerTerm, total: f64| (t.name.clone(), if total != 0.0 { t.value / total } else { 0.0 });
            Ok(ScanRow {
                lambda,
                s,
                ratio: ledger.ratio,
                shares: ledger
                    .lhs
                    .iter()
                    .map(|t| share(t, ledger.total_lhs))
                    .chain(ledger.rhs.iter().map(|t| share(t, ledger.total_rhs)))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let empirical_threshold = empirical_threshold(&rows);
    Ok(ScanReport {
        rows,
        empirical_threshold,
    })
}

/// For each `λ`, the smallest `s` after which consecutive ratios stay within
/// [`STABILITY_TOL`]; `λ₁` is the smallest `λ` from which every larger `λ`
/// also stabilizes, and `s₁` the largest threshold over those `λ`.
pub fn empirical_threshold(rows: &[ScanRow]) -> Option<(f64, f64)> {
    let mut lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    lambdas.dedup();
    let thresholds: Vec<Option<f64>> = lambdas
        .iter()
        .map(|&l| {
            let row: Vec<&ScanRow> = rows.iter().filter(|r| r.lambda == l).collect();
            if row.len() < 2 {
                return None;
            }
            let stable = |i: usize| {
                row[i..]
                    .windows(2)
                    .all(|w| ((w[1].ratio - w[0].ratio) / w[0].ratio).abs() < STABILITY_TOL)
            };
            (0..row.len() - 1).find(|&i| stable(i)).map(|i| row[i].s)
        })
        .collect();
    let mut result = None;
    for k in (0..lambdas.len()).rev() {
        match thresholds[k] {
            Some(s) => {
                let s1 = result.map_or(s, |(prev, _): (f64, f64)| prev.max(s));
                result = Some((s1, lambdas[k]));
            }
            None => break,
        }
    }
    result
}

pub fn write_scan_csv(report: &ScanReport, out: &mut impl std::io::Write) -> Result<()> {
    let names: Vec<&str> = LHS_TERMS.iter().chain(RHS_TERMS.iter()).copied().collect();
    write!(out, "lambda,s,ratio")?;
    for n in &names {
        write!(out, ",share_{n}")?;
    }
    writeln!(out)?;
    for r in &report.rows {
        write!(out, "{:.12e},{:.12e},{:.12e}", r.lambda, r.s, r.ratio)?;
        for (_, v) in &r.shares {
            write!(out, ",{v:.12e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Smooth trajectory on the grid's window vanishing on the outer ring.
pub fn manufactured_trajectory(grid: &Grid) -> Trajectory {
    let r2 = grid.r2;
    let two_d = grid.dim == 2;
    Trajectory::sample(grid, |r, th, t| {
        let angular = if two_d { 1.0 + 0.3 * th.cos() + 0.2 * (2.0 * th).sin() } else { 1.0 };
        (r2 - r) * (1.0 + 0.5 * r) * angular * ((0.7 * t).cos() + 0.4 * (1.3 * t).sin())
    })
}

/// `(max |∇_Γψ|, max |∇²_Γψ|)` on the inner boundary, by centered differences
/// along the body's boundary curve sampled at the grid angles.
pub fn tangential_flatness(body: &ConvexBody, grid: &Grid) -> Result<(f64, f64)> {
    if body.dim() != 2 || grid.dim != 2 {
        // A point has no tangential directions.
        return Ok((0.0, 0.0));
    }
    let nth = grid.ntheta;
    let pts: Vec<Vec<f64>> = (0..nth)
        .map(|j| {
            let th = grid.theta(j);
            body.boundary_point(&[th.cos(), th.sin()])
        })
        .collect();
    let vals = pts.iter().map(|p| body.psi0(p)).collect::<Result<Vec<_>>>()?;
    tangential_extrema(&pts, &vals)
}

/// Same extrema for `ζ = |x − x₀|² − βt² + C₀` on the inner circle.
pub fn off_center_tangential(grid: &Grid, x0: [f64; 2]) -> Result<(f64, f64)> {
    if grid.dim != 2 {
        return Ok((0.0, 0.0));
    }
    let pts: Vec<Vec<f64>> = (0..grid.ntheta).map(|j| grid.coords(0, j)).collect();
    let vals: Vec<f64> = pts
        .iter()
        .map(|p| (p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2))
        .collect();
    tangential_extrema(&pts, &vals)
}

fn tangential_extrema(pts: &[Vec<f64>], vals: &[f64]) -> Result<(f64, f64)> {
    let n = pts.len();
    let dist = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let (mut g, mut h) = (0.0f64, 0.0f64);
    for j in 0..n {
        let (jm, jp) = ((j + n - 1) % n, (j + 1) % n);
        let (hm, hp) = (dist(&pts[jm], &pts[j]), dist(&pts[j], &pts[jp]));
        if hm == 0.0 || hp == 0.0 {
            return Err(Error::Dimension("degenerate boundary sampling".into()));
        }
        let d1 = (vals[jp] - vals[jm]) / (hm + hp);
        let d2 = 2.0 * (hm * vals[jp] - (hm + hp) * vals[j] + hp * vals[jm]) / (hm * hp * (hm + hp));
        g = g.max(d1.abs());
        h = h.max(d2.abs());
    }
    Ok((g, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{certify, DomainSpec, Sampling};
    use crate::grid::{GridConfig, TimeSpec};

    fn setup(n: usize, t: f64) -> (Grid, Coefficients, ConvexBody, GeometryCertificate) {
        let cfg = GridConfig::annulus(n, n, 1.0, 2.0);
        let g = Grid::build(&cfg, 1.0, 2.0, TimeSpec::extended(t)).unwrap();
        let c = Coefficients::free(&g, 1.0, 2.0);
        let body = ConvexBody::ball(2, 1.0).unwrap();
        let cert = certify(&DomainSpec::new(body.clone(), 2.0).unwrap(), Sampling::default()).unwrap();
        (g, c, body, cert)
    }

    #[test]
    fn zero_trajectory_has_zero_ratio() {
        let (g, c, body, cert) = setup(12, 5.5);
        let traj = Trajectory::zeros(&g);
        let input = AuditInput::new(&traj, &c, &body, &cert).unwrap();
        let params = WeightParams::auto(&cert, 1.0, 2.0, 5.5, 1.0, 1.0).unwrap();
        let ledger = evaluate(&input, &params).unwrap();
        assert_eq!(ledger.ratio, 0.0);
        assert!(ledger.lhs.iter().chain(&ledger.rhs).all(|t| t.value == 0.0));
        assert_eq!(ledger.rhs.len(), 11);
    }

    #[test]
    fn ledger_is_quadratic_and_anchor_free() {
        let (g, c, body, cert) = setup(12, 5.5);
        let traj = manufactured_trajectory(&g);
        let scaled = traj.scaled(3.0);
        let params = WeightParams::auto(&cert, 1.0, 2.0, 5.5, 1.0, 2.0).unwrap();
        let base = evaluate(&AuditInput::new(&traj, &c, &body, &cert).unwrap(), &params).unwrap();
        let big = evaluate(&AuditInput::new(&scaled, &c, &body, &cert).unwrap(), &params).unwrap();
        for (a, b) in base.lhs.iter().chain(&base.rhs).zip(big.lhs.iter().chain(&big.rhs)) {
            assert!((b.value - 9.0 * a.value).abs() <= 1e-10 * b.value.abs().max(1e-300), "{}", a.name);
        }
        let input = AuditInput::new(&traj, &c, &body, &cert).unwrap();
        let shifted = evaluate_with_anchor(&input, &params, 5.0).unwrap();
        assert!((shifted.ratio - base.ratio).abs() <= 1e-10 * base.ratio);
        assert!((shifted.scale - base.scale - 5.0).abs() < 1e-9);
    }

    #[test]
    fn single_row_scan_matches_evaluate() {
        let (g, c, body, cert) = setup(12, 5.5);
        let traj = manufactured_trajectory(&g);
        let input = AuditInput::new(&traj, &c, &body, &cert).unwrap();
        let params = WeightParams::auto(&cert, 1.0, 2.0, 5.5, 2.0, 4.0).unwrap();
        let rep = scan(&input, &params, &[4.0], &[2.0]).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].ratio, evaluate(&input, &params).unwrap().ratio);
    }

    #[test]
    fn tangential_sign_follows_coefficient() {
        let (g, _, body, cert) = setup(12, 5.5);
        let c = Coefficients::free(&g, 1.0, 0.5);
        let traj = manufactured_trajectory(&g);
        let input = AuditInput::new(&traj, &c, &body, &cert).unwrap();
        let mut params = WeightParams::auto(&cert, 1.0, 2.0, 5.5, 1.0, 1.0).unwrap();
        params.delta = 0.5;
        let ledger = evaluate(&input, &params).unwrap();
        assert!(ledger.tangential_coefficient < 0.0);
        assert_eq!(ledger.tangential_sign, -1);
        assert!(!ledger.feasibility.delta_exceeds_d);
    }

    #[test]
    fn overflow_is_reported() {
        let (g, c, body, cert) = setup(12, 5.5);
        let traj = manufactured_trajectory(&g);
        let input = AuditInput::new(&traj, &c, &body, &cert).unwrap();
        let params = WeightParams::auto(&cert, 1.0, 2.0, 5.5, 200.0, 1.0).unwrap();
        assert!(matches!(evaluate(&input, &params), Err(Error::WeightOverflow { .. })));
    }

    #[test]
    fn threshold_picks_first_stable_pair() {
        let row = |lambda: f64, s: f64, ratio: f64| ScanRow { lambda, s, ratio, shares: vec![] };
        let rows = vec![
            row(1.0, 1.0, 1.0),
            row(1.0, 2.0, 2.0),
            row(1.0, 4.0, 2.1),
            row(2.0, 1.0, 1.0),
            row(2.0, 2.0, 1.05),
            row(2.0, 4.0, 1.06),
        ];
        assert_eq!(empirical_threshold(&rows), Some((2.0, 1.0)));
    }

    #[test]
    fn ball_is_flat_on_inner_boundary_unlike_off_center_weight() {
        let (g, ..) = setup(64, 1.0);
        let (d1, d2) = tangential_flatness(&ConvexBody::ball(2, 1.0).unwrap(), &g).unwrap();
        assert!(d1 <= 1e-12 && d2 <= 1e-12, "{d1} {d2}");
        let (z1, _) = off_center_tangential(&g, [0.3, 0.0]).unwrap();
        assert!(z1 > 0.1);
    }
}
