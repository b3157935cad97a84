//! One runner per subcommand. Each writes its CSV/JSON artifacts into the
//! output directory and returns the `result` block of `report.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dynwave::carleman::{
    evaluate, off_center_tangential, manufactured_trajectory, scan, tangential_flatness, write_scan_csv, AuditInput,
};
use dynwave::geometry::{
    certify, counterexample_hessian_in, spectral_distance_to_2i, GeometryCertificate, HessianBasis, Sampling,
};
use dynwave::grid::{Grid, GridConfig, TimeSpec};
use dynwave::inverse::{
    forward_measure, lipschitz_experiment, random_source, reconstruct, relative_error, LipschitzConfig,
    MeasurementModel, ReconstructionConfig,
};
use dynwave::observability::{
    gramian_symmetry, hum_control, observability_sweep, write_sweep_csv, ObservabilityOptions, SweepRow,
};
use dynwave::solver::{Coefficients, InitialState};
use dynwave::weights::{annulus_minimal_time, beta_window, minimal_time, pick_c1, WeightParams};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Needs};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Tolerance of the monotonicity flag reported for the sweep.
const SWEEP_MONOTONE_TOL: f64 = 0.05;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut f = create(dir, name)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn sampling(cfg: &ExperimentConfig) -> Sampling {
    Sampling {
        bulk: cfg.certify.bulk_samples,
        boundary: cfg.certify.boundary_samples,
    }
}

fn solver_grid(cfg: &ExperimentConfig, time: TimeSpec) -> Result<(Grid, Coefficients)> {
    cfg.require(Needs::Solver)?;
    let (r1, r2, g) = (cfg.r1(), cfg.domain.outer_radius, &cfg.grid);
    let mut gc = if cfg.domain.dim == 1 {
        GridConfig::one_d(g.nr, r1, r2)
    } else {
        GridConfig::annulus(g.nr, g.ntheta, r1, r2)
    };
    gc.cfl_safety = g.cfl_safety;
    let c = &cfg.coefficients;
    let grid = Grid::build(&gc, c.d, c.delta, time)?;
    let coeffs = Coefficients::constant(&grid, c.d, c.delta, c.q, c.q_gamma);
    Ok((grid, coeffs))
}

fn weight_params(cfg: &ExperimentConfig, cert: &GeometryCertificate, t: f64) -> Result<WeightParams> {
    let (d, delta, w) = (cfg.coefficients.d, cfg.coefficients.delta, &cfg.weights);
    let beta = match w.beta {
        Some(b) => b,
        None => {
            let win = beta_window(cert, d, delta, t)?;
            0.5 * (win.lo + win.hi)
        }
    };
    Ok(WeightParams {
        d,
        delta,
        beta,
        c1: w.c1.unwrap_or_else(|| pick_c1(beta, t, cert, w.c1_margin)),
        lambda: w.lambda,
        s: w.s,
        t_half: t,
    })
}

pub fn certify_geometry(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let cert = certify(&cfg.domain_spec()?, sampling(cfg))?;
    info!("certified: rho = {}, C' = {}", cert.rho, cert.c_prime);
    let (d, delta) = (cfg.coefficients.d, cfg.coefficients.delta);
    let t_star = minimal_time(&cert, d, delta)?;
    let t = cfg.certify.t_factor * t_star;
    let (window, beta, c1, note) = match beta_window(&cert, d, delta, t) {
        Ok(w) => {
            let beta = 0.5 * (w.lo + w.hi);
            (json!({ "lo": w.lo, "hi": w.hi }), Some(beta), Some(pick_c1(beta, t, &cert, cfg.weights.c1_margin)), None)
        }
        Err(e @ dynwave::Error::EmptyBetaWindow { .. }) => (Value::Null, None, None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let record = json!({
        "rho": cert.rho,
        "c_prime": cert.c_prime,
        "d0": cert.d0,
        "d1": cert.d1,
        "gamma_fraction": cert.gamma_fraction,
        "gamma_is_full": cert.gamma_is_full(),
        "dim": cert.dim,
        "passed": cert.passed(),
        "checks": cert.checks,
        "t_star": t_star,
        "t": t,
        "beta_window": window,
        "beta_suggestion": beta,
        "c1_suggestion": c1,
        "note": note,
    });
    write_json(out, "certificate.json", &record)?;
    Ok(record)
}

pub fn counterexample(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let ce = &cfg.counterexample;
    let mut f = create(out, "counterexample.csv")?;
    writeln!(
        f,
        "phi,coord_h11,coord_h12,coord_h22,coord_distance,frame_h11,frame_h12,frame_h22,frame_distance"
    )?;
    let mut max_dev = 0.0f64;
    for k in 0..ce.points {
        let phi = ce.phi_min + (ce.phi_max - ce.phi_min) * k as f64 / (ce.points - 1) as f64;
        let hc = counterexample_hessian_in(HessianBasis::Coordinate, ce.theta, phi)?;
        let hf = counterexample_hessian_in(HessianBasis::Frame, ce.theta, phi)?;
        let (s, c) = phi.sin_cos();
        let dev = [hc[(0, 0)] - 4.0 * s * s * c, hc[(0, 1)], hc[(1, 1)] - 4.0 * c];
        max_dev = dev.iter().fold(max_dev, |m, v| m.max(v.abs()));
        writeln!(
            f,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            phi,
            hc[(0, 0)],
            hc[(0, 1)],
            hc[(1, 1)],
            spectral_distance_to_2i(&hc),
            hf[(0, 0)],
            hf[(0, 1)],
            hf[(1, 1)],
            spectral_distance_to_2i(&hf)
        )?;
    }
    f.flush()?;
    let equator = counterexample_hessian_in(HessianBasis::Coordinate, ce.theta, std::f64::consts::FRAC_PI_2)?;
    Ok(json!({
        "theta": ce.theta,
        "points": ce.points,
        "max_deviation_from_closed_form": max_dev,
        "distance_to_2i_at_equator": spectral_distance_to_2i(&equator),
    }))
}

pub fn audit_carleman(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    cfg.require(Needs::Solver)?;
    let body = cfg.body()?;
    let cert = certify(&cfg.domain_spec()?, sampling(cfg))?;
    let (d, delta) = (cfg.coefficients.d, cfg.coefficients.delta);
    let t_star = minimal_time(&cert, d, delta)?;
    let t = cfg.carleman.t_factor * t_star;
    let (grid, coeffs) = solver_grid(cfg, TimeSpec::extended(t))?;
    info!("audit grid: {} nodes, {} levels", grid.n_nodes(), grid.time.levels());
    let traj = manufactured_trajectory(&grid);
    let input = AuditInput::new(&traj, &coeffs, &body, &cert)?;
    let params = weight_params(cfg, &cert, t)?;

    let ledger = evaluate(&input, &params)?;
    let mut f = create(out, "ledger.csv")?;
    ledger.write_csv(&mut f)?;
    f.flush()?;

    let report = scan(&input, &params, &cfg.carleman.s_values, &cfg.carleman.lambda_values)?;
    let mut f = create(out, "scan.csv")?;
    write_scan_csv(&report, &mut f)?;
    f.flush()?;

    let (flat_g, flat_h) = tangential_flatness(&body, &grid)?;
    let (gt_g, gt_h) = off_center_tangential(&grid, cfg.carleman.off_center)?;
    Ok(json!({
        "t_star": t_star,
        "t": t,
        "weights": params,
        "ledger": ledger,
        "empirical_threshold": report.empirical_threshold.map(|(s, l)| json!({ "s1": s, "lambda1": l })),
        "tangential_flatness": { "max_gradient": flat_g, "max_hessian": flat_h },
        "off_center_weight": {
            "center": cfg.carleman.off_center,
            "max_gradient": gt_g,
            "max_hessian": gt_h,
        },
    }))
}

pub fn invert_source(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    cfg.require(Needs::Solver)?;
    let inv = &cfg.inverse;
    let (d, delta) = (cfg.coefficients.d, cfg.coefficients.delta);
    let t_star = annulus_minimal_time(cfg.domain.dim, cfg.r1(), cfg.domain.outer_radius, d, delta)?;
    let t = inv.t_factor * t_star;
    let (grid, coeffs) = solver_grid(cfg, TimeSpec::forward(t))?;

    let truth = random_source(&grid, cfg.seed, 0, inv.c0)?;
    let clean = MeasurementModel::flatten(&forward_measure(&truth, &grid, &coeffs)?);
    let model = MeasurementModel::new(&grid, &coeffs, truth.r.clone())?;
    let data = if inv.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::MAX);
        let raw: Vec<f64> = clean.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let scale = inv.noise * model.data_norm(&clean) / model.data_norm(&raw);
        clean.iter().zip(&raw).map(|(m, e)| m + scale * e).collect()
    } else {
        clean.clone()
    };
    let adjoint_gap = model.adjoint_test(2, cfg.seed)?;
    let rec = reconstruct(
        &model,
        &data,
        &ReconstructionConfig {
            alpha: inv.alpha,
            cg_tol: inv.cg_tol,
            cg_max_iters: inv.cg_max_iters,
        },
    )?;
    info!("reconstruction: {} CG iterations", rec.iterations);
    let error = relative_error(&grid, (&truth.a, &truth.b), (&rec.a, &rec.b));

    let mut f = create(out, "reconstruction_a.csv")?;
    writeln!(f, "r,theta,true,reconstructed")?;
    for i in 0..grid.nr {
        for j in 0..grid.ntheta {
            let k = grid.idx(i, j);
            writeln!(
                f,
                "{:.12e},{:.12e},{:.12e},{:.12e}",
                grid.radius(i),
                grid.theta(j),
                truth.a.0[k],
                rec.a.0[k]
            )?;
        }
    }
    f.flush()?;
    let mut f = create(out, "reconstruction_b.csv")?;
    writeln!(f, "theta,true,reconstructed")?;
    for j in 0..grid.ntheta {
        writeln!(f, "{:.12e},{:.12e},{:.12e}", grid.theta(j), truth.b.0[j], rec.b.0[j])?;
    }
    f.flush()?;

    let lip = lipschitz_experiment(
        &grid,
        &coeffs,
        &LipschitzConfig {
            n_samples: inv.lipschitz_samples,
            seed: cfg.seed,
            c0: inv.c0,
            allow_below_minimal_time: true,
        },
    )?;
    let mut f = create(out, "lipschitz.csv")?;
    lip.write_csv(&mut f)?;
    f.flush()?;

    Ok(json!({
        "t_star": t_star,
        "t": t,
        "adjoint_gap": adjoint_gap,
        "relative_error": error,
        "cg_iterations": rec.iterations,
        "cg_history": rec.history,
        "misfit": rec.misfit,
        "alpha": rec.alpha,
        "lipschitz": {
            "min": lip.min,
            "max": lip.max,
            "median": lip.median,
            "spread": lip.spread,
            "above_minimal_time": lip.above_minimal_time,
            "all_admissible": lip.all_admissible,
        },
    }))
}

fn non_increasing(values: impl Iterator<Item = Option<f64>>) -> Option<bool> {
    let v: Option<Vec<f64>> = values.collect();
    v.map(|v| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + SWEEP_MONOTONE_TOL)))
}

/// Smooth initial state vanishing on the outer circle, used for the control run.
pub fn control_initial_state(grid: &Grid) -> InitialState {
    let r2 = grid.r2;
    InitialState {
        y0: grid.sample(|r, th| (r2 - r) * (1.0 + (2.0 * r).cos()) * (1.0 + 0.3 * th.cos())),
        y1: grid.sample(|r, th| 0.5 * (r2 - r) * (r - grid.r1) * (1.0 + 0.2 * th.sin())),
    }
}

pub fn observability(cfg: &ExperimentConfig, out: &Path) -> Result<Value> {
    let ob = &cfg.observability;
    let (d, delta) = (cfg.coefficients.d, cfg.coefficients.delta);
    let (grid, coeffs) = solver_grid(cfg, TimeSpec::forward(1.0))?;
    let two_t_star = 2.0 * annulus_minimal_time(grid.dim, grid.r1, grid.r2, d, delta)?;
    let opts = ObservabilityOptions {
        power_tol: ob.power_tol,
        max_power_iters: ob.max_power_iters,
        inner_tol: ob.inner_tol,
        max_inner_iters: ob.max_inner_iters,
        filter_modes: ob.filter_modes,
        seed: cfg.seed,
    };
    let rows: Vec<SweepRow> = observability_sweep(&grid, &coeffs, &ob.factors, &opts)?;
    let mut f = create(out, "obs_sweep.csv")?;
    write_sweep_csv(&rows, &mut f)?;
    f.flush()?;

    let control = if ob.hum {
        let g = grid.with_time(d, delta, TimeSpec::forward(ob.hum_factor * two_t_star))?;
        let res = hum_control(&g, &coeffs, &control_initial_state(&g), ob.hum_tol, ob.hum_max_iters)?;
        info!("control: {} CG iterations", res.cg_iterations);
        let symmetry = gramian_symmetry(&g, &coeffs, 5, cfg.seed)?;
        let mut f = create(out, "hum_control.csv")?;
        write!(f, "level,t")?;
        for &k in g.gamma() {
            write!(f, ",v_{k}")?;
        }
        writeln!(f)?;
        for (n, row) in res.v.iter().enumerate() {
            write!(f, "{n},{:.12e}", g.time.t(n))?;
            for v in row {
                write!(f, ",{v:.12e}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        json!({
            "t": g.time.t_end(),
            "terminal_energy_ratio": res.terminal_energy_ratio,
            "controlled_energy": res.controlled_energy,
            "uncontrolled_energy": res.uncontrolled_energy,
            "cg_iterations": res.cg_iterations,
            "cg_residual_history": res.cg_residual_history,
            "converged": res.converged,
            "within_guarantee": res.within_guarantee,
            "gramian_symmetry": symmetry,
        })
    } else {
        Value::Null
    };
    Ok(json!({
        "two_t_star": two_t_star,
        "sweep": rows,
        "raw_non_increasing": non_increasing(rows.iter().map(|r| Some(r.c_obs_raw))),
        "filtered_non_increasing": non_increasing(rows.iter().map(|r| r.c_obs_filtered)),
        "control": control,
    }))
}
