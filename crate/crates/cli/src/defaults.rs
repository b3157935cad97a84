//! Every default and tolerance used by the experiments, in one place.
//!
//! | key | default |
//! |-----|---------|
//! | `seed` | 2024 |
//! | `output` | `out` |
//! | `coefficients.q`, `coefficients.q_gamma` | 0 |
//! | `grid.nr`, `grid.ntheta` | 48, 48 |
//! | `grid.cfl_safety` | 0.5 |
//! | `certify.bulk_samples`, `certify.boundary_samples` | 10000, 1000 |
//! | `certify.t_factor` | 1.2 (`T = t_factor · T*`) |
//! | `weights.c1_margin` | 0.1 |
//! | `weights.lambda`, `weights.s` | 1, 1 |
//! | `counterexample.theta` | 0.7 |
//! | `counterexample.phi_min`, `phi_max`, `points` | 0.1, π − 0.1, 41 |
//! | `carleman.t_factor` | 1.1 |
//! | `carleman.s_values` | 2, 4, 8, 16, 32 |
//! | `carleman.lambda_values` | 1, 2, 4 |
//! | `carleman.off_center` | (0.25, 0) |
//! | `inverse.t_factor` | 1.2 |
//! | `inverse.alpha` | 1e-8 |
//! | `inverse.cg_tol`, `inverse.cg_max_iters` | 1e-10, 5000 |
//! | `inverse.noise` | 0 (relative) |
//! | `inverse.c0` | 1 |
//! | `inverse.lipschitz_samples` | 20 |
//! | `observability.factors` | 0.5, 0.75, 1, 1.25, 1.5 (`T = factor · 2T*`) |
//! | `observability.power_tol`, `max_power_iters` | 1e-6, 200 |
//! | `observability.inner_tol`, `max_inner_iters` | 1e-10, 2000 |
//! | `observability.filter_modes` | 8 |
//! | `observability.hum` | true |
//! | `observability.hum_factor` | 1.25 |
//! | `observability.hum_tol`, `hum_max_iters` | 1e-8, 5000 |

use std::f64::consts::PI;

pub const SEED: u64 = 2024;
pub const OUTPUT: &str = "out";

pub const NR: usize = 48;
pub const NTHETA: usize = 48;
pub const CFL_SAFETY: f64 = 0.5;

pub const BULK_SAMPLES: usize = 10_000;
pub const BOUNDARY_SAMPLES: usize = 1_000;
pub const CERTIFY_T_FACTOR: f64 = 1.2;

pub const C1_MARGIN: f64 = 0.1;
pub const LAMBDA: f64 = 1.0;
pub const S: f64 = 1.0;

pub const CE_THETA: f64 = 0.7;
pub const CE_PHI_MIN: f64 = 0.1;
pub const CE_PHI_MAX: f64 = PI - 0.1;
pub const CE_POINTS: usize = 41;

pub const CARLEMAN_T_FACTOR: f64 = 1.1;
pub const S_VALUES: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];
pub const LAMBDA_VALUES: [f64; 3] = [1.0, 2.0, 4.0];
pub const OFF_CENTER: [f64; 2] = [0.25, 0.0];

pub const INVERSE_T_FACTOR: f64 = 1.2;
pub const ALPHA: f64 = 1e-8;
pub const CG_TOL: f64 = 1e-10;
pub const CG_MAX_ITERS: usize = 5000;
pub const NOISE: f64 = 0.0;
pub const C0: f64 = 1.0;
pub const LIPSCHITZ_SAMPLES: usize = 20;

pub const OBS_FACTORS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];
pub const POWER_TOL: f64 = 1e-6;
pub const MAX_POWER_ITERS: usize = 200;
pub const INNER_TOL: f64 = 1e-10;
pub const MAX_INNER_ITERS: usize = 2000;
pub const FILTER_MODES: usize = 8;
pub const HUM: bool = true;
pub const HUM_FACTOR: f64 = 1.25;
pub const HUM_TOL: f64 = 1e-8;
pub const HUM_MAX_ITERS: usize = 5000;
