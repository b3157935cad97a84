#![allow(dead_code)]

use dynwave::grid::{Grid, GridConfig, TimeSpec};
use dynwave::solver::{
    solve_forward, BoundaryData, Coefficients, FnForcing, InitialState, Trajectory,
};

/// Smooth manufactured solution vanishing on the outer boundary, with the
/// sources that make it exact for the continuous system.
pub struct Manufactured {
    pub d: f64,
    pub delta: f64,
    pub q: f64,
    pub q_gamma: f64,
    pub two_d: bool,
}

impl Manufactured {
    fn radial(r: f64) -> (f64, f64, f64) {
        // (2 − r)(1 + r²)
        (2.0 + 2.0 * r * r - r - r * r * r, 4.0 * r - 1.0 - 3.0 * r * r, 4.0 - 6.0 * r)
    }

    fn angular(&self, th: f64) -> (f64, f64) {
        if self.two_d {
            (1.0 + 0.3 * th.cos(), -0.3 * th.cos())
        } else {
            (1.0, 0.0)
        }
    }

    fn temporal(t: f64) -> (f64, f64, f64) {
        (
            (2.0 * t).cos() + t.sin(),
            -2.0 * (2.0 * t).sin() + t.cos(),
            -4.0 * (2.0 * t).cos() - t.sin(),
        )
    }

    pub fn y(&self, r: f64, th: f64, t: f64) -> f64 {
        Self::radial(r).0 * self.angular(th).0 * Self::temporal(t).0
    }

    pub fn y_t(&self, r: f64, th: f64, t: f64) -> f64 {
        Self::radial(r).0 * self.angular(th).0 * Self::temporal(t).1
    }

    pub fn f(&self, r: f64, th: f64, t: f64) -> f64 {
        let (a, a1, a2) = Self::radial(r);
        let (s, s2) = self.angular(th);
        let (tt, _, tt2) = Self::temporal(t);
        let lap = if self.two_d {
            (a2 + a1 / r) * s + a * s2 / (r * r)
        } else {
            a2 * s
        };
        a * s * tt2 - self.d * lap * tt + self.q * a * s * tt
    }

    /// Surface source on the inner boundary `r = 1`.
    pub fn g(&self, th: f64, t: f64) -> f64 {
        let (a, a1, _) = Self::radial(1.0);
        let (s, s2) = self.angular(th);
        let (tt, _, tt2) = Self::temporal(t);
        a * s * tt2 - self.delta * a * s2 * tt - self.d * a1 * s * tt + self.q_gamma * a * s * tt
    }

    pub fn grid(&self, n: usize, t: f64) -> Grid {
        let cfg = if self.two_d {
            GridConfig::annulus(n, n, 1.0, 2.0)
        } else {
            GridConfig::one_d(n, 1.0, 2.0)
        };
        Grid::build(&cfg, self.d, self.delta, TimeSpec::forward(t)).unwrap()
    }

    pub fn coefficients(&self, grid: &Grid) -> Coefficients {
        Coefficients::constant(grid, self.d, self.delta, self.q, self.q_gamma)
    }

    pub fn solve(&self, grid: &Grid) -> Trajectory {
        let init = InitialState {
            y0: grid.sample(|r, th| self.y(r, th, 0.0)),
            y1: grid.sample(|r, th| self.y_t(r, th, 0.0)),
        };
        let forcing = FnForcing::new(grid, |r, th, t| self.f(r, th, t), |th, t| self.g(th, t));
        solve_forward(grid, &self.coefficients(grid), &forcing, &BoundaryData::Zero, &init).unwrap()
    }

    /// Max-norm error over all nodes and levels.
    pub fn error(&self, grid: &Grid) -> f64 {
        let tr = self.solve(grid);
        let mut worst = 0.0f64;
        for (n, lvl) in tr.levels.iter().enumerate() {
            let t = grid.time.t(n);
            for i in 0..grid.nr {
                for j in 0..grid.ntheta {
                    let e = lvl[grid.idx(i, j)] - self.y(grid.radius(i), grid.theta(j), t);
                    worst = worst.max(e.abs());
                }
            }
        }
        worst
    }
}

pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
