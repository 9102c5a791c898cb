use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{solve_tridiagonal_complex, Grid};
use crate::model::{nonlinearity_complex, ModelParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Crank-Nicolson factors for `u_t = -i (K + c W) u / (s W)` on a graded
/// radial grid: `(W + i tau A) u+ = (W - i tau A) u`, `tau = dt / 2`.
#[derive(Debug, Clone)]
struct CrankNicolson {
    w: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
    lower: Vec<Complex64>,
    main: Vec<Complex64>,
    upper: Vec<Complex64>,
    tau: f64,
}

impl CrankNicolson {
    fn new(w: &[f64], k_diag: &[f64], k_off: &[f64], shift: f64, scale: f64, dt: f64) -> Self {
        let diag: Vec<f64> = k_diag.iter().zip(w).map(|(k, w)| (k + shift * w) / scale).collect();
        let off: Vec<f64> = k_off.iter().map(|k| k / scale).collect();
        let tau = 0.5 * dt;
        let main = w.iter().zip(&diag).map(|(&w, &d)| Complex64::new(w, tau * d)).collect();
        let upper: Vec<Complex64> = off.iter().map(|&o| I * (tau * o)).collect();
        Self { w: w.to_vec(), diag, off, lower: upper.clone(), main, upper, tau }
    }

    fn apply(&self, f: &mut [Complex64]) {
        let n = f.len();
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut a = self.diag[i] * f[i];
                if i > 0 {
                    a += self.off[i - 1] * f[i - 1];
                }
                if i + 1 < n {
                    a += self.off[i] * f[i + 1];
                }
                self.w[i] * f[i] - I * (self.tau * a)
            })
            .collect();
        solve_tridiagonal_complex(&self.lower, &self.main, &self.upper, &mut rhs);
        f.copy_from_slice(&rhs);
    }
}

#[derive(Debug, Clone)]
enum Linear {
    Fourier,
    Radial { u: CrankNicolson, v: CrankNicolson },
}

/// Strang splitting: half a nonlinear step (one RK4 step of the pointwise
/// ODE `u' = i N1`, `s v' = i N2`), the exact or Crank-Nicolson linear flow,
/// and another half nonlinear step.
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: Arc<Grid>,
    params: ModelParams,
    dt: f64,
    linear: Linear,
}

impl SplitStep {
    pub fn new(grid: Arc<Grid>, params: ModelParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let linear = Self::linear(&grid, &params, dt)?;
        Ok(Self { grid, params, dt, linear })
    }

    fn linear(grid: &Grid, params: &ModelParams, dt: f64) -> Result<Linear> {
        match grid {
            Grid::Periodic(_) => Ok(Linear::Fourier),
            Grid::Radial(g) => {
                let (kd, ko) = g.stiffness_tridiagonal().ok_or_else(|| {
                    Error::Unsupported("evolution on radial grids needs the graded scheme".into())
                })?;
                let w = g.weights();
                Ok(Linear::Radial {
                    u: CrankNicolson::new(w, &kd, &ko, 1.0, 1.0, dt),
                    v: CrankNicolson::new(w, &kd, &ko, params.mu, params.sigma, dt),
                })
            }
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if dt != self.dt {
            self.linear = Self::linear(&self.grid, &self.params, dt)?;
            self.dt = dt;
        }
        Ok(())
    }

    fn nonlinear(&self, u: &mut [Complex64], v: &mut [Complex64], h: f64) {
        let s = 1.0 / self.params.sigma;
        let rhs = |a: Complex64, b: Complex64| {
            let (n1, n2) = nonlinearity_complex(a, b);
            (I * n1, I * (s * n2))
        };
        for (a, b) in u.iter_mut().zip(v.iter_mut()) {
            let (k1u, k1v) = rhs(*a, *b);
            let (k2u, k2v) = rhs(*a + 0.5 * h * k1u, *b + 0.5 * h * k1v);
            let (k3u, k3v) = rhs(*a + 0.5 * h * k2u, *b + 0.5 * h * k2v);
            let (k4u, k4v) = rhs(*a + h * k3u, *b + h * k3v);
            *a += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
            *b += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
    }

    fn linear_step(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        match (&self.linear, self.grid.as_ref()) {
            (Linear::Fourier, Grid::Periodic(g)) => {
                let dt = self.dt;
                let (mu, sigma) = (self.params.mu, self.params.sigma);
                g.apply_radial_multiplier(u, |k2| Complex64::from_polar(1.0, -(k2 + 1.0) * dt));
                g.apply_radial_multiplier(v, |k2| Complex64::from_polar(1.0, -(k2 + mu) * dt / sigma));
            }
            (Linear::Radial { u: cu, v: cv }, _) => {
                cu.apply(u);
                cv.apply(v);
            }
            _ => unreachable!("linear propagator does not match the grid"),
        }
    }

    /// Advances `(u, v)` by one step `dt`.
    pub fn step(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        self.nonlinear(u, v, 0.5 * self.dt);
        self.linear_step(u, v);
        self.nonlinear(u, v, 0.5 * self.dt);
    }
}
