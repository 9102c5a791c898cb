use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::{Provenance, WaveProfile};
use crate::error::{Error, Result};
use crate::grid::{rearrange_decreasing, symmetrize_ties, Field, Grid};
use crate::grid::Sector;
use crate::linop::{LinearizedOperators, Which};
use crate::model::{self, nonlinearity, ModelParams};

#[derive(Debug, Clone)]
pub struct NormalizedOptions {
    /// Target for the weighted `L^2` norm of `E'(x) + omega M'(x) / 2`.
    pub tol: f64,
    /// Descent stops at this residual and hands over to Newton polishing.
    pub descent_tol: f64,
    /// Residual below which a stalled descent is still handed to Newton.
    pub newton_start: f64,
    pub max_iter: usize,
    pub newton_iter: usize,
    pub rearrange_every: usize,
    pub width: f64,
    pub ratio: f64,
}

impl Default for NormalizedOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            descent_tol: 1e-6,
            newton_start: 1e-3,
            max_iter: 200_000,
            newton_iter: 30,
            rearrange_every: 10,
            width: 1.0,
            ratio: 1.0 / 3.0,
        }
    }
}

struct Iterate {
    u: Vec<f64>,
    v: Vec<f64>,
    energy: f64,
}

fn rescale_mass(grid: &Grid, u: &mut [f64], v: &mut [f64], params: &ModelParams, lambda: f64) -> Result<()> {
    let m = model::mass(grid, u, v, params)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Degenerate(format!("mass became {m}")));
    }
    let s = (lambda / m).sqrt();
    u.iter_mut().chain(v.iter_mut()).for_each(|x| *x *= s);
    Ok(())
}

fn gradient(grid: &Grid, u: &[f64], v: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
    let lu = grid.laplacian(u);
    let lv = grid.laplacian(v);
    let mut g1 = Vec::with_capacity(u.len());
    let mut g2 = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let (n1, n2) = nonlinearity(u[i], v[i]);
        g1.push(-lu[i] + u[i] - n1);
        g2.push(-lv[i] + mu * v[i] - n2);
    }
    (g1, g2)
}

/// Newton iteration on `(P, Q, omega)` for the elliptic system with the mass
/// constraint, bordering `L+` by `(P, 3 sigma Q)`. Returns the multiplier and
/// the weighted `L^2` residual.
fn newton_polish(
    grid: &Arc<Grid>,
    params: &ModelParams,
    lambda: f64,
    u: &mut [f64],
    v: &mut [f64],
    mut omega: f64,
    opts: &NormalizedOptions,
) -> Result<(f64, f64)> {
    let n = u.len();
    let sector = if grid.is_radial() { Sector::Angular(0) } else { Sector::Full };
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let c = 3.0 * params.sigma;
    let mut res = f64::INFINITY;
    for it in 0..=opts.newton_iter {
        let p = ModelParams::new(params.n, omega, params.mu, params.sigma)?;
        let (r1, r2) = model::elliptic_residual(grid, u, v, &p)?;
        res = (grid.inner(&r1, &r1) + grid.inner(&r2, &r2)).sqrt();
        let dm = model::mass(grid, u, v, &p)? - lambda;
        debug!("newton it={it} omega={omega:.15} res={res:.3e} dM={dm:.3e}");
        if (res < opts.tol && dm.abs() < 1e-12 * lambda) || it == opts.newton_iter {
            break;
        }
        let wave = WaveProfile::from_fields(
            Field::new(grid.clone(), u.to_vec())?,
            Field::new(grid.clone(), v.to_vec())?,
            p,
            Provenance::Normalized,
        )?;
        let a = LinearizedOperators::new(&wave).dense(Which::Plus, sector)?;
        let mut m = DMatrix::zeros(2 * n + 1, 2 * n + 1);
        m.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&a);
        let mut rhs = DVector::zeros(2 * n + 1);
        for i in 0..n {
            m[(i, 2 * n)] = sw[i] * u[i];
            m[(2 * n, i)] = sw[i] * u[i];
            m[(n + i, 2 * n)] = sw[i] * c * v[i];
            m[(2 * n, n + i)] = sw[i] * c * v[i];
            rhs[i] = -sw[i] * r1[i];
            rhs[n + i] = -sw[i] * r2[i];
        }
        rhs[2 * n] = -0.5 * dm;
        let d = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Degenerate("singular bordered Jacobian in Newton polishing".into()))?;
        for i in 0..n {
            u[i] += d[i] / sw[i];
            v[i] += d[n + i] / sw[i];
        }
        omega += d[2 * n];
    }
    Ok((omega, res))
}

/// Minimizes `E` subject to `M = lambda` by preconditioned projected descent
/// with mass renormalization. Every accepted step lowers `E`.
///
/// `params.omega` is ignored on input; the returned profile carries the
/// least-squares multiplier, and the closed-form multiplier
/// `(4 int F - K - |P|^2 - mu |Q|^2) / lambda` is stored alongside.
pub fn solve_normalized(
    grid: Arc<Grid>,
    params: &ModelParams,
    lambda: f64,
    opts: &NormalizedOptions,
) -> Result<WaveProfile> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass constraint must be positive, got {lambda}")));
    }
    if grid.dim() != params.n {
        return Err(Error::InvalidParameter(format!(
            "grid dimension {} does not match n = {}",
            grid.dim(),
            params.n
        )));
    }
    let (mu, sigma) = (params.mu, params.sigma);
    let radii = grid.radii();
    let mut u: Vec<f64> = radii.iter().map(|r| (-0.5 * (r / opts.width).powi(2)).exp()).collect();
    let mut v: Vec<f64> = u.iter().map(|x| opts.ratio * x).collect();
    rescale_mass(&grid, &mut u, &mut v, params, lambda)?;
    let energy = model::energy(&grid, &u, &v, params)?;
    let mut x = Iterate { u, v, energy };

    let mut omega = 0.0;
    let mut tau = 1.0;
    let mut res = f64::INFINITY;
    let mut it = 0;
    let mut best = x.energy;
    let mut stalled = 0;
    while it < opts.max_iter {
        it += 1;
        let (g1, g2) = gradient(&grid, &x.u, &x.v, mu);
        let z2: Vec<f64> = x.v.iter().map(|v| 3.0 * sigma * v).collect();
        // least-squares multiplier and residual
        let zz = grid.inner(&x.u, &x.u) + grid.inner(&z2, &z2);
        omega = -(grid.inner(&g1, &x.u) + grid.inner(&g2, &z2)) / zz;
        let r1: Vec<f64> = (0..g1.len()).map(|i| g1[i] + omega * x.u[i]).collect();
        let r2: Vec<f64> = (0..g2.len()).map(|i| g2[i] + omega * z2[i]).collect();
        res = (grid.inner(&r1, &r1) + grid.inner(&r2, &r2)).sqrt();
        if it % 1000 == 0 {
            debug!("normalized it={it} E={:.15e} omega={omega:.12} res={res:.3e}", x.energy);
        }
        if res < opts.descent_tol.max(opts.tol) {
            break;
        }
        let a1 = (1.0 + omega).max(0.25);
        let a2 = (mu + 3.0 * sigma * omega).max(0.25);
        let h1 = grid.helmholtz(a1)?;
        let h2 = grid.helmholtz(a2)?;
        let pg1 = h1.solve(&g1)?;
        let pg2 = h2.solve(&g2)?;
        let pz1 = h1.solve(&x.u)?;
        let pz2 = h2.solve(&z2)?;
        // tangent multiplier in the preconditioned metric
        let k = -(grid.inner(&x.u, &pg1) + grid.inner(&z2, &pg2))
            / (grid.inner(&x.u, &pz1) + grid.inner(&z2, &pz2));
        let d1: Vec<f64> = (0..g1.len()).map(|i| -(pg1[i] + k * pz1[i])).collect();
        let d2: Vec<f64> = (0..g2.len()).map(|i| -(pg2[i] + k * pz2[i])).collect();

        let mut accepted = None;
        let mut step = tau;
        for _ in 0..40 {
            let mut u: Vec<f64> = (0..d1.len()).map(|i| x.u[i] + step * d1[i]).collect();
            let mut v: Vec<f64> = (0..d2.len()).map(|i| x.v[i] + step * d2[i]).collect();
            if !grid.is_radial() && opts.rearrange_every > 0 && it % opts.rearrange_every == 0 {
                u = symmetrize_ties(&grid, &rearrange_decreasing(&grid, &u));
                v = symmetrize_ties(&grid, &rearrange_decreasing(&grid, &v));
            }
            rescale_mass(&grid, &mut u, &mut v, params, lambda)?;
            let e = model::energy(&grid, &u, &v, params)?;
            if e <= x.energy + 1e-15 * x.energy.abs() {
                accepted = Some((Iterate { u, v, energy: e }, step));
                break;
            }
            step *= 0.5;
        }
        let Some((next, step)) = accepted else {
            break;
        };
        x = next;
        if x.energy < best - 1e-13 * best.abs() {
            best = x.energy;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 500 && res < opts.newton_start {
                break;
            }
        }
        tau = if step < tau { step } else { (tau * 1.25).min(1.5) };
    }
    let (mut u, mut v) = if grid.is_radial() {
        (x.u, x.v)
    } else {
        (symmetrize_ties(&grid, &rearrange_decreasing(&grid, &x.u)), symmetrize_ties(&grid, &rearrange_decreasing(&grid, &x.v)))
    };
    if res < opts.newton_start {
        (omega, res) = newton_polish(&grid, params, lambda, &mut u, &mut v, omega, opts)?;
    }
    if !(res < opts.tol * 10.0) {
        return Err(Error::Convergence { iterations: it, residual: res });
    }
    let kinetic = model::kinetic(&grid, &u, &v)?;
    let pot = model::potential(&grid, &u, &v)?;
    let omega_formula =
        (4.0 * pot - kinetic - grid.inner(&u, &u) - mu * grid.inner(&v, &v)) / lambda;

    let mut warnings = Vec::new();
    if omega <= 0.0 {
        warnings.push(format!(
            "multiplier omega = {omega:.6e} is not positive at mass {lambda}; the positivity claim for small masses fails here"
        ));
    }
    let floor = params.omega_floor();
    if omega <= floor {
        return Err(Error::Degenerate(format!(
            "multiplier omega = {omega} is below max(-1, -mu/(3 sigma)) = {floor}; no decaying wave"
        )));
    }
    let p = ModelParams::new(params.n, omega, mu, sigma)?;
    let mut w = WaveProfile::from_fields(Field::new(grid.clone(), u)?, Field::new(grid, v)?, p, Provenance::Normalized)?;
    w.lambda = Some(lambda);
    w.omega_formula = Some(omega_formula);
    w.warnings = warnings;
    Ok(w)
}
