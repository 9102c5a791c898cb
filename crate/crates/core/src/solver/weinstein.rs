use std::sync::Arc;

use log::debug;

use super::{Provenance, WaveProfile};
use crate::error::{check_len, Error, Result};
use crate::grid::{rearrange_decreasing, symmetrize_ties, Field, Grid};
use crate::model::{self, nonlinearity, ModelParams};

/// `max |U| / max |V|` below which `U` is treated as identically zero.
pub const SEMI_TRIVIAL_RATIO: f64 = 1e-12;

/// Residual below which periodic iterates are no longer rearranged.
const REARRANGE_UNTIL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct WeinsteinOptions {
    /// Target for the weighted `L^2` norm of the physical residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Replace the iterate by its symmetric-decreasing rearrangement this often.
    pub rearrange_every: usize,
    /// Width of the Gaussian initial guess; defaults to `1 / sqrt(alpha)`.
    pub width: Option<f64>,
    /// Initial amplitude ratio `V / U`.
    pub ratio: f64,
    /// Relaxation factor of the preconditioned ascent step.
    pub relaxation: f64,
    /// Warm start `(U, V)`; overrides the Gaussian guess.
    pub initial: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for WeinsteinOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50_000,
            rearrange_every: 10,
            width: None,
            ratio: 1.0 / 3.0,
            relaxation: 1.0,
            initial: None,
        }
    }
}

/// Normalized maximizer `(U, V)`, `I(U, V) = 1`.
#[derive(Debug, Clone)]
pub struct WeinsteinSolution {
    pub u: Field,
    pub v: Field,
    pub alpha: f64,
    pub beta: f64,
    pub j_max: f64,
    pub c_ab: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `U` vanished to roundoff and was set to zero.
    pub semi_trivial: bool,
    /// The profile is its own decreasing rearrangement; false when the grid
    /// is too coarse for the tail to be monotone at the solver tolerance.
    pub monotone: bool,
}

struct State {
    u: Vec<f64>,
    v: Vec<f64>,
    n1: Vec<f64>,
    n2: Vec<f64>,
    j: f64,
}

impl State {
    fn new(grid: &Grid, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let mut n1 = Vec::with_capacity(u.len());
        let mut n2 = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let (a, b) = nonlinearity(u[i], v[i]);
            n1.push(a);
            n2.push(b);
        }
        let j = model::potential(grid, &u, &v)?;
        Ok(Self { u, v, n1, n2, j })
    }
}

fn normalize(grid: &Grid, u: &mut [f64], v: &mut [f64], alpha: f64, beta: f64) -> Result<()> {
    let i = model::quadratic_form(grid, u, v, alpha, beta)?;
    if !(i > 0.0 && i.is_finite()) {
        return Err(Error::Degenerate(format!("energy norm became {i}")));
    }
    let s = 1.0 / i.sqrt();
    u.iter_mut().chain(v.iter_mut()).for_each(|x| *x *= s);
    Ok(())
}

/// Physical residual `sqrt(C) (T U - C N(U))` in the weighted `L^2` norm.
fn residual(grid: &Grid, s: &State, alpha: f64, beta: f64) -> f64 {
    let c = 1.0 / (4.0 * s.j);
    let lu = grid.laplacian(&s.u);
    let lv = grid.laplacian(&s.v);
    let r1: Vec<f64> = (0..s.u.len()).map(|i| -lu[i] + alpha * s.u[i] - c * s.n1[i]).collect();
    let r2: Vec<f64> = (0..s.u.len()).map(|i| -lv[i] + beta * s.v[i] - c * s.n2[i]).collect();
    (c * (grid.inner(&r1, &r1) + grid.inner(&r2, &r2))).sqrt()
}

/// Maximizes `int F` over `I_{alpha,beta} = 1` by normalized preconditioned
/// ascent: `U <- U + t (C T^{-1} N(U) - U)`, renormalized, with backtracking
/// on `J`. With `t = 1` this is the nonlinear power iteration `T^{-1} N(U)`.
pub fn solve_weinstein(grid: Arc<Grid>, params: &ModelParams, opts: &WeinsteinOptions) -> Result<WeinsteinSolution> {
    params.validate()?;
    if grid.dim() != params.n {
        return Err(Error::InvalidParameter(format!(
            "grid dimension {} does not match n = {}",
            grid.dim(),
            params.n
        )));
    }
    let (alpha, beta) = (params.alpha(), params.beta());
    let ha = grid.helmholtz(alpha)?;
    let hb = grid.helmholtz(beta)?;

    let width = opts.width.unwrap_or(1.0 / alpha.sqrt());
    let radii = grid.radii();
    let (mut u, mut v) = match &opts.initial {
        Some((u, v)) => {
            check_len(grid.len(), u.len())?;
            check_len(grid.len(), v.len())?;
            (u.clone(), v.clone())
        }
        None => {
            let u: Vec<f64> = radii.iter().map(|r| (-0.5 * (r / width).powi(2)).exp()).collect();
            let v = u.iter().map(|x| opts.ratio * x).collect();
            (u, v)
        }
    };
    normalize(&grid, &mut u, &mut v, alpha, beta)?;
    let mut s = State::new(&grid, u, v)?;

    let mut t = opts.relaxation;
    let mut it = 0;
    let mut last_res = f64::INFINITY;
    while it < opts.max_iter {
        it += 1;
        let c = 1.0 / (4.0 * s.j);
        let w1 = ha.solve(&s.n1)?;
        let w2 = hb.solve(&s.n2)?;
        let mut accepted = None;
        let mut step = t;
        for _ in 0..30 {
            let u: Vec<f64> = (0..s.u.len()).map(|i| s.u[i] + step * (c * w1[i] - s.u[i])).collect();
            let v: Vec<f64> = (0..s.v.len()).map(|i| s.v[i] + step * (c * w2[i] - s.v[i])).collect();
            if !grid.is_radial() && opts.rearrange_every > 0 && it % opts.rearrange_every == 0 && last_res > REARRANGE_UNTIL {
                let mut ur = symmetrize_ties(&grid, &rearrange_decreasing(&grid, &u));
                let mut vr = symmetrize_ties(&grid, &rearrange_decreasing(&grid, &v));
                normalize(&grid, &mut ur, &mut vr, alpha, beta)?;
                let cand = State::new(&grid, ur, vr)?;
                if cand.j >= s.j * (1.0 - 1e-12) {
                    accepted = Some(cand);
                    break;
                }
            }
            let (mut u, mut v) = (u, v);
            normalize(&grid, &mut u, &mut v, alpha, beta)?;
            let cand = State::new(&grid, u, v)?;
            if cand.j >= s.j * (1.0 - 1e-12) {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            break;
        };
        s = next;
        if step < t {
            t = step;
        } else if t < opts.relaxation {
            t = (t * 1.5).min(opts.relaxation);
        }
        if it % 5 == 0 || it < 5 {
            let res = residual(&grid, &s, alpha, beta);
            last_res = res;
            if it % 500 == 0 {
                debug!("weinstein it={it} J={:.15e} res={res:.3e}", s.j);
            }
            if res < opts.tol {
                break;
            }
        }
    }
    // On periodic grids, finish on a rearranged iterate so the profile is
    // exactly symmetric-decreasing, unless that costs accuracy: an
    // under-resolved discrete maximizer can ripple in its tail. Radial grids
    // are symmetric by construction.
    let mut monotone = true;
    if !grid.is_radial() {
        let mut u = symmetrize_ties(&grid, &rearrange_decreasing(&grid, &s.u));
        let mut v = symmetrize_ties(&grid, &rearrange_decreasing(&grid, &s.v));
        normalize(&grid, &mut u, &mut v, alpha, beta)?;
        let cand = State::new(&grid, u, v)?;
        if residual(&grid, &cand, alpha, beta) < opts.tol.max(residual(&grid, &s, alpha, beta)) {
            s = cand;
        } else {
            monotone = false;
        }
    }
    let res = residual(&grid, &s, alpha, beta);
    if !(res < opts.tol * 10.0) {
        return Err(Error::Convergence { iterations: it, residual: res });
    }
    let umax = s.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let vmax = s.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(vmax > 0.0) {
        return Err(Error::Degenerate("the maximizer collapsed to zero".into()));
    }
    let semi_trivial = umax < SEMI_TRIVIAL_RATIO * vmax;
    if semi_trivial {
        s.u.iter_mut().for_each(|x| *x = 0.0);
        let (mut u, mut v) = (std::mem::take(&mut s.u), std::mem::take(&mut s.v));
        normalize(&grid, &mut u, &mut v, alpha, beta)?;
        s = State::new(&grid, u, v)?;
    }
    let res = if semi_trivial { residual(&grid, &s, alpha, beta) } else { res };
    debug!("weinstein done: it={it} res={res:.3e} max U={umax:.3e} max V={vmax:.3e}");
    let c_ab = 1.0 / (4.0 * s.j);
    Ok(WeinsteinSolution {
        u: Field::new(grid.clone(), s.u)?,
        v: Field::new(grid, s.v)?,
        alpha,
        beta,
        j_max: s.j,
        c_ab,
        iterations: it,
        residual: res,
        semi_trivial,
        monotone,
    })
}

impl WeinsteinSolution {
    /// `(P, Q) = sqrt(C) (U, V)`.
    pub fn rescale_to_physical(&self, params: &ModelParams) -> Result<WaveProfile> {
        let s = self.c_ab.sqrt();
        let p = self.u.with_values(self.u.values().iter().map(|x| s * x).collect())?;
        let q = self.v.with_values(self.v.values().iter().map(|x| s * x).collect())?;
        let mut w = WaveProfile::from_fields(p, q, *params, Provenance::Weinstein)?;
        w.j_max = Some(self.j_max);
        w.c_ab = Some(self.c_ab);
        if self.semi_trivial {
            w.warnings.push("maximizer is semi-trivial: P vanished to roundoff".into());
        }
        if !self.monotone {
            w.warnings.push("profile is not monotone at the solver tolerance; refine the grid".into());
        }
        Ok(w)
    }
}
