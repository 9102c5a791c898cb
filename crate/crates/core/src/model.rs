//! System parameters, the nonlinearity and the conserved or monitored
//! functionals.
//!
//! With `alpha = omega + 1` and `beta = mu + 3 sigma omega`, a standing wave
//! `(e^{i omega t} P, e^{3 i omega t} Q)` solves
//! `-Lap P + alpha P = N1(P, Q)` and `-Lap Q + beta Q = N2(P, Q)`,
//! where `(N1, N2)` is the gradient of the quartic density
//! `F = P^4/36 + 9 Q^4/4 + P^2 Q^2 + P^3 Q / 9`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub omega: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(n: usize, omega: f64, mu: f64, sigma: f64) -> Result<Self> {
        let p = Self { n, omega, mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::UnsupportedDimension { n: 0, reason: "dimension must be positive".into() });
        }
        if self.n >= 4 {
            return Err(Error::UnsupportedDimension {
                n: self.n,
                reason: "no nontrivial standing waves exist for n >= 4 (the Pohozaev identities force P = Q = 0)".into(),
            });
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        let floor = self.omega_floor();
        if !(self.omega > floor && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega must exceed max(-1, -mu/(3 sigma)) = {floor}, got {}",
                self.omega
            )));
        }
        Ok(())
    }

    pub fn omega_floor(&self) -> f64 {
        (-1.0f64).max(-self.mu / (3.0 * self.sigma))
    }

    pub fn alpha(&self) -> f64 {
        self.omega + 1.0
    }

    pub fn beta(&self) -> f64 {
        self.mu + 3.0 * self.sigma * self.omega
    }

    /// True in the resonant case `mu = 3 sigma`, where `beta = 3 sigma alpha`.
    pub fn is_resonant(&self, tol: f64) -> bool {
        (self.mu - 3.0 * self.sigma).abs() <= tol * self.mu.max(1.0)
    }

    /// Whether `16 E - 8 M` is the exact virial second derivative.
    pub fn has_exact_virial(&self) -> bool {
        self.n == 2 && self.sigma == 3.0 && self.mu == 9.0
    }
}

/// Nodal amplitude: real for standing-wave profiles, complex for dynamics.
pub trait Amplitude: Copy + Default + Send + Sync + 'static {
    fn abs2(self) -> f64;
    /// `Re(conj(u)^3 v)`.
    fn cubic_coupling(u: Self, v: Self) -> f64;
    fn grad_sq(grid: &Grid, f: &[Self]) -> f64;
}

impl Amplitude for f64 {
    fn abs2(self) -> f64 {
        self * self
    }
    fn cubic_coupling(u: f64, v: f64) -> f64 {
        u * u * u * v
    }
    fn grad_sq(grid: &Grid, f: &[f64]) -> f64 {
        grid.gradient_sq_norm(f)
    }
}

impl Amplitude for Complex64 {
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn cubic_coupling(u: Complex64, v: Complex64) -> f64 {
        let c = u.conj();
        (c * c * c * v).re
    }
    fn grad_sq(grid: &Grid, f: &[Complex64]) -> f64 {
        grid.gradient_sq_norm_complex(f)
    }
}

/// Pointwise quartic density `F`.
#[inline]
pub fn density<T: Amplitude>(u: T, v: T) -> f64 {
    let a = u.abs2();
    let b = v.abs2();
    a * a / 36.0 + 2.25 * b * b + a * b + T::cubic_coupling(u, v) / 9.0
}

/// `(N1, N2)` for real profiles.
#[inline]
pub fn nonlinearity(p: f64, q: f64) -> (f64, f64) {
    let p2 = p * p;
    let q2 = q * q;
    (
        p2 * p / 9.0 + 2.0 * q2 * p + p2 * q / 3.0,
        9.0 * q2 * q + 2.0 * p2 * q + p2 * p / 9.0,
    )
}

/// Nonlinear terms of the evolution equations for complex amplitudes.
#[inline]
pub fn nonlinearity_complex(u: Complex64, v: Complex64) -> (Complex64, Complex64) {
    let a = u.norm_sqr();
    let b = v.norm_sqr();
    let uc = u.conj();
    (
        u * (a / 9.0 + 2.0 * b) + uc * uc * v / 3.0,
        v * (9.0 * b + 2.0 * a) + u * u * u / 9.0,
    )
}

fn check_pair<T>(grid: &Grid, u: &[T], v: &[T]) -> Result<()> {
    check_len(grid.len(), u.len())?;
    check_len(grid.len(), v.len())
}

/// `int F(u, v)`.
pub fn potential<T: Amplitude>(grid: &Grid, u: &[T], v: &[T]) -> Result<f64> {
    check_pair(grid, u, v)?;
    let f: Vec<f64> = u.iter().zip(v).map(|(&a, &b)| density(a, b)).collect();
    Ok(grid.integrate(&f))
}

fn sq<T: Amplitude>(grid: &Grid, f: &[T]) -> f64 {
    let m: Vec<f64> = f.iter().map(|z| z.abs2()).collect();
    grid.integrate(&m)
}

/// `int |grad u|^2 + |grad v|^2`.
pub fn kinetic<T: Amplitude>(grid: &Grid, u: &[T], v: &[T]) -> Result<f64> {
    check_pair(grid, u, v)?;
    Ok(T::grad_sq(grid, u) + T::grad_sq(grid, v))
}

/// `M = int |u|^2 + 3 sigma |v|^2`.
pub fn mass<T: Amplitude>(grid: &Grid, u: &[T], v: &[T], params: &ModelParams) -> Result<f64> {
    check_pair(grid, u, v)?;
    Ok(sq(grid, u) + 3.0 * params.sigma * sq(grid, v))
}

/// `E = 1/2 int (|grad u|^2 + |grad v|^2 + |u|^2 + mu |v|^2) - int F`.
pub fn energy<T: Amplitude>(grid: &Grid, u: &[T], v: &[T], params: &ModelParams) -> Result<f64> {
    let k = kinetic(grid, u, v)?;
    let quad = sq(grid, u) + params.mu * sq(grid, v);
    Ok(0.5 * (k + quad) - potential(grid, u, v)?)
}

/// `R = 1/2 int |grad u|^2 + |grad v|^2 - n F`; the virial satisfies `V'' = 16 R`.
pub fn virial_functional<T: Amplitude>(grid: &Grid, u: &[T], v: &[T], n: usize) -> Result<f64> {
    Ok(0.5 * (kinetic(grid, u, v)? - n as f64 * potential(grid, u, v)?))
}

/// `I = int |grad u|^2 + |grad v|^2 + alpha |u|^2 + beta |v|^2`.
pub fn quadratic_form<T: Amplitude>(grid: &Grid, u: &[T], v: &[T], alpha: f64, beta: f64) -> Result<f64> {
    Ok(kinetic(grid, u, v)? + alpha * sq(grid, u) + beta * sq(grid, v))
}

/// `V = int |x|^2 (|u|^2 + 3 sigma |v|^2)`.
pub fn virial<T: Amplitude>(grid: &Grid, u: &[T], v: &[T], params: &ModelParams) -> Result<f64> {
    check_pair(grid, u, v)?;
    let r = grid.radii();
    let c = 3.0 * params.sigma;
    let f: Vec<f64> = (0..u.len()).map(|i| r[i] * r[i] * (u[i].abs2() + c * v[i].abs2())).collect();
    Ok(grid.integrate(&f))
}

/// `(-Lap P + alpha P - N1, -Lap Q + beta Q - N2)`.
pub fn elliptic_residual(grid: &Grid, p: &[f64], q: &[f64], params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(grid, p, q)?;
    let (a, b) = (params.alpha(), params.beta());
    let lp = grid.laplacian(p);
    let lq = grid.laplacian(q);
    let mut r1 = Vec::with_capacity(p.len());
    let mut r2 = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let (n1, n2) = nonlinearity(p[i], q[i]);
        r1.push(-lp[i] + a * p[i] - n1);
        r2.push(-lq[i] + b * q[i] - n2);
    }
    Ok((r1, r2))
}

/// Relative residuals of the three Pohozaev identities and of `K = n int F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResiduals {
    pub first: f64,
    pub second: f64,
    pub scaling: f64,
    pub kinetic: f64,
}

impl PohozaevResiduals {
    pub fn max(&self) -> f64 {
        self.first.max(self.second).max(self.scaling).max(self.kinetic)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 { 0.0 } else { (a - b).abs() / s }
}

pub fn pohozaev_residuals(grid: &Grid, p: &[f64], q: &[f64], params: &ModelParams) -> Result<PohozaevResiduals> {
    check_pair(grid, p, q)?;
    let n = params.n as f64;
    let (a, b) = (params.alpha(), params.beta());
    let gp = grid.gradient_sq_norm(p);
    let gq = grid.gradient_sq_norm(q);
    let p2 = sq(grid, p);
    let q2 = sq(grid, q);
    let mut s1 = vec![0.0; p.len()];
    let mut s2 = vec![0.0; p.len()];
    for i in 0..p.len() {
        let (n1, n2) = nonlinearity(p[i], q[i]);
        s1[i] = p[i] * n1;
        s2[i] = q[i] * n2;
    }
    let pot = potential(grid, p, q)?;
    Ok(PohozaevResiduals {
        first: rel(gp + a * p2, grid.integrate(&s1)),
        second: rel(gq + b * q2, grid.integrate(&s2)),
        scaling: rel((4.0 - n) * (gp + gq), n * (a * p2 + b * q2)),
        kinetic: rel(gp + gq, n * pot),
    })
}

/// Snapshot of the functionals of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalLedger {
    pub mass: f64,
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub virial_functional: f64,
}

impl FunctionalLedger {
    pub fn evaluate<T: Amplitude>(grid: &Grid, u: &[T], v: &[T], params: &ModelParams) -> Result<Self> {
        let kinetic = kinetic(grid, u, v)?;
        let potential = potential(grid, u, v)?;
        let quad = sq(grid, u) + params.mu * sq(grid, v);
        Ok(Self {
            mass: mass(grid, u, v, params)?,
            energy: 0.5 * (kinetic + quad) - potential,
            kinetic,
            potential,
            virial_functional: 0.5 * (kinetic - params.n as f64 * potential),
        })
    }
}
