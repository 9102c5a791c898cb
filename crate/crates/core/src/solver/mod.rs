//! Ground-state construction.
//!
//! * [`solve_weinstein`] maximizes `J = int F` on the unit sphere of the
//!   `(alpha, beta)` energy norm; the maximizer rescaled by `sqrt(C)` with
//!   `C = 1 / (4 J_max)` is a ground state at frequency `omega`.
//! * [`solve_normalized`] minimizes `E` at fixed mass and recovers `omega`
//!   as the Lagrange multiplier.
//! * [`semi_trivial_wave`] is the closed-form `(0, Q)` wave in one dimension.

mod normalized;
mod weinstein;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{self, ModelParams};

pub use normalized::{solve_normalized, NormalizedOptions};
pub use weinstein::{solve_weinstein, WeinsteinOptions, WeinsteinSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Weinstein,
    Normalized,
    SemiTrivial,
    External,
}

/// A real standing-wave profile `(P, Q)` with its parameters and diagnostics.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub p: Field,
    pub q: Field,
    pub params: ModelParams,
    pub provenance: Provenance,
    pub residual_sup: f64,
    pub mass: f64,
    pub energy: f64,
    pub j_max: Option<f64>,
    pub c_ab: Option<f64>,
    /// Mass constraint of a normalized wave.
    pub lambda: Option<f64>,
    /// `omega` from the closed-form multiplier identity (normalized waves).
    pub omega_formula: Option<f64>,
    pub warnings: Vec<String>,
}

impl WaveProfile {
    /// Builds a profile from raw fields and fills in the diagnostics.
    pub fn from_fields(p: Field, q: Field, params: ModelParams, provenance: Provenance) -> Result<Self> {
        p.ensure_same_grid(&q)?;
        params.validate()?;
        let grid = p.grid().clone();
        if grid.dim() != params.n {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {} does not match n = {}",
                grid.dim(),
                params.n
            )));
        }
        let (r1, r2) = model::elliptic_residual(&grid, p.values(), q.values(), &params)?;
        let residual_sup = r1.iter().chain(&r2).fold(0.0f64, |m, v| m.max(v.abs()));
        let mass = model::mass(&grid, p.values(), q.values(), &params)?;
        let energy = model::energy(&grid, p.values(), q.values(), &params)?;
        Ok(Self {
            p,
            q,
            params,
            provenance,
            residual_sup,
            mass,
            energy,
            j_max: None,
            c_ab: None,
            lambda: None,
            omega_formula: None,
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.p.grid()
    }

    /// `(P, 3 sigma Q)`, half the gradient of the mass.
    pub fn mass_direction(&self) -> (Vec<f64>, Vec<f64>) {
        let c = 3.0 * self.params.sigma;
        (self.p.values().to_vec(), self.q.values().iter().map(|q| c * q).collect())
    }

    pub fn pohozaev(&self) -> Result<model::PohozaevResiduals> {
        model::pohozaev_residuals(self.grid(), self.p.values(), self.q.values(), &self.params)
    }

    /// Weighted `L^2` norm of the elliptic residual.
    pub fn residual_l2(&self) -> Result<f64> {
        let g = self.grid();
        let (r1, r2) = model::elliptic_residual(g, self.p.values(), self.q.values(), &self.params)?;
        Ok((g.inner(&r1, &r1) + g.inner(&r2, &r2)).sqrt())
    }
}

/// Closed-form semi-trivial wave `(0, Q)` with
/// `Q(x) = sqrt(2 beta) / 3 sech(sqrt(beta) x)` in one dimension.
pub fn semi_trivial_wave(grid: Arc<Grid>, params: &ModelParams) -> Result<WaveProfile> {
    params.validate()?;
    if params.n != 1 || grid.dim() != 1 {
        return Err(Error::UnsupportedDimension {
            n: params.n,
            reason: "the closed-form semi-trivial wave is one-dimensional".into(),
        });
    }
    let beta = params.beta();
    let amp = (2.0 * beta).sqrt() / 3.0;
    let k = beta.sqrt();
    let q = Field::from_radial(grid.clone(), |x| amp / (k * x).cosh());
    let p = Field::zeros(grid);
    WaveProfile::from_fields(p, q, *params, Provenance::SemiTrivial)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semi_trivial_reference_values() {
        // mu = 9, sigma = 3, omega = 0: Q = sqrt(2) sech(3x), M = 12, E = 4.
        let grid = Grid::periodic(1, 1024, 12.0).unwrap();
        let params = ModelParams::new(1, 0.0, 9.0, 3.0).unwrap();
        let w = semi_trivial_wave(grid.clone(), &params).unwrap();
        let x = grid.coordinates(0);
        let i0 = x.iter().position(|&x| x == 0.0).unwrap();
        assert!((w.q.values()[i0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((w.mass - 12.0).abs() < 1e-10);
        assert!((w.energy - 4.0).abs() < 1e-10);
        assert!(w.residual_sup < 1e-10);
        assert!(w.pohozaev().unwrap().max() < 1e-10);
    }
}
