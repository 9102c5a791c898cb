//! Linearized operators `L+` (real part) and `L-` (imaginary part) around a
//! wave `(P, Q)`:
//!
//! ```text
//! L+ = [ -Lap + alpha - (P^2/3 + 2Q^2 + 2PQ/3)    -(4PQ + P^2/3)              ]
//!      [ -(4PQ + P^2/3)                            -Lap + beta - (27Q^2 + 2P^2) ]
//! L- = [ -Lap + alpha - (P^2/9 + 2Q^2 - 2PQ/3)    -P^2/3                      ]
//!      [ -P^2/3                                    -Lap + beta - (9Q^2 + 2P^2)  ]
//! ```
//!
//! `L- (P, 3Q) = 0` and `L+ (d_j P, d_j Q) = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::{angular_eigenvalue, Grid, RadialGrid, Sector};
use crate::model::ModelParams;
use crate::solver::WaveProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    #[serde(rename = "L+")]
    Plus,
    #[serde(rename = "L-")]
    Minus,
}

impl Which {
    pub fn label(self) -> &'static str {
        match self {
            Which::Plus => "L+",
            Which::Minus => "L-",
        }
    }
}

/// Diagonal potentials of a 2x2 block operator `-Lap + [[v11, v12], [v12, v22]]`.
#[derive(Debug, Clone)]
pub struct BlockPotential {
    pub v11: Vec<f64>,
    pub v12: Vec<f64>,
    pub v22: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LinearizedOperators {
    grid: Arc<Grid>,
    params: ModelParams,
    p: Vec<f64>,
    q: Vec<f64>,
    plus: BlockPotential,
    minus: BlockPotential,
}

fn potentials(params: &ModelParams, p: &[f64], q: &[f64]) -> (BlockPotential, BlockPotential) {
    let (a, b) = (params.alpha(), params.beta());
    let n = p.len();
    let mut plus = BlockPotential { v11: vec![0.0; n], v12: vec![0.0; n], v22: vec![0.0; n] };
    let mut minus = plus.clone();
    for i in 0..n {
        let (pp, qq) = (p[i], q[i]);
        let p2 = pp * pp;
        let q2 = qq * qq;
        plus.v11[i] = a - (p2 / 3.0 + 2.0 * q2 + 2.0 * pp * qq / 3.0);
        plus.v12[i] = -(4.0 * pp * qq + p2 / 3.0);
        plus.v22[i] = b - (27.0 * q2 + 2.0 * p2);
        minus.v11[i] = a - (p2 / 9.0 + 2.0 * q2 - 2.0 * pp * qq / 3.0);
        minus.v12[i] = -p2 / 3.0;
        minus.v22[i] = b - (9.0 * q2 + 2.0 * p2);
    }
    (plus, minus)
}

/// Discretization of one sector: nodal weights, stiffness and potentials.
///
/// On spectral radial grids, sector `m > 0` is represented as `f = r^m g`
/// with `g` on a radial grid of dimension `n + 2m`, where the angular term is
/// absorbed exactly into the lifted stiffness.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub sector: Sector,
    pub weights: Vec<f64>,
    pub radii: Vec<f64>,
    pub stiffness: DMatrix<f64>,
    plus: BlockPotential,
    minus: BlockPotential,
    lifted: Option<(RadialGrid, u32)>,
}

impl SectorBasis {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `W^{1/2} (a, b)` stacked, for fields given on the parent grid nodes.
    pub fn scale(&self, a: &[f64], b: &[f64]) -> Result<DVector<f64>> {
        if self.lifted.is_some() {
            return Err(Error::Unsupported("scaling parent fields into a lifted sector".into()));
        }
        let n = self.len();
        check_len(n, a.len())?;
        check_len(n, b.len())?;
        Ok(DVector::from_fn(2 * n, |i, _| {
            if i < n { self.weights[i].sqrt() * a[i] } else { self.weights[i - n].sqrt() * b[i - n] }
        }))
    }

    /// Maps a `W^{1/2}`-scaled coefficient vector to nodal values on `grid`.
    pub fn to_nodal(&self, grid: &Grid, y: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let g1: Vec<f64> = (0..n).map(|i| y[i] / self.weights[i].sqrt()).collect();
        let g2: Vec<f64> = (0..n).map(|i| y[n + i] / self.weights[i].sqrt()).collect();
        match &self.lifted {
            None => (g1, g2),
            Some((aux, m)) => {
                let r = grid.radii();
                let i1 = aux.interpolator(&g1);
                let i2 = aux.interpolator(&g2);
                (
                    r.iter().map(|&x| x.powi(*m as i32) * i1(x)).collect(),
                    r.iter().map(|&x| x.powi(*m as i32) * i2(x)).collect(),
                )
            }
        }
    }
}

impl LinearizedOperators {
    pub fn new(wave: &WaveProfile) -> Self {
        let p = wave.p.values().to_vec();
        let q = wave.q.values().to_vec();
        let (plus, minus) = potentials(&wave.params, &p, &q);
        Self { grid: wave.grid().clone(), params: wave.params, p, q, plus, minus }
    }

    /// Discretization of `L+-` restricted to a sector.
    pub fn sector_basis(&self, sector: Sector) -> Result<SectorBasis> {
        if !self.grid.is_radial() && sector != Sector::Full {
            return Err(Error::Unsupported("angular sectors exist only on radial grids".into()));
        }
        if let (Grid::Radial(g), Sector::Angular(m)) = (self.grid.as_ref(), sector) {
            if g.dim() == 1 && m > 1 {
                return Err(Error::Unsupported("one-dimensional sectors are parities m = 0, 1".into()));
            }
            if m > 0 && g.is_spectral() {
                let aux = RadialGrid::spectral_lifted(g.dim() + 2 * m as usize, g.len(), g.extent())?;
                let ip = g.interpolator(&self.p);
                let iq = g.interpolator(&self.q);
                let p: Vec<f64> = aux.radii().iter().map(|&r| ip(r)).collect();
                let q: Vec<f64> = aux.radii().iter().map(|&r| iq(r)).collect();
                let (plus, minus) = potentials(&self.params, &p, &q);
                return Ok(SectorBasis {
                    sector,
                    weights: aux.weights().to_vec(),
                    radii: aux.radii().to_vec(),
                    stiffness: aux.stiffness_dense(0.0),
                    plus,
                    minus,
                    lifted: Some((aux, m)),
                });
            }
        }
        Ok(SectorBasis {
            sector,
            weights: self.grid.weights(),
            radii: self.grid.radii(),
            stiffness: self.grid.stiffness_dense(sector)?,
            plus: self.plus.clone(),
            minus: self.minus.clone(),
            lifted: None,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn profile(&self) -> (&[f64], &[f64]) {
        (&self.p, &self.q)
    }

    pub fn potential(&self, which: Which) -> &BlockPotential {
        match which {
            Which::Plus => &self.plus,
            Which::Minus => &self.minus,
        }
    }

    /// `sup |V - diag(alpha, beta)|`, the scale of the nonlinear potential.
    pub fn potential_scale(&self) -> f64 {
        let (a, b) = (self.params.alpha(), self.params.beta());
        let mut m: f64 = 0.0;
        for blk in [&self.plus, &self.minus] {
            for i in 0..self.p.len() {
                m = m.max((blk.v11[i] - a).abs()).max(blk.v12[i].abs()).max((blk.v22[i] - b).abs());
            }
        }
        m.max(a.min(b))
    }

    /// Multiplier `c` of the angular term `c / r^2` in a sector.
    pub fn angular_coefficient(&self, sector: Sector) -> f64 {
        match sector {
            Sector::Full | Sector::Angular(0) => 0.0,
            Sector::Angular(m) => angular_eigenvalue(self.grid.dim(), m),
        }
    }

    /// Applies `L+` or `L-` to `(h1, h2)`; in a sector `m > 0` of a radial
    /// grid the angular term is included.
    pub fn apply(&self, which: Which, sector: Sector, h1: &[f64], h2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.p.len(), h1.len())?;
        check_len(self.p.len(), h2.len())?;
        if !self.grid.is_radial() && sector != Sector::Full {
            return Err(Error::Unsupported("angular sectors exist only on radial grids".into()));
        }
        let c = self.angular_coefficient(sector);
        let r = self.grid.radii();
        let pot = self.potential(which);
        let l1 = self.grid.laplacian(h1);
        let l2 = self.grid.laplacian(h2);
        let mut o1 = Vec::with_capacity(h1.len());
        let mut o2 = Vec::with_capacity(h1.len());
        for i in 0..h1.len() {
            let ang = if c != 0.0 { c / (r[i] * r[i]) } else { 0.0 };
            o1.push(-l1[i] + (pot.v11[i] + ang) * h1[i] + pot.v12[i] * h2[i]);
            o2.push(-l2[i] + (pot.v22[i] + ang) * h2[i] + pot.v12[i] * h1[i]);
        }
        Ok((o1, o2))
    }

    pub fn apply_plus(&self, h1: &[f64], h2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.apply(Which::Plus, Sector::Full, h1, h2)
    }

    pub fn apply_minus(&self, h1: &[f64], h2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.apply(Which::Minus, Sector::Full, h1, h2)
    }

    /// Pair inner product `<(a1, a2), (b1, b2)>` in `L^2`.
    pub fn inner(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> f64 {
        self.grid.inner(a.0, b.0) + self.grid.inner(a.1, b.1)
    }

    /// Quadratic form `<L h, h>`.
    pub fn form(&self, which: Which, sector: Sector, h1: &[f64], h2: &[f64]) -> Result<f64> {
        let (a, b) = self.apply(which, sector, h1, h2)?;
        Ok(self.inner((&a, &b), (h1, h2)))
    }

    /// Square roots of the quadrature weights.
    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.grid.weights().iter().map(|w| w.sqrt()).collect()
    }

    /// Symmetric matrix `W^{1/2} L W^{-1/2}` of size `2N`, acting on
    /// `W^{1/2}`-scaled values. Its eigenvalues are those of the discrete
    /// operator; [`SectorBasis::to_nodal`] maps eigenvectors back.
    pub fn dense(&self, which: Which, sector: Sector) -> Result<DMatrix<f64>> {
        Ok(self.dense_in(&self.sector_basis(sector)?, which))
    }

    pub fn dense_in(&self, basis: &SectorBasis, which: Which) -> DMatrix<f64> {
        let n = basis.len();
        let k = &basis.stiffness;
        let s: Vec<f64> = basis.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let pot = match which {
            Which::Plus => &basis.plus,
            Which::Minus => &basis.minus,
        };
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for i in 0..n {
                let v = k[(i, j)] * s[i] * s[j];
                m[(i, j)] = v;
                m[(n + i, n + j)] = v;
            }
        }
        for i in 0..n {
            m[(i, i)] += pot.v11[i];
            m[(n + i, n + i)] += pot.v22[i];
            m[(i, n + i)] = pot.v12[i];
            m[(n + i, i)] = pot.v12[i];
        }
        m
    }

    /// Lowest `k` eigenpairs of `L+` or `L-` in a sector.
    pub fn spectrum(&self, which: Which, sector: Sector, k: usize, tol: Option<f64>) -> Result<OperatorSpectrum> {
        let basis = self.sector_basis(sector)?;
        let eig = symmetric_eigen(self.dense_in(&basis, which))?;
        let tol = tol.unwrap_or(1e-6 * self.potential_scale());
        let count = k.min(eig.eigenvalues.len());
        let mut eigenvectors = Vec::with_capacity(count);
        for j in 0..count {
            let (h1, h2) = basis.to_nodal(&self.grid, &eig.eigenvectors.column(j).into_owned());
            let norm = self.inner((&h1, &h2), (&h1, &h2)).sqrt();
            eigenvectors.push((h1.iter().map(|x| x / norm).collect(), h2.iter().map(|x| x / norm).collect()));
        }
        let all = &eig.eigenvalues;
        let ess = self.params.alpha().min(self.params.beta());
        Ok(OperatorSpectrum {
            operator: which,
            sector,
            eigenvalues: all.iter().take(count).copied().collect(),
            eigenvectors,
            neg_count: all.iter().filter(|&&l| l < -tol).count(),
            kernel_dim: all.iter().filter(|&&l| l.abs() <= tol).count(),
            ess_threshold: ess,
            above_threshold: all.iter().take(count).filter(|&&l| l >= ess).count(),
            tol,
        })
    }

    /// Removes the components of `h` along the kernel eigenvectors of `spec`.
    pub fn kernel_projection(&self, spec: &OperatorSpectrum, h: (&[f64], &[f64])) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.p.len(), h.0.len())?;
        check_len(self.p.len(), h.1.len())?;
        let mut a = h.0.to_vec();
        let mut b = h.1.to_vec();
        for (l, (e1, e2)) in spec.eigenvalues.iter().zip(&spec.eigenvectors) {
            if l.abs() <= spec.tol {
                let c = self.inner((&a, &b), (e1, e2)) / self.inner((e1, e2), (e1, e2));
                for i in 0..a.len() {
                    a[i] -= c * e1[i];
                    b[i] -= c * e2[i];
                }
            }
        }
        Ok((a, b))
    }
}

/// Residuals of the kernel identities `L- (P, 3Q) = 0` and
/// `L+ (d_1 P, d_1 Q) = 0`, each relative to the free part
/// `|(-Lap + diag(alpha, beta)) h|` in the discrete `L^2` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelResiduals {
    pub phase: f64,
    pub translation: f64,
}

impl LinearizedOperators {
    fn relative_action(&self, basis: &SectorBasis, which: Which, y: &DVector<f64>) -> f64 {
        let n = basis.len();
        let full = self.dense_in(basis, which) * y;
        let s: Vec<f64> = basis.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let (a, b) = (self.params.alpha(), self.params.beta());
        let sy = DVector::from_fn(n, |i, _| s[i] * y[i]);
        let sz = DVector::from_fn(n, |i, _| s[i] * y[n + i]);
        let ky = &basis.stiffness * sy;
        let kz = &basis.stiffness * sz;
        let free = DVector::from_fn(2 * n, |i, _| {
            if i < n { s[i] * ky[i] + a * y[i] } else { s[i - n] * kz[i - n] + b * y[i] }
        });
        full.norm() / free.norm()
    }

    /// Residuals of the two kernel identities. On radial grids the
    /// translation mode lives in sector `1`, where it is represented through
    /// the even function `P' / r`.
    pub fn kernel_residuals(&self) -> Result<KernelResiduals> {
        let g = self.grid.as_ref();
        let zero = if g.is_radial() { Sector::Angular(0) } else { Sector::Full };
        let basis = self.sector_basis(zero)?;
        let q3: Vec<f64> = self.q.iter().map(|x| 3.0 * x).collect();
        let phase = self.relative_action(&basis, Which::Minus, &basis.scale(&self.p, &q3)?);

        let dp = g.derivative(&self.p, 0);
        let dq = g.derivative(&self.q, 0);
        let translation = match g {
            Grid::Periodic(_) => {
                let basis = self.sector_basis(Sector::Full)?;
                self.relative_action(&basis, Which::Plus, &basis.scale(&dp, &dq)?)
            }
            Grid::Radial(rg) => {
                let basis = self.sector_basis(Sector::Angular(1))?;
                match &basis.lifted {
                    None => self.relative_action(&basis, Which::Plus, &basis.scale(&dp, &dq)?),
                    Some((aux, _)) => {
                        let r = rg.radii();
                        let gp: Vec<f64> = dp.iter().zip(r).map(|(d, r)| d / r).collect();
                        let gq: Vec<f64> = dq.iter().zip(r).map(|(d, r)| d / r).collect();
                        let (ip, iq) = (rg.interpolator(&gp), rg.interpolator(&gq));
                        let n = basis.len();
                        let w = aux.weights();
                        let y = DVector::from_fn(2 * n, |i, _| {
                            if i < n {
                                w[i].sqrt() * ip(aux.radii()[i])
                            } else {
                                w[i - n].sqrt() * iq(aux.radii()[i - n])
                            }
                        });
                        self.relative_action(&basis, Which::Plus, &y)
                    }
                }
            }
        };
        Ok(KernelResiduals { phase, translation })
    }
}

/// Ascending symmetric eigendecomposition with a convergence check.
pub fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let mut eig = m
        .try_symmetric_eigen(f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Eigensolver(format!("symmetric QR did not converge ({n}x{n})")))?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    eig.eigenvalues = vals;
    eig.eigenvectors = vecs;
    Ok(eig)
}

#[derive(Debug, Clone)]
pub struct OperatorSpectrum {
    pub operator: Which,
    pub sector: Sector,
    /// Lowest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Nodal eigenvectors, orthonormal in the weighted inner product.
    pub eigenvectors: Vec<(Vec<f64>, Vec<f64>)>,
    pub neg_count: usize,
    pub kernel_dim: usize,
    /// Bottom of the continuous spectrum of the unbounded operator.
    pub ess_threshold: f64,
    /// Returned eigenvalues at or above the threshold; on a finite box these
    /// are discretized continuum, not bound states.
    pub above_threshold: usize,
    pub tol: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::solver::{semi_trivial_wave, Provenance};

    #[test]
    fn free_operator_spectrum_is_bounded_below() {
        let grid = Grid::periodic(1, 64, 10.0).unwrap();
        let params = ModelParams::new(1, 0.5, 9.0, 3.0).unwrap();
        let w = WaveProfile::from_fields(
            Field::zeros(grid.clone()),
            Field::zeros(grid),
            params,
            Provenance::External,
        )
        .unwrap();
        let ops = LinearizedOperators::new(&w);
        let s = ops.spectrum(Which::Plus, Sector::Full, 4, None).unwrap();
        assert!((s.eigenvalues[0] - 1.5).abs() < 1e-12);
        assert_eq!(s.neg_count, 0);
    }

    #[test]
    fn semi_trivial_kernels() {
        // beta = 4 < 9 alpha keeps the U-block of L+ and L- positive.
        let grid = Grid::periodic(1, 512, 16.0).unwrap();
        let params = ModelParams::new(1, 0.0, 4.0, 3.0).unwrap();
        let w = semi_trivial_wave(grid.clone(), &params).unwrap();
        let ops = LinearizedOperators::new(&w);
        let z1 = w.p.values().to_vec();
        let z2: Vec<f64> = w.q.values().iter().map(|v| 3.0 * v).collect();
        let (a, b) = ops.apply_minus(&z1, &z2).unwrap();
        assert!(a.iter().chain(&b).all(|v| v.abs() < 1e-9));
        let dq = grid.derivative(w.q.values(), 0);
        let (a, b) = ops.apply_plus(&z1, &dq).unwrap();
        assert!(a.iter().chain(&b).all(|v| v.abs() < 1e-9));
        let sp = ops.spectrum(Which::Plus, Sector::Full, 3, None).unwrap();
        assert_eq!(sp.neg_count, 1);
        assert_eq!(sp.kernel_dim, 1);
        let sm = ops.spectrum(Which::Minus, Sector::Full, 3, None).unwrap();
        assert_eq!(sm.neg_count, 0);
        assert_eq!(sm.kernel_dim, 1);
        // U-block ground state of -Lap + alpha - (4 beta / 9) sech^2: alpha - beta / 9.
        let su = ops.spectrum(Which::Minus, Sector::Full, 3, None).unwrap();
        assert!(su.eigenvalues.iter().any(|l| (l - (1.0 - 4.0 / 9.0)).abs() < 1e-8), "{:?}", su.eigenvalues);
        let (h1, h2) = ops.kernel_projection(&sp, (&z1, &dq)).unwrap();
        assert!(h1.iter().chain(&h2).all(|v| v.abs() < 1e-8));
    }
}
