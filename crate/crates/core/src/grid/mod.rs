//! Discretized domains, fields on them, and the differential and integral
//! operators the solvers need.

mod periodic;
mod quadrature;
mod radial;
mod rearrange;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub use periodic::PeriodicGrid;
pub use quadrature::{gauss_jacobi, gauss_radau_right};
pub use radial::{solve_tridiagonal_complex, sphere_area, CubicSpline, RadialGrid, RadialHelmholtz};
pub use rearrange::{rearrange_decreasing, symmetrize_ties};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Periodic,
    RadialSpectral,
    RadialGraded,
}

impl GridKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKind::Periodic => "periodic",
            GridKind::RadialSpectral => "radial-spectral",
            GridKind::RadialGraded => "radial-graded",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(GridKind::Periodic),
            "radial-spectral" => Ok(GridKind::RadialSpectral),
            "radial-graded" => Ok(GridKind::RadialGraded),
            _ => Err(Error::Parse(format!("unknown grid kind '{s}'"))),
        }
    }
}

/// Everything needed to rebuild a grid bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    /// Spatial dimension `n` of the physical problem.
    pub dim: usize,
    /// Points per axis (periodic, spectral); ignored for graded grids.
    pub points: usize,
    /// Half-width `L` of the periodic box, or the outer radius `R`.
    pub extent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
}

impl GridSpec {
    pub fn periodic(dim: usize, points: usize, extent: f64) -> Self {
        Self { kind: GridKind::Periodic, dim, points, extent, h_min: None, growth: None }
    }

    pub fn radial_spectral(dim: usize, points: usize, extent: f64) -> Self {
        Self { kind: GridKind::RadialSpectral, dim, points, extent, h_min: None, growth: None }
    }

    pub fn radial_graded(dim: usize, extent: f64, h_min: f64, growth: f64) -> Self {
        Self {
            kind: GridKind::RadialGraded,
            dim,
            points: 0,
            extent,
            h_min: Some(h_min),
            growth: Some(growth),
        }
    }

    pub fn build(&self) -> Result<Arc<Grid>> {
        Grid::from_spec(self).map(Arc::new)
    }
}

/// Angular momentum sector of a radial operator: `m` in two dimensions,
/// `l` in three, parity (`0` even, `1` odd) in one. Periodic grids only have
/// the full space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    Full,
    Angular(u32),
}

impl Sector {
    /// Number of independent angular harmonics sharing this radial operator.
    pub fn copies(self, dim: usize) -> usize {
        match self {
            Sector::Full | Sector::Angular(0) => 1,
            Sector::Angular(m) => {
                match dim {
                    1 => 1,
                    2 => 2,
                    _ => 2 * m as usize + 1,
                }
            }
        }
    }

    pub fn label(self) -> String {
        match self {
            Sector::Full => "full".into(),
            Sector::Angular(m) => format!("m={m}"),
        }
    }
}

/// `m (m + n - 2)`, the eigenvalue of the Laplace-Beltrami operator on the
/// unit sphere for harmonics of degree `m`.
pub fn angular_eigenvalue(dim: usize, m: u32) -> f64 {
    let m = m as f64;
    m * (m + dim as f64 - 2.0)
}

#[derive(Debug, Clone)]
pub enum Grid {
    Periodic(PeriodicGrid),
    Radial(RadialGrid),
}

impl Grid {
    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        match spec.kind {
            GridKind::Periodic => PeriodicGrid::new(spec.dim, spec.points, spec.extent).map(Grid::Periodic),
            GridKind::RadialSpectral => {
                RadialGrid::spectral(spec.dim, spec.points, spec.extent).map(Grid::Radial)
            }
            GridKind::RadialGraded => {
                let h_min = spec
                    .h_min
                    .ok_or_else(|| Error::InvalidParameter("graded grid needs h_min".into()))?;
                let growth = spec.growth.unwrap_or(0.0);
                RadialGrid::graded(spec.dim, spec.extent, h_min, growth).map(Grid::Radial)
            }
        }
    }

    pub fn periodic(dim: usize, points: usize, extent: f64) -> Result<Arc<Self>> {
        GridSpec::periodic(dim, points, extent).build()
    }

    pub fn radial_spectral(dim: usize, points: usize, extent: f64) -> Result<Arc<Self>> {
        GridSpec::radial_spectral(dim, points, extent).build()
    }

    pub fn radial_graded(dim: usize, extent: f64, h_min: f64, growth: f64) -> Result<Arc<Self>> {
        GridSpec::radial_graded(dim, extent, h_min, growth).build()
    }

    pub fn spec(&self) -> GridSpec {
        match self {
            Grid::Periodic(g) => GridSpec::periodic(g.dim(), g.points(), g.extent()),
            Grid::Radial(g) => match g.grading() {
                None => GridSpec::radial_spectral(g.dim(), g.len(), g.extent()),
                Some((h, k)) => {
                    let mut s = GridSpec::radial_graded(g.dim(), g.extent(), h, k);
                    s.points = g.len();
                    s
                }
            },
        }
    }

    pub fn kind(&self) -> GridKind {
        self.spec().kind
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::Periodic(g) => g.dim(),
            Grid::Radial(g) => g.dim(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Periodic(g) => g.len(),
            Grid::Radial(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> f64 {
        match self {
            Grid::Periodic(g) => g.extent(),
            Grid::Radial(g) => g.extent(),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Grid::Radial(_))
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self.spec() == other.spec()
    }

    /// Quadrature weights, so that `int f = sum w_i f_i`.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => vec![g.cell_volume(); g.len()],
            Grid::Radial(g) => g.weights().to_vec(),
        }
    }

    /// `|x|` at every node.
    pub fn radii(&self) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => (0..g.len()).map(|i| g.radius(i)).collect(),
            Grid::Radial(g) => g.radii().to_vec(),
        }
    }

    /// Signed node coordinate along `axis` (periodic) or the radius (radial).
    pub fn coordinates(&self, axis: usize) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => (0..g.len()).map(|i| g.coordinate(i, axis)).collect(),
            Grid::Radial(g) => g.radii().to_vec(),
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        match self {
            Grid::Periodic(g) => g.cell_volume() * f.iter().sum::<f64>(),
            Grid::Radial(g) => f.iter().zip(g.weights()).map(|(f, w)| f * w).sum(),
        }
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        match self {
            Grid::Periodic(p) => p.cell_volume() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>(),
            Grid::Radial(r) => f.iter().zip(g).zip(r.weights()).map(|((a, b), w)| a * b * w).sum(),
        }
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => g.laplacian(f),
            Grid::Radial(g) => g.laplacian(f),
        }
    }

    pub fn laplacian_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        match self {
            Grid::Periodic(g) => g.laplacian_complex(f),
            Grid::Radial(g) => g.laplacian_complex(f),
        }
    }

    pub fn gradient_sq_norm(&self, f: &[f64]) -> f64 {
        match self {
            Grid::Periodic(g) => g.gradient_sq_norm(f),
            Grid::Radial(g) => g.gradient_sq_norm(f),
        }
    }

    pub fn gradient_sq_norm_complex(&self, f: &[Complex64]) -> f64 {
        match self {
            Grid::Periodic(g) => g.gradient_sq_norm_complex(f),
            Grid::Radial(g) => {
                let re: Vec<f64> = f.iter().map(|z| z.re).collect();
                let im: Vec<f64> = f.iter().map(|z| z.im).collect();
                g.gradient_sq_norm(&re) + g.gradient_sq_norm(&im)
            }
        }
    }

    /// Partial derivative along `axis`; on radial grids this is `d/dr`.
    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => g.derivative(f, axis),
            Grid::Radial(g) => g.derivative(f),
        }
    }

    /// `x . grad f`.
    pub fn dilation_generator(&self, f: &[f64]) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => g.dilation_generator(f),
            Grid::Radial(g) => g.derivative(f).iter().zip(g.radii()).map(|(d, r)| d * r).collect(),
        }
    }

    /// `f(lambda x)` on every node, by the grid's native interpolant.
    pub fn dilate(&self, f: &[f64], lambda: f64) -> Vec<f64> {
        match self {
            Grid::Periodic(g) => g.dilate(f, lambda),
            Grid::Radial(g) => {
                let p = g.interpolator(f);
                g.radii().iter().map(|r| p(lambda * r)).collect()
            }
        }
    }

    /// Solves `(-Lap + c) u = f`, `c > 0`.
    pub fn inverse_helmholtz(&self, f: &[f64], c: f64) -> Result<Vec<f64>> {
        self.helmholtz(c)?.solve(f)
    }

    pub fn helmholtz(&self, c: f64) -> Result<Helmholtz<'_>> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("Helmholtz shift must be positive, got {c}")));
        }
        let inner = match self {
            Grid::Periodic(_) => None,
            Grid::Radial(g) => Some(g.helmholtz(c)?),
        };
        Ok(Helmholtz { grid: self, c, inner })
    }

    /// Dense stiffness matrix `K` of a sector, with `int |grad f|^2 = f^T K f`
    /// on nodal values. Weights `W` complete the pair: `-Lap = W^{-1} K`.
    pub fn stiffness_dense(&self, sector: Sector) -> Result<DMatrix<f64>> {
        match (self, sector) {
            (Grid::Periodic(g), Sector::Full) => {
                if g.len() > 4096 {
                    return Err(Error::Unsupported(format!(
                        "dense operators on a periodic grid with {} nodes",
                        g.len()
                    )));
                }
                Ok(g.neg_laplacian_dense() * g.cell_volume())
            }
            (Grid::Periodic(_), Sector::Angular(_)) => Err(Error::Unsupported(
                "angular sectors exist only on radial grids".into(),
            )),
            (Grid::Radial(g), s) => {
                let c = match s {
                    Sector::Full | Sector::Angular(0) => 0.0,
                    Sector::Angular(m) => angular_eigenvalue(g.dim(), m),
                };
                Ok(g.stiffness_dense(c))
            }
        }
    }
}

pub struct Helmholtz<'g> {
    grid: &'g Grid,
    c: f64,
    inner: Option<RadialHelmholtz>,
}

impl Helmholtz<'_> {
    pub fn shift(&self) -> f64 {
        self.c
    }

    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), f.len())?;
        Ok(match (self.grid, &self.inner) {
            (Grid::Periodic(g), _) => g.inverse_helmholtz(f, self.c),
            (Grid::Radial(g), Some(h)) => h.solve(g.weights(), f),
            (Grid::Radial(_), None) => unreachable!("radial Helmholtz is always factorized"),
        })
    }
}

/// Nodal values on a shared grid.
#[derive(Debug, Clone)]
pub struct Field<T = f64> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

pub type ComplexField = Field<Complex64>;

impl<T: Copy + Default> Field<T> {
    pub fn new(grid: Arc<Grid>, values: Vec<T>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![T::default(); grid.len()];
        Self { grid, values }
    }

    /// Samples a radial profile `f(|x|)`.
    pub fn from_radial(grid: Arc<Grid>, f: impl Fn(f64) -> T) -> Self {
        let values = grid.radii().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn ensure_same_grid<S>(&self, other: &Field<S>) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl Field<f64> {
    pub fn laplacian(&self) -> Field {
        Field { grid: self.grid.clone(), values: self.grid.laplacian(&self.values) }
    }

    pub fn inverse_helmholtz(&self, c: f64) -> Result<Field> {
        let values = self.grid.inverse_helmholtz(&self.values, c)?;
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self.grid.inner(&self.values, &other.values))
    }

    pub fn gradient_sq_norm(&self) -> f64 {
        self.grid.gradient_sq_norm(&self.values)
    }

    pub fn l2_sq(&self) -> f64 {
        self.grid.inner(&self.values, &self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn rearranged(&self) -> Field {
        Field { grid: self.grid.clone(), values: rearrange_decreasing(&self.grid, &self.values) }
    }

    pub fn to_complex(&self) -> ComplexField {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl ComplexField {
    pub fn laplacian(&self) -> ComplexField {
        Field { grid: self.grid.clone(), values: self.grid.laplacian_complex(&self.values) }
    }

    pub fn gradient_sq_norm(&self) -> f64 {
        self.grid.gradient_sq_norm_complex(&self.values)
    }

    pub fn l2_sq(&self) -> f64 {
        let m: Vec<f64> = self.values.iter().map(|z| z.norm_sqr()).collect();
        self.grid.integrate(&m)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn modulus(&self) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|z| z.norm()).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_roundtrip() {
        for spec in [
            GridSpec::periodic(1, 64, 10.0),
            GridSpec::radial_spectral(3, 32, 15.0),
        ] {
            let g = spec.build().unwrap();
            assert_eq!(g.spec(), spec);
        }
        let g = Grid::radial_graded(2, 10.0, 0.01, 0.05).unwrap();
        let again = g.spec().build().unwrap();
        assert_eq!(g.radii(), again.radii());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Field::<f64>::zeros(Grid::periodic(1, 64, 10.0).unwrap());
        let b = Field::<f64>::zeros(Grid::periodic(1, 64, 11.0).unwrap());
        assert!(matches!(a.inner(&b), Err(Error::GridMismatch)));
        assert!(Field::new(Grid::periodic(1, 64, 10.0).unwrap(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn stiffness_matches_gradient_norm() {
        let g = Grid::periodic(1, 32, 6.0).unwrap();
        let f: Vec<f64> = g.radii().iter().map(|x| (-x * x).exp()).collect();
        let k = g.stiffness_dense(Sector::Full).unwrap();
        let v = nalgebra::DVector::from_vec(f.clone());
        assert!(((v.transpose() * &k * &v)[0] - g.gradient_sq_norm(&f)).abs() < 1e-12);
    }
}
