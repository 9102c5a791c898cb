//! Radial grids on `[0, R]` for radially symmetric fields in `n = 1, 2, 3`,
//! with a homogeneous Dirichlet condition at `r = R`. In one dimension a
//! radial field is an even function on `[-R, R]`.
//!
//! Two schemes share one interface. `Spectral` is a Gauss-Radau-Jacobi
//! Galerkin discretization: the quadrature is exact for the mass and stiffness
//! integrands, so the discrete Laplacian `-W^{-1} K` is self-adjoint in the
//! weighted inner product and converges spectrally. `Graded` is a cell-centred
//! finite-volume scheme on a geometrically graded mesh, second order, with a
//! tridiagonal stiffness matrix; it is used for concentrating dynamics.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;

use super::quadrature::{barycentric_eval, barycentric_weights, differentiation_matrix, gauss_radau_right};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) enum Scheme {
    Spectral {
        /// Reference nodes on [-1, 1], including the Dirichlet node t = 1 last.
        t: Vec<f64>,
        bary: Vec<f64>,
        /// d/dr at the free nodes, columns indexed by free nodes.
        d: DMatrix<f64>,
        k: DMatrix<f64>,
    },
    Graded {
        faces: Vec<f64>,
        /// Flux coefficient through face `i + 1`; the last entry couples to the boundary.
        flux: Vec<f64>,
        h_min: f64,
        growth: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    extent: f64,
    r: Vec<f64>,
    w: Vec<f64>,
    pub(crate) scheme: Scheme,
}

pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => 2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_int(dim),
    }
}

fn gamma_half_int(dim: usize) -> f64 {
    // Gamma(dim / 2)
    if dim % 2 == 0 {
        (1..dim / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < dim as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension {
            n: dim,
            reason: "radial grids cover n = 1, 2, 3".into(),
        })
    }
}

impl RadialGrid {
    pub fn spectral(dim: usize, points: usize, extent: f64) -> Result<Self> {
        check_dim(dim)?;
        Self::spectral_lifted(dim, points, extent)
    }

    /// Spectral grid for the radial operator of any dimension `dim >= 1`.
    /// Angular sector `m` of dimension `n` is the radial problem in dimension
    /// `n + 2m` under `f = r^m g`.
    pub fn spectral_lifted(dim: usize, points: usize, extent: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::UnsupportedDimension { n: dim, reason: "radial grids need n >= 1".into() });
        }
        if points < 4 {
            return Err(Error::InvalidParameter(format!("radial grid needs >= 4 points, got {points}")));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("extent must be positive, got {extent}")));
        }
        let (t, omega) = gauss_radau_right(points, dim as u32 - 1);
        let bary = barycentric_weights(&t);
        let dt = differentiation_matrix(&t, &bary);
        let np = points + 1;
        let area = sphere_area(dim);
        let half = extent / 2.0;

        let mut k = DMatrix::zeros(points, points);
        for q in 0..np {
            for i in 0..points {
                let a = omega[q] * dt[(q, i)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..points {
                    k[(i, j)] += a * dt[(q, j)];
                }
            }
        }
        k = (&k + k.transpose()) * (0.5 * area * half.powi(dim as i32 - 2));

        let r = t[..points].iter().map(|t| half * (1.0 + t)).collect();
        let w = omega[..points].iter().map(|o| area * half.powi(dim as i32) * o).collect();
        let d = DMatrix::from_fn(points, points, |i, j| dt[(i, j)] / half);
        Ok(Self { dim, extent, r, w, scheme: Scheme::Spectral { t, bary, d, k } })
    }

    /// Graded mesh with cell widths `max(h_min, growth * r)`.
    pub fn graded(dim: usize, extent: f64, h_min: f64, growth: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(extent > 0.0 && h_min > 0.0 && h_min < extent && growth >= 0.0 && growth < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "graded grid needs 0 < h_min < R and 0 <= growth < 0.5 (R={extent}, h_min={h_min}, growth={growth})"
            )));
        }
        let mut faces = vec![0.0];
        let mut rho: f64 = 0.0;
        while rho < extent {
            rho += h_min.max(growth * rho);
            faces.push(rho);
        }
        let scale = extent / rho;
        for f in faces.iter_mut() {
            *f *= scale;
        }
        let cells = faces.len() - 1;
        if cells < 4 {
            return Err(Error::InvalidParameter("graded grid has fewer than 4 cells".into()));
        }
        let area = sphere_area(dim);
        let nd = dim as i32;
        let r: Vec<f64> = (0..cells).map(|i| 0.5 * (faces[i] + faces[i + 1])).collect();
        let w: Vec<f64> = (0..cells)
            .map(|i| area * (faces[i + 1].powi(nd) - faces[i].powi(nd)) / dim as f64)
            .collect();
        let flux = (0..cells)
            .map(|i| {
                let rho = faces[i + 1];
                let gap = if i + 1 < cells { r[i + 1] - r[i] } else { extent - r[i] };
                area * rho.powi(nd - 1) / gap
            })
            .collect();
        Ok(Self { dim, extent, r, w, scheme: Scheme::Graded { faces, flux, h_min, growth } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.scheme, Scheme::Spectral { .. })
    }

    pub fn grading(&self) -> Option<(f64, f64)> {
        match &self.scheme {
            Scheme::Graded { h_min, growth, .. } => Some((*h_min, *growth)),
            _ => None,
        }
    }

    /// Cell faces of the graded scheme, `0 = f_0 < ... < f_N = R`.
    pub fn faces(&self) -> Option<&[f64]> {
        match &self.scheme {
            Scheme::Graded { faces, .. } => Some(faces),
            _ => None,
        }
    }

    /// Diagonal and superdiagonal of the tridiagonal stiffness matrix of the
    /// graded scheme; `None` for the spectral scheme, whose stiffness is dense.
    pub fn stiffness_tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let Scheme::Graded { flux, .. } = &self.scheme else {
            return None;
        };
        let n = self.len();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        for i in 0..n {
            diag[i] += flux[i];
            if i + 1 < n {
                diag[i + 1] += flux[i];
                off[i] = -flux[i];
            }
        }
        Some((diag, off))
    }

    /// `K f`, so that `int |grad f|^2 = <K f, f>` and `Lap f = -W^{-1} K f`.
    pub fn stiffness_apply(&self, f: &[f64]) -> Vec<f64> {
        match &self.scheme {
            Scheme::Spectral { k, .. } => {
                let v = nalgebra::DVectorView::from_slice(f, f.len());
                (k * v).iter().copied().collect()
            }
            Scheme::Graded { flux, .. } => {
                let n = f.len();
                let mut out = vec![0.0; n];
                for i in 0..n {
                    let right = if i + 1 < n { f[i + 1] } else { 0.0 };
                    let g = flux[i] * (f[i] - right);
                    out[i] += g;
                    if i + 1 < n {
                        out[i + 1] -= g;
                    }
                }
                out
            }
        }
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let kf = self.stiffness_apply(f);
        kf.iter().zip(&self.w).map(|(a, w)| -a / w).collect()
    }

    pub fn laplacian_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let a = self.laplacian(&re);
        let b = self.laplacian(&im);
        a.into_iter().zip(b).map(|(x, y)| Complex64::new(x, y)).collect()
    }

    pub fn gradient_sq_norm(&self, f: &[f64]) -> f64 {
        self.stiffness_apply(f).iter().zip(f).map(|(a, b)| a * b).sum()
    }

    /// Dense stiffness matrix, with the angular term `c / r^2` of a sector added.
    pub fn stiffness_dense(&self, angular: f64) -> DMatrix<f64> {
        let n = self.len();
        let mut k = match &self.scheme {
            Scheme::Spectral { k, .. } => k.clone(),
            Scheme::Graded { flux, .. } => {
                let mut k = DMatrix::zeros(n, n);
                for i in 0..n {
                    k[(i, i)] += flux[i];
                    if i + 1 < n {
                        k[(i + 1, i + 1)] += flux[i];
                        k[(i, i + 1)] -= flux[i];
                        k[(i + 1, i)] -= flux[i];
                    }
                }
                k
            }
        };
        if angular != 0.0 {
            for i in 0..n {
                k[(i, i)] += angular * self.w[i] / (self.r[i] * self.r[i]);
            }
        }
        k
    }

    /// `f'(r)` at the nodes.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        match &self.scheme {
            Scheme::Spectral { d, .. } => {
                let v = nalgebra::DVectorView::from_slice(f, f.len());
                (d * v).iter().copied().collect()
            }
            Scheme::Graded { .. } => {
                let n = f.len();
                let r = &self.r;
                (0..n)
                    .map(|i| {
                        let (xm, fm) = if i == 0 { (-r[0], f[0]) } else { (r[i - 1], f[i - 1]) };
                        let (xp, fp) = if i + 1 < n { (r[i + 1], f[i + 1]) } else { (self.extent, 0.0) };
                        three_point_slope(xm, r[i], xp, fm, f[i], fp)
                    })
                    .collect()
            }
        }
    }

    /// Interpolant evaluated at radius `x`; zero beyond the boundary.
    pub fn interpolator<'a>(&'a self, f: &'a [f64]) -> Box<dyn Fn(f64) -> f64 + 'a> {
        match &self.scheme {
            Scheme::Spectral { t, bary, .. } => {
                let mut vals = f.to_vec();
                vals.push(0.0);
                let half = self.extent / 2.0;
                Box::new(move |x: f64| {
                    let x = x.abs();
                    if x >= self.extent {
                        0.0
                    } else {
                        barycentric_eval(t, bary, &vals, x / half - 1.0)
                    }
                })
            }
            Scheme::Graded { .. } => {
                let mut xs = Vec::with_capacity(f.len() + 2);
                let mut ys = Vec::with_capacity(f.len() + 2);
                xs.push(-self.r[0]);
                ys.push(f[0]);
                xs.extend_from_slice(&self.r);
                ys.extend_from_slice(f);
                xs.push(self.extent);
                ys.push(0.0);
                let spline = CubicSpline::new(xs, ys);
                let extent = self.extent;
                Box::new(move |x: f64| {
                    let x = x.abs();
                    if x >= extent {
                        0.0
                    } else {
                        spline.eval(x)
                    }
                })
            }
        }
    }

    /// Factorized `(-Lap + c)` for repeated solves.
    pub fn helmholtz(&self, c: f64) -> Result<RadialHelmholtz> {
        match &self.scheme {
            Scheme::Spectral { .. } => {
                // Symmetric diagonal scaling keeps the solve accurate at the
                // small-weight nodes next to the origin.
                let mut a = self.stiffness_dense(0.0);
                let s: Vec<f64> = self.w.iter().map(|w| 1.0 / w.sqrt()).collect();
                let n = self.len();
                for j in 0..n {
                    for i in 0..n {
                        a[(i, j)] *= s[i] * s[j];
                    }
                    a[(j, j)] += c;
                }
                let ch = Cholesky::new(a).ok_or_else(|| {
                    Error::InvalidParameter(format!("-Lap + {c} is not positive definite"))
                })?;
                Ok(RadialHelmholtz::Dense(ch))
            }
            Scheme::Graded { flux, .. } => {
                let n = self.len();
                let mut diag = vec![0.0; n];
                let mut off = vec![0.0; n.saturating_sub(1)];
                for i in 0..n {
                    diag[i] += flux[i] + c * self.w[i];
                    if i + 1 < n {
                        diag[i + 1] += flux[i];
                        off[i] = -flux[i];
                    }
                }
                let tri = Tridiagonal::factor(&diag, &off).ok_or_else(|| {
                    Error::InvalidParameter(format!("-Lap + {c} is not positive definite"))
                })?;
                Ok(RadialHelmholtz::Tri(tri))
            }
        }
    }
}

fn three_point_slope(xm: f64, x0: f64, xp: f64, fm: f64, f0: f64, fp: f64) -> f64 {
    let hm = x0 - xm;
    let hp = xp - x0;
    (-hp / (hm * (hm + hp))) * fm + ((hp - hm) / (hm * hp)) * f0 + (hm / (hp * (hm + hp))) * fp
}

pub enum RadialHelmholtz {
    Dense(Cholesky<f64, nalgebra::Dyn>),
    Tri(Tridiagonal),
}

impl RadialHelmholtz {
    /// Solves `(K + c W) u = W f`.
    pub fn solve(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        match self {
            RadialHelmholtz::Dense(ch) => {
                let b = nalgebra::DVector::from_iterator(f.len(), f.iter().zip(w).map(|(f, w)| f * w.sqrt()));
                ch.solve(&b).iter().zip(w).map(|(y, w)| y / w.sqrt()).collect()
            }
            RadialHelmholtz::Tri(t) => {
                let rhs: Vec<f64> = f.iter().zip(w).map(|(f, w)| f * w).collect();
                t.solve(&rhs)
            }
        }
    }
}

/// LDL^T factorization of a symmetric positive definite tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl Tridiagonal {
    pub fn factor(diag: &[f64], off: &[f64]) -> Option<Self> {
        let n = diag.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = diag[0];
        for i in 1..n {
            if d[i - 1] <= 0.0 {
                return None;
            }
            l[i - 1] = off[i - 1] / d[i - 1];
            d[i] = diag[i] - l[i - 1] * off[i - 1];
        }
        if d[n - 1] <= 0.0 {
            return None;
        }
        Some(Self { d, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 1..n {
            y[i] -= self.l[i - 1] * y[i - 1];
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n - 1).rev() {
            y[i] -= self.l[i] * y[i + 1];
        }
        y
    }
}

/// Complex tridiagonal solve (Thomas algorithm), no pivoting.
pub fn solve_tridiagonal_complex(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &mut [Complex64],
) {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut d0 = diag[0];
    if n > 1 {
        c[0] = upper[0] / d0;
    }
    rhs[0] /= d0;
    for i in 1..n {
        d0 = diag[i] - lower[i - 1] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / d0;
        }
        rhs[i] = (rhs[i] - lower[i - 1] * rhs[i - 1]) / d0;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= c[i] * next;
    }
}

/// Natural cubic spline through strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut off = vec![0.0; k.saturating_sub(1)];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                diag[i - 1] = (h0 + h1) / 3.0;
                if i < n - 2 {
                    off[i - 1] = h1 / 6.0;
                }
                rhs[i - 1] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            }
            let tri = Tridiagonal::factor(&diag, &off).expect("spline system is diagonally dominant");
            let sol = tri.solve(&rhs);
            m[1..n - 1].copy_from_slice(&sol);
        }
        Self { x, y, m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return self.y[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(g: &RadialGrid) -> Vec<f64> {
        g.radii().iter().map(|r| (-r * r).exp()).collect()
    }

    #[test]
    fn spectral_mass_of_gaussian() {
        // int_{R^n} e^{-2|x|^2} = (pi/2)^{n/2}
        for dim in [2, 3] {
            let g = RadialGrid::spectral(dim, 60, 10.0).unwrap();
            let f = gaussian(&g);
            let m: f64 = f.iter().zip(g.weights()).map(|(f, w)| f * f * w).sum();
            let e = (PI / 2.0).powf(dim as f64 / 2.0);
            assert!((m - e).abs() < 1e-13, "dim {dim}: {m} vs {e}");
        }
    }

    #[test]
    fn spectral_laplacian_and_gradient() {
        for dim in [2usize, 3] {
            let g = RadialGrid::spectral(dim, 80, 10.0).unwrap();
            let f = gaussian(&g);
            let lap = g.laplacian(&f);
            for (r, l) in g.radii().iter().zip(&lap) {
                let e = (4.0 * r * r - 2.0 * dim as f64) * (-r * r).exp();
                assert!((l - e).abs() < 1e-7, "dim {dim} r {r}: {l} vs {e}");
            }
            // int |grad e^{-r^2}|^2 = n (pi/2)^{n/2}
            let e = dim as f64 * (PI / 2.0).powf(dim as f64 / 2.0);
            assert!((g.gradient_sq_norm(&f) - e).abs() < 1e-12);
            let d = g.derivative(&f);
            for (r, v) in g.radii().iter().zip(&d) {
                assert!((v + 2.0 * r * (-r * r).exp()).abs() < 1e-9, "{r} {v}");
            }
        }
    }

    #[test]
    fn graded_second_order() {
        let err = |h: f64| {
            let g = RadialGrid::graded(3, 10.0, h, 0.0).unwrap();
            let f = gaussian(&g);
            let lap = g.laplacian(&f);
            g.radii()
                .iter()
                .zip(&lap)
                .map(|(r, l)| (l - (4.0 * r * r - 6.0) * (-r * r).exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.02) / err(0.01);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn helmholtz_roundtrip() {
        for g in [
            RadialGrid::spectral(2, 40, 12.0).unwrap(),
            RadialGrid::graded(3, 12.0, 0.01, 0.02).unwrap(),
        ] {
            let f = gaussian(&g);
            let hz = g.helmholtz(2.5).unwrap();
            let u = hz.solve(g.weights(), &f);
            let lap = g.laplacian(&u);
            for i in 0..g.len() {
                assert!((-lap[i] + 2.5 * u[i] - f[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn interpolation() {
        let g = RadialGrid::spectral(2, 60, 10.0).unwrap();
        let f = gaussian(&g);
        let p = g.interpolator(&f);
        assert!((p(0.77) - (-0.77f64 * 0.77).exp()).abs() < 1e-13);
        let g = RadialGrid::graded(2, 10.0, 0.002, 0.0).unwrap();
        let f = gaussian(&g);
        let p = g.interpolator(&f);
        assert!((p(0.77) - (-0.77f64 * 0.77).exp()).abs() < 1e-9);
    }

    #[test]
    fn complex_thomas() {
        let lower = vec![Complex64::new(1.0, 0.5); 3];
        let upper = vec![Complex64::new(-0.3, 1.0); 3];
        let diag = vec![Complex64::new(4.0, -1.0); 4];
        let x = [1.0, -2.0, 0.5, 3.0].map(|v| Complex64::new(v, 0.1 * v));
        let mut b: Vec<Complex64> = (0..4)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i - 1] * x[i - 1];
                }
                if i < 3 {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve_tridiagonal_complex(&lower, &diag, &upper, &mut b);
        for i in 0..4 {
            assert!((b[i] - x[i]).norm() < 1e-14);
        }
    }
}
