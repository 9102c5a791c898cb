//! Uniform periodic grids on `[-L, L)^d` with FFT spectral operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
    extent: f64,
    h: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    k_odd: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("extent", &self.extent)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::UnsupportedDimension {
                n: dim,
                reason: "periodic grids are available in one and two dimensions".into(),
            });
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "periodic grid needs an even point count >= 4, got {n}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("extent must be positive, got {extent}")));
        }
        let h = 2.0 * extent / n as f64;
        let x = (0..n).map(|j| -extent + j as f64 * h).collect();
        let dk = PI / extent;
        let k: Vec<f64> = (0..n)
            .map(|j| if j <= n / 2 { j as f64 * dk } else { (j as f64 - n as f64) * dk })
            .collect();
        let mut k_odd = k.clone();
        k_odd[n / 2] = 0.0;
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            n,
            extent,
            h,
            x,
            k,
            k_odd,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis.
    pub fn points(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn axis(&self) -> &[f64] {
        &self.x
    }

    /// Coordinate `axis` of node `i`; storage is row-major with x fastest.
    pub fn coordinate(&self, i: usize, axis: usize) -> f64 {
        match axis {
            0 => self.x[i % self.n],
            _ => self.x[i / self.n],
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        (0..self.dim)
            .map(|a| self.coordinate(i, a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn transpose(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let n = self.n;
        scratch.clear();
        scratch.extend_from_slice(buf);
        for i in 0..n {
            for j in 0..n {
                buf[j * n + i] = scratch[i * n + j];
            }
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        if self.dim == 2 {
            let mut s = Vec::with_capacity(buf.len());
            self.transpose(buf, &mut s);
            self.fwd.process(buf);
            self.transpose(buf, &mut s);
        }
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        if self.dim == 2 {
            let mut s = Vec::with_capacity(buf.len());
            self.transpose(buf, &mut s);
            self.inv.process(buf);
            self.transpose(buf, &mut s);
        }
        let scale = 1.0 / buf.len() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    fn k2(&self, idx: usize) -> f64 {
        match self.dim {
            1 => self.k[idx].powi(2),
            _ => self.k[idx % self.n].powi(2) + self.k[idx / self.n].powi(2),
        }
    }

    fn k_axis(&self, idx: usize, axis: usize) -> f64 {
        match axis {
            0 => self.k_odd[idx % self.n],
            _ => self.k_odd[idx / self.n],
        }
    }

    /// Applies the Fourier multiplier `m(|k|^2)` to a complex field in place.
    pub fn apply_radial_multiplier(&self, buf: &mut [Complex64], m: impl Fn(f64) -> Complex64) {
        self.forward(buf);
        for (idx, z) in buf.iter_mut().enumerate() {
            *z *= m(self.k2(idx));
        }
        self.inverse(buf);
    }

    fn real_multiplier(&self, f: &[f64], m: impl Fn(usize) -> Complex64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        for (idx, z) in buf.iter_mut().enumerate() {
            *z *= m(idx);
        }
        self.inverse(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        self.real_multiplier(f, |i| Complex64::new(-self.k2(i), 0.0))
    }

    pub fn laplacian_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut buf = f.to_vec();
        self.apply_radial_multiplier(&mut buf, |k2| Complex64::new(-k2, 0.0));
        buf
    }

    pub fn inverse_helmholtz(&self, f: &[f64], c: f64) -> Vec<f64> {
        self.real_multiplier(f, |i| Complex64::new(1.0 / (self.k2(i) + c), 0.0))
    }

    pub fn derivative(&self, f: &[f64], axis: usize) -> Vec<f64> {
        self.real_multiplier(f, |i| Complex64::new(0.0, self.k_axis(i, axis)))
    }

    /// `x . grad f`.
    pub fn dilation_generator(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        for axis in 0..self.dim {
            let d = self.derivative(f, axis);
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.coordinate(i, axis) * d[i];
            }
        }
        out
    }

    /// `int |grad f|^2`, identical to `<-Lap f, f>` by Parseval.
    pub fn gradient_sq_norm(&self, f: &[f64]) -> f64 {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        let s: f64 = buf
            .iter()
            .enumerate()
            .map(|(i, z)| self.k2(i) * z.norm_sqr())
            .sum();
        s * self.cell_volume() / buf.len() as f64
    }

    pub fn gradient_sq_norm_complex(&self, f: &[Complex64]) -> f64 {
        let mut buf = f.to_vec();
        self.forward(&mut buf);
        let s: f64 = buf
            .iter()
            .enumerate()
            .map(|(i, z)| self.k2(i) * z.norm_sqr())
            .sum();
        s * self.cell_volume() / buf.len() as f64
    }

    /// Trigonometric interpolant evaluated at `lambda * x` on every node.
    pub fn dilate(&self, f: &[f64], lambda: f64) -> Vec<f64> {
        let n = self.n;
        let along = |row: &[f64]| -> Vec<f64> {
            let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.fwd.process(&mut buf);
            (0..n)
                .map(|j| {
                    let y = lambda * self.x[j] + self.extent;
                    let acc: f64 = buf
                        .iter()
                        .enumerate()
                        .map(|(m, c)| {
                            if m == n / 2 {
                                c.re * (self.k[m] * y).cos()
                            } else {
                                (c * Complex64::from_polar(1.0, self.k[m] * y)).re
                            }
                        })
                        .sum();
                    acc / n as f64
                })
                .collect()
        };
        if self.dim == 1 {
            return along(f);
        }
        let mut tmp = vec![0.0; f.len()];
        for r in 0..n {
            let out = along(&f[r * n..(r + 1) * n]);
            tmp[r * n..(r + 1) * n].copy_from_slice(&out);
        }
        let mut res = vec![0.0; f.len()];
        for c in 0..n {
            let col: Vec<f64> = (0..n).map(|r| tmp[r * n + c]).collect();
            let out = along(&col);
            for r in 0..n {
                res[r * n + c] = out[r];
            }
        }
        res
    }

    /// Dense matrix of `-Lap` acting on nodal values.
    pub fn neg_laplacian_dense(&self) -> nalgebra::DMatrix<f64> {
        let m = self.len();
        let mut a = nalgebra::DMatrix::zeros(m, m);
        let mut e = vec![0.0; m];
        for j in 0..m {
            e[j] = 1.0;
            let col = self.laplacian(&e);
            for i in 0..m {
                a[(i, j)] = -col[i];
            }
            e[j] = 0.0;
        }
        (&a + a.transpose()) * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_of_gaussian() {
        let g = PeriodicGrid::new(1, 256, 16.0).unwrap();
        let f: Vec<f64> = g.axis().iter().map(|x| (-x * x).exp()).collect();
        let lap = g.laplacian(&f);
        for (x, l) in g.axis().iter().zip(&lap) {
            let e = (4.0 * x * x - 2.0) * (-x * x).exp();
            assert!((l - e).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_inverts() {
        let g = PeriodicGrid::new(2, 32, 8.0).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| (-g.radius(i).powi(2)).exp()).collect();
        let u = g.inverse_helmholtz(&f, 1.7);
        let lap = g.laplacian(&u);
        for i in 0..g.len() {
            assert!((-lap[i] + 1.7 * u[i] - f[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_norm_of_gaussian() {
        // int (2x e^{-x^2})^2 dx = sqrt(pi/2)
        let g = PeriodicGrid::new(1, 128, 12.0).unwrap();
        let f: Vec<f64> = g.axis().iter().map(|x| (-x * x).exp()).collect();
        let e = (PI / 2.0).sqrt();
        assert!((g.gradient_sq_norm(&f) - e).abs() < 1e-12);
    }

    #[test]
    fn dilation_matches_analytic() {
        let g = PeriodicGrid::new(2, 96, 10.0).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|i| (-g.radius(i).powi(2)).exp()).collect();
        let d = g.dilate(&f, 1.3);
        for i in 0..g.len() {
            let e = (-(1.3 * g.radius(i)).powi(2)).exp();
            assert!((d[i] - e).abs() < 1e-12);
        }
        let xd = g.dilation_generator(&f);
        for i in 0..g.len() {
            let r2 = g.radius(i).powi(2);
            assert!((xd[i] + 2.0 * r2 * (-r2).exp()).abs() < 1e-11);
        }
    }
}
