//! Spectral stability of a standing wave.
//!
//! The linearization is `J L v = lambda v` with
//! `J L = [[0, I_s L-], [-I_s L+, 0]]` and `I_s = diag(1, 1/sigma)`.
//! Conjugating by `I_s^{1/2}` gives `L~± = I_s^{1/2} L± I_s^{1/2}` and the
//! self-adjoint problem `sqrt(L~-) L~+ sqrt(L~-) w = -lambda^2 w` on the
//! complement of `ker L~- = span (P, 3 sqrt(sigma) Q)`.
//!
//! All dense work happens in `W^{1/2}`-scaled coordinates, where the
//! quadrature inner product is Euclidean.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Sector};
use crate::linop::{symmetric_eigen, LinearizedOperators, Which};
use crate::model::{self, ModelParams};
use crate::solver::WaveProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Growth rates above this declare instability.
    pub growth: f64,
    /// Smallest `nu = -lambda^2` treated as nonzero.
    pub nu_zero: f64,
    /// Ritz subspace: eigenvalues of `L~-` up to this multiple of the
    /// operator scale `max(alpha, beta, |V|)`.
    pub ritz_cut: f64,
    /// Positivity floor of `L~-` on the complement, relative to the scale.
    pub positivity: f64,
    /// Kernel classification, relative to the potential scale.
    pub kernel: f64,
    /// Constrained minimum of `<L+ h, h>` treated as negative.
    pub constrained: f64,
    /// Zero cluster radius of `J L`, relative to `min(alpha, beta)`.
    pub cluster: f64,
    /// Relative singular value threshold in the Weyr characteristic.
    pub singular: f64,
    /// `|VK|` at or below this is degenerate.
    pub vk_zero: f64,
    /// Kernel overlap of `(P, 3 sigma Q)` that triggers a warning.
    pub vk_overlap: f64,
    /// Largest dense nonsymmetric problem attempted.
    pub dense_limit: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            growth: 1e-4,
            nu_zero: 1e-9,
            ritz_cut: 100.0,
            positivity: 1e-8,
            kernel: 1e-6,
            constrained: 1e-8,
            cluster: 0.05,
            singular: 1e-5,
            vk_zero: 1e-5,
            vk_overlap: 1e-6,
            dense_limit: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

/// Sectors that carry the full spectral information for a radial wave.
pub fn default_sectors(ops: &LinearizedOperators) -> Vec<Sector> {
    if ops.grid().is_radial() && ops.grid().dim() == 1 {
        vec![Sector::Angular(0), Sector::Angular(1)]
    } else if ops.grid().is_radial() {
        vec![Sector::Angular(0), Sector::Angular(1), Sector::Angular(2)]
    } else {
        vec![Sector::Full]
    }
}

fn is_radial_sector(sector: Sector) -> bool {
    matches!(sector, Sector::Full | Sector::Angular(0))
}

/// `I_s^{1/2} M I_s^{1/2}`.
fn sigma_conjugate(mut m: DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    let s = 1.0 / sigma.sqrt();
    for j in 0..2 * n {
        for i in 0..2 * n {
            let f = if i >= n { s } else { 1.0 } * if j >= n { s } else { 1.0 };
            m[(i, j)] *= f;
        }
    }
    m
}

/// Householder reflector `Q` with `Q z = -+|z| e_0`; the columns `1..` of `Q`
/// are an orthonormal basis of `z^perp`.
struct Complement {
    v: DVector<f64>,
}

impl Complement {
    fn new(z: &DVector<f64>) -> Result<Self> {
        let norm = z.norm();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("constraint direction vanishes".into()));
        }
        let mut v = z / norm;
        v[0] += if v[0] >= 0.0 { 1.0 } else { -1.0 };
        let vn = v.norm();
        Ok(Self { v: v / vn })
    }

    /// `B^T M B` for the complement basis `B`.
    fn compress(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        // Q M Q with Q = I - 2 v v^T.
        let v = &self.v;
        let mv = m * v;
        let vmv = v.dot(&mv);
        let mut out = m.clone();
        out.ger(-2.0, &mv, v, 1.0);
        out.ger(-2.0, v, &mv, 1.0);
        out.ger(4.0 * vmv, v, v, 1.0);
        out.view((1, 1), (m.nrows() - 1, m.ncols() - 1)).into_owned()
    }

    /// `B y`.
    fn expand(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(y.len() + 1);
        x.rows_mut(1, y.len()).copy_from(y);
        let c = 2.0 * self.v.dot(&x);
        x - &self.v * c
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthRate {
    pub sector: Sector,
    /// `lambda = sqrt(-nu_min)` if `nu_min < -nu_zero`, else 0.
    pub rate: f64,
    pub nu_min: f64,
    /// Smallest eigenvalue of `L~-` on the complement of its kernel.
    pub l_minus_min: f64,
    pub subspace_dim: usize,
    /// Real-part component `a` of the growing mode, unit `L^2` norm.
    #[serde(skip)]
    pub mode: Option<(Vec<f64>, Vec<f64>)>,
}

/// Largest real eigenvalue of `J L` in a sector by Rayleigh-Ritz on the
/// symmetrized operator, restricted to the span of the eigenvectors of
/// `L~-` below `ritz_cut * scale`. The Ritz value bounds `nu_min` from above,
/// so a truncated subspace never manufactures an instability.
pub fn symmetrized_growth_rate(ops: &LinearizedOperators, sector: Sector, tol: &Tolerances) -> Result<GrowthRate> {
    let sigma = ops.params().sigma;
    let basis = ops.sector_basis(sector)?;
    let lp = sigma_conjugate(ops.dense_in(&basis, Which::Plus), sigma);
    let lm = sigma_conjugate(ops.dense_in(&basis, Which::Minus), sigma);
    let scale = operator_scale(ops);
    let complement = if is_radial_sector(sector) {
        let (p, q) = ops.profile();
        let c = 3.0 * sigma.sqrt();
        let qz: Vec<f64> = q.iter().map(|x| c * x).collect();
        Some(Complement::new(&basis.scale(p, &qz)?)?)
    } else {
        None
    };
    let (mp, mm) = match &complement {
        Some(c) => (c.compress(&lp), c.compress(&lm)),
        None => (lp, lm),
    };
    let em = symmetric_eigen(mm)?;
    let l_minus_min = em.eigenvalues[0];
    if !(l_minus_min > tol.positivity * scale) {
        return Err(Error::SpectralAssumption(format!(
            "L- is not positive on the complement of its kernel in sector {} (min eigenvalue {l_minus_min:.3e})",
            sector.label()
        )));
    }
    let cut = tol.ritz_cut * scale;
    let k = em.eigenvalues.iter().take_while(|&&l| l <= cut).count().max(1);
    let vr = em.eigenvectors.columns(0, k).into_owned();
    let sq: Vec<f64> = em.eigenvalues.iter().take(k).map(|l| l.sqrt()).collect();
    let a = vr.transpose() * &mp * &vr;
    let x = DMatrix::from_fn(k, k, |i, j| sq[i] * a[(i, j)] * sq[j]);
    let ex = symmetric_eigen(x)?;
    let nu_min = ex.eigenvalues[0];
    let rate = if nu_min < -tol.nu_zero { (-nu_min).sqrt() } else { 0.0 };
    let mode = if rate > 0.0 {
        let y = ex.eigenvectors.column(0);
        let w = DVector::from_fn(k, |i, _| sq[i] * y[i]);
        let mut full = &vr * w;
        if let Some(c) = &complement {
            full = c.expand(&full);
        }
        let n = full.len() / 2;
        let s = 1.0 / sigma.sqrt();
        for i in n..2 * n {
            full[i] *= s;
        }
        let (a1, a2) = basis.to_nodal(ops.grid(), &full);
        let norm = ops.inner((&a1, &a2), (&a1, &a2)).sqrt();
        Some((a1.iter().map(|x| x / norm).collect(), a2.iter().map(|x| x / norm).collect()))
    } else {
        None
    };
    Ok(GrowthRate { sector, rate, nu_min, l_minus_min, subspace_dim: k, mode })
}

fn operator_scale(ops: &LinearizedOperators) -> f64 {
    let p = ops.params();
    ops.potential_scale().max(p.alpha()).max(p.beta())
}

/// Dense `J L` in `W^{1/2}` coordinates for a sector.
pub fn jl_matrix(ops: &LinearizedOperators, sector: Sector) -> Result<DMatrix<f64>> {
    let lp = ops.dense(Which::Plus, sector)?;
    let lm = ops.dense(Which::Minus, sector)?;
    let m = lp.nrows();
    let n = m / 2;
    let is = 1.0 / ops.params().sigma;
    let mut a = DMatrix::zeros(2 * m, 2 * m);
    for j in 0..m {
        for i in 0..m {
            let f = if i >= n { is } else { 1.0 };
            a[(i, m + j)] = f * lm[(i, j)];
            a[(m + i, j)] = -f * lp[(i, j)];
        }
    }
    Ok(a)
}

fn jl_eigenvalues(a: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let schur = nalgebra::Schur::try_new(a, f64::EPSILON, 1000 * n.max(10))
        .ok_or_else(|| Error::Eigensolver(format!("real Schur iteration did not converge ({n}x{n})")))?;
    Ok(schur.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect())
}

/// The `k` eigenvalues of `J L` with largest real part, by a dense real
/// Schur decomposition of the full `4N` matrix.
pub fn direct_jl_eigen(ops: &LinearizedOperators, sector: Sector, k: usize) -> Result<Vec<Complex64>> {
    let mut ev = jl_eigenvalues(jl_matrix(ops, sector)?)?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    ev.truncate(k);
    Ok(ev)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    /// `H = n/2 (P, Q) + x . grad (P, Q)`.
    #[serde(skip)]
    pub h: (Vec<f64>, Vec<f64>),
    /// `<L+ H, H>`.
    pub form: f64,
    /// Closed form `-(n - 2) int |grad P|^2 + |grad Q|^2`.
    pub expected: f64,
    pub kinetic: f64,
    pub h_norm_sq: f64,
    /// `<H, (P, 3Q)> / (|H| |(P, 3Q)|)`.
    pub orthogonality: f64,
}

fn certificate_vector(ops: &LinearizedOperators) -> (Vec<f64>, Vec<f64>) {
    let g = ops.grid();
    let (p, q) = ops.profile();
    let c = ops.params().n as f64 / 2.0;
    let xp = g.dilation_generator(p);
    let xq = g.dilation_generator(q);
    (
        (0..p.len()).map(|i| c * p[i] + xp[i]).collect(),
        (0..q.len()).map(|i| c * q[i] + xq[i]).collect(),
    )
}

pub fn h_certificate(ops: &LinearizedOperators) -> Result<Certificate> {
    let g = ops.grid();
    let (p, q) = ops.profile();
    let h = certificate_vector(ops);
    let sector = if g.is_radial() { Sector::Angular(0) } else { Sector::Full };
    let form = ops.form(Which::Plus, sector, &h.0, &h.1)?;
    let kinetic = model::kinetic(g, p, q)?;
    let n = ops.params().n as f64;
    let h_norm_sq = ops.inner((&h.0, &h.1), (&h.0, &h.1));
    let z2: Vec<f64> = q.iter().map(|x| 3.0 * x).collect();
    let zz = ops.inner((p, &z2), (p, &z2));
    let hz = ops.inner((&h.0, &h.1), (p, &z2));
    let orthogonality = if zz > 0.0 && h_norm_sq > 0.0 { hz / (zz * h_norm_sq).sqrt() } else { 0.0 };
    Ok(Certificate { h, form, expected: -(n - 2.0) * kinetic, kinetic, h_norm_sq, orthogonality })
}

/// `<L+ (P, 3Q), (P, 3Q)>` against its quartic closed form.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NegativeWitness {
    pub form: f64,
    /// `-int (2 P^4 / 9 + 4 P^3 Q / 3 + 24 P^2 Q^2 + 162 Q^4)`.
    pub closed_form: f64,
    /// `-int (2 P^4 / 9 + 2 P^3 Q / 3 + 7 P^2 Q^2 + 18 Q^4)`, the printed
    /// variant, kept for comparison.
    pub printed_form: f64,
}

impl NegativeWitness {
    pub fn relative_error(&self) -> f64 {
        (self.form - self.closed_form).abs() / self.closed_form.abs()
    }
}

/// The direction `(P, 3Q)` spans `ker L-`; on it `L+` reduces to the quartic
/// terms of the profile equations, which makes the pairing negative.
pub fn negative_witness(ops: &LinearizedOperators) -> Result<NegativeWitness> {
    let g = ops.grid();
    let (p, q) = ops.profile();
    let q3: Vec<f64> = q.iter().map(|x| 3.0 * x).collect();
    let sector = if g.is_radial() { Sector::Angular(0) } else { Sector::Full };
    let form = ops.form(Which::Plus, sector, p, &q3)?;
    let quartic = |c: [f64; 4]| {
        let f: Vec<f64> = p
            .iter()
            .zip(q)
            .map(|(&a, &b)| c[0] * a.powi(4) + c[1] * a.powi(3) * b + c[2] * a * a * b * b + c[3] * b.powi(4))
            .collect();
        -g.integrate(&f)
    };
    Ok(NegativeWitness {
        form,
        closed_form: quartic([2.0 / 9.0, 4.0 / 3.0, 24.0, 162.0]),
        printed_form: quartic([2.0 / 9.0, 2.0 / 3.0, 7.0, 18.0]),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ActionIdentity {
    /// `sup |L+ H - ((n-2) Lap P - n alpha P, (n-2) Lap Q - n beta Q)| / sup |L+ H|`.
    pub residual: f64,
    /// The same difference in the `L^2` norm.
    pub residual_l2: f64,
    /// `n = 2`: `|Pi L+ H + 2 (mu - 3 sigma) Pi (0, Q)| / |L+ H|` in `L^2`,
    /// with `Pi` the projection onto `(P, 3 sigma Q)^perp`.
    pub projection_residual: Option<f64>,
    /// `n = 2`: `sup |L+ H + 2 alpha (P, 3 sigma Q)| / sup |L+ H|`.
    pub resonant_residual: Option<f64>,
}

pub fn l_plus_action_identity(ops: &LinearizedOperators) -> Result<ActionIdentity> {
    let g = ops.grid();
    let params = *ops.params();
    let (p, q) = ops.profile();
    let h = certificate_vector(ops);
    let sector = if g.is_radial() { Sector::Angular(0) } else { Sector::Full };
    let (a, b) = ops.apply(Which::Plus, sector, &h.0, &h.1)?;
    let n = params.n as f64;
    let lp = g.laplacian(p);
    let lq = g.laplacian(q);
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    let mut d1 = vec![0.0; p.len()];
    let mut d2 = vec![0.0; p.len()];
    for i in 0..p.len() {
        let e1 = (n - 2.0) * lp[i] - n * params.alpha() * p[i];
        let e2 = (n - 2.0) * lq[i] - n * params.beta() * q[i];
        d1[i] = a[i] - e1;
        d2[i] = b[i] - e2;
        diff = diff.max(d1[i].abs()).max(d2[i].abs());
        size = size.max(a[i].abs()).max(b[i].abs());
    }
    let residual = if size > 0.0 { diff / size } else { diff };
    let size2 = ops.inner((&a, &b), (&a, &b)).sqrt();
    let diff2 = ops.inner((&d1, &d2), (&d1, &d2)).sqrt();
    let residual_l2 = if size2 > 0.0 { diff2 / size2 } else { diff2 };
    let (mut projection_residual, mut resonant_residual) = (None, None);
    if params.n == 2 {
        let c = 3.0 * params.sigma;
        let z2: Vec<f64> = q.iter().map(|x| c * x).collect();
        let zz = ops.inner((p, &z2), (p, &z2));
        let project = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let t = ops.inner((x, y), (p, &z2)) / zz;
            (
                x.iter().zip(p).map(|(x, p)| x - t * p).collect(),
                y.iter().zip(&z2).map(|(y, z)| y - t * z).collect(),
            )
        };
        let (pa, pb) = project(&a, &b);
        let zero = vec![0.0; p.len()];
        let (qa, qb) = project(&zero, q);
        let k = -2.0 * (params.mu - 3.0 * params.sigma);
        let ra: Vec<f64> = pa.iter().zip(&qa).map(|(x, y)| x - k * y).collect();
        let rb: Vec<f64> = pb.iter().zip(&qb).map(|(x, y)| x - k * y).collect();
        let rn = ops.inner((&ra, &rb), (&ra, &rb)).sqrt();
        projection_residual = Some(if size2 > 0.0 { rn / size2 } else { rn });
        let al = params.alpha();
        let r = (0..p.len())
            .map(|i| (a[i] + 2.0 * al * p[i]).abs().max((b[i] + 2.0 * al * z2[i]).abs()))
            .fold(0.0f64, f64::max);
        resonant_residual = Some(if size > 0.0 { r / size } else { r });
    }
    Ok(ActionIdentity { residual, residual_l2, projection_residual, resonant_residual })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VkQuantity {
    /// `<L+^{-1} (P, 3 sigma Q), (P, 3 sigma Q)>` with the inverse taken on
    /// the complement of the numerical kernel.
    pub value: f64,
    /// Squared relative component of `(P, 3 sigma Q)` along `ker L+`.
    pub kernel_overlap: f64,
    pub warnings: Vec<String>,
}

pub fn vk_quantity(ops: &LinearizedOperators, tol: &Tolerances) -> Result<VkQuantity> {
    let sector = if ops.grid().is_radial() { Sector::Angular(0) } else { Sector::Full };
    let (p, q) = ops.profile();
    let c = 3.0 * ops.params().sigma;
    let z2: Vec<f64> = q.iter().map(|x| c * x).collect();
    let basis = ops.sector_basis(sector)?;
    let z = basis.scale(p, &z2)?;
    let eig = symmetric_eigen(ops.dense_in(&basis, Which::Plus))?;
    let ktol = tol.kernel * ops.potential_scale();
    let coef = eig.eigenvectors.transpose() * &z;
    let (mut value, mut overlap) = (0.0, 0.0);
    for (l, c) in eig.eigenvalues.iter().zip(coef.iter()) {
        if l.abs() <= ktol {
            overlap += c * c;
        } else {
            value += c * c / l;
        }
    }
    let overlap = overlap / z.norm_squared();
    let mut warnings = Vec::new();
    if overlap > tol.vk_overlap {
        warnings.push(format!(
            "(P, 3 sigma Q) overlaps the kernel of L+ ({overlap:.3e}); VK uses the projected inverse"
        ));
    }
    Ok(VkQuantity { value, kernel_overlap: overlap, warnings })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstrainedMinimum {
    /// `min <L+ h, h>` over unit `h` orthogonal to `(P, 3 sigma Q)`.
    pub value: f64,
    pub sector: Sector,
    pub unstable: bool,
    #[serde(skip)]
    pub witness: (Vec<f64>, Vec<f64>),
}

/// Minimizes `<L+ h, h>` over unit `h` orthogonal to `(P, 3 sigma Q)` in the
/// given sector. Non-radial sectors are automatically orthogonal.
pub fn constrained_minimum(ops: &LinearizedOperators, sector: Sector, tol: &Tolerances) -> Result<ConstrainedMinimum> {
    let basis = ops.sector_basis(sector)?;
    let lp = ops.dense_in(&basis, Which::Plus);
    let (value, y) = if is_radial_sector(sector) {
        let (p, q) = ops.profile();
        let c = 3.0 * ops.params().sigma;
        let z2: Vec<f64> = q.iter().map(|x| c * x).collect();
        let comp = Complement::new(&basis.scale(p, &z2)?)?;
        let e = symmetric_eigen(comp.compress(&lp))?;
        (e.eigenvalues[0], comp.expand(&e.eigenvectors.column(0).into_owned()))
    } else {
        let e = symmetric_eigen(lp)?;
        (e.eigenvalues[0], e.eigenvectors.column(0).into_owned())
    };
    Ok(ConstrainedMinimum { value, sector, unstable: value < -tol.constrained, witness: basis.to_nodal(ops.grid(), &y) })
}

/// Returns `true` when the constrained minimum of `<L+ h, h>` is negative in
/// the radial sector, the instability criterion for `n(L+) = 1`, `L- >= 0`.
pub fn instability_criterion(ops: &LinearizedOperators, tol: &Tolerances) -> Result<ConstrainedMinimum> {
    let sector = if ops.grid().is_radial() { Sector::Angular(0) } else { Sector::Full };
    constrained_minimum(ops, sector, tol)
}

/// Smallest `<L+ h, h> / |h|^2` over `count` random smooth radial
/// directions `h` orthogonal to `(P, 3 sigma Q)`. Each component is a random
/// combination of the profile and Gaussians of random widths.
pub fn random_constrained_form(ops: &LinearizedOperators, count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = ops.grid();
    let r = g.radii();
    let (p, q) = ops.profile();
    let c = 3.0 * ops.params().sigma;
    let z2: Vec<f64> = q.iter().map(|x| c * x).collect();
    let zz = ops.inner((p, &z2), (p, &z2));
    let sector = if g.is_radial() { Sector::Angular(0) } else { Sector::Full };
    let mut worst = f64::INFINITY;
    for _ in 0..count {
        let mut comp = |own: &[f64], other: &[f64]| -> Vec<f64> {
            let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let bumps: Vec<(f64, f64)> =
                (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.3..3.0))).collect();
            (0..r.len())
                .map(|i| {
                    let x = r[i];
                    a * own[i] + b * other[i] + bumps.iter().map(|(k, l)| k * (-(x / l) * (x / l)).exp()).sum::<f64>()
                })
                .collect()
        };
        let mut h1 = comp(p, q);
        let mut h2 = comp(q, p);
        let t = ops.inner((&h1, &h2), (p, &z2)) / zz;
        for i in 0..h1.len() {
            h1[i] -= t * p[i];
            h2[i] -= t * z2[i];
        }
        let norm = ops.inner((&h1, &h2), (&h1, &h2));
        if norm > 0.0 {
            worst = worst.min(ops.form(Which::Plus, sector, &h1, &h2)? / norm);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorMultiplicity {
    pub sector: Sector,
    pub copies: usize,
    /// Eigenvalues of `J L` within the zero cluster radius.
    pub cluster: usize,
    /// `dim ker G^k`, `k = 1..4`, with `G = A (A - s)^{-1}`.
    pub weyr: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Multiplicity {
    /// Algebraic multiplicity of `0`, summed over sectors and copies.
    pub total: usize,
    pub radius: f64,
    pub sectors: Vec<SectorMultiplicity>,
    /// Cluster count and Weyr count agree in every sector.
    pub consistent: bool,
}

/// Algebraic multiplicity of the zero eigenvalue of `J L`.
///
/// Per sector, the count of eigenvalues within `cluster * min(alpha, beta)`
/// of the origin gives the algebraic multiplicity. The Weyr characteristic
/// is computed independently from singular values of powers of the bounded
/// transform `G = A (A - s)^{-1}`, which shares the Jordan structure of `A`
/// at zero.
pub fn zero_multiplicity(ops: &LinearizedOperators, sectors: &[Sector], tol: &Tolerances) -> Result<Multiplicity> {
    let p = ops.params();
    let radius = tol.cluster * p.alpha().min(p.beta());
    let mut out = Vec::new();
    let mut consistent = true;
    for &sector in sectors {
        let a = jl_matrix(ops, sector)?;
        if a.nrows() > tol.dense_limit {
            return Err(Error::Unsupported(format!(
                "dense J L of size {} exceeds the limit {}",
                a.nrows(),
                tol.dense_limit
            )));
        }
        let ev = jl_eigenvalues(a.clone())?;
        let cluster = ev.iter().filter(|z| z.norm() < radius).count();
        // Half the smallest modulus outside the cluster: every eigenvalue
        // outside maps to |G| >= 2/3, the cluster to |lambda| / shift.
        let outside = ev.iter().map(|z| z.norm()).filter(|&r| r >= radius).fold(f64::INFINITY, f64::min);
        let shift = if outside.is_finite() { 0.5 * outside } else { 1.0 };
        let weyr = weyr_characteristic(&a, shift, cluster, tol.singular)?;
        if weyr.last().copied() != Some(cluster) {
            consistent = false;
        }
        out.push(SectorMultiplicity { sector, copies: sector.copies(ops.grid().dim()), cluster, weyr });
    }
    let total = out.iter().map(|s| s.cluster * s.copies).sum();
    Ok(Multiplicity { total, radius, sectors: out, consistent })
}

fn weyr_characteristic(a: &DMatrix<f64>, shift: f64, cluster: usize, thr: f64) -> Result<Vec<usize>> {
    if cluster == 0 {
        return Ok(vec![0; 4]);
    }
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let inv = shifted
        .try_inverse()
        .ok_or_else(|| Error::Eigensolver("shifted J L is singular".into()))?;
    let g = a * inv;
    // ker G^8 is the cluster invariant subspace: cluster eigenvalues map to
    // (|lambda| / s)^8, everything else to at least (2/3)^8.
    let mut power = g.clone();
    for _ in 0..3 {
        power = &power * &power;
    }
    let svd = power.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Eigensolver("SVD of G^8 failed".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut z = DMatrix::zeros(n, cluster);
    for (c, &i) in order.iter().take(cluster).enumerate() {
        z.set_column(c, &vt.row(i).transpose());
    }
    let b = z.transpose() * a * &z;
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let mut pb = DMatrix::identity(cluster, cluster);
    let mut dims = Vec::with_capacity(4);
    for k in 1..=4 {
        pb = &pb * &b;
        let sv = pb.clone().singular_values();
        dims.push(sv.iter().filter(|&&s| s < thr * scale.powi(k)).count());
    }
    Ok(dims)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectCheck {
    pub sector: Sector,
    pub max_re: f64,
    /// `|max_re - growth| / growth`, or the absolute difference when the
    /// symmetrized rate is zero.
    pub difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorCounts {
    pub sector: Sector,
    pub copies: usize,
    pub l_plus_neg: usize,
    pub l_plus_kernel: usize,
    pub l_minus_neg: usize,
    pub l_minus_kernel: usize,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub tolerances: Tolerances,
    pub sectors: Option<Vec<Sector>>,
    pub direct: bool,
    pub multiplicity: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), sectors: None, direct: true, multiplicity: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub verdict: Verdict,
    pub growth_rate: f64,
    pub growth: Vec<GrowthRate>,
    pub crosscheck: Option<DirectCheck>,
    pub constrained_min: f64,
    pub counts: Vec<SectorCounts>,
    /// `n(L+)` and `n(L-)` over all sectors and copies.
    pub l_plus_neg: usize,
    pub l_minus_neg: usize,
    pub l_plus_kernel: usize,
    pub l_minus_kernel: usize,
    pub vk_value: f64,
    pub vk_overlap: f64,
    pub h_form: f64,
    pub h_expected: f64,
    pub h_norm_sq: f64,
    pub action: ActionIdentity,
    pub zero_multiplicity: Option<Multiplicity>,
    pub tolerances: Tolerances,
    pub grid: GridSpec,
    pub params: ModelParams,
    pub warnings: Vec<String>,
}

/// Full spectral analysis of a wave.
pub fn analyze(wave: &WaveProfile, opts: &AnalyzeOptions) -> Result<SpectralReport> {
    let tol = &opts.tolerances;
    let ops = LinearizedOperators::new(wave);
    let sectors = opts.sectors.clone().unwrap_or_else(|| default_sectors(&ops));
    let dim = ops.grid().dim();
    let mut warnings = wave.warnings.clone();

    let mut counts = Vec::new();
    let ktol = tol.kernel * ops.potential_scale();
    for &sector in &sectors {
        let sp = ops.spectrum(Which::Plus, sector, 1, Some(ktol))?;
        let sm = ops.spectrum(Which::Minus, sector, 1, Some(ktol))?;
        counts.push(SectorCounts {
            sector,
            copies: sector.copies(dim),
            l_plus_neg: sp.neg_count,
            l_plus_kernel: sp.kernel_dim,
            l_minus_neg: sm.neg_count,
            l_minus_kernel: sm.kernel_dim,
        });
    }
    let total = |f: fn(&SectorCounts) -> usize| counts.iter().map(|c| f(c) * c.copies).sum::<usize>();
    let l_plus_neg = total(|c| c.l_plus_neg);
    let l_minus_neg = total(|c| c.l_minus_neg);
    let l_plus_kernel = total(|c| c.l_plus_kernel);
    let l_minus_kernel = total(|c| c.l_minus_kernel);
    if l_minus_neg > 0 {
        warnings.push(format!("L- has {l_minus_neg} negative eigenvalues; the symmetrized reduction does not apply"));
    }

    let mut growth = Vec::new();
    for &sector in &sectors {
        match symmetrized_growth_rate(&ops, sector, tol) {
            Ok(g) => growth.push(g),
            Err(Error::SpectralAssumption(msg)) => warnings.push(msg),
            Err(e) => return Err(e),
        }
    }
    let top = growth
        .iter()
        .max_by(|a, b| a.rate.total_cmp(&b.rate))
        .map(|g| (g.sector, g.rate));
    let growth_rate = top.map(|t| t.1).unwrap_or(f64::NAN);

    let crosscheck = if opts.direct {
        let sector = top.map(|t| t.0).unwrap_or(sectors[0]);
        if 4 * ops.grid().len() > tol.dense_limit {
            warnings.push("direct J L check skipped: grid exceeds the dense limit".into());
            None
        } else {
            let ev = direct_jl_eigen(&ops, sector, 1)?;
            let max_re = ev.first().map(|z| z.re).unwrap_or(0.0);
            let difference = if growth_rate > 0.0 {
                (max_re - growth_rate).abs() / growth_rate
            } else {
                (max_re - growth_rate).abs()
            };
            Some(DirectCheck { sector, max_re, difference })
        }
    } else {
        None
    };

    let cmin = instability_criterion(&ops, tol)?;
    let vk = vk_quantity(&ops, tol)?;
    warnings.extend(vk.warnings.iter().cloned());
    let cert = h_certificate(&ops)?;
    let action = l_plus_action_identity(&ops)?;

    let zero_multiplicity = if opts.multiplicity {
        if 4 * ops.grid().len() > tol.dense_limit {
            warnings.push("zero multiplicity skipped: grid exceeds the dense limit".into());
            None
        } else {
            let m = zero_multiplicity(&ops, &sectors, tol)?;
            if !m.consistent {
                warnings.push("zero multiplicity inconclusive: cluster and Weyr counts differ".into());
            }
            Some(m)
        }
    } else {
        None
    };

    let verdict = if !(growth_rate >= 0.0) {
        warnings.push("growth rate unavailable; verdict from the constrained form".into());
        if cmin.unstable { Verdict::Unstable } else { Verdict::Marginal }
    } else if growth_rate > tol.growth {
        Verdict::Unstable
    } else if growth_rate > 0.0 {
        warnings.push(format!(
            "growth rate {growth_rate:.3e} is below the instability threshold; refine the grid"
        ));
        Verdict::Marginal
    } else if cmin.unstable {
        warnings.push("constrained form is negative while the growth rate vanishes".into());
        Verdict::Marginal
    } else if vk.value.abs() <= tol.vk_zero {
        Verdict::Marginal
    } else {
        Verdict::Stable
    };

    Ok(SpectralReport {
        verdict,
        growth_rate,
        growth,
        crosscheck,
        constrained_min: cmin.value,
        counts,
        l_plus_neg,
        l_minus_neg,
        l_plus_kernel,
        l_minus_kernel,
        vk_value: vk.value,
        vk_overlap: vk.kernel_overlap,
        h_form: cert.form,
        h_expected: cert.expected,
        h_norm_sq: cert.h_norm_sq,
        action,
        zero_multiplicity,
        tolerances: *tol,
        grid: ops.grid().spec(),
        params: wave.params,
        warnings,
    })
}
