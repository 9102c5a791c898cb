//! Time evolution, conserved quantities, virial identities and blow-up.
//!
//! Periodic grids use the Fourier split-step method; radial grids use the
//! graded finite-volume scheme with Crank-Nicolson linear substeps. Both are
//! Strang splittings with an RK4 nonlinear substep, second order in `dt`.

mod experiment;
mod stepper;

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::model::{self, FunctionalLedger, ModelParams};
use crate::solver::WaveProfile;

pub use experiment::{blowup_experiment, BlowupOptions, ExperimentReport, InitialDiagnostics, Outcome};
pub use stepper::SplitStep;

/// Complex amplitudes `(u, v)` at time `t`.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub grid: Arc<Grid>,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
    pub t: f64,
    pub params: ModelParams,
}

impl FieldState {
    pub fn new(grid: Arc<Grid>, u: Vec<Complex64>, v: Vec<Complex64>, params: ModelParams) -> Result<Self> {
        check_len(grid.len(), u.len())?;
        check_len(grid.len(), v.len())?;
        if grid.dim() != params.n {
            return Err(Error::InvalidParameter(format!(
                "grid dimension {} does not match n = {}",
                grid.dim(),
                params.n
            )));
        }
        if u.iter().chain(&v).any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("initial data is not finite".into()));
        }
        Ok(Self { grid, u, v, t: 0.0, params })
    }

    /// The standing wave at `t = 0` on its own grid.
    pub fn from_wave(wave: &WaveProfile) -> Result<Self> {
        let c = |x: &f64| Complex64::new(*x, 0.0);
        Self::new(
            wave.grid().clone(),
            wave.p.values().iter().map(c).collect(),
            wave.q.values().iter().map(c).collect(),
            wave.params,
        )
    }

    /// `(e^{i theta} u, e^{3 i theta} v)`.
    pub fn gauge(&self, theta: f64) -> Self {
        let e1 = Complex64::from_polar(1.0, theta);
        let e3 = Complex64::from_polar(1.0, 3.0 * theta);
        Self {
            u: self.u.iter().map(|z| e1 * z).collect(),
            v: self.v.iter().map(|z| e3 * z).collect(),
            ..self.clone()
        }
    }

    pub fn ledger(&self) -> Result<FunctionalLedger> {
        FunctionalLedger::evaluate(&self.grid, &self.u, &self.v, &self.params)
    }

    pub fn mass(&self) -> Result<f64> {
        model::mass(&self.grid, &self.u, &self.v, &self.params)
    }

    pub fn energy(&self) -> Result<f64> {
        model::energy(&self.grid, &self.u, &self.v, &self.params)
    }

    /// `V = int |x|^2 (|u|^2 + 3 sigma |v|^2)`.
    pub fn virial(&self) -> Result<f64> {
        model::virial(&self.grid, &self.u, &self.v, &self.params)
    }

    /// `V' = 4 Im int conj(u) x.grad u + 12 Im int conj(v) x.grad v`.
    pub fn virial_rate(&self) -> f64 {
        let part = |f: &[Complex64]| -> f64 {
            let re: Vec<f64> = f.iter().map(|z| z.re).collect();
            let im: Vec<f64> = f.iter().map(|z| z.im).collect();
            let dre = self.grid.dilation_generator(&re);
            let dim = self.grid.dilation_generator(&im);
            let g: Vec<f64> = (0..f.len()).map(|i| re[i] * dim[i] - im[i] * dre[i]).collect();
            self.grid.integrate(&g)
        };
        4.0 * part(&self.u) + 12.0 * part(&self.v)
    }

    pub fn max_amplitudes(&self) -> (f64, f64) {
        let m = |f: &[Complex64]| f.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        (m(&self.u), m(&self.v))
    }

    /// Fraction of the mass beyond 90% of the domain extent.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let r = self.grid.radii();
        let edge = 0.9 * self.grid.extent();
        let c = 3.0 * self.params.sigma;
        let rho: Vec<f64> = (0..r.len()).map(|i| self.u[i].norm_sqr() + c * self.v[i].norm_sqr()).collect();
        let outer: Vec<f64> = (0..r.len()).map(|i| if r[i] > edge { rho[i] } else { 0.0 }).collect();
        let total = self.grid.integrate(&rho);
        if total > 0.0 {
            self.grid.integrate(&outer) / total
        } else {
            0.0
        }
    }

    /// `|| (u, v) - (a, b) ||` in `H^1 x H^1`.
    pub fn h1_distance(&self, other: &FieldState) -> Result<f64> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let du: Vec<Complex64> = self.u.iter().zip(&other.u).map(|(a, b)| a - b).collect();
        let dv: Vec<Complex64> = self.v.iter().zip(&other.v).map(|(a, b)| a - b).collect();
        let l2: Vec<f64> = du.iter().zip(&dv).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
        let k = self.grid.gradient_sq_norm_complex(&du) + self.grid.gradient_sq_norm_complex(&dv);
        Ok((k + self.grid.integrate(&l2)).sqrt())
    }
}

/// `16 R(u, v)`, the exact second derivative of the virial for `sigma = 3`,
/// `mu = 9`, `n = 2, 3`.
pub fn virial_second_derivative(state: &FieldState) -> Result<f64> {
    check_virial_params(&state.params)?;
    Ok(16.0 * state.ledger()?.virial_functional)
}

fn check_virial_params(p: &ModelParams) -> Result<()> {
    if p.sigma != 3.0 || p.mu != 9.0 || !(p.n == 2 || p.n == 3) {
        return Err(Error::Unsupported(format!(
            "the virial identities hold for sigma = 3, mu = 9, n = 2, 3 (got sigma = {}, mu = {}, n = {})",
            p.sigma, p.mu, p.n
        )));
    }
    Ok(())
}

/// How initial data is built from a standing wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Recipe {
    Wave,
    /// `lambda^{n/2} (P, Q)(lambda x)`.
    Dilated(f64),
    /// `(1 + eps) (P, Q)`.
    Amplified(f64),
}

impl Recipe {
    pub fn label(&self) -> String {
        match self {
            Recipe::Wave => "wave".into(),
            Recipe::Dilated(l) => format!("dilated({l})"),
            Recipe::Amplified(e) => format!("amplified({e})"),
        }
    }
}

fn sample(wave_grid: &Grid, f: &[f64], target: &Grid, lambda: f64) -> Result<Vec<f64>> {
    if wave_grid.same_as(target) {
        return Ok(if lambda == 1.0 { f.to_vec() } else { target.dilate(f, lambda) });
    }
    match wave_grid {
        Grid::Radial(g) => {
            let p = g.interpolator(f);
            Ok(target.radii().iter().map(|r| p(lambda * r)).collect())
        }
        Grid::Periodic(_) => Err(Error::Unsupported(
            "profiles on periodic grids can only be used on the same grid".into(),
        )),
    }
}

/// Builds initial data on `grid` from `wave` (sampled through the wave
/// grid's interpolant when the grids differ).
pub fn initial_data(wave: &WaveProfile, grid: Arc<Grid>, recipe: Recipe) -> Result<FieldState> {
    if grid.dim() != wave.params.n {
        return Err(Error::InvalidParameter("target grid dimension differs from the wave".into()));
    }
    let (lambda, amp) = match recipe {
        Recipe::Wave => (1.0, 1.0),
        Recipe::Dilated(l) => {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {l}")));
            }
            (l, l.powf(wave.params.n as f64 / 2.0))
        }
        Recipe::Amplified(e) => {
            if !(e > -1.0 && e.is_finite()) {
                return Err(Error::InvalidParameter(format!("amplification must exceed -1, got {e}")));
            }
            (1.0, 1.0 + e)
        }
    };
    let p = sample(wave.grid(), wave.p.values(), &grid, lambda)?;
    let q = sample(wave.grid(), wave.q.values(), &grid, lambda)?;
    let c = |x: f64| Complex64::new(amp * x, 0.0);
    FieldState::new(grid, p.into_iter().map(c).collect(), q.into_iter().map(c).collect(), wave.params)
}

/// Energy, mass and quartic term of the wave, evaluated on the evolution grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OhtaReference {
    pub energy: f64,
    pub mass: f64,
    pub potential: f64,
    /// Relative tolerance of the equal-mass condition.
    pub mass_tol: f64,
    /// Strict inequalities are tested with this margin relative to `|E(P, Q)|`.
    pub margin: f64,
}

impl OhtaReference {
    pub fn new(wave_state: &FieldState) -> Result<Self> {
        check_virial_params(&wave_state.params)?;
        let l = wave_state.ledger()?;
        Ok(Self { energy: l.energy, mass: l.mass, potential: l.potential, mass_tol: 1e-6, margin: 1e-10 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhtaMembership {
    pub in_a: bool,
    pub in_b: bool,
}

/// Membership in `A = {E < E(P,Q), M = M(P,Q), int F > int F(P,Q)}` and
/// `B = A and {R < 0}`.
pub fn ohta_membership(state: &FieldState, reference: &OhtaReference) -> Result<OhtaMembership> {
    check_virial_params(&state.params)?;
    let l = state.ledger()?;
    let m = reference.margin * reference.energy.abs().max(f64::MIN_POSITIVE);
    let in_a = l.energy < reference.energy - m
        && (l.mass - reference.mass).abs() <= reference.mass_tol * reference.mass
        && l.potential > reference.potential + m;
    Ok(OhtaMembership { in_a, in_b: in_a && l.virial_functional < 0.0 })
}

/// Outcome of the blow-up monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum BlowUp {
    None,
    Detected { t: f64, amplitude_ratio: f64, gradient_ratio: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub virial: f64,
    /// `16 R` where the virial identity holds.
    pub virial_dd: Option<f64>,
    pub max_u: f64,
    pub max_v: f64,
    pub gradnorm: f64,
    pub in_a: Option<bool>,
    pub in_b: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub samples: Vec<TraceSample>,
    pub blowup: BlowUp,
    /// False when mass or energy drifted beyond tolerance before concentration.
    pub valid: bool,
    /// Largest relative mass and energy drift per unit time before concentration.
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub steps: usize,
    pub final_dt: f64,
    pub warnings: Vec<String>,
}

pub const TRACE_HEADER: &str = "t,mass,energy,virial,virial_dd,max_u,max_v,gradnorm,in_A,in_B";

impl EvolutionTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        let opt = |x: Option<f64>| x.map(|x| format!("{x:.17e}")).unwrap_or_default();
        let flag = |x: Option<bool>| x.map(|b| u8::from(b).to_string()).unwrap_or_default();
        for s in &self.samples {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{},{}",
                s.t,
                s.mass,
                s.energy,
                s.virial,
                opt(s.virial_dd),
                s.max_u,
                s.max_v,
                s.gradnorm,
                flag(s.in_a),
                flag(s.in_b)
            )?;
        }
        Ok(())
    }

    /// Centred second differences of the sampled virial at interior samples
    /// with equal spacing on both sides.
    pub fn virial_second_differences(&self) -> Vec<(f64, f64)> {
        let s = &self.samples;
        let mut out = Vec::new();
        for i in 1..s.len().saturating_sub(1) {
            let h1 = s[i].t - s[i - 1].t;
            let h2 = s[i + 1].t - s[i].t;
            if (h1 - h2).abs() <= 1e-9 * h1 {
                out.push((s[i].t, (s[i + 1].virial - 2.0 * s[i].virial + s[i - 1].virial) / (h1 * h2)));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Sampling interval; rounded to a whole number of initial steps.
    pub sample_every: f64,
    /// Shrink `dt` by `2^-power` each time the amplitude doubles.
    pub adapt_power: Option<f64>,
    pub blowup_factor: f64,
    pub gradient_factor: f64,
    /// Relative mass and energy drift per unit time tolerated before concentration.
    pub drift_tol: f64,
    pub max_steps: usize,
    pub ohta: Option<OhtaReference>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            sample_every: 1e-2,
            adapt_power: None,
            blowup_factor: 1e3,
            gradient_factor: 1e4,
            drift_tol: 1e-6,
            max_steps: 10_000_000,
            ohta: None,
        }
    }
}

fn record(state: &FieldState, opts: &EvolveOptions, exact_virial: bool) -> Result<(TraceSample, f64)> {
    let l = state.ledger()?;
    let (max_u, max_v) = state.max_amplitudes();
    let membership = match &opts.ohta {
        Some(r) => Some(ohta_membership(state, r)?),
        None => None,
    };
    Ok((
        TraceSample {
            t: state.t,
            mass: l.mass,
            energy: l.energy,
            virial: state.virial()?,
            virial_dd: exact_virial.then_some(16.0 * l.virial_functional),
            max_u,
            max_v,
            gradnorm: l.kinetic.sqrt(),
            in_a: membership.map(|m| m.in_a),
            in_b: membership.map(|m| m.in_b),
        },
        l.kinetic,
    ))
}

/// Evolves `state` to `t_end` or until blow-up is detected.
pub fn evolve(state: &mut FieldState, opts: &EvolveOptions) -> Result<EvolutionTrace> {
    if !(opts.t_end > state.t && opts.sample_every > 0.0) {
        return Err(Error::InvalidParameter("need t_end > t and a positive sampling interval".into()));
    }
    let exact_virial = check_virial_params(&state.params).is_ok();
    let mut stepper = SplitStep::new(state.grid.clone(), state.params, opts.dt)?;
    let (first, k0) = record(state, opts, exact_virial)?;
    let amp0 = first.max_u.max(first.max_v);
    let (m0, e0) = (first.mass, first.energy);
    let mut samples = vec![first];
    let mut warnings = Vec::new();
    let (mut mass_drift, mut energy_drift) = (0.0f64, 0.0f64);
    let mut valid = true;
    let mut blowup = BlowUp::None;
    let mut level = 0i32;
    let mut steps = 0usize;
    let t0 = state.t;
    let mut boundary_warned = false;
    let mut nominal = opts.dt;
    let mut next_sample = 1usize;
    // Steps are clipped to land on the sampling times `t0 + k * sample_every`.
    let slack = 1e-6;

    while state.t < opts.t_end && steps < opts.max_steps {
        let target = (t0 + next_sample as f64 * opts.sample_every).min(opts.t_end);
        let remaining = target - state.t;
        let on_sample = remaining < (1.0 + slack) * nominal;
        let dt = if on_sample { remaining } else { nominal };
        stepper.set_dt(dt)?;
        stepper.step(&mut state.u, &mut state.v);
        steps += 1;
        if on_sample {
            state.t = target;
            next_sample += 1;
        } else {
            state.t += dt;
        }
        let (au, av) = state.max_amplitudes();
        let amp = au.max(av);
        if !amp.is_finite() {
            blowup = BlowUp::Detected { t: state.t, amplitude_ratio: f64::INFINITY, gradient_ratio: f64::INFINITY };
            warnings.push("amplitude overflowed".into());
            break;
        }
        if on_sample || amp > opts.blowup_factor * amp0 {
            let (s, k) = record(state, opts, exact_virial)?;
            let ratio = amp / amp0;
            let gratio = if k0 > 0.0 { (k / k0).sqrt() } else { 0.0 };
            if ratio < 10.0 {
                let el = (state.t - t0).max(1.0);
                mass_drift = mass_drift.max((s.mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE) / el);
                energy_drift = energy_drift.max((s.energy - e0).abs() / e0.abs().max(f64::MIN_POSITIVE) / el);
                if mass_drift > opts.drift_tol || energy_drift > opts.drift_tol {
                    valid = false;
                }
            }
            let edge = state.boundary_mass_fraction();
            if !boundary_warned && edge > 1e-8 {
                boundary_warned = true;
                warnings.push(format!(
                    "mass fraction {edge:.2e} near the domain edge at t = {:.4}; the virial is unreliable",
                    state.t
                ));
            }
            samples.push(s);
            if ratio > opts.blowup_factor || gratio > opts.gradient_factor {
                blowup = BlowUp::Detected { t: state.t, amplitude_ratio: ratio, gradient_ratio: gratio };
                break;
            }
        }
        if let Some(power) = opts.adapt_power {
            let want = ((amp / amp0).log2().floor() as i32).max(0);
            if want > level {
                level = want;
                nominal = opts.dt * 2f64.powf(-power * level as f64);
            }
        }
    }
    if !valid {
        warnings.push(format!(
            "conservation drift beyond {:.1e} per unit time (mass {mass_drift:.2e}, energy {energy_drift:.2e})",
            opts.drift_tol
        ));
    }
    Ok(EvolutionTrace {
        samples,
        blowup,
        valid,
        mass_drift,
        energy_drift,
        steps,
        final_dt: nominal,
        warnings,
    })
}
