use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use thw::dynamics::{self, BlowupOptions, EvolveOptions, Outcome, Recipe};
use thw::grid::{Grid, GridKind, GridSpec, Sector};
use thw::io;
use thw::linop::{LinearizedOperators, Which};
use thw::model::{self, ModelParams};
use thw::solver::{semi_trivial_wave, solve_normalized, solve_weinstein, NormalizedOptions, WaveProfile, WeinsteinOptions};
use thw::stability::{self, AnalyzeOptions, Verdict};

use crate::config::{output_dir, ConfigFile};
use crate::{Failure, GridArgs, OutArgs, ParamArgs, EXIT_CONVERGENCE, EXIT_OK, EXIT_UNSTABLE};

/// Every key a config file may contain.
pub const KNOWN_KEYS: &[&str] = &[
    "n", "omega", "mu", "sigma", "grid", "points", "extent", "h_min", "growth", "out", "name", "seed", "method",
    "mass", "tol", "max_iter", "profile", "direct", "multiplicity", "sectors", "recipe", "t_end", "dt",
    "sample_every", "adapt_power", "drift_tol", "confirm", "task", "jobs",
];

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn params(a: &ParamArgs, cfg: &ConfigFile) -> Result<ModelParams, Failure> {
    let n = cfg.pick(a.n, "n")?.unwrap_or(1);
    let omega = cfg.pick(a.omega, "omega")?.unwrap_or(0.5);
    let mu = cfg.pick(a.mu, "mu")?.unwrap_or(9.0);
    let sigma = cfg.pick(a.sigma, "sigma")?.unwrap_or(3.0);
    Ok(ModelParams::new(n, omega, mu, sigma)?)
}

/// Box size at which the slowest decay `exp(-sqrt(min(alpha, beta)) r)`
/// reaches about `1e-10`.
pub fn default_extent(p: &ModelParams) -> f64 {
    24.0 / p.alpha().min(p.beta()).sqrt()
}

fn grid_given(g: &GridArgs, cfg: &ConfigFile) -> Result<bool, Failure> {
    Ok(cfg.pick(g.grid.clone(), "grid")?.is_some()
        || cfg.pick(g.points, "points")?.is_some()
        || cfg.pick(g.extent, "extent")?.is_some()
        || cfg.pick(g.h_min, "h_min")?.is_some()
        || cfg.pick(g.growth, "growth")?.is_some())
}

/// Grid from flags and config. Defaults: radial spectral for solves, periodic
/// (one dimension) or radial graded for evolution.
pub fn grid_spec(g: &GridArgs, cfg: &ConfigFile, p: &ModelParams, evolution: bool) -> Result<GridSpec, Failure> {
    let n = p.n;
    let kind = match cfg.pick(g.grid.clone(), "grid")? {
        Some(k) => GridKind::parse(&k)?,
        None if evolution && n == 1 => GridKind::Periodic,
        None if evolution => GridKind::RadialGraded,
        None => GridKind::RadialSpectral,
    };
    let extent = cfg.pick(g.extent, "extent")?.unwrap_or_else(|| default_extent(p));
    let points = cfg.pick(g.points, "points")?;
    Ok(match kind {
        GridKind::Periodic => GridSpec::periodic(n, points.unwrap_or([1024, 128, 48][n - 1]), extent),
        GridKind::RadialSpectral => GridSpec::radial_spectral(n, points.unwrap_or([128, 160, 192][n - 1]), extent),
        GridKind::RadialGraded => GridSpec::radial_graded(
            n,
            extent,
            cfg.pick(g.h_min, "h_min")?.unwrap_or(2e-5),
            cfg.pick(g.growth, "growth")?.unwrap_or(0.02),
        ),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn warn_all(w: &[String]) {
    for m in w {
        eprintln!("warning: {m}");
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// weinstein, normalized or semi-trivial.
    #[arg(long)]
    pub method: Option<String>,
    /// Mass constraint of a normalized wave.
    #[arg(long)]
    pub mass: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub fn solve_wave(
    method: &str,
    grid: Arc<Grid>,
    params: &ModelParams,
    mass: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> Result<WaveProfile, Failure> {
    Ok(match method {
        "weinstein" => {
            let mut o = WeinsteinOptions::default();
            o.tol = tol.unwrap_or(o.tol);
            o.max_iter = max_iter.unwrap_or(o.max_iter);
            solve_weinstein(grid, params, &o)?.rescale_to_physical(params)?
        }
        "normalized" => {
            let mass = mass.ok_or_else(|| Failure::Usage("--method normalized needs --mass".into()))?;
            let mut o = NormalizedOptions::default();
            o.tol = tol.unwrap_or(o.tol);
            o.max_iter = max_iter.unwrap_or(o.max_iter);
            solve_normalized(grid, params, mass, &o)?
        }
        "semi-trivial" => semi_trivial_wave(grid, params)?,
        m => return Err(Failure::Usage(format!("unknown method '{m}' (weinstein, normalized, semi-trivial)"))),
    })
}

pub fn solve(a: SolveArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    cfg.check_keys(KNOWN_KEYS)?;
    let method = cfg.pick(a.method, "method")?.unwrap_or_else(|| "weinstein".into());
    let mut p = a.params.clone();
    if method == "normalized" && cfg.pick(p.omega, "omega")?.is_none() {
        // The multiplier is an output; any admissible placeholder will do.
        p.omega = Some(0.0);
    }
    let params = params(&p, cfg)?;
    let grid = grid_spec(&a.grid, cfg, &params, false)?.build()?;
    let dir = output_dir(a.out.out, cfg)?;
    let name = cfg.pick(a.out.name, "name")?.unwrap_or_else(|| "profile".into());
    let wave = solve_wave(
        &method,
        grid,
        &params,
        cfg.pick(a.mass, "mass")?,
        cfg.pick(a.tol, "tol")?,
        cfg.pick(a.max_iter, "max_iter")?,
    )?;
    warn_all(&wave.warnings);
    let (dat, json) = io::save_profile(&wave, &dir.join(&name))?;
    let poh = wave.pohozaev()?;
    let report = json!({
        "first": poh.first,
        "second": poh.second,
        "scaling": poh.scaling,
        "kinetic": poh.kinetic,
        "max": poh.max(),
        "residual_sup": wave.residual_sup,
        "residual_l2": wave.residual_l2()?,
    });
    let poh_path = dir.join(format!("{name}.pohozaev.json"));
    write_json(&poh_path, &report)?;
    println!("omega        {}", fmt(wave.params.omega));
    println!("mass         {}", fmt(wave.mass));
    println!("energy       {}", fmt(wave.energy));
    println!("residual     {}", fmt(wave.residual_sup));
    println!("pohozaev     {}", fmt(poh.max()));
    println!("wrote {} {} {}", dat.display(), json.display(), poh_path.display());
    Ok(EXIT_OK)
}

fn profile_path(flag: Option<PathBuf>, cfg: &ConfigFile) -> Result<PathBuf, Failure> {
    cfg.pick(flag, "profile")?.ok_or_else(|| Failure::Usage("--profile is required".into()))
}

fn load(path: &Path) -> Result<WaveProfile, Failure> {
    io::load_profile(path).map_err(|e| Failure::Usage(format!("cannot load profile {}: {e}", path.display())))
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("profile").to_string()
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Profile stem or its .dat or .json file.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Skip the direct J L eigenvalue cross-check.
    #[arg(long)]
    pub no_direct: bool,
    /// Skip the zero-eigenvalue multiplicity.
    #[arg(long)]
    pub no_multiplicity: bool,
    /// Comma-separated angular sectors on radial grids.
    #[arg(long)]
    pub sectors: Option<String>,
}

pub fn parse_sectors(s: &str) -> Result<Vec<Sector>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<u32>()
                .map(Sector::Angular)
                .map_err(|e| Failure::Usage(format!("sector '{t}': {e}")))
        })
        .collect()
}

pub fn analyze(a: AnalyzeArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    cfg.check_keys(KNOWN_KEYS)?;
    let path = profile_path(a.profile, cfg)?;
    let wave = load(&path)?;
    let dir = output_dir(a.out.out, cfg)?;
    let name = cfg.pick(a.out.name, "name")?.unwrap_or_else(|| stem_of(&path));
    let opts = AnalyzeOptions {
        direct: !a.no_direct && cfg.pick(None, "direct")?.unwrap_or(true),
        multiplicity: !a.no_multiplicity && cfg.pick(None, "multiplicity")?.unwrap_or(true),
        sectors: cfg.pick(a.sectors, "sectors")?.map(|s| parse_sectors(&s)).transpose()?,
        ..AnalyzeOptions::default()
    };
    let report = stability::analyze(&wave, &opts)?;
    warn_all(&report.warnings);
    let out = dir.join(format!("{name}.report.json"));
    write_json(&out, &report)?;
    println!("verdict      {}", report.verdict.as_str());
    println!("growth_rate  {}", fmt(report.growth_rate));
    println!("vk           {}", fmt(report.vk_value));
    println!("n(L+)        {}", report.l_plus_neg);
    println!("n(L-)        {}", report.l_minus_neg);
    println!("constrained  {}", fmt(report.constrained_min));
    if let Some(m) = &report.zero_multiplicity {
        println!("zero_mult    {}", m.total);
    }
    println!("wrote {}", out.display());
    Ok(if report.verdict == Verdict::Unstable { EXIT_UNSTABLE } else { EXIT_OK })
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
    /// Relative tolerance of the identities.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

fn check(name: &str, value: f64, tol: f64) -> Check {
    Check { name: name.into(), value, tol, pass: value.abs() <= tol }
}

/// Elliptic residual, Pohozaev identities, kernel identities, the `H`
/// identity and the negative-eigenvalue counts of `L+` and `L-`.
pub fn invariant_battery(wave: &WaveProfile, tol: f64) -> Result<Vec<Check>, Failure> {
    let g = wave.grid();
    let params = wave.params;
    let (p, q) = (wave.p.values(), wave.q.values());
    let (r1, r2) = model::elliptic_residual(g, p, q, &params)?;
    let (lp, lq) = (g.laplacian(p), g.laplacian(q));
    let free = (0..p.len())
        .map(|i| (-lp[i] + params.alpha() * p[i]).abs().max((-lq[i] + params.beta() * q[i]).abs()))
        .fold(0.0f64, f64::max);
    let res = r1.iter().chain(&r2).fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = vec![check("elliptic residual", res / free, tol)];
    let poh = wave.pohozaev()?;
    out.push(check("pohozaev first", poh.first, tol));
    out.push(check("pohozaev second", poh.second, tol));
    out.push(check("pohozaev scaling", poh.scaling, tol));
    out.push(check("kinetic = n int F", poh.kinetic, tol));
    let ops = LinearizedOperators::new(wave);
    let k = ops.kernel_residuals()?;
    out.push(check("L- (P, 3Q) = 0", k.phase, tol));
    out.push(check("L+ (dP, dQ) = 0", k.translation, tol));
    let cert = stability::h_certificate(&ops)?;
    if params.n == 2 {
        out.push(check("<L+ H, H> = 0", cert.form / cert.h_norm_sq, tol));
    } else {
        out.push(check(
            "<L+ H, H> = -(n-2) K",
            (cert.form - cert.expected) / cert.expected.abs(),
            10.0 * tol,
        ));
    }
    let sector = if g.is_radial() { Sector::Angular(0) } else { Sector::Full };
    let ktol = 1e-6 * ops.potential_scale();
    let sp = ops.spectrum(Which::Plus, sector, 1, Some(ktol))?;
    let sm = ops.spectrum(Which::Minus, sector, 1, Some(ktol))?;
    out.push(Check { name: "n(L+) = 1".into(), value: sp.neg_count as f64, tol: 0.0, pass: sp.neg_count == 1 });
    out.push(Check { name: "n(L-) = 0".into(), value: sm.neg_count as f64, tol: 0.0, pass: sm.neg_count == 0 });
    Ok(out)
}

pub fn verify(a: VerifyArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    cfg.check_keys(KNOWN_KEYS)?;
    let path = profile_path(a.profile, cfg)?;
    let wave = load(&path)?;
    let tol = cfg.pick(a.tol, "tol")?.unwrap_or(1e-6);
    let checks = invariant_battery(&wave, tol)?;
    for c in &checks {
        println!("{}  {:<24} {:>12.3e}  (tol {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tol);
    }
    if a.out.out.is_some() || cfg.pick::<PathBuf>(None, "out")?.is_some() {
        let dir = output_dir(a.out.out, cfg)?;
        let name = cfg.pick(a.out.name, "name")?.unwrap_or_else(|| stem_of(&path));
        write_json(&dir.join(format!("{name}.verify.json")), &checks)?;
    }
    Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_CONVERGENCE })
}

pub fn parse_recipe(s: &str) -> Result<Recipe, Failure> {
    let bad = || Failure::Usage(format!("recipe '{s}' (wave, dilated:<lambda>, amplified:<eps>)"));
    let (kind, value) = match s.split_once(':') {
        Some((k, v)) => (k, Some(v.parse::<f64>().map_err(|_| bad())?)),
        None => (s, None),
    };
    match (kind, value) {
        ("wave", None) => Ok(Recipe::Wave),
        ("dilated", Some(l)) => Ok(Recipe::Dilated(l)),
        ("amplified", Some(e)) => Ok(Recipe::Amplified(e)),
        _ => Err(bad()),
    }
}

/// Evolution grid: explicit flags, else the profile grid when it supports
/// time stepping, else the default graded grid of the profile's extent.
fn evolution_grid(g: &GridArgs, cfg: &ConfigFile, wave: &WaveProfile) -> Result<Arc<Grid>, Failure> {
    if grid_given(g, cfg)? {
        return Ok(grid_spec(g, cfg, &wave.params, true)?.build()?);
    }
    let own = wave.grid();
    if own.kind() != GridKind::RadialSpectral {
        return Ok(own.clone());
    }
    let mut spec = grid_spec(g, cfg, &wave.params, true)?;
    spec.extent = own.extent();
    Ok(spec.build()?)
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// wave, dilated:<lambda> or amplified:<eps>.
    #[arg(long)]
    pub recipe: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<f64>,
    /// Shrink dt by 2^-p whenever the amplitude doubles.
    #[arg(long)]
    pub adapt_power: Option<f64>,
    #[arg(long)]
    pub drift_tol: Option<f64>,
}

fn write_trace(path: &Path, trace: &dynamics::EvolutionTrace) -> Result<(), Failure> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    trace.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

pub fn evolve(a: EvolveArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    cfg.check_keys(KNOWN_KEYS)?;
    let path = profile_path(a.profile, cfg)?;
    let wave = load(&path)?;
    let grid = evolution_grid(&a.grid, cfg, &wave)?;
    let recipe = parse_recipe(&cfg.pick(a.recipe, "recipe")?.unwrap_or_else(|| "wave".into()))?;
    let d = EvolveOptions::default();
    let opts = EvolveOptions {
        t_end: cfg.pick(a.t_end, "t_end")?.unwrap_or(d.t_end),
        dt: cfg.pick(a.dt, "dt")?.unwrap_or(d.dt),
        sample_every: cfg.pick(a.sample_every, "sample_every")?.unwrap_or(d.sample_every),
        adapt_power: cfg.pick(a.adapt_power, "adapt_power")?,
        drift_tol: cfg.pick(a.drift_tol, "drift_tol")?.unwrap_or(d.drift_tol),
        ohta: None,
        ..d
    };
    let mut state = dynamics::initial_data(&wave, grid.clone(), recipe)?;
    let opts = EvolveOptions {
        ohta: if wave.params.has_exact_virial() || (wave.params.n == 3 && wave.params.mu == 9.0 && wave.params.sigma == 3.0) {
            let exact = dynamics::initial_data(&wave, grid.clone(), Recipe::Wave)?;
            Some(dynamics::OhtaReference::new(&exact)?)
        } else {
            None
        },
        ..opts
    };
    let trace = dynamics::evolve(&mut state, &opts)?;
    warn_all(&trace.warnings);
    let dir = output_dir(a.out.out, cfg)?;
    let name = cfg.pick(a.out.name, "name")?.unwrap_or_else(|| stem_of(&path));
    let trace_path = dir.join(format!("{name}.trace.csv"));
    write_trace(&trace_path, &trace)?;
    let u_re: Vec<f64> = state.u.iter().map(|z| z.re).collect();
    let u_im: Vec<f64> = state.u.iter().map(|z| z.im).collect();
    let v_re: Vec<f64> = state.v.iter().map(|z| z.re).collect();
    let v_im: Vec<f64> = state.v.iter().map(|z| z.im).collect();
    let state_path = dir.join(format!("{name}.state.dat"));
    let mut w = BufWriter::new(fs::File::create(&state_path)?);
    io::write_columns(&mut w, &grid, &[("u_re", &u_re), ("u_im", &u_im), ("v_re", &v_re), ("v_im", &v_im)])?;
    w.flush()?;
    let summary = json!({
        "recipe": recipe,
        "params": wave.params,
        "grid": grid.spec(),
        "t": state.t,
        "blowup": trace.blowup,
        "valid": trace.valid,
        "mass_drift": trace.mass_drift,
        "energy_drift": trace.energy_drift,
        "steps": trace.steps,
        "final_dt": trace.final_dt,
        "warnings": trace.warnings,
    });
    let json_path = dir.join(format!("{name}.evolve.json"));
    write_json(&json_path, &summary)?;
    println!("t            {}", fmt(state.t));
    println!("valid        {}", trace.valid);
    println!("mass_drift   {}", fmt(trace.mass_drift));
    println!("energy_drift {}", fmt(trace.energy_drift));
    if let dynamics::BlowUp::Detected { t, .. } = trace.blowup {
        println!("blowup       {}", fmt(t));
    }
    println!("wrote {} {} {}", trace_path.display(), state_path.display(), json_path.display());
    Ok(EXIT_OK)
}

#[derive(Args, Debug)]
pub struct BlowupArgs {
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// Defaults to amplified:0.01 in two dimensions and dilated:1.1 in three.
    #[arg(long)]
    pub recipe: Option<String>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<f64>,
    #[arg(long)]
    pub adapt_power: Option<f64>,
    #[arg(long)]
    pub drift_tol: Option<f64>,
    /// Skip the dt/2 rerun that confirms the detection time.
    #[arg(long)]
    pub no_confirm: bool,
}

pub fn blowup(a: BlowupArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    cfg.check_keys(KNOWN_KEYS)?;
    let path = profile_path(a.profile, cfg)?;
    let wave = load(&path)?;
    let grid = evolution_grid(&a.grid, cfg, &wave)?;
    let n = wave.params.n;
    let default_recipe = if n == 3 { "dilated:1.1" } else { "amplified:0.01" };
    let d = BlowupOptions::default();
    let opts = BlowupOptions {
        recipe: parse_recipe(&cfg.pick(a.recipe, "recipe")?.unwrap_or_else(|| default_recipe.into()))?,
        t_end: cfg.pick(a.t_end, "t_end")?.unwrap_or(d.t_end),
        dt: cfg.pick(a.dt, "dt")?.unwrap_or(if n == 3 { 5e-6 } else { 1e-5 }),
        sample_every: cfg.pick(a.sample_every, "sample_every")?.unwrap_or(if n == 3 { 5e-4 } else { 1e-2 }),
        adapt_power: cfg.pick(a.adapt_power, "adapt_power")?.unwrap_or(d.adapt_power),
        drift_tol: cfg.pick(a.drift_tol, "drift_tol")?.unwrap_or(d.drift_tol),
        confirm: !a.no_confirm && cfg.pick(None, "confirm")?.unwrap_or(true),
        ..d
    };
    let report = dynamics::blowup_experiment(&wave, grid, &opts)?;
    warn_all(&report.warnings);
    let dir = output_dir(a.out.out, cfg)?;
    let name = cfg.pick(a.out.name, "name")?.unwrap_or_else(|| stem_of(&path));
    let trace_path = dir.join(format!("{name}.trace.csv"));
    write_trace(&trace_path, &report.trace)?;
    let json_path = dir.join(format!("{name}.blowup.json"));
    write_json(&json_path, &report)?;
    match report.outcome {
        Outcome::BlowUp { t_star } => println!("outcome      blow-up at t* = {}", fmt(t_star)),
        Outcome::Dispersed => println!("outcome      dispersed"),
        Outcome::Inconclusive => println!("outcome      inconclusive"),
    }
    if let Some(t) = report.initial.parabola_zero {
        println!("parabola     {}", fmt(t));
    }
    println!("concave      {}", report.concave);
    if let Some(b) = report.b_invariant {
        println!("in_B         {b}");
    }
    println!("valid        {}", report.valid);
    println!("wrote {} {}", trace_path.display(), json_path.display());
    Ok(EXIT_OK)
}
