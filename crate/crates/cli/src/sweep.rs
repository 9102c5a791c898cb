//! Resumable parameter sweeps. Each finished point leaves a one-line marker
//! file; a rerun skips points whose marker exists and rebuilds the table.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use thw::model::ModelParams;
use thw::stability::{self, AnalyzeOptions};

use crate::commands::{fmt, grid_spec, solve_wave, KNOWN_KEYS};
use crate::config::{output_dir, ConfigFile};
use crate::{Failure, GridArgs, OutArgs, EXIT_CONVERGENCE, EXIT_OK};

pub const TABLE_HEADER: &str = "index,n,omega,mu,sigma,status,verdict,growth_rate,vk,mass,energy,residual_sup";

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Dimensions, e.g. `1,2`.
    #[arg(long)]
    pub n: Option<String>,
    /// Values `a,b,c` or an inclusive range `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub out: OutArgs,
    /// `solve` or `analyze` (default).
    #[arg(long)]
    pub task: Option<String>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Parses `a,b,c` or `start:stop:count`.
pub fn parse_axis(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, k] => {
            let (a, b) = (num(a)?, num(b)?);
            let k: usize = k.trim().parse().map_err(|e| format!("'{k}': {e}"))?;
            match k {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect(),
            }
        }
        [_] => s.split(',').filter(|t| !t.trim().is_empty()).map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("'{s}': expected a,b,c or start:stop:count")),
    };
    if values.is_empty() {
        return Err(format!("'{s}' has no values"));
    }
    Ok(values)
}

fn axis(flag: Option<String>, key: &str, default: f64, cfg: &ConfigFile) -> Result<Vec<f64>, Failure> {
    match cfg.pick(flag, key)? {
        Some(s) => parse_axis(&s).map_err(|e| Failure::Usage(format!("--{key}: {e}"))),
        None => Ok(vec![default]),
    }
}

/// Cartesian product with `omega` varying fastest. Every point must pass the
/// parameter guard.
pub fn points(n: &[f64], omega: &[f64], mu: &[f64], sigma: &[f64]) -> Result<Vec<ModelParams>, Failure> {
    let mut out = Vec::new();
    for &d in n {
        if d.fract() != 0.0 || d < 1.0 {
            return Err(Failure::Usage(format!("dimension {d} is not a positive integer")));
        }
        for &s in sigma {
            for &m in mu {
                for &w in omega {
                    out.push(ModelParams::new(d as usize, w, m, s)?);
                }
            }
        }
    }
    Ok(out)
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

fn run_point(p: &ModelParams, task: &str, g: &GridArgs, cfg: &ConfigFile) -> Result<String, Failure> {
    let grid = grid_spec(g, cfg, p, false)?.build()?;
    let wave = solve_wave("weinstein", grid, p, None, None, None)?;
    let (verdict, growth, vk) = if task == "analyze" {
        let opts = AnalyzeOptions { direct: false, multiplicity: false, ..AnalyzeOptions::default() };
        let r = stability::analyze(&wave, &opts)?;
        (r.verdict.as_str().to_string(), fmt(r.growth_rate), fmt(r.vk_value))
    } else {
        (String::new(), String::new(), String::new())
    };
    Ok(format!(
        "ok,{verdict},{growth},{vk},{},{},{}",
        fmt(wave.mass),
        fmt(wave.energy),
        fmt(wave.residual_sup)
    ))
}

fn marker(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("{i:06}.row"))
}

pub fn sweep(a: SweepArgs, cfg: &ConfigFile) -> Result<u8, Failure> {
    cfg.check_keys(KNOWN_KEYS)?;
    let task = cfg.pick(a.task, "task")?.unwrap_or_else(|| "analyze".into());
    if task != "analyze" && task != "solve" {
        return Err(Failure::Usage(format!("unknown task '{task}' (solve, analyze)")));
    }
    let pts = points(
        &axis(a.n, "n", 1.0, cfg)?,
        &axis(a.omega, "omega", 0.5, cfg)?,
        &axis(a.mu, "mu", 9.0, cfg)?,
        &axis(a.sigma, "sigma", 3.0, cfg)?,
    )?;
    for p in &pts {
        grid_spec(&a.grid, cfg, p, false)?;
    }
    let dir = output_dir(a.out.out, cfg)?;
    let name = cfg.pick(a.out.name, "name")?.unwrap_or_else(|| "sweep".into());
    let rows_dir = dir.join(format!("{name}.points"));
    fs::create_dir_all(&rows_dir)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.pick(a.jobs, "jobs")? {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| Failure::Usage(e.to_string()))?;
    let grid = a.grid.clone();
    let written: Result<Vec<()>, Failure> = pool.install(|| {
        pts.par_iter()
            .enumerate()
            .map(|(i, p)| {
                let path = marker(&rows_dir, i);
                if path.exists() {
                    return Ok(());
                }
                let body = match run_point(p, &task, &grid, cfg) {
                    Ok(b) => b,
                    Err(Failure::Usage(m) | Failure::Convergence(m)) => format!("error: {},,,,,,", clean(&m)),
                };
                let row = format!("{i},{},{},{},{},{body}\n", p.n, fmt(p.omega), fmt(p.mu), fmt(p.sigma));
                let tmp = path.with_extension("tmp");
                fs::write(&tmp, row)?;
                fs::rename(&tmp, &path)?;
                Ok(())
            })
            .collect()
    });
    written?;

    let mut table = String::from(TABLE_HEADER);
    table.push('\n');
    let mut failed = 0;
    for i in 0..pts.len() {
        let row = fs::read_to_string(marker(&rows_dir, i))?;
        if row.split(',').nth(5).is_some_and(|s| s != "ok") {
            failed += 1;
        }
        table.push_str(&row);
    }
    let table_path = dir.join(format!("{name}.csv"));
    fs::write(&table_path, table)?;
    println!("points       {}", pts.len());
    println!("failed       {failed}");
    println!("wrote {}", table_path.display());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_CONVERGENCE })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes() {
        assert_eq!(parse_axis("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert_eq!(parse_axis("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_axis("-0.5").unwrap(), vec![-0.5]);
        assert!(parse_axis("").is_err());
        assert!(parse_axis("0:1").is_err());
        assert!(parse_axis("0:1:0").is_err());
    }
}
