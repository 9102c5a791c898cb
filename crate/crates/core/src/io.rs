//! Text snapshots of fields and wave profiles.
//!
//! A snapshot is a header line
//!
//! ```text
//! # grid kind=radial-graded dim=2 N=551 L=20 h_min=2e-5 growth=0.02
//! # columns r P Q
//! ```
//!
//! followed by one row per node: the coordinates (`x`, `x y` or `x y z` on
//! periodic grids, `r` on radial grids) and the values. Numbers are written
//! with 17 significant digits, so reading a snapshot back reproduces every
//! value bit for bit. Complex fields use a `re` and an `im` column.
//!
//! A profile is a snapshot with columns `P Q` plus a JSON sidecar holding
//! the parameters and diagnostics.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Field, Grid, GridKind, GridSpec};
use crate::model::ModelParams;
use crate::solver::{Provenance, WaveProfile};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(spec: &GridSpec, len: usize) -> String {
    let mut s = format!(
        "# grid kind={} dim={} N={} L={}",
        spec.kind.as_str(),
        spec.dim,
        len,
        num(spec.extent)
    );
    if let (Some(h), Some(k)) = (spec.h_min, spec.growth) {
        s.push_str(&format!(" h_min={} growth={}", num(h), num(k)));
    }
    s
}

fn coordinate_names(grid: &Grid) -> Vec<&'static str> {
    match grid {
        Grid::Radial(_) => vec!["r"],
        Grid::Periodic(_) => ["x", "y", "z"][..grid.dim()].to_vec(),
    }
}

fn coordinate_columns(grid: &Grid) -> Vec<Vec<f64>> {
    match grid {
        Grid::Radial(_) => vec![grid.radii()],
        Grid::Periodic(_) => (0..grid.dim()).map(|a| grid.coordinates(a)).collect(),
    }
}

/// Writes named real columns on `grid`.
pub fn write_columns<W: Write>(mut w: W, grid: &Grid, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, c) in columns {
        if c.len() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), found: c.len() });
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("bad column name '{name}'")));
        }
    }
    writeln!(w, "{}", header(&grid.spec(), grid.len()))?;
    let mut names: Vec<&str> = coordinate_names(grid);
    names.extend(columns.iter().map(|(n, _)| *n));
    writeln!(w, "# columns {}", names.join(" "))?;
    let coords = coordinate_columns(grid);
    let mut line = String::new();
    for i in 0..grid.len() {
        line.clear();
        for c in coords.iter().map(|c| c[i]).chain(columns.iter().map(|(_, c)| c[i])) {
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&num(c));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Contents of a snapshot: the grid and the named value columns.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub grid: Arc<Grid>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::Parse(format!("snapshot has no column '{name}'")))
    }
}

fn parse_header(line: &str) -> Result<GridSpec> {
    let rest = line
        .strip_prefix("# grid")
        .ok_or_else(|| Error::Parse(format!("line 1: expected '# grid ...', found '{line}'")))?;
    let mut kind = None;
    let (mut dim, mut points, mut extent, mut h_min, mut growth) = (None, None, None, None, None);
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line 1: malformed token '{tok}'")))?;
        let float = |v: &str| v.parse::<f64>().map_err(|e| Error::Parse(format!("line 1: {k}={v}: {e}")));
        let int = |v: &str| v.parse::<usize>().map_err(|e| Error::Parse(format!("line 1: {k}={v}: {e}")));
        match k {
            "kind" => kind = Some(GridKind::parse(v)?),
            "dim" => dim = Some(int(v)?),
            "N" => points = Some(int(v)?),
            "L" => extent = Some(float(v)?),
            "h_min" => h_min = Some(float(v)?),
            "growth" => growth = Some(float(v)?),
            _ => return Err(Error::Parse(format!("line 1: unknown key '{k}'"))),
        }
    }
    let missing = |what: &str| Error::Parse(format!("line 1: missing {what}"));
    let kind = kind.ok_or_else(|| missing("kind"))?;
    let dim = dim.unwrap_or(1);
    let points = points.ok_or_else(|| missing("N"))?;
    let extent = extent.ok_or_else(|| missing("L"))?;
    Ok(match kind {
        GridKind::Periodic => {
            let per_axis = (points as f64).powf(1.0 / dim as f64).round() as usize;
            if per_axis.pow(dim as u32) != points {
                return Err(Error::Parse(format!("line 1: N={points} is not a {dim}-dimensional tensor grid")));
            }
            GridSpec::periodic(dim, per_axis, extent)
        }
        GridKind::RadialSpectral => GridSpec::radial_spectral(dim, points, extent),
        GridKind::RadialGraded => {
            let mut s = GridSpec::radial_graded(
                dim,
                extent,
                h_min.ok_or_else(|| missing("h_min"))?,
                growth.ok_or_else(|| missing("growth"))?,
            );
            s.points = points;
            s
        }
    })
}

/// Reads a snapshot and checks that its coordinates match the rebuilt grid.
pub fn read_columns<R: Read>(r: R) -> Result<Snapshot> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))??;
    let spec = parse_header(first.trim())?;
    let grid = spec.build()?;
    if spec.kind == GridKind::RadialGraded && grid.len() != spec.points {
        return Err(Error::Parse(format!(
            "line 1: N={} but the graded parameters give {} cells",
            spec.points,
            grid.len()
        )));
    }
    let second = lines.next().ok_or_else(|| Error::Parse("missing '# columns' line".into()))??;
    let mut names: Vec<String> = second
        .trim()
        .strip_prefix("# columns")
        .ok_or_else(|| Error::Parse(format!("line 2: expected '# columns ...', found '{second}'")))?
        .split_whitespace()
        .map(String::from)
        .collect();
    let nc = coordinate_names(&grid).len();
    if names.len() <= nc {
        return Err(Error::Parse("line 2: no value columns".into()));
    }
    let mut columns = vec![Vec::with_capacity(grid.len()); names.len()];
    let coords = coordinate_columns(&grid);
    let mut row = 0usize;
    for (k, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = k + 3;
        if row >= grid.len() {
            return Err(Error::Parse(format!("line {lineno}: more rows than the {} grid nodes", grid.len())));
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {lineno}: '{t}': {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != names.len() {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {} columns, found {}",
                names.len(),
                vals.len()
            )));
        }
        for (a, c) in coords.iter().enumerate() {
            if (vals[a] - c[row]).abs() > 1e-12 * (1.0 + c[row].abs()) {
                return Err(Error::Parse(format!(
                    "line {lineno}: coordinate {} does not match the grid node {}",
                    vals[a], c[row]
                )));
            }
        }
        for (col, v) in columns.iter_mut().zip(vals) {
            col.push(v);
        }
        row += 1;
    }
    if row != grid.len() {
        return Err(Error::Parse(format!("expected {} rows, found {row}", grid.len())));
    }
    Ok(Snapshot { grid, names: names.split_off(nc), columns: columns.split_off(nc) })
}

pub fn write_field<W: Write>(w: W, f: &Field) -> Result<()> {
    write_columns(w, f.grid(), &[("value", f.values())])
}

pub fn write_complex_field<W: Write>(w: W, f: &ComplexField) -> Result<()> {
    let re: Vec<f64> = f.values().iter().map(|z| z.re).collect();
    let im: Vec<f64> = f.values().iter().map(|z| z.im).collect();
    write_columns(w, f.grid(), &[("re", &re), ("im", &im)])
}

/// Reads a real field, or the first value column of any snapshot.
pub fn read_field<R: Read>(r: R) -> Result<Field> {
    let mut s = read_columns(r)?;
    Field::new(s.grid, s.columns.swap_remove(0))
}

pub fn read_complex_field<R: Read>(r: R) -> Result<ComplexField> {
    let s = read_columns(r)?;
    let (re, im) = (s.column("re")?, s.column("im")?);
    Field::new(s.grid.clone(), re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect())
}

/// JSON sidecar of a profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub n: usize,
    pub omega: f64,
    pub mu: f64,
    pub sigma: f64,
    pub provenance: Provenance,
    pub residual_sup: f64,
    pub mass: f64,
    pub energy: f64,
    #[serde(rename = "J_max", default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<f64>,
    #[serde(rename = "C_ab", default, skip_serializing_if = "Option::is_none")]
    pub c_ab: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_formula: Option<f64>,
    pub grid: GridSpec,
}

impl ProfileMeta {
    pub fn of(wave: &WaveProfile) -> Self {
        let p = wave.params;
        Self {
            n: p.n,
            omega: p.omega,
            mu: p.mu,
            sigma: p.sigma,
            provenance: wave.provenance.clone(),
            residual_sup: wave.residual_sup,
            mass: wave.mass,
            energy: wave.energy,
            j_max: wave.j_max,
            c_ab: wave.c_ab,
            lambda: wave.lambda,
            omega_formula: wave.omega_formula,
            grid: wave.grid().spec(),
        }
    }
}

/// `profile.dat` and `profile.json` for a stem `profile`.
pub fn profile_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("dat") | Some("json") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let add = |ext: &str| {
        let mut s = base.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    (add(".dat"), add(".json"))
}

pub fn save_profile(wave: &WaveProfile, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let (dat, json) = profile_paths(stem);
    let mut w = BufWriter::new(fs::File::create(&dat)?);
    write_columns(&mut w, wave.grid(), &[("P", wave.p.values()), ("Q", wave.q.values())])?;
    w.flush()?;
    let mut meta = serde_json::to_string_pretty(&ProfileMeta::of(wave))?;
    meta.push('\n');
    fs::write(&json, meta)?;
    Ok((dat, json))
}

/// Loads a profile; the diagnostics are recomputed from the fields and the
/// stored `J_max`, `C_ab`, mass level and multiplier formula are restored.
pub fn load_profile(stem: &Path) -> Result<WaveProfile> {
    let (dat, json) = profile_paths(stem);
    let meta: ProfileMeta = serde_json::from_str(&fs::read_to_string(&json)?)?;
    let snap = read_columns(fs::File::open(&dat)?)?;
    if snap.grid.spec() != meta.grid {
        return Err(Error::Parse(format!("{}: grid differs from the sidecar", dat.display())));
    }
    let params = ModelParams::new(meta.n, meta.omega, meta.mu, meta.sigma)?;
    let p = Field::new(snap.grid.clone(), snap.column("P")?.to_vec())?;
    let q = Field::new(snap.grid.clone(), snap.column("Q")?.to_vec())?;
    let mut wave = WaveProfile::from_fields(p, q, params, meta.provenance)?;
    wave.j_max = meta.j_max;
    wave.c_ab = meta.c_ab;
    wave.lambda = meta.lambda;
    wave.omega_formula = meta.omega_formula;
    Ok(wave)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        for spec in [
            GridSpec::periodic(2, 16, 7.5),
            GridSpec::radial_spectral(3, 40, 12.0),
            Grid::radial_graded(2, 10.0, 1e-3, 0.05).unwrap().spec(),
        ] {
            let line = header(&spec, Grid::from_spec(&spec).unwrap().len());
            assert_eq!(parse_header(&line).unwrap(), spec);
        }
    }

    #[test]
    fn rejects_truncated_file() {
        let g = Grid::periodic(1, 8, 3.0).unwrap();
        let f = Field::from_radial(g, |r| (-r * r).exp());
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_field(cut.as_bytes()), Err(Error::Parse(_))));
    }
}
