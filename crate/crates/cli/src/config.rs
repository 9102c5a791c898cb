//! `key = value` configuration files. Flags given on the command line take
//! precedence over file values, which take precedence over defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::Failure;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "THW_OUTPUT_DIR";

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    source: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                return Err(format!("line {}: empty key", k + 1));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key '{key}'", k + 1));
            }
        }
        Ok(Self { values, source: None })
    }

    /// Flag value if given, else the parsed file value, else `None`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| {
                let src = self.source.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
                Failure::Usage(format!("{src}: {key} = {v}: {e}"))
            }),
        }
    }

    /// Rejects keys that the command does not understand.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), Failure> {
        for k in self.values.keys() {
            if !known.contains(&k.as_str()) {
                return Err(Failure::Usage(format!("unknown config key '{k}'")));
            }
        }
        Ok(())
    }
}

/// Output directory from the flag, the config file, the environment, or `.`.
pub fn output_dir(flag: Option<PathBuf>, cfg: &ConfigFile) -> Result<PathBuf, Failure> {
    let dir = match cfg.pick(flag, "out")? {
        Some(d) => d,
        None => std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}
