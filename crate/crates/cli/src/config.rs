use std::fs;
use std::path::{Path, PathBuf};

use dspp_core::{DsppModel, OffSpec, OffTimeDistribution, STANDARD_GRID};
use serde::Deserialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// On-disk model description.
///
/// `g` is kept as raw JSON until its family is known, so errors can point at
/// the offending key. An empirical `g` may give `"path"` (a one-column CSV of
/// durations, relative to the config file) instead of inline `"samples"`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: f64,
    pub k: f64,
    pub g: Value,
    pub seed: Option<u64>,
    pub grid: Option<Vec<f64>>,
}

pub struct Loaded {
    pub model: DsppModel,
    pub seed: u64,
    pub grid: Vec<f64>,
}

impl ModelConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Builds the model. `seed` and `grid` override the config values.
    pub fn resolve(self, base: &Path, seed: Option<u64>, grid: Option<Vec<f64>>) -> CliResult<Loaded> {
        let off = parse_off(self.g, base)?;
        let model = DsppModel::new(self.lambda, self.k, off).map_err(|e| CliError::config(e.to_string()))?;
        let seed = seed
            .or(self.seed)
            .ok_or_else(|| CliError::config("seed: missing; set it in the config or pass --seed"))?;
        let grid = grid.or(self.grid).unwrap_or_else(|| STANDARD_GRID.to_vec());
        check_grid(&grid)?;
        Ok(Loaded { model, seed, grid })
    }
}

pub fn check_grid(grid: &[f64]) -> CliResult<()> {
    if grid.is_empty() {
        return Err(CliError::config("grid: empty"));
    }
    if let Some(bad) = grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(CliError::config(format!("grid: theta must be finite and >= 0, got {bad}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::config("grid: theta values must be strictly increasing"));
    }
    Ok(())
}

/// A comma-separated list of numbers given as one flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct List(pub Vec<f64>);

/// Parses `"a,b,c"` into numbers.
pub fn parse_list(s: &str) -> Result<List, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_off(g: Value, base: &Path) -> CliResult<OffTimeDistribution> {
    let Value::Object(mut obj) = g else {
        return Err(CliError::config("g: expected an object with a \"family\" key"));
    };
    let family = match obj.get("family") {
        Some(Value::String(f)) => f.clone(),
        Some(other) => return Err(CliError::config(format!("g.family: expected a string, got {other}"))),
        None => return Err(CliError::config("g.family: missing")),
    };
    if !OffSpec::FAMILIES.contains(&family.as_str()) {
        return Err(CliError::config(format!(
            "g.family: unknown family `{family}`, expected one of {}",
            OffSpec::FAMILIES.join(", ")
        )));
    }
    if family == "empirical" {
        if let Some(path) = obj.remove("path") {
            if obj.contains_key("samples") {
                return Err(CliError::config("g: give either `samples` or `path`, not both"));
            }
            let Value::String(path) = path else {
                return Err(CliError::config("g.path: expected a string"));
            };
            let samples = read_durations(&base.join(path))?;
            obj.insert("samples".into(), samples.into());
        }
    }
    let spec: OffSpec = serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::config(format!("g: {e}")))?;
    OffTimeDistribution::new(spec).map_err(|e| CliError::config(format!("g: {e}")))
}

/// One-column CSV of durations; a non-numeric first row is taken as a header.
fn read_durations(path: &PathBuf) -> CliResult<Vec<f64>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(file);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::config(format!("g.path {}: {e}", path.display())))?;
        let field = record.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(CliError::config(format!(
                    "g.path {}: row {}: `{field}` is not a number",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}
