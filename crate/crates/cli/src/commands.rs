use std::fs::File;
use std::path::{Path, PathBuf};

use dspp_core::process::{self, sample_intensity_path, thin_events_on_path};
use dspp_core::transforms::{self, check_valid_lst, recover_phi_g_grid, InterarrivalCdf};
use dspp_core::verify::{equivalence_report, VerifyConfig};
use dspp_core::{csvfmt, InitMode, Stream, TransformGrid};

use crate::config::{check_grid, Loaded, ModelConfig};
use crate::error::{CliError, CliResult};
use crate::output::write_atomic;
use crate::{Common, SimMode, Which};

fn load(common: &Common) -> CliResult<Loaded> {
    let base = common.config.parent().unwrap_or(Path::new("."));
    ModelConfig::read(&common.config)?.resolve(base, common.seed, common.grid.clone().map(|g| g.0))
}

fn positive(name: &str, value: Option<f64>) -> CliResult<f64> {
    match value {
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(CliError::config(format!("{name}: must be finite and > 0, got {v}"))),
        None => Err(CliError::config(format!("{name}: required for this mode"))),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn simulate(common: &Common, mode: SimMode, horizon: Option<f64>, count: Option<usize>) -> CliResult<String> {
    let cfg = load(common)?;
    let mut rng = Stream::new(cfg.seed);
    match mode {
        SimMode::Interarrivals => {
            let n = match count {
                Some(n) if n > 0 => n,
                _ => return Err(CliError::config("count: required for interarrivals and must be > 0")),
            };
            let xs: Vec<f64> = (0..n).map(|_| process::sample_interarrival(&cfg.model, &mut rng)).collect();
            write_atomic(&common.out, |w| {
                csvfmt::write_rows(w, "interarrival", xs.iter().map(|x| vec![*x]))
            })?;
            let m = mean(&xs);
            Ok(format!("interarrivals: count={n} mean={m:.6} rate={:.6}", 1.0 / m))
        }
        SimMode::Events => {
            let horizon = positive("horizon", horizon)?;
            let path = sample_intensity_path(&cfg.model, horizon, InitMode::Stationary, &mut rng)?;
            let events = thin_events_on_path(&path, cfg.model.lambda(), &mut rng);
            write_atomic(&common.out, |w| events.write_csv(w))?;
            Ok(format!(
                "events: count={} mean={:.6} rate={:.6}",
                events.len(),
                mean(&events.gaps()),
                events.rate()
            ))
        }
        SimMode::Path => {
            let horizon = positive("horizon", horizon)?;
            let path = sample_intensity_path(&cfg.model, horizon, InitMode::Stationary, &mut rng)?;
            write_atomic(&common.out, |w| path.write_csv(w))?;
            let durations: Vec<f64> = path.segments.iter().map(|s| s.duration).collect();
            let on = path.time_at(dspp_core::Level::On);
            Ok(format!(
                "path: count={} mean={:.6} rate={:.6}",
                durations.len(),
                mean(&durations),
                cfg.model.lambda() * on / horizon
            ))
        }
    }
}

pub fn transform(common: &Common, which: Which) -> CliResult<String> {
    let cfg = load(common)?;
    let m = &cfg.model;
    let (name, grid) = match which {
        Which::PhiF => ("phiF", TransformGrid::tabulate(&cfg.grid, |t| transforms::phi_f(m, t))?),
        Which::PhiG => ("phiG", TransformGrid::tabulate(&cfg.grid, |t| m.off().lst(t))?),
        Which::Residual => ("residual", TransformGrid::tabulate(&cfg.grid, |t| transforms::residual_lst(m, t))?),
    };
    write_atomic(&common.out, |w| grid.write_csv(w))?;
    Ok(format!("transform {name}: {} points", grid.len()))
}

pub fn decompose(input: &Path, lambda: f64, k: f64, out: &Path, diagnostics: Option<PathBuf>) -> CliResult<String> {
    let file = File::open(input).map_err(|e| CliError::io(input, e))?;
    let phi_f = TransformGrid::read_csv(file).map_err(|e| CliError::config(format!("{}: {e}", input.display())))?;
    check_grid(&phi_f.thetas)?;
    let phi_g = recover_phi_g_grid(&phi_f, lambda, k)?;
    let diag = check_valid_lst(&phi_g);
    let diag_path = diagnostics.unwrap_or_else(|| {
        let mut p = out.as_os_str().to_owned();
        p.push(".diagnostics.json");
        PathBuf::from(p)
    });
    write_atomic(out, |w| phi_g.write_csv(w))?;
    write_atomic(&diag_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &diag)?;
        writeln!(w)
    })?;
    if diag.is_valid() {
        Ok(format!("decompose: {} points, no violations", phi_g.len()))
    } else {
        let listed: Vec<String> = diag
            .violations
            .iter()
            .map(|v| format!("{:?} at theta={} ({})", v.kind, v.theta, v.detail))
            .collect();
        Err(CliError::Violations(listed.join("; ")))
    }
}

pub struct VerifySizes {
    pub n_lst: Option<usize>,
    pub n_ks: Option<usize>,
    pub n_residual: Option<usize>,
    pub moment_horizon: Option<f64>,
    pub perturb_k: Option<f64>,
}

pub fn verify(common: &Common, sizes: VerifySizes) -> CliResult<String> {
    let cfg = load(common)?;
    let defaults = VerifyConfig::default();
    let vc = VerifyConfig {
        seed: cfg.seed,
        grid: cfg.grid.clone(),
        n_lst: sizes.n_lst.unwrap_or(defaults.n_lst),
        n_ks: sizes.n_ks.unwrap_or(defaults.n_ks),
        n_residual: sizes.n_residual.unwrap_or(defaults.n_residual),
        moment_horizon: sizes.moment_horizon.unwrap_or(defaults.moment_horizon),
        perturb_k: sizes.perturb_k,
        ..defaults
    };
    let report = equivalence_report(&cfg.model, &vc)?;
    write_atomic(&common.out, |w| writeln!(w, "{}", report.to_json()))?;
    let total = report.checks.len();
    if report.pass {
        Ok(format!("verify: pass ({total} checks, seed {})", vc.seed))
    } else {
        let failed: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Err(CliError::VerifyFailed(format!(
            "{} of {total} checks failed (seed {}): {}",
            failed.len(),
            vc.seed,
            failed.join(", ")
        )))
    }
}

pub fn invert(common: &Common, times: &[f64]) -> CliResult<String> {
    let cfg = load(common)?;
    if times.is_empty() {
        return Err(CliError::config("times: empty"));
    }
    if let Some(bad) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(CliError::config(format!("times: t must be finite and > 0, got {bad}")));
    }
    let cdf = InterarrivalCdf::new(&cfg.model)?;
    let values = times.iter().map(|&t| cdf.eval(t)).collect::<Result<Vec<f64>, _>>()?;
    write_atomic(&common.out, |w| {
        csvfmt::write_rows(w, "t,cdf", times.iter().zip(&values).map(|(t, f)| vec![*t, *f]))
    })?;
    Ok(format!("invert: {} points", times.len()))
}
