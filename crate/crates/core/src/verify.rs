//! Statistical checks that turn the transform identities into pass/fail
//! evidence: empirical transforms with standard errors, one- and two-sample
//! Kolmogorov-Smirnov tests, the stationary moment identity, and an
//! end-to-end equivalence report over one model.

use std::fmt;

use serde::Serialize;

use crate::distributions::OffSpec;
use crate::error::{Error, Result};
use crate::process::{self, DsppModel, InitMode, Level};
use crate::rng::Stream;
use crate::transforms::{self, InterarrivalCdf, TransformGrid, STANDARD_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// Sup-distance between the two distribution functions.
    pub statistic: f64,
    pub n: usize,
    /// Size of the second sample; `None` for a one-sample test.
    pub m: Option<usize>,
    /// Asymptotic p-value from the Kolmogorov distribution.
    pub p_value: f64,
}

/// `P(K > x)` for the Kolmogorov limit distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.0 {
        // theta-function form converges fast for small x
        let c = std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x
            * (1..=20)
                .map(|j| {
                    let odd = (2 * j - 1) as f64;
                    (-odd * odd * c).exp()
                })
                .sum::<f64>();
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let tail: f64 = (1..=100)
            .map(|j| {
                let j = j as f64;
                let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * x * x).exp()
            })
            .sum();
        (2.0 * tail).clamp(0.0, 1.0)
    }
}

fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("samples", "contains NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample KS test with effective size `nm / (n + m)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted_copy(a)?;
    let b = sorted_copy(b)?;
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let effective = (n as f64 * m as f64) / (n as f64 + m as f64);
    Ok(KsResult {
        statistic: d,
        n,
        m: Some(m),
        p_value: kolmogorov_survival(effective.sqrt() * d),
    })
}

/// One-sample KS test against a distribution function that may fail to
/// evaluate (for example a numerically inverted one).
pub fn try_ks_one_sample(samples: &[f64], mut cdf: impl FnMut(f64) -> Result<f64>) -> Result<KsResult> {
    let xs = sorted_copy(samples)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x)?;
        let i = i as f64;
        d = d.max((i + 1.0) / n - f).max(f - i / n);
    }
    Ok(KsResult {
        statistic: d,
        n: xs.len(),
        m: None,
        p_value: kolmogorov_survival(n.sqrt() * d),
    })
}

pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    try_ks_one_sample(samples, |x| Ok(cdf(x)))
}

/// Sample mean of `exp(-θ T)` with its standard error, at each `θ`.
pub fn empirical_lst(samples: &[f64], thetas: &[f64]) -> Result<TransformGrid> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = samples.len() as f64;
    let mut values = Vec::with_capacity(thetas.len());
    let mut stderr = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        // Welford: a constant sample yields its value and zero spread exactly
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, &t) in samples.iter().enumerate() {
            let x = (-theta * t).exp();
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let var = if samples.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
        values.push(mean);
        stderr.push((var.max(0.0) / n).sqrt());
    }
    TransformGrid::new(thetas.to_vec(), values, Some(stderr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|estimate - target| <= tolerance`
    Within,
    /// `estimate > target`
    Above,
    /// `estimate < target`
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub rule: Rule,
    pub target: f64,
    pub estimate: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Substream of the report seed this check drew from.
    pub stream: Option<u64>,
    /// Set when the check does not apply to the model; counts as passing.
    pub skipped: Option<String>,
}

impl CheckRecord {
    fn new(name: impl Into<String>, rule: Rule, target: f64, estimate: f64, tolerance: f64) -> Self {
        let pass = match rule {
            Rule::Within => (estimate - target).abs() <= tolerance,
            Rule::Above => estimate > target,
            Rule::Below => estimate < target,
        };
        Self {
            name: name.into(),
            rule,
            target,
            estimate,
            tolerance,
            pass,
            stream: None,
            skipped: None,
        }
    }

    fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            rule: Rule::Within,
            target: f64::NAN,
            estimate: f64::NAN,
            tolerance: f64::NAN,
            pass: true,
            stream: None,
            skipped: Some(reason.into()),
        }
    }

    fn on_stream(mut self, stream: u64) -> Self {
        self.stream = Some(stream);
        self
    }
}

/// Relative error allowed between the time-averaged and exact moments.
pub const MOMENT_REL_TOL: f64 = 0.02;
/// Allowed deviation of `p_on λ^n μ / λ^{n-1}` from 1.
pub const MOMENT_ALGEBRAIC_TOL: f64 = 1e-15;

/// Checks `E[Λ(t)^n] = λ^{n-1} / μ` for `n = 1..=n_max`.
///
/// The ensemble moment is estimated by the time average of `Λ^n` over one
/// stationary path of length `horizon` (the on-off cycle is ergodic when its
/// mean length is finite). The exact side is also checked algebraically:
/// `E[Λ^n] = p_on λ^n`, so `p_on λ^n μ / λ^{n-1}` must be 1.
pub fn moment_identity_check(
    model: &DsppModel,
    horizon: f64,
    n_max: u32,
    rng: &mut Stream,
) -> Result<Vec<CheckRecord>> {
    if n_max == 0 {
        return Err(Error::invalid("n_max", "must be >= 1"));
    }
    let mu = model.mu()?;
    let p_on = model.p_on()?;
    let lambda = model.lambda();
    let path = process::sample_intensity_path(model, horizon, InitMode::Stationary, rng)?;
    let on_fraction = path.time_at(Level::On) / horizon;
    let mut records = Vec::new();
    for n in 1..=n_max {
        let exact = lambda.powi(n as i32 - 1) / mu;
        let estimate = on_fraction * lambda.powi(n as i32);
        records.push(CheckRecord::new(
            format!("moment_time_average[n={n}]"),
            Rule::Within,
            exact,
            estimate,
            MOMENT_REL_TOL * exact,
        ));
    }
    for n in 1..=n_max {
        let ratio = p_on * lambda.powi(n as i32) * mu / lambda.powi(n as i32 - 1);
        records.push(CheckRecord::new(
            format!("moment_algebraic[n={n}]"),
            Rule::Within,
            1.0,
            ratio,
            MOMENT_ALGEBRAIC_TOL,
        ));
    }
    Ok(records)
}

/// Sizes, seeds and thresholds for [`equivalence_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub grid: Vec<f64>,
    /// Direct-sampler draws for the forward transform check.
    pub n_lst: usize,
    /// Draws per side for the KS checks.
    pub n_ks: usize,
    /// Stationary first-event draws for the residual-time check.
    pub n_residual: usize,
    /// Moment-check horizon in units of `μ`.
    pub moment_horizon: f64,
    pub moment_n_max: u32,
    /// Significance level for KS checks.
    pub alpha: f64,
    /// Half-width of the transform checks in standard errors.
    pub se_band: f64,
    /// Multiplies `k` in the path-based sampler only. Debugging aid: any
    /// value away from 1 should make the two-sample check fail.
    pub perturb_k: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            grid: STANDARD_GRID.to_vec(),
            n_lst: 1_000_000,
            n_ks: 100_000,
            n_residual: 1_000_000,
            moment_horizon: 1e5,
            moment_n_max: 4,
            alpha: 1e-3,
            se_band: 3.0,
            perturb_k: None,
        }
    }
}

/// Tolerance for agreement of the two residual-time formulas.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEcho {
    pub lambda: f64,
    pub k: f64,
    pub g: OffSpec,
    pub mu: f64,
    pub p_on: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub model: ModelEcho,
    pub config: VerifyConfig,
    pub checks: Vec<CheckRecord>,
    pub pass: bool,
}

impl EquivalenceReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "model: lambda={} k={} g={} mu={:.6} p_on={:.6} seed={}",
            self.model.lambda,
            self.model.k,
            serde_json::to_string(&self.model.g).unwrap_or_default(),
            self.model.mu,
            self.model.p_on,
            self.config.seed
        )?;
        writeln!(
            f,
            "{:<34} {:>6} {:>14} {:>14} {:>11}  result",
            "check", "rule", "target", "estimate", "tolerance"
        )?;
        for c in &self.checks {
            if let Some(reason) = &c.skipped {
                writeln!(f, "{:<34} {:>6} {:>42}  skipped ({reason})", c.name, "-", "")?;
                continue;
            }
            let rule = match c.rule {
                Rule::Within => "within",
                Rule::Above => ">",
                Rule::Below => "<",
            };
            writeln!(
                f,
                "{:<34} {:>6} {:>14.8} {:>14.8} {:>11.3e}  {}",
                c.name,
                rule,
                c.target,
                c.estimate,
                c.tolerance,
                if c.pass { "pass" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

/// Stream indices under the report seed, one per check.
pub mod streams {
    pub const FORWARD_LST: u64 = 1;
    pub const PATH_VS_DIRECT: u64 = 2;
    pub const INVERTED_CDF: u64 = 3;
    pub const RESIDUAL: u64 = 4;
    pub const MOMENTS: u64 = 5;
}

/// Draws `n` values of `f` on one stream.
pub fn draw(n: usize, rng: &mut Stream, mut f: impl FnMut(&mut Stream) -> f64) -> Vec<f64> {
    (0..n).map(|_| f(rng)).collect()
}

fn forward_lst_check(model: &DsppModel, cfg: &VerifyConfig, root: &Stream) -> Result<Vec<CheckRecord>> {
    let mut rng = root.substream(streams::FORWARD_LST);
    let samples = draw(cfg.n_lst, &mut rng, |r| process::sample_interarrival(model, r));
    let emp = empirical_lst(&samples, &cfg.grid)?;
    let se = emp.stderr.as_ref().expect("empirical grid has stderr");
    cfg.grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            Ok(CheckRecord::new(
                format!("forward_lst[theta={theta}]"),
                Rule::Within,
                transforms::phi_f(model, theta)?,
                emp.values[i],
                cfg.se_band * se[i],
            )
            .on_stream(streams::FORWARD_LST))
        })
        .collect()
}

/// The two sample sets compared by the path-vs-direct check.
pub fn path_and_direct_samples(model: &DsppModel, n: usize, perturb_k: Option<f64>, root: &Stream) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = root.substream(streams::PATH_VS_DIRECT);
    let path_model = match perturb_k {
        Some(factor) => model.with_k(model.k() * factor)?,
        None => model.clone(),
    };
    let mut path_rng = base.substream(0);
    let mut direct_rng = base.substream(1);
    let path = draw(n, &mut path_rng, |r| process::path_interarrival(&path_model, r));
    let direct = draw(n, &mut direct_rng, |r| process::sample_interarrival(model, r));
    Ok((path, direct))
}

fn path_vs_direct_check(model: &DsppModel, cfg: &VerifyConfig, root: &Stream) -> Result<Vec<CheckRecord>> {
    let (path, direct) = path_and_direct_samples(model, cfg.n_ks, cfg.perturb_k, root)?;
    let ks = ks_two_sample(&path, &direct)?;
    Ok(vec![CheckRecord::new("path_vs_direct_ks_p", Rule::Above, cfg.alpha, ks.p_value, 0.0)
        .on_stream(streams::PATH_VS_DIRECT)])
}

fn inverted_cdf_check(model: &DsppModel, cfg: &VerifyConfig, root: &Stream) -> Result<Vec<CheckRecord>> {
    let mut rng = root.substream(streams::INVERTED_CDF);
    let samples = draw(cfg.n_ks, &mut rng, |r| process::sample_interarrival(model, r));
    let cdf = InterarrivalCdf::new(model)?;
    let ks = try_ks_one_sample(&samples, |t| cdf.eval(t))?;
    Ok(vec![CheckRecord::new("inverted_cdf_ks_p", Rule::Above, cfg.alpha, ks.p_value, 0.0)
        .on_stream(streams::INVERTED_CDF)])
}

fn residual_check(model: &DsppModel, cfg: &VerifyConfig, root: &Stream) -> Result<Vec<CheckRecord>> {
    let mut rng = root.substream(streams::RESIDUAL);
    let mut samples = Vec::with_capacity(cfg.n_residual);
    for _ in 0..cfg.n_residual {
        samples.push(process::stationary_first_event_time(model, &mut rng)?);
    }
    let emp = empirical_lst(&samples, &cfg.grid)?;
    let se = emp.stderr.as_ref().expect("empirical grid has stderr");
    let mut records = Vec::new();
    for (i, &theta) in cfg.grid.iter().enumerate() {
        records.push(
            CheckRecord::new(
                format!("residual_lst[theta={theta}]"),
                Rule::Within,
                transforms::residual_lst(model, theta)?,
                emp.values[i],
                cfg.se_band * se[i],
            )
            .on_stream(streams::RESIDUAL),
        );
    }
    for &theta in &cfg.grid {
        let name = format!("residual_decomposition[theta={theta}]");
        match transforms::residual_lst_decomposed(model, theta) {
            Ok(split) => records.push(CheckRecord::new(
                name,
                Rule::Within,
                transforms::residual_lst(model, theta)?,
                split,
                DECOMPOSITION_TOL,
            )),
            Err(Error::ZeroMean) => {
                records.push(CheckRecord::skipped(name, "off-periods have zero mean; intensity never leaves lambda"))
            }
            Err(e) => return Err(e),
        }
    }
    Ok(records)
}

fn moment_check(model: &DsppModel, cfg: &VerifyConfig, root: &Stream) -> Result<Vec<CheckRecord>> {
    let mut rng = root.substream(streams::MOMENTS);
    let horizon = cfg.moment_horizon * model.mu()?;
    Ok(moment_identity_check(model, horizon, cfg.moment_n_max, &mut rng)?
        .into_iter()
        .map(|r| if r.name.starts_with("moment_time") { r.on_stream(streams::MOMENTS) } else { r })
        .collect())
}

type CheckFn = fn(&DsppModel, &VerifyConfig, &Stream) -> Result<Vec<CheckRecord>>;

/// Runs every check on `model` and collects the results.
///
/// Checks, in order: empirical versus exact inter-arrival transform;
/// two-sample KS between path-based and direct inter-arrivals; one-sample KS
/// of direct inter-arrivals against the inverted `F`; empirical versus exact
/// residual-time transform, and the two-case residual formula; the moment
/// identity. Each check draws from its own substream of `cfg.seed`, so they
/// run concurrently and the report does not depend on scheduling.
pub fn equivalence_report(model: &DsppModel, cfg: &VerifyConfig) -> Result<EquivalenceReport> {
    if cfg.grid.iter().any(|t| t.is_nan() || *t < 0.0) {
        return Err(Error::invalid("grid", "theta values must be >= 0"));
    }
    if cfg.n_lst == 0 || cfg.n_ks == 0 || cfg.n_residual == 0 {
        return Err(Error::EmptySample);
    }
    let echo = ModelEcho {
        lambda: model.lambda(),
        k: model.k(),
        g: model.off().spec(),
        mu: model.mu()?,
        p_on: model.p_on()?,
    };
    let root = Stream::new(cfg.seed);
    let checks: [(&str, CheckFn); 5] = [
        ("forward_lst", forward_lst_check),
        ("path_vs_direct_ks", path_vs_direct_check),
        ("inverted_cdf_ks", inverted_cdf_check),
        ("residual_lst", residual_check),
        ("moment_identity", moment_check),
    ];
    let results: Vec<Result<Vec<CheckRecord>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = checks
            .iter()
            .map(|&(name, run)| {
                let root = &root;
                scope.spawn(move || run(model, cfg, root).map_err(|e| e.in_check(name)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check thread panicked"))
            .collect()
    });
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    let pass = records.iter().all(|c| c.pass);
    Ok(EquivalenceReport {
        model: echo,
        config: cfg.clone(),
        checks: records,
        pass,
    })
}
