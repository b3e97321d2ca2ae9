//! Transform identities for the on-off Cox process.
//!
//! The inter-arrival transform is
//!
//! ```text
//! φ_F(θ) = λ / (λ + θ + k (1 - φ_G(θ)))
//! ```
//!
//! from which `φ_G` can be recovered algebraically given `λ` and `k`, the
//! mean `μ = -φ_F'(0) = (1 + k E[Y]) / λ` follows by differentiation, and the
//! stationary residual time has transform `(1 - φ_F(θ)) / (θ μ)`. The
//! distribution function `F` itself is obtained by numerically inverting
//! `φ_F(s) / s`.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::csvfmt;
use crate::distributions::OffTimeDistribution;
use crate::error::{Error, Result};
use crate::process::DsppModel;

/// Below this `θ` the residual transforms switch to their first-order series.
pub const SMALL_THETA: f64 = 1e-8;

/// Grid used for all cross-checks unless overridden.
pub const STANDARD_GRID: [f64; 8] = [0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

fn check_theta(theta: f64) -> Result<()> {
    if theta >= 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "theta",
            expected: "finite and >= 0",
            value: theta,
        })
    }
}

/// `φ_F(θ)`, the Laplace-Stieltjes transform of the inter-arrival time.
pub fn phi_f(model: &DsppModel, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(phi_f_unchecked(model, theta))
}

fn phi_f_unchecked(model: &DsppModel, theta: f64) -> f64 {
    let (lambda, k) = (model.lambda(), model.k());
    lambda / (lambda + theta + k * (1.0 - model.off().lst_unchecked(theta)))
}

/// `φ_F` continued to complex `s` with `Re(s) > 0`.
pub fn phi_f_complex(model: &DsppModel, s: Complex64) -> Complex64 {
    let (lambda, k) = (model.lambda(), model.k());
    let one = Complex64::new(1.0, 0.0);
    lambda / (s + lambda + (one - model.off().lst_complex(s)) * k)
}

/// `μ = (1 + k E[Y]) / λ`.
pub fn mean_interarrival(model: &DsppModel) -> Result<f64> {
    Ok((1.0 + model.k() * model.off().finite_mean()?) / model.lambda())
}

/// `E[T^2] = φ_F''(0) = 2 (1 + k E[Y])^2 / λ^2 + k E[Y^2] / λ`.
pub fn interarrival_second_moment(model: &DsppModel) -> Result<f64> {
    let (lambda, k) = (model.lambda(), model.k());
    let d1 = 1.0 + k * model.off().finite_mean()?;
    Ok(2.0 * d1 * d1 / (lambda * lambda) + k * model.off().second_moment() / lambda)
}

/// Recovers `φ_G(θ) = 1 + (λ + θ)/k - λ / (k φ_F(θ))` from values of `φ_F`.
pub fn recover_phi_g(phi_f: impl Fn(f64) -> f64, lambda: f64, k: f64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let value = phi_f(theta);
    if value == 0.0 {
        return Err(Error::DivisionByZero { theta });
    }
    Ok(1.0 + (lambda + theta) / k - lambda / (k * value))
}

/// [`recover_phi_g`] applied pointwise to a tabulated `φ_F`.
pub fn recover_phi_g_grid(phi_f: &TransformGrid, lambda: f64, k: f64) -> Result<TransformGrid> {
    let values = phi_f
        .thetas
        .iter()
        .zip(&phi_f.values)
        .map(|(&theta, &v)| recover_phi_g(|_| v, lambda, k, theta))
        .collect::<Result<Vec<_>>>()?;
    TransformGrid::new(phi_f.thetas.clone(), values, None)
}

/// Transform of the stationary residual time, `(1 - φ_F(θ)) / (θ μ)`.
pub fn residual_lst(model: &DsppModel, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let mu = mean_interarrival(model)?;
    if theta < SMALL_THETA {
        // mean residual time is E[T^2] / (2 μ)
        return Ok(1.0 - theta * interarrival_second_moment(model)? / (2.0 * mu));
    }
    Ok((1.0 - phi_f_unchecked(model, theta)) / (theta * mu))
}

/// The residual-time transform assembled from the two starting states of the
/// intensity, weighted by their stationary probabilities:
///
/// ```text
/// [(1 - φ_G) φ_F / (-θ φ_G'(0))] · [-φ_G'(0) / (1/k - φ_G'(0))]
///     + φ_F · [(1/k) / (1/k - φ_G'(0))]
/// ```
///
/// with `φ_G'(0) = -E[Y]`. Needs `E[Y] > 0`.
pub fn residual_lst_decomposed(model: &DsppModel, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    let off = model.off();
    let mean_off = off.finite_mean()?;
    if mean_off <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let slope = -mean_off;
    let on_mean = 1.0 / model.k();
    let phi = phi_f_unchecked(model, theta);
    let off_residual = if theta < SMALL_THETA {
        1.0 - theta * off.second_moment() / (2.0 * mean_off)
    } else {
        (1.0 - off.lst_unchecked(theta)) / (-theta * slope)
    };
    let p_off = -slope / (on_mean - slope);
    let p_on = on_mean / (on_mean - slope);
    Ok(off_residual * phi * p_off + phi * p_on)
}

/// One run of the Abate-Whitt Euler algorithm with `m` terms of binomial
/// averaging: `(10^{m/3} / t) Σ_{j=0}^{2m} η_j Re f̂((m ln 10 / 3 + iπj) / t)`.
fn euler_inversion(transform: &impl Fn(Complex64) -> Complex64, t: f64, m: usize) -> f64 {
    let a = m as f64 * std::f64::consts::LN_10 / 3.0;
    let scale = 0.5f64.powi(m as i32);
    let mut xi = vec![1.0; 2 * m + 1];
    xi[0] = 0.5;
    xi[2 * m] = scale;
    let mut binom = 1.0;
    for j in 1..m {
        binom *= (m - j + 1) as f64 / j as f64;
        xi[2 * m - j] = xi[2 * m - j + 1] + scale * binom;
    }
    let sum: f64 = xi
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let s = Complex64::new(a, std::f64::consts::PI * j as f64) / t;
            sign * x * transform(s).re
        })
        .sum();
    10f64.powf(m as f64 / 3.0) / t * sum
}

/// Term counts for the two Euler runs that must agree.
const EULER_TERMS: (usize, usize) = (14, 18);
/// Largest tolerated disagreement between the two runs.
pub const INVERSION_TOL: f64 = 1e-6;
/// Tail mass of the failure count left out of the atomic series.
const SERIES_TAIL: f64 = 1e-13;
/// Atom-sum probabilities below this are dropped; their total is tracked.
const SERIES_PRUNE: f64 = 1e-18;
/// Budget on the number of (shift, failure count) terms in the atomic series.
const SERIES_MAX_TERMS: usize = 2_000_000;

/// The inter-arrival distribution function `F`, recovered from `φ_F`.
///
/// Two routes, picked by the shape of `G`:
///
/// * `G` without positive atoms: `φ_F(s) / s` is inverted numerically with
///   the Abate-Whitt Euler algorithm. Two runs with different term counts
///   must agree to [`INVERSION_TOL`].
/// * `G` with positive atoms (Deterministic, Empirical): the transform is a
///   series in `φ_G(s)^n`, each term an Erlang transform times a sum of
///   shifts `e^{-sc}`. Every term is inverted exactly as a shifted Erlang
///   CDF and the series is truncated once the left-out mass is below
///   `1e-13`. Numerical inversion does not converge on the kinks those
///   shifts put into `F`.
#[derive(Debug, Clone)]
pub struct InterarrivalCdf {
    model: DsppModel,
    route: CdfRoute,
}

#[derive(Debug, Clone)]
enum CdfRoute {
    Euler,
    AtomSeries {
        rate: f64,
        /// Ascending shifts, each with `(n, P(N = n) P(S_n = shift))` pairs
        /// ordered by `n`.
        terms: Vec<(f64, Vec<(usize, f64)>)>,
    },
}

impl InterarrivalCdf {
    pub fn new(model: &DsppModel) -> Result<Self> {
        let atoms = match model.off() {
            OffTimeDistribution::Deterministic { duration } => Some(vec![(*duration, 1.0)]),
            OffTimeDistribution::Empirical(e) if e.values().iter().any(|&y| y > 0.0) => {
                let n = e.values().len() as f64;
                let mut atoms: Vec<(f64, f64)> = Vec::new();
                for &y in e.values() {
                    match atoms.last_mut() {
                        Some((v, w)) if *v == y => *w += 1.0 / n,
                        _ => atoms.push((y, 1.0 / n)),
                    }
                }
                Some(atoms)
            }
            _ => None,
        };
        let route = match atoms {
            None => CdfRoute::Euler,
            Some(atoms) => atom_series(model, &atoms)?,
        };
        Ok(Self {
            model: model.clone(),
            route,
        })
    }

    /// `F(t)` for `t > 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain {
                what: "t",
                expected: "finite and > 0",
                value: t,
            });
        }
        match &self.route {
            CdfRoute::Euler => {
                let transform = |s: Complex64| phi_f_complex(&self.model, s) / s;
                let coarse = euler_inversion(&transform, t, EULER_TERMS.0);
                let fine = euler_inversion(&transform, t, EULER_TERMS.1);
                let gap = (coarse - fine).abs();
                if gap.is_nan() || gap > INVERSION_TOL {
                    return Err(Error::ConvergenceFailure {
                        t: Some(t),
                        detail: format!(
                            "Euler runs with {} and {} terms gave {coarse} and {fine} (gap {gap:.3e})",
                            EULER_TERMS.0, EULER_TERMS.1
                        ),
                    });
                }
                Ok(fine.clamp(0.0, 1.0))
            }
            CdfRoute::AtomSeries { rate, terms } => {
                let mut total = 0.0;
                for (shift, coefs) in terms {
                    if *shift >= t {
                        break;
                    }
                    total += shifted_erlang_sum(*rate, t - shift, coefs);
                }
                Ok(total.clamp(0.0, 1.0))
            }
        }
    }
}

/// `Σ coef · P(Erlang(n + 1, rate) <= x)` over `(n, coef)` sorted by `n`.
fn shifted_erlang_sum(rate: f64, x: f64, coefs: &[(usize, f64)]) -> f64 {
    let ax = rate * x;
    let log_ax = ax.ln();
    // running Poisson(ax) terms in log space, so large ax cannot underflow
    let mut log_term = -ax;
    let mut below = log_term.exp();
    let mut j = 0;
    let mut total = 0.0;
    for &(n, coef) in coefs {
        while j < n {
            j += 1;
            log_term += log_ax - (j as f64).ln();
            below += log_term.exp();
        }
        total += coef * (1.0 - below).max(0.0);
    }
    total
}

fn atom_series(model: &DsppModel, atoms: &[(f64, f64)]) -> Result<CdfRoute> {
    let (lambda, k) = (model.lambda(), model.k());
    let rate = lambda + k;
    let success = lambda / rate;
    let failure = k / rate;
    let max_n = if failure <= 0.0 {
        0
    } else {
        (SERIES_TAIL.ln() / failure.ln()).ceil().max(0.0) as usize
    };
    let give_up = |terms: usize| Error::ConvergenceFailure {
        t: None,
        detail: format!(
            "atomic series needs more than {SERIES_MAX_TERMS} terms ({terms} so far, {max_n} failure counts)"
        ),
    };

    let mut pmf: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    let mut raw: Vec<(f64, usize, f64)> = Vec::new();
    let mut weight_n = success;
    for n in 0..=max_n {
        raw.extend(pmf.iter().map(|&(c, p)| (c, n, weight_n * p)));
        if raw.len() > SERIES_MAX_TERMS {
            return Err(give_up(raw.len()));
        }
        weight_n *= failure;
        if n < max_n {
            if raw.len() + pmf.len() * atoms.len() > SERIES_MAX_TERMS {
                return Err(give_up(raw.len() + pmf.len() * atoms.len()));
            }
            let mut next: Vec<(f64, f64)> = pmf
                .iter()
                .flat_map(|&(c, p)| atoms.iter().map(move |&(y, w)| (c + y, p * w)))
                .filter(|&(_, p)| p >= SERIES_PRUNE)
                .collect();
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            pmf = merge_close(next);
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut terms: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    for (c, n, coef) in raw {
        match terms.last_mut() {
            Some((shift, coefs)) if same_shift(*shift, c) => coefs.push((n, coef)),
            _ => terms.push((c, vec![(n, coef)])),
        }
    }
    for (_, coefs) in &mut terms {
        coefs.sort_by_key(|&(n, _)| n);
    }
    Ok(CdfRoute::AtomSeries { rate, terms })
}

fn same_shift(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

/// Merges sorted `(shift, prob)` pairs whose shifts differ only by roundoff.
fn merge_close(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (c, p) in sorted {
        match out.last_mut() {
            Some((shift, prob)) if same_shift(*shift, c) => *prob += p,
            _ => out.push((c, p)),
        }
    }
    out
}

/// `F(t)` by inverting `φ_F`; see [`InterarrivalCdf`] for the method.
/// Build an [`InterarrivalCdf`] directly when evaluating many points.
pub fn invert_lst_to_cdf(model: &DsppModel, t: f64) -> Result<f64> {
    InterarrivalCdf::new(model)?.eval(t)
}

/// A tabulated transform, optionally with per-point standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformGrid {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl TransformGrid {
    pub fn new(thetas: Vec<f64>, values: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        if thetas.len() != values.len() || stderr.as_ref().is_some_and(|s| s.len() != thetas.len()) {
            return Err(Error::invalid("values", "length does not match thetas"));
        }
        validate_thetas(&thetas)?;
        Ok(Self { thetas, values, stderr })
    }

    /// Tabulates `f` on `thetas`.
    pub fn tabulate(thetas: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        validate_thetas(thetas)?;
        let values = thetas.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            thetas: thetas.to_vec(),
            values,
            stderr: None,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// `theta,value[,stderr]` with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        match &self.stderr {
            None => csvfmt::write_rows(
                out,
                "theta,value",
                self.thetas.iter().zip(&self.values).map(|(&t, &v)| vec![t, v]),
            ),
            Some(se) => csvfmt::write_rows(
                out,
                "theta,value,stderr",
                self.thetas
                    .iter()
                    .zip(&self.values)
                    .zip(se)
                    .map(|((&t, &v), &s)| vec![t, v, s]),
            ),
        }
    }

    /// Reads what [`Self::write_csv`] writes. A `stderr` column is optional.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let bad = |reason: String| Error::invalid("csv", reason);
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(ti), Some(vi)) = (col("theta"), col("value")) else {
            return Err(bad(format!("header must contain theta,value; got {:?}", headers.iter().collect::<Vec<_>>())));
        };
        let si = col("stderr");
        let (mut thetas, mut values, mut stderr) = (Vec::new(), Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                let raw = record.get(i).ok_or_else(|| bad(format!("row {}: missing column {i}", row + 1)))?;
                raw.parse::<f64>()
                    .map_err(|_| bad(format!("row {}: `{raw}` is not a number", row + 1)))
            };
            thetas.push(field(ti)?);
            values.push(field(vi)?);
            if let Some(si) = si {
                stderr.push(field(si)?);
            }
        }
        if thetas.is_empty() {
            return Err(bad("no data rows".into()));
        }
        Self::new(thetas, values, si.map(|_| stderr))
    }
}

fn validate_thetas(thetas: &[f64]) -> Result<()> {
    if let Some(&bad) = thetas.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Domain {
            what: "theta",
            expected: "finite and >= 0",
            value: bad,
        });
    }
    if thetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("thetas", "must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `φ(0) != 1`.
    ValueAtZero,
    /// Value outside `(0, 1]`.
    Range,
    /// Value increases with `θ`.
    Monotonicity,
    /// Negative second divided difference.
    Convexity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub theta: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LstDiagnostics {
    pub violations: Vec<Violation>,
}

impl LstDiagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const VALUE_TOL: f64 = 1e-9;
const CONVEXITY_TOL: f64 = 1e-9;

/// Spot-checks the necessary conditions for `grid` to be a Laplace-Stieltjes
/// transform of a probability distribution on `[0, ∞)`. Never fails; the
/// result lists every violation found.
pub fn check_valid_lst(grid: &TransformGrid) -> LstDiagnostics {
    let mut violations = Vec::new();
    let (t, v) = (&grid.thetas, &grid.values);
    for (&theta, &value) in t.iter().zip(v) {
        if theta == 0.0 && (value - 1.0).abs() > VALUE_TOL {
            violations.push(Violation {
                kind: ViolationKind::ValueAtZero,
                theta,
                detail: format!("value at 0 is {value}, expected 1"),
            });
        }
        if !(value > 0.0 && value <= 1.0 + VALUE_TOL) {
            violations.push(Violation {
                kind: ViolationKind::Range,
                theta,
                detail: format!("value {value} outside (0, 1]"),
            });
        }
    }
    for i in 1..t.len() {
        if v[i] > v[i - 1] + VALUE_TOL {
            violations.push(Violation {
                kind: ViolationKind::Monotonicity,
                theta: t[i],
                detail: format!("value rises from {} to {}", v[i - 1], v[i]),
            });
        }
    }
    for i in 2..t.len() {
        let left = (v[i - 1] - v[i - 2]) / (t[i - 1] - t[i - 2]);
        let right = (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
        let second = (right - left) / (t[i] - t[i - 2]);
        if second < -CONVEXITY_TOL {
            violations.push(Violation {
                kind: ViolationKind::Convexity,
                theta: t[i - 1],
                detail: format!("second divided difference {second:.3e} < 0"),
            });
        }
    }
    LstDiagnostics { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_g() -> DsppModel {
        DsppModel::new(2.0, 1.0, OffTimeDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn poisson(lambda: f64) -> DsppModel {
        DsppModel::new(lambda, 1.0, OffTimeDistribution::degenerate()).unwrap()
    }

    fn shipped_models() -> Vec<DsppModel> {
        let g = [
            OffTimeDistribution::degenerate(),
            OffTimeDistribution::deterministic(1.0).unwrap(),
            OffTimeDistribution::exponential(1.0).unwrap(),
            OffTimeDistribution::gamma(2.0, 4.0).unwrap(),
            OffTimeDistribution::hyperexponential(vec![0.4, 0.6], vec![1.0, 3.0]).unwrap(),
            OffTimeDistribution::empirical(vec![0.0, 0.5, 1.0, 2.5]).unwrap(),
        ];
        g.into_iter().map(|g| DsppModel::new(2.0, 1.0, g).unwrap()).collect()
    }

    #[test]
    fn phi_f_hand_values() {
        assert_eq!(phi_f(&poisson(2.0), 3.0).unwrap(), 0.4);
        assert_relative_eq!(phi_f(&exp_g(), 1.0).unwrap(), 4.0 / 7.0, epsilon = 1e-15);
        for m in shipped_models() {
            assert_eq!(phi_f(&m, 0.0).unwrap(), 1.0);
        }
        assert!(matches!(phi_f(&exp_g(), -1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn mean_hand_values() {
        assert_eq!(mean_interarrival(&poisson(2.0)).unwrap(), 0.5);
        assert_eq!(mean_interarrival(&exp_g()).unwrap(), 1.0);
    }

    #[test]
    fn mean_matches_central_difference() {
        let h = 1e-5;
        for m in shipped_models() {
            // φ_F(-h) is not an LST value; use the complex continuation on the real axis
            let plus = phi_f(&m, h).unwrap();
            let minus = phi_f_complex(&m, Complex64::new(-h, 0.0)).re;
            let slope = -(plus - minus) / (2.0 * h);
            assert_relative_eq!(slope, mean_interarrival(&m).unwrap(), max_relative = 1e-6);
        }
    }

    #[test]
    fn second_moment_matches_finite_difference() {
        let h = 1e-4;
        for m in shipped_models() {
            let f = |x: f64| phi_f_complex(&m, Complex64::new(x, 0.0)).re;
            let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
            assert_relative_eq!(second, interarrival_second_moment(&m).unwrap(), max_relative = 1e-5);
        }
    }

    #[test]
    fn recover_hand_values() {
        assert_eq!(recover_phi_g(|_| 1.0, 3.0, 0.7, 0.0).unwrap(), 1.0);
        let m = exp_g();
        let got = recover_phi_g(|t| phi_f(&m, t).unwrap(), 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(got, 0.5, epsilon = 1e-15);
        assert_eq!(
            recover_phi_g(|_| 0.0, 1.0, 1.0, 2.0),
            Err(Error::DivisionByZero { theta: 2.0 })
        );
    }

    #[test]
    fn recover_round_trip() {
        for m in shipped_models() {
            for &t in &STANDARD_GRID {
                let got = recover_phi_g(|x| phi_f(&m, x).unwrap(), m.lambda(), m.k(), t).unwrap();
                assert!((got - m.off().lst(t).unwrap()).abs() <= 1e-12, "{} {t}", m.off().family());
            }
        }
    }

    #[test]
    fn residual_hand_values() {
        assert_relative_eq!(residual_lst(&poisson(2.0), 3.0).unwrap(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(residual_lst(&exp_g(), 1.0).unwrap(), 3.0 / 7.0, epsilon = 1e-15);
        assert_relative_eq!(residual_lst_decomposed(&exp_g(), 1.0).unwrap(), 3.0 / 7.0, epsilon = 1e-15);
        assert_eq!(residual_lst(&exp_g(), 0.0).unwrap(), 1.0);
        assert_eq!(residual_lst_decomposed(&exp_g(), 0.0).unwrap(), 1.0);
        assert_eq!(residual_lst_decomposed(&poisson(2.0), 1.0), Err(Error::ZeroMean));
    }

    #[test]
    fn residual_tends_to_one_continuously() {
        for m in shipped_models() {
            let below = residual_lst(&m, 0.99 * SMALL_THETA).unwrap();
            let above = residual_lst(&m, 1.01 * SMALL_THETA).unwrap();
            assert!((below - 1.0).abs() < 1e-7 && (above - 1.0).abs() < 1e-7);
            let mut prev = residual_lst(&m, 1e-6).unwrap();
            assert!(prev <= 1.0);
            for t in [1e-4, 1e-2, 0.1, 1.0] {
                let v = residual_lst(&m, t).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn two_case_decomposition_matches() {
        for m in shipped_models().into_iter().skip(1) {
            for &t in &STANDARD_GRID {
                let a = residual_lst(&m, t).unwrap();
                let b = residual_lst_decomposed(&m, t).unwrap();
                assert!((a - b).abs() <= 1e-10, "{} θ={t}: {a} vs {b}", m.off().family());
            }
        }
    }

    #[test]
    fn inversion_poisson() {
        let m = poisson(1.0);
        let f = invert_lst_to_cdf(&m, 1.0).unwrap();
        assert!((f - (1.0 - (-1.0f64).exp())).abs() <= 1e-6);
        assert!(invert_lst_to_cdf(&m, 1e-8).unwrap() <= 1e-6);
        assert!(invert_lst_to_cdf(&m, 0.0).is_err());
    }

    #[test]
    fn inversion_is_monotone_and_reaches_one() {
        for m in shipped_models() {
            let mu = mean_interarrival(&m).unwrap();
            let mut prev = 0.0;
            for i in 1..=40 {
                let t = i as f64 * 0.5 * mu;
                let f = invert_lst_to_cdf(&m, t).unwrap();
                assert!(f >= prev - 1e-7, "{} t={t}", m.off().family());
                prev = f;
            }
            assert!(invert_lst_to_cdf(&m, 20.0 * mu).unwrap() >= 0.999);
        }
    }

    /// Partial fractions of `2(1+θ)/((2+θ)(1+θ)+θ)`: poles at `-2 ± √2`, both
    /// with residue weight 1/2, so `F(t) = 1 - (e^{r1 t} + e^{r2 t}) / 2`.
    fn exp_g_cdf(t: f64) -> f64 {
        let r1 = -2.0 + 2f64.sqrt();
        let r2 = -2.0 - 2f64.sqrt();
        1.0 - 0.5 * ((r1 * t).exp() + (r2 * t).exp())
    }

    #[test]
    fn inversion_matches_partial_fractions() {
        let m = exp_g();
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            assert!((invert_lst_to_cdf(&m, t).unwrap() - exp_g_cdf(t)).abs() <= 1e-6, "t={t}");
        }
    }

    #[test]
    fn atomic_series_agrees_with_euler_where_euler_converges() {
        let models = [
            DsppModel::new(2.0, 1.0, OffTimeDistribution::deterministic(1.0).unwrap()).unwrap(),
            DsppModel::new(1.5, 2.5, OffTimeDistribution::empirical(vec![0.0, 0.5, 1.0, 2.5]).unwrap()).unwrap(),
        ];
        for m in models {
            let cdf = InterarrivalCdf::new(&m).unwrap();
            assert!(matches!(cdf.route, CdfRoute::AtomSeries { .. }));
            let transform = |s: Complex64| phi_f_complex(&m, s) / s;
            let mut compared = 0;
            for i in 1..400 {
                let t = i as f64 * 0.0137;
                let a = euler_inversion(&transform, t, 14);
                let b = euler_inversion(&transform, t, 18);
                if (a - b).abs() < 1e-7 {
                    compared += 1;
                    assert!((cdf.eval(t).unwrap() - b).abs() <= 1e-6, "{} t={t}", m.off().family());
                }
            }
            assert!(compared >= 30, "{compared}");
        }
    }

    #[test]
    fn atomic_series_budget() {
        // many distinct irrational atoms with slowly decaying failure count
        let samples: Vec<f64> = (1..200).map(|i| (i as f64).sqrt()).collect();
        let m = DsppModel::new(0.1, 10.0, OffTimeDistribution::empirical(samples).unwrap()).unwrap();
        assert!(matches!(
            InterarrivalCdf::new(&m),
            Err(Error::ConvergenceFailure { t: None, .. })
        ));
    }

    #[test]
    fn diagnostics() {
        let shipped = TransformGrid::tabulate(&STANDARD_GRID, |t| phi_f(&exp_g(), t)).unwrap();
        assert!(check_valid_lst(&shipped).is_valid());
        let ones = TransformGrid::new(vec![0.0, 1.0, 2.0], vec![1.0; 3], None).unwrap();
        assert!(check_valid_lst(&ones).is_valid());
        let rising = TransformGrid::new(vec![0.0, 1.0, 2.0], vec![0.5, 0.6, 0.7], None).unwrap();
        let d = check_valid_lst(&rising);
        assert!(d.violations.iter().any(|v| v.kind == ViolationKind::Monotonicity));
        assert!(d.violations.iter().any(|v| v.kind == ViolationKind::ValueAtZero));
        let concave = TransformGrid::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.9, 0.5], None).unwrap();
        assert_eq!(check_valid_lst(&concave).violations[0].kind, ViolationKind::Convexity);
        let negative = TransformGrid::new(vec![1.0], vec![-0.1], None).unwrap();
        assert_eq!(check_valid_lst(&negative).violations[0].kind, ViolationKind::Range);
    }

    #[test]
    fn grid_validation() {
        assert!(TransformGrid::new(vec![0.0, 0.0], vec![1.0, 1.0], None).is_err());
        assert!(TransformGrid::new(vec![-1.0], vec![1.0], None).is_err());
        assert!(TransformGrid::new(vec![0.0], vec![1.0, 2.0], None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = TransformGrid::new(vec![0.0, 0.5], vec![1.0, 4.0 / 7.0], Some(vec![0.0, 1e-3])).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"theta,value,stderr\n"));
        assert_eq!(TransformGrid::read_csv(&buf[..]).unwrap(), g);
        assert!(TransformGrid::read_csv(&b"theta,value\n0,abc\n"[..]).is_err());
        assert!(TransformGrid::read_csv(&b"x,y\n0,1\n"[..]).is_err());
    }
}
