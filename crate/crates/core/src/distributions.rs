//! Off-period distributions `G` for the on-off intensity.
//!
//! Each family exposes exactly what the simulators and transform identities
//! need: sampling, the Laplace-Stieltjes transform (real and complex
//! argument), the first two moments, and the equilibrium (integrated-tail)
//! law with density `(1 - G(y)) / E[Y]` that governs the remaining part of an
//! off-period seen from a stationary origin.

use num_complex::Complex64;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::rng::Stream;

const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Absolute tolerance on the duration axis for inverse-CDF bisection.
const BISECTION_TOL: f64 = 1e-12;

/// Family descriptor as it appears in configuration files, e.g.
/// `{"family": "exponential", "rate": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum OffSpec {
    DegenerateAtZero,
    Deterministic { duration: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Hyperexponential { weights: Vec<f64>, rates: Vec<f64> },
    Empirical { samples: Vec<f64> },
}

impl OffSpec {
    pub const FAMILIES: [&'static str; 6] = [
        "degenerate_at_zero",
        "deterministic",
        "exponential",
        "gamma",
        "hyperexponential",
        "empirical",
    ];
}

/// A validated off-time distribution. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum OffTimeDistribution {
    DegenerateAtZero,
    Deterministic { duration: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Hyperexponential(Hyperexponential),
    Empirical(EmpiricalSample),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperexponential {
    weights: Vec<f64>,
    rates: Vec<f64>,
    /// Cumulative weights, for component selection.
    cumulative: Vec<f64>,
    /// Cumulative equilibrium weights `w_i / r_i / E[Y]`.
    equilibrium_cumulative: Vec<f64>,
}

impl Hyperexponential {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

/// An atomic distribution on a stored sample, resampled uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    sorted: Vec<f64>,
    /// `prefix[j]` is the sum of the `j` smallest values.
    prefix: Vec<f64>,
}

impl EmpiricalSample {
    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    fn len(&self) -> f64 {
        self.sorted.len() as f64
    }
}

fn check_rate(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            field,
            format!("must be finite and > 0, got {value}"),
        ))
    }
}

/// Picks the index `i` with `cumulative[i-1] <= u < cumulative[i]`.
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .partition_point(|&c| c <= u)
        .min(cumulative.len() - 1)
}

fn cumsum(xs: impl IntoIterator<Item = f64>) -> Vec<f64> {
    xs.into_iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

impl OffTimeDistribution {
    pub fn new(spec: OffSpec) -> Result<Self> {
        match spec {
            OffSpec::DegenerateAtZero => Ok(Self::DegenerateAtZero),
            OffSpec::Deterministic { duration } => {
                check_rate("duration", duration)?;
                Ok(Self::Deterministic { duration })
            }
            OffSpec::Exponential { rate } => {
                check_rate("rate", rate)?;
                Ok(Self::Exponential { rate })
            }
            OffSpec::Gamma { shape, rate } => {
                check_rate("shape", shape)?;
                check_rate("rate", rate)?;
                Ok(Self::Gamma { shape, rate })
            }
            OffSpec::Hyperexponential { weights, rates } => {
                if weights.is_empty() {
                    return Err(Error::invalid("weights", "must not be empty"));
                }
                if weights.len() != rates.len() {
                    return Err(Error::invalid(
                        "rates",
                        format!(
                            "length {} does not match weights length {}",
                            rates.len(),
                            weights.len()
                        ),
                    ));
                }
                for &w in &weights {
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(Error::invalid(
                            "weights",
                            format!("must be finite and >= 0, got {w}"),
                        ));
                    }
                }
                for &r in &rates {
                    check_rate("rates", r)?;
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::invalid(
                        "weights",
                        format!("must sum to 1, sum is {total}"),
                    ));
                }
                let mean: f64 = weights.iter().zip(&rates).map(|(w, r)| w / r).sum();
                let cumulative = cumsum(weights.iter().copied());
                let equilibrium_cumulative =
                    cumsum(weights.iter().zip(&rates).map(|(w, r)| w / r / mean));
                Ok(Self::Hyperexponential(Hyperexponential {
                    weights,
                    rates,
                    cumulative,
                    equilibrium_cumulative,
                }))
            }
            OffSpec::Empirical { mut samples } => {
                if samples.is_empty() {
                    return Err(Error::invalid("samples", "must not be empty"));
                }
                if let Some(bad) = samples.iter().find(|y| !(y.is_finite() && **y >= 0.0)) {
                    return Err(Error::invalid(
                        "samples",
                        format!("durations must be finite and >= 0, got {bad}"),
                    ));
                }
                samples.sort_by(f64::total_cmp);
                let mut prefix = Vec::with_capacity(samples.len() + 1);
                prefix.push(0.0);
                prefix.extend(cumsum(samples.iter().copied()));
                Ok(Self::Empirical(EmpiricalSample {
                    sorted: samples,
                    prefix,
                }))
            }
        }
    }

    pub fn degenerate() -> Self {
        Self::DegenerateAtZero
    }

    pub fn deterministic(duration: f64) -> Result<Self> {
        Self::new(OffSpec::Deterministic { duration })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(OffSpec::Exponential { rate })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::new(OffSpec::Gamma { shape, rate })
    }

    pub fn hyperexponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        Self::new(OffSpec::Hyperexponential { weights, rates })
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        Self::new(OffSpec::Empirical { samples })
    }

    /// The descriptor this distribution was built from (Empirical comes back sorted).
    pub fn spec(&self) -> OffSpec {
        match self {
            Self::DegenerateAtZero => OffSpec::DegenerateAtZero,
            Self::Deterministic { duration } => OffSpec::Deterministic {
                duration: *duration,
            },
            Self::Exponential { rate } => OffSpec::Exponential { rate: *rate },
            Self::Gamma { shape, rate } => OffSpec::Gamma {
                shape: *shape,
                rate: *rate,
            },
            Self::Hyperexponential(h) => OffSpec::Hyperexponential {
                weights: h.weights.clone(),
                rates: h.rates.clone(),
            },
            Self::Empirical(e) => OffSpec::Empirical {
                samples: e.sorted.clone(),
            },
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::DegenerateAtZero => "degenerate_at_zero",
            Self::Deterministic { .. } => "deterministic",
            Self::Exponential { .. } => "exponential",
            Self::Gamma { .. } => "gamma",
            Self::Hyperexponential(_) => "hyperexponential",
            Self::Empirical(_) => "empirical",
        }
    }

    /// One draw from `G`.
    ///
    /// Draws consumed: none for the point masses, one for Exponential and
    /// Empirical, two for Hyperexponential (component, then value), and a
    /// variable number for Gamma (rejection sampling).
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match self {
            Self::DegenerateAtZero => 0.0,
            Self::Deterministic { duration } => *duration,
            Self::Exponential { rate } => rng.exponential(*rate),
            Self::Gamma { shape, rate } => rand_distr::Gamma::new(*shape, 1.0 / *rate)
                .expect("validated gamma parameters")
                .sample(rng),
            Self::Hyperexponential(h) => {
                let i = pick(&h.cumulative, rng.uniform());
                rng.exponential(h.rates[i])
            }
            Self::Empirical(e) => {
                let i = ((rng.uniform() * e.len()) as usize).min(e.sorted.len() - 1);
                e.sorted[i]
            }
        }
    }

    /// `E[exp(-theta Y)]` for `theta >= 0`.
    pub fn lst(&self, theta: f64) -> Result<f64> {
        if theta.is_nan() || theta < 0.0 {
            return Err(Error::Domain {
                what: "theta",
                expected: ">= 0",
                value: theta,
            });
        }
        Ok(self.lst_unchecked(theta))
    }

    pub(crate) fn lst_unchecked(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 1.0;
        }
        match self {
            Self::DegenerateAtZero => 1.0,
            Self::Deterministic { duration } => (-theta * duration).exp(),
            Self::Exponential { rate } => rate / (rate + theta),
            Self::Gamma { shape, rate } => (-shape * (theta / rate).ln_1p()).exp(),
            Self::Hyperexponential(h) => h
                .weights
                .iter()
                .zip(&h.rates)
                .map(|(w, r)| w * r / (r + theta))
                .sum::<f64>()
                // weights may sum to 1 + ulp
                .min(1.0),
            Self::Empirical(e) => {
                e.sorted.iter().map(|y| (-theta * y).exp()).sum::<f64>() / e.len()
            }
        }
    }

    /// The transform continued to complex `s` with `Re(s) > 0`.
    pub fn lst_complex(&self, s: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self {
            Self::DegenerateAtZero => one,
            Self::Deterministic { duration } => (-s * duration).exp(),
            Self::Exponential { rate } => *rate / (s + rate),
            Self::Gamma { shape, rate } => (-(s / rate + 1.0).ln() * *shape).exp(),
            Self::Hyperexponential(h) => h
                .weights
                .iter()
                .zip(&h.rates)
                .map(|(w, r)| *w * *r / (s + r))
                .sum(),
            Self::Empirical(e) => {
                e.sorted.iter().map(|y| (-s * y).exp()).sum::<Complex64>() / e.len()
            }
        }
    }

    /// `E[Y]`. Every shipped family has a finite mean; [`Self::finite_mean`]
    /// is the checked accessor for stationary constructions.
    pub fn mean(&self) -> f64 {
        match self {
            Self::DegenerateAtZero => 0.0,
            Self::Deterministic { duration } => *duration,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Hyperexponential(h) => h.weights.iter().zip(&h.rates).map(|(w, r)| w / r).sum(),
            Self::Empirical(e) => e.prefix[e.sorted.len()] / e.len(),
        }
    }

    pub fn finite_mean(&self) -> Result<f64> {
        let m = self.mean();
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::InfiniteMean)
        }
    }

    /// `E[Y^2]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Self::DegenerateAtZero => 0.0,
            Self::Deterministic { duration } => duration * duration,
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
            Self::Hyperexponential(h) => h
                .weights
                .iter()
                .zip(&h.rates)
                .map(|(w, r)| 2.0 * w / (r * r))
                .sum(),
            Self::Empirical(e) => e.sorted.iter().map(|y| y * y).sum::<f64>() / e.len(),
        }
    }

    fn positive_mean(&self) -> Result<f64> {
        let m = self.finite_mean()?;
        if m > 0.0 {
            Ok(m)
        } else {
            Err(Error::ZeroMean)
        }
    }

    /// CDF of the equilibrium law, `(1/E[Y]) * integral_0^y (1 - G(u)) du`.
    pub fn equilibrium_cdf(&self, y: f64) -> Result<f64> {
        let mean = self.positive_mean()?;
        if y <= 0.0 {
            return Ok(0.0);
        }
        let value = match self {
            Self::DegenerateAtZero => unreachable!("zero mean rejected above"),
            Self::Deterministic { duration } => (y / duration).min(1.0),
            Self::Exponential { rate } => -(-rate * y).exp_m1(),
            Self::Gamma { shape, rate } => {
                let x = rate * y;
                (x / shape) * (1.0 - gamma_lr(*shape, x)) + gamma_lr(shape + 1.0, x)
            }
            Self::Hyperexponential(h) => h
                .weights
                .iter()
                .zip(&h.rates)
                .map(|(w, r)| w / r / mean * -(-r * y).exp_m1())
                .sum(),
            Self::Empirical(e) => {
                let j = e.sorted.partition_point(|&v| v < y);
                (e.prefix[j] + (e.sorted.len() - j) as f64 * y) / (e.len() * mean)
            }
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// One draw from the equilibrium law.
    ///
    /// Exponential is its own equilibrium law; Deterministic gives a uniform;
    /// Hyperexponential reweights its components by mean; Empirical inverts
    /// its piecewise-linear integrated tail exactly; Gamma inverts its
    /// integrated tail numerically by bisection. One draw each, except
    /// Hyperexponential which takes two.
    pub fn equilibrium_sample(&self, rng: &mut Stream) -> Result<f64> {
        let mean = self.positive_mean()?;
        Ok(match self {
            Self::DegenerateAtZero => unreachable!("zero mean rejected above"),
            Self::Deterministic { duration } => duration * rng.uniform(),
            Self::Exponential { rate } => rng.exponential(*rate),
            Self::Gamma { .. } => {
                let u = rng.uniform();
                self.invert_equilibrium_by_bisection(u, mean)
            }
            Self::Hyperexponential(h) => {
                let i = pick(&h.equilibrium_cumulative, rng.uniform());
                rng.exponential(h.rates[i])
            }
            Self::Empirical(e) => {
                let n = e.sorted.len();
                let target = rng.uniform() * e.prefix[n];
                // Integrated tail at the j-th order statistic is prefix[j] + (n - j) y_j.
                let tail = |j: usize| e.prefix[j] + (n - j) as f64 * e.sorted[j];
                let (mut lo, mut hi) = (0, n - 1);
                while lo < hi {
                    let mid = (lo + hi) / 2;
                    if tail(mid) < target {
                        lo = mid + 1;
                    } else {
                        hi = mid;
                    }
                }
                let j = lo;
                (target - e.prefix[j]) / (n - j) as f64
            }
        })
    }

    fn invert_equilibrium_by_bisection(&self, u: f64, mean: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let cdf = |y: f64| self.equilibrium_cdf(y).expect("positive mean checked");
        let mut lo = 0.0;
        let mut hi = mean.max(f64::MIN_POSITIVE);
        while cdf(hi) < u {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}
