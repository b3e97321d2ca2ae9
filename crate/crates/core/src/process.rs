//! The on-off Cox process and its two simulation routes.
//!
//! The intensity `Λ(t)` alternates between `λ` for `Exp(k)` on-periods and
//! `0` for off-periods drawn from `G`. Events are produced either by sampling
//! a path of `Λ` and thinning it (the point-process definition), or directly
//! by the renewal construction: a geometric number of failed on-periods, each
//! followed by an off-period, then a successful on-period.

use std::io::{self, Write};
use std::iter::Peekable;

use serde::Serialize;

use crate::csvfmt;
use crate::distributions::OffTimeDistribution;
use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::transforms;

/// The triple `(λ, k, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DsppModel {
    lambda: f64,
    k: f64,
    off: OffTimeDistribution,
}

impl DsppModel {
    pub fn new(lambda: f64, k: f64, off: OffTimeDistribution) -> Result<Self> {
        for (field, v) in [("lambda", lambda), ("k", k)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self { lambda, k, off })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn off(&self) -> &OffTimeDistribution {
        &self.off
    }

    /// Same model with a different on-period rate.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(self.lambda, k, self.off.clone())
    }

    /// Mean inter-arrival time `(1 + k E[Y]) / λ`.
    pub fn mu(&self) -> Result<f64> {
        transforms::mean_interarrival(self)
    }

    /// Stationary probability that the intensity is at `λ`: `1 / (1 + k E[Y])`.
    pub fn p_on(&self) -> Result<f64> {
        Ok(1.0 / (1.0 + self.k * self.off.finite_mean()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    On,
    Off,
}

impl Level {
    fn flip(self) -> Self {
        match self {
            Level::On => Level::Off,
            Level::Off => Level::On,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub level: Level,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// A fresh on-period starts at time 0, as right after an event.
    FreshOn,
    /// The on-off process is in equilibrium at time 0.
    Stationary,
}

/// Alternating on/off segments covering at least `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPath {
    pub lambda: f64,
    pub init: Level,
    pub segments: Vec<Segment>,
    pub horizon: f64,
}

impl IntensityPath {
    /// Total time spent at `level` within `[0, horizon)`.
    pub fn time_at(&self, level: Level) -> f64 {
        let mut start = 0.0;
        let mut total = 0.0;
        for seg in &self.segments {
            if start >= self.horizon {
                break;
            }
            let end = (start + seg.duration).min(self.horizon);
            if seg.level == level {
                total += end - start;
            }
            start += seg.duration;
        }
        total
    }

    /// `level,duration` rows, level written as the intensity value.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let lambda = self.lambda;
        csvfmt::write_rows(
            out,
            "level,duration",
            self.segments.iter().map(|s| {
                let level = match s.level {
                    Level::On => lambda,
                    Level::Off => 0.0,
                };
                vec![level, s.duration]
            }),
        )
    }
}

/// Strictly increasing event epochs in `[0, horizon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub events: Vec<f64>,
    pub horizon: f64,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn rate(&self) -> f64 {
        self.events.len() as f64 / self.horizon
    }

    /// Gaps between consecutive events, the first measured from 0.
    pub fn gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.events
            .iter()
            .map(|&t| {
                let g = t - prev;
                prev = t;
                g
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        csvfmt::write_rows(out, "epoch", self.events.iter().map(|&t| vec![t]))
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "horizon",
            expected: "finite and > 0",
            value: horizon,
        })
    }
}

/// Unbounded stream of intensity segments. Owns its random stream.
///
/// Draw order: for `Stationary`, one uniform picks the initial level, then
/// one draw for the residual of that level (an `Exp(k)` on-time or an
/// equilibrium off-time). Every later segment takes one draw for an on-time
/// or `G`'s draws for an off-time.
#[derive(Debug, Clone)]
pub struct SegmentSampler<'a> {
    model: &'a DsppModel,
    rng: Stream,
    next_level: Level,
    first: Option<Segment>,
}

impl<'a> SegmentSampler<'a> {
    pub fn new(model: &'a DsppModel, init: InitMode, mut rng: Stream) -> Result<Self> {
        let first = match init {
            InitMode::FreshOn => None,
            InitMode::Stationary => {
                let p_on = model.p_on()?;
                let seg = if rng.uniform() < p_on {
                    Segment {
                        level: Level::On,
                        duration: rng.exponential(model.k),
                    }
                } else {
                    Segment {
                        level: Level::Off,
                        duration: model.off.equilibrium_sample(&mut rng)?,
                    }
                };
                Some(seg)
            }
        };
        let next_level = first.map_or(Level::On, |s| s.level.flip());
        Ok(Self {
            model,
            rng,
            next_level,
            first,
        })
    }
}

impl Iterator for SegmentSampler<'_> {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        if let Some(seg) = self.first.take() {
            return Some(seg);
        }
        let level = self.next_level;
        self.next_level = level.flip();
        let duration = match level {
            Level::On => self.rng.exponential(self.model.k),
            Level::Off => self.model.off.sample(&mut self.rng),
        };
        Some(Segment { level, duration })
    }
}

/// Samples `Λ` on `[0, horizon)`. Consumes one draw of `rng` (a fork that
/// drives a [`SegmentSampler`]).
pub fn sample_intensity_path(
    model: &DsppModel,
    horizon: f64,
    init: InitMode,
    rng: &mut Stream,
) -> Result<IntensityPath> {
    check_horizon(horizon)?;
    let mut sampler = SegmentSampler::new(model, init, rng.fork())?;
    let mut segments = Vec::new();
    let mut covered = 0.0;
    while covered < horizon {
        let seg = sampler.next().expect("segment sampler is unbounded");
        covered += seg.duration;
        segments.push(seg);
    }
    Ok(IntensityPath {
        lambda: model.lambda,
        init: segments[0].level,
        segments,
        horizon,
    })
}

/// Poisson events of rate `λ` on the on-time of a segment sequence.
///
/// Within each on-run, epochs are generated by sequential `Exp(λ)` gaps, one
/// draw each. Off-segments of zero duration are absorbed into the
/// surrounding on-run.
pub struct ThinnedEvents<S: Iterator<Item = Segment>> {
    segments: Peekable<S>,
    rng: Stream,
    lambda: f64,
    /// Start of the next unread segment.
    clock: f64,
    /// Current position inside the active on-run and the run's end.
    cursor: f64,
    run_end: f64,
}

impl<S: Iterator<Item = Segment>> ThinnedEvents<S> {
    pub fn new(segments: S, lambda: f64, rng: Stream) -> Self {
        Self {
            segments: segments.peekable(),
            rng,
            lambda,
            clock: 0.0,
            cursor: 0.0,
            run_end: 0.0,
        }
    }

    /// Advances to the next on-run; false when segments are exhausted.
    fn next_run(&mut self) -> bool {
        loop {
            let Some(seg) = self.segments.next() else {
                return false;
            };
            let start = self.clock;
            self.clock += seg.duration;
            if seg.level == Level::Off {
                continue;
            }
            self.cursor = start;
            self.run_end = self.clock;
            return true;
        }
    }

    /// Extends the active on-run across an `off(0), on(d)` pair, if one follows.
    fn extend_run(&mut self) -> bool {
        if !matches!(self.segments.peek(), Some(s) if s.level == Level::Off && s.duration == 0.0) {
            return false;
        }
        self.segments.next();
        match self.segments.next() {
            Some(on) => {
                self.clock += on.duration;
                self.run_end = self.clock;
                true
            }
            None => false,
        }
    }
}

impl<S: Iterator<Item = Segment>> Iterator for ThinnedEvents<S> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        loop {
            if self.cursor < self.run_end {
                let t = self.cursor + self.rng.exponential(self.lambda);
                loop {
                    if t < self.run_end {
                        self.cursor = t;
                        return Some(t);
                    }
                    if !self.extend_run() {
                        break;
                    }
                }
                self.cursor = self.run_end;
            }
            if !self.next_run() {
                return None;
            }
        }
    }
}

/// Thins a finished path. Consumes one draw of `rng`.
pub fn thin_events_on_path(path: &IntensityPath, lambda: f64, rng: &mut Stream) -> EventStream {
    let events = ThinnedEvents::new(path.segments.iter().copied(), lambda, rng.fork())
        .take_while(|&t| t < path.horizon)
        .collect();
    EventStream {
        events,
        horizon: path.horizon,
    }
}

/// Time from an event to the next one, read off a freshly sampled and thinned
/// intensity path. Consumes two draws of `rng` (path fork, thinning fork).
pub fn path_interarrival(model: &DsppModel, rng: &mut Stream) -> f64 {
    let segments =
        SegmentSampler::new(model, InitMode::FreshOn, rng.fork()).expect("FreshOn cannot fail");
    ThinnedEvents::new(segments, model.lambda, rng.fork())
        .next()
        .expect("on-periods recur, so an event always arrives")
}

/// Number of failed on-periods before the first success, `Geom(λ/(λ+k)) - 1`
/// on `{0, 1, ...}`. One draw.
fn failures_before_success(lambda: f64, k: f64, rng: &mut Stream) -> u64 {
    let q = k / (lambda + k);
    (rng.uniform_open().ln() / q.ln()).floor() as u64
}

/// One inter-arrival time from the renewal construction
/// `T = Σ_{i=1..N} (X_i + Y_i) + X_0`, with `X ~ Exp(λ + k)` and `Y ~ G`.
///
/// Draw order: one uniform for `N`, then `X_i` followed by `Y_i` for each
/// failure, then `X_0`.
pub fn sample_interarrival(model: &DsppModel, rng: &mut Stream) -> f64 {
    let n = failures_before_success(model.lambda, model.k, rng);
    let exit_rate = model.lambda + model.k;
    let mut t = 0.0;
    for _ in 0..n {
        t += rng.exponential(exit_rate);
        t += model.off.sample(rng);
    }
    t + rng.exponential(exit_rate)
}

/// Event-started renewal stream on `[0, horizon)`.
pub fn simulate_renewal_stream(model: &DsppModel, horizon: f64, rng: &mut Stream) -> Result<EventStream> {
    check_horizon(horizon)?;
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += sample_interarrival(model, rng);
        if t >= horizon {
            break;
        }
        events.push(t);
    }
    Ok(EventStream { events, horizon })
}

/// Time to the first event seen from a stationary origin.
///
/// One uniform picks the level at time 0. On: a fresh inter-arrival (the
/// remaining on-time is again `Exp(k)`). Off: an equilibrium off-time, then a
/// fresh inter-arrival.
pub fn stationary_first_event_time(model: &DsppModel, rng: &mut Stream) -> Result<f64> {
    let p_on = model.p_on()?;
    if rng.uniform() < p_on {
        Ok(sample_interarrival(model, rng))
    } else {
        let residual = model.off.equilibrium_sample(rng)?;
        Ok(residual + sample_interarrival(model, rng))
    }
}
