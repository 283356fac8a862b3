//! Seeded Monte Carlo simulation of phonon-number jumps and of the noisy,
//! binned cavity-frequency readout used to detect them.
//!
//! Thermal transitions form a birth-death chain with up-rate
//! `(ω_m/Q)·n̄·(n+1)` and down-rate `(ω_m/Q)·n·(n̄+1)`; their sum out of level
//! `n` is the thermal decay rate of that level and their stationary law is
//! Bose-Einstein with mean `n̄`. Optionally the two measurement-induced
//! channels out of the ground state (0→2 counter-rotating, 0→1 linear
//! coupling) are added. Sampling is exact in time (competing exponential
//! clocks).
//!
//! Every random stream is a ChaCha20 generator seeded from a `u64`, so
//! results are bit-identical across platforms for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::mechanics::thermal_occupation;
use crate::params::{ExperimentParams, ParamName};
use crate::qnd;

/// Generator used for every random stream; recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng (rand_chacha 0.9) seeded with seed_from_u64";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Channel {
    ThermalUp,
    ThermalDown,
    /// 0 → 2, counter-rotating terms of the quadratic coupling.
    Rwa,
    /// 0 → 1, linear coupling at the residual offset.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    pub n_after: u64,
    pub channel: Channel,
}

/// Transition rates of the phonon-number chain, 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpRates {
    /// Mechanical damping rate `ω_m/Q`.
    pub damping: f64,
    pub n_bar: f64,
    /// Extra 0→2 rate (zero when measurement channels are off).
    pub rwa: f64,
    /// Extra 0→1 rate (zero when off or `x0 = 0`).
    pub linear: f64,
}

impl JumpRates {
    pub fn from_params(p: &ExperimentParams, include_measurement_channels: bool) -> Result<Self> {
        let (rwa, linear) = if include_measurement_channels {
            (
                1.0 / qnd::rwa_lifetime(p)?,
                qnd::linear_lifetime(p)?.map_or(0.0, |t| 1.0 / t),
            )
        } else {
            (0.0, 0.0)
        };
        Ok(JumpRates {
            damping: p.omega_m / p.q,
            n_bar: thermal_occupation(p.temperature, p.omega_m).n_bar,
            rwa,
            linear,
        })
    }

    pub fn up(&self, n: u64) -> f64 {
        self.damping * self.n_bar * (n as f64 + 1.0)
    }

    pub fn down(&self, n: u64) -> f64 {
        self.damping * n as f64 * (self.n_bar + 1.0)
    }

    /// Total rate of leaving level `n`.
    pub fn total_out(&self, n: u64) -> f64 {
        let extra = if n == 0 { self.rwa + self.linear } else { 0.0 };
        self.up(n) + self.down(n) + extra
    }
}

/// A phonon-number path: piecewise constant between events.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpTrajectory {
    pub initial_n: u64,
    pub events: Vec<JumpEvent>,
    pub duration: f64,
    pub seed: u64,
    pub rng: &'static str,
    /// Set when an event cap stopped the simulation early; `duration` is
    /// then the time of the last event.
    pub truncated: bool,
}

/// One constant-`n` stretch of a trajectory. `completed` is false for the
/// final stretch, which is cut off by the end of the simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub n: u64,
    pub completed: bool,
}

impl JumpTrajectory {
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let mut start = 0.0;
        let mut n = self.initial_n;
        let mut events = self.events.iter();
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            match events.next() {
                Some(e) => {
                    let seg = Segment {
                        start,
                        end: e.time,
                        n,
                        completed: true,
                    };
                    start = e.time;
                    n = e.n_after;
                    Some(seg)
                }
                None => {
                    done = true;
                    Some(Segment {
                        start,
                        end: self.duration,
                        n,
                        completed: false,
                    })
                }
            }
        })
    }

    pub fn n_at(&self, t: f64) -> u64 {
        let idx = self.events.partition_point(|e| e.time <= t);
        if idx == 0 {
            self.initial_n
        } else {
            self.events[idx - 1].n_after
        }
    }
}

/// Simulates from `initial_n` with explicit rates.
pub fn simulate_with_rates(rates: &JumpRates, initial_n: u64, duration: f64, seed: u64) -> JumpTrajectory {
    simulate_capped(rates, initial_n, duration, seed, usize::MAX)
}

/// As [`simulate_with_rates`], stopping after `max_events` events.
pub fn simulate_capped(
    rates: &JumpRates,
    initial_n: u64,
    duration: f64,
    seed: u64,
    max_events: usize,
) -> JumpTrajectory {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut t = 0.0;
    let mut n = initial_n;
    let mut events = Vec::new();
    let mut truncated = false;
    loop {
        if events.len() >= max_events {
            truncated = true;
            break;
        }
        let total = rates.total_out(n);
        if !(total > 0.0) {
            break;
        }
        let wait = Exp::new(total).expect("positive rate").sample(&mut rng);
        t += wait;
        if t >= duration {
            break;
        }
        let pick = rng.random::<f64>() * total;
        let up = rates.up(n);
        let down = rates.down(n);
        let (n_next, channel) = if pick < up {
            (n + 1, Channel::ThermalUp)
        } else if pick < up + down {
            (n - 1, Channel::ThermalDown)
        } else if pick < up + down + rates.rwa {
            (n + 2, Channel::Rwa)
        } else {
            (n + 1, Channel::Linear)
        };
        n = n_next;
        events.push(JumpEvent {
            time: t,
            n_after: n,
            channel,
        });
    }
    let duration = if truncated { t } else { duration };
    JumpTrajectory {
        initial_n,
        events,
        duration,
        seed,
        rng: RNG_ALGORITHM,
        truncated,
    }
}

/// Simulates a trajectory starting in the ground state.
pub fn simulate_trajectory(
    p: &ExperimentParams,
    duration: f64,
    seed: u64,
    include_measurement_channels: bool,
) -> Result<JumpTrajectory> {
    simulate_trajectory_capped(p, duration, seed, include_measurement_channels, usize::MAX)
}

/// As [`simulate_trajectory`], stopping early after `max_events` events.
pub fn simulate_trajectory_capped(
    p: &ExperimentParams,
    duration: f64,
    seed: u64,
    include_measurement_channels: bool,
    max_events: usize,
) -> Result<JumpTrajectory> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(domain(format!("duration must be > 0, got {duration}")));
    }
    check_params(p)?;
    let rates = JumpRates::from_params(p, include_measurement_channels)?;
    Ok(simulate_capped(&rates, 0, duration, seed, max_events))
}

/// Standard validation, except that a bath at exactly `T = 0` is accepted:
/// it simply yields `n̄ = 0` and no thermal jumps.
fn check_params(p: &ExperimentParams) -> Result<()> {
    let violations: Vec<_> = p
        .validate()
        .into_iter()
        .filter(|v| !(v.param == ParamName::Temperature && p.temperature == 0.0))
        .collect();
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(domain(format!("{}: {}", v.param.key(), v.message))),
    }
}

/// Seed of the `index`-th member of an ensemble.
pub fn ensemble_seed(base_seed: u64, index: u64) -> u64 {
    base_seed.wrapping_add(index)
}

/// Independent ground-state trajectories with seeds
/// [`ensemble_seed`]`(base_seed, i)`, run in parallel and returned in index
/// order.
pub fn simulate_ensemble(
    p: &ExperimentParams,
    duration: f64,
    base_seed: u64,
    count: usize,
    include_measurement_channels: bool,
) -> Result<Vec<JumpTrajectory>> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(domain(format!("duration must be > 0, got {duration}")));
    }
    check_params(p)?;
    let rates = JumpRates::from_params(p, include_measurement_channels)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| simulate_with_rates(&rates, 0, duration, ensemble_seed(base_seed, i)))
        .collect())
}

/// Occupancy statistics of one level, pooled over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DwellStats {
    pub level: u64,
    /// Completed visits (ended by a jump).
    pub exits: u64,
    /// Total time spent in the level, including censored final visits.
    pub total_time: f64,
    /// Censoring-aware estimate `total_time / exits`.
    pub mean_dwell: Option<f64>,
    /// Standard error of the exit-rate estimate, `√exits / total_time`.
    pub rate_std_error: Option<f64>,
}

impl DwellStats {
    pub fn exit_rate(&self) -> Option<f64> {
        self.mean_dwell.map(|d| 1.0 / d)
    }
}

pub fn dwell_stats<'a>(trajectories: impl IntoIterator<Item = &'a JumpTrajectory>, level: u64) -> DwellStats {
    let mut exits = 0u64;
    let mut total_time = 0.0;
    for traj in trajectories {
        for seg in traj.segments().filter(|s| s.n == level) {
            total_time += seg.end - seg.start;
            if seg.completed {
                exits += 1;
            }
        }
    }
    let mean_dwell = (exits > 0).then(|| total_time / exits as f64);
    DwellStats {
        level,
        exits,
        total_time,
        mean_dwell,
        rate_std_error: (exits > 0).then(|| (exits as f64).sqrt() / total_time),
    }
}

/// Durations of all completed visits to `level`.
pub fn dwell_times(traj: &JumpTrajectory, level: u64) -> Vec<f64> {
    traj.segments()
        .filter(|s| s.n == level && s.completed)
        .map(|s| s.end - s.start)
        .collect()
}

/// Fraction of time spent in each level `0..n_max`, with the final entry
/// collecting all levels `>= n_max`.
pub fn time_weighted_occupation(traj: &JumpTrajectory, n_max: usize) -> Vec<f64> {
    let mut occ = vec![0.0; n_max + 1];
    for seg in traj.segments() {
        let idx = (seg.n as usize).min(n_max);
        occ[idx] += seg.end - seg.start;
    }
    let total: f64 = occ.iter().sum();
    occ.iter().map(|v| v / total).collect()
}

/// The phonon number sampled every `interval`, starting at `interval`.
pub fn sample_states(traj: &JumpTrajectory, interval: f64) -> Vec<u64> {
    let count = (traj.duration / interval).floor() as usize;
    (1..=count).map(|k| traj.n_at(k as f64 * interval)).collect()
}

/// Bose-Einstein probability of level `n` at mean occupation `n_bar`.
pub fn bose_einstein(n: u64, n_bar: f64) -> f64 {
    let ratio = n_bar / (n_bar + 1.0);
    ratio.powi(n as i32) / (n_bar + 1.0)
}

/// Signal and noise of the cavity-frequency readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadoutModel {
    /// Per-phonon shift, rad/s.
    pub delta_omega: f64,
    /// White frequency-noise PSD, rad²/s.
    pub s_omega: f64,
    /// Mechanical frequency, used to flag bins too short for the secular picture.
    pub omega_m: f64,
}

impl ReadoutModel {
    pub fn from_params(p: &ExperimentParams) -> Result<Self> {
        Ok(ReadoutModel {
            delta_omega: qnd::detuning_per_phonon(p)?,
            s_omega: qnd::pdh_noise_psd(p)?.s_omega,
            omega_m: p.omega_m,
        })
    }

    /// Mean readout for phonon number `n`.
    pub fn level(&self, n: f64) -> f64 {
        self.delta_omega * (n + 0.5)
    }

    pub fn noise_std(&self, bin_width: f64) -> f64 {
        (self.s_omega / bin_width).sqrt()
    }
}

/// Bins shorter than this many mechanical periods (in radians) are flagged.
pub const MIN_BIN_PHASE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadoutTrace {
    pub bin_width: f64,
    pub bin_centers: Vec<f64>,
    /// rad/s
    pub freq_estimates: Vec<f64>,
    /// Time-weighted mean phonon number in each bin.
    pub true_n_per_bin: Vec<f64>,
    pub model: ReadoutModel,
    pub seed: u64,
    /// Set when `bin_width·ω_m` is below [`MIN_BIN_PHASE`].
    pub short_bins: bool,
}

/// Time-weighted mean phonon number in consecutive bins of `bin_width`.
pub fn bin_mean_occupation(traj: &JumpTrajectory, bin_width: f64) -> Vec<f64> {
    let n_bins = (traj.duration / bin_width).floor() as usize;
    let mut acc = vec![0.0; n_bins];
    for seg in traj.segments() {
        let mut t = seg.start;
        while t < seg.end {
            let bin = (t / bin_width).floor() as usize;
            if bin >= n_bins {
                break;
            }
            let bin_end = ((bin + 1) as f64 * bin_width).min(seg.end);
            acc[bin] += seg.n as f64 * (bin_end - t);
            if bin_end <= t {
                break;
            }
            t = bin_end;
        }
    }
    acc.iter().map(|v| v / bin_width).collect()
}

/// Each bin reports `Δω·(n̄_bin + ½)` plus Gaussian noise of standard
/// deviation `√(S_ω/bin_width)`, drawn from a stream seeded with `seed`.
pub fn binned_readout(
    traj: &JumpTrajectory,
    model: &ReadoutModel,
    bin_width: f64,
    seed: u64,
) -> Result<ReadoutTrace> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(domain(format!("bin width must be > 0, got {bin_width}")));
    }
    let true_n = bin_mean_occupation(traj, bin_width);
    let sigma = model.noise_std(bin_width);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let freq_estimates = if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| domain(e.to_string()))?;
        true_n
            .iter()
            .map(|n| model.level(*n) + noise.sample(&mut rng))
            .collect()
    } else {
        true_n.iter().map(|n| model.level(*n)).collect()
    };
    Ok(ReadoutTrace {
        bin_width,
        bin_centers: (0..true_n.len()).map(|i| (i as f64 + 0.5) * bin_width).collect(),
        freq_estimates,
        true_n_per_bin: true_n,
        model: *model,
        seed,
        short_bins: bin_width * model.omega_m < MIN_BIN_PHASE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionStats {
    pub threshold: f64,
    /// Fraction of excited bins (rounded true n >= 1) above threshold.
    pub detection_probability: Option<f64>,
    /// Fraction of ground-state bins above threshold.
    pub false_alarm_rate: Option<f64>,
    pub excited_bins: usize,
    pub ground_bins: usize,
}

/// Per-bin threshold classification against the simulated ground truth.
/// The threshold must lie strictly between the n = 0 and n = 1 levels.
pub fn jump_detection_stats(trace: &ReadoutTrace, threshold: f64) -> Result<DetectionStats> {
    let lo = trace.model.level(0.0);
    let hi = trace.model.level(1.0);
    if !(threshold > lo && threshold < hi) {
        return Err(domain(format!(
            "threshold {threshold} outside the signal range ({lo}, {hi})"
        )));
    }
    let (mut exc, mut exc_hit, mut gnd, mut gnd_hit) = (0usize, 0usize, 0usize, 0usize);
    for (est, n) in trace.freq_estimates.iter().zip(&trace.true_n_per_bin) {
        let above = *est > threshold;
        if n.round() >= 1.0 {
            exc += 1;
            exc_hit += usize::from(above);
        } else {
            gnd += 1;
            gnd_hit += usize::from(above);
        }
    }
    let frac = |hit: usize, tot: usize| (tot > 0).then(|| hit as f64 / tot as f64);
    Ok(DetectionStats {
        threshold,
        detection_probability: frac(exc_hit, exc),
        false_alarm_rate: frac(gnd_hit, gnd),
        excited_bins: exc,
        ground_bins: gnd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], n_bins: usize, range: (f64, f64)) -> Self {
        let (lo, hi) = range;
        let width = (hi - lo) / n_bins as f64;
        let edges = (0..=n_bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0u64; n_bins];
        for v in values {
            if *v >= lo && *v < hi {
                let idx = (((v - lo) / width) as usize).min(n_bins - 1);
                counts[idx] += 1;
            }
        }
        Histogram { edges, counts }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Sums counts of histograms with identical edges.
    pub fn accumulate(&mut self, other: &Histogram) {
        assert_eq!(self.edges, other.edges, "histogram edges differ");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Equally spaced Gaussian mixture `Σ_k w_k·N(offset + k·spacing, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelFit {
    pub offset: f64,
    pub spacing: f64,
    pub sigma: f64,
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn em_levels(
    points: &[(f64, f64)],
    sigma: f64,
    n_levels: usize,
    offset0: f64,
    spacing0: f64,
    max_iter: usize,
) -> LevelFit {
    let mut offset = offset0;
    let mut spacing = spacing0;
    let mut weights = vec![1.0 / n_levels as f64; n_levels];
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut resp = vec![0.0; n_levels];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let (mut s0, mut s1, mut s2, mut sy, mut sky) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut wsum = vec![0.0; n_levels];
        ll = 0.0;
        for &(y, count) in points {
            let mut tot = 0.0;
            for (k, r) in resp.iter_mut().enumerate() {
                let d = y - offset - k as f64 * spacing;
                *r = weights[k] * (-d * d * inv2s2).exp();
                tot += *r;
            }
            if tot <= 0.0 {
                continue;
            }
            ll += count * (tot * norm).ln();
            for (k, r) in resp.iter().enumerate() {
                let g = count * r / tot;
                let kf = k as f64;
                wsum[k] += g;
                s0 += g;
                s1 += g * kf;
                s2 += g * kf * kf;
                sy += g * y;
                sky += g * kf * y;
            }
        }
        let det = s0 * s2 - s1 * s1;
        if det.abs() > 0.0 {
            offset = (s2 * sy - s1 * sky) / det;
            spacing = (s0 * sky - s1 * sy) / det;
        }
        for (w, s) in weights.iter_mut().zip(&wsum) {
            *w = s / s0;
        }
        if (ll - prev_ll).abs() <= 1e-12 * ll.abs() {
            break;
        }
        prev_ll = ll;
    }
    LevelFit {
        offset,
        spacing,
        sigma,
        weights,
        log_likelihood: ll,
        iterations,
    }
}

/// True when a level carries negligible weight while a higher one is populated.
fn has_hole(weights: &[f64]) -> bool {
    let cut = 1e-3 * weights.iter().cloned().fold(0.0, f64::max);
    let last = weights.iter().rposition(|w| *w > cut).unwrap_or(0);
    weights[..last].iter().any(|w| *w <= cut)
}

/// Maximum-likelihood fit (EM) of an equally spaced Gaussian mixture with
/// known per-sample noise `sigma`. Several starting spacings are tried and
/// the most likely solution without empty intermediate levels is kept.
pub fn fit_level_mixture(values: &[f64], sigma: f64, n_levels: usize) -> Result<LevelFit> {
    let points: Vec<(f64, f64)> = values.iter().map(|v| (*v, 1.0)).collect();
    fit_weighted_mixture(&points, sigma, n_levels)
}

/// [`fit_level_mixture`] on histogram counts (bin centers as sample
/// values). Much faster for large samples; bins should be narrow
/// compared with `sigma`.
pub fn fit_level_mixture_histogram(hist: &Histogram, sigma: f64, n_levels: usize) -> Result<LevelFit> {
    let points: Vec<(f64, f64)> = hist
        .centers()
        .into_iter()
        .zip(&hist.counts)
        .filter(|(_, c)| **c > 0)
        .map(|(x, c)| (x, *c as f64))
        .collect();
    fit_weighted_mixture(&points, sigma, n_levels)
}

fn weighted_quantile(sorted: &[(f64, f64)], total: f64, q: f64) -> f64 {
    let mut acc = 0.0;
    for (x, w) in sorted {
        acc += w;
        if acc >= q * total {
            return *x;
        }
    }
    sorted.last().map_or(0.0, |p| p.0)
}

fn fit_weighted_mixture(points: &[(f64, f64)], sigma: f64, n_levels: usize) -> Result<LevelFit> {
    let total: f64 = points.iter().map(|p| p.1).sum();
    if n_levels < 2 || total < 2.0 * n_levels as f64 {
        return Err(domain("too few samples or levels for a mixture fit"));
    }
    if !(sigma > 0.0) {
        return Err(domain("mixture noise must be > 0"));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // the lowest level sits about 1.28σ above its own 10th percentile
    let offset0 = weighted_quantile(&sorted, total, 0.1) + 1.28 * sigma;
    // starting spacings: a few multiples of σ, plus the bulk spread divided
    // among 1..n_levels-1 gaps
    let spread =
        weighted_quantile(&sorted, total, 0.99) - weighted_quantile(&sorted, total, 0.01) - 2.0 * sigma;
    let mut candidates: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * sigma).collect();
    if spread > 0.0 {
        candidates.extend((1..n_levels).map(|k| spread / k as f64));
    }
    let fits: Vec<LevelFit> = candidates
        .par_iter()
        .map(|d| em_levels(points, sigma, n_levels, offset0, *d, 5000))
        .collect();
    // A spacing of d/k with empty intermediate levels fits as well as d;
    // such "holey" solutions only win if nothing else is available.
    let best = |pool: &mut dyn Iterator<Item = &LevelFit>| {
        pool.max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
            .cloned()
    };
    let solid = best(&mut fits.iter().filter(|f| !has_hole(&f.weights) && f.spacing > 0.0));
    Ok(solid
        .or_else(|| best(&mut fits.iter()))
        .expect("non-empty candidates"))
}
