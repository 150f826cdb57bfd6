//! Classical jump-process sampling of the diagonal dynamics.
//!
//! On the diagonal both models are pure-death processes with an independent
//! dark-count stream, so trajectories only need the photon number and a few
//! competing exponential clocks. This module is the independent oracle for
//! the analytic modules.
//!
//! Trajectory `i` of an ensemble with seed `s` draws from ChaCha8 seeded with
//! `s` on stream `i`, so any subset of trajectories can be generated in any
//! order. Ensembles are reduced in fixed chunks of [`CHUNK_SIZE`], folded in
//! chunk order; a parallel driver that does the same reproduces the serial
//! result bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{check_non_negative, CpmError, Result};
use crate::fock::DiagonalFockState;
use crate::params::DetectorParams;

/// Trajectories per reduction chunk.
pub const CHUNK_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    Sd,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    DetectedAbsorption,
    UndetectedAbsorption,
    DarkCount,
}

impl EventKind {
    /// Whether the event is a click on the detector.
    pub fn is_registered(self) -> bool {
        !matches!(self, EventKind::UndetectedAbsorption)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::DetectedAbsorption => "detected",
            EventKind::UndetectedAbsorption => "undetected",
            EventKind::DarkCount => "dark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub initial_n: usize,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl TrajectoryRecord {
    /// Registered clicks (detected absorptions and dark counts) up to `t`.
    pub fn registered_until(&self, t: f64) -> usize {
        self.events
            .iter()
            .take_while(|e| e.time <= t)
            .filter(|e| e.kind.is_registered())
            .count()
    }

    pub fn registered_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().filter(|e| e.kind.is_registered()).map(|e| e.time)
    }
}

/// RNG of trajectory `index` in an ensemble seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform on `(0, 1]`.
fn uniform_open_closed(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF sampler for the initial photon number.
#[derive(Debug, Clone)]
pub struct PhotonSampler {
    cdf: Vec<f64>,
}

impl PhotonSampler {
    pub fn new(state: &DiagonalFockState) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = state
            .probs()
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(CpmError::Undefined("sampling from a state with zero trace"));
        }
        Ok(Self { cdf })
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> usize {
        let total = self.cdf[self.cdf.len() - 1];
        let u = (1.0 - uniform_open_closed(rng)) * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Samples one record on `[0, horizon]` with the given generator.
pub fn sample_with_rng(
    sampler: &PhotonSampler,
    params: &DetectorParams,
    model: Model,
    horizon: f64,
    rng: &mut impl RngCore,
) -> TrajectoryRecord {
    let initial_n = sampler.sample(rng);
    let lambda = params.lambda();
    let dark_rate = lambda * params.dark();
    let mut n = initial_n;
    let mut time = 0.0;
    let mut events = Vec::new();
    loop {
        let absorption_rate = match model {
            Model::Sd => lambda * n as f64,
            Model::E => {
                if n > 0 {
                    lambda
                } else {
                    0.0
                }
            }
        };
        let total = absorption_rate + dark_rate;
        if !(total > 0.0) {
            break;
        }
        time += -log(uniform_open_closed(rng)) / total;
        if time > horizon {
            break;
        }
        let pick = (1.0 - uniform_open_closed(rng)) * total;
        let kind = if pick < dark_rate {
            EventKind::DarkCount
        } else if pick < dark_rate + absorption_rate * params.eta() {
            EventKind::DetectedAbsorption
        } else {
            EventKind::UndetectedAbsorption
        };
        if kind != EventKind::DarkCount {
            n -= 1;
        }
        events.push(Event { time, kind });
    }
    TrajectoryRecord {
        initial_n,
        events,
        horizon,
    }
}

/// One record seeded by `seed` (stream 0).
pub fn sample_trajectory(
    state: &DiagonalFockState,
    params: &DetectorParams,
    model: Model,
    horizon: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    check_non_negative("horizon", horizon)?;
    let sampler = PhotonSampler::new(state)?;
    Ok(sample_with_rng(&sampler, params, model, horizon, &mut trajectory_rng(seed, 0)))
}

/// Everything needed to regenerate any trajectory of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub sampler: PhotonSampler,
    pub params: DetectorParams,
    pub model: Model,
    pub horizon: f64,
    pub seed: u64,
    pub n_traj: u64,
}

impl EnsembleSpec {
    pub fn new(
        state: &DiagonalFockState,
        params: DetectorParams,
        model: Model,
        horizon: f64,
        n_traj: u64,
        seed: u64,
    ) -> Result<Self> {
        check_non_negative("horizon", horizon)?;
        if n_traj == 0 {
            return Err(CpmError::Domain {
                name: "n_traj",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(Self {
            sampler: PhotonSampler::new(state)?,
            params,
            model,
            horizon,
            seed,
            n_traj,
        })
    }

    pub fn n_chunks(&self) -> u64 {
        self.n_traj.div_ceil(CHUNK_SIZE)
    }

    pub fn record(&self, index: u64) -> TrajectoryRecord {
        let mut rng = trajectory_rng(self.seed, index);
        sample_with_rng(&self.sampler, &self.params, self.model, self.horizon, &mut rng)
    }

    /// Accumulates the trajectories of chunk `chunk` into a copy of `empty`.
    pub fn run_chunk<A: Accumulator>(&self, chunk: u64, empty: &A) -> A {
        let mut acc = empty.clone();
        let start = chunk * CHUNK_SIZE;
        let end = (start + CHUNK_SIZE).min(self.n_traj);
        for index in start..end {
            acc.record(&self.record(index));
        }
        acc
    }

    /// Folds per-chunk accumulators in chunk order.
    pub fn reduce<A: Accumulator>(empty: &A, chunks: impl IntoIterator<Item = A>) -> A {
        let mut total = empty.clone();
        for chunk in chunks {
            total.merge(&chunk);
        }
        total
    }

    pub fn run_serial<A: Accumulator>(&self, empty: &A) -> A {
        Self::reduce(empty, (0..self.n_chunks()).map(|c| self.run_chunk(c, empty)))
    }
}

/// Per-trajectory statistic that can be merged across chunks.
pub trait Accumulator: Clone {
    fn record(&mut self, record: &TrajectoryRecord);
    fn merge(&mut self, other: &Self);
}

/// Sample mean with its standard error `s/√n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    fn from_sums(n: f64, sum: f64, sum_sq: f64) -> Self {
        if n <= 0.0 {
            return Self {
                mean: f64::NAN,
                std_err: f64::NAN,
            };
        }
        let mean = sum / n;
        let var = if n > 1.0 { ((sum_sq - sum * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Self {
            mean,
            std_err: sqrt(var / n),
        }
    }

    /// `|value - mean|` in units of the standard error.
    pub fn deviation(&self, value: f64) -> f64 {
        let diff = (value - self.mean).abs();
        if self.std_err > 0.0 {
            diff / self.std_err
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Registered-count sums on a time grid; integers only.
#[derive(Debug, Clone, PartialEq)]
pub struct CountAccumulator {
    times: Vec<f64>,
    n: u64,
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
    sum_fact: Vec<u128>,
    sum_fact_sq: Vec<u128>,
    histogram: Vec<Vec<u64>>,
}

impl CountAccumulator {
    pub fn new(times: &[f64]) -> Self {
        let k = times.len();
        Self {
            times: times.to_vec(),
            n: 0,
            sum: vec![0; k],
            sum_sq: vec![0; k],
            sum_fact: vec![0; k],
            sum_fact_sq: vec![0; k],
            histogram: vec![Vec::new(); k],
        }
    }

    /// Horizon needed to cover the grid.
    pub fn horizon(&self) -> f64 {
        self.times.iter().copied().fold(0.0, f64::max)
    }

    pub fn finish(&self, seed: u64) -> EnsembleStats {
        let n = self.n as f64;
        let mean_counts = (0..self.times.len())
            .map(|i| Estimate::from_sums(n, self.sum[i] as f64, self.sum_sq[i] as f64))
            .collect();
        let second_factorial = (0..self.times.len())
            .map(|i| Estimate::from_sums(n, self.sum_fact[i] as f64, self.sum_fact_sq[i] as f64))
            .collect();
        let count_histogram = self
            .histogram
            .iter()
            .map(|h| h.iter().map(|&c| c as f64 / n).collect())
            .collect();
        EnsembleStats {
            n_traj: self.n,
            seed,
            times: self.times.clone(),
            mean_counts,
            second_factorial,
            count_histogram,
        }
    }
}

impl Accumulator for CountAccumulator {
    fn record(&mut self, record: &TrajectoryRecord) {
        self.n += 1;
        let mut clicks = record.registered_times().peekable();
        let mut m: u64 = 0;
        // Grid times need not be sorted.
        let mut order: Vec<usize> = (0..self.times.len()).collect();
        order.sort_by(|&a, &b| self.times[a].total_cmp(&self.times[b]));
        for i in order {
            while clicks.peek().is_some_and(|&c| c <= self.times[i]) {
                clicks.next();
                m += 1;
            }
            let fact = m * m.saturating_sub(1);
            self.sum[i] += m;
            self.sum_sq[i] += (m as u128) * (m as u128);
            self.sum_fact[i] += fact as u128;
            self.sum_fact_sq[i] += (fact as u128) * (fact as u128);
            let h = &mut self.histogram[i];
            if h.len() <= m as usize {
                h.resize(m as usize + 1, 0);
            }
            h[m as usize] += 1;
        }
    }

    fn merge(&mut self, other: &Self) {
        self.n += other.n;
        for i in 0..self.times.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
            self.sum_fact[i] += other.sum_fact[i];
            self.sum_fact_sq[i] += other.sum_fact_sq[i];
            let h = &mut self.histogram[i];
            if h.len() < other.histogram[i].len() {
                h.resize(other.histogram[i].len(), 0);
            }
            for (a, b) in h.iter_mut().zip(&other.histogram[i]) {
                *a += b;
            }
        }
    }
}

/// Empirical count statistics on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_traj: u64,
    pub seed: u64,
    pub times: Vec<f64>,
    pub mean_counts: Vec<Estimate>,
    pub second_factorial: Vec<Estimate>,
    /// `count_histogram[i][m]`: fraction of trajectories with `m` clicks by `times[i]`.
    pub count_histogram: Vec<Vec<f64>>,
}

/// Gaps following registered clicks in `[t_click, t_click + Δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingAccumulator {
    t_click: f64,
    delta: f64,
    window: f64,
    n: u64,
    conditioned: u64,
    /// Gaps kept in the window.
    kept: u64,
    bins: Vec<u64>,
    gap_sum: f64,
    gap_sum_sq: f64,
}

impl WaitingAccumulator {
    pub fn new(t_click: f64, delta: f64, window: f64, n_bins: usize) -> Self {
        Self {
            t_click,
            delta,
            window,
            n: 0,
            conditioned: 0,
            kept: 0,
            bins: vec![0; n_bins.max(1)],
            gap_sum: 0.0,
            gap_sum_sq: 0.0,
        }
    }

    /// Horizon needed so every kept gap is observed.
    pub fn horizon(&self) -> f64 {
        self.t_click + self.delta + self.window
    }

    pub fn finish(&self, seed: u64) -> WaitingStats {
        let width = self.window / self.bins.len() as f64;
        let scale = 1.0 / (self.n as f64 * self.delta * width);
        let edges = (0..=self.bins.len()).map(|i| i as f64 * width).collect();
        WaitingStats {
            n_traj: self.n,
            seed,
            t_click: self.t_click,
            delta: self.delta,
            window: self.window,
            conditioned: self.conditioned,
            kept: self.kept,
            mean_gap: Estimate::from_sums(self.kept as f64, self.gap_sum, self.gap_sum_sq),
            edges,
            density: self.bins.iter().map(|&c| c as f64 * scale).collect(),
            density_err: self.bins.iter().map(|&c| sqrt(c as f64) * scale).collect(),
        }
    }
}

impl Accumulator for WaitingAccumulator {
    fn record(&mut self, record: &TrajectoryRecord) {
        self.n += 1;
        let clicks: Vec<f64> = record.registered_times().collect();
        let end = self.t_click + self.delta;
        for (i, &c) in clicks.iter().enumerate() {
            if c < self.t_click {
                continue;
            }
            if c >= end {
                break;
            }
            self.conditioned += 1;
            let Some(&next) = clicks.get(i + 1) else {
                continue;
            };
            let gap = next - c;
            if gap > self.window {
                continue;
            }
            self.kept += 1;
            self.gap_sum += gap;
            self.gap_sum_sq += gap * gap;
            let width = self.window / self.bins.len() as f64;
            let bin = ((gap / width) as usize).min(self.bins.len() - 1);
            self.bins[bin] += 1;
        }
    }

    fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.conditioned += other.conditioned;
        self.kept += other.kept;
        self.gap_sum += other.gap_sum;
        self.gap_sum_sq += other.gap_sum_sq;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }
}

/// Empirical gap statistics after a click near `t_click`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingStats {
    pub n_traj: u64,
    pub seed: u64,
    pub t_click: f64,
    pub delta: f64,
    pub window: f64,
    /// Clicks found in `[t_click, t_click + Δ)`.
    pub conditioned: u64,
    /// Of those, followed by another click within the window.
    pub kept: u64,
    pub mean_gap: Estimate,
    pub edges: Vec<f64>,
    /// Joint density of a click in the conditioning bin and the next click
    /// `τ` later, per unit of both times; comparable to `W_t(τ)`.
    pub density: Vec<f64>,
    pub density_err: Vec<f64>,
}

/// Conditioning width `0.05/λ`.
pub fn default_click_tolerance(params: &DetectorParams) -> f64 {
    0.05 / params.lambda()
}

/// Mean and second factorial moment of registered counts on `t_grid`, serially.
pub fn estimate_count_moments(
    state: &DiagonalFockState,
    params: &DetectorParams,
    model: Model,
    t_grid: &[f64],
    n_traj: u64,
    seed: u64,
) -> Result<EnsembleStats> {
    let empty = CountAccumulator::new(t_grid);
    let spec = EnsembleSpec::new(state, *params, model, empty.horizon(), n_traj, seed)?;
    Ok(spec.run_serial(&empty).finish(seed))
}

/// Gap statistics after clicks in `[t_click, t_click + 0.05/λ)`, serially.
#[allow(clippy::too_many_arguments)]
pub fn estimate_waiting(
    state: &DiagonalFockState,
    params: &DetectorParams,
    model: Model,
    t_click: f64,
    window: f64,
    n_bins: usize,
    n_traj: u64,
    seed: u64,
) -> Result<WaitingStats> {
    if !(window > 0.0) {
        return Err(CpmError::Domain {
            name: "window",
            value: window,
            expected: "> 0",
        });
    }
    let empty = WaitingAccumulator::new(t_click, default_click_tolerance(params), window, n_bins);
    let spec = EnsembleSpec::new(state, *params, model, empty.horizon(), n_traj, seed)?;
    Ok(spec.run_serial(&empty).finish(seed))
}
