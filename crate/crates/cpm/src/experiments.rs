//! Data sets behind the figure, trajectory and count commands.

use cpm_core::trajectories::{CountAccumulator, EnsembleSpec};
use cpm_core::{default_window, e_model, sd_model, CountDistribution, DetectorParams, DiagonalFockState, Model};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, StateChoice};
use crate::ensemble::{dump_events, run_parallel};
use crate::error::{CliError, Result};
use crate::output::Dataset;

pub fn model_name(model: Model) -> &'static str {
    match model {
        Model::Sd => "sd",
        Model::E => "e",
    }
}

pub fn mean_counts(model: Model, s: &DiagonalFockState, p: &DetectorParams, t: f64) -> f64 {
    match model {
        Model::Sd => sd_model::mean_counts(s, p, t),
        Model::E => e_model::mean_counts(s, p, t),
    }
}

pub fn second_factorial_moment(model: Model, s: &DiagonalFockState, p: &DetectorParams, t: f64) -> f64 {
    match model {
        Model::Sd => sd_model::second_factorial_moment(s, p, t),
        Model::E => e_model::second_factorial_moment(s, p, t),
    }
}

pub fn k_factor(model: Model, s: &DiagonalFockState, p: &DetectorParams, t: f64) -> cpm_core::Result<f64> {
    match model {
        Model::Sd => sd_model::k_factor(s, p, t),
        Model::E => e_model::k_factor(s, p, t),
    }
}

pub fn count_distribution(
    model: Model,
    s: &DiagonalFockState,
    p: &DetectorParams,
    t: f64,
    m_max: Option<usize>,
) -> CountDistribution {
    match model {
        Model::Sd => sd_model::count_distribution(s, p, t, m_max),
        Model::E => e_model::count_distribution(s, p, t, m_max),
    }
}

pub fn n_cav(model: Model, s: &DiagonalFockState, p: &DetectorParams, t: f64) -> f64 {
    match model {
        Model::Sd => sd_model::n_cav(s, p, t),
        Model::E => e_model::n_cav(s, p, t),
    }
}

pub fn mean_waiting(model: Model, s: &DiagonalFockState, p: &DetectorParams, t: f64, window: f64) -> cpm_core::Result<f64> {
    match model {
        Model::Sd => sd_model::mean_waiting(s, p, t, window),
        Model::E => e_model::mean_waiting(s, p, t, window),
    }
}

/// A series to compute: model, state choice, `n̄` and the truncated state.
struct Case {
    model: Model,
    choice: StateChoice,
    nbar: f64,
    state: DiagonalFockState,
    /// Whether `nbar` is the mean of `state` up to its truncation tail.
    nominal: bool,
}

impl Case {
    /// `m̄_t`. The SD mean only depends on `n̄`, so the nominal value is
    /// used when the truncation is the default one; the curves of all states
    /// then coincide exactly.
    fn mean_counts(&self, p: &DetectorParams, t: f64) -> f64 {
        match self.model {
            Model::Sd if self.nominal => {
                p.dark() * p.lambda() * t + p.eta() * self.nbar * sd_model::phi_t(p, t)
            }
            model => mean_counts(model, &self.state, p, t),
        }
    }

    fn labels(&self) -> Vec<Value> {
        vec![json!(model_name(self.model)), json!(self.choice.name()), json!(self.nbar)]
    }
}

const LABELS: [&str; 3] = ["model", "state", "nbar"];

fn cases(config: &ExperimentConfig, nbars: &[f64], kinds: &[StateChoice]) -> Result<Vec<Case>> {
    let mut out = Vec::new();
    for &model in config.model.models() {
        for (choice, nbar, kind) in config.states(nbars, kinds)? {
            out.push(Case {
                model,
                choice,
                nbar,
                state: config.fock_state(kind)?,
                nominal: config.nmax.is_none(),
            });
        }
    }
    Ok(out)
}

fn sweep<F>(grid: &[f64], f: F) -> Vec<Vec<f64>>
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    grid.par_iter().map(|&t| f(t)).collect()
}

/// Mean registered counts `m̄_t` for every state at `n̄ ∈ {50, 100}`.
pub fn figure1(config: &ExperimentConfig) -> Result<Dataset> {
    config.require_undamped("figure1")?;
    let params = config.params()?;
    let grid = config.grid(0.0, 400.0, 201)?;
    let cases = cases(config, &[50.0, 100.0], &StateChoice::ALL)?;
    let mut data = Dataset::new("figure1", &LABELS, &["t", "mean_counts"]);
    let rows: Vec<_> = cases
        .par_iter()
        .map(|c| sweep(&grid, |t| vec![t, c.mean_counts(&params, t)]))
        .collect();
    for (c, rows) in cases.iter().zip(rows) {
        data.push(c.labels(), rows);
    }
    Ok(data)
}

/// `K_t` for number and thermal states at `n̄ = 50`. Undefined points are NaN.
pub fn figure2(config: &ExperimentConfig) -> Result<Dataset> {
    config.require_undamped("figure2")?;
    let params = config.params()?;
    let grid = config.grid(0.1, 300.0, 300)?;
    let cases = cases(config, &[50.0], &[StateChoice::Number, StateChoice::Thermal])?;
    let mut data = Dataset::new("figure2", &LABELS, &["t", "k"]);
    let rows: Vec<_> = cases
        .par_iter()
        .map(|c| sweep(&grid, |t| vec![t, k_factor(c.model, &c.state, &params, t).unwrap_or(f64::NAN)]))
        .collect();
    for (c, rows) in cases.iter().zip(rows) {
        data.push(c.labels(), rows);
    }
    Ok(data)
}

/// Smallest `λt` with `N_CAV ≤ target`, by bisection on the monotone `N_CAV`.
pub fn time_for_n_cav(model: Model, s: &DiagonalFockState, p: &DetectorParams, target: f64) -> f64 {
    let mut hi = 1.0;
    while n_cav(model, s, p, hi) > target && hi < 1e9 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if n_cav(model, s, p, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Lower end of the default figure 3 range in `N_CAV`.
pub const FIGURE3_MIN_N_CAV: f64 = 0.01;

/// `(λt, N_CAV, τ̄)` for number and thermal states at `n̄ = 100`, window
/// `10/(ηλ)`. By default each series spans `N_CAV` from `n̄` down to
/// [`FIGURE3_MIN_N_CAV`].
pub fn figure3(config: &ExperimentConfig) -> Result<Dataset> {
    config.require_undamped("figure3")?;
    let params = config.params()?;
    if params.eta() == 0.0 {
        return Err(CliError::Config("figure3 needs eta > 0 for its window 10/eta".into()));
    }
    let window = default_window(params.eta(), params.lambda());
    let cases = cases(config, &[100.0], &[StateChoice::Number, StateChoice::Thermal])?;
    let mut data = Dataset::new("figure3", &LABELS, &["t", "n_cav", "tau_bar"]);
    let grids = cases
        .iter()
        .map(|c| {
            let end = time_for_n_cav(c.model, &c.state, &params, FIGURE3_MIN_N_CAV);
            config.grid(0.0, end, 80)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<_> = cases
        .par_iter()
        .zip(&grids)
        .map(|(c, grid)| {
            sweep(grid, |t| {
                let tau = mean_waiting(c.model, &c.state, &params, t, window).unwrap_or(f64::NAN);
                vec![t, n_cav(c.model, &c.state, &params, t), tau]
            })
        })
        .collect();
    for (c, rows) in cases.iter().zip(rows) {
        data.push(c.labels(), rows);
    }
    Ok(data)
}

fn trajectory_grid(config: &ExperimentConfig, model: Model, points: usize) -> Result<Vec<f64>> {
    match model {
        Model::Sd => config.grid(0.5, 5.0, points),
        Model::E => config.grid(20.0, 200.0, points),
    }
}

/// Monte Carlo results of [`trajectories`].
pub struct TrajectoryOutput {
    pub data: Dataset,
    /// Raw events when requested.
    pub dump: Option<String>,
}

/// Trajectory estimates of `m̄_t` and `⟨m(m-1)⟩_t` next to the analytic
/// values, for every state at `n̄ = 50`.
pub fn trajectories(config: &ExperimentConfig, dump: bool) -> Result<TrajectoryOutput> {
    config.require_undamped("trajectories")?;
    let params = config.params()?;
    let cases = cases(config, &[50.0], &StateChoice::ALL)?;
    let mut data = Dataset::new(
        "trajectories",
        &LABELS,
        &[
            "t",
            "analytic_mean",
            "mc_mean",
            "mc_mean_err",
            "analytic_second_factorial",
            "mc_second_factorial",
            "mc_second_factorial_err",
        ],
    );
    let mut raw = dump.then(String::new);
    for (index, c) in cases.iter().enumerate() {
        let grid = trajectory_grid(config, c.model, 10)?;
        let empty = CountAccumulator::new(&grid);
        let spec = EnsembleSpec::new(&c.state, params, c.model, empty.horizon(), config.traj, config.seed)?;
        let stats = run_parallel(&spec, &empty).finish(config.seed);
        let rows = grid
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                vec![
                    t,
                    mean_counts(c.model, &c.state, &params, t),
                    stats.mean_counts[i].mean,
                    stats.mean_counts[i].std_err,
                    second_factorial_moment(c.model, &c.state, &params, t),
                    stats.second_factorial[i].mean,
                    stats.second_factorial[i].std_err,
                ]
            })
            .collect();
        data.push(c.labels(), rows);
        if let Some(raw) = raw.as_mut() {
            raw.push_str(&format!(
                "# model={} state={} nbar={} horizon={}\n",
                model_name(c.model),
                c.choice.name(),
                c.nbar,
                spec.horizon
            ));
            raw.push_str(&dump_events(&spec, spec.n_traj, index as u64 * spec.n_traj));
        }
    }
    Ok(TrajectoryOutput { data, dump: raw })
}

/// Count distributions `P_t(m)`, analytic and from trajectories, for every
/// state at `n̄ = 10` on a short grid.
pub fn counts(config: &ExperimentConfig) -> Result<Dataset> {
    config.require_undamped("counts")?;
    let params = config.params()?;
    let cases = cases(config, &[10.0], &StateChoice::ALL)?;
    let mut data = Dataset::new(
        "counts",
        &["model", "state", "nbar", "t"],
        &["m", "analytic", "mc", "mc_err"],
    );
    for c in &cases {
        let grid = match c.model {
            Model::Sd => config.grid(0.5, 2.0, 4)?,
            Model::E => config.grid(5.0, 20.0, 4)?,
        };
        let empty = CountAccumulator::new(&grid);
        let spec = EnsembleSpec::new(&c.state, params, c.model, empty.horizon(), config.traj, config.seed)?;
        let stats = run_parallel(&spec, &empty).finish(config.seed);
        let n = stats.n_traj as f64;
        for (i, &t) in grid.iter().enumerate() {
            let dist = count_distribution(c.model, &c.state, &params, t, config.mmax);
            let hist = &stats.count_histogram[i];
            let rows = dist
                .probs
                .iter()
                .enumerate()
                .map(|(m, &analytic)| {
                    let mc = hist.get(m).copied().unwrap_or(0.0);
                    vec![m as f64, analytic, mc, (mc * (1.0 - mc) / n).sqrt()]
                })
                .collect();
            let mut labels = c.labels();
            labels.push(json!(t));
            data.push(labels, rows);
        }
    }
    Ok(data)
}
