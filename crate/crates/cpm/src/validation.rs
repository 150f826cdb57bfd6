//! The acceptance checks, shared by `cpm validate` and the `acceptance` test
//! target.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use cpm_core::superops::{apply_a, apply_exp_a, apply_u, DiagonalSuperop};
use cpm_core::trajectories::{trajectory_rng, CountAccumulator, EnsembleSpec};
use cpm_core::{default_window, e_model, sd_model, DetectorParams, DiagonalFockState, Model, StateKind};
use rand_core::RngCore;

use crate::config::{linspace, ConfigPatch, ExperimentConfig, ModelChoice};
use crate::ensemble::run_parallel;
use crate::experiments::{count_distribution, mean_counts, mean_waiting, n_cav, second_factorial_moment, time_for_n_cav};
use crate::error::Result;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
    pub details: Vec<String>,
    pub elapsed: f64,
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {}: measured {}; required {} [{:.2} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.tolerance,
            self.elapsed
        )?;
        for d in &self.details {
            write!(f, "\n        {d}")?;
        }
        Ok(())
    }
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "normalization"),
    (2, "moment consistency"),
    (3, "monte carlo equivalence"),
    (4, "sd k-factor constants"),
    (5, "e-model origin limit"),
    (6, "closed forms vs fock sums"),
    (7, "effective counting time scaling"),
    (8, "waiting-time regimes"),
    (9, "dead-time divergence"),
    (10, "cavity damping reduction"),
    (11, "superoperator identities"),
    (12, "determinism"),
];

pub fn run(id: u8) -> Result<Report> {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .ok_or_else(|| crate::error::CliError::Config(format!("no acceptance criterion {id}")))?;
    let start = Instant::now();
    let check = match id {
        1 => normalization(),
        2 => moment_consistency(),
        3 => monte_carlo(),
        4 => sd_k_constants(),
        5 => e_origin_limit(),
        6 => dual_path(),
        7 => effective_counting_time(),
        8 => waiting_regimes(),
        9 => dead_time(),
        10 => cavity_damping(),
        11 => superoperator_identities(),
        _ => determinism(),
    }?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut details = check.details;
    let mut passed = check.passed;
    let mut tolerance = check.tolerance;
    if let Some(budget) = check.budget {
        tolerance = format!("{tolerance}, runtime < {budget} s");
        if elapsed >= budget {
            passed = false;
            details.push(format!("runtime {elapsed:.2} s exceeds {budget} s"));
        }
    }
    Ok(Report {
        id,
        name,
        passed,
        measured: check.measured,
        tolerance,
        details,
        elapsed,
    })
}

pub fn run_all() -> Result<Vec<Report>> {
    CRITERIA.iter().map(|(id, _)| run(*id)).collect()
}

struct Check {
    passed: bool,
    measured: String,
    tolerance: String,
    details: Vec<String>,
    budget: Option<f64>,
}

const ETA: f64 = 0.6;
const DARK: f64 = 5e-3;
/// Truncation used where a criterion compares to `1e-9` or better.
const FINE_TAIL: f64 = 1e-16;

fn params(eta: f64, dark: f64) -> DetectorParams {
    DetectorParams::new(1.0, eta, dark).expect("valid detector parameters")
}

fn kinds(nbar: f64) -> [StateKind; 3] {
    [StateKind::Coherent(nbar), StateKind::Number(nbar as usize), StateKind::Thermal(nbar)]
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

fn model_times(model: Model) -> [f64; 3] {
    match model {
        Model::Sd => [0.1, 1.0, 5.0],
        Model::E => [1.0, 50.0, 200.0],
    }
}

/// Largest value of `f` over the grid, with the argument where it occurs.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn see(&mut self, value: f64, at: impl FnOnce() -> String) {
        if !(value <= self.value) {
            self.value = value;
            self.at = at();
        }
    }
}

fn normalization() -> Result<Check> {
    let p = params(ETA, DARK);
    let mut worst = Worst::default();
    for model in [Model::Sd, Model::E] {
        for kind in kinds(50.0) {
            let s = kind.state_with_tail(FINE_TAIL)?;
            for t in model_times(model) {
                let dist = count_distribution(model, &s, &p, t, None);
                worst.see((dist.total() - 1.0).abs(), || format!("{model:?} {kind:?} λt={t}"));
            }
        }
    }
    Ok(Check {
        passed: worst.value < 1e-9,
        measured: format!("max |Σ P(m) - 1| = {:.3e} ({})", worst.value, worst.at),
        tolerance: "< 1e-9".into(),
        details: vec![],
        budget: Some(10.0),
    })
}

fn moment_consistency() -> Result<Check> {
    let p = params(ETA, DARK);
    let mut worst = Worst::default();
    let mut literal = Worst::default();
    for model in [Model::Sd, Model::E] {
        for kind in kinds(50.0) {
            let s = kind.state_with_tail(FINE_TAIL)?;
            for t in model_times(model) {
                let dist = count_distribution(model, &s, &p, t, None);
                let mean = mean_counts(model, &s, &p, t);
                let second = second_factorial_moment(model, &s, &p, t);
                worst.see(rel(dist.mean(), mean), || format!("mean {model:?} {kind:?} λt={t}"));
                worst.see(rel(dist.factorial_moment(2), second), || {
                    format!("second {model:?} {kind:?} λt={t}")
                });
                if model == Model::E {
                    // Ξ/Ω expressions through the special-function closed forms.
                    let f = e_model::EModelFunctionals::evaluate(e_model::Route::Closed(kind), &p, t, 2)?;
                    let m = f.mean_counts(&p, kind.nbar()).unwrap_or(f64::NAN);
                    let m2 = f
                        .second_factorial_moment(&p, kind.nbar(), kind.second_factorial_moment())
                        .unwrap_or(f64::NAN);
                    literal.see(rel(dist.mean(), m), || format!("mean (Ξ) {kind:?} λt={t}"));
                    literal.see(rel(dist.factorial_moment(2), m2), || format!("second (Ξ, Ω) {kind:?} λt={t}"));
                }
            }
        }
    }
    let max = worst.value.max(literal.value);
    Ok(Check {
        passed: max < 1e-8,
        measured: format!("max relative deviation {max:.3e}"),
        tolerance: "< 1e-8 relative".into(),
        details: vec![
            format!("against moment formulas: {:.3e} ({})", worst.value, worst.at),
            format!("against E-model Ξ/Ω closed forms: {:.3e} ({})", literal.value, literal.at),
        ],
        budget: Some(10.0),
    })
}

const MC_SEED: u64 = 1;

fn monte_carlo() -> Result<Check> {
    let p = params(ETA, DARK);
    let n_traj = 100_000;
    let mut worst = Worst::default();
    let mut details = Vec::new();
    let mut outside = 0;
    let mut total = 0;
    for model in [Model::Sd, Model::E] {
        let grid = match model {
            Model::Sd => linspace(0.5, 5.0, 10),
            Model::E => linspace(20.0, 200.0, 10),
        };
        for kind in kinds(50.0) {
            let s = kind.state()?;
            let empty = CountAccumulator::new(&grid);
            let spec = EnsembleSpec::new(&s, p, model, empty.horizon(), n_traj, MC_SEED)?;
            let stats = run_parallel(&spec, &empty).finish(MC_SEED);
            let mut series_worst: f64 = 0.0;
            for (i, &t) in grid.iter().enumerate() {
                let z = stats.mean_counts[i].deviation(mean_counts(model, &s, &p, t));
                total += 1;
                if z >= 3.0 {
                    outside += 1;
                }
                series_worst = series_worst.max(z);
                worst.see(z, || format!("{model:?} {kind:?} λt={t}"));
            }
            details.push(format!("{model:?} {kind:?}: max {series_worst:.2} σ"));
        }
    }
    Ok(Check {
        passed: outside == 0,
        measured: format!("{outside}/{total} grid points beyond 3σ, max {:.2} σ ({})", worst.value, worst.at),
        tolerance: "every point within 3 standard errors".into(),
        details,
        budget: Some(120.0),
    })
}

fn sd_k_constants() -> Result<Check> {
    let p = params(ETA, 0.0);
    let grid: Vec<f64> = (0..=40).map(|i| 0.01 * 500f64.powf(i as f64 / 40.0)).collect();
    let mut worst = Worst::default();
    for (kind, expected) in [
        (StateKind::Thermal(50.0), 2.0),
        (StateKind::Number(50), 0.98),
        (StateKind::Coherent(50.0), 1.0),
    ] {
        let s = kind.state_with_tail(FINE_TAIL)?;
        for &t in &grid {
            let k = sd_model::k_factor(&s, &p, t)?;
            worst.see((k - expected).abs(), || format!("{kind:?} λt={t:.4}"));
        }
    }
    Ok(Check {
        passed: worst.value < 1e-9,
        measured: format!("max |K - K_expected| = {:.3e} ({})", worst.value, worst.at),
        tolerance: "< 1e-9 over λt ∈ [0.01, 5]".into(),
        details: vec![],
        budget: None,
    })
}

fn e_origin_limit() -> Result<Check> {
    let p = params(ETA, 0.0);
    let t = 1e-6;
    let mut worst = Worst::default();
    let mut exact = true;
    let mut details = Vec::new();
    for kind in [
        StateKind::Coherent(1.0),
        StateKind::Coherent(50.0),
        StateKind::Thermal(1.0),
        StateKind::Thermal(50.0),
        StateKind::Number(2),
        StateKind::Number(50),
        StateKind::Number(100),
    ] {
        let s = kind.state()?;
        let k = e_model::k_factor(&s, &p, t)?;
        let limit = e_model::k_limit_origin(&s)?;
        worst.see((k - limit).abs(), || format!("{kind:?}"));
        details.push(format!("{kind:?}: K = {k:.12}, limit = {limit:.12}"));
        if let StateKind::Number(_) = kind {
            exact &= limit == 1.0;
        }
    }
    Ok(Check {
        passed: worst.value < 1e-6 && exact,
        measured: format!(
            "max |K - limit| = {:.3e} ({}); number-state limit exactly 1: {exact}",
            worst.value, worst.at
        ),
        tolerance: "< 1e-6 at λt = 1e-6, limit == 1 for number states".into(),
        details,
        budget: None,
    })
}

fn dual_path() -> Result<Check> {
    use e_model::closed as ec;
    use sd_model::closed as sc;
    let p = params(ETA, DARK);
    let mut worst = Worst::default();
    let mut evaluations = 0usize;
    for nbar in [10.0, 50.0, 100.0] {
        for kind in kinds(nbar) {
            let s = kind.state_with_tail(1e-17)?;
            for t in [0.5, 5.0, nbar] {
                for k in 1..=2 {
                    let a = e_model::xi_k(&s, &p, t, k)?;
                    let b = ec::xi_k(kind, &p, t, k)?;
                    worst.see(rel(a, b), || format!("Ξ_{k} {kind:?} λt={t}"));
                }
                let a = e_model::omega(&s, &p, t)?;
                let b = ec::omega(kind, &p, t)?;
                worst.see(rel(a, b), || format!("Ω {kind:?} λt={t}"));
                evaluations += 3;
            }
            for (q, beta) in [(0.0, 0.5), (0.4, 0.0), (0.4, 3.0), (0.8, 10.0), (1.0, 20.0)] {
                for k in 0..=2 {
                    let a = e_model::psi_k(&s, &p, q, beta, k);
                    let b = ec::psi_k(kind, &p, q, beta, k);
                    worst.see(rel(a, b), || format!("Ψ_{k} {kind:?} q={q} β={beta}"));
                    evaluations += 1;
                }
            }
            for (t, tau) in [(0.1, 0.2), (1.0, 1.5), (3.0, 0.5), (5.0, 10.0)] {
                for k in 0..=2 {
                    let a = sd_model::phi_k_w(&s, &p, t, tau, k);
                    let b = sc::phi_k_w(kind, &p, t, tau, k);
                    worst.see(rel(a, b), || format!("Φ_{k}^W {kind:?} λt={t} λτ={tau}"));
                    evaluations += 1;
                }
            }
        }
    }
    Ok(Check {
        passed: worst.value < 1e-10,
        measured: format!("max relative deviation {:.3e} ({}) over {evaluations} values", worst.value, worst.at),
        tolerance: "< 1e-10 relative".into(),
        details: vec![],
        budget: Some(30.0),
    })
}

fn effective_counting_time() -> Result<Check> {
    let p = params(ETA, DARK);
    let mut details = Vec::new();
    let mut e_ok = true;
    let mut e_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (small, large) in kinds(50.0).into_iter().zip(kinds(100.0)) {
        let a = e_model::effective_counting_time(&small.state()?, &p)?;
        let b = e_model::effective_counting_time(&large.state()?, &p)?;
        let ratio = b / a;
        e_ok &= (1.7..=2.3).contains(&ratio);
        e_range = (e_range.0.min(ratio), e_range.1.max(ratio));
        details.push(format!("E {large:?} / {small:?}: t_E = {b:.4} / {a:.4} = {ratio:.4}"));
    }
    let mut sd_ok = true;
    let mut sd_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (small, large) in kinds(50.0).into_iter().zip(kinds(100.0)) {
        let a = sd_counting_time(&small.state()?, &p);
        let b = sd_counting_time(&large.state()?, &p);
        let ratio = b / a;
        sd_ok &= (0.95..=1.05).contains(&ratio);
        sd_range = (sd_range.0.min(ratio), sd_range.1.max(ratio));
        details.push(format!("SD {large:?} / {small:?}: t_E = {b:.4} / {a:.4} = {ratio:.4}"));
    }
    details.push(format!("SD closed form: t_E = {:.4}", sd_model::effective_counting_time(&p)?));
    let sd_ratio = sd_range.1;
    Ok(Check {
        passed: e_ok && sd_ok,
        measured: format!(
            "E ratios {:.4}..{:.4}, SD ratios {:.4}..{sd_ratio:.4}",
            e_range.0, e_range.1, sd_range.0
        ),
        tolerance: "E in [1.7, 2.3], SD in [0.95, 1.05]".into(),
        details,
        budget: None,
    })
}

/// Time at which the SD real-count mean `m̄_t - dλt` reaches the same
/// fraction of `ηn̄` as the E-model definition, by bisection.
fn sd_counting_time(s: &DiagonalFockState, p: &DetectorParams) -> f64 {
    let target = e_model::EFFECTIVE_COUNT_FRACTION * p.eta() * s.mean();
    let real = |t: f64| sd_model::mean_counts(s, p, t) - p.dark() * p.lambda() * t;
    let (mut lo, mut hi) = (0.0, 1.0);
    while real(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if real(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn waiting_regimes() -> Result<Check> {
    let p = params(ETA, DARK);
    let window = default_window(ETA, 1.0);
    let s = StateKind::Number(100).state()?;
    let mut details = Vec::new();

    // E-model: N_CAV from n̄ down to 0.01.
    let end = time_for_n_cav(Model::E, &s, &p, 0.01);
    let grid = linspace(0.0, end, 121);
    let mut plateau_lo = f64::INFINITY;
    let mut plateau_hi = f64::NEG_INFINITY;
    let mut late = Vec::new();
    for &t in &grid {
        let nc = n_cav(Model::E, &s, &p, t);
        let tau = mean_waiting(Model::E, &s, &p, t, window)?;
        if nc > 5.0 {
            plateau_lo = plateau_lo.min(tau);
            plateau_hi = plateau_hi.max(tau);
        } else if nc < 0.3 {
            late.push((t, nc, tau));
        }
    }
    let variation = (plateau_hi - plateau_lo) / plateau_lo;
    let flat = variation < 0.05;
    let min_late = late.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    let rise = late.iter().all(|x| x.2 > 3.0 * plateau_lo);
    details.push(format!(
        "E: τ̄ ∈ [{plateau_lo:.4}, {plateau_hi:.4}] while N_CAV > 5 (variation {:.2}%)",
        100.0 * variation
    ));
    details.push(format!(
        "E: min τ̄ for N_CAV < 0.3 is {min_late:.4} = {:.2} × plateau ({} points)",
        min_late / plateau_lo,
        late.len()
    ));
    if let Some(&(t, nc, tau)) = late.iter().find(|x| x.2 > 3.0 * plateau_lo) {
        details.push(format!(
            "E: τ̄ first exceeds 3 × plateau at λt = {t:.2}, N_CAV = {nc:.3e} (τ̄ = {tau:.4})"
        ));
    } else {
        details.push("E: τ̄ never exceeds 3 × plateau on the grid".into());
    }

    // SD-model over the same N_CAV range, n̄e^{-λt} from n̄ to 0.01.
    let sd_end = time_for_n_cav(Model::Sd, &s, &p, 0.01);
    let sd_tau: Vec<f64> = linspace(0.0, sd_end, 121)
        .iter()
        .map(|&t| mean_waiting(Model::Sd, &s, &p, t, window))
        .collect::<cpm_core::Result<_>>()?;
    let increasing = sd_tau.windows(2).all(|w| w[1] > w[0]);
    details.push(format!(
        "SD: τ̄ from {:.4} to {:.4}, strictly increasing: {increasing}",
        sd_tau[0],
        sd_tau[sd_tau.len() - 1]
    ));

    // Dark counts only.
    let vacuum = DiagonalFockState::vacuum(0);
    let dark_window = 100.0 / DARK;
    let mut dark_dev: f64 = 0.0;
    for model in [Model::Sd, Model::E] {
        let tau = mean_waiting(model, &vacuum, &p, 1.0, dark_window)?;
        let dev = rel(tau, 1.0 / DARK);
        dark_dev = dark_dev.max(dev);
        details.push(format!("{model:?} vacuum: τ̄ = {tau:.4}, 1/(dλ) = {}", 1.0 / DARK));
    }
    let dark_ok = dark_dev < 0.02;
    Ok(Check {
        passed: flat && rise && increasing && dark_ok,
        measured: format!(
            "E plateau variation {:.2}%, E min late τ̄/plateau {:.2}, SD increasing {increasing}, dark deviation {:.3}%",
            100.0 * variation,
            min_late / plateau_lo,
            100.0 * dark_dev
        ),
        tolerance: "E < 5% for N_CAV > 5 and > 3× for N_CAV < 0.3; SD strictly increasing; dark < 2%".into(),
        details,
        budget: None,
    })
}

fn dead_time() -> Result<Check> {
    let p = params(ETA, DARK);
    let schedule = [40, 80, 160];
    let s = StateKind::Coherent(10.0).state_with_n_max(160)?;
    let probe = sd_model::dead_time_divergence_probe(&s, &p, 1.0, 0.01, &schedule)?;
    let m = probe.first_moments();
    let ratio = m[m.len() - 1] / m[0];
    let increasing = probe.is_strictly_increasing();
    let thermal = sd_model::dead_time_divergence_probe_exact(StateKind::Thermal(10.0), &p, 1.0, 0.01, &schedule)?;
    let moments = |probe: &sd_model::DeadTimeProbe| {
        probe
            .n_max
            .iter()
            .zip(&probe.ln_first_moment)
            .map(|(n, l)| format!("n_max {n}: ln M1 = {l:.6}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok(Check {
        passed: increasing && ratio > 2.0,
        measured: format!("coherent(10) last/first = {ratio:.6}, strictly increasing: {increasing}"),
        tolerance: "strictly increasing and last/first > 2".into(),
        details: vec![
            format!("coherent(10): {}", moments(&probe)),
            format!("thermal(10), for comparison: {}", moments(&thermal)),
        ],
        budget: None,
    })
}

fn cavity_damping() -> Result<Check> {
    let undamped = params(ETA, DARK);
    let mut max_abs: f64 = 0.0;
    for kind in [StateKind::Coherent(10.0), StateKind::Number(5), StateKind::Thermal(10.0)] {
        let s = kind.state()?;
        for t in [0.1, 1.0, 5.0] {
            let a = sd_model::no_count_damped(&s, &undamped, t);
            let b = sd_model::no_count(&s, &undamped, t);
            for (x, y) in a.probs().iter().zip(b.probs()) {
                max_abs = max_abs.max((x - y).abs());
            }
        }
    }
    let damped = undamped.with_cavity(0.1)?;
    let times = linspace(0.05, 1.0, 20);
    let zero_count_change = |s: &DiagonalFockState| {
        times
            .iter()
            .map(|&t| {
                let a = sd_model::no_count_damped(s, &damped, t).trace();
                let b = sd_model::zero_count_probability(s, &undamped, t);
                rel(a, b)
            })
            .fold(0.0, f64::max)
    };
    let single = zero_count_change(&StateKind::Number(1).state()?);
    let bright = zero_count_change(&StateKind::Coherent(50.0).state()?);
    Ok(Check {
        passed: max_abs <= 1e-15 && single < 0.05,
        measured: format!("c = 0 max elementwise |Δ| = {max_abs:.3e}; c = 0.1 number(1) max relative change {:.3}%", 100.0 * single),
        tolerance: "c = 0: <= 1e-15; c = 0.1: < 5% at λt <= 1".into(),
        details: vec![format!("coherent(50), for information: max relative change {:.1}%", 100.0 * bright)],
        budget: None,
    })
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn close(a: &DiagonalFockState, b: &DiagonalFockState) -> f64 {
    a.probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

fn superoperator_identities() -> Result<Check> {
    let mut rng = trajectory_rng(11, 0);
    let mut worst = Worst::default();
    for case in 0..100 {
        let len = 1 + (rng.next_u64() % 40) as usize;
        let weights: Vec<f64> = (0..len).map(|_| uniform(&mut rng)).collect();
        let total: f64 = weights.iter().sum::<f64>().max(1e-12);
        let s = DiagonalFockState::from_weights(weights.iter().map(|w| w / total).collect())?;
        let lt = 5.0 * uniform(&mut rng);
        let y = 2.0 * uniform(&mut rng);
        let q = uniform(&mut rng);

        let lhs = apply_a(&apply_u(&s, lt));
        let rhs = apply_u(&apply_a(&s), lt).scaled((-lt).exp());
        worst.see(close(&lhs, &rhs), || format!("Â Û, case {case}"));

        let lhs = apply_exp_a(&apply_u(&s, lt), y);
        let rhs = apply_u(&apply_exp_a(&s, y * (-lt).exp()), lt);
        worst.see(close(&lhs, &rhs), || format!("exp(yÂ) Û, case {case}"));

        let a = DiagonalSuperop::R { lt, q };
        let b = DiagonalSuperop::ExpEps { y };
        let ab = b.apply(&a.apply(&s));
        let ba = a.apply(&b.apply(&s));
        worst.see(close(&ab, &ba), || format!("R̂ exp(yε̂), case {case}"));
    }
    Ok(Check {
        passed: worst.value <= 1e-12,
        measured: format!("max relative elementwise deviation {:.3e} ({})", worst.value, worst.at),
        tolerance: "<= 1e-12 on 100 random states".into(),
        details: vec![],
        budget: None,
    })
}

fn determinism() -> Result<Check> {
    let dir = tempfile::tempdir().map_err(|e| crate::error::CliError::io(std::env::temp_dir(), e))?;
    // The config comment records the output path, so every run writes to
    // the same files.
    let out = dir.path().join("trajectories.csv");
    let dump = dir.path().join("events.tsv");
    let config = ExperimentConfig::resolve(ConfigPatch {
        model: Some(ModelChoice::Both),
        nbar: Some(10.0),
        traj: Some(5_000),
        seed: Some(42),
        out: Some(out.clone()),
        ..Default::default()
    })?;
    let run = |threads: usize| -> Result<(Vec<u8>, Vec<u8>)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::error::CliError::Config(e.to_string()))?;
        pool.install(|| crate::cmd_trajectories(&config, Some(&dump)))?;
        let bytes = (read(&out)?, read(&dump)?);
        for path in [&out, &dump] {
            std::fs::remove_file(path).map_err(|e| crate::error::CliError::io(path, e))?;
        }
        Ok(bytes)
    };
    let first = run(1)?;
    let second = run(1)?;
    let parallel = run(4)?;
    let same = first == second && first == parallel;
    Ok(Check {
        passed: same,
        measured: format!(
            "output {} bytes, dump {} bytes; identical across runs on 1, 1 and 4 threads: {same}",
            first.0.len(),
            first.1.len()
        ),
        tolerance: "byte-identical outputs".into(),
        details: vec![],
        budget: None,
    })
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| crate::error::CliError::io(path, e))
}
