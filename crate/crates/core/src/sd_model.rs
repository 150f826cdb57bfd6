//! Photon-absorbing detector: jump superoperator `λ(ηÂ + d)`.
//!
//! The no-count evolution is `e^{-dλt} Û_{λt} e^{qφ_t Â}` with
//! `φ_t = 1 - e^{-λt}`. Traces against it reduce to the generating function
//! `G(z) = Σ ρ_n z^n` at `z = 1 - ηφ_t`, which is what most of this module
//! evaluates.

use alloc::vec::Vec;

use libm::{exp, expm1};

use crate::counting;
use crate::e_model::EFFECTIVE_COUNT_FRACTION;
use crate::error::{CpmError, Result};
use crate::fock::{DiagonalFockState, StateKind};
use crate::num::{ln, ln_binomial, ln_factorial, ln_falling, ln_one_minus_exp, ln_pow, LogSum};
use crate::params::{CountDistribution, DetectorParams, WaitingTimeCurve};
use crate::superops::{apply_exp_a, apply_u};

/// Below this mean count the K factor is reported as undefined.
const K_FACTOR_FLOOR: f64 = 1e-12;

/// `1 - e^{-λt}`.
pub fn phi_t(params: &DetectorParams, t: f64) -> f64 {
    -expm1(-params.lambda() * t)
}

fn no_count_with(state: &DiagonalFockState, dark_lt: f64, decay_lt: f64, y: f64) -> DiagonalFockState {
    apply_u(&apply_exp_a(state, y), decay_lt).scaled(exp(-dark_lt))
}

/// Unnormalised state conditioned on no registered counts in `(0, t)`.
///
/// Its trace is the zero-count probability.
pub fn no_count(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> DiagonalFockState {
    let lt = params.lambda() * t;
    no_count_with(state, params.dark() * lt, lt, params.q() * phi_t(params, t))
}

/// Unconditioned evolution `Û_{λt} e^{φ_t Â}`; trace preserving.
pub fn ute(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> DiagonalFockState {
    let lt = params.lambda() * t;
    apply_u(&apply_exp_a(state, phi_t(params, t)), lt)
}

/// `Σ_n ρ_n z^n` together with its first two derivatives, by Horner's scheme.
fn generating_function(probs: &[f64], z: f64) -> (f64, f64, f64) {
    let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
    for &p in probs.iter().rev() {
        g2 = g2 * z + 2.0 * g1;
        g1 = g1 * z + g;
        g = g * z + p;
    }
    (g, g1, g2)
}

/// Probability of no registered count in `(0, t)`.
pub fn zero_count_probability(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    let lt = params.lambda() * t;
    let z = 1.0 - params.eta() * phi_t(params, t);
    exp(-params.dark() * lt) * generating_function(state.probs(), z).0
}

/// Distribution of photon (non-dark) counts: binomial thinning of the photon
/// number with success probability `ηφ_t`.
fn photon_counts(state: &DiagonalFockState, p: f64) -> Vec<f64> {
    let probs = state.probs();
    let ln_p = ln(p);
    let ln_q = ln(1.0 - p);
    (0..probs.len())
        .map(|j| {
            let mut acc = LogSum::new();
            for (n, &rho) in probs.iter().enumerate().skip(j) {
                if rho > 0.0 {
                    let ln_fail = if n == j { 0.0 } else { (n - j) as f64 * ln_q };
                    let ln_succ = if j == 0 { 0.0 } else { j as f64 * ln_p };
                    acc.add(ln(rho) + ln_binomial(n, j) + ln_succ + ln_fail);
                }
            }
            acc.value()
        })
        .collect()
}

/// Count probabilities `P_t(m)`, `m = 0..=m_max`.
///
/// Without `m_max` the full support is returned, trimmed where the remaining
/// mass is below `1e-15`.
pub fn count_distribution(
    state: &DiagonalFockState,
    params: &DetectorParams,
    t: f64,
    m_max: Option<usize>,
) -> CountDistribution {
    let real = photon_counts(state, params.eta() * phi_t(params, t));
    counting::with_dark_counts(&real, params.dark() * params.lambda() * t, t, m_max)
}

/// `Φ_k(b, x) = Σ_{n≥k} ρ_n n!/(n-k)! (x + e^{-λb})^{n-k}`.
pub fn phi_k(state: &DiagonalFockState, params: &DetectorParams, b: f64, x: f64, k: usize) -> f64 {
    phi_k_at(state, x + exp(-params.lambda() * b), k)
}

fn phi_k_at(state: &DiagonalFockState, u: f64, k: usize) -> f64 {
    let mut acc = LogSum::new();
    for (n, &rho) in state.probs().iter().enumerate().skip(k) {
        if rho > 0.0 {
            acc.add(ln(rho) + ln_falling(n, k) + ln_pow(u, n - k));
        }
    }
    acc.value()
}

/// `Φ_k(b, x)` as the double series `Σ_{n,l} (n+l+k)!/(n! l!) e^{-λbn} x^l ρ_{n+l+k}`
/// left by expanding the shift operators; used to cross-check [`phi_k`].
pub fn phi_k_double_sum(state: &DiagonalFockState, params: &DetectorParams, b: f64, x: f64, k: usize) -> f64 {
    let probs = state.probs();
    let lb = params.lambda() * b;
    let ln_x = ln(x);
    let mut acc = LogSum::new();
    for total in k..probs.len() {
        let rho = probs[total];
        if rho <= 0.0 {
            continue;
        }
        let rest = total - k;
        for n in 0..=rest {
            let l = rest - n;
            let ln_xl = if l == 0 { 0.0 } else { l as f64 * ln_x };
            acc.add(ln(rho) + ln_factorial(total) - ln_factorial(n) - ln_factorial(l) - lb * n as f64 + ln_xl);
        }
    }
    acc.value()
}

/// Argument `1 - ηφ_τ e^{-λt}` of the functionals entering the waiting density.
fn waiting_argument(params: &DetectorParams, t: f64, tau: f64) -> f64 {
    1.0 - params.eta() * phi_t(params, tau) * exp(-params.lambda() * t)
}

/// Closed forms of the functionals for the three standard states.
pub mod closed {
    use super::*;

    /// `Σ ρ_n n!/(n-k)! u^{n-k}` for an untruncated state.
    pub fn phi_k(kind: StateKind, u: f64, k: usize) -> f64 {
        match kind {
            StateKind::Coherent(nbar) => exp(ln_pow(nbar, k) - nbar * (1.0 - u)),
            StateKind::Number(n) => {
                if k > n {
                    0.0
                } else {
                    exp(ln_falling(n, k) + ln_pow(u, n - k))
                }
            }
            StateKind::Thermal(nbar) => {
                let a = StateKind::thermal_ratio(nbar);
                exp(ln_factorial(k) + ln(1.0 - a) + ln_pow(a, k) - (k + 1) as f64 * ln(1.0 - a * u))
            }
        }
    }

    /// The waiting-density functional `Φ_k^W(t, τ)`.
    pub fn phi_k_w(kind: StateKind, params: &DetectorParams, t: f64, tau: f64, k: usize) -> f64 {
        phi_k(kind, waiting_argument(params, t, tau), k)
    }
}

/// `Φ_k^W(t, τ)` from the Fock weights.
pub fn phi_k_w(state: &DiagonalFockState, params: &DetectorParams, t: f64, tau: f64, k: usize) -> f64 {
    phi_k_at(state, waiting_argument(params, t, tau), k)
}

/// `m̄_t = dλt + ηn̄φ_t`.
pub fn mean_counts(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    params.dark() * params.lambda() * t + params.eta() * state.mean() * phi_t(params, t)
}

/// `⟨m(m-1)⟩_t = (dλt)² + 2ηn̄dλtφ_t + (ηφ_t)² ⟨n(n-1)⟩`.
pub fn second_factorial_moment(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    let dark = params.dark() * params.lambda() * t;
    let real = params.eta() * phi_t(params, t);
    dark * dark + 2.0 * dark * real * state.mean() + real * real * state.factorial_moment(2)
}

/// `K_t = ⟨m(m-1)⟩_t / m̄_t²`.
pub fn k_factor(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> Result<f64> {
    let mean = mean_counts(state, params, t);
    if !(mean >= K_FACTOR_FLOOR) {
        return Err(CpmError::Undefined("K factor at vanishing mean count"));
    }
    Ok(second_factorial_moment(state, params, t) / (mean * mean))
}

/// Time at which the real-count mean `ηn̄φ_t` reaches
/// [`EFFECTIVE_COUNT_FRACTION`] of `ηn̄`; the same for every state.
pub fn effective_counting_time(params: &DetectorParams) -> Result<f64> {
    let lambda = params.lambda();
    if !(lambda > 0.0) {
        return Err(CpmError::Domain {
            name: "lambda",
            value: lambda,
            expected: "> 0",
        });
    }
    Ok(-ln(1.0 - EFFECTIVE_COUNT_FRACTION) / lambda)
}

/// Joint density of a click at `t` and the next click at `t + τ` (non-normalised).
pub fn waiting_density(state: &DiagonalFockState, params: &DetectorParams, t: f64, tau: f64) -> f64 {
    let (g, g1, g2) = generating_function(state.probs(), waiting_argument(params, t, tau));
    waiting_density_from(params, t, tau, g, g1, g2)
}

fn waiting_density_from(params: &DetectorParams, t: f64, tau: f64, g: f64, g1: f64, g2: f64) -> f64 {
    let lambda = params.lambda();
    let (eta, d) = (params.eta(), params.dark());
    let lt = lambda * t;
    let ltau = lambda * tau;
    let photon_pair = eta * eta * exp(-2.0 * lt - ltau) * g2;
    let mixed = eta * d * exp(-lt) * (1.0 + exp(-ltau)) * g1;
    let dark_pair = d * d * g;
    let value = lambda * lambda * exp(-d * ltau) * (photon_pair + mixed + dark_pair);
    value.max(0.0)
}

/// `W_t(τ)` sampled on the Simpson grid over `[0, window]`, with `𝒩` and `τ̄`.
pub fn waiting_curve(
    state: &DiagonalFockState,
    params: &DetectorParams,
    t: f64,
    window: f64,
) -> Result<WaitingTimeCurve> {
    let step = counting::waiting_max_step(params.eta(), params.lambda());
    counting::waiting_curve(t, window, step, |tau| waiting_density(state, params, t, tau))
}

/// `τ̄ = 𝒩^{-1} ∫_0^T τ W_t(τ) dτ`.
pub fn mean_waiting(state: &DiagonalFockState, params: &DetectorParams, t: f64, window: f64) -> Result<f64> {
    waiting_curve(state, params, t, window).map(|c| c.mean)
}

/// Mean photon number left in the cavity, `n̄ e^{-λt}`.
pub fn n_cav(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    state.mean() * exp(-params.lambda() * t)
}

/// `(1 - e^{-pλt})/p`.
fn phi_tilde(params: &DetectorParams, t: f64) -> f64 {
    let p = params.p();
    -expm1(-params.lambda() * p * t) / p
}

/// No-count state for a cavity that also leaks at rate `λc`.
pub fn no_count_damped(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> DiagonalFockState {
    let lt = params.lambda() * t;
    no_count_with(
        state,
        params.dark() * lt,
        params.lambda() * params.p() * t,
        params.q_tilde() * phi_tilde(params, t),
    )
}

/// First count moment of the dead-time-corrected count distribution at a
/// sequence of Fock truncations.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadTimeProbe {
    pub n_max: Vec<usize>,
    /// Natural logarithm of the first moment at each truncation.
    pub ln_first_moment: Vec<f64>,
}

impl DeadTimeProbe {
    pub fn first_moments(&self) -> Vec<f64> {
        self.ln_first_moment.iter().map(|&l| exp(l)).collect()
    }

    /// Ratios of successive first moments.
    pub fn ratios(&self) -> Vec<f64> {
        self.ln_first_moment.windows(2).map(|w| exp(w[1] - w[0])).collect()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.ln_first_moment.windows(2).all(|w| w[1] > w[0])
    }
}

/// Evaluates `Σ_m m Tr[N̂_t(m)ρ]` for the counting operator with a dead time
/// `x` after each click, truncating the state at every entry of `schedule`.
///
/// The dead-time construction generates `exp(κ(e^{aÂ} - e^{bÂ}))`, whose
/// coefficients grow factorially. The moment then diverges with the
/// truncation for states with geometric tails (thermal), while Poisson tails
/// (coherent) still give a convergent sum. Weights that underflow in linear
/// storage drop out here; see [`dead_time_divergence_probe_exact`].
pub fn dead_time_divergence_probe(
    state: &DiagonalFockState,
    params: &DetectorParams,
    t: f64,
    x: f64,
    schedule: &[usize],
) -> Result<DeadTimeProbe> {
    if let Some(&n) = schedule.iter().find(|&&n| n > state.n_max()) {
        return Err(CpmError::Truncation { n, n_max: state.n_max() });
    }
    let ln_rho: Vec<f64> = state.probs().iter().map(|&p| ln(p)).collect();
    Ok(probe_from_ln_weights(&ln_rho, params, t, x, schedule))
}

/// [`dead_time_divergence_probe`] with the untruncated state's weights kept
/// in logarithms, so photon numbers with `ρ_n` below the smallest `f64`
/// still contribute.
pub fn dead_time_divergence_probe_exact(
    kind: StateKind,
    params: &DetectorParams,
    t: f64,
    x: f64,
    schedule: &[usize],
) -> Result<DeadTimeProbe> {
    kind.validate()?;
    let len = schedule.iter().copied().max().map_or(0, |n| n + 1);
    let ln_rho: Vec<f64> = (0..len).map(|n| kind.ln_weight(n)).collect();
    Ok(probe_from_ln_weights(&ln_rho, params, t, x, schedule))
}

fn probe_from_ln_weights(ln_rho: &[f64], params: &DetectorParams, t: f64, x: f64, schedule: &[usize]) -> DeadTimeProbe {
    let len = schedule.iter().copied().max().map_or(0, |n| n + 1);
    let lambda = params.lambda();
    let p = params.p();
    let dark_lt = params.dark() * lambda * t;

    // ln g_j for the exponent X = dλt + Σ_{j≥1} g_j Â^j.
    let mut ln_g = alloc::vec![f64::NEG_INFINITY; len];
    if x == 0.0 {
        if len > 1 {
            ln_g[1] = ln(params.eta() * phi_tilde(params, t));
        }
    } else {
        let phi_x = -expm1(-lambda * x);
        let a = params.eta() * phi_x;
        let ln_kappa = params.dark() * lambda * x - ln(p * phi_x);
        for (j, slot) in ln_g.iter_mut().enumerate().skip(1) {
            *slot = ln_kappa + ln_pow(a, j) + ln_one_minus_exp(-(j as f64) * p * lambda * t) - ln_factorial(j);
        }
    }

    // ln h for e^{Σ g_j Â^j}: h_n = (1/n) Σ_k k g_k h_{n-k}.
    let mut ln_h = alloc::vec![f64::NEG_INFINITY; len];
    if len > 0 {
        ln_h[0] = 0.0;
    }
    for n in 1..len {
        let mut acc = LogSum::new();
        for k in 1..=n {
            acc.add(ln(k as f64) + ln_g[k] + ln_h[n - k]);
        }
        ln_h[n] = acc.ln() - ln(n as f64);
    }

    // ln f for X e^{X} with the e^{dλt} factor cancelled against Ŝ_t.
    let ln_dark = ln(dark_lt);
    let ln_f: Vec<f64> = (0..len)
        .map(|j| {
            let mut acc = LogSum::new();
            acc.add(ln_dark + ln_h[j]);
            for k in 1..=j {
                acc.add(ln_g[k] + ln_h[j - k]);
            }
            acc.ln()
        })
        .collect();

    let w = exp(-lambda * p * t) + params.q_tilde() * phi_tilde(params, t);
    let ln_w = ln(w);
    let moment = |n_max: usize| -> f64 {
        // Renormalise the kept weights.
        let mut norm = LogSum::new();
        ln_rho.iter().take(n_max + 1).for_each(|&l| norm.add(l));
        let ln_norm = norm.ln();
        let mut acc = LogSum::new();
        for (n, &lr) in ln_rho.iter().enumerate().take(n_max + 1) {
            if lr == f64::NEG_INFINITY {
                continue;
            }
            for (j, &lf) in ln_f.iter().enumerate().take(n + 1) {
                let ln_wp = if n == j { 0.0 } else { (n - j) as f64 * ln_w };
                acc.add(lr - ln_norm + lf + ln_falling(n, j) + ln_wp);
            }
        }
        acc.ln()
    };
    DeadTimeProbe {
        n_max: schedule.to_vec(),
        ln_first_moment: schedule.iter().map(|&n| moment(n)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, number_state, thermal_state};
    use crate::superops::apply_a;
    use proptest::prelude::*;

    fn params(eta: f64, dark: f64) -> DetectorParams {
        DetectorParams::new(1.0, eta, dark).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    #[test]
    fn phi_t_limits() {
        let p = params(1.0, 0.0);
        assert_eq!(phi_t(&p, 0.0), 0.0);
        assert!((phi_t(&p, 1.0) - (1.0 - exp(-1.0))).abs() < 1e-16);
        assert!((phi_t(&p, 800.0) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn no_count_examples() {
        let one = number_state(1, 4).unwrap();
        let ideal = params(1.0, 0.0);
        for lt in [0.0, 0.3, 2.0] {
            assert!(rel(no_count(&one, &ideal, lt).trace(), exp(-lt)) < 1e-14);
        }
        let coh = coherent_state(3.0, 40).unwrap();
        assert_eq!(no_count(&coh, &params(0.6, 0.1), 0.0).probs(), coh.probs());
        let vac = DiagonalFockState::vacuum(3);
        assert!(rel(no_count(&vac, &params(0.6, 5e-3), 1.0).trace(), exp(-0.005)) < 1e-15);
    }

    #[test]
    fn zero_count_matches_no_count_trace() {
        let s = thermal_state(4.0, 200).unwrap();
        let p = params(0.6, 0.05);
        for t in [0.1, 1.0, 3.0] {
            assert!(rel(zero_count_probability(&s, &p, t), no_count(&s, &p, t).trace()) < 1e-12);
        }
    }

    #[test]
    fn ute_preserves_trace_and_decays_mean() {
        let s = coherent_state(20.0, 90).unwrap();
        let p = params(0.6, 5e-3);
        for t in [0.0, 0.5, 2.0] {
            let out = ute(&s, &p, t);
            assert!((out.trace() - s.trace()).abs() < 1e-10);
            assert!(rel(out.mean(), n_cav(&s, &p, t)) < 1e-10);
        }
    }

    #[test]
    fn single_photon_counts() {
        let one = number_state(1, 3).unwrap();
        let dist = count_distribution(&one, &params(1.0, 0.0), core::f64::consts::LN_2, None);
        assert!((dist.probs[0] - 0.5).abs() < 1e-15);
        assert!((dist.probs[1] - 0.5).abs() < 1e-15);
        let origin = count_distribution(&one, &params(0.6, 0.1), 0.0, None);
        assert_eq!(origin.probs, [1.0]);
    }

    #[test]
    fn count_distribution_agrees_with_superoperator_traces() {
        // P(m) = Σ_k (dλt)^k/k! Tr[Ŝ_t (ηφ_t Â)^{m-k}/(m-k)! ρ].
        let s = coherent_state(2.0, 30).unwrap();
        let p = params(0.7, 0.2);
        let t = 0.8;
        let dist = count_distribution(&s, &p, t, Some(6));
        let y = p.eta() * phi_t(&p, t);
        let dark = p.dark() * t;
        let mut shifted = alloc::vec![s.clone()];
        for j in 1..=6 {
            shifted.push(apply_a(&shifted[j - 1]));
        }
        for m in 0..=6 {
            let mut expected = 0.0;
            for k in 0..=m {
                let j = m - k;
                let real = no_count(&shifted[j], &p, t).trace() * libm::pow(y, j as f64) / exp(ln_factorial(j));
                expected += libm::pow(dark, k as f64) / exp(ln_factorial(k)) * real;
            }
            assert!(rel(dist.probs[m], expected) < 1e-12, "m={m}");
        }
    }

    #[test]
    fn distribution_moments_match_closed_forms() {
        let p = params(0.6, 5e-3);
        for kind in [StateKind::Coherent(50.0), StateKind::Number(50), StateKind::Thermal(50.0)] {
            let s = kind.state().unwrap();
            for t in [0.1, 1.0, 5.0] {
                let dist = count_distribution(&s, &p, t, None);
                assert!((dist.total() - 1.0).abs() < 1e-9);
                assert!((dist.mean() - mean_counts(&s, &p, t)).abs() < 1e-9);
                assert!(rel(dist.factorial_moment(2), second_factorial_moment(&s, &p, t)) < 1e-8);
            }
        }
    }

    #[test]
    fn k_factor_examples() {
        let p = params(0.6, 5e-3);
        let coh = coherent_state(50.0, 200).unwrap();
        for t in [0.01, 1.0, 50.0] {
            assert!((k_factor(&coh, &p, t).unwrap() - 1.0).abs() < 1e-9);
        }
        let num = number_state(50, 60).unwrap();
        assert!((k_factor(&num, &params(0.6, 0.0), 0.3).unwrap() - 0.98).abs() < 1e-12);
        let th = StateKind::Thermal(50.0).state().unwrap();
        assert!((k_factor(&th, &params(0.6, 0.0), 0.3).unwrap() - 2.0).abs() < 1e-9);
        assert!((k_factor(&th, &p, 1e6).unwrap() - 1.0).abs() < 1e-3);
        assert!(k_factor(&coh, &p, 0.0).is_err());
    }

    #[test]
    fn phi_k_paths_agree() {
        let p = params(0.6, 0.0);
        for kind in [StateKind::Coherent(8.0), StateKind::Number(8), StateKind::Thermal(8.0)] {
            let s = kind.state_with_tail(1e-16).unwrap();
            for (b, x) in [(0.5, 0.1), (2.0, 0.3)] {
                for k in 0..4 {
                    let direct = phi_k(&s, &p, b, x, k);
                    assert!(rel(phi_k_double_sum(&s, &p, b, x, k), direct) < 1e-11);
                    let u = x + exp(-b);
                    assert!(rel(closed::phi_k(kind, u, k), direct) < 1e-10, "{kind:?} k={k}");
                }
            }
            // Φ_k(t, φ_t) is the k-th factorial moment.
            let t = 0.7;
            assert!(rel(phi_k(&s, &p, t, phi_t(&p, t), 2), s.factorial_moment(2)) < 1e-12);
            assert!(rel(phi_k(&s, &p, t, phi_t(&p, t), 0), 1.0) < 1e-12);
        }
    }

    #[test]
    fn waiting_density_limits() {
        let vac = DiagonalFockState::vacuum(5);
        assert_eq!(waiting_density(&vac, &params(0.6, 0.0), 1.0, 0.5), 0.0);
        let s = coherent_state(5.0, 60).unwrap();
        let p = params(0.0, 0.2);
        for tau in [0.0, 1.0, 7.0] {
            let expected = 0.04 * exp(-0.2 * tau);
            assert!(rel(waiting_density(&s, &p, 1.0, tau), expected) < 1e-12);
        }
    }

    #[test]
    fn waiting_density_uses_closed_functionals() {
        let p = params(0.6, 5e-3);
        for kind in [StateKind::Coherent(30.0), StateKind::Number(30), StateKind::Thermal(30.0)] {
            let s = kind.state_with_tail(1e-16).unwrap();
            for (t, tau) in [(0.1, 0.2), (2.0, 1.5)] {
                let d = p.dark();
                let l = p.lambda();
                let expected = l * l
                    * exp(-d * l * tau)
                    * (0.36 * exp(-l * (2.0 * t + tau)) * closed::phi_k_w(kind, &p, t, tau, 2)
                        + 0.6 * d * exp(-l * t) * (1.0 + exp(-l * tau)) * closed::phi_k_w(kind, &p, t, tau, 1)
                        + d * d * closed::phi_k_w(kind, &p, t, tau, 0));
                assert!(rel(waiting_density(&s, &p, t, tau), expected) < 1e-10);
                assert!(rel(phi_k_w(&s, &p, t, tau, 1), closed::phi_k_w(kind, &p, t, tau, 1)) < 1e-10);
            }
        }
    }

    #[test]
    fn dark_only_mean_waiting() {
        let s = coherent_state(5.0, 60).unwrap();
        let p = params(0.0, 5e-3);
        let window = 100.0 / 5e-3;
        let curve = counting::waiting_curve(1.0, window, f64::INFINITY, |tau| waiting_density(&s, &p, 1.0, tau)).unwrap();
        assert!(rel(curve.mean, 200.0) < 0.02);
    }

    #[test]
    fn damped_reduces_to_undamped() {
        let s = coherent_state(50.0, 200).unwrap();
        let p = params(0.6, 5e-3);
        for t in [0.1, 1.0, 4.0] {
            let a = no_count(&s, &p, t);
            let b = no_count_damped(&s, &p, t);
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() <= 1e-15 * x.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn damped_single_photon() {
        // One photon: detected at rate λ, leaked at rate λc. The no-count
        // probability is survival plus leakage before absorption.
        let c = 0.1;
        let p = DetectorParams::with_losses(1.0, 1.0, 0.0, c, 0.0).unwrap();
        let one = number_state(1, 3).unwrap();
        for t in [0.2, 1.0, 3.0] {
            let pt = (1.0 + c) * t;
            let expected = exp(-pt) + c / (1.0 + c) * (1.0 - exp(-pt));
            assert!(rel(no_count_damped(&one, &p, t).trace(), expected) < 1e-14);
        }
    }

    #[test]
    fn effective_counting_time_hits_fraction() {
        let p = params(0.6, 0.0);
        let t = effective_counting_time(&p).unwrap();
        let s = coherent_state(50.0, 120).unwrap();
        let frac = mean_counts(&s, &p, t) / (0.6 * s.mean());
        assert!((frac - EFFECTIVE_COUNT_FRACTION).abs() < 1e-14);
    }

    #[test]
    fn dead_time_probe_without_dead_time_is_mean() {
        let s = coherent_state(10.0, 80).unwrap();
        let p = params(0.6, 5e-3);
        let probe = dead_time_divergence_probe(&s, &p, 1.0, 0.0, &[40, 60, 80]).unwrap();
        for m in probe.first_moments() {
            assert!(rel(m, mean_counts(&s, &p, 1.0)) < 1e-10);
        }
        assert!(dead_time_divergence_probe(&s, &p, 1.0, 0.0, &[81]).is_err());
        let exact = dead_time_divergence_probe_exact(StateKind::Coherent(10.0), &p, 1.0, 0.0, &[40, 60, 80]).unwrap();
        for (a, b) in exact.ln_first_moment.iter().zip(&probe.ln_first_moment) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn dead_time_probe_converges_for_poisson_weights() {
        // For ρ_n Poissonian the series sums to e^{-dλt} G(w) F(n̄) with G(z) = e^{n̄(z-1)}
        // and F(s) = X(s) e^{X(s)}, X(s) = dλt + κ(e^{as} - e^{bs}).
        let p = params(0.6, 5e-3);
        let (nbar, t, x) = (10.0, 1.0, 0.01);
        let probe =
            dead_time_divergence_probe_exact(StateKind::Coherent(nbar), &p, t, x, &[40, 80, 160, 640]).unwrap();
        let phi_x = 1.0 - exp(-x);
        let a = 0.6 * phi_x;
        let b = a * exp(-t);
        let kappa = exp(5e-3 * x) / phi_x;
        let big_x = 5e-3 * t + kappa * (exp(a * nbar) - exp(b * nbar));
        let w = exp(-t) + 0.4 * (1.0 - exp(-t));
        let expected = exp(nbar * (w - 1.0) - 5e-3 * t) * big_x * exp(big_x);
        for m in probe.first_moments() {
            assert!(rel(m, expected) < 1e-10, "{m} vs {expected}");
        }
    }

    #[test]
    fn dead_time_probe_diverges_for_thermal_weights() {
        let p = params(0.6, 5e-3);
        let probe = dead_time_divergence_probe_exact(StateKind::Thermal(10.0), &p, 1.0, 0.01, &[40, 80, 160, 320]).unwrap();
        assert!(probe.is_strictly_increasing());
        let steps: Vec<f64> = probe.ln_first_moment.windows(2).map(|w| w[1] - w[0]).collect();
        // Log-growth per doubling increases: faster than any power of n_max.
        assert!(steps.windows(2).all(|s| s[1] > s[0]), "{steps:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn k_factor_constant_without_dark(n in 2usize..40, eta in 0.05f64..1.0) {
            let s = number_state(n, n + 5).unwrap();
            let p = params(eta, 0.0);
            let expected = (n as f64 - 1.0) / n as f64;
            for t in [0.01, 0.5, 5.0] {
                prop_assert!((k_factor(&s, &p, t).unwrap() - expected).abs() < 1e-10);
            }
        }

        #[test]
        fn waiting_density_non_negative(nbar in 0.0f64..30.0, eta in 0.0f64..1.0, d in 0.0f64..0.1, t in 0.0f64..5.0, tau in 0.0f64..10.0) {
            let s = coherent_state(nbar, 120).unwrap();
            prop_assert!(waiting_density(&s, &params(eta, d), t, tau) >= 0.0);
        }

        #[test]
        fn counts_insensitive_to_truncation(nbar in 1.0f64..20.0, t in 0.05f64..4.0) {
            let kind = StateKind::Coherent(nbar);
            let a = kind.state().unwrap();
            let b = kind.state_with_n_max(a.n_max() + 20).unwrap();
            let p = params(0.6, 5e-3);
            prop_assert!((mean_counts(&a, &p, t) - mean_counts(&b, &p, t)).abs() < 1e-9);
            let da = count_distribution(&a, &p, t, None);
            let db = count_distribution(&b, &p, t, Some(da.m_max()));
            for (x, y) in da.probs.iter().zip(&db.probs) {
                prop_assert!((x - y).abs() < 1e-11);
            }
        }
    }
}
