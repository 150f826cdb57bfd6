//! Vacuum-sensitive detector: jump superoperator `λ(ηε̂ + d)` with
//! `ε̂ρ = Ê₋ρÊ₊`.
//!
//! Between clicks the field evolves with `R̂_t = e^{-λt} e^{λtqε̂}` except on
//! the vacuum, which only feels dark counts. The vacuum bookkeeping always
//! lands on index 0 and is applied as a scalar correction.
//!
//! On the diagonal the number of absorptions by time `t` is
//! `min(n, N)` with `N ~ Poisson(λt)`, each registered with probability `η`.
//! Moments are evaluated in that form to avoid the cancellation in
//! `n̄(1 - Ξ₁)` at small `t`; the functionals themselves are available for
//! comparison.

use alloc::vec::Vec;

use libm::{exp, log, sqrt};

use crate::counting;
use crate::error::{CpmError, Result};
use crate::fock::{DiagonalFockState, StateKind};
use crate::num::{ln, ln_binomial, ln_factorial, ln_pow, poisson_weights, LogSum};
use crate::params::{CountDistribution, DetectorParams, WaitingTimeCurve};
use crate::special::{
    ln_bessel_i, ln_reg_upper_gamma, reg_lower_gamma_table, reg_upper_gamma, reg_upper_gamma_table,
};
use crate::superops::{apply_r, apply_resolvent_eps};

const K_FACTOR_FLOOR: f64 = 1e-12;

/// Fraction of the asymptotic real-count level that defines the effective
/// counting time.
pub const EFFECTIVE_COUNT_FRACTION: f64 = 0.95;

/// Unnormalised state conditioned on no registered counts in `(0, t)`.
pub fn no_count(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> DiagonalFockState {
    let lt = params.lambda() * t;
    let q = params.q();
    let evolved = apply_r(state, lt, q);
    let lost: Vec<f64> = state.probs().iter().zip(evolved.probs()).map(|(a, b)| a - b).collect();
    let lost = DiagonalFockState::from_weights_unchecked(lost);
    let vacuum_gain = apply_resolvent_eps(&lost, q).prob(0);
    let mut probs = evolved.into_probs();
    probs[0] += vacuum_gain;
    DiagonalFockState::from_weights_unchecked(probs).scaled(exp(-params.dark() * lt))
}

/// Unconditioned evolution: `R̂⁰_t ρ` plus the absorbed weight on the vacuum.
pub fn ute(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> DiagonalFockState {
    let evolved = apply_r(state, params.lambda() * t, 1.0);
    let gain = state.trace() - evolved.trace();
    let mut probs = evolved.into_probs();
    probs[0] += gain.max(0.0);
    DiagonalFockState::from_weights_unchecked(probs)
}

/// `S_k = Σ_{n≥k} ρ_n` for `k = 0..=n_max + 1`.
fn upper_sums(probs: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; probs.len() + 1];
    for n in (0..probs.len()).rev() {
        out[n] = out[n + 1] + probs[n];
    }
    out
}

/// Distribution of photon counts: binomial thinning of `min(n, N)`.
fn photon_counts(state: &DiagonalFockState, eta: f64, x: f64) -> Vec<f64> {
    let probs = state.probs();
    let len = probs.len();
    let tails = upper_sums(probs);
    let pois = poisson_weights(x, len);
    let cdf_upper = reg_lower_gamma_table(x, len);
    let (ln_eta, ln_q) = (ln(eta), ln(1.0 - eta));
    let thin = |k: usize, j: usize| -> f64 {
        let succ = if j == 0 { 0.0 } else { j as f64 * ln_eta };
        let fail = if k == j { 0.0 } else { (k - j) as f64 * ln_q };
        ln_binomial(k, j) + succ + fail
    };
    (0..len)
        .map(|j| {
            let mut acc = LogSum::new();
            for k in j..len {
                // N = k < n: stopped by the clock.
                acc.add(ln(pois[k]) + ln(tails[k + 1]) + thin(k, j));
                // n = k ≤ N: stopped by the empty cavity.
                acc.add(ln(probs[k]) + ln(cdf_upper[k]) + thin(k, j));
            }
            acc.value()
        })
        .collect()
}

/// Count probabilities `P_t(m)`, `m = 0..=m_max`.
pub fn count_distribution(
    state: &DiagonalFockState,
    params: &DetectorParams,
    t: f64,
    m_max: Option<usize>,
) -> CountDistribution {
    let lt = params.lambda() * t;
    let real = photon_counts(state, params.eta(), lt);
    counting::with_dark_counts(&real, params.dark() * lt, t, m_max)
}

/// Probability of no registered count in `(0, t)`.
pub fn zero_count_probability(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    no_count(state, params, t).trace()
}

fn nbar_or_undefined(state: &DiagonalFockState) -> Result<f64> {
    let nbar = state.mean();
    if nbar > 0.0 {
        Ok(nbar)
    } else {
        Err(CpmError::Undefined("functional normalised by a vanishing mean photon number"))
    }
}

/// `Ξ_k = (e^{-λt}/n̄) Σ_{n,m} (n+1) (λt)^m/m! ρ_{n+m+k}`.
pub fn xi_k(state: &DiagonalFockState, params: &DetectorParams, t: f64, k: usize) -> Result<f64> {
    let nbar = nbar_or_undefined(state)?;
    let x = params.lambda() * t;
    let probs = state.probs();
    let ln_x = ln(x);
    let mut acc = LogSum::new();
    for total in k..probs.len() {
        let rho = probs[total];
        if rho <= 0.0 {
            continue;
        }
        for m in 0..=total - k {
            let n = total - k - m;
            acc.add(ln(rho) + ln((n + 1) as f64) + ln_pow_or_one(ln_x, m) - ln_factorial(m));
        }
    }
    Ok(exp(acc.ln() - x) / nbar)
}

/// `Ω = (e^{-λt}/⟨n(n-1)⟩) Σ_{n,m} n(n-1) (λt)^m/m! ρ_{n+m}`.
pub fn omega(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> Result<f64> {
    let norm = state.factorial_moment(2);
    if !(norm > 0.0) {
        return Err(CpmError::Undefined("functional normalised by a vanishing second factorial moment"));
    }
    let x = params.lambda() * t;
    let probs = state.probs();
    let ln_x = ln(x);
    let mut acc = LogSum::new();
    for total in 2..probs.len() {
        let rho = probs[total];
        if rho <= 0.0 {
            continue;
        }
        for m in 0..=total - 2 {
            let n = (total - m) as f64;
            acc.add(ln(rho) + log(n * (n - 1.0)) + ln_pow_or_one(ln_x, m) - ln_factorial(m));
        }
    }
    Ok(exp(acc.ln() - x) / norm)
}

/// `Ψ_k(q, β) = Σ_{n,l} q^n (λβ)^l/l! ρ_{n+l+k}`.
pub fn psi_k(state: &DiagonalFockState, params: &DetectorParams, q: f64, beta: f64, k: usize) -> f64 {
    let probs = state.probs();
    let (ln_q, ln_y) = (ln(q), ln(params.lambda() * beta));
    let mut acc = LogSum::new();
    for total in k..probs.len() {
        let rho = probs[total];
        if rho <= 0.0 {
            continue;
        }
        for l in 0..=total - k {
            let n = total - k - l;
            acc.add(ln(rho) + ln_pow_or_one(ln_q, n) + ln_pow_or_one(ln_y, l) - ln_factorial(l));
        }
    }
    acc.value()
}

/// `k · ln_x` with `0 · (-inf) = 0`.
fn ln_pow_or_one(ln_x: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_x
    }
}

/// Closed forms of the functionals for untruncated standard states.
pub mod closed {
    use super::*;

    /// Relative size below which a series term stops the summation.
    const SERIES_DROP: f64 = 40.0;

    /// `ln Σ_n c_n` for log-terms that rise then fall in `n`.
    fn unimodal_sum(start: usize, mut ln_term: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = LogSum::new();
        let mut prev = f64::NEG_INFINITY;
        for n in start.. {
            let term = ln_term(n);
            acc.add(term);
            if n > start + 2 && term < prev && term < acc.ln() - SERIES_DROP {
                break;
            }
            if n > start + 1_000_000 {
                break;
            }
            prev = term;
        }
        acc.ln()
    }

    fn ln_coherent(nbar: f64, n: usize) -> f64 {
        -nbar + ln_pow(nbar, n) - ln_factorial(n)
    }

    pub fn xi_k(kind: StateKind, params: &DetectorParams, t: f64, k: usize) -> Result<f64> {
        let x = params.lambda() * t;
        match kind {
            StateKind::Thermal(nbar) => {
                check_nbar(nbar)?;
                let a = StateKind::thermal_ratio(nbar);
                Ok(exp(ln_pow(a, k) - ln(a) - x * (1.0 - a)))
            }
            StateKind::Number(n) => {
                check_nbar(n as f64)?;
                if k > n {
                    return Ok(0.0);
                }
                let m = n - k;
                Ok(((m + 1) as f64 * reg_upper_gamma(m + 2, x) - x * reg_upper_gamma(m + 1, x)) / n as f64)
            }
            StateKind::Coherent(nbar) => {
                check_nbar(nbar)?;
                if x == 0.0 {
                    let s = unimodal_sum(0, |n| ln((n + 1) as f64) + ln_coherent(nbar, n + k));
                    return Ok(exp(s) / nbar);
                }
                let z = 2.0 * sqrt(nbar * x);
                let ratio = log(nbar / x);
                let s = unimodal_sum(0, |n| {
                    ln((n + 1) as f64) + 0.5 * (n + k) as f64 * ratio + ln_bessel_i((n + k) as u32, z)
                });
                Ok(exp(s - x - nbar) / nbar)
            }
        }
    }

    pub fn omega(kind: StateKind, params: &DetectorParams, t: f64) -> Result<f64> {
        let x = params.lambda() * t;
        let norm = kind.second_factorial_moment();
        if !(norm > 0.0) {
            return Err(CpmError::Undefined("functional normalised by a vanishing second factorial moment"));
        }
        match kind {
            StateKind::Thermal(nbar) => Ok(exp(-x / (nbar + 1.0))),
            StateKind::Number(n) => {
                let nf = n as f64;
                let value = nf * (nf - 1.0) * reg_upper_gamma(n + 1, x) - 2.0 * x * (nf - 1.0) * reg_upper_gamma(n, x)
                    + x * x * reg_upper_gamma(n - 1, x);
                Ok(value / (nf * (nf - 1.0)))
            }
            StateKind::Coherent(nbar) => {
                if x == 0.0 {
                    return Ok(1.0);
                }
                let z = 2.0 * sqrt(nbar * x);
                let ratio = log(nbar / x);
                let s = unimodal_sum(2, |n| {
                    let nf = n as f64;
                    log(nf * (nf - 1.0)) + 0.5 * nf * ratio + ln_bessel_i(n as u32, z)
                });
                Ok(exp(s - x - nbar) / norm)
            }
        }
    }

    pub fn psi_k(kind: StateKind, params: &DetectorParams, q: f64, beta: f64, k: usize) -> f64 {
        let y = params.lambda() * beta;
        match kind {
            StateKind::Thermal(nbar) => {
                let a = StateKind::thermal_ratio(nbar);
                exp(ln(1.0 - a) + ln_pow(a, k) + y * a - ln(1.0 - q * a))
            }
            StateKind::Number(n) => {
                if k > n {
                    return 0.0;
                }
                let m = n - k;
                if q == 0.0 {
                    exp(ln_pow(y, m) - ln_factorial(m))
                } else {
                    exp(ln_pow(q, m) + y / q + ln_reg_upper_gamma(m + 1, y / q))
                }
            }
            StateKind::Coherent(nbar) => {
                if y == 0.0 {
                    let s = unimodal_sum(0, |n| ln_pow(q, n) + ln_coherent(nbar, n + k));
                    return exp(s);
                }
                if nbar == 0.0 {
                    return if k == 0 { 1.0 } else { 0.0 };
                }
                let z = 2.0 * sqrt(nbar * y);
                let ratio = log(nbar / y);
                let s = unimodal_sum(0, |n| {
                    ln_pow(q, n) + 0.5 * (n + k) as f64 * ratio + ln_bessel_i((n + k) as u32, z)
                });
                exp(s - nbar)
            }
        }
    }

    fn check_nbar(nbar: f64) -> Result<()> {
        if nbar > 0.0 {
            Ok(())
        } else {
            Err(CpmError::Undefined("functional normalised by a vanishing mean photon number"))
        }
    }
}

/// How a functional is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Route<'a> {
    /// Truncated double sums over the Fock weights.
    FockSum(&'a DiagonalFockState),
    /// Special-function closed forms of the untruncated state.
    Closed(StateKind),
}

/// `Ξ_1..Ξ_k_max` and `Ω` at one time, by either route.
#[derive(Debug, Clone, PartialEq)]
pub struct EModelFunctionals {
    pub t: f64,
    /// `xi[k - 1] = Ξ_k`.
    pub xi: Vec<f64>,
    /// `None` when `⟨n(n-1)⟩ = 0`.
    pub omega: Option<f64>,
}

impl EModelFunctionals {
    pub fn evaluate(route: Route<'_>, params: &DetectorParams, t: f64, k_max: usize) -> Result<Self> {
        let xi = (1..=k_max)
            .map(|k| match route {
                Route::FockSum(s) => xi_k(s, params, t, k),
                Route::Closed(kind) => closed::xi_k(kind, params, t, k),
            })
            .collect::<Result<Vec<_>>>()?;
        let omega = match route {
            Route::FockSum(s) => omega(s, params, t),
            Route::Closed(kind) => closed::omega(kind, params, t),
        }
        .ok();
        Ok(Self { t, xi, omega })
    }

    pub fn xi(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.xi.get(i).copied())
    }

    /// `m̄_t = dλt + ηn̄(1 - Ξ₁)`.
    pub fn mean_counts(&self, params: &DetectorParams, nbar: f64) -> Option<f64> {
        let dark = params.dark() * params.lambda() * self.t;
        Some(dark + params.eta() * nbar * (1.0 - self.xi(1)?))
    }

    /// `(dλt)² + 2ηn̄dλt(1 - Ξ₁) + η²[⟨n(n-1)⟩(1 - Ω) - 2n̄λtΞ₂]`.
    pub fn second_factorial_moment(&self, params: &DetectorParams, nbar: f64, second: f64) -> Option<f64> {
        let lt = params.lambda() * self.t;
        let dark = params.dark() * lt;
        let eta = params.eta();
        let omega_part = if second > 0.0 { second * (1.0 - self.omega?) } else { 0.0 };
        Some(
            dark * dark
                + 2.0 * eta * nbar * dark * (1.0 - self.xi(1)?)
                + eta * eta * (omega_part - 2.0 * nbar * lt * self.xi(2)?),
        )
    }
}

/// `E[min(n, N)]` and `E[min(n, N)(min(n, N) - 1)]` for `N ~ Poisson(λt)`.
fn absorption_moments(state: &DiagonalFockState, x: f64) -> (f64, f64) {
    let tails = upper_sums(state.probs());
    let cdf = reg_lower_gamma_table(x, tails.len());
    let mut first = 0.0;
    let mut second = 0.0;
    for k in 1..tails.len() {
        let both = cdf[k] * tails[k];
        first += both;
        if k >= 2 {
            second += 2.0 * (k - 1) as f64 * both;
        }
    }
    (first, second)
}

/// `m̄_t = dλt + ηn̄(1 - Ξ₁)`.
pub fn mean_counts(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    let lt = params.lambda() * t;
    params.dark() * lt + params.eta() * absorption_moments(state, lt).0
}

/// `⟨m(m-1)⟩_t`.
pub fn second_factorial_moment(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    let lt = params.lambda() * t;
    let dark = params.dark() * lt;
    let eta = params.eta();
    let (first, second) = absorption_moments(state, lt);
    dark * dark + 2.0 * dark * eta * first + eta * eta * second
}

/// `K_t = ⟨m(m-1)⟩_t / m̄_t²`.
pub fn k_factor(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> Result<f64> {
    let mean = mean_counts(state, params, t);
    if !(mean >= K_FACTOR_FLOOR) {
        return Err(CpmError::Undefined("K factor at vanishing mean count"));
    }
    Ok(second_factorial_moment(state, params, t) / (mean * mean))
}

/// Small-time limit of the K factor without dark counts,
/// `(1 - ρ₀ - ρ₁)/(1 - ρ₀)²`.
pub fn k_limit_origin(state: &DiagonalFockState) -> Result<f64> {
    let probs = state.probs();
    let occupied: f64 = probs.iter().skip(1).sum();
    let multi: f64 = probs.iter().skip(2).sum();
    if !(occupied > 0.0) {
        return Err(CpmError::Undefined("K factor limit for an empty cavity"));
    }
    Ok(multi / (occupied * occupied))
}

/// Mean photon number left in the cavity, `n̄Ξ₁`.
pub fn n_cav(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> f64 {
    let x = params.lambda() * t;
    let tails = upper_sums(state.probs());
    let survive = reg_upper_gamma_table(x, tails.len());
    (1..tails.len()).map(|k| survive[k] * tails[k]).sum()
}

/// Time at which the real-count mean reaches [`EFFECTIVE_COUNT_FRACTION`] of
/// its asymptote `ηn̄`.
pub fn effective_counting_time(state: &DiagonalFockState, params: &DetectorParams) -> Result<f64> {
    let nbar = nbar_or_undefined(state)?;
    let lambda = params.lambda();
    if !(lambda > 0.0) {
        return Err(CpmError::Domain {
            name: "lambda",
            value: lambda,
            expected: "> 0",
        });
    }
    let target = EFFECTIVE_COUNT_FRACTION * nbar;
    let reached = |t: f64| absorption_moments(state, lambda * t).0 >= target;
    let mut hi = 1.0 / lambda;
    while !reached(hi) {
        hi *= 2.0;
        if hi > 1e12 / lambda {
            return Err(CpmError::Undefined("effective counting time not reached"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pieces of the waiting density that depend only on `t`.
struct WaitingPrep {
    /// `(λd)² (1 - Tr R̂⁰_t ρ)`.
    vacuum_pair: f64,
    /// `σ = Ĵ R̂⁰_t ρ`.
    sigma: Vec<f64>,
}

impl WaitingPrep {
    fn new(state: &DiagonalFockState, params: &DetectorParams, t: f64) -> Self {
        let lambda = params.lambda();
        let x = lambda * t;
        let probs = state.probs();
        let absorbed_cdf = reg_lower_gamma_table(x, probs.len() + 1);
        let empty: f64 = probs.iter().enumerate().map(|(n, &p)| p * absorbed_cdf[n + 1]).sum();
        let ld = lambda * params.dark();
        let evolved = apply_r(state, x, 1.0);
        let r = evolved.probs();
        let sigma = (0..r.len())
            .map(|n| {
                let up = if n + 1 < r.len() { r[n + 1] } else { 0.0 };
                lambda * (params.eta() * up + params.dark() * r[n])
            })
            .collect();
        Self {
            vacuum_pair: ld * ld * empty,
            sigma,
        }
    }

    fn density(&self, params: &DetectorParams, tau: f64) -> f64 {
        let lambda = params.lambda();
        let (eta, d, q) = (params.eta(), params.dark(), params.q());
        let ltau = lambda * tau;
        let len = self.sigma.len();
        let kept = reg_upper_gamma_table(q * ltau, len + 1);
        let emptied = reg_lower_gamma_table(ltau, len + 1);
        let (mut photon, mut dark, mut vacuum) = (0.0, 0.0, 0.0);
        let mut q_pow = 1.0;
        for (m, &s) in self.sigma.iter().enumerate() {
            photon += s * kept[m];
            dark += s * kept[m + 1];
            vacuum += s * q_pow * emptied[m + 1];
            q_pow *= q;
        }
        let jumps = lambda * exp(-ltau * (1.0 - q)) * (eta * photon + d * dark);
        let value = exp(-d * ltau) * (self.vacuum_pair + jumps + lambda * d * vacuum);
        value.max(0.0)
    }
}

/// Joint density of a click at `t` and the next click at `t + τ` (non-normalised).
pub fn waiting_density(state: &DiagonalFockState, params: &DetectorParams, t: f64, tau: f64) -> f64 {
    WaitingPrep::new(state, params, t).density(params, tau)
}

/// `W_t(τ)` sampled on the Simpson grid over `[0, window]`, with `𝒩` and `τ̄`.
pub fn waiting_curve(
    state: &DiagonalFockState,
    params: &DetectorParams,
    t: f64,
    window: f64,
) -> Result<WaitingTimeCurve> {
    let prep = WaitingPrep::new(state, params, t);
    let step = counting::waiting_max_step(params.eta(), params.lambda());
    counting::waiting_curve(t, window, step, |tau| prep.density(params, tau))
}

/// `τ̄ = 𝒩^{-1} ∫_0^T τ W_t(τ) dτ`.
pub fn mean_waiting(state: &DiagonalFockState, params: &DetectorParams, t: f64, window: f64) -> Result<f64> {
    waiting_curve(state, params, t, window).map(|c| c.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, number_state, thermal_state};
    use crate::superops::apply_eps;
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
    fn single_photon_no_count() {
        let one = number_state(1, 3).unwrap();
        for t in [0.0, 0.4, 3.0] {
            assert!(rel(no_count(&one, &params(1.0, 0.0), t).trace(), exp(-t)) < 1e-14);
        }
        let s = coherent_state(4.0, 50).unwrap();
        assert_eq!(no_count(&s, &params(0.6, 0.1), 0.0).probs(), s.probs());
    }

    #[test]
    fn no_count_matches_zero_count_probability() {
        let p = params(0.6, 5e-3);
        for kind in [StateKind::Coherent(6.0), StateKind::Number(6), StateKind::Thermal(6.0)] {
            let s = kind.state_with_tail(1e-16).unwrap();
            for t in [0.3, 2.0, 9.0] {
                let dist = count_distribution(&s, &p, t, Some(0));
                assert!(rel(no_count(&s, &p, t).trace(), dist.probs[0]) < 1e-11, "{kind:?} t={t}");
            }
        }
    }

    #[test]
    fn thermal_no_count_is_scalar() {
        // ε̂ρ = αρ makes R̂_t and the resolvent scalars on a thermal state,
        // apart from the vacuum index which the projector singles out.
        let nbar = 3.0;
        let a = StateKind::thermal_ratio(nbar);
        let s = thermal_state(nbar, 400).unwrap();
        let p = params(0.7, 0.0);
        let t = 0.9;
        let out = no_count(&s, &p, t);
        let r = exp(-t * (1.0 - p.q() * a));
        let rho0 = 1.0 - a;
        let vacuum = r * rho0 + (1.0 - r) * rho0 / (1.0 - p.q() * a);
        assert!(rel(out.prob(0), vacuum) < 1e-12);
        assert!(rel(out.prob(5), r * s.prob(5)) < 1e-12);
    }

    #[test]
    fn ute_is_trace_preserving_and_tracks_n_cav() {
        let s = coherent_state(20.0, 90).unwrap();
        let p = params(0.6, 5e-3);
        for t in [0.0, 3.0, 25.0] {
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
        assert_eq!(count_distribution(&one, &params(0.6, 0.1), 0.0, None).probs, [1.0]);
    }

    #[test]
    fn distribution_normalization_and_moments() {
        let p = params(0.6, 5e-3);
        for kind in [StateKind::Coherent(50.0), StateKind::Number(50), StateKind::Thermal(50.0)] {
            let s = kind.state().unwrap();
            for t in [1.0, 50.0, 200.0] {
                let dist = count_distribution(&s, &p, t, None);
                assert!((dist.total() - 1.0).abs() < 1e-9);
                assert!(rel(dist.mean(), mean_counts(&s, &p, t)) < 1e-8);
                assert!(rel(dist.factorial_moment(2), second_factorial_moment(&s, &p, t)) < 1e-8);
            }
        }
    }

    #[test]
    fn stable_moments_agree_with_functionals() {
        let p = params(0.6, 5e-3);
        for kind in [StateKind::Coherent(20.0), StateKind::Number(20), StateKind::Thermal(20.0)] {
            let s = kind.state_with_tail(1e-16).unwrap();
            for t in [0.5, 10.0, 30.0] {
                let f = EModelFunctionals::evaluate(Route::FockSum(&s), &p, t, 2).unwrap();
                let nbar = s.mean();
                let m = f.mean_counts(&p, nbar).unwrap();
                assert!(rel(m, mean_counts(&s, &p, t)) < 1e-10);
                let m2 = f.second_factorial_moment(&p, nbar, s.factorial_moment(2)).unwrap();
                assert!(rel(m2, second_factorial_moment(&s, &p, t)) < 1e-9, "{kind:?} t={t}");
                assert!(rel(nbar * f.xi(1).unwrap(), n_cav(&s, &p, t)) < 1e-10);
            }
        }
    }

    #[test]
    fn functional_origin_values() {
        let p = params(0.6, 0.0);
        let s = coherent_state(3.0, 60).unwrap();
        let direct: f64 = (0..60).map(|n| (n + 1) as f64 * s.prob(n + 2)).sum::<f64>() / s.mean();
        assert!(rel(xi_k(&s, &p, 0.0, 2).unwrap(), direct) < 1e-12);
        assert!(rel(omega(&s, &p, 0.0).unwrap(), 1.0) < 1e-12);
        assert!(omega(&s, &p, 400.0).unwrap() < 1e-100);
        assert!(xi_k(&DiagonalFockState::vacuum(3), &p, 1.0, 1).is_err());
        assert!(omega(&number_state(1, 3).unwrap(), &p, 1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        let p = params(0.6, 0.0);
        let s = coherent_state(3.0, 60).unwrap();
        assert!(rel(psi_k(&s, &p, 0.0, 0.0, 4), s.prob(4)) < 1e-14);
        let five = number_state(5, 8).unwrap();
        assert!(rel(psi_k(&five, &p, 1.0, 0.0, 0), 1.0) < 1e-14);
        assert!(rel(closed::psi_k(StateKind::Number(5), &p, 1.0, 0.0, 0), 1.0) < 1e-14);
    }

    #[test]
    fn psi_is_trace_of_resolvent_and_exponential() {
        // Ψ_k(q, β) = Tr[Λ̂₀ ε̂^k (1 - qε̂)^{-1} e^{λβε̂} ρ Λ̂₀].
        let s = thermal_state(2.0, 200).unwrap();
        let p = params(0.6, 0.0);
        let (q, beta, k) = (0.4, 0.7, 2);
        let mut x = crate::superops::apply_exp_eps(&s, p.lambda() * beta);
        for _ in 0..k {
            x = apply_eps(&x);
        }
        let vacuum = apply_resolvent_eps(&x, q).prob(0);
        assert!(rel(psi_k(&s, &p, q, beta, k), vacuum) < 1e-12);
    }

    #[test]
    fn closed_forms_agree_with_fock_sums() {
        let p = params(0.6, 0.0);
        for kind in [StateKind::Coherent(50.0), StateKind::Number(50), StateKind::Thermal(50.0)] {
            let s = kind.state_with_tail(1e-17).unwrap();
            for t in [0.5, 5.0, 50.0] {
                for k in 1..=3 {
                    let a = xi_k(&s, &p, t, k).unwrap();
                    let b = closed::xi_k(kind, &p, t, k).unwrap();
                    assert!(rel(a, b) < 1e-10, "xi {kind:?} t={t} k={k}: {a} {b}");
                }
                let a = omega(&s, &p, t).unwrap();
                let b = closed::omega(kind, &p, t).unwrap();
                assert!(rel(a, b) < 1e-10, "omega {kind:?} t={t}: {a} {b}");
            }
            for (q, beta) in [(0.0, 0.5), (0.4, 0.0), (0.4, 3.0), (1.0, 20.0)] {
                for k in 0..=2 {
                    let a = psi_k(&s, &p, q, beta, k);
                    let b = closed::psi_k(kind, &p, q, beta, k);
                    assert!(rel(a, b) < 1e-10, "psi {kind:?} q={q} beta={beta} k={k}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn k_limits() {
        assert!(rel(k_limit_origin(&number_state(7, 10).unwrap()).unwrap(), 1.0) < 1e-15);
        let th = thermal_state(50.0, 2000).unwrap();
        assert!(rel(k_limit_origin(&th).unwrap(), 1.0) < 1e-10);
        assert!(k_limit_origin(&DiagonalFockState::vacuum(4)).is_err());
        // A coherent state stays Poissonian only where either the clock or the
        // photon number dominates min(n, N); near λt = n̄ it is slightly
        // sub-Poissonian.
        let coh = coherent_state(50.0, 200).unwrap();
        let ideal = params(0.6, 0.0);
        for t in [0.5, 5.0, 300.0] {
            assert!((k_factor(&coh, &ideal, t).unwrap() - 1.0).abs() < 1e-9);
        }
        let middle = k_factor(&coh, &ideal, 50.0).unwrap();
        assert!(middle < 1.0 - 1e-3 && middle > 0.99, "{middle}");
        assert!(k_factor(&coh, &params(0.6, 0.0), 0.0).is_err());
    }

    #[test]
    fn mean_counts_limits() {
        let p = params(0.6, 5e-3);
        let vac = DiagonalFockState::vacuum(3);
        assert!(rel(mean_counts(&vac, &p, 7.0), 0.035) < 1e-14);
        let s = coherent_state(50.0, 200).unwrap();
        assert_eq!(mean_counts(&s, &p, 0.0), 0.0);
        assert!(rel(mean_counts(&s, &params(0.6, 0.0), 1000.0), 30.0) < 1e-10);
    }

    #[test]
    fn waiting_density_limits() {
        let vac = DiagonalFockState::vacuum(4);
        assert_eq!(waiting_density(&vac, &params(0.6, 0.0), 1.0, 0.5), 0.0);
        let s = coherent_state(5.0, 60).unwrap();
        let p = params(0.0, 0.2);
        for tau in [0.0, 1.0, 7.0] {
            let expected = 0.04 * exp(-0.2 * tau);
            assert!(rel(waiting_density(&s, &p, 1.0, tau), expected) < 1e-12);
        }
    }

    #[test]
    fn single_photon_waiting_density() {
        // One photon, η = 1, d = 0: a click at t needs the photon absorbed at t,
        // after which the empty cavity never clicks again.
        let one = number_state(1, 2).unwrap();
        assert_eq!(waiting_density(&one, &params(1.0, 0.0), 0.5, 0.3), 0.0);
        // Two photons: the second click follows at rate λ.
        let two = number_state(2, 3).unwrap();
        let t = 0.5;
        let tau = 0.3;
        let expected = exp(-t) * exp(-tau);
        assert!(rel(waiting_density(&two, &params(1.0, 0.0), t, tau), expected) < 1e-13);
    }

    #[test]
    fn effective_counting_time_number_state() {
        let s = number_state(1, 2).unwrap();
        let t = effective_counting_time(&s, &params(0.6, 0.0)).unwrap();
        assert!(rel(t, -log(0.05)) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn xi_and_omega_monotone_in_unit_interval(nbar in 1.0f64..30.0, t in 0.0f64..40.0, dt in 0.01f64..5.0) {
            let s = StateKind::Thermal(nbar).state_with_n_max(400).unwrap();
            let p = params(0.6, 0.0);
            let a = xi_k(&s, &p, t, 1).unwrap();
            let b = xi_k(&s, &p, t + dt, 1).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
            prop_assert!(b <= a * (1.0 + 1e-12));
            let oa = omega(&s, &p, t).unwrap();
            let ob = omega(&s, &p, t + dt).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&oa));
            prop_assert!(ob <= oa * (1.0 + 1e-12));
        }

        #[test]
        fn waiting_density_non_negative(nbar in 0.0f64..30.0, eta in 0.0f64..1.0, d in 0.0f64..0.1, t in 0.0f64..30.0, tau in 0.0f64..10.0) {
            let s = coherent_state(nbar, 120).unwrap();
            prop_assert!(waiting_density(&s, &params(eta, d), t, tau) >= 0.0);
        }
    }
}
