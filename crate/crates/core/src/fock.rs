//! Diagonal Fock-space states with explicit truncation.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log};

use crate::error::{check_non_negative, CpmError, Result};
use crate::num::{ln, ln_factorial};
use crate::special::reg_lower_gamma;

/// Upper-tail mass left out of a truncated state unless asked otherwise.
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-12;

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// The three initial field states with closed-form evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateKind {
    Coherent(f64),
    Number(usize),
    Thermal(f64),
}

impl StateKind {
    pub fn nbar(&self) -> f64 {
        match *self {
            StateKind::Coherent(nbar) | StateKind::Thermal(nbar) => nbar,
            StateKind::Number(n) => n as f64,
        }
    }

    /// `⟨n(n-1)⟩` of the untruncated state.
    pub fn second_factorial_moment(&self) -> f64 {
        match *self {
            StateKind::Coherent(nbar) => nbar * nbar,
            StateKind::Number(n) => n as f64 * (n as f64 - 1.0).max(0.0),
            StateKind::Thermal(nbar) => 2.0 * nbar * nbar,
        }
    }

    /// `n̄/(n̄+1)` for the thermal state.
    pub fn thermal_ratio(nbar: f64) -> f64 {
        nbar / (nbar + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StateKind::Coherent(nbar) | StateKind::Thermal(nbar) => check_non_negative("nbar", nbar),
            StateKind::Number(_) => Ok(()),
        }
    }

    /// Truncated state whose dropped tail mass is below `epsilon`.
    pub fn state_with_tail(&self, epsilon: f64) -> Result<DiagonalFockState> {
        self.validate()?;
        let n_max = truncation_for_tail(*self, epsilon);
        self.state_with_n_max(n_max)
    }

    /// Truncated state at the default tail tolerance.
    pub fn state(&self) -> Result<DiagonalFockState> {
        self.state_with_tail(DEFAULT_TAIL_EPSILON)
    }

    /// `ln ρ_n` of the untruncated state; finite far beyond where `ρ_n`
    /// underflows.
    pub fn ln_weight(&self, n: usize) -> f64 {
        match *self {
            StateKind::Coherent(nbar) => {
                if nbar == 0.0 {
                    if n == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    -nbar + n as f64 * log(nbar) - ln_factorial(n)
                }
            }
            StateKind::Number(k) => {
                if n == k {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            StateKind::Thermal(nbar) => {
                let alpha = Self::thermal_ratio(nbar);
                if n == 0 {
                    ln(1.0 - alpha)
                } else {
                    ln(1.0 - alpha) + n as f64 * ln(alpha)
                }
            }
        }
    }

    pub fn state_with_n_max(&self, n_max: usize) -> Result<DiagonalFockState> {
        match *self {
            StateKind::Coherent(nbar) => coherent_state(nbar, n_max),
            StateKind::Number(n) => number_state(n, n_max),
            StateKind::Thermal(nbar) => thermal_state(nbar, n_max),
        }
    }
}

/// Occupation probabilities `ρ_n = ⟨n|ρ|n⟩` for `n = 0..=n_max`.
///
/// Weights produced by non-trace-preserving superoperators are valid states
/// here; [`is_normalized`](Self::is_normalized) tells them apart.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalFockState {
    probs: Vec<f64>,
    normalized: bool,
    truncated_mass: f64,
}

impl DiagonalFockState {
    /// Wraps arbitrary non-negative weights.
    pub fn from_weights(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CpmError::Domain {
                name: "probs.len()",
                value: 0.0,
                expected: "at least one Fock level",
            });
        }
        if let Some(&bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(CpmError::Domain {
                name: "probs[n]",
                value: bad,
                expected: "finite and >= 0",
            });
        }
        Ok(Self::from_weights_unchecked(probs))
    }

    pub(crate) fn from_weights_unchecked(probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        Self {
            normalized: (total - 1.0).abs() <= NORMALIZATION_TOLERANCE,
            probs,
            truncated_mass: 0.0,
        }
    }

    fn normalized_from(mut probs: Vec<f64>, truncated_mass: f64) -> Self {
        let total: f64 = probs.iter().sum();
        if total > 0.0 {
            probs.iter_mut().for_each(|p| *p /= total);
        }
        Self {
            probs,
            normalized: true,
            truncated_mass,
        }
    }

    pub fn vacuum(n_max: usize) -> Self {
        let mut probs = vec![0.0; n_max + 1];
        probs[0] = 1.0;
        Self {
            probs,
            normalized: true,
            truncated_mass: 0.0,
        }
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `ρ_n`, zero beyond the truncation.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Exact mass of the untruncated state beyond `n_max` (zero for states not
    /// built from a [`StateKind`]).
    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn trace(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `Σ_n ρ_n n!/(n-k)!`.
    pub fn factorial_moment(&self, k: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(k)
            .filter(|(_, p)| **p > 0.0)
            .map(|(n, p)| p * (0..k).map(|i| (n - i) as f64).product::<f64>())
            .sum()
    }

    /// Same weights cut at `n_max` and renormalised.
    pub fn truncated(&self, n_max: usize) -> Self {
        let keep = (n_max + 1).min(self.probs.len());
        let mut probs = self.probs[..keep].to_vec();
        probs.resize(n_max + 1, 0.0);
        let dropped: f64 = self.probs[keep..].iter().sum();
        Self::normalized_from(probs, self.truncated_mass + dropped)
    }

    /// Elementwise scalar multiple; the result is flagged unnormalised unless
    /// its trace happens to be one.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_weights_unchecked(self.probs.iter().map(|p| p * factor).collect())
    }

    pub(crate) fn into_probs(self) -> Vec<f64> {
        self.probs
    }
}

/// Poisson weights `e^{-n̄} n̄^n / n!`, renormalised over `0..=n_max`.
pub fn coherent_state(nbar: f64, n_max: usize) -> Result<DiagonalFockState> {
    check_non_negative("nbar", nbar)?;
    if nbar == 0.0 {
        return Ok(DiagonalFockState::vacuum(n_max));
    }
    let ln_nbar = log(nbar);
    let probs = (0..=n_max)
        .map(|n| exp(-nbar + n as f64 * ln_nbar - ln_factorial(n)))
        .collect();
    Ok(DiagonalFockState::normalized_from(
        probs,
        reg_lower_gamma(n_max + 1, nbar),
    ))
}

/// Point mass at `n`.
pub fn number_state(n: usize, n_max: usize) -> Result<DiagonalFockState> {
    if n > n_max {
        return Err(CpmError::Truncation { n, n_max });
    }
    let mut probs = vec![0.0; n_max + 1];
    probs[n] = 1.0;
    Ok(DiagonalFockState {
        probs,
        normalized: true,
        truncated_mass: 0.0,
    })
}

/// Geometric weights `(1-α) α^n`, `α = n̄/(n̄+1)`, renormalised over `0..=n_max`.
pub fn thermal_state(nbar: f64, n_max: usize) -> Result<DiagonalFockState> {
    check_non_negative("nbar", nbar)?;
    if nbar == 0.0 {
        return Ok(DiagonalFockState::vacuum(n_max));
    }
    let alpha = StateKind::thermal_ratio(nbar);
    let ln_alpha = log(alpha);
    let ln_norm = ln(1.0 - alpha);
    let probs = (0..=n_max)
        .map(|n| exp(ln_norm + n as f64 * ln_alpha))
        .collect();
    Ok(DiagonalFockState::normalized_from(
        probs,
        exp((n_max + 1) as f64 * ln_alpha),
    ))
}

/// `Σ_n ρ_n n!/(n-k)!`.
pub fn factorial_moment(state: &DiagonalFockState, k: usize) -> f64 {
    state.factorial_moment(k)
}

/// Smallest `n_max` whose untruncated upper tail `Σ_{n > n_max} ρ_n` is below
/// `epsilon`. Number states return their photon number.
pub fn truncation_for_tail(kind: StateKind, epsilon: f64) -> usize {
    match kind {
        StateKind::Number(n) => n,
        StateKind::Coherent(nbar) => {
            if nbar == 0.0 {
                return 0;
            }
            let mut n_max = libm::floor(nbar) as usize;
            while reg_lower_gamma(n_max + 1, nbar) >= epsilon {
                n_max += 1;
            }
            n_max
        }
        StateKind::Thermal(nbar) => {
            if nbar == 0.0 {
                return 0;
            }
            // tail beyond n_max is α^{n_max+1}
            let alpha = StateKind::thermal_ratio(nbar);
            let mut n_max = (libm::ceil(log(epsilon) / log(alpha)) as usize).saturating_sub(1);
            while exp((n_max + 1) as f64 * log(alpha)) >= epsilon {
                n_max += 1;
            }
            while n_max > 0 && exp(n_max as f64 * log(alpha)) < epsilon {
                n_max -= 1;
            }
            n_max
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn coherent_vacuum_limit() {
        let s = coherent_state(0.0, 10).unwrap();
        assert_eq!(s.prob(0), 1.0);
        assert!(s.probs()[1..].iter().all(|p| *p == 0.0));
    }

    #[test]
    fn coherent_large_mean() {
        let kind = StateKind::Coherent(50.0);
        let s = kind.state().unwrap();
        // direct summation of the Poisson weights as the oracle
        let mut weight = libm::exp(-50.0);
        let (mut total, mut mean) = (weight, 0.0);
        for n in 1..=s.n_max() {
            weight *= 50.0 / n as f64;
            total += weight;
            mean += n as f64 * weight;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!((s.trace() - 1.0).abs() < 1e-12);
        assert!((s.mean() - 50.0).abs() < 1e-9);
        assert!((mean / total - s.mean()).abs() < 1e-9);
    }

    #[test]
    fn coherent_ratio_at_one() {
        let s = coherent_state(1.0, 40).unwrap();
        assert!((s.prob(1) / s.prob(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn number_states() {
        let s = number_state(0, 5).unwrap();
        assert_eq!(s.probs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = number_state(50, 60).unwrap();
        assert_eq!(s.prob(50), 1.0);
        assert_eq!(s.trace(), 1.0);
        assert_eq!(
            number_state(3, 2),
            Err(CpmError::Truncation { n: 3, n_max: 2 })
        );
        assert_eq!(factorial_moment(&s, 1), 50.0);
    }

    #[test]
    fn thermal_geometric_law() {
        assert_eq!(thermal_state(0.0, 7).unwrap(), DiagonalFockState::vacuum(7));
        let s = thermal_state(50.0, 300).unwrap();
        for n in 0..300 {
            assert!((s.prob(n + 1) / s.prob(n) - 50.0 / 51.0).abs() < 1e-13);
        }
        let s = StateKind::Thermal(50.0).state().unwrap();
        assert!((s.factorial_moment(2) / 5000.0 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coherent_second_factorial_moment() {
        let s = StateKind::Coherent(50.0).state().unwrap();
        assert!((s.factorial_moment(2) - 2500.0).abs() < 1e-7);
    }

    #[test]
    fn negative_mean_is_rejected() {
        assert!(matches!(coherent_state(-1.0, 3), Err(CpmError::Domain { .. })));
        assert!(matches!(thermal_state(-0.5, 3), Err(CpmError::Domain { .. })));
    }

    #[test]
    fn truncation_number_state() {
        assert_eq!(truncation_for_tail(StateKind::Number(50), 1e-12), 50);
    }

    #[test]
    fn truncation_coherent_brute_force() {
        let n_max = truncation_for_tail(StateKind::Coherent(50.0), 1e-12);
        // tail beyond N by summing Poisson weights far into the tail
        let tail_beyond = |cut: usize| {
            let mut w = libm::exp(-50.0);
            let mut tail = 0.0;
            for n in 1..2000 {
                w *= 50.0 / n as f64;
                if n > cut {
                    tail += w;
                }
            }
            tail
        };
        assert!(tail_beyond(n_max) < 1e-12);
        assert!(tail_beyond(n_max - 1) >= 1e-12);
    }

    #[test]
    fn truncation_thermal_geometric_tail() {
        let alpha: f64 = 50.0 / 51.0;
        let n_max = truncation_for_tail(StateKind::Thermal(50.0), 1e-12);
        assert!(alpha.powi(n_max as i32 + 1) < 1e-12);
        assert!(alpha.powi(n_max as i32) >= 1e-12);
    }

    #[test]
    fn truncated_mass_is_recorded() {
        let s = StateKind::Thermal(10.0).state_with_n_max(20).unwrap();
        let alpha: f64 = 10.0 / 11.0;
        assert!((s.truncated_mass() - alpha.powi(21)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn constructors_give_valid_states(nbar in 0.0f64..120.0, which in 0u8..3) {
            let kind = match which {
                0 => StateKind::Coherent(nbar),
                1 => StateKind::Number(nbar as usize),
                _ => StateKind::Thermal(nbar),
            };
            let s = kind.state().unwrap();
            prop_assert_eq!(s.probs().len(), s.n_max() + 1);
            prop_assert!(s.probs().iter().all(|p| *p >= 0.0));
            prop_assert!(s.is_normalized());
            prop_assert!((s.trace() - 1.0).abs() <= 1e-12);
            let tail_tol = 10.0 * DEFAULT_TAIL_EPSILON * (s.n_max() as f64 + 1.0);
            prop_assert!((s.mean() - kind.nbar()).abs() <= tail_tol.max(1e-12 * kind.nbar()));
            let direct: f64 = s.probs().iter().enumerate().map(|(n, p)| n as f64 * p).sum();
            prop_assert!((s.factorial_moment(1) - direct).abs() <= 1e-12 * direct.max(1e-300));
        }
    }
}
