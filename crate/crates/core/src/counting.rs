//! Pieces shared by both jump models: dark-count convolution and windowed
//! waiting-time quadrature.

use alloc::vec::Vec;

use crate::error::{CpmError, Result};
use crate::num::{poisson_support, poisson_weights};
use crate::params::{CountDistribution, WaitingTimeCurve};
use crate::quadrature::{simpson, simpson_intervals};

/// Mass below which trailing entries of a default-length distribution are cut.
const DEFAULT_TRIM: f64 = 1e-15;

/// Photon-count probabilities `real[j]` combined with independent Poisson dark
/// counts of mean `dark_mean`.
pub(crate) fn with_dark_counts(
    real: &[f64],
    dark_mean: f64,
    t: f64,
    m_max: Option<usize>,
) -> CountDistribution {
    let dark = poisson_weights(dark_mean, poisson_support(dark_mean, 1e-17));
    let support = real.len() + dark.len() - 1;
    let len = m_max.map_or(support, |m| m + 1);
    let mut probs: Vec<f64> = (0..len)
        .map(|m| {
            let lo = m.saturating_sub(real.len() - 1);
            let hi = m.min(dark.len() - 1);
            if lo > hi {
                return 0.0;
            }
            (lo..=hi).map(|k| dark[k] * real[m - k]).sum()
        })
        .collect();
    if m_max.is_none() {
        let mut dropped = 0.0;
        while probs.len() > 1 {
            let last = probs[probs.len() - 1];
            if dropped + last >= DEFAULT_TRIM {
                break;
            }
            dropped += last;
            probs.pop();
        }
    }
    let total: f64 = probs.iter().sum();
    CountDistribution {
        probs,
        tail: 1.0 - total,
        t,
    }
}

/// Samples `density(τ)` on `[0, window]` and forms the windowed normalisation
/// and mean by composite Simpson quadrature.
pub(crate) fn waiting_curve(
    t: f64,
    window: f64,
    max_step: f64,
    mut density: impl FnMut(f64) -> f64,
) -> Result<WaitingTimeCurve> {
    if !(window.is_finite() && window > 0.0) {
        return Err(CpmError::Domain {
            name: "window",
            value: window,
            expected: "finite and > 0",
        });
    }
    let intervals = simpson_intervals(window, max_step, 2000);
    let h = window / intervals as f64;
    let taus: Vec<f64> = (0..=intervals).map(|i| i as f64 * h).collect();
    let values: Vec<f64> = taus.iter().map(|&tau| density(tau)).collect();
    let weighted: Vec<f64> = taus.iter().zip(&values).map(|(tau, w)| tau * w).collect();
    let normalization = simpson(&values, h);
    if !(normalization > 0.0) {
        return Err(CpmError::Undefined("mean waiting time (zero normalisation)"));
    }
    let mean = simpson(&weighted, h) / normalization;
    Ok(WaitingTimeCurve {
        t,
        taus,
        density: values,
        normalization,
        mean,
    })
}

/// Grid step bound `min(T/2000, 0.01/(ηλ))`; the first term is enforced by the
/// minimum interval count.
pub(crate) fn waiting_max_step(eta: f64, lambda: f64) -> f64 {
    let rate = eta * lambda;
    if rate > 0.0 {
        0.01 / rate
    } else {
        f64::INFINITY
    }
}

/// `10/(ηλ)`.
pub fn default_window(eta: f64, lambda: f64) -> f64 {
    10.0 / (eta * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dark_only_is_poisson() {
        let dist = with_dark_counts(&[1.0], 2.0, 1.0, None);
        assert!((dist.total() - 1.0).abs() < 1e-15);
        assert!((dist.mean() - 2.0).abs() < 1e-13);
        assert!((dist.factorial_moment(2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_m_max_reports_tail() {
        let dist = with_dark_counts(&[0.5, 0.5], 0.0, 1.0, Some(0));
        assert_eq!(dist.probs, [0.5]);
        assert!((dist.tail - 0.5).abs() < 1e-15);
        assert!(dist.is_truncated(1e-9));
    }

    #[test]
    fn exponential_waiting_mean() {
        let rate = 0.5;
        let curve = waiting_curve(0.0, 200.0, f64::INFINITY, |tau| rate * libm::exp(-rate * tau)).unwrap();
        assert!((curve.mean - 2.0).abs() < 1e-6);
        assert!(waiting_curve(0.0, 1.0, 1.0, |_| 0.0).is_err());
        assert!(waiting_curve(0.0, -1.0, 1.0, |_| 1.0).is_err());
    }
}
