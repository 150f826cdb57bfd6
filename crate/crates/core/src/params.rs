use alloc::vec::Vec;

use crate::error::{check_non_negative, check_unit_interval, Result};

/// Detector and cavity parameters.
///
/// Rates are expressed through `lambda`; `dark` and `cavity` are ratios to it,
/// so the dark-count rate is `λd` and the cavity damping rate is `λc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    lambda: f64,
    eta: f64,
    dark: f64,
    cavity: f64,
    dead_time: f64,
}

impl DetectorParams {
    pub fn new(lambda: f64, eta: f64, dark: f64) -> Result<Self> {
        Self::with_losses(lambda, eta, dark, 0.0, 0.0)
    }

    pub fn with_losses(lambda: f64, eta: f64, dark: f64, cavity: f64, dead_time: f64) -> Result<Self> {
        check_non_negative("lambda", lambda)?;
        check_unit_interval("eta", eta)?;
        check_non_negative("dark", dark)?;
        check_non_negative("cavity", cavity)?;
        check_non_negative("dead_time", dead_time)?;
        Ok(Self {
            lambda,
            eta,
            dark,
            cavity,
            dead_time,
        })
    }

    /// Ideal detector, `λ = 1`.
    pub fn ideal() -> Self {
        Self {
            lambda: 1.0,
            eta: 1.0,
            dark: 0.0,
            cavity: 0.0,
            dead_time: 0.0,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn dark(&self) -> f64 {
        self.dark
    }
    pub fn cavity(&self) -> f64 {
        self.cavity
    }
    pub fn dead_time(&self) -> f64 {
        self.dead_time
    }

    /// Probability that an absorption is not registered, `1 - η`.
    pub fn q(&self) -> f64 {
        1.0 - self.eta
    }

    /// `1 + c`.
    pub fn p(&self) -> f64 {
        1.0 + self.cavity
    }

    /// `1 - η + c`.
    pub fn q_tilde(&self) -> f64 {
        self.p() - self.eta
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        check_unit_interval("eta", eta)?;
        self.eta = eta;
        Ok(self)
    }

    pub fn with_dark(mut self, dark: f64) -> Result<Self> {
        check_non_negative("dark", dark)?;
        self.dark = dark;
        Ok(self)
    }

    pub fn with_cavity(mut self, cavity: f64) -> Result<Self> {
        check_non_negative("cavity", cavity)?;
        self.cavity = cavity;
        Ok(self)
    }
}

/// Probabilities `P_t(m)` of `m` registered counts in `(0, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    pub probs: Vec<f64>,
    /// `1 - Σ P(m)` over the returned range.
    pub tail: f64,
    pub t: f64,
}

impl CountDistribution {
    pub fn m_max(&self) -> usize {
        self.probs.len().saturating_sub(1)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.factorial_moment(1)
    }

    /// `Σ_m m(m-1)…(m-k+1) P(m)`.
    pub fn factorial_moment(&self, k: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .skip(k)
            .map(|(m, p)| {
                let falling: f64 = (0..k).map(|i| (m - i) as f64).product();
                falling * p
            })
            .sum()
    }

    /// Whether more than `tolerance` of the mass fell outside the returned range.
    pub fn is_truncated(&self, tolerance: f64) -> bool {
        self.tail.abs() > tolerance
    }
}

/// Sampled waiting-time density `W_t(τ)` with its windowed normalisation and mean.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingTimeCurve {
    pub t: f64,
    pub taus: Vec<f64>,
    pub density: Vec<f64>,
    /// `∫_0^T W_t(τ) dτ`.
    pub normalization: f64,
    /// `∫_0^T τ W_t(τ) dτ / normalization`.
    pub mean: f64,
}
