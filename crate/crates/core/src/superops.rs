//! Diagonal-basis action of the elementary superoperators.
//!
//! On diagonal states:
//!
//! | superoperator | action on `ρ_n` |
//! |---|---|
//! | `Â ρ = âρâ†` | `(n+1) ρ_{n+1}` |
//! | `ε̂ ρ = Ê₋ρÊ₊` | `ρ_{n+1}` |
//! | `Û(λt)` | `e^{-λt n} ρ_n` |
//! | `exp(yÂ)` | `Σ_l C(n+l, n) y^l ρ_{n+l}` |
//! | `exp(yε̂)` | `Σ_l y^l/l! ρ_{n+l}` |
//! | `(1 - qε̂)^{-1}` | `Σ_l q^l ρ_{n+l}` |
//! | `R̂(λt, q) = e^{-λt(1-qε̂)}` | `e^{-λt} exp(λt q ε̂)` |
//!
//! `Â` and `ε̂` are nilpotent on the truncated space, so every series stops at
//! `n_max` without any adaptive cut.

use alloc::vec;
use alloc::vec::Vec;

use libm::exp;

use crate::fock::DiagonalFockState;
use crate::num::{ln, ln_binomial, ln_factorial, poisson_weights, LogSum};

/// An elementary diagonal superoperator or a composition of them.
///
/// A composition applies its elements left to right, so
/// `Compose(vec![A, B])` maps `ρ` to `B(A(ρ))`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagonalSuperop {
    A,
    Eps,
    U { lt: f64 },
    ExpA { y: f64 },
    ExpEps { y: f64 },
    ResolventEps { q: f64 },
    R { lt: f64, q: f64 },
    Compose(Vec<DiagonalSuperop>),
}

impl DiagonalSuperop {
    pub fn apply(&self, s: &DiagonalFockState) -> DiagonalFockState {
        match self {
            DiagonalSuperop::A => apply_a(s),
            DiagonalSuperop::Eps => apply_eps(s),
            DiagonalSuperop::U { lt } => apply_u(s, *lt),
            DiagonalSuperop::ExpA { y } => apply_exp_a(s, *y),
            DiagonalSuperop::ExpEps { y } => apply_exp_eps(s, *y),
            DiagonalSuperop::ResolventEps { q } => apply_resolvent_eps(s, *q),
            DiagonalSuperop::R { lt, q } => apply_r(s, *lt, *q),
            DiagonalSuperop::Compose(ops) => ops
                .iter()
                .fold(s.clone(), |acc, op| op.apply(&acc)),
        }
    }

    /// Whether the operator is a power series in `ε̂` (these all commute).
    pub fn is_eps_function(&self) -> bool {
        match self {
            DiagonalSuperop::Eps
            | DiagonalSuperop::ExpEps { .. }
            | DiagonalSuperop::ResolventEps { .. }
            | DiagonalSuperop::R { .. } => true,
            DiagonalSuperop::Compose(ops) => ops.iter().all(Self::is_eps_function),
            _ => false,
        }
    }
}

fn from_vec(probs: Vec<f64>) -> DiagonalFockState {
    DiagonalFockState::from_weights_unchecked(probs)
}

pub fn apply_a(s: &DiagonalFockState) -> DiagonalFockState {
    let p = s.probs();
    let mut out = vec![0.0; p.len()];
    for n in 0..p.len() - 1 {
        out[n] = (n + 1) as f64 * p[n + 1];
    }
    from_vec(out)
}

pub fn apply_eps(s: &DiagonalFockState) -> DiagonalFockState {
    let p = s.probs();
    let mut out = vec![0.0; p.len()];
    out[..p.len() - 1].copy_from_slice(&p[1..]);
    from_vec(out)
}

/// `e^{-λt n̂/2} ρ e^{-λt n̂/2}`.
pub fn apply_u(s: &DiagonalFockState, lt: f64) -> DiagonalFockState {
    from_vec(
        s.probs()
            .iter()
            .enumerate()
            .map(|(n, p)| if *p == 0.0 { 0.0 } else { p * exp(-lt * n as f64) })
            .collect(),
    )
}

/// `exp(yÂ) ρ`, log-domain binomial weights.
pub fn apply_exp_a(s: &DiagonalFockState, y: f64) -> DiagonalFockState {
    if y == 0.0 {
        return from_vec(s.probs().to_vec());
    }
    let p = s.probs();
    let ln_y = ln(y);
    let ln_p: Vec<f64> = p.iter().map(|x| ln(*x)).collect();
    let out = (0..p.len())
        .map(|n| {
            let mut acc = LogSum::new();
            for l in 0..p.len() - n {
                acc.add(ln_binomial(n + l, n) + l as f64 * ln_y + ln_p[n + l]);
            }
            acc.value()
        })
        .collect();
    from_vec(out)
}

/// `exp(yε̂) ρ`.
pub fn apply_exp_eps(s: &DiagonalFockState, y: f64) -> DiagonalFockState {
    if y == 0.0 {
        return from_vec(s.probs().to_vec());
    }
    let p = s.probs();
    let ln_y = ln(y);
    let ln_p: Vec<f64> = p.iter().map(|x| ln(*x)).collect();
    let weights: Vec<f64> = (0..p.len())
        .map(|l| l as f64 * ln_y - ln_factorial(l))
        .collect();
    let out = (0..p.len())
        .map(|n| {
            let mut acc = LogSum::new();
            for l in 0..p.len() - n {
                acc.add(weights[l] + ln_p[n + l]);
            }
            acc.value()
        })
        .collect();
    from_vec(out)
}

/// `(1 - qε̂)^{-1} ρ`, the finite geometric series on the truncated space.
pub fn apply_resolvent_eps(s: &DiagonalFockState, q: f64) -> DiagonalFockState {
    let p = s.probs();
    let mut out = vec![0.0; p.len()];
    let mut acc = 0.0;
    for n in (0..p.len()).rev() {
        acc = p[n] + q * acc;
        out[n] = acc;
    }
    from_vec(out)
}

/// `R̂ = e^{-λt(1 - qε̂)}`.
///
/// The factor `e^{-λt}` is folded into Poisson weights of mean `λt q`, which
/// stay within `[0, 1]` for any `λt`.
pub fn apply_r(s: &DiagonalFockState, lt: f64, q: f64) -> DiagonalFockState {
    from_vec(r_weights(s.probs(), lt, q))
}

pub(crate) fn r_weights(p: &[f64], lt: f64, q: f64) -> Vec<f64> {
    let y = lt * q;
    let decay = exp(-lt * (1.0 - q));
    let kernel = poisson_weights(y, p.len());
    (0..p.len())
        .map(|n| {
            let mut acc = 0.0;
            for (l, w) in kernel.iter().enumerate().take(p.len() - n) {
                acc += w * p[n + l];
            }
            decay * acc
        })
        .collect()
}
