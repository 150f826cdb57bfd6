//! Log-domain helpers shared by the series evaluations.

use libm::{exp, lgamma, log, log1p};

/// `ln n!`.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        lgamma(n as f64 + 1.0)
    }
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub(crate) fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// `ln n!/(n-k)!`; `-inf` when `k > n`.
pub(crate) fn ln_falling(n: usize, k: usize) -> f64 {
    if k > n {
        f64::NEG_INFINITY
    } else {
        ln_factorial(n) - ln_factorial(n - k)
    }
}

/// `k · ln(x)` with the convention `0 · ln 0 = 0`.
pub(crate) fn ln_pow(x: f64, k: usize) -> f64 {
    if k == 0 {
        0.0
    } else if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * log(x)
    }
}

/// `ln x`, with `ln 0 = -inf`.
pub(crate) fn ln(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        log(x)
    }
}

/// Streaming log-sum-exp over positive terms given by their logarithms.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    pub(crate) const fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, ln_term: f64) {
        if ln_term == f64::NEG_INFINITY || ln_term.is_nan() {
            return;
        }
        if ln_term > self.max {
            self.scaled = self.scaled * exp(self.max - ln_term) + 1.0;
            self.max = ln_term;
        } else {
            self.scaled += exp(ln_term - self.max);
        }
    }

    pub(crate) fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + log(self.scaled)
        }
    }

    pub(crate) fn value(&self) -> f64 {
        exp(self.ln())
    }
}

/// `ln(1 - e^{x})` for `x <= 0`, accurate near both ends.
pub(crate) fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -core::f64::consts::LN_2 {
        log(-libm::expm1(x))
    } else {
        log1p(-exp(x))
    }
}

/// Poisson weights `e^{-mean} mean^k / k!` for `k = 0..len`.
pub(crate) fn poisson_weights(mean: f64, len: usize) -> alloc::vec::Vec<f64> {
    let ln_mean = ln(mean);
    (0..len)
        .map(|k| {
            if mean == 0.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                exp(-mean + k as f64 * ln_mean - ln_factorial(k))
            }
        })
        .collect()
}

/// Number of Poisson weights needed so the neglected upper tail is below `tol`.
pub(crate) fn poisson_support(mean: f64, tol: f64) -> usize {
    if mean == 0.0 {
        return 1;
    }
    // mean + 12 sqrt(mean) + 40 leaves a tail far below 1e-16 for any mean,
    // the loop makes sure of it for the requested tolerance.
    let mut len = (mean + 12.0 * libm::sqrt(mean) + 40.0) as usize;
    loop {
        let tail = crate::special::reg_lower_gamma(len + 1, mean);
        if tail < tol {
            return len + 1;
        }
        len += len / 2 + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_matches_direct_sum() {
        let mut direct = 0.0;
        for n in 1..200 {
            direct += log(n as f64);
            assert!((ln_factorial(n) - direct).abs() <= 1e-13 * direct.max(1.0));
        }
    }

    #[test]
    fn log_sum_handles_wide_ranges() {
        let mut acc = LogSum::new();
        acc.add(-1000.0);
        acc.add(0.0);
        acc.add(f64::NEG_INFINITY);
        assert!((acc.ln() - log1p(exp(-1000.0))).abs() < 1e-15);
        assert_eq!(LogSum::new().value(), 0.0);
    }

    #[test]
    fn one_minus_exp_is_accurate() {
        assert!((ln_one_minus_exp(-1e-20) - log(1e-20)).abs() < 1e-12);
        assert!((ln_one_minus_exp(-50.0) + exp(-50.0)).abs() < 1e-30);
    }
}
