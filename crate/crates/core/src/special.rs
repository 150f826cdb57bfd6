//! Integer-order special functions used by the closed-form state evaluations:
//! modified Bessel functions `I_n`, incomplete Gamma functions and `ln Γ`.
//!
//! Every function has a logarithmic twin (`ln_*`) because the closed forms
//! multiply quantities such as `e^{-n̄}` and `I_n(2√(n̄λt))` whose linear values
//! leave the `f64` range long before their product does.

use libm::{exp, lgamma, log, log1p};

use crate::num::{ln, ln_factorial, LogSum};

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    lgamma(x)
}

/// `ln I_n(x)` from the power series `Σ_m (x/2)^{2m+n} / (m! (m+n)!)`.
///
/// All terms are positive, so the log-domain sum keeps full relative accuracy
/// for any `x >= 0`.
pub fn ln_bessel_i(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = n as usize;
    let ln_half_x = log(0.5 * x);
    let nf = n as f64;
    let peak = 0.5 * (libm::sqrt(nf * nf + x * x) - nf);
    let mut acc = LogSum::new();
    let mut m = 0usize;
    loop {
        let term = (2 * m + n) as f64 * ln_half_x - ln_factorial(m) - ln_factorial(m + n);
        acc.add(term);
        if m as f64 > peak && term < acc.ln() - 40.0 {
            break;
        }
        m += 1;
    }
    acc.ln()
}

/// Modified Bessel function of the first kind of integer order.
pub fn bessel_i(n: u32, x: f64) -> f64 {
    exp(ln_bessel_i(n, x))
}

/// `ln Q(a, x)` with `Q(a, x) = Γ(a, x)/(a-1)! = e^{-x} Σ_{k<a} x^k/k!`.
pub fn ln_reg_upper_gamma(a: usize, x: f64) -> f64 {
    debug_assert!(a >= 1 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let ln_x = log(x);
    let mut acc = LogSum::new();
    for k in 0..a {
        acc.add(k as f64 * ln_x - ln_factorial(k));
    }
    acc.ln() - x
}

/// Regularised upper incomplete Gamma function `Q(a, x)` for integer `a >= 1`.
pub fn reg_upper_gamma(a: usize, x: f64) -> f64 {
    exp(ln_reg_upper_gamma(a, x))
}

/// `ln P(a, x)`, `P = 1 - Q`.
///
/// Below `x < a + 1` the series `e^{-x} x^a/a! Σ_n x^n a!/(a+n)!` is summed
/// directly so that tiny values of `P` keep their relative accuracy.
pub fn ln_reg_lower_gamma(a: usize, x: f64) -> f64 {
    debug_assert!(a >= 1 && x >= 0.0);
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    let af = a as f64;
    if x < af + 1.0 {
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= x / (af + k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        -x + af * log(x) - ln_factorial(a) + log(sum)
    } else {
        log1p(-reg_upper_gamma(a, x))
    }
}

/// Regularised lower incomplete Gamma function `P(a, x)` for integer `a >= 1`.
pub fn reg_lower_gamma(a: usize, x: f64) -> f64 {
    exp(ln_reg_lower_gamma(a, x))
}

/// `ln Γ(a, x)` for integer `a >= 1`.
pub fn ln_upper_gamma(a: usize, x: f64) -> f64 {
    ln_factorial(a - 1) + ln_reg_upper_gamma(a, x)
}

/// Upper (complementary) incomplete Gamma `Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt`.
pub fn upper_gamma(a: usize, x: f64) -> f64 {
    exp(ln_upper_gamma(a, x))
}

/// `ln γ(a, x)` for integer `a >= 1`.
pub fn ln_lower_gamma(a: usize, x: f64) -> f64 {
    ln_factorial(a - 1) + ln_reg_lower_gamma(a, x)
}

/// Lower incomplete Gamma `γ(a, x) = ∫_0^x t^{a-1} e^{-t} dt`.
pub fn lower_gamma(a: usize, x: f64) -> f64 {
    exp(ln_lower_gamma(a, x))
}

/// `P(k, x)` for `k = 0..len`, with `P(0, x) = 1`.
///
/// Computed downwards from the largest order with the series above, so each
/// entry has small relative error even where `P` is tiny.
pub(crate) fn reg_lower_gamma_table(x: f64, len: usize) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec![0.0; len];
    if len == 0 {
        return out;
    }
    out[0] = 1.0;
    if x == 0.0 || len == 1 {
        return out;
    }
    let last = len - 1;
    out[last] = reg_lower_gamma(last, x);
    let ln_x = ln(x);
    for k in (1..last).rev() {
        // P(k, x) = P(k + 1, x) + e^{-x} x^k / k!
        out[k] = out[k + 1] + exp(-x + k as f64 * ln_x - ln_factorial(k));
    }
    out
}

/// `Q(k, x)` for `k = 0..len`, with `Q(0, x) = 0`.
pub(crate) fn reg_upper_gamma_table(x: f64, len: usize) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec![0.0; len];
    let ln_x = ln(x);
    for k in 1..len {
        let j = k - 1;
        let pmf = if x == 0.0 {
            if j == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            exp(-x + j as f64 * ln_x - ln_factorial(j))
        };
        out[k] = (out[k - 1] + pmf).min(1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn bessel_at_origin() {
        assert_eq!(bessel_i(0, 0.0), 1.0);
        for n in 1..5 {
            assert_eq!(bessel_i(n, 0.0), 0.0);
        }
    }

    #[test]
    fn bessel_reference_values() {
        assert!(rel(bessel_i(0, 1.0), 1.266_065_877_752_008_4) < 1e-14);
        assert!(rel(bessel_i(1, 1.0), 0.565_159_103_992_485) < 1e-14);
        assert!(rel(bessel_i(0, 10.0), 2_815.716_628_466_254) < 1e-13);
        assert!(rel(bessel_i(3, 150.0), 4.408_874_237_296_725e63) < 1e-12);
    }

    #[test]
    fn upper_gamma_edges() {
        for &x in &[0.0, 0.3, 2.0, 17.5] {
            assert!(rel(upper_gamma(1, x), exp(-x)) < 1e-15);
        }
        for a in 1..30 {
            assert!(rel(upper_gamma(a, 0.0), exp(ln_factorial(a - 1))) < 1e-14);
        }
    }

    /// Adaptive Simpson quadrature of the defining integral, independent of the
    /// finite-sum closed form.
    fn upper_gamma_by_quadrature(a: usize, x: f64) -> f64 {
        fn integrand(a: usize, t: f64) -> f64 {
            exp((a as f64 - 1.0) * log(t) - t)
        }
        fn simpson(a: usize, lo: f64, hi: f64) -> f64 {
            let mid = 0.5 * (lo + hi);
            (hi - lo) / 6.0 * (integrand(a, lo) + 4.0 * integrand(a, mid) + integrand(a, hi))
        }
        fn adapt(a: usize, lo: f64, hi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let mid = 0.5 * (lo + hi);
            let left = simpson(a, lo, mid);
            let right = simpson(a, mid, hi);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                adapt(a, lo, mid, left, tol / 2.0, depth - 1)
                    + adapt(a, mid, hi, right, tol / 2.0, depth - 1)
            }
        }
        // The integrand is negligible beyond x + 400; split into unit panels.
        let mut total = 0.0;
        let mut lo = x;
        while lo < x + 400.0 {
            let hi = lo + 1.0;
            let whole = simpson(a, lo, hi);
            total += adapt(a, lo, hi, whole, 1e-14 * whole.abs().max(1e-300), 50);
            lo = hi;
        }
        total
    }

    #[test]
    fn upper_gamma_matches_quadrature() {
        let closed = upper_gamma(51, 50.0);
        let quad = upper_gamma_by_quadrature(51, 50.0);
        assert!(rel(closed, quad) < 1e-10, "{closed} vs {quad}");
        let closed = upper_gamma(5, 2.5);
        let quad = upper_gamma_by_quadrature(5, 2.5);
        assert!(rel(closed, quad) < 1e-10, "{closed} vs {quad}");
    }

    #[test]
    fn upper_plus_lower_is_complete_gamma() {
        for a in (1..=200).step_by(7) {
            for &x in &[0.0, 0.01, 1.0, 10.0, 57.0, 150.0, 199.0, 250.0, 400.0] {
                // Compared in logs: Γ(a) overflows for the larger orders.
                let total = ln_factorial(a - 1);
                let mut sum = LogSum::new();
                sum.add(ln_upper_gamma(a, x));
                sum.add(ln_lower_gamma(a, x));
                assert!((sum.ln() - total).abs() < 1e-12 * total.max(1.0), "a={a} x={x}: {} vs {total}", sum.ln());
            }
        }
    }

    #[test]
    fn lower_gamma_small_argument_keeps_relative_accuracy() {
        // P(a, x) ≈ x^a / a! for x -> 0.
        let x = 1e-6;
        let p = reg_lower_gamma(3, x);
        assert!(rel(p, x * x * x / 6.0) < 1e-5);
    }

    #[test]
    fn tables_match_pointwise() {
        let x = 7.3;
        let lower = reg_lower_gamma_table(x, 40);
        let upper = reg_upper_gamma_table(x, 40);
        for k in 1..40 {
            assert!((lower[k] - reg_lower_gamma(k, x)).abs() < 1e-14 * lower[k].max(1e-300) + 1e-300);
            assert!((upper[k] - reg_upper_gamma(k, x)).abs() < 1e-14);
        }
        assert_eq!(lower[0], 1.0);
        assert_eq!(upper[0], 0.0);
    }

    proptest! {
        #[test]
        fn bessel_recurrence(n in 1u32..40, x in 0.05f64..150.0) {
            // I_{n-1}(x) - I_{n+1}(x) = (2n/x) I_n(x)
            let lhs = bessel_i(n - 1, x) - bessel_i(n + 1, x);
            let rhs = 2.0 * n as f64 / x * bessel_i(n, x);
            prop_assert!(rel(lhs, rhs) < 1e-11, "{} vs {}", lhs, rhs);
        }

        #[test]
        fn bessel_increasing_in_x(n in 0u32..30, x in 0.0f64..190.0, dx in 0.01f64..5.0) {
            prop_assert!(ln_bessel_i(n, x + dx) > ln_bessel_i(n, x));
        }

        #[test]
        fn finite_exponential_sum_identity(n in 0usize..150, x in 0.0f64..300.0) {
            // Σ_{k=0}^{n} x^k/k! = e^x Γ(n+1, x)/n!
            let mut term = 1.0;
            let mut lhs = 1.0;
            for k in 1..=n {
                term *= x / k as f64;
                lhs += term;
            }
            let rhs = exp(x + ln_upper_gamma(n + 1, x) - ln_factorial(n));
            prop_assert!(rel(lhs, rhs) < 1e-12, "{} vs {}", lhs, rhs);
        }
    }
}
