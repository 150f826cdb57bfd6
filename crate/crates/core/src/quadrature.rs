//! Fixed-grid composite Simpson rule.

/// Integrates equally spaced samples with step `h`.
///
/// An odd number of samples uses plain Simpson; an even number closes the last
/// interval with the trapezoid rule.
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (samples[0] + samples[1]),
        _ => {
            let simpson_len = if n % 2 == 1 { n } else { n - 1 };
            let mut acc = samples[0] + samples[simpson_len - 1];
            for (i, s) in samples.iter().enumerate().take(simpson_len - 1).skip(1) {
                acc += if i % 2 == 1 { 4.0 * s } else { 2.0 * s };
            }
            let mut total = acc * h / 3.0;
            if simpson_len != n {
                total += 0.5 * h * (samples[n - 2] + samples[n - 1]);
            }
            total
        }
    }
}

/// Number of Simpson intervals (even) for a window of length `window` and a
/// maximal step `max_step`, never fewer than `min_intervals`.
pub fn simpson_intervals(window: f64, max_step: f64, min_intervals: usize) -> usize {
    let needed = if max_step.is_finite() && max_step > 0.0 {
        libm::ceil(window / max_step) as usize
    } else {
        0
    };
    let n = needed.max(min_intervals).max(2);
    n + n % 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn exact_for_cubics() {
        let h = 0.1;
        let xs: Vec<f64> = (0..=20).map(|i| i as f64 * h).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x - 2.0 * x + 1.0).collect();
        let exact = 2f64.powi(4) / 4.0 - 4.0 + 2.0;
        assert!((simpson(&ys, h) - exact).abs() < 1e-12);
    }

    #[test]
    fn interval_count_is_even() {
        assert_eq!(simpson_intervals(10.0, 0.0033, 2000) % 2, 0);
        assert!(simpson_intervals(10.0, 0.0033, 2000) >= 3031);
        assert_eq!(simpson_intervals(1.0, f64::INFINITY, 2000), 2000);
    }
}
