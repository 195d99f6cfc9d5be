//! Small sample-statistics helpers shared by the ensemble and analysis code.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Moment-ratio kurtosis `m4 / m2²` (3 for a normal law). NaN when the
/// sample has no spread.
pub fn kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = (x - m) * (x - m);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        f64::NAN
    } else {
        m4 / (m2 * m2)
    }
}

pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    kurtosis(xs) - 3.0
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Mean and 95% normal-approximation half-width of the mean.
pub fn mean_with_half_width(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    (m, 1.96 * (variance(xs) / xs.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(variance(&[7.0]), 0.0);
        // uniform-like four points: m2 = 1.25, m4 = 2.5625
        assert!((kurtosis(&xs) - 2.5625 / 1.5625).abs() < 1e-15);
        assert!(kurtosis(&[2.0, 2.0]).is_nan());
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.0);
        assert_eq!(quantile_sorted(&xs, 0.0), 0.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.1) - 0.4).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[5.0], 0.3), 5.0);
    }
}
