//! Shared statistical helpers: normal CDF, Wilson score intervals, sample
//! moments, and a chi-square goodness-of-fit test.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// z for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Standard normal CDF, computed through the complementary error function
/// (libm's erfc is sub-ulp accurate; the tabulated-value tests hold it to
/// 1e-12 absolute).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// P[|N(0,1)| <= r] for r >= 0; zero for negative r.
pub fn normal_central_mass(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        libm::erf(r / std::f64::consts::SQRT_2)
    }
}

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    assert!(trials > 0, "wilson_interval: trials must be positive");
    assert!(successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let radius = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - radius) / denom).max(0.0),
        ((center + radius) / denom).min(1.0),
    )
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Mean and (population=false) standard deviation of a sample.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Chi-square goodness-of-fit statistic and p-value for observed counts
/// against expected cell probabilities.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), probs.len());
    assert!(
        observed.len() >= 2,
        "chi_square_gof: need at least two cells"
    );
    let n: f64 = observed.iter().map(|&c| c as f64).sum();
    let stat: f64 = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let dist = ChiSquared::new(df).expect("valid degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_matches_tabulated_values() {
        // High-precision reference values; the implementation must be
        // accurate to at least 1e-12 absolute.
        let table = [
            (0.0, 0.5),
            (0.5, 0.691_462_461_274_013_1),
            (1.0, 0.841_344_746_068_542_9),
            (1.5, 0.933_192_798_731_141_9),
            (2.0, 0.977_249_868_051_820_8),
            (3.0, 0.998_650_101_968_369_9),
            (4.0, 0.999_968_328_758_166_9),
            (-1.0, 0.158_655_253_931_457_05),
            (-2.5, 0.006_209_665_325_776_132),
        ];
        for (x, phi) in table {
            assert_abs_diff_eq!(normal_cdf(x), phi, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            normal_central_mass(1.0),
            0.682_689_492_137_085_9,
            epsilon = 1e-12
        );
        assert_eq!(normal_central_mass(-0.5), 0.0);
    }

    #[test]
    fn wilson_interval_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(894, 1000);
        assert!(lo < 0.894 && 0.894 < hi);
        assert!(hi - lo < 0.05);
        let (lo0, hi0) = wilson_interval(0, 50);
        assert!(lo0.abs() < 1e-12);
        assert!(hi0 > 0.0);
        let (lo1, hi1) = wilson_interval(50, 50);
        assert!(lo1 < 1.0);
        assert!(hi1 > 1.0 - 1e-12);
    }

    #[test]
    fn chi_square_uniform_counts_fit() {
        let (stat, p) = chi_square_gof(&[28, 31, 40, 35], &[0.25; 4]);
        assert_abs_diff_eq!(stat, 2.417_910_447_761_194, epsilon = 1e-9);
        assert!(p > 0.05);
        let (_, p_bad) = chi_square_gof(&[1000, 10], &[0.5, 0.5]);
        assert!(p_bad < 1e-6);
    }

    #[test]
    fn mean_sd_on_known_sample() {
        let (m, sd) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(m, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sd, (5.0f64 / 3.0).sqrt(), epsilon = 1e-12);
    }
}
