use super::{FitError, Result};
use crate::distributions::MomentSummary;

/// Kolmogorov–Smirnov distance `sup |F_n − F|` between the empirical CDF
/// of `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(FitError::Domain("samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    ks_statistic_sorted(&sorted, cdf)
}

/// As [`ks_statistic`] for samples already in ascending order.
pub fn ks_statistic_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(FitError::Domain("KS statistic of an empty sample".into()));
    }
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut prev_f = f64::NEG_INFINITY;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        if i > 0 && x < sorted[i - 1] {
            return Err(FitError::Domain("samples are not sorted".into()));
        }
        // group ties: the empirical CDF jumps once per distinct value
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        if !(0.0..=1.0).contains(&f) {
            return Err(FitError::Domain(format!("cdf({x}) = {f} lies outside [0, 1]")));
        }
        if f < prev_f {
            return Err(FitError::Domain(format!("cdf decreases at {x}")));
        }
        prev_f = f;
        d = d.max(f - i as f64 / n).max(j as f64 / n - f);
        i = j;
    }
    Ok(d)
}

/// Adjusted Fisher–Pearson skewness `G1`.
pub fn sample_skewness(samples: &[f64]) -> Result<f64> {
    if samples.len() < 3 {
        return Err(FitError::Domain(format!(
            "skewness needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    let m = MomentSummary::from_samples(samples)?;
    if m.variance.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(FitError::Domain("skewness of a sample with zero variance".into()));
    }
    Ok(m.skewness)
}
