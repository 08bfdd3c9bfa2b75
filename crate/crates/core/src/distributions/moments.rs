use std::f64::consts::PI;

use super::{gumbel_skewness, ConvolutionOrder, DistError, GumbelParams, Result, EULER_GAMMA};

/// Mean, variance, standard deviation and skewness of a law or a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub skewness: f64,
}

impl MomentSummary {
    fn new(mean: f64, variance: f64, skewness: f64) -> Self {
        let variance = variance.max(0.0);
        Self {
            mean,
            variance,
            std_dev: variance.sqrt(),
            skewness,
        }
    }

    /// Sample moments: unbiased variance (`n - 1` denominator) and the
    /// adjusted Fisher–Pearson skewness `G1`.
    ///
    /// `variance` is `0` for a single sample; `skewness` is `NaN` when fewer
    /// than three samples are given or the variance vanishes.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(DistError::Domain("moment summary of an empty sample".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let (m2, m3) = samples.iter().fold((0.0, 0.0), |(m2, m3), &x| {
            let d = x - mean;
            (m2 + d * d, m3 + d * d * d)
        });
        let variance = if samples.len() > 1 { m2 / (n - 1.0) } else { 0.0 };
        let skewness = if samples.len() >= 3 && m2 > 0.0 {
            let g1 = (m3 / n) / (m2 / n).powf(1.5);
            g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
        } else {
            f64::NAN
        };
        Ok(Self::new(mean, variance, skewness))
    }
}

/// Exact moments of the sum of `k` independent Gumbel(μ, η) variables.
pub fn moments_approx(k: ConvolutionOrder, p: &GumbelParams) -> MomentSummary {
    let kf = k.as_f64();
    MomentSummary::new(
        kf * (p.location() + EULER_GAMMA * p.scale()),
        kf * PI * PI * p.scale() * p.scale() / 6.0,
        gumbel_skewness() / kf.sqrt(),
    )
}

/// Harmonic number `H(n) = Σ_{i=1}^{n} 1/i`, summed smallest term first.
pub fn harmonic(n: u64) -> f64 {
    (1..=n).rev().map(|i| 1.0 / i as f64).sum()
}

fn check_chain(n: u32, last_state: u32) -> Result<()> {
    if n < 2 {
        return Err(DistError::Domain(format!(
            "broadcast chain needs at least 2 validators, got {n}"
        )));
    }
    if last_state == 0 || last_state >= n {
        return Err(DistError::Domain(format!(
            "last summed state must lie in 1..={}, got {last_state}",
            n - 1
        )));
    }
    Ok(())
}

/// Per-step success probability of leaving state `i` in an `n`-node chain.
fn leave_prob(i: u32, n: u32) -> f64 {
    let (i, n) = (f64::from(i), f64::from(n));
    (i / n) * ((n - i) / n)
}

/// Expected broadcast time `Δt·Σ_{i=1}^{N-1} 1/p_i = Δt·2N·H(N-1)`, summed
/// exactly.
pub fn analytic_broadcast_mean(n: u32, delta_t: f64) -> Result<f64> {
    analytic_broadcast_mean_through(n, n.saturating_sub(1).max(1), delta_t)
}

/// Expected time to go from one holder to `last_state + 1` holders.
pub fn analytic_broadcast_mean_through(n: u32, last_state: u32, delta_t: f64) -> Result<f64> {
    check_chain(n, last_state)?;
    let steps: f64 = (1..=last_state).rev().map(|i| 1.0 / leave_prob(i, n)).sum();
    Ok(delta_t * steps)
}

/// Variance `Δt²·Σ (1 - p_i)/p_i²` of the full broadcast time.
pub fn analytic_broadcast_variance(n: u32, delta_t: f64) -> Result<f64> {
    analytic_broadcast_variance_through(n, n.saturating_sub(1).max(1), delta_t)
}

pub fn analytic_broadcast_variance_through(n: u32, last_state: u32, delta_t: f64) -> Result<f64> {
    check_chain(n, last_state)?;
    let steps: f64 = (1..=last_state)
        .rev()
        .map(|i| {
            let p = leave_prob(i, n);
            (1.0 - p) / (p * p)
        })
        .sum();
    Ok(delta_t * delta_t * steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(k: u32) -> ConvolutionOrder {
        ConvolutionOrder::new(k).unwrap()
    }

    #[test]
    fn smallest_chain() {
        assert_eq!(analytic_broadcast_mean(2, 1.0).unwrap(), 4.0);
        assert_eq!(analytic_broadcast_variance(2, 1.0).unwrap(), 12.0);
        assert!(analytic_broadcast_mean(1, 1.0).is_err());
        assert!(analytic_broadcast_variance(0, 1.0).is_err());
    }

    #[test]
    fn mean_equals_harmonic_form() {
        for n in [2u32, 3, 10, 175, 1000] {
            let direct = analytic_broadcast_mean(n, 1.0).unwrap();
            let harm = 2.0 * f64::from(n) * harmonic(u64::from(n) - 1);
            assert!(((direct - harm) / harm).abs() < 1e-13, "n={n}");
        }
        // 2·175·H(174), 30-digit reference
        let m = analytic_broadcast_mean(175, 1.0).unwrap();
        assert!((m - 2_008.699_621_210_923_8).abs() < 1e-9, "{m}");
        let m = analytic_broadcast_mean(175, 0.0011).unwrap();
        assert!((m - 2.2096).abs() < 1e-3);
    }

    #[test]
    fn variance_below_bound() {
        for n in [2u32, 5, 50, 175, 500] {
            let nf = f64::from(n);
            let v = analytic_broadcast_variance(n, 1.0).unwrap();
            let bound = PI * PI * nf * nf / 3.0 + 2.0 * nf * harmonic(u64::from(n) - 1);
            assert!(v <= bound, "n={n}: {v} > {bound}");
        }
        let v = analytic_broadcast_variance(175, 1.0).unwrap();
        // exact sum, 30-digit reference
        assert!((v - 102_409.909_310_915_32).abs() < 1e-6, "{v}");
        let sd = analytic_broadcast_variance(175, 0.0011).unwrap().sqrt();
        assert!((sd - 0.352).abs() < 0.001, "{sd}");
    }

    #[test]
    fn truncated_sums() {
        let full = analytic_broadcast_mean(175, 1.0).unwrap();
        let q = analytic_broadcast_mean_through(175, 116, 1.0).unwrap();
        assert!(q < full);
        assert!(analytic_broadcast_mean_through(175, 175, 1.0).is_err());
        assert!(analytic_broadcast_mean_through(175, 0, 1.0).is_err());
    }

    #[test]
    fn approx_moments() {
        let p = GumbelParams::standard();
        let m1 = moments_approx(order(1), &p);
        assert!((m1.skewness - 1.1395).abs() < 1e-4);
        assert!((m1.mean - EULER_GAMMA).abs() < 1e-15);
        let m3 = moments_approx(order(3), &p);
        assert!((m3.skewness - 0.6579).abs() < 1e-4);
        let m4 = moments_approx(order(4), &p);
        assert!((m4.variance - 6.5797).abs() < 1e-4);
        assert!((m4.std_dev - m4.variance.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn skewness_decreases_with_order() {
        let p = GumbelParams::new(1.0, 0.4).unwrap();
        let skews: Vec<f64> = (1..=16).map(|k| moments_approx(order(k), &p).skewness).collect();
        assert!(skews.windows(2).all(|w| w[1] < w[0]));
        assert!(skews[15] < 0.3);
    }

    #[test]
    fn sample_summary() {
        let s = MomentSummary::from_samples(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.variance, 1.0);
        assert_eq!(s.skewness, 0.0);
        let one = MomentSummary::from_samples(&[3.0]).unwrap();
        assert_eq!(one.variance, 0.0);
        assert!(one.skewness.is_nan());
        assert!(MomentSummary::from_samples(&[]).is_err());
        // scipy.stats.skew([1, 2, 10], bias=False)
        let s = MomentSummary::from_samples(&[1.0, 2.0, 10.0]).unwrap();
        assert!(
            (s.skewness - 1.652_316_740_332_990_8).abs() < 1e-12,
            "{}",
            s.skewness
        );
    }
}
