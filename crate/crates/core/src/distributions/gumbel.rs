use std::f64::consts::PI;

use rand::Rng;

use super::quadrature::{integrate, QuadOptions};
use super::{check_finite, ln_factorial, ConvolutionOrder, DistError, GumbelParams, Result};

/// Gumbel density `(1/η)·exp(-z)·exp(-exp(-z))`, `z = (t - μ)/η`.
///
/// Evaluated as a single exponential so both tails underflow to `0.0`
/// instead of producing `inf·0`.
pub fn gumbel_pdf(t: f64, p: &GumbelParams) -> Result<f64> {
    check_finite(t)?;
    let z = (t - p.location()) / p.scale();
    Ok((-z - (-z).exp()).exp() / p.scale())
}

/// Survival function `P(T > t) = 1 - exp(-exp(-z))`.
pub fn gumbel_ccdf(t: f64, p: &GumbelParams) -> Result<f64> {
    check_finite(t)?;
    let z = (t - p.location()) / p.scale();
    // -expm1(-x) keeps precision in the upper tail where exp(-z) is tiny.
    Ok(-(-(-z).exp()).exp_m1())
}

pub fn gumbel_cdf(t: f64, p: &GumbelParams) -> Result<f64> {
    check_finite(t)?;
    let z = (t - p.location()) / p.scale();
    Ok((-(-z).exp()).exp())
}

/// Inverse of the CDF: `μ - η·ln(-ln u)` for `u` in the open unit interval.
pub fn gumbel_quantile(u: f64, p: &GumbelParams) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(DistError::Domain(format!(
            "quantile level must lie in (0, 1), got {u}"
        )));
    }
    Ok(p.location() - p.scale() * (-u.ln()).ln())
}

/// Inverse-transform draw. A uniform of exactly `0` is redrawn; `gen::<f64>`
/// never yields `1`.
pub fn gumbel_sample<R: Rng + ?Sized>(p: &GumbelParams, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return p.location() - p.scale() * (-u.ln()).ln();
        }
    }
}

/// Closed-form approximation of the k-fold Gumbel convolution density,
///
/// ```text
/// t^(k-1) / ((k-1)!·η^k) · exp(-(t - kμ)/η) · exp(-k·exp(-(t - kμ)/(kη)))
/// ```
///
/// For `k = 1` this is the Gumbel density itself and the arithmetic is kept
/// identical to [`gumbel_pdf`]. For `k >= 2` the prefactor is evaluated in
/// log space and `t <= 0` yields `0`.
///
/// The expression is not normalized for `k >= 2`: for `μ/η` large its
/// integral is close to `(μ/η)^(k-1)`.
pub fn approx_pdf_k(t: f64, k: ConvolutionOrder, p: &GumbelParams) -> Result<f64> {
    check_finite(t)?;
    let kf = k.as_f64();
    let z = (t - kf * p.location()) / p.scale();
    let exponent = -z - kf * (-z / kf).exp();
    if k.get() == 1 {
        return Ok(exponent.exp() / p.scale());
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let log_prefactor = (kf - 1.0) * t.ln() - ln_factorial(k.get() - 1) - kf * p.scale().ln();
    Ok((log_prefactor + exponent).exp())
}

/// Integral of [`approx_pdf_k`] over the real line, by quadrature. Equal to
/// `1` for `k = 1`.
pub fn approx_normalization(k: ConvolutionOrder, p: &GumbelParams) -> Result<f64> {
    if k.get() == 1 {
        return Ok(1.0);
    }
    let kf = k.as_f64();
    let center = kf * p.location();
    // The left tail decays double-exponentially, the right tail like
    // t^(k-1)·exp(-t/η).
    let lo = (center - 10.0 * kf * p.scale()).max(0.0);
    let hi = center + (60.0 + 15.0 * kf) * p.scale() + 10.0 * center.abs();
    let opts = QuadOptions {
        initial_intervals: 64,
        ..QuadOptions::with_rel_tol(1e-11)
    };
    let r = integrate(|t| approx_pdf_k(t, k, p).unwrap_or(0.0), lo, hi, &opts)?;
    Ok(r.value)
}

/// Gaussian with mean `kμ` and standard deviation `η√k`, the large-k limit
/// of [`approx_pdf_k`] with its normalization constant supplied.
pub fn normal_limit_pdf(t: f64, k: ConvolutionOrder, p: &GumbelParams) -> Result<f64> {
    check_finite(t)?;
    let kf = k.as_f64();
    let sd = p.scale() * kf.sqrt();
    let x = (t - kf * p.location()) / sd;
    Ok((-0.5 * x * x).exp() / (sd * (2.0 * PI).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn order(k: u32) -> ConvolutionOrder {
        ConvolutionOrder::new(k).unwrap()
    }

    #[test]
    fn pdf_at_location() {
        let p = GumbelParams::standard();
        assert!((gumbel_pdf(0.0, &p).unwrap() - (-1f64).exp()).abs() < 1e-16);

        let p = GumbelParams::new(2.002896, 0.363636).unwrap();
        // 1/(η·e), 30-digit reference value
        let expected = 1.011_669_474_890_941_3;
        let got = gumbel_pdf(2.002896, &p).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got}");
    }

    #[test]
    fn pdf_tails_underflow_to_zero() {
        let p = GumbelParams::standard();
        for t in [-1e6, -800.0, 800.0, 1e300] {
            let v = gumbel_pdf(t, &p).unwrap();
            assert_eq!(v, 0.0, "t={t}");
        }
        assert!(gumbel_pdf(f64::NAN, &p).is_err());
        assert!(gumbel_pdf(f64::INFINITY, &p).is_err());
    }

    #[test]
    fn ccdf_values() {
        let p = GumbelParams::standard();
        assert!((gumbel_ccdf(0.0, &p).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(gumbel_ccdf(-1e4, &p).unwrap(), 1.0);
        let p = GumbelParams::new(1.5, 0.4).unwrap();
        // 1 - exp(-exp(-2))
        let got = gumbel_ccdf(1.5 + 2.0 * 0.4, &p).unwrap();
        assert!((got - 0.126_576_981_506_883_36).abs() < 1e-12, "{got}");
        assert!(gumbel_ccdf(f64::NEG_INFINITY, &p).is_err());
    }

    #[test]
    fn cdf_and_ccdf_are_complementary() {
        let p = GumbelParams::new(0.3, 2.0).unwrap();
        for i in -20..40 {
            let t = f64::from(i) * 0.5;
            let s = gumbel_cdf(t, &p).unwrap() + gumbel_ccdf(t, &p).unwrap();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn quantile_fixed_point() {
        let p = GumbelParams::new(2.0, 0.36).unwrap();
        let t = gumbel_quantile((-1f64).exp(), &p).unwrap();
        assert!((t - 2.0).abs() < 1e-15);
        assert!(gumbel_quantile(0.0, &p).is_err());
        assert!(gumbel_quantile(1.0, &p).is_err());
    }

    #[test]
    fn sample_mean_is_euler_gamma() {
        let p = GumbelParams::standard();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| gumbel_sample(&p, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - super::super::EULER_GAMMA).abs() < 0.01, "{mean}");
    }

    #[test]
    fn approx_k1_matches_gumbel_exactly() {
        let p = GumbelParams::new(2.002896, 0.363636).unwrap();
        for i in -200..200 {
            let t = f64::from(i) * 0.05;
            assert_eq!(
                approx_pdf_k(t, order(1), &p).unwrap().to_bits(),
                gumbel_pdf(t, &p).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn approx_k3_at_three_mu() {
        let (mu, eta) = (2.002896_f64, 0.363636_f64);
        let p = GumbelParams::new(mu, eta).unwrap();
        let got = approx_pdf_k(3.0 * mu, order(3), &p).unwrap();
        // (3μ)²/(2η³)·e⁻³ from the closed form
        let expected = (3.0 * mu).powi(2) / (2.0 * eta.powi(3)) * (-3f64).exp();
        assert!(((got - expected) / expected).abs() < 1e-13);
        assert!((got - 18.69).abs() < 0.01, "{got}");
    }

    #[test]
    fn approx_nonpositive_time_is_zero() {
        let p = GumbelParams::new(0.0, 1.0).unwrap();
        assert_eq!(approx_pdf_k(0.0, order(2), &p).unwrap(), 0.0);
        assert_eq!(approx_pdf_k(-3.0, order(5), &p).unwrap(), 0.0);
        assert!(approx_pdf_k(0.0, order(1), &p).unwrap() > 0.0);
    }

    #[test]
    fn approx_high_order_is_finite() {
        let p = GumbelParams::new(2.0, 0.05).unwrap();
        for t in [1.0, 32.0, 40.0, 100.0] {
            let v = approx_pdf_k(t, order(16), &p).unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
    }

    #[test]
    fn normal_limit_peak_and_symmetry() {
        let p = GumbelParams::new(1.0, 0.3).unwrap();
        let k = order(9);
        let peak = normal_limit_pdf(9.0, k, &p).unwrap();
        assert!((peak - 1.0 / (0.3 * (2.0 * PI * 9.0).sqrt())).abs() < 1e-14);
        for x in [0.1, 0.7, 2.5] {
            let a = normal_limit_pdf(9.0 + x, k, &p).unwrap();
            let b = normal_limit_pdf(9.0 - x, k, &p).unwrap();
            assert!((a - b).abs() <= 1e-15 * a.max(b));
        }
    }
}
