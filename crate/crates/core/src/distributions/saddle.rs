use super::{ConvolutionOrder, DistError, GumbelParams, Result};

/// Exponent of the convolution kernel when one more Gumbel factor is
/// convolved onto the k-fold approximation:
///
/// ```text
/// Z(t1; t) = k·exp(-(t1 - kμ)/(kη)) + exp(-(t - t1 - μ)/η)
/// ```
pub fn saddle_exponent(t1: f64, t: f64, k: ConvolutionOrder, p: &GumbelParams) -> f64 {
    let kf = k.as_f64();
    let (mu, eta) = (p.location(), p.scale());
    kf * (-(t1 - kf * mu) / (kf * eta)).exp() + (-(t - t1 - mu) / eta).exp()
}

/// `dZ/dt1`.
pub fn saddle_exponent_slope(t1: f64, t: f64, k: ConvolutionOrder, p: &GumbelParams) -> f64 {
    let kf = k.as_f64();
    let (mu, eta) = (p.location(), p.scale());
    ((-(t - t1 - mu) / eta).exp() - (-(t1 - kf * mu) / (kf * eta)).exp()) / eta
}

/// Stationary point `t1 = k·t/(k + 1)` of [`saddle_exponent`]; it does not
/// depend on the Gumbel parameters.
pub fn saddle_point_location(t: f64, k: ConvolutionOrder) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(DistError::Domain(format!(
            "saddle point needs a finite t > 0, got {t}"
        )));
    }
    let kf = k.as_f64();
    Ok(kf * t / (kf + 1.0))
}
