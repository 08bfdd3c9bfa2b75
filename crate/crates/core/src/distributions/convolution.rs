use super::quadrature::{try_integrate, QuadOptions};
use super::{check_finite, ConvolutionOrder, DistError, GumbelParams, Result};

/// Half-width, in units of the scale, of the window each Gumbel factor is
/// integrated over. The mass outside `μ ± 40η` is below `1e-17`.
const COMPONENT_HALF_WIDTH: f64 = 40.0;

/// Range of integration for the convolution integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionDomain {
    /// Whole real line, truncated per component at `μ ± 40η`. Normalized.
    #[default]
    FullLine,
    /// `[0, t]` at every nesting level, as written for positive block times.
    /// Loses the mass of each phase below zero.
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvolutionOptions {
    pub rel_tol: f64,
    pub domain: ConvolutionDomain,
    pub max_evaluations: usize,
}

impl Default for ConvolutionOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            domain: ConvolutionDomain::FullLine,
            max_evaluations: super::quadrature::DEFAULT_MAX_EVALUATIONS,
        }
    }
}

/// Density of the sum of `k ∈ {2, 3}` independent Gumbel(μ, η) variables by
/// adaptive quadrature of the convolution integral over the full line.
pub fn exact_conv_pdf(t: f64, k: ConvolutionOrder, p: &GumbelParams, rel_tol: f64) -> Result<f64> {
    exact_conv_pdf_with(
        t,
        k,
        p,
        &ConvolutionOptions {
            rel_tol,
            ..ConvolutionOptions::default()
        },
    )
}

pub fn exact_conv_pdf_with(
    t: f64,
    k: ConvolutionOrder,
    p: &GumbelParams,
    opts: &ConvolutionOptions,
) -> Result<f64> {
    check_finite(t)?;
    if !(1e-12..=1e-3).contains(&opts.rel_tol) {
        return Err(DistError::Domain(format!(
            "rel_tol must lie in [1e-12, 1e-3], got {}",
            opts.rel_tol
        )));
    }
    let conv = Convolver { p: *p, opts: *opts };
    match k.get() {
        2 => conv.twofold(t),
        3 => conv.threefold(t),
        other => Err(DistError::Domain(format!(
            "exact convolution is available for k = 2 or 3, got {other}"
        ))),
    }
}

struct Convolver {
    p: GumbelParams,
    opts: ConvolutionOptions,
}

impl Convolver {
    fn quad_opts(&self) -> QuadOptions {
        QuadOptions {
            rel_tol: self.opts.rel_tol,
            abs_tol: 0.0,
            max_evaluations: self.opts.max_evaluations,
            initial_intervals: 16,
        }
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.p.location()) / self.p.scale();
        -self.p.scale().ln() - z - (-z).exp()
    }

    /// Support window `[lo, hi]` of one component.
    fn window(&self, copies: f64) -> (f64, f64) {
        let half = COMPONENT_HALF_WIDTH * self.p.scale() * copies;
        let centre = self.p.location() * copies;
        (centre - half, centre + half)
    }

    /// Limits for `∫ f(s)·g(t − s) ds` where `f` is one component and `g` is
    /// a sum of `rest` components.
    fn limits(&self, t: f64, rest: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = self.window(1.0);
        match self.opts.domain {
            ConvolutionDomain::FullLine => {
                let (rlo, rhi) = self.window(rest);
                lo = lo.max(t - rhi);
                hi = hi.min(t - rlo);
            }
            ConvolutionDomain::Positive => {
                lo = lo.max(0.0);
                hi = hi.min(t);
            }
        }
        (lo < hi).then_some((lo, hi))
    }

    fn twofold(&self, t: f64) -> Result<f64> {
        let Some((lo, hi)) = self.limits(t, 1.0) else {
            return Ok(0.0);
        };
        let r = try_integrate(
            |s| Ok((self.ln_pdf(s) + self.ln_pdf(t - s)).exp()),
            lo,
            hi,
            &self.quad_opts(),
        )?;
        Ok(r.value.max(0.0))
    }

    fn threefold(&self, t: f64) -> Result<f64> {
        let Some((lo, hi)) = self.limits(t, 2.0) else {
            return Ok(0.0);
        };
        let r = try_integrate(
            |s| {
                let f = self.ln_pdf(s).exp();
                if f == 0.0 {
                    return Ok(0.0);
                }
                Ok(f * self.twofold(t - s)?)
            },
            lo,
            hi,
            &self.quad_opts(),
        )?;
        Ok(r.value.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::quadrature::{integrate, try_integrate};
    use crate::distributions::{approx_pdf_k, gumbel_pdf, EULER_GAMMA};

    fn order(k: u32) -> ConvolutionOrder {
        ConvolutionOrder::new(k).unwrap()
    }

    #[test]
    fn twofold_normalization_and_mean() {
        let p = GumbelParams::standard();
        let k = order(2);
        let opts = QuadOptions::with_rel_tol(1e-10);
        let mass = try_integrate(|t| exact_conv_pdf(t, k, &p, 1e-10), -30.0, 90.0, &opts).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-6, "{}", mass.value);
        let mean = try_integrate(|t| Ok(t * exact_conv_pdf(t, k, &p, 1e-10)?), -30.0, 90.0, &opts).unwrap();
        assert!((mean.value - 2.0 * EULER_GAMMA).abs() < 1e-4, "{}", mean.value);
    }

    #[test]
    fn twofold_matches_bessel_closed_form() {
        // Sum of two standard Gumbels has density 2·e^{-t}·K0(2·e^{-t/2}).
        // K0 is evaluated here from its integral representation
        // K0(x) = ∫_0^∞ exp(-x·cosh u) du, independent of the convolution path.
        let k0 = |x: f64| {
            integrate(
                |u: f64| (-x * u.cosh()).exp(),
                0.0,
                40.0,
                &QuadOptions::with_rel_tol(1e-13),
            )
            .unwrap()
            .value
        };
        let p = GumbelParams::standard();
        for t in [-2.0_f64, -0.5, 0.0, 0.5, 1.3, 3.0, 7.0] {
            let closed = 2.0 * (-t).exp() * k0(2.0 * (-0.5 * t).exp());
            let got = exact_conv_pdf(t, order(2), &p, 1e-11).unwrap();
            assert!(((got - closed) / closed).abs() < 1e-8, "t={t}: {got} vs {closed}");
        }
    }

    #[test]
    fn scale_location_covariance() {
        // f_{μ,η}(t) = f_{0,1}((t - kμ)/η)/η
        let p = GumbelParams::new(2.0, 0.36).unwrap();
        let s = GumbelParams::standard();
        for t in [5.0, 6.0, 6.6, 7.5] {
            let a = exact_conv_pdf(t, order(3), &p, 1e-9).unwrap();
            let b = exact_conv_pdf((t - 6.0) / 0.36, order(3), &s, 1e-9).unwrap() / 0.36;
            assert!(((a - b) / b).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn order_and_tolerance_guards() {
        let p = GumbelParams::standard();
        assert!(exact_conv_pdf(0.0, order(1), &p, 1e-8).is_err());
        assert!(exact_conv_pdf(0.0, order(4), &p, 1e-8).is_err());
        assert!(exact_conv_pdf(0.0, order(2), &p, 1e-2).is_err());
        assert!(exact_conv_pdf(0.0, order(2), &p, 1e-13).is_err());
        assert!(exact_conv_pdf(f64::NAN, order(2), &p, 1e-8).is_err());
    }

    #[test]
    fn far_tails_are_zero_not_nan() {
        let p = GumbelParams::standard();
        for t in [-500.0, 500.0] {
            let v = exact_conv_pdf(t, order(3), &p, 1e-8).unwrap();
            assert!(v == 0.0 || (v > 0.0 && v < 1e-100), "{v}");
        }
    }

    #[test]
    fn positive_domain_loses_negative_mass() {
        let p = GumbelParams::new(0.5, 1.0).unwrap();
        let lit = ConvolutionOptions {
            domain: ConvolutionDomain::Positive,
            ..ConvolutionOptions::default()
        };
        let full = exact_conv_pdf(2.0, order(2), &p, 1e-8).unwrap();
        let part = exact_conv_pdf_with(2.0, order(2), &p, &lit).unwrap();
        assert!(part < full);
        assert_eq!(exact_conv_pdf_with(-1.0, order(2), &p, &lit).unwrap(), 0.0);
        // physical regime: μ ≫ η makes the two agree
        let p = GumbelParams::new(2.0, 0.2).unwrap();
        let full = exact_conv_pdf(4.2, order(3), &p, 1e-9).unwrap();
        let part =
            exact_conv_pdf_with(4.2, order(3), &p, &ConvolutionOptions { rel_tol: 1e-9, ..lit }).unwrap();
        assert!(((full - part) / full).abs() < 1e-9);
    }

    #[test]
    fn approximation_mode_sits_left_of_exact_mode() {
        let p = GumbelParams::new(2.0, 0.36).unwrap();
        for k in [2u32, 3] {
            let ko = order(k);
            let grid: Vec<f64> = (0..=1500)
                .map(|i| 2.0 * f64::from(k) - 1.0 + f64::from(i) * 0.002)
                .collect();
            let argmax = |f: &dyn Fn(f64) -> f64| {
                grid.iter()
                    .copied()
                    .max_by(|a, b| f(*a).total_cmp(&f(*b)))
                    .unwrap()
            };
            let approx_mode = argmax(&|t| approx_pdf_k(t, ko, &p).unwrap());
            let exact_mode = argmax(&|t| exact_conv_pdf(t, ko, &p, 1e-7).unwrap());
            assert!(approx_mode <= exact_mode, "k={k}: {approx_mode} > {exact_mode}");
        }
    }

    #[test]
    fn k1_reference_is_gumbel() {
        // sanity for the helper used above
        let p = GumbelParams::standard();
        let c = Convolver {
            p,
            opts: ConvolutionOptions::default(),
        };
        assert!((c.ln_pdf(0.3).exp() - gumbel_pdf(0.3, &p).unwrap()).abs() < 1e-16);
    }
}
