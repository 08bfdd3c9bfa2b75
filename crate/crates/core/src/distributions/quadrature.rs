//! Globally adaptive 15-point Gauss–Kronrod quadrature.
//!
//! The interval with the largest error estimate is bisected until the
//! summed error estimate meets `max(abs_tol, rel_tol·|I|)` or the evaluation
//! budget runs out. Error estimates follow the QUADPACK rescaling.

// nodes and weights are kept as tabulated, beyond f64 precision
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{DistError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Default evaluation budget per integration.
pub const DEFAULT_MAX_EVALUATIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evaluations: usize,
    /// Number of equal pieces the range is split into before adapting.
    pub initial_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
            initial_intervals: 8,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let res_asc = res_asc * h;
    let res_abs = res_abs * h;
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Segment {
        a,
        b,
        value: res_k * half,
        error,
    })
}

/// Integrate a fallible integrand over `[a, b]`. Errors raised by the
/// integrand are returned unchanged.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(DistError::Domain(format!(
            "integration limits must be finite, got [{a}, {b}]"
        )));
    }
    if !(opts.rel_tol >= 0.0 && opts.abs_tol >= 0.0) || (opts.rel_tol == 0.0 && opts.abs_tol == 0.0) {
        return Err(DistError::Domain(
            "quadrature tolerances must be non-negative and not both zero".into(),
        ));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }

    let pieces = opts.initial_intervals.max(1);
    let width = (b - a) / pieces as f64;
    let mut heap = BinaryHeap::with_capacity(pieces * 4);
    let mut evaluations = 0usize;
    for i in 0..pieces {
        let lo = a + width * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + width };
        heap.push(kronrod(&mut f, lo, hi)?);
        evaluations += 15;
    }

    let (mut value, mut error) = totals(&heap);
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            // Running sums drift; confirm against a fresh summation.
            let (v, e) = totals(&heap);
            value = v;
            error = e;
            if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
                return Ok(QuadResult {
                    value,
                    error,
                    evaluations,
                });
            }
        }
        if evaluations + 30 > opts.max_evaluations {
            return Err(DistError::Quadrature {
                estimate: value,
                error,
                evaluations,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval can no longer be split in floating point.
            return Err(DistError::Quadrature {
                estimate: value,
                error,
                evaluations,
            });
        }
        let left = kronrod(&mut f, worst.a, mid)?;
        let right = kronrod(&mut f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

fn totals(heap: &BinaryHeap<Segment>) -> (f64, f64) {
    heap.iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error))
}

/// Integrate an infallible integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral() {
        let r = integrate(|x| (-x * x).exp(), -30.0, 30.0, &QuadOptions::with_rel_tol(1e-12)).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn peaked_integrand_refines() {
        // narrow bump far from any initial node
        let w = 1e-3;
        let r = integrate(
            |x: f64| (-((x - 0.123_456) / w).powi(2)).exp(),
            -10.0,
            10.0,
            &QuadOptions {
                initial_intervals: 64,
                ..QuadOptions::with_rel_tol(1e-10)
            },
        )
        .unwrap();
        assert!((r.value - w * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let err = integrate(
            |x: f64| if x > 0.0 { x.powf(-0.999) } else { 0.0 },
            0.0,
            1.0,
            &QuadOptions {
                max_evaluations: 300,
                ..QuadOptions::with_rel_tol(1e-12)
            },
        )
        .unwrap_err();
        match err {
            DistError::Quadrature {
                estimate,
                error,
                evaluations,
            } => {
                assert!(estimate.is_finite() && error > 0.0);
                assert!(evaluations <= 300);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn integrand_errors_propagate() {
        let err = try_integrate(
            |x| {
                if x > 0.5 {
                    Err(DistError::Domain("boom".into()))
                } else {
                    Ok(1.0)
                }
            },
            0.0,
            1.0,
            &QuadOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, DistError::Domain("boom".into()));
    }

    #[test]
    fn rejects_bad_limits() {
        assert!(integrate(|x| x, 0.0, f64::INFINITY, &QuadOptions::default()).is_err());
    }
}
