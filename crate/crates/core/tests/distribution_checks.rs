use bft_blocktime::distributions::quadrature::{integrate, QuadOptions};
use bft_blocktime::distributions::{
    approx_normalization, approx_pdf_k, exact_conv_pdf, gumbel_ccdf, gumbel_pdf, gumbel_sample,
    moments_approx, saddle_exponent_slope, saddle_point_location, ConvolutionOrder, GumbelParams,
    EULER_GAMMA,
};
use bft_blocktime::fitting::ks_statistic;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn order(k: u32) -> ConvolutionOrder {
    ConvolutionOrder::new(k).unwrap()
}

#[test]
fn gumbel_pdf_integrates_to_one() {
    for (mu, eta) in [(0.0, 1.0), (2.002896, 0.363636), (-5.0, 3.0)] {
        let p = GumbelParams::new(mu, eta).unwrap();
        let r = integrate(
            |t| gumbel_pdf(t, &p).unwrap(),
            mu - 40.0 * eta,
            mu + 60.0 * eta,
            &QuadOptions::with_rel_tol(1e-12),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-9, "{mu} {eta}: {}", r.value);
    }
}

#[test]
fn pdf_is_minus_ccdf_derivative() {
    let p = GumbelParams::new(2.002896, 0.363636).unwrap();
    let h = 1e-5;
    for i in 0..100 {
        let t = p.location() - 5.0 * p.scale() + 10.0 * p.scale() * f64::from(i) / 99.0;
        let d = -(gumbel_ccdf(t + h, &p).unwrap() - gumbel_ccdf(t - h, &p).unwrap()) / (2.0 * h);
        assert!((d - gumbel_pdf(t, &p).unwrap()).abs() < 1e-6, "t={t}");
    }
}

/// Moments of an exact convolution density by quadrature over the bulk.
fn conv_moments(k: u32, p: &GumbelParams, rel_tol: f64) -> (f64, f64, f64) {
    let kf = f64::from(k);
    let (lo, hi) = (
        kf * p.location() - 8.0 * p.scale(),
        kf * p.location() + 45.0 * p.scale(),
    );
    let opts = QuadOptions {
        initial_intervals: 32,
        ..QuadOptions::with_rel_tol(1e-10)
    };
    let m = |power: i32| {
        integrate(
            |t| t.powi(power) * exact_conv_pdf(t, order(k), p, rel_tol).unwrap(),
            lo,
            hi,
            &opts,
        )
        .unwrap()
        .value
    };
    let (m0, m1, m2) = (m(0), m(1), m(2));
    (m0, m1 / m0, m2 / m0 - (m1 / m0).powi(2))
}

#[test]
fn exact_convolution_moments() {
    for k in [2u32, 3] {
        for (mu, eta) in [(0.0, 1.0), (2.0, 0.36)] {
            let p = GumbelParams::new(mu, eta).unwrap();
            let (mass, mean, var) = conv_moments(k, &p, 1e-9);
            let exact = moments_approx(order(k), &p);
            assert!((mass - 1.0).abs() < 1e-6, "k={k}: mass {mass}");
            assert!(
                ((mean - exact.mean) / exact.mean).abs() < 1e-4,
                "k={k}: mean {mean}"
            );
            assert!(
                ((var - exact.variance) / exact.variance).abs() < 1e-4,
                "k={k}: var {var}"
            );
            if mu == 0.0 {
                assert!((mean - f64::from(k) * EULER_GAMMA).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn threefold_density_matches_monte_carlo() {
    let p = GumbelParams::new(2.0, 0.36).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let xs: Vec<f64> = (0..1_000_000)
        .map(|_| (0..3).map(|_| gumbel_sample(&p, &mut rng)).sum())
        .collect();
    // tabulated CDF of the quadrature density
    let (lo, hi, n) = (6.0 - 4.0, 6.0 + 12.0, 1401);
    let step = (hi - lo) / f64::from(n - 1);
    let dens: Vec<f64> = (0..n)
        .map(|i| exact_conv_pdf(lo + step * f64::from(i), order(3), &p, 1e-8).unwrap())
        .collect();
    let mut cum = vec![0.0; dens.len()];
    for i in 1..dens.len() {
        cum[i] = cum[i - 1] + 0.5 * step * (dens[i] + dens[i - 1]);
    }
    let cdf = |t: f64| {
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return 1.0;
        }
        let pos = (t - lo) / step;
        let i = (pos as usize).min(dens.len() - 2);
        cum[i] + (pos - i as f64) * (cum[i + 1] - cum[i])
    };
    let d = ks_statistic(&xs, |t| cdf(t).min(1.0)).unwrap();
    assert!(d < 0.01, "{d}");
}

/// ∫ approx_pdf_k = E[(μ/η − ln U)^(k−1)] with U ~ Gamma(k, rate k).
fn normalization_oracle(k: u32, a: f64) -> f64 {
    // ψ(2) − ln 2, ψ(3) − ln 3 and ψ₁(3)
    const M2: f64 = 0.422_784_335_098_467_1 - std::f64::consts::LN_2;
    const M3: f64 = 0.922_784_335_098_467_1 - 1.098_612_288_668_109_8;
    const V3: f64 = 0.394_934_066_848_226_4;
    match k {
        2 => a - M2,
        3 => (a - M3).powi(2) + V3,
        _ => unreachable!(),
    }
}

#[test]
fn approx_normalization_matches_gamma_expectation() {
    for a in [3.0, 5.5, 20.0, 80.0] {
        let eta = 0.36;
        let p = GumbelParams::new(a * eta, eta).unwrap();
        for k in [2u32, 3] {
            let z = approx_normalization(order(k), &p).unwrap();
            let oracle = normalization_oracle(k, a);
            assert!(
                ((z - oracle) / oracle).abs() < 1e-7,
                "k={k} a={a}: {z} vs {oracle}"
            );
            // the leading term a^(k-1) is off by O(1/a)
            let gap = z / a.powi(k as i32 - 1) - 1.0;
            assert!(gap > 0.0 && gap * a < 0.5, "k={k} a={a}: gap {gap}");
        }
    }
}

#[test]
fn approx_k1_matches_gumbel_on_grid() {
    let p = GumbelParams::new(2.002896, 0.363636).unwrap();
    for i in 0..10_000 {
        let t = -2.0 + 8.0 * f64::from(i) / 9999.0;
        let a = approx_pdf_k(t, order(1), &p).unwrap();
        let b = gumbel_pdf(t, &p).unwrap();
        assert!(a.to_bits().abs_diff(b.to_bits()) <= 2, "t={t}");
    }
}

#[test]
fn saddle_point_is_the_minimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let k = order(rng.gen_range(1..=16));
        let t = rng.gen_range(0.5..50.0);
        let p = GumbelParams::new(rng.gen_range(0.1..5.0), rng.gen_range(0.05..2.0)).unwrap();
        // Z is convex in t1, so its slope crosses zero once
        let (mut lo, mut hi) = (0.0, t);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if saddle_exponent_slope(mid, t, k, &p) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let numeric = 0.5 * (lo + hi);
        let closed = saddle_point_location(t, k).unwrap();
        assert!(
            (numeric - closed).abs() <= 1e-8 * t,
            "k={k} t={t}: {numeric} vs {closed}"
        );
    }
}

#[test]
fn approximation_mode_left_of_exact() {
    for k in [2u32, 3] {
        let p = GumbelParams::new(2.0, 0.36).unwrap();
        let kf = f64::from(k);
        let grid: Vec<f64> = (0..=2000)
            .map(|i| kf * 2.0 - 1.0 + 3.0 * f64::from(i) / 2000.0)
            .collect();
        let argmax = |f: &dyn Fn(f64) -> f64| {
            grid.iter()
                .copied()
                .max_by(|a, b| f(*a).total_cmp(&f(*b)))
                .unwrap()
        };
        let approx = argmax(&|t| approx_pdf_k(t, order(k), &p).unwrap());
        let exact = argmax(&|t| exact_conv_pdf(t, order(k), &p, 1e-8).unwrap());
        assert!(approx <= exact, "k={k}: {approx} vs {exact}");
    }
}
