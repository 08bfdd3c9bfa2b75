use std::fmt;
use std::str::FromStr;

use super::histogram::Histogram;
use super::optimize::{self, LmFailure, LsqOptions, Method, Problem};
use super::{FitError, Result};
use crate::distributions::{approx_normalization, approx_pdf_k, ConvolutionOrder, GumbelParams};
use crate::kv::KeyValues;

/// Lower bound on the fitted scale.
const ETA_MIN: f64 = 1e-6;

/// How the overall height of the model is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AmplitudeMode {
    /// Fit `approx_pdf_k` as is, two parameters.
    Raw,
    /// Fit `A·approx_pdf_k` with a free amplitude `A`.
    #[default]
    Free,
    /// Fit `approx_pdf_k / ∫approx_pdf_k`, normalized by quadrature at
    /// every evaluation.
    Renormalized,
}

impl AmplitudeMode {
    pub const ALL: [AmplitudeMode; 3] = [Self::Raw, Self::Free, Self::Renormalized];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Free => "free",
            Self::Renormalized => "renormalized",
        }
    }
}

impl fmt::Display for AmplitudeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AmplitudeMode {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "free" | "amplitude" => Ok(Self::Free),
            "renormalized" | "renorm" => Ok(Self::Renormalized),
            _ => Err(FitError::Domain(format!(
                "unknown amplitude mode {s:?} (expected raw, free or renormalized)"
            ))),
        }
    }
}

/// Residual weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossWeighting {
    #[default]
    Unweighted,
    /// Divide each residual by its Poisson standard error
    /// `√max(count, 1) / (n·width)`.
    Poisson,
}

impl fmt::Display for LossWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unweighted => "unweighted",
            Self::Poisson => "poisson",
        })
    }
}

impl FromStr for LossWeighting {
    type Err = FitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unweighted" => Ok(Self::Unweighted),
            "poisson" => Ok(Self::Poisson),
            _ => Err(FitError::Domain(format!(
                "unknown weighting {s:?} (expected unweighted or poisson)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub amplitude: AmplitudeMode,
    pub weighting: LossWeighting,
    pub max_iterations: usize,
    pub ftol: f64,
    pub xtol: f64,
    pub gtol: f64,
    /// Largest scaled gradient accepted for `converged = true`.
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        let lsq = LsqOptions::default();
        Self {
            amplitude: AmplitudeMode::default(),
            weighting: LossWeighting::default(),
            max_iterations: 200,
            ftol: lsq.ftol,
            xtol: lsq.xtol,
            gtol: lsq.gtol,
            gradient_tolerance: 1e-5,
        }
    }
}

const OPTION_KEYS: [&str; 7] = [
    "amplitude",
    "weighting",
    "max_iterations",
    "ftol",
    "xtol",
    "gtol",
    "gradient_tolerance",
];

impl FitOptions {
    pub fn with_amplitude(mut self, mode: AmplitudeMode) -> Self {
        self.amplitude = mode;
        self
    }

    pub fn with_weighting(mut self, weighting: LossWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("amplitude", self.amplitude);
        kv.set("weighting", self.weighting);
        kv.set("max_iterations", self.max_iterations);
        kv.set("ftol", self.ftol);
        kv.set("xtol", self.xtol);
        kv.set("gtol", self.gtol);
        kv.set("gradient_tolerance", self.gradient_tolerance);
        kv
    }

    /// Read options, taking defaults for absent keys. Unknown keys are an
    /// error so that typos do not pass silently.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        if let Some((key, _)) = kv.iter().find(|(k, _)| !OPTION_KEYS.contains(k)) {
            return Err(FitError::Domain(format!("unknown fit option {key:?}")));
        }
        let mut o = Self::default();
        if let Some(v) = kv.get("amplitude") {
            o.amplitude = v.parse()?;
        }
        if let Some(v) = kv.get("weighting") {
            o.weighting = v.parse()?;
        }
        o.max_iterations = kv.parse_value("max_iterations")?.unwrap_or(o.max_iterations);
        o.ftol = kv.parse_value("ftol")?.unwrap_or(o.ftol);
        o.xtol = kv.parse_value("xtol")?.unwrap_or(o.xtol);
        o.gtol = kv.parse_value("gtol")?.unwrap_or(o.gtol);
        o.gradient_tolerance = kv
            .parse_value("gradient_tolerance")?
            .unwrap_or(o.gradient_tolerance);
        o.validate()?;
        Ok(o)
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(FitError::Domain("max_iterations must be >= 1".into()));
        }
        for (name, v) in [
            ("ftol", self.ftol),
            ("xtol", self.xtol),
            ("gtol", self.gtol),
            ("gradient_tolerance", self.gradient_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FitError::Domain(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn lsq(&self) -> LsqOptions {
        LsqOptions {
            max_iterations: self.max_iterations,
            ftol: self.ftol,
            xtol: self.xtol,
            gtol: self.gtol,
            gradient_tolerance: self.gradient_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mu_hat: f64,
    pub eta_hat: f64,
    /// Fitted amplitude, present only in [`AmplitudeMode::Free`].
    pub amplitude_hat: Option<f64>,
    pub k: ConvolutionOrder,
    pub residual_ss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Objective after the start point and every accepted step.
    pub residual_history: Vec<f64>,
    pub method: Method,
    pub amplitude_mode: AmplitudeMode,
    pub weighting: LossWeighting,
    /// `∫ approx_pdf_k` at the fitted parameters.
    pub normalization: f64,
}

impl FitResult {
    pub fn params(&self) -> Result<GumbelParams> {
        Ok(GumbelParams::new(self.mu_hat, self.eta_hat)?)
    }

    /// Fitted curve as compared against the histogram densities.
    pub fn model_density(&self, t: f64) -> Result<f64> {
        let p = self.params()?;
        let f = approx_pdf_k(t, self.k, &p)?;
        Ok(match self.amplitude_mode {
            AmplitudeMode::Raw => f,
            AmplitudeMode::Free => self.amplitude_hat.unwrap_or(1.0) * f,
            AmplitudeMode::Renormalized => f / self.normalization,
        })
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("k", self.k);
        kv.set("amplitude_mode", self.amplitude_mode);
        kv.set("weighting", self.weighting);
        kv.set("mu_hat", self.mu_hat);
        kv.set("eta_hat", self.eta_hat);
        match self.amplitude_hat {
            Some(a) => kv.set("amplitude_hat", a),
            None => kv.set("amplitude_hat", "none"),
        }
        kv.set("normalization", self.normalization);
        kv.set("residual_ss", self.residual_ss);
        kv.set("iterations", self.iterations);
        kv.set("converged", self.converged);
        kv.set("gradient_norm", self.gradient_norm);
        kv.set(
            "method",
            match self.method {
                Method::LevenbergMarquardt => "levenberg-marquardt",
                Method::NelderMead => "nelder-mead",
            },
        );
        kv
    }
}

/// Method-of-moments start: `μ₀ = mean/k`, `η₀ = sd/√k` from the binned
/// distribution.
pub fn moment_initial_guess(hist: &Histogram, k: ConvolutionOrder) -> Result<GumbelParams> {
    let (mean, sd) = hist.binned_moments();
    let kf = f64::from(k.get());
    GumbelParams::new(mean / kf, (sd / kf.sqrt()).max(ETA_MIN)).map_err(|_| {
        FitError::Unfittable(format!(
            "histogram moments (mean {mean}, sd {sd}) give no usable start"
        ))
    })
}

/// Least-squares fit of `approx_pdf_k` to the histogram densities at the
/// bin centers.
pub fn fit_fk(
    hist: &Histogram,
    k: ConvolutionOrder,
    init: &GumbelParams,
    options: &FitOptions,
) -> Result<FitResult> {
    options.validate()?;
    let free = options.amplitude == AmplitudeMode::Free;
    let n_params = if free { 3 } else { 2 };
    let support = hist.nonzero_bins();
    if (support < 5 && (k.get() >= 3 || free)) || support < n_params {
        return Err(FitError::Unfittable(format!(
            "{support} nonzero bins are too few for a k={k} fit with {n_params} parameters"
        )));
    }

    let centers = hist.centers();
    let weights: Vec<f64> = match options.weighting {
        LossWeighting::Unweighted => vec![1.0; hist.len()],
        LossWeighting::Poisson => {
            let n = hist.sample_count() as f64;
            if n == 0.0 {
                return Err(FitError::Domain(
                    "Poisson weighting needs a histogram built from samples".into(),
                ));
            }
            hist.counts()
                .iter()
                .zip(hist.widths())
                .map(|(&c, w)| n * w / (c.max(1) as f64).sqrt())
                .collect()
        }
    };
    let target: Vec<f64> = hist
        .densities()
        .iter()
        .zip(&weights)
        .map(|(d, w)| d * w)
        .collect();

    let mode = options.amplitude;
    let shape = |x: &[f64]| -> Option<(Vec<f64>, f64)> {
        let p = GumbelParams::new(x[0], x[1]).ok()?;
        let vals = centers
            .iter()
            .map(|&t| approx_pdf_k(t, k, &p).ok())
            .collect::<Option<Vec<f64>>>()?;
        let norm = match mode {
            AmplitudeMode::Renormalized => {
                let z = approx_normalization(k, &p).ok()?;
                (z.is_finite() && z > 0.0).then_some(z)?
            }
            _ => 1.0,
        };
        Some((vals, norm))
    };
    let residuals = |x: &[f64]| -> Option<Vec<f64>> {
        let (vals, norm) = shape(x)?;
        let scale = if free { x[2] } else { 1.0 / norm };
        Some(
            vals.iter()
                .zip(&target)
                .zip(&weights)
                .map(|((m, d), w)| scale * m * w - d)
                .collect(),
        )
    };

    let mut x0 = vec![init.location(), init.scale().max(ETA_MIN)];
    if free {
        // closed-form least-squares amplitude for the initial shape
        let (vals, _) = shape(&x0)
            .ok_or_else(|| FitError::Unfittable("model is not finite at the initial guess".into()))?;
        let (num, den) = vals
            .iter()
            .zip(&target)
            .zip(&weights)
            .fold((0.0, 0.0), |(n, d), ((m, y), w)| {
                (n + m * w * y, d + (m * w).powi(2))
            });
        x0.push(if den > 0.0 { num / den } else { 1.0 });
    }
    let mut lower = vec![f64::NEG_INFINITY, ETA_MIN];
    if free {
        lower.push(0.0);
    }
    let target_norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    let problem = Problem {
        residuals: &residuals,
        lower: &lower,
        norm_floor: 1e-8 * target_norm,
    };
    let lsq = options.lsq();
    let outcome = match optimize::levenberg_marquardt(&problem, &x0, &lsq) {
        Ok(out) => out,
        Err(LmFailure::BadStart) => {
            return Err(FitError::Unfittable(
                "model is not finite at the initial guess".into(),
            ))
        }
        Err(LmFailure::Jacobian {
            x,
            history,
            iterations,
            ..
        }) => optimize::nelder_mead(&problem, &x, history, iterations, &lsq)
            .ok_or_else(|| FitError::Unfittable("simplex fallback started from a non-finite point".into()))?,
    };

    let x = &outcome.x;
    let p = GumbelParams::new(x[0], x[1])?;
    let normalization = approx_normalization(k, &p)?;
    Ok(FitResult {
        mu_hat: x[0],
        eta_hat: x[1],
        amplitude_hat: free.then(|| x[2]),
        k,
        residual_ss: outcome.ss,
        iterations: outcome.iterations,
        converged: outcome.converged,
        gradient_norm: outcome.gradient_norm,
        residual_history: outcome.history,
        method: outcome.method,
        amplitude_mode: mode,
        weighting: options.weighting,
        normalization,
    })
}

/// CDF of the fitted curve, normalized to unit mass on `[lo, hi]` and
/// tabulated on `points` equally spaced nodes (trapezoid rule, linear
/// interpolation between nodes).
pub fn model_cdf_table(fit: &FitResult, lo: f64, hi: f64, points: usize) -> Result<impl Fn(f64) -> f64> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || points < 2 {
        return Err(FitError::Domain(format!(
            "bad tabulation range [{lo}, {hi}] with {points} points"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
    let dens = grid
        .iter()
        .map(|&t| fit.model_density(t))
        .collect::<Result<Vec<f64>>>()?;
    let mut cum = vec![0.0; points];
    for i in 1..points {
        cum[i] = cum[i - 1] + 0.5 * step * (dens[i] + dens[i - 1]);
    }
    let total = cum[points - 1];
    if !(total.is_finite() && total > 0.0) {
        return Err(FitError::Unfittable(
            "fitted curve has no mass on the range".into(),
        ));
    }
    for c in &mut cum {
        *c /= total;
    }
    Ok(move |t: f64| {
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return 1.0;
        }
        let pos = (t - lo) / step;
        let i = (pos.floor() as usize).min(points - 2);
        let frac = pos - i as f64;
        cum[i] + frac * (cum[i + 1] - cum[i])
    })
}
