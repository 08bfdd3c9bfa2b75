use super::{FitError, Result};

/// How bins are laid out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinSpec {
    /// Fixed width starting at `origin` (the sample minimum when `None`).
    Width { width: f64, origin: Option<f64> },
    /// Equal-width bins spanning `[min, max]`.
    Count(usize),
    /// Width `2·IQR·n^(-1/3)` anchored at the sample minimum.
    FreedmanDiaconis,
}

/// Upper bound on the number of bins a data-driven width may produce.
const MAX_AUTO_BINS: usize = 10_000;

/// Density-normalized histogram. Bin `j` covers `[edge_j, edge_{j+1})`,
/// with the last bin closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    densities: Vec<f64>,
}

impl Histogram {
    /// A histogram given directly by densities, e.g. a tabulated model.
    /// Counts are zero and normalization is not enforced.
    pub fn from_densities(bin_edges: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        check_edges(&bin_edges)?;
        if densities.len() + 1 != bin_edges.len() {
            return Err(FitError::Histogram(format!(
                "{} edges need {} densities, got {}",
                bin_edges.len(),
                bin_edges.len() - 1,
                densities.len()
            )));
        }
        if densities.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(FitError::Histogram(
                "densities must be finite and non-negative".into(),
            ));
        }
        let counts = vec![0; densities.len()];
        Ok(Self {
            bin_edges,
            counts,
            densities,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn sample_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn nonzero_bins(&self) -> usize {
        self.densities.iter().filter(|&&d| d > 0.0).count()
    }

    /// `Σ density·width`.
    pub fn total_mass(&self) -> f64 {
        self.densities.iter().zip(self.widths()).map(|(d, w)| d * w).sum()
    }

    /// Mean and standard deviation of the binned distribution, taking each
    /// bin's mass at its center.
    pub fn binned_moments(&self) -> (f64, f64) {
        let mass = self.total_mass();
        let centers = self.centers();
        let widths = self.widths();
        let mean = centers
            .iter()
            .zip(&self.densities)
            .zip(&widths)
            .map(|((c, d), w)| c * d * w)
            .sum::<f64>()
            / mass;
        let var = centers
            .iter()
            .zip(&self.densities)
            .zip(&widths)
            .map(|((c, d), w)| (c - mean).powi(2) * d * w)
            .sum::<f64>()
            / mass;
        (mean, var.sqrt())
    }

    /// Cumulative mass at every edge, starting from `0`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.bin_edges.len());
        out.push(0.0);
        for (d, w) in self.densities.iter().zip(self.widths()) {
            acc += d * w;
            out.push(acc);
        }
        out
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(FitError::Histogram("need at least one bin".into()));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::Histogram(
            "bin edges must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Bin `samples` and normalize to unit mass.
pub fn build_histogram(samples: &[f64], bins: &BinSpec) -> Result<Histogram> {
    if samples.len() < 2 {
        return Err(FitError::Histogram(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(FitError::Histogram("samples must be finite".into()));
    }
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let (origin, width, n_bins) = match *bins {
        BinSpec::Width { width, origin } => {
            if !(width.is_finite() && width > 0.0) {
                return Err(FitError::Histogram(format!(
                    "bin width must be finite and > 0, got {width}"
                )));
            }
            let origin = origin.unwrap_or(min);
            if !origin.is_finite() || origin > min {
                return Err(FitError::Histogram(format!(
                    "origin {origin} lies above the smallest sample {min}"
                )));
            }
            let n = ((max - origin) / width).floor() as usize + 1;
            (origin, width, n)
        }
        BinSpec::Count(n) => {
            if n == 0 {
                return Err(FitError::Histogram("bin count must be >= 1".into()));
            }
            if max <= min {
                return Err(FitError::Histogram(
                    "all samples are equal; bin-count mode needs a spread".into(),
                ));
            }
            (min, (max - min) / n as f64, n)
        }
        BinSpec::FreedmanDiaconis => {
            if max <= min {
                return Err(FitError::Histogram(
                    "all samples are equal; cannot choose a bin width".into(),
                ));
            }
            let mut sorted = samples.to_vec();
            sorted.sort_by(f64::total_cmp);
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let width = 2.0 * iqr * (samples.len() as f64).powf(-1.0 / 3.0);
            let count = |w: f64| ((max - min) / w).floor() as usize + 1;
            if width > 0.0 && count(width) <= MAX_AUTO_BINS {
                (min, width, count(width))
            } else {
                // Sturges' rule when the quartiles coincide or the width
                // would explode the bin count.
                let n = ((samples.len() as f64).log2().ceil() as usize + 1).min(MAX_AUTO_BINS);
                (min, (max - min) / n as f64, n)
            }
        }
    };

    let mut edges: Vec<f64> = (0..=n_bins).map(|j| origin + width * j as f64).collect();
    if matches!(bins, BinSpec::Count(_) | BinSpec::FreedmanDiaconis) {
        // Keep max inside the last bin regardless of rounding.
        let last = edges.len() - 1;
        edges[last] = edges[last].max(max);
    }
    check_edges(&edges)?;

    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let mut j = ((x - origin) / width).floor() as usize;
        if j >= n_bins {
            j = n_bins - 1;
        }
        // floor may land one bin off near an edge
        while j > 0 && x < edges[j] {
            j -= 1;
        }
        while j + 1 < n_bins && x >= edges[j + 1] {
            j += 1;
        }
        counts[j] += 1;
    }
    let n = samples.len() as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
        .collect();
    Ok(Histogram {
        bin_edges: edges,
        counts,
        densities,
    })
}
