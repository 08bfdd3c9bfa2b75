use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use bft_blocktime::distributions::{
    analytic_broadcast_mean_through, analytic_broadcast_variance_through, moments_approx, ConvolutionOrder,
    GumbelParams, MomentSummary,
};
use bft_blocktime::fitting::{
    build_histogram, derive_transfer_time, fit_fk, model_cdf_table, moment_initial_guess, quorum_adjust,
    sample_skewness, AmplitudeMode, BinSpec, FitError, FitOptions, FitResult, Histogram, LossWeighting,
};
use bft_blocktime::ingest::{
    compute_intervals, fetch_blocks, read_interval_seconds, write_csv, write_drop_log, write_intervals,
    FetchOptions, IngestError, TlsOptions,
};
use bft_blocktime::kv::KeyValues;
use bft_blocktime::simulator::{run_monte_carlo, QuorumMode, SimConfig};
use clap::{Args, Parser, ValueEnum};

use crate::manifest::{sha256_file, RunManifest};
use crate::svg::{self, Curve};
use crate::{io_err, sidecar, Cli, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuorumArg {
    /// Broadcast until every validator holds the block.
    Full,
    /// Stop at the ⌈2(N−1)/3⌉ quorum.
    TwoThirds,
}

impl fmt::Display for QuorumArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::TwoThirds => "two-thirds",
        })
    }
}

/// `auto` (Freedman–Diaconis), a bin width in seconds, or `count:N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinsArg {
    Auto,
    Width(f64),
    Count(usize),
}

impl BinsArg {
    fn spec(self) -> BinSpec {
        match self {
            Self::Auto => BinSpec::FreedmanDiaconis,
            Self::Width(width) => BinSpec::Width { width, origin: None },
            Self::Count(n) => BinSpec::Count(n),
        }
    }
}

impl fmt::Display for BinsArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Width(w) => write!(f, "{w}"),
            Self::Count(n) => write!(f, "count:{n}"),
        }
    }
}

fn parse_bins(s: &str) -> std::result::Result<BinsArg, String> {
    if s == "auto" {
        return Ok(BinsArg::Auto);
    }
    if let Some(n) = s.strip_prefix("count:") {
        return match n.parse::<usize>() {
            Ok(n) if n > 0 => Ok(BinsArg::Count(n)),
            _ => Err(format!("bad bin count {n:?}")),
        };
    }
    match s.parse::<f64>() {
        Ok(w) if w.is_finite() && w > 0.0 => Ok(BinsArg::Width(w)),
        _ => Err(format!("expected auto, a positive width or count:N, got {s:?}")),
    }
}

fn parse_amplitude(s: &str) -> std::result::Result<AmplitudeMode, String> {
    s.parse().map_err(|e: FitError| e.to_string())
}

fn parse_weighting(s: &str) -> std::result::Result<LossWeighting, String> {
    s.parse().map_err(|e: FitError| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Number of validators N.
    #[arg(long)]
    pub validators: u32,
    /// Time of one transfer step, seconds.
    #[arg(long = "delta-t")]
    pub delta_t: f64,
    /// Broadcast phases per block.
    #[arg(long, default_value_t = 3)]
    pub phases: u32,
    #[arg(long, value_enum, default_value_t = QuorumArg::Full)]
    pub quorum: QuorumArg,
    /// Number of simulated blocks.
    #[arg(long)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constant block-creation time added to every block, seconds.
    #[arg(long = "create-offset", default_value_t = 0.0)]
    pub create_offset: f64,
    /// Sample CSV; the summary goes to `<out>.summary`.
    #[arg(long)]
    pub out: PathBuf,
    /// Key-value file supplying flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl SimulateArgs {
    fn snapshot(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("validators", self.validators);
        kv.set("delta-t", self.delta_t);
        kv.set("phases", self.phases);
        kv.set("quorum", self.quorum);
        kv.set("runs", self.runs);
        kv.set("seed", self.seed);
        kv.set("create-offset", self.create_offset);
        kv.set("out", self.out.display());
        kv
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with an `interval_seconds` column.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of convolved phases.
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Validator count for the transfer-time estimate; omitted when absent.
    #[arg(long)]
    pub validators: Option<u32>,
    /// `auto`, a width in seconds, or `count:N`.
    #[arg(long, default_value = "auto", value_parser = parse_bins)]
    pub bins: BinsArg,
    /// Mode used for the transfer estimate and the curve table: raw, free or renorm.
    #[arg(long, default_value = "free", value_parser = parse_amplitude)]
    pub amplitude: AmplitudeMode,
    /// unweighted or poisson.
    #[arg(long, default_value = "unweighted", value_parser = parse_weighting)]
    pub weighting: LossWeighting,
    #[arg(long = "max-iterations", default_value_t = 200)]
    pub max_iterations: usize,
    /// Starting location; defaults to the moment estimate.
    #[arg(long, requires = "eta0")]
    pub mu0: Option<f64>,
    /// Starting scale; defaults to the moment estimate.
    #[arg(long, requires = "mu0")]
    pub eta0: Option<f64>,
    /// Report file; the curve table goes to `<out>.table.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl FitArgs {
    fn snapshot(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("input", self.input.display());
        kv.set("k", self.k);
        if let Some(n) = self.validators {
            kv.set("validators", n);
        }
        kv.set("bins", self.bins);
        kv.set("amplitude", self.amplitude);
        kv.set("weighting", self.weighting);
        kv.set("max-iterations", self.max_iterations);
        if let (Some(m), Some(e)) = (self.mu0, self.eta0) {
            kv.set("mu0", m);
            kv.set("eta0", e);
        }
        kv.set("out", self.out.display());
        kv
    }
}

#[derive(Debug, Clone, Args)]
pub struct FetchArgs {
    /// Tendermint RPC base URL.
    #[arg(long)]
    pub endpoint: String,
    #[arg(long)]
    pub from: u64,
    #[arg(long)]
    pub to: u64,
    /// Requests per second.
    #[arg(long, default_value_t = 5.0)]
    pub rate: f64,
    /// Intervals CSV; dropped pairs go to `<out>.drops.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fetched (height, time) records here.
    #[arg(long = "blocks-out")]
    pub blocks_out: Option<PathBuf>,
    /// Retries per height after the first attempt.
    #[arg(long, default_value_t = 4)]
    pub retries: u32,
    #[arg(long = "timeout-secs", default_value_t = 30.0)]
    pub timeout_secs: f64,
    /// Requests allowed in flight at once.
    #[arg(long = "in-flight", default_value_t = 4)]
    pub in_flight: usize,
    /// Name of an environment variable holding a bearer token.
    #[arg(long = "token-env", value_name = "VAR")]
    pub token_env: Option<String>,
    /// PEM file with extra root certificates.
    #[arg(long = "ca-bundle")]
    pub ca_bundle: Option<PathBuf>,
    /// Skip TLS certificate verification.
    #[arg(long)]
    pub insecure: bool,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl FetchArgs {
    fn snapshot(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("endpoint", &self.endpoint);
        kv.set("from", self.from);
        kv.set("to", self.to);
        kv.set("rate", self.rate);
        kv.set("out", self.out.display());
        if let Some(p) = &self.blocks_out {
            kv.set("blocks-out", p.display());
        }
        kv.set("retries", self.retries);
        kv.set("timeout-secs", self.timeout_secs);
        kv.set("in-flight", self.in_flight);
        if let Some(v) = &self.token_env {
            kv.set("token-env", v);
        }
        if let Some(p) = &self.ca_bundle {
            kv.set("ca-bundle", p.display());
        }
        kv.set("insecure", self.insecure);
        kv
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Intervals CSV to bin.
    #[arg(long)]
    pub hist: PathBuf,
    /// Curve table with `t` and `model_density` columns.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value = "auto", value_parser = parse_bins)]
    pub bins: BinsArg,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

impl PlotArgs {
    fn snapshot(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("hist", self.hist.display());
        if let Some(p) = &self.curve {
            kv.set("curve", p.display());
        }
        kv.set("bins", self.bins);
        if let Some(t) = &self.title {
            kv.set("title", t);
        }
        kv.set("out", self.out.display());
        kv
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write the main output here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail unless every output matches its recorded digest.
    #[arg(long)]
    pub verify: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_interval_seconds(file).map_err(|e| io_err(path, e))
}

fn summary_kv(prefix: &str, s: &MomentSummary, count: usize, kv: &mut KeyValues) {
    kv.set(format!("{prefix}.count"), count);
    kv.set(format!("{prefix}.mean"), s.mean);
    kv.set(format!("{prefix}.std_dev"), s.std_dev);
    kv.set(format!("{prefix}.variance"), s.variance);
    kv.set(format!("{prefix}.skewness"), s.skewness);
}

pub(crate) fn simulate(a: &SimulateArgs, line: &str, _stderr: &mut dyn Write) -> Result<()> {
    if a.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let quorum = match a.quorum {
        QuorumArg::Full => QuorumMode::FullBroadcast,
        QuorumArg::TwoThirds => QuorumMode::TwoThirds,
    };
    let cfg = SimConfig::new(a.validators, a.delta_t)
        .with_phases(a.phases)
        .with_quorum(quorum)
        .with_seed(a.seed)
        .with_create_offset(a.create_offset);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let result = run_monte_carlo(&cfg, a.runs).map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut w = create(&a.out)?;
    let mut body = String::from("interval_seconds\n");
    for x in &result.samples {
        body.push_str(&x.to_string());
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(|e| io_err(&a.out, e))?;
    finish(w, &a.out)?;

    let last = cfg.last_state();
    let phases = f64::from(a.phases);
    let numerical = |e: bft_blocktime::distributions::DistError| CliError::Numerical(e.to_string());
    let mean = phases * analytic_broadcast_mean_through(a.validators, last, a.delta_t).map_err(numerical)?
        + a.create_offset;
    let variance =
        phases * analytic_broadcast_variance_through(a.validators, last, a.delta_t).map_err(numerical)?;
    let mut kv = KeyValues::new();
    summary_kv("samples", &result.summary, result.samples.len(), &mut kv);
    kv.set("analytic.mean", mean);
    kv.set("analytic.variance", variance);
    kv.set("analytic.std_dev", variance.sqrt());
    kv.set("quorum_last_state", last);
    let summary_path = sidecar(&a.out, ".summary");
    write_text(&summary_path, &kv.to_string())?;

    let mut m = RunManifest::new("simulate", line, Some(a.seed), a.snapshot());
    m.output("samples", &a.out)?;
    m.output("summary", &summary_path)?;
    m.write(&sidecar(&a.out, ".manifest"))
}

type ModeFits = Vec<(AmplitudeMode, Result<FitResult, FitError>)>;

/// Fits in every amplitude mode; the selected one must succeed.
fn fit_all_modes(
    hist: &Histogram,
    k: ConvolutionOrder,
    init: &GumbelParams,
    a: &FitArgs,
) -> Result<(ModeFits, FitResult)> {
    let base = FitOptions {
        max_iterations: a.max_iterations,
        ..FitOptions::default()
    }
    .with_weighting(a.weighting);
    let fits: Vec<_> = AmplitudeMode::ALL
        .iter()
        .map(|&mode| (mode, fit_fk(hist, k, init, &base.with_amplitude(mode))))
        .collect();
    let selected = match &fits
        .iter()
        .find(|(m, _)| *m == a.amplitude)
        .expect("all modes present")
        .1
    {
        Ok(f) => f.clone(),
        Err(FitError::Domain(msg)) => return Err(CliError::Usage(msg.clone())),
        Err(e) => {
            return Err(CliError::Numerical(format!(
                "{} fit of {} failed: {e}",
                a.amplitude,
                a.input.display()
            )))
        }
    };
    Ok((fits, selected))
}

/// Range over which the fitted curve carries essentially all its mass.
fn model_support(fit: &FitResult, samples_min: f64, samples_max: f64) -> (f64, f64) {
    let k = f64::from(fit.k.get());
    let centre = k * fit.mu_hat;
    let lo = samples_min.min(centre - 8.0 * k * fit.eta_hat);
    let hi = samples_max.max(centre + 45.0 * k * fit.eta_hat);
    let lo = if fit.k.get() >= 2 { lo.max(0.0) } else { lo };
    (lo, hi)
}

pub(crate) fn fit(a: &FitArgs, line: &str, stderr: &mut dyn Write) -> Result<()> {
    let k = ConvolutionOrder::new(a.k).map_err(|e| CliError::Usage(format!("--k: {e}")))?;
    if a.validators.is_some_and(|n| n < 2) {
        return Err(CliError::Usage("--validators must be at least 2".into()));
    }
    if a.max_iterations == 0 {
        return Err(CliError::Usage("--max-iterations must be at least 1".into()));
    }
    let samples = read_samples(&a.input)?;
    let hist = build_histogram(&samples, &a.bins.spec())
        .map_err(|e| CliError::Numerical(format!("cannot bin {}: {e}", a.input.display())))?;
    let init = match (a.mu0, a.eta0) {
        (Some(m), Some(e)) => {
            GumbelParams::new(m, e).map_err(|e| CliError::Usage(format!("--mu0/--eta0: {e}")))?
        }
        _ => moment_initial_guess(&hist, k).map_err(|e| CliError::Numerical(e.to_string()))?,
    };
    let (fits, selected) = fit_all_modes(&hist, k, &init, a)?;
    if !selected.converged {
        let _ = writeln!(
            stderr,
            "warning: {} fit stopped after {} iterations without converging",
            selected.amplitude_mode, selected.iterations
        );
    }

    let mut report = KeyValues::new();
    let stats = MomentSummary::from_samples(&samples).map_err(|e| CliError::Numerical(e.to_string()))?;
    summary_kv("sample", &stats, samples.len(), &mut report);
    report.set("histogram.bins", hist.len());
    report.set("histogram.nonzero_bins", hist.nonzero_bins());
    report.set("histogram.first_edge", hist.bin_edges()[0]);
    report.set("histogram.bin_width", hist.widths()[0]);
    report.set("selected_mode", selected.amplitude_mode);
    report.set("initial.mu", init.location());
    report.set("initial.eta", init.scale());
    for (mode, r) in &fits {
        match r {
            Ok(f) => report.extend_prefixed(&format!("fit.{mode}"), &f.to_kv()),
            Err(e) => report.set(format!("fit.{mode}.error"), e),
        }
    }

    if let Some(n) = a.validators {
        let numerical = |e: FitError| CliError::Numerical(format!("transfer estimate: {e}"));
        let plain = derive_transfer_time(selected.mu_hat, selected.eta_hat, n).map_err(numerical)?;
        let quorum = quorum_adjust(&plain).map_err(numerical)?;
        report.extend_prefixed("transfer.plain", &plain.to_kv());
        report.extend_prefixed("transfer.quorum", &quorum.to_kv());
    }

    let (smin, smax) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let (lo, hi) = model_support(&selected, smin, smax);
    let cdf = model_cdf_table(&selected, lo, hi, 20_001).map_err(|e| CliError::Numerical(e.to_string()))?;
    let ks = bft_blocktime::fitting::ks_statistic(&samples, cdf)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let skew = sample_skewness(&samples).map_err(|e| CliError::Numerical(e.to_string()))?;
    let params = selected
        .params()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    report.set("gof.ks_statistic", ks);
    report.set("gof.sample_skewness", skew);
    report.set("gof.model_skewness", moments_approx(k, &params).skewness);

    let mut table = String::from("t,data_density,model_density\n");
    for (t, d) in hist.centers().iter().zip(hist.densities()) {
        let m = selected
            .model_density(*t)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        table.push_str(&format!("{t},{d},{m}\n"));
    }
    let table_path = sidecar(&a.out, ".table.csv");
    write_text(&a.out, &report.to_string())?;
    write_text(&table_path, &table)?;

    let mut m = RunManifest::new("fit", line, None, a.snapshot());
    m.input("intervals", &a.input)?;
    m.output("report", &a.out)?;
    m.output("table", &table_path)?;
    m.write(&sidecar(&a.out, ".manifest"))
}

pub(crate) fn fetch(a: &FetchArgs, line: &str, stderr: &mut dyn Write) -> Result<()> {
    if a.from == 0 || a.from >= a.to {
        return Err(CliError::Usage(format!(
            "need 1 <= --from < --to to get any interval, got {}..{}",
            a.from, a.to
        )));
    }
    if !(a.rate.is_finite() && a.rate > 0.0) {
        return Err(CliError::Usage("--rate must be positive".into()));
    }
    if !(a.timeout_secs.is_finite() && a.timeout_secs > 0.0) {
        return Err(CliError::Usage("--timeout-secs must be positive".into()));
    }
    if a.in_flight == 0 {
        return Err(CliError::Usage("--in-flight must be at least 1".into()));
    }
    let bearer_token =
        match &a.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                CliError::Usage(format!("--token-env: environment variable {var} is not set"))
            })?),
            None => None,
        };
    let ca_bundle_pem = match &a.ca_bundle {
        Some(p) => Some(std::fs::read(p).map_err(|e| io_err(p, e))?),
        None => None,
    };
    let opts = FetchOptions {
        max_retries: a.retries,
        timeout: Duration::from_secs_f64(a.timeout_secs),
        bearer_token,
        in_flight: a.in_flight,
        tls: TlsOptions {
            ca_bundle_pem,
            insecure: a.insecure,
        },
        ..FetchOptions::default()
    };
    let records = fetch_blocks(&a.endpoint, a.from..=a.to, a.rate, &opts).map_err(|e| match e {
        IngestError::Transport { .. } => CliError::Transport(e.to_string()),
        IngestError::Domain(m) => CliError::Usage(m),
        other => CliError::Transport(format!("{}: {other}", a.endpoint)),
    })?;
    let series = compute_intervals(&records).map_err(|e| CliError::Numerical(e.to_string()))?;
    for d in &series.drop_log {
        let _ = writeln!(
            stderr,
            "dropped interval {} -> {}: {}",
            d.height_from,
            d.height_to,
            d.reason.as_str()
        );
    }

    let w = create(&a.out)?;
    write_intervals(&series, w).map_err(|e| io_err(&a.out, e))?;
    let drops = sidecar(&a.out, ".drops.csv");
    write_drop_log(&series.drop_log, create(&drops)?).map_err(|e| io_err(&drops, e))?;
    let mut m = RunManifest::new("fetch", line, None, a.snapshot());
    if let Some(p) = &a.blocks_out {
        write_csv(&records, create(p)?).map_err(|e| io_err(p, e))?;
        m.output("blocks", p)?;
    }
    m.output("intervals", &a.out)?;
    m.output("drops", &drops)?;
    m.write(&sidecar(&a.out, ".manifest"))
}

fn read_curve(path: &Path) -> Result<Curve> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(header) = lines.next() else {
        return Ok(Curve { t: vec![], y: vec![] });
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(ti), Some(yi)) = (find("t"), find("model_density")) else {
        return Err(CliError::Usage(format!(
            "{}: curve table needs `t` and `model_density` columns",
            path.display()
        )));
    };
    let mut curve = Curve { t: vec![], y: vec![] };
    for (n, l) in lines.enumerate() {
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        let value = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| io_err(path, format!("row {}: bad number", n + 2)))
        };
        curve.t.push(value(ti)?);
        curve.y.push(value(yi)?);
    }
    if curve.t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(io_err(path, "t column is not strictly increasing"));
    }
    Ok(curve)
}

pub(crate) fn plot(a: &PlotArgs, line: &str, stderr: &mut dyn Write) -> Result<()> {
    let samples = read_samples(&a.hist)?;
    let hist = build_histogram(&samples, &a.bins.spec())
        .map_err(|e| CliError::Numerical(format!("cannot bin {}: {e}", a.hist.display())))?;
    let curves = match &a.curve {
        Some(p) => vec![read_curve(p)?],
        None => vec![],
    };
    if curves.iter().any(|c| c.t.is_empty()) {
        let _ = writeln!(stderr, "note: curve file is empty; drawing the histogram only");
    }
    let plot = svg::render(&hist, &curves, a.title.as_deref());
    for w in &plot.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    write_text(&a.out, &plot.svg)?;
    let mut m = RunManifest::new("plot", line, None, a.snapshot());
    m.input("hist", &a.hist)?;
    if let Some(p) = &a.curve {
        m.input("curve", p)?;
    }
    m.output("svg", &a.out)?;
    m.write(&sidecar(&a.out, ".manifest"))
}

pub(crate) fn replay(a: &ReplayArgs, stderr: &mut dyn Write) -> Result<()> {
    let recorded = RunManifest::read(&a.manifest)?;
    if recorded.command == "replay"
        || !["simulate", "fit", "fetch", "plot"].contains(&recorded.command.as_str())
    {
        return Err(CliError::Usage(format!(
            "cannot replay command {:?}",
            recorded.command
        )));
    }
    if recorded.tool_version != env!("CARGO_PKG_VERSION") {
        let _ = writeln!(
            stderr,
            "warning: manifest was written by version {}, this is {}",
            recorded.tool_version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for input in &recorded.inputs {
        let now = sha256_file(&input.path)?;
        if now != input.sha256 {
            let msg = format!(
                "input {} ({}) changed since the recorded run",
                input.name,
                input.path.display()
            );
            if a.verify {
                return Err(CliError::Numerical(msg));
            }
            let _ = writeln!(stderr, "warning: {msg}");
        }
    }

    let mut argv: Vec<OsString> = vec!["blocktime".into(), recorded.command.clone().into()];
    argv.extend(crate::config::flags_from_kv(&recorded.command, &recorded.config)?);
    if let Some(out) = &a.out {
        argv.push("--out".into());
        argv.push(out.into());
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(format!("manifest config: {e}")))?;
    let out = match &cli.command {
        crate::Command::Simulate(c) => c.out.clone(),
        crate::Command::Fit(c) => c.out.clone(),
        crate::Command::Fetch(c) => c.out.clone(),
        crate::Command::Plot(c) => c.out.clone(),
        crate::Command::Replay(_) => unreachable!("rejected above"),
    };
    crate::execute(cli.command, &argv, stderr)?;

    if a.verify {
        let fresh = RunManifest::read(&sidecar(&out, ".manifest"))?;
        for old in &recorded.outputs {
            let new = fresh.outputs.iter().find(|f| f.name == old.name);
            if new.map(|f| &f.sha256) != Some(&old.sha256) {
                return Err(CliError::Numerical(format!(
                    "output {} differs from the recorded run",
                    old.name
                )));
            }
        }
        let _ = writeln!(stderr, "verified {} output(s)", recorded.outputs.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_round_trip() {
        for s in ["auto", "0.25", "count:40"] {
            assert_eq!(parse_bins(s).unwrap().to_string(), s);
        }
        assert!(parse_bins("count:0").is_err());
        assert!(parse_bins("-1").is_err());
        assert!(parse_bins("wide").is_err());
    }

    #[test]
    fn curve_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "t,data_density,model_density\n1,0.5,0.4\n2,0.25,0.3\n").unwrap();
        let c = read_curve(&p).unwrap();
        assert_eq!(c.t, vec![1.0, 2.0]);
        assert_eq!(c.y, vec![0.4, 0.3]);
        std::fs::write(&p, "").unwrap();
        assert!(read_curve(&p).unwrap().t.is_empty());
        std::fs::write(&p, "x,y\n1,2\n").unwrap();
        assert!(matches!(read_curve(&p), Err(CliError::Usage(_))));
    }
}
