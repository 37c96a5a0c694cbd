use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ocnid::bpca::{self, EigenData, LaplaceForm, ScanConfig, ScanTable};
use ocnid::cftp::{draw_batch, Backoff, CftpConfig, DEFAULT_MAX_N};
use ocnid::oracle::oracle_batch;
use ocnid::stats::histogram;
use ocnid::{validate_family, Distribution, Error};

#[derive(Parser)]
#[command(
    name = "ocnid",
    version,
    about = "Perfect sampling of ordered non-identical random variables"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Epsilon-perfect draws by coupling from the past.
    Sample(SampleArgs),
    /// Exact draws by rejection, for validation.
    Oracle(OracleArgs),
    /// Bayesian PCA model scan over the latent dimension.
    Bpca(BpcaArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Component law, smallest first: exp:R, weibull:K:R, cauchy:R, fcauchy:R,
    /// pareto:A, invgamma:A:B. Repeat once per component.
    #[arg(long = "dist", required = true)]
    dists: Vec<Distribution>,
    /// Number of draws.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Histogram bins per component.
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Histogram range LO:HI; defaults to each component's sample extent.
    #[arg(long, value_parser = parse_range)]
    range: Option<(f64, f64)>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Coupling tolerance on the squared distance between bounding chains.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Give up on a draw once the start depth reaches this.
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: u64,
    /// Double the start depth on failure instead of incrementing it.
    #[arg(long)]
    doubling: bool,
    /// Record coupling times only; no values or histograms.
    #[arg(long)]
    bct_only: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BpcaArgs {
    /// Data matrix, one observation per row.
    #[arg(
        long,
        conflicts_with = "simulate",
        required_unless_present = "simulate"
    )]
    data: Option<PathBuf>,
    /// The first row of --data is a header.
    #[arg(long, requires = "data")]
    header: bool,
    /// Built-in simulated dataset: `paper8` is 100 draws of an 8-dimensional Gaussian with variances (10, 8, 6, 4, 2, 0.5, 0.5, 0.5).
    #[arg(long, value_parser = ["paper8"])]
    simulate: Option<String>,
    #[arg(long, default_value_t = bpca::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = bpca::DEFAULT_BETA)]
    beta: f64,
    /// Posterior draws per candidate q.
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Laplace evidence used to choose q: displayed or corrected.
    #[arg(long, default_value = "displayed")]
    laplace: LaplaceForm,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad LO: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad HI: {e}"))?;
    if !(lo < hi) {
        return Err(format!("need LO < HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    NonCoalescence(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::NonCoalescence(_) => 4,
            Failure::Internal(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m)
            | Failure::Data(m)
            | Failure::NonCoalescence(m)
            | Failure::Internal(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Domain(_) | Error::Config { .. } | Error::OracleInfeasible { .. } => {
                Failure::Config(m)
            }
            Error::Data(_) => Failure::Data(m),
            Error::NonCoalescence { .. } => Failure::NonCoalescence(m),
            Error::Contract(_) | Error::Sandwich { .. } | Error::DegenerateEvidence(_) => {
                Failure::Internal(m)
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Sample(a) => cmd_sample(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bpca(a) => cmd_bpca(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn prepare(common: &CommonArgs) -> Outcome<()> {
    validate_family(&common.dists)?;
    if common.n == 0 {
        return Err(Failure::Config("--n must be at least 1".into()));
    }
    if common.bins == 0 {
        return Err(Failure::Config("--bins must be at least 1".into()));
    }
    fs::create_dir_all(&common.out)?;
    Ok(())
}

#[derive(Serialize)]
struct SampleSummary {
    mean_bct: f64,
    min_bct: u64,
    max_bct: u64,
    se_bct: f64,
    n_draws: u64,
    epsilon: f64,
    seed: u64,
    distributions: Vec<String>,
}

fn cmd_sample(a: SampleArgs) -> Outcome<()> {
    let c = &a.common;
    prepare(c)?;
    let mut cfg = CftpConfig::new(a.eps).with_max_n(a.max_n);
    if a.doubling {
        cfg = cfg.with_backoff(Backoff::Doubling);
    }
    let batch = draw_batch(&c.dists, &cfg, c.n, c.seed, !a.bct_only)?;
    let m = c.dists.len();

    let mut w = csv::Writer::from_path(c.out.join("draws.csv"))?;
    if a.bct_only {
        w.write_record(["bct"])?;
        for b in &batch.bcts {
            w.write_record([b.to_string()])?;
        }
    } else {
        let mut header: Vec<String> = (1..=m).map(|i| format!("x_{i}")).collect();
        header.push("bct".into());
        header.push("gap".into());
        w.write_record(&header)?;
        for d in &batch.draws {
            let mut row: Vec<String> = d.values.iter().map(|v| v.to_string()).collect();
            row.push(d.bct.to_string());
            row.push(d.gap.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    if !a.bct_only {
        let values: Vec<Vec<f64>> = batch.draws.iter().map(|d| d.values.clone()).collect();
        write_histograms(&c.out, &values, m, c.bins, c.range)?;
    }

    let s = &batch.summary;
    let summary = SampleSummary {
        mean_bct: s.mean_bct,
        min_bct: s.min_bct,
        max_bct: s.max_bct,
        se_bct: s.se_bct,
        n_draws: s.n_draws,
        epsilon: s.epsilon,
        seed: s.seed,
        distributions: c.dists.iter().map(|d| d.to_string()).collect(),
    };
    write_json(&c.out.join("summary.json"), &summary)
}

#[derive(Serialize)]
struct OracleSummary {
    n_draws: u64,
    proposals: u64,
    acceptance_rate: f64,
    seed: u64,
    distributions: Vec<String>,
}

fn cmd_oracle(a: OracleArgs) -> Outcome<()> {
    let c = &a.common;
    prepare(c)?;
    let batch = oracle_batch(&c.dists, c.n, c.seed)?;
    let m = c.dists.len();
    let mut w = csv::Writer::from_path(c.out.join("draws.csv"))?;
    let header: Vec<String> = (1..=m).map(|i| format!("x_{i}")).collect();
    w.write_record(&header)?;
    for x in &batch.draws {
        w.write_record(x.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    write_histograms(&c.out, &batch.draws, m, c.bins, c.range)?;
    let summary = OracleSummary {
        n_draws: batch.draws.len() as u64,
        proposals: batch.proposals_used,
        acceptance_rate: batch.acceptance_rate,
        seed: c.seed,
        distributions: c.dists.iter().map(|d| d.to_string()).collect(),
    };
    write_json(&c.out.join("summary.json"), &summary)
}

fn write_histograms(
    out: &Path,
    values: &[Vec<f64>],
    m: usize,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Outcome<()> {
    let mut w = csv::Writer::from_path(out.join("histogram.csv"))?;
    w.write_record(["component", "bin_left", "bin_width", "count", "density"])?;
    for i in 0..m {
        let column: Vec<f64> = values.iter().map(|x| x[i]).collect();
        let h = histogram(&column, bins, range)?;
        let dens = h.densities();
        for (b, (&count, d)) in h.counts.iter().zip(&dens).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                h.left_edge(b).to_string(),
                h.width().to_string(),
                count.to_string(),
                d.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Reads a numeric matrix; errors name the offending row and column (1-based).
fn read_matrix(path: &Path, header: bool) -> Outcome<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let line = i + 1 + header as usize;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().map_err(|_| {
                    Failure::Data(format!(
                        "row {line}, column {}: cannot parse {f:?} as a number",
                        j + 1
                    ))
                })
            })
            .collect::<Outcome<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Chosen {
    max_log_likelihood: Option<usize>,
    bic: Option<usize>,
    laplace: Option<usize>,
    laplace_form: LaplaceForm,
}

#[derive(Serialize)]
struct BpcaReport<'a> {
    eigenvalues: &'a EigenData,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    draws_per_q: usize,
    seed: u64,
    chosen: Chosen,
    #[serde(flatten)]
    table: &'a ScanTable,
}

fn cmd_bpca(a: BpcaArgs) -> Outcome<()> {
    let rows = match (&a.data, &a.simulate) {
        (Some(p), _) => read_matrix(p, a.header)?,
        (None, Some(_)) => bpca::simulate_eight_dim(a.seed)?,
        (None, None) => return Err(Failure::Config("give --data or --simulate".into())),
    };
    if a.n == 0 {
        return Err(Failure::Config("--n must be at least 1".into()));
    }
    let eig = bpca::covariance_eigs(&rows)?;
    let config = ScanConfig {
        alpha: a.alpha,
        beta: a.beta,
        cftp: CftpConfig::new(a.eps).with_max_n(a.max_n),
        draws_per_q: a.n,
        seed: a.seed,
    };
    // validate hyperparameters before the expensive part
    bpca::BpcaModel::new(eig.clone(), 1, a.alpha, a.beta)?;
    fs::create_dir_all(&a.out)?;
    let table = bpca::model_scan(&eig, &config)?;

    let mut w = csv::Writer::from_path(a.out.join("scores.csv"))?;
    let d = eig.dim();
    let mut header: Vec<String> = [
        "q",
        "max_log_likelihood",
        "bic",
        "laplace_displayed",
        "laplace_corrected",
        "mean_bct",
        "min_bct",
        "max_bct",
        "map_sigma2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..d).map(|i| format!("map_lambda_{i}")));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in &table.rows {
        let mut row = vec![
            r.q.to_string(),
            r.max_log_likelihood.to_string(),
            r.bic.to_string(),
            opt(r.laplace_displayed),
            opt(r.laplace_corrected),
            r.mean_bct.to_string(),
            r.min_bct.to_string(),
            r.max_bct.to_string(),
            r.map.sigma2.to_string(),
        ];
        row.extend(
            (0..d - 1).map(|i| r.map.lambda.get(i).map_or(String::new(), |v| v.to_string())),
        );
        w.write_record(&row)?;
    }
    w.flush()?;

    let report = BpcaReport {
        eigenvalues: &eig,
        alpha: a.alpha,
        beta: a.beta,
        epsilon: a.eps,
        draws_per_q: a.n,
        seed: a.seed,
        chosen: Chosen {
            max_log_likelihood: table.argmax_log_likelihood(),
            bic: table.argmax_bic(),
            laplace: table.argmax_laplace(a.laplace),
            laplace_form: a.laplace,
        },
        table: &table,
    };
    write_json(&a.out.join("scores.json"), &report)?;
    println!(
        "chosen q: bic={} laplace({})={}",
        fmt_q(report.chosen.bic),
        match a.laplace {
            LaplaceForm::Displayed => "displayed",
            LaplaceForm::Corrected => "corrected",
        },
        fmt_q(report.chosen.laplace)
    );
    Ok(())
}

fn fmt_q(q: Option<usize>) -> String {
    q.map_or("none".into(), |q| q.to_string())
}
