use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dichospec::bundles::{bundle_fibers, whitney_sum_check, SpectralBundleFiber, WhitneyReport};
use dichospec::dichotomy::{estimate_spectrum_with, gap_certificates, DichotomyAnalyzer};
use dichospec::report::{fmt_f64, to_json};
use dichospec::scenario::{Format, Scenario};
use dichospec::triangular::{diagonal_significance, qr_triangularize, SignificanceReport};
use dichospec::{bohl_exponents, periodic_spectrum_oracle, test_dichotomy, verify_system, MatrixSequence};

#[derive(Parser)]
#[command(name = "dichospec", version, about = "Dichotomy spectra of linear difference systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the dichotomy spectrum: intervals, gap ranks, γ verdicts.
    Spectrum(Common),
    /// Bohl exponents of the solution through ξ.
    Bohl {
        #[command(flatten)]
        common: Common,
        /// Initial value ξ, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        xi: Vec<f64>,
    },
    /// Dichotomy test of the γ-scaled system.
    Dichotomy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gamma: f64,
    },
    /// Spectral bundle fibers at n = 0 and the Whitney-sum check.
    Bundles(Common),
    /// QR triangularization and diagonal significance.
    Triangularize(Common),
    /// Theorem containment reports; exit code 1 on failure.
    Verify(Common),
    /// Floquet points of a periodic system.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Period to use; defaults to the sequence's own period.
        #[arg(long)]
        period: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Table,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, or JSON by extension).
    scenario: PathBuf,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    refine_tol: Option<f64>,
    #[arg(long)]
    tail_fraction: Option<f64>,
    #[arg(long)]
    two_sided: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    escalate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for the internal parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<(Scenario, MatrixSequence), Failure> {
        let mut s = Scenario::load(&self.scenario)
            .with_context(|| format!("loading {}", self.scenario.display()))
            .map_err(Failure::usage)?;
        let a = &mut s.analysis;
        if let Some(w) = self.window {
            a.window = w;
        }
        if let Some(g) = self.grid_points {
            a.grid_points = g;
        }
        if let Some(t) = self.refine_tol {
            a.refine_tol = t;
        }
        if let Some(t) = self.tail_fraction {
            a.tail_fraction = t;
        }
        if let Some(seed) = self.seed {
            a.seed = seed;
        }
        a.two_sided |= self.two_sided;
        a.escalate |= self.escalate;
        if let Some(out) = &self.out {
            s.output.dir = out.clone();
        }
        if let Some(f) = self.format {
            s.output.format = match f {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
                FormatArg::Table => Format::Table,
            };
        }
        s.analysis.check().map_err(Failure::usage)?;
        let seq = s.sequence().map_err(Failure::validation)?;
        let n = s.analysis.window as i64;
        let report = seq.validate((-n, n)).map_err(Failure::validation)?;
        for w in &report.warnings {
            log::warn!("{w}");
        }
        Ok((s, seq))
    }
}

/// Error with its exit code: 2 usage, 3 validation.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: 2, error: e.into() }
    }

    fn validation(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: 3, error: e.into() }
    }
}

impl From<dichospec::Error> for Failure {
    fn from(e: dichospec::Error) -> Self {
        match e {
            dichospec::Error::Parse(_) | dichospec::Error::InvalidParams(_) => Failure::usage(e),
            _ => Failure::validation(e),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 2, error }
    }
}

/// Writes artifacts into the output directory and echoes the requested
/// format on stdout.
struct Emitter {
    dir: PathBuf,
    format: Format,
}

impl Emitter {
    fn write(&self, name: &str, text: &str) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    /// `json` is the report; `csv` an optional companion table; `table` the
    /// human summary.
    fn emit<T: Serialize>(&self, stem: &str, report: &T, csv: Option<(&str, String)>, table: String) -> Result<(), Failure> {
        let json = to_json(report)?;
        self.write(&format!("{stem}.json"), &json)?;
        if let Some((name, text)) = &csv {
            self.write(name, text)?;
        }
        match self.format {
            Format::Json => print!("{json}"),
            Format::Csv => print!("{}", csv.map(|c| c.1).unwrap_or(json)),
            Format::Table => print!("{table}"),
        }
        Ok(())
    }
}

fn interval_table(intervals: &[(f64, f64)], ranks: &[usize]) -> String {
    let mut out = String::from("interval  lower                    upper\n");
    for (i, (a, b)) in intervals.iter().enumerate() {
        out.push_str(&format!("{:<9} {:<24} {}\n", i + 1, fmt_f64(*a), fmt_f64(*b)));
    }
    out.push_str(&format!("gap ranks {ranks:?}\n"));
    out
}

#[derive(Serialize)]
struct BundlesReport {
    gap_gammas: Vec<f64>,
    gap_ranks: Vec<usize>,
    fibers: Vec<SpectralBundleFiber>,
    whitney: WhitneyReport,
}

#[derive(Serialize)]
struct TriangularReport {
    window: (i64, i64),
    similarity_residual: f64,
    orthogonality_defect: f64,
    significance: SignificanceReport,
}

#[derive(Serialize)]
struct OracleReport {
    period: usize,
    points: Vec<f64>,
}

fn run(command: Command) -> Result<u8, Failure> {
    let common = match &command {
        Command::Spectrum(c) | Command::Bundles(c) | Command::Triangularize(c) | Command::Verify(c) => c,
        Command::Bohl { common, .. } | Command::Dichotomy { common, .. } | Command::Oracle { common, .. } => common,
    };
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(Failure::usage)?;
    }
    let (scenario, seq) = common.load()?;
    let a = scenario.analysis;
    let out = Emitter {
        dir: scenario.output.dir.clone(),
        format: scenario.output.format,
    };
    match command {
        Command::Spectrum(_) => {
            let analyzer = DichotomyAnalyzer::new(&seq, &a.dichotomy())?;
            let spec = estimate_spectrum_with(&analyzer, &a.spectrum())?;
            let ivs: Vec<_> = spec.intervals.iter().map(|i| (i.lower, i.upper)).collect();
            let table = interval_table(&ivs, &spec.gap_ranks);
            out.emit("spectrum", &spec, Some(("spectrum_grid.csv", spec.grid_csv())), table)?;
        }
        Command::Bohl { xi, .. } => {
            let est = bohl_exponents(&seq, &xi, &a.bohl())?;
            let table = format!("lower {}\nupper {}\n", fmt_f64(est.lower), fmt_f64(est.upper));
            out.emit("bohl", &est, Some(("bohl_envelopes.csv", est.envelopes_csv())), table)?;
        }
        Command::Dichotomy { gamma, .. } => {
            let verdict = test_dichotomy(&seq, gamma, &a.dichotomy())?;
            let table = match verdict.certificate() {
                Some(c) => format!(
                    "gamma {} certificate rank {} K {} rho {}\n",
                    fmt_f64(gamma),
                    c.rank,
                    fmt_f64(c.k),
                    fmt_f64(c.rho)
                ),
                None => format!("gamma {} in spectrum\n", fmt_f64(gamma)),
            };
            out.emit("dichotomy", &verdict, None, table)?;
        }
        Command::Bundles(_) => {
            let analyzer = DichotomyAnalyzer::new(&seq, &a.dichotomy())?;
            let spec = estimate_spectrum_with(&analyzer, &a.spectrum())?;
            let certs = gap_certificates(&analyzer, &spec);
            let fibers = bundle_fibers(&spec, &certs)?;
            let whitney = whitney_sum_check(&fibers);
            let mut table = String::new();
            for f in &fibers {
                table.push_str(&format!("fiber {} dimension {}\n", f.index, f.dimension));
            }
            table.push_str(&format!(
                "whitney {} (smallest singular value {})\n",
                if whitney.pass { "pass" } else { "fail" },
                fmt_f64(whitney.smallest_singular_value)
            ));
            let report = BundlesReport {
                gap_gammas: spec.gap_gammas.clone(),
                gap_ranks: spec.gap_ranks.clone(),
                fibers,
                whitney,
            };
            out.emit("bundles", &report, None, table)?;
        }
        Command::Triangularize(_) => {
            let n = a.window as i64;
            let pair = qr_triangularize(&seq, (-n, n - 1))?;
            let significance = diagonal_significance(&pair.u, &a.significance())?;
            let report = TriangularReport {
                window: pair.window(),
                similarity_residual: pair.similarity_residual(&seq)?,
                orthogonality_defect: pair.orthogonality_defect(),
                significance,
            };
            let table = format!(
                "residual {}\northogonality {}\nsignificant {}\n",
                fmt_f64(report.similarity_residual),
                fmt_f64(report.orthogonality_defect),
                report.significance.significant
            );
            out.emit("triangularize", &report, Some(("u_diagonal.csv", pair.diagonal_csv()?)), table)?;
        }
        Command::Verify(_) => {
            let report = verify_system(&scenario.name, &seq, &a.verify())?;
            let passed = report.passed();
            let table = format!(
                "theorem 1 pass rate {}\ntheorem 2 pass rate {}\nwhitney {}\nattainability {:?}\n{}\n",
                fmt_f64(report.theorem1.pass_rate),
                fmt_f64(report.theorem2.pass_rate),
                report.whitney.pass,
                report.attainability.status,
                if passed { "PASS" } else { "FAIL" }
            );
            out.emit("verify", &report, None, table)?;
            if !passed {
                return Ok(1);
            }
        }
        Command::Oracle { period, .. } => {
            let period = period
                .or_else(|| seq.period())
                .ok_or_else(|| Failure::usage(anyhow::anyhow!("sequence is not periodic; pass --period")))?;
            let points = periodic_spectrum_oracle(&seq, period)?;
            let table = points.iter().map(|p| format!("{}\n", fmt_f64(*p))).collect();
            out.emit("oracle", &OracleReport { period, points }, None, table)?;
        }
    }
    Ok(0)
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}
