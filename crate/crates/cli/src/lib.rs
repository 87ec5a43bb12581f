//! Config-driven front end: `resamplab <subcommand> <config.toml>`.

pub mod config;
pub mod output;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use resamplab::analysis::{decompose, PairedPerformanceSample};
use resamplab::combinatorics::{verify_identities, VerifyOptions};
use resamplab::simlab::{run_ratio_curve, run_weak_correlation, write_ratio_csv, RatioCurveConfig, WeakCorrConfig};
use resamplab::{EstimatorReport, EstimatorSpec, StratifiedDataset};

use config::Loaded;
use output::Outputs;

pub const EXIT_OK: u8 = 0;
/// Bad config, unreadable input, or an unwritable output.
pub const EXIT_INPUT: u8 = 2;
/// Failure while estimating or simulating, or a failed identity check.
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<resamplab::Error> for CliError {
    fn from(e: resamplab::Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_RUNTIME };
        CliError { code, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "resamplab", version, about = "Cross-validation and bootstrap estimators of error rate and AUC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one estimator on a dataset CSV ([estimate], [estimator], [trainer]).
    Estimate { config: PathBuf },
    /// Check the exact out-of-bag identities for 2 <= n <= n_max ([verify]).
    Verify { config: PathBuf },
    /// Weak-correlation campaign on multinormal data ([simulate]).
    Simulate { config: PathBuf },
    /// Ratio of the two leave-one-out bootstrap variants vs sample size ([ratio_curve]).
    RatioCurve { config: PathBuf },
    /// MSE decomposition of paired (s, s_hat) values ([decompose]).
    Decompose { config: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Estimate { .. } => "estimate",
            Command::Verify { .. } => "verify",
            Command::Simulate { .. } => "simulate",
            Command::RatioCurve { .. } => "ratio-curve",
            Command::Decompose { .. } => "decompose",
        }
    }

    fn config(&self) -> &Path {
        match self {
            Command::Estimate { config }
            | Command::Verify { config }
            | Command::Simulate { config }
            | Command::RatioCurve { config }
            | Command::Decompose { config } => config,
        }
    }
}

/// Runs a parsed command, writing human-readable results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = Loaded::read(cli.command.config())?;
    if let Some(t) = loaded.config.threads {
        if t == 0 {
            return Err(CliError::input("config: `threads` must be >= 1"));
        }
        // Ignored if a pool already exists (e.g. repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut files = Outputs::new(loaded.output_dir(), cli.command.name(), &loaded.config);
    let passed = match cli.command {
        Command::Estimate { .. } => estimate(&loaded, &mut files, out)?,
        Command::Verify { .. } => verify(&loaded, &mut files, out)?,
        Command::Simulate { .. } => simulate(&loaded, &mut files, out)?,
        Command::RatioCurve { .. } => ratio_curve(&loaded, &mut files, out)?,
        Command::Decompose { .. } => decompose_cmd(&loaded, &mut files, out)?,
    };
    files.finish()?;
    if passed {
        Ok(())
    } else {
        Err(CliError::runtime("identity verification failed"))
    }
}

fn emit(out: &mut dyn Write, text: impl fmt::Display) -> Result<(), CliError> {
    writeln!(out, "{text}").map_err(|e| CliError::input(format!("cannot write to stdout: {e}")))
}

fn read_input(loaded: &Loaded, files: &mut Outputs, p: &Path) -> Result<Vec<u8>, CliError> {
    let path = loaded.resolve(p);
    let bytes = std::fs::read(&path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    files.input(p, &bytes);
    Ok(bytes)
}

fn estimator_spec(loaded: &Loaded) -> Result<&EstimatorSpec, CliError> {
    loaded.config.section(&loaded.config.estimator, "estimator")
}

fn estimate(loaded: &Loaded, files: &mut Outputs, out: &mut dyn Write) -> Result<bool, CliError> {
    let cfg = &loaded.config;
    let section = cfg.section(&cfg.estimate, "estimate")?;
    let spec = estimator_spec(loaded)?;
    spec.validate()?;
    let seed = if spec.is_randomized() { Some(cfg.seed()?) } else { cfg.seed };
    let bytes = read_input(loaded, files, &section.data)?;
    let data = StratifiedDataset::read_csv(bytes.as_slice())?;
    let report = spec.run(&data, &cfg.trainer, seed)?;
    files.add_json("report.json", &report);
    let csv = format!("{}\n{}\n", EstimatorReport::CSV_HEADER, report.to_csv_line());
    files.add("report.csv", csv.into_bytes());
    emit(out, serde_json::to_string_pretty(&report).expect("report serializes"))?;
    Ok(true)
}

fn verify(loaded: &Loaded, files: &mut Outputs, out: &mut dyn Write) -> Result<bool, CliError> {
    let section = loaded.config.section(&loaded.config.verify, "verify")?;
    if section.n_max < 2 {
        return Err(CliError::input("config: [verify] n_max must be >= 2"));
    }
    let report = verify_identities(section.n_max, VerifyOptions { perturb_pmf: section.perturb_pmf });
    let mut csv = String::from("identity,n,status,detail\n");
    for c in &report.checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        emit(out, format_args!("{status} {} n={} {}", c.identity.name(), c.n, c.detail))?;
        csv.push_str(&format!("{},{},{status},\"{}\"\n", c.identity.name(), c.n, c.detail.replace('"', "'")));
    }
    let failed = report.failures().count();
    emit(out, format_args!("{} checks, {failed} failed", report.checks.len()))?;
    files.add("verify.csv", csv.into_bytes());
    files.note("failed", failed);
    Ok(failed == 0)
}

fn simulate(loaded: &Loaded, files: &mut Outputs, out: &mut dyn Write) -> Result<bool, CliError> {
    let cfg = &loaded.config;
    let section = cfg.section(&cfg.simulate, "simulate")?;
    let mut campaign = WeakCorrConfig::new(section.spec(), cfg.seed()?);
    campaign.trials = section.trials;
    campaign.test_per_class = section.test_per_class;
    campaign.trainer = cfg.trainer.clone();
    if let Some(spec) = &cfg.estimator {
        campaign.estimator = spec.clone();
    }
    let outcome = run_weak_correlation(&campaign)?;
    let mut table = Vec::new();
    outcome.row.write_csv(&mut table)?;
    let mut triples = Vec::new();
    outcome.write_triples_csv(&mut triples)?;
    emit(out, String::from_utf8_lossy(&table))?;
    files.add("table1.csv", table);
    files.add("triples.csv", triples);
    files.add_json(
        "simulate.json",
        &serde_json::json!({
            "schema": 1,
            "row": outcome.row,
            "decomposition": outcome.decomposition,
            "aborted": outcome.aborted,
            "population_auc": campaign.spec.population_auc(),
        }),
    );
    files.note("aborted_trials", outcome.aborted);
    Ok(true)
}

fn ratio_curve(loaded: &Loaded, files: &mut Outputs, out: &mut dyn Write) -> Result<bool, CliError> {
    let cfg = &loaded.config;
    let section = cfg.section(&cfg.ratio_curve, "ratio_curve")?;
    let campaign = RatioCurveConfig {
        n1_grid: section.n1_grid.clone(),
        trainer: cfg.trainer.clone(),
        b: section.b,
        model: section.model,
        replicates: section.replicates,
        th: section.th,
        seed: cfg.seed()?,
    };
    let rows = run_ratio_curve(&campaign)?;
    let mut csv = Vec::new();
    write_ratio_csv(&rows, &mut csv)?;
    emit(out, String::from_utf8_lossy(&csv))?;
    files.add("ratio_curve.csv", csv);
    files.add_json("ratio_curve.json", &serde_json::json!({ "schema": 1, "rows": rows }));
    Ok(true)
}

fn decompose_cmd(loaded: &Loaded, files: &mut Outputs, out: &mut dyn Write) -> Result<bool, CliError> {
    let section = loaded.config.section(&loaded.config.decompose, "decompose")?;
    let bytes = read_input(loaded, files, &section.input)?;
    let sample = PairedPerformanceSample::read_csv(bytes.as_slice())?;
    let report = decompose(&sample);
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let csv = format!(
        "t,mean_s,mean_s_hat,sigma_s,sigma_s_hat,rms_cond,rms_mean,rho,sigma_ratio,lhs,rhs,residual,degenerate\n\
         {},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        report.t,
        report.mean_s,
        report.mean_s_hat,
        report.sigma_s,
        report.sigma_s_hat,
        report.rms_cond,
        report.rms_mean,
        opt(report.rho),
        opt(report.sigma_ratio),
        opt(report.lhs),
        opt(report.rhs),
        opt(report.residual),
        report.degenerate
    );
    emit(out, &csv)?;
    files.add("decomposition.csv", csv.into_bytes());
    files.add_json("decomposition.json", &serde_json::json!({ "schema": 1, "report": report }));
    Ok(true)
}
