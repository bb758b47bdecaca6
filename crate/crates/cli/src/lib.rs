//! Argument handling and subcommands of the `selftest` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use selftest_core::correlation::{distance, evaluate, Correlation};
use selftest_core::experiments::{random_state, run_experiment, ExperimentConfig};
use selftest_core::extract::extract_with_cap;
use selftest_core::linalg::DEFAULT_MAX_DIM;
use selftest_core::states::{make_state, SchmidtState};
use selftest_core::strategy::{many_answers_ideal, many_questions_ideal, tilted_chsh_ideal, Family, Strategy};
use selftest_core::verify::{verify_many_answers, verify_many_questions};

/// Default directory for experiment reports when neither `--out` nor the
/// config names a destination.
pub const OUT_DIR_ENV: &str = "SELFTEST_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RESOURCE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] selftest_core::Error),

    #[error("{0}")]
    Invalid(String),

    /// The command ran but its checks did not pass.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_resource() => EXIT_RESOURCE,
            _ => EXIT_VALIDATION,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    ManyAnswers,
    ManyQuestions,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::ManyAnswers => Family::ManyAnswers,
            FamilyArg::ManyQuestions => Family::ManyQuestions,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "selftest",
    version,
    about = "Self-testing correlations: build, evaluate, verify, extract, experiment"
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed, or seeds random coefficients for `build`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Cap on the Hilbert-space dimension of intermediate objects.
    #[arg(long, global = true)]
    max_dim: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit the ideal strategy JSON of a family.
    Build {
        #[arg(long, value_enum, required_unless_present = "theta")]
        family: Option<FamilyArg>,
        /// Schmidt coefficients, normalized on input.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["d", "theta"])]
        coeffs: Option<Vec<f64>>,
        /// Local dimension of random coefficients drawn from `--seed`.
        #[arg(long, conflicts_with = "theta")]
        d: Option<usize>,
        /// Tilted-CHSH strategy at this angle.
        #[arg(long)]
        theta: Option<f64>,
        /// Also write the coefficient file here.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Strategy JSON to correlation table.
    Evaluate { strategy: PathBuf },
    /// Check a correlation against the defining properties for a state.
    Verify {
        correlation: PathBuf,
        state: PathBuf,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// L1 distance between two correlations.
    Distance { p: PathBuf, q: PathBuf },
    /// Extraction kit, residuals and swap-isometry error of a strategy.
    Extract {
        strategy: PathBuf,
        state: PathBuf,
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
    },
    /// Run an experiment config.
    Experiment {
        /// Config path, same as `--config`.
        path: Option<PathBuf>,
    },
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// As [`dispatch`], writing to the given streams.
pub fn dispatch_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match run(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Build {
            family,
            coeffs,
            d,
            theta,
            state_out,
        } => {
            let (strategy, state) = build(*family, coeffs.as_deref(), *d, *theta, cli.seed)?;
            if let (Some(path), Some(state)) = (state_out, &state) {
                fs::write(path, serde_json::to_string_pretty(state)?)?;
            }
            json_only(cli.format, "build")?;
            emit(&strategy.to_json()?, cli.out.as_deref(), out)
        }
        Command::Evaluate { strategy } => {
            let p = evaluate(&read_strategy(strategy)?)?;
            let text = match cli.format {
                Format::Json => p.to_json()?,
                Format::Csv => p.to_csv()?,
            };
            emit(&text, cli.out.as_deref(), out)
        }
        Command::Verify {
            correlation,
            state,
            family,
            tol,
        } => {
            json_only(cli.format, "verify")?;
            let p = read_correlation(correlation)?;
            let s = read_state(state)?;
            let report = match family_for(*family, &s)? {
                Family::ManyAnswers => verify_many_answers(&p, &s, *tol)?,
                Family::ManyQuestions => verify_many_questions(&p, &s, *tol)?,
            };
            emit(&serde_json::to_string_pretty(&report)?, cli.out.as_deref(), out)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Failed(format!(
                    "verification failed, max residual {:.3e}",
                    report.max_residual
                )))
            }
        }
        Command::Distance { p, q } => {
            json_only(cli.format, "distance")?;
            let report = distance(&read_correlation(p)?, &read_correlation(q)?)?;
            emit(&serde_json::to_string_pretty(&report)?, cli.out.as_deref(), out)
        }
        Command::Extract {
            strategy,
            state,
            family,
        } => {
            json_only(cli.format, "extract")?;
            let strategy = read_strategy(strategy)?;
            let s = read_state(state)?;
            let family = family_for(*family, &s)?;
            let cap = cli.max_dim.unwrap_or(DEFAULT_MAX_DIM);
            let x = extract_with_cap(&strategy, family, &s, cap)?;
            let doc = json!({
                "family": family,
                "d": s.d(),
                "error": x.error,
                "residuals": x.residuals,
                "kit": x.kit,
            });
            emit(&serde_json::to_string_pretty(&doc)?, cli.out.as_deref(), out)
        }
        Command::Experiment { path } => experiment(cli, path.as_deref(), out, err),
    }
}

fn experiment(cli: &Cli, path: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let path = match (path, cli.config.as_deref()) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Invalid("config given both as argument and --config".into()))
        }
        (Some(p), _) | (None, Some(p)) => p,
        (None, None) => return Err(CliError::Invalid("experiment needs a config file".into())),
    };
    let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(path)?)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(cap) = cli.max_dim {
        cfg.max_dim = Some(cap);
    }
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    let text = match cli.format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv()?,
    };
    let target = cli.out.clone().or_else(|| cfg.output.clone()).or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|dir| {
            let ext = match cli.format {
                Format::Json => "json",
                Format::Csv => "csv",
            };
            let kind = serde_json::to_value(cfg.experiment).ok();
            let kind = kind.as_ref().and_then(|v| v.as_str()).unwrap_or("experiment");
            PathBuf::from(dir).join(format!("{kind}-{}.{ext}", cfg.seed))
        })
    });
    if let Some(target) = &target {
        if let Some(old) = existing_hash(target) {
            if old != report.config_hash {
                let _ = writeln!(
                    err,
                    "warning: {} was produced by config {old}, overwriting with {}",
                    target.display(),
                    report.config_hash
                );
            }
        }
    }
    emit(&text, target.as_deref(), out)?;
    if report.result.passed() {
        Ok(())
    } else {
        Err(CliError::Failed("experiment checks failed".into()))
    }
}

/// Config hash recorded in an existing JSON report, if any.
fn existing_hash(path: &Path) -> Option<String> {
    let text = fs::read_to_string(path).ok()?;
    let doc: serde_json::Value = serde_json::from_str(&text).ok()?;
    doc.get("config_hash")?.as_str().map(str::to_owned)
}

fn build(
    family: Option<FamilyArg>,
    coeffs: Option<&[f64]>,
    d: Option<usize>,
    theta: Option<f64>,
    seed: Option<u64>,
) -> CliResult<(Strategy, Option<SchmidtState>)> {
    if let Some(theta) = theta {
        return Ok((tilted_chsh_ideal(theta)?, None));
    }
    let family: Family = family
        .ok_or_else(|| CliError::Invalid("build needs --family".into()))?
        .into();
    let state = match (coeffs, d) {
        (Some(c), _) => make_state(c)?,
        (None, Some(d)) => random_state(seed.unwrap_or(0), d)?,
        (None, None) => return Err(CliError::Invalid("build needs --coeffs, --d or --theta".into())),
    };
    let strategy = match family {
        Family::ManyAnswers => many_answers_ideal(&state)?,
        Family::ManyQuestions => many_questions_ideal(&state)?,
    };
    Ok((strategy, Some(state)))
}

fn family_for(given: Option<FamilyArg>, state: &SchmidtState) -> CliResult<Family> {
    Ok(match given {
        Some(f) => f.into(),
        None if state.d() % 2 == 1 => Family::ManyAnswers,
        None => Family::ManyQuestions,
    })
}

fn json_only(format: Format, command: &str) -> CliResult<()> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(CliError::Invalid(format!("{command} has no csv output"))),
    }
}

fn emit(text: &str, path: Option<&Path>, out: &mut dyn Write) -> CliResult<()> {
    let mut text = text.to_owned();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_strategy(path: &Path) -> CliResult<Strategy> {
    Ok(Strategy::from_json(&fs::read_to_string(path)?)?)
}

fn read_state(path: &Path) -> CliResult<SchmidtState> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Reads JSON, or CSV when the extension says so.
fn read_correlation(path: &Path) -> CliResult<Correlation> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        Ok(Correlation::read_csv(fs::File::open(path)?)?)
    } else {
        Ok(Correlation::from_json(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let size = CliError::Core(selftest_core::Error::Size { dim: 10, cap: 4 });
        assert_eq!(size.exit_code(), EXIT_RESOURCE);
        assert_eq!(
            CliError::Core(selftest_core::Error::Validation("x".into())).exit_code(),
            EXIT_VALIDATION
        );
        assert_eq!(CliError::Failed("x".into()).exit_code(), EXIT_VALIDATION);
    }

    #[test]
    fn family_follows_parity_unless_given() {
        let odd = make_state(&[1.0, 1.0, 1.0]).unwrap();
        let even = make_state(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(family_for(None, &odd).unwrap(), Family::ManyAnswers);
        assert_eq!(family_for(None, &even).unwrap(), Family::ManyQuestions);
        assert_eq!(
            family_for(Some(FamilyArg::ManyQuestions), &odd).unwrap(),
            Family::ManyQuestions
        );
    }

    #[test]
    fn build_needs_a_source_for_coefficients() {
        assert!(matches!(
            build(Some(FamilyArg::ManyAnswers), None, None, None, None),
            Err(CliError::Invalid(_))
        ));
        let (s, state) = build(None, None, None, Some(0.4), None).unwrap();
        assert!(state.is_none());
        assert_eq!(s.dim_a(), 2);
    }

    #[test]
    fn random_build_is_seeded() {
        let a = build(Some(FamilyArg::ManyAnswers), None, Some(5), None, Some(11))
            .unwrap()
            .1;
        let b = build(Some(FamilyArg::ManyAnswers), None, Some(5), None, Some(11))
            .unwrap()
            .1;
        let c = build(Some(FamilyArg::ManyAnswers), None, Some(5), None, Some(12))
            .unwrap()
            .1;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn emit_terminates_with_newline() {
        let mut buf = Vec::new();
        emit("{}", None, &mut buf).unwrap();
        assert_eq!(buf, b"{}\n");
    }
}
