//! Command-line front end.
//!
//! `detect` reads one value per line and writes one NDJSON event per
//! observation. `calibrate`, `simulate` and `bench` wrap the experiment
//! tooling in [`crate::bench`].

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::bench::{self, DelayModel, NullModelSpec, Scenario, Transform};
use crate::detector::{Detector, DetectorConfig, Directions};
use crate::error::Error;
use crate::family::{FamilyKind, FamilySpec};
use crate::format::sig17;
use crate::qstruct::Prechange;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DETECTED: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "focus",
    version,
    about = "Online changepoint detection for exponential families"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monitor a stream for a change.
    Detect(DetectArgs),
    /// Tune a threshold to a target average run length under the null.
    Calibrate(CalibrateArgs),
    /// Write a simulated stream.
    Simulate(SimulateArgs),
    /// Run an instrumented experiment and write CSV.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Per-step work counters on one simulated stream.
    Counters(CountersArgs),
    /// Detection delays of the variance model against a mean model on the
    /// squared observations.
    Delay(DelayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    GaussMean,
    GaussVar,
    Poisson,
    Binomial,
    Gamma,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::GaussMean => FamilyKind::GaussMean,
            FamilyArg::GaussVar => FamilyKind::GaussVar,
            FamilyArg::Poisson => FamilyKind::Poisson,
            FamilyArg::Binomial => FamilyKind::Binomial,
            FamilyArg::Gamma => FamilyKind::Gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Up,
    Down,
    Both,
}

impl From<DirectionArg> for Directions {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Up => Directions::Up,
            DirectionArg::Down => Directions::Down,
            DirectionArg::Both => Directions::Both,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Trials per observation (binomial only).
    #[arg(long)]
    pub trials: Option<u32>,
    /// Shape parameter (gamma only).
    #[arg(long)]
    pub shape: Option<f64>,
}

impl FamilyArgs {
    fn spec(&self) -> Result<FamilySpec, String> {
        let kind = FamilyKind::from(self.family);
        let needs_trials = kind == FamilyKind::Binomial;
        let needs_shape = kind == FamilyKind::Gamma;
        match (needs_trials, self.trials.is_some()) {
            (true, false) => return Err("--trials is required with --family binomial".into()),
            (false, true) => return Err("--trials is only accepted with --family binomial".into()),
            _ => {}
        }
        match (needs_shape, self.shape.is_some()) {
            (true, false) => return Err("--shape is required with --family gamma".into()),
            (false, true) => return Err("--shape is only accepted with --family gamma".into()),
            _ => {}
        }
        FamilySpec::new(kind, self.trials, self.shape).map_err(|e| e.to_string())
    }
}

fn parse_prechange(s: &str) -> Result<Prechange, String> {
    if s.eq_ignore_ascii_case("unknown") {
        return Ok(Prechange::Unknown);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Prechange::Known(v)),
        _ => Err(format!(
            "expected a finite number or \"unknown\", got {s:?}"
        )),
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got {s:?}")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Pre-change parameter, or "unknown".
    #[arg(long, value_parser = parse_prechange)]
    pub theta0: Prechange,
    #[arg(long, value_enum, default_value = "both")]
    pub direction: DirectionArg,
}

impl DetectorArgs {
    fn config(&self, threshold: f64) -> Result<DetectorConfig, String> {
        let spec = self.family.spec()?;
        let cfg = DetectorConfig::new(spec, self.theta0, self.direction.into(), threshold);
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Threshold on the likelihood-ratio scale.
    #[arg(long, value_parser = parse_finite)]
    pub threshold: f64,
    /// Also report the full statistic every N observations.
    #[arg(long, default_value_t = 0)]
    pub stat_every: u64,
    /// Exit after the first detection.
    #[arg(long)]
    pub stop_on_detect: bool,
    /// Input file, or "-" for standard input.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Output file, or "-" for standard output.
    #[arg(long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Parameter the null streams are simulated at. Defaults to the known
    /// pre-change parameter; required when it is unknown.
    #[arg(long, value_parser = parse_finite)]
    pub null_theta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub target_arl: u64,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_parser = parse_finite)]
    pub theta_pre: f64,
    /// Post-change parameter; defaults to the pre-change one.
    #[arg(long, value_parser = parse_finite)]
    pub theta_post: Option<f64>,
    /// Last pre-change observation; 0 for no change.
    #[arg(long, default_value_t = 0)]
    pub change_at: u64,
    #[arg(long)]
    pub length: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ScenarioArgs {
    fn scenario(&self, spec: FamilySpec) -> Result<Scenario, String> {
        let sc = Scenario {
            spec,
            theta_pre: self.theta_pre,
            theta_post: self.theta_post.unwrap_or(self.theta_pre),
            change_at: self.change_at,
            length: self.length,
            seed: self.seed,
        };
        sc.validate().map_err(|e| e.to_string())?;
        Ok(sc)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Clone, Args)]
pub struct CountersArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, value_parser = parse_finite)]
    pub threshold: f64,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "-")]
    pub output: String,
}

#[derive(Debug, Clone, Args)]
pub struct DelayArgs {
    /// Pre-change variance.
    #[arg(long, value_parser = parse_finite, default_value_t = 1.0)]
    pub theta0: f64,
    /// Post-change variances, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1.25,1.5")]
    pub theta_post: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub change_at: u64,
    /// Stream length; defaults to the change point plus three target ARLs.
    #[arg(long)]
    pub length: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub reps: u64,
    #[arg(long, default_value_t = 10_000)]
    pub target_arl: u64,
    /// Replicates per calibration candidate.
    #[arg(long, default_value_t = 200)]
    pub calib_reps: usize,
    /// Threshold of the variance model; calibrated when omitted.
    #[arg(long, value_parser = parse_finite)]
    pub var_threshold: Option<f64>,
    /// Threshold of the mean model on squares; calibrated when omitted.
    #[arg(long, value_parser = parse_finite)]
    pub sq_threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-replicate CSV.
    #[arg(long, default_value = "-")]
    pub output: String,
    /// Optional per-model summary CSV.
    #[arg(long)]
    pub summary: Option<String>,
}

fn usage_error(kind: ErrorKind, msg: impl std::fmt::Display) -> clap::Error {
    Cli::command().error(kind, msg)
}

/// Parses and validates a full argument vector (program name first).
pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let conflict = |m: String| usage_error(ErrorKind::ArgumentConflict, m);
    match &cli.command {
        Command::Detect(a) => {
            a.detector.config(a.threshold).map_err(conflict)?;
        }
        Command::Calibrate(a) => {
            a.detector.config(1.0).map_err(conflict)?;
            if a.detector.theta0 == Prechange::Unknown && a.null_theta.is_none() {
                return Err(usage_error(
                    ErrorKind::MissingRequiredArgument,
                    "--null-theta is required with --theta0 unknown",
                ));
            }
        }
        Command::Simulate(a) => {
            let spec = a.family.spec().map_err(conflict)?;
            a.scenario.scenario(spec).map_err(conflict)?;
        }
        Command::Bench(BenchCommand::Counters(a)) => {
            let cfg = a.detector.config(a.threshold).map_err(conflict)?;
            a.scenario.scenario(cfg.spec).map_err(conflict)?;
        }
        Command::Bench(BenchCommand::Delay(a)) => {
            if a.theta_post.is_empty() {
                return Err(conflict("--theta-post needs at least one value".into()));
            }
            for &t in std::iter::once(&a.theta0).chain(&a.theta_post) {
                FamilySpec::gauss_var()
                    .check_theta(t)
                    .map_err(|e| conflict(e.to_string()))?;
            }
            if a.change_at == 0 {
                return Err(conflict("--change-at must be positive".into()));
            }
        }
    }
    Ok(cli)
}

fn open_input(path: &str) -> io::Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(path)?)))
    }
}

fn open_output(path: &str) -> io::Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn json_number(v: f64) -> String {
    if v.is_finite() {
        sig17(v)
    } else {
        "null".into()
    }
}

/// Streams `input` through a detector and writes NDJSON events to `output`.
/// Diagnostics go to `errors`. Returns the process exit code.
pub fn run_detect<R: BufRead, W: Write, E: Write>(
    config: DetectorConfig,
    input: R,
    mut output: W,
    mut errors: E,
) -> i32 {
    let mut detector = match Detector::new(config) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            return EXIT_INPUT;
        }
    };
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                let _ = writeln!(errors, "error: reading line {lineno}: {e}");
                return EXIT_IO;
            }
        };
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let x = match text.parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ => {
                let _ = writeln!(
                    errors,
                    "error: line {lineno}: not a finite number: {text:?}"
                );
                return EXIT_INPUT;
            }
        };
        let step = match detector.step(x) {
            Ok(s) => s,
            Err(Error::AtObservation { source, .. }) => {
                let _ = writeln!(errors, "error: line {lineno}: {source}");
                return EXIT_INPUT;
            }
            Err(e) => {
                let _ = writeln!(errors, "error: line {lineno}: {e}");
                return EXIT_INPUT;
            }
        };
        let mut event = format!(
            "{{\"t\":{},\"curves\":{},\"evaluated\":{}",
            step.t, step.curves_stored, step.curves_evaluated
        );
        match step.detection {
            Some(d) => {
                // On a detection the statistic that crossed is reported.
                event.push_str(&format!(
                    ",\"detect\":true,\"tau_low\":{},\"stat\":{},\"direction\":\"{}\"",
                    d.tau_low,
                    json_number(d.stat),
                    d.direction.as_str()
                ));
            }
            None => {
                if let Some(s) = step.stat {
                    event.push_str(&format!(",\"stat\":{}", json_number(s)));
                }
            }
        }
        event.push('}');
        if let Err(e) = writeln!(output, "{event}") {
            let _ = writeln!(errors, "error: writing output: {e}");
            return EXIT_IO;
        }
        if step.detection.is_some() && config.stop_on_detect {
            return match output.flush() {
                Ok(()) => EXIT_DETECTED,
                Err(_) => EXIT_IO,
            };
        }
    }
    match output.flush() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(errors, "error: writing output: {e}");
            EXIT_IO
        }
    }
}

fn calibration_json(cal: &bench::Calibration) -> String {
    format!(
        "{{\"threshold\":{},\"achieved_arl\":{},\"target_arl\":{},\"reps\":{},\"censor_length\":{},\"censored\":{},\"rounds\":{}}}",
        json_number(cal.threshold),
        json_number(cal.achieved.mean),
        cal.target_arl,
        cal.achieved.reps,
        cal.achieved.censor_length,
        cal.achieved.censored,
        cal.rounds
    )
}

pub fn run_calibrate<W: Write, E: Write>(
    args: &CalibrateArgs,
    mut output: W,
    mut errors: E,
) -> i32 {
    let cfg = match args.detector.config(1.0) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let null = match (args.null_theta, cfg.prechange) {
        (Some(theta), _) => NullModelSpec::native(&cfg, theta),
        (None, Prechange::Known(theta)) => NullModelSpec::native(&cfg, theta),
        (None, Prechange::Unknown) => {
            let _ = writeln!(
                errors,
                "error: --null-theta is required with --theta0 unknown"
            );
            return EXIT_INPUT;
        }
    };
    match bench::calibrate_threshold(&cfg, &null, args.target_arl, args.reps, args.seed) {
        Ok(cal) => match writeln!(output, "{}", calibration_json(&cal)) {
            Ok(()) => EXIT_OK,
            Err(_) => EXIT_IO,
        },
        Err(e @ Error::Calibration { .. }) => {
            let _ = writeln!(errors, "error: {e}");
            EXIT_CALIBRATION
        }
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn run_simulate<W: Write, E: Write>(args: &SimulateArgs, mut output: W, mut errors: E) -> i32 {
    let sc = match args
        .family
        .spec()
        .and_then(|spec| args.scenario.scenario(spec))
    {
        Ok(sc) => sc,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let discrete = matches!(sc.spec.kind(), FamilyKind::Poisson | FamilyKind::Binomial);
    let stream = match sc.stream(0) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            return EXIT_INPUT;
        }
    };
    for x in stream {
        let res = if discrete {
            writeln!(output, "{}", x as u64)
        } else {
            writeln!(output, "{}", sig17(x))
        };
        if res.is_err() {
            return EXIT_IO;
        }
    }
    if output.flush().is_err() {
        return EXIT_IO;
    }
    EXIT_OK
}

pub fn run_counters<W: Write, E: Write>(args: &CountersArgs, output: W, mut errors: E) -> i32 {
    let result = args
        .detector
        .config(args.threshold)
        .and_then(|cfg| Ok((cfg, args.scenario.scenario(cfg.spec)?)));
    let (cfg, sc) = match result {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let rows = match bench::counter_profile(&cfg, &sc) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            return EXIT_INPUT;
        }
    };
    match bench::write_counter_csv(&rows, output) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(errors, "error: {e}");
            EXIT_IO
        }
    }
}

pub const VARIANCE_MODEL: &str = "gauss-var";
pub const SQUARES_MODEL: &str = "gauss-mean-on-squares";

/// The two models of the variance-change study with known pre-change
/// variance `theta0`, monitored in both directions.
pub fn variance_study_models(
    theta0: f64,
    var_threshold: f64,
    sq_threshold: f64,
) -> Vec<DelayModel> {
    vec![
        DelayModel {
            label: VARIANCE_MODEL.into(),
            config: DetectorConfig::new(
                FamilySpec::gauss_var(),
                Prechange::Known(theta0),
                Directions::Both,
                var_threshold,
            ),
            transform: Transform::Identity,
        },
        DelayModel {
            label: SQUARES_MODEL.into(),
            config: DetectorConfig::new(
                FamilySpec::gauss_mean(),
                Prechange::Known(theta0),
                Directions::Both,
                sq_threshold,
            ),
            transform: Transform::Square,
        },
    ]
}

pub fn run_delay<W: Write, E: Write>(args: &DelayArgs, output: W, mut errors: E) -> i32 {
    let fail = |errors: &mut E, e: &dyn std::fmt::Display, code: i32| {
        let _ = writeln!(errors, "error: {e}");
        code
    };
    let mut models = variance_study_models(args.theta0, 1.0, 1.0);
    let thresholds = [args.var_threshold, args.sq_threshold];
    for (i, model) in models.iter_mut().enumerate() {
        model.config.threshold = match thresholds[i] {
            Some(h) => h,
            None => {
                let null = NullModelSpec {
                    data_spec: FamilySpec::gauss_var(),
                    theta: args.theta0,
                    transform: model.transform,
                };
                match bench::calibrate_threshold(
                    &model.config,
                    &null,
                    args.target_arl,
                    args.calib_reps,
                    args.seed,
                ) {
                    Ok(cal) => {
                        let _ = writeln!(errors, "{}: {}", model.label, calibration_json(&cal));
                        cal.threshold
                    }
                    Err(e @ Error::Calibration { .. }) => {
                        return fail(&mut errors, &e, EXIT_CALIBRATION)
                    }
                    Err(e) => return fail(&mut errors, &e, EXIT_INPUT),
                }
            }
        };
    }
    let length = args.length.unwrap_or(args.change_at + 3 * args.target_arl);
    // A different seed from calibration keeps the delay streams independent.
    let scenarios: Vec<Scenario> = args
        .theta_post
        .iter()
        .map(|&theta_post| Scenario {
            spec: FamilySpec::gauss_var(),
            theta_pre: args.theta0,
            theta_post,
            change_at: args.change_at,
            length,
            seed: args.seed.wrapping_add(1),
        })
        .collect();
    let rows = match bench::delay_experiment(&models, &scenarios, args.reps) {
        Ok(r) => r,
        Err(e) => return fail(&mut errors, &e, EXIT_INPUT),
    };
    if let Some(path) = &args.summary {
        let summary = bench::summarize_delays(&rows);
        let res = File::create(path)
            .map_err(|e| Error::Io(e.to_string()))
            .and_then(|f| bench::write_delay_summary_csv(&summary, BufWriter::new(f)));
        if let Err(e) = res {
            return fail(&mut errors, &e, EXIT_IO);
        }
    }
    match bench::write_delay_csv(&rows, output) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&mut errors, &e, EXIT_IO),
    }
}

/// Entry point used by the binary: parses `argv`, runs the subcommand and
/// returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match parse_args(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stderr = io::stderr();
    let out_path = match &cli.command {
        Command::Detect(a) => &a.output,
        Command::Calibrate(_) => "-",
        Command::Simulate(a) => &a.output,
        Command::Bench(BenchCommand::Counters(a)) => &a.output,
        Command::Bench(BenchCommand::Delay(a)) => &a.output,
    };
    let output = match open_output(out_path) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: opening {out_path}: {e}");
            return EXIT_IO;
        }
    };
    match &cli.command {
        Command::Detect(a) => {
            let cfg = match a.detector.config(a.threshold) {
                Ok(c) => DetectorConfig {
                    stat_every: a.stat_every,
                    stop_on_detect: a.stop_on_detect,
                    ..c
                },
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_INPUT;
                }
            };
            let input = match open_input(&a.input) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("error: opening {}: {e}", a.input);
                    return EXIT_IO;
                }
            };
            run_detect(cfg, input, output, stderr.lock())
        }
        Command::Calibrate(a) => run_calibrate(a, output, stderr.lock()),
        Command::Simulate(a) => run_simulate(a, output, stderr.lock()),
        Command::Bench(BenchCommand::Counters(a)) => run_counters(a, output, stderr.lock()),
        Command::Bench(BenchCommand::Delay(a)) => run_delay(a, output, stderr.lock()),
    }
}
