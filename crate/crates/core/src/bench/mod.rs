//! Data generation, threshold calibration and experiment harnesses.

mod sampling;

use std::io::Write;

pub use crate::counters::CounterSet;
pub use sampling::Sampler;

use crate::detector::{Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec};
use crate::format::sig17;
use crate::qstruct::{Prechange, RootPruneState};

/// A simulated stream: `theta_pre` for observations `1..=change_at`,
/// `theta_post` afterwards. `change_at = 0` means no change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub spec: FamilySpec,
    pub theta_pre: f64,
    pub theta_post: f64,
    pub change_at: u64,
    pub length: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn null(spec: FamilySpec, theta: f64, length: u64, seed: u64) -> Self {
        Scenario {
            spec,
            theta_pre: theta,
            theta_post: theta,
            change_at: 0,
            length,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.check_theta(self.theta_pre)?;
        self.spec.check_theta(self.theta_post)?;
        if self.change_at > self.length {
            return Err(Error::InvalidConfig(format!(
                "change_at {} exceeds length {}",
                self.change_at, self.length
            )));
        }
        Ok(())
    }

    /// Replicate `rep` of this scenario as a lazy stream.
    pub fn stream(&self, rep: u64) -> Result<ScenarioStream> {
        self.validate()?;
        Ok(ScenarioStream {
            scenario: *self,
            sampler: Sampler::new(self.seed, rep),
            t: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioStream {
    scenario: Scenario,
    sampler: Sampler,
    t: u64,
}

fn draw(sampler: &mut Sampler, spec: &FamilySpec, theta: f64) -> f64 {
    match spec.kind() {
        FamilyKind::GaussMean => theta + sampler.normal(),
        FamilyKind::GaussVar => theta.sqrt() * sampler.normal(),
        FamilyKind::Poisson => sampler.poisson(theta),
        FamilyKind::Binomial => sampler.binomial(spec.trials().unwrap_or(1), theta),
        FamilyKind::Gamma => sampler.gamma(spec.shape().unwrap_or(1.0), theta),
    }
}

impl Iterator for ScenarioStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.t >= self.scenario.length {
            return None;
        }
        self.t += 1;
        let sc = &self.scenario;
        let theta = if sc.change_at > 0 && self.t > sc.change_at {
            sc.theta_post
        } else {
            sc.theta_pre
        };
        Some(draw(&mut self.sampler, &sc.spec, theta))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.scenario.length - self.t) as usize;
        (left, Some(left))
    }
}

/// First replicate of `scenario`, materialised.
pub fn generate(scenario: &Scenario) -> Result<Vec<f64>> {
    Ok(scenario.stream(0)?.collect())
}

/// How the raw stream is fed to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Identity,
    Square,
}

impl Transform {
    fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Square => x * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunLength {
    Detected(u64),
    /// No detection within the stream; carries the stream length.
    Censored(u64),
}

impl RunLength {
    /// Run length with censored runs entering at the censoring value.
    pub fn value(self) -> u64 {
        match self {
            RunLength::Detected(t) | RunLength::Censored(t) => t,
        }
    }
}

fn run_on<I: Iterator<Item = f64>>(
    config: &DetectorConfig,
    data: I,
    transform: Transform,
    length: u64,
) -> Result<RunLength> {
    let mut det = Detector::new(*config)?;
    for x in data {
        let r = det.step(transform.apply(x))?;
        if let Some(d) = r.detection {
            return Ok(RunLength::Detected(d.t_detect));
        }
    }
    Ok(RunLength::Censored(length))
}

/// First detection time of `config` on replicate `rep` of `scenario`.
pub fn run_length(config: &DetectorConfig, scenario: &Scenario, rep: u64) -> Result<RunLength> {
    run_on(
        config,
        scenario.stream(rep)?,
        Transform::Identity,
        scenario.length,
    )
}

/// Monte Carlo estimate of the average run length under the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArlEstimate {
    pub threshold: f64,
    /// Mean run length, censored runs counted at the censoring length.
    pub mean: f64,
    pub censored: usize,
    pub reps: usize,
    pub censor_length: u64,
}

/// Null simulation setup shared by calibration and ARL estimation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullModelSpec {
    /// Family used to simulate the data (may differ from the detector's when
    /// a transform is applied).
    pub data_spec: FamilySpec,
    pub theta: f64,
    pub transform: Transform,
}

impl NullModelSpec {
    /// Simulate from the detector's own family at `theta`.
    pub fn native(config: &DetectorConfig, theta: f64) -> Self {
        NullModelSpec {
            data_spec: config.spec,
            theta,
            transform: Transform::Identity,
        }
    }

    /// Simulate at the detector's known pre-change parameter.
    pub fn at_prechange(config: &DetectorConfig) -> Result<Self> {
        match config.prechange {
            Prechange::Known(theta0) => Ok(Self::native(config, theta0)),
            Prechange::Unknown => Err(Error::InvalidConfig(
                "unknown pre-change parameter: a null simulation parameter is required".into(),
            )),
        }
    }
}

pub fn estimate_arl(
    config: &DetectorConfig,
    null: &NullModelSpec,
    threshold: f64,
    censor_length: u64,
    reps: usize,
    seed: u64,
) -> Result<ArlEstimate> {
    let cfg = DetectorConfig {
        threshold,
        stat_every: 0,
        stop_on_detect: false,
        ..*config
    };
    let scenario = Scenario::null(null.data_spec, null.theta, censor_length, seed);
    let mut total = 0u64;
    let mut censored = 0;
    for rep in 0..reps as u64 {
        let rl = run_on(&cfg, scenario.stream(rep)?, null.transform, censor_length)?;
        if matches!(rl, RunLength::Censored(_)) {
            censored += 1;
        }
        total += rl.value();
    }
    Ok(ArlEstimate {
        threshold,
        mean: total as f64 / reps.max(1) as f64,
        censored,
        reps,
        censor_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub threshold: f64,
    pub achieved: ArlEstimate,
    pub target_arl: u64,
    /// Candidate thresholds simulated.
    pub rounds: u32,
}

const MAX_BISECTION_ROUNDS: u32 = 30;
const MAX_EXPANSIONS: u32 = 20;

/// Finds a threshold whose estimated null ARL is within ±10% of
/// `target_arl`.
///
/// Every candidate is scored on the same `reps` null streams of length
/// `3·target_arl` (common random numbers), which makes the estimate
/// monotone in the threshold. The bracket is doubled upwards until the
/// target is exceeded, then bisected for at most 30 rounds.
pub fn calibrate_threshold(
    config: &DetectorConfig,
    null: &NullModelSpec,
    target_arl: u64,
    reps: usize,
    seed: u64,
) -> Result<Calibration> {
    if target_arl < 100 {
        return Err(Error::InvalidConfig(format!(
            "target ARL must be at least 100, got {target_arl}"
        )));
    }
    if reps < 50 {
        return Err(Error::InvalidConfig(format!(
            "calibration needs at least 50 replicates, got {reps}"
        )));
    }
    let censor = 3 * target_arl;
    let target = target_arl as f64;
    let band = (0.9 * target, 1.1 * target);

    let mut lo = (0.0f64, 0.0f64);
    let mut hi: Option<(f64, f64)> = None;
    let mut h = 10.0f64;
    let mut rounds = 0;
    let mut bisections = 0;
    let mut expansions = 0;
    loop {
        let est = estimate_arl(config, null, h, censor, reps, seed)?;
        rounds += 1;
        if est.mean >= band.0 && est.mean <= band.1 {
            return Ok(Calibration {
                threshold: h,
                achieved: est,
                target_arl,
                rounds,
            });
        }
        if est.mean < target {
            lo = (h, est.mean);
        } else {
            hi = Some((h, est.mean));
        }
        match hi {
            None => {
                expansions += 1;
                if expansions > MAX_EXPANSIONS {
                    return Err(Error::Calibration {
                        lo: lo.0,
                        hi: f64::INFINITY,
                        arl_lo: lo.1,
                        arl_hi: f64::NAN,
                    });
                }
                h *= 2.0;
            }
            Some((hv, arl_hi)) => {
                bisections += 1;
                if bisections > MAX_BISECTION_ROUNDS {
                    return Err(Error::Calibration {
                        lo: lo.0,
                        hi: hv,
                        arl_lo: lo.1,
                        arl_hi,
                    });
                }
                h = 0.5 * (lo.0 + hv);
            }
        }
    }
}

/// A detector configuration with the input transform it runs under.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    pub label: String,
    pub config: DetectorConfig,
    pub transform: Transform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayOutcome {
    /// Detected `delay` observations after the change.
    Delay(u64),
    /// Detected at or before the change.
    FalsePositive(u64),
    /// No detection; carries `length − change_at`.
    Censored(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayRow {
    pub model: String,
    pub theta_post: f64,
    pub rep: u64,
    pub outcome: DelayOutcome,
}

/// Runs every model on the same `reps` replicates of every scenario.
/// Each model's detector uses its own (calibrated) threshold.
pub fn delay_experiment(
    models: &[DelayModel],
    scenarios: &[Scenario],
    reps: u64,
) -> Result<Vec<DelayRow>> {
    let mut rows = Vec::new();
    for sc in scenarios {
        if sc.change_at == 0 {
            return Err(Error::InvalidConfig(
                "delay scenarios need a change point".into(),
            ));
        }
        for model in models {
            for rep in 0..reps {
                let rl = run_on(&model.config, sc.stream(rep)?, model.transform, sc.length)?;
                let outcome = match rl {
                    RunLength::Detected(t) if t <= sc.change_at => DelayOutcome::FalsePositive(t),
                    RunLength::Detected(t) => DelayOutcome::Delay(t - sc.change_at),
                    RunLength::Censored(len) => DelayOutcome::Censored(len - sc.change_at),
                };
                rows.push(DelayRow {
                    model: model.label.clone(),
                    theta_post: sc.theta_post,
                    rep,
                    outcome,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySummary {
    pub model: String,
    pub theta_post: f64,
    /// Mean over replicates without a false positive; censored runs enter at
    /// the censoring value.
    pub mean_delay: f64,
    pub detections: usize,
    pub false_positives: usize,
    pub censored: usize,
}

pub fn summarize_delays(rows: &[DelayRow]) -> Vec<DelaySummary> {
    let mut out: Vec<DelaySummary> = Vec::new();
    let mut sums: Vec<u64> = Vec::new();
    for row in rows {
        let idx = match out
            .iter()
            .position(|s| s.model == row.model && s.theta_post == row.theta_post)
        {
            Some(i) => i,
            None => {
                out.push(DelaySummary {
                    model: row.model.clone(),
                    theta_post: row.theta_post,
                    mean_delay: 0.0,
                    detections: 0,
                    false_positives: 0,
                    censored: 0,
                });
                sums.push(0);
                out.len() - 1
            }
        };
        match row.outcome {
            DelayOutcome::Delay(d) => {
                out[idx].detections += 1;
                sums[idx] += d;
            }
            DelayOutcome::FalsePositive(_) => out[idx].false_positives += 1,
            DelayOutcome::Censored(d) => {
                out[idx].censored += 1;
                sums[idx] += d;
            }
        }
    }
    for (s, total) in out.iter_mut().zip(sums) {
        let n = s.detections + s.censored;
        s.mean_delay = if n > 0 {
            total as f64 / n as f64
        } else {
            f64::NAN
        };
    }
    out
}

/// Per-step work counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRow {
    pub t: u64,
    pub curves_stored: u64,
    /// Curves evaluated by the adaptive check.
    pub curves_evaluated: u64,
    /// Curves a full maximisation would evaluate.
    pub curves_full: u64,
    pub merges: u64,
    pub transcendental_calls: u64,
    /// Transcendental calls of root-based pruning on the same stream (known
    /// pre-change parameter only).
    pub root_transcendental_calls: Option<u64>,
    pub detected: bool,
}

/// Runs `config` over replicate 0 of `scenario` without stopping and records
/// the per-step counters.
pub fn counter_profile(config: &DetectorConfig, scenario: &Scenario) -> Result<Vec<CounterRow>> {
    let cfg = DetectorConfig {
        stat_every: 0,
        stop_on_detect: false,
        ..*config
    };
    let mut det = Detector::new(cfg)?;
    let mut roots = match cfg.prechange {
        Prechange::Known(theta0) => cfg
            .directions
            .list()
            .iter()
            .map(|&d| RootPruneState::new(d, cfg.spec, theta0, 1e-10))
            .collect::<Result<Vec<_>>>()?,
        Prechange::Unknown => Vec::new(),
    };
    let mut rows = Vec::with_capacity(scenario.length as usize);
    let mut prev = CounterSet::default();
    let mut prev_root = 0u64;
    for x in scenario.stream(0)? {
        // Stored before the check sees them: that is what a full
        // maximisation at this step would have to evaluate.
        let r = det.step(x)?;
        let now = det.counters();
        let root_calls = if roots.is_empty() {
            None
        } else {
            let g = cfg.spec.suff(x)?;
            let mut total = 0;
            for s in &mut roots {
                s.update(g)?;
                total += s.counters().transcendental_calls;
            }
            let delta = total - prev_root;
            prev_root = total;
            Some(delta)
        };
        rows.push(CounterRow {
            t: r.t,
            curves_stored: r.curves_stored,
            curves_evaluated: r.curves_evaluated,
            curves_full: if r.t >= cfg.min_observations() {
                r.curves_stored
            } else {
                0
            },
            merges: now.merges - prev.merges,
            transcendental_calls: now.transcendental_calls - prev.transcendental_calls,
            root_transcendental_calls: root_calls,
            detected: r.detection.is_some(),
        });
        prev = now;
    }
    Ok(rows)
}

pub fn write_counter_csv<W: Write>(rows: &[CounterRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "t",
        "curves_stored",
        "curves_evaluated",
        "curves_full",
        "merges",
        "transcendental_calls",
        "root_transcendental_calls",
        "detected",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.curves_stored.to_string(),
            r.curves_evaluated.to_string(),
            r.curves_full.to_string(),
            r.merges.to_string(),
            r.transcendental_calls.to_string(),
            r.root_transcendental_calls
                .map(|c| c.to_string())
                .unwrap_or_default(),
            (r.detected as u8).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn write_delay_csv<W: Write>(rows: &[DelayRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["model", "theta_post", "rep", "outcome", "time"])
        .map_err(io)?;
    for r in rows {
        let (kind, value) = match r.outcome {
            DelayOutcome::Delay(d) => ("delay", d),
            DelayOutcome::FalsePositive(t) => ("false_positive", t),
            DelayOutcome::Censored(d) => ("censored", d),
        };
        w.write_record([
            r.model.clone(),
            sig17(r.theta_post),
            r.rep.to_string(),
            kind.to_string(),
            value.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn write_delay_summary_csv<W: Write>(rows: &[DelaySummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record([
        "model",
        "theta_post",
        "mean_delay",
        "detections",
        "false_positives",
        "censored",
    ])
    .map_err(io)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            sig17(r.theta_post),
            sig17(r.mean_delay),
            r.detections.to_string(),
            r.false_positives.to_string(),
            r.censored.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}
