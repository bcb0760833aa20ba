//! Streaming detector over one or two directional states.

use crate::counters::CounterSet;
use crate::error::{Error, Result};
use crate::family::{Direction, FamilySpec};
use crate::maxcheck::{self, Decision};
use crate::qstruct::{Prechange, PruneState};

/// Which directions of change to monitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directions {
    Up,
    Down,
    Both,
}

impl Directions {
    pub fn list(self) -> &'static [Direction] {
        match self {
            Directions::Up => &[Direction::Up],
            Directions::Down => &[Direction::Down],
            Directions::Both => &[Direction::Up, Direction::Down],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub spec: FamilySpec,
    pub prechange: Prechange,
    pub directions: Directions,
    /// Detection threshold on the likelihood-ratio (`2Q`) scale.
    pub threshold: f64,
    /// Report the full statistic every `stat_every` steps; 0 disables.
    pub stat_every: u64,
    pub stop_on_detect: bool,
}

impl DetectorConfig {
    pub fn new(
        spec: FamilySpec,
        prechange: Prechange,
        directions: Directions,
        threshold: f64,
    ) -> Self {
        DetectorConfig {
            spec,
            prechange,
            directions,
            threshold,
            stat_every: 0,
            stop_on_detect: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if let Prechange::Known(theta0) = self.prechange {
            self.spec.check_theta(theta0)?;
            let grid = self.spec.default_probe_grid(theta0);
            if !self.spec.validate_monotone(theta0, &grid) {
                return Err(Error::InvalidConfig(format!(
                    "{}: likelihood-difference root ordering is not monotone at θ₀ = {theta0}",
                    self.spec.name()
                )));
            }
        }
        Ok(())
    }

    /// Observations needed before the statistic is defined.
    pub fn min_observations(&self) -> u64 {
        match self.prechange {
            Prechange::Known(_) => 1,
            Prechange::Unknown => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Stopping time `T`.
    pub t_detect: u64,
    /// Earliest point of the flagged interval `[τ_k, T]`.
    pub tau_low: u64,
    /// Statistic (`2Q` scale) that crossed the threshold.
    pub stat: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub t: u64,
    pub detection: Option<Detection>,
    pub stat: Option<f64>,
    pub curves_stored: u64,
    pub curves_evaluated: u64,
}

#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    states: Vec<PruneState>,
    t: u64,
    halted: bool,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let states = config
            .directions
            .list()
            .iter()
            .map(|&d| PruneState::new(d, config.prechange, config.spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(Detector {
            config,
            states,
            t: 0,
            halted: false,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn states(&self) -> &[PruneState] {
        &self.states
    }

    pub fn curves_stored(&self) -> u64 {
        self.states.iter().map(|s| s.len() as u64).sum()
    }

    /// Counters summed over directions.
    pub fn counters(&self) -> CounterSet {
        let mut c = CounterSet::default();
        for s in &self.states {
            c += *s.counters();
        }
        c
    }

    /// Processes one observation.
    pub fn step(&mut self, x: f64) -> Result<StepResult> {
        if self.halted {
            return Err(Error::Halted);
        }
        let t = self.t + 1;
        let g = self.config.spec.suff(x).map_err(|e| Error::AtObservation {
            t,
            source: Box::new(e),
        })?;
        self.t = t;

        let at = |e: Error| Error::AtObservation {
            t,
            source: Box::new(e),
        };
        let identifiable = t >= self.config.min_observations();
        let mut detection: Option<Detection> = None;
        let mut evaluated = 0;
        for state in &mut self.states {
            state.update(g);
            maxcheck::attach_bounds(state).map_err(at)?;
            state.counters.steps += 1;
            state.counters.curves_stored_sum += state.len() as u64;
            if !identifiable {
                continue;
            }
            let out = maxcheck::check(state, self.config.threshold).map_err(at)?;
            state.counters.curves_evaluated_sum += out.curves_evaluated;
            evaluated += out.curves_evaluated;
            if let Decision::Change { tau_low, stat, .. } = out.decision {
                if detection.is_none_or(|d| stat > d.stat) {
                    detection = Some(Detection {
                        t_detect: t,
                        tau_low,
                        stat,
                        direction: state.direction(),
                    });
                }
            }
        }

        let stat = if identifiable
            && self.config.stat_every > 0
            && t.is_multiple_of(self.config.stat_every)
        {
            Some(self.full_statistic().map_err(at)?)
        } else {
            None
        };

        if detection.is_some() && self.config.stop_on_detect {
            self.halted = true;
        }
        Ok(StepResult {
            t,
            detection,
            stat,
            curves_stored: self.curves_stored(),
            curves_evaluated: evaluated,
        })
    }

    fn full_statistic(&mut self) -> Result<f64> {
        let mut best = 0.0f64;
        for state in &mut self.states {
            best = best.max(state.q_full()?.0);
        }
        Ok(2.0 * best)
    }

    /// Likelihood-ratio statistic `LR_T`, maximised over every retained
    /// candidate and every monitored direction.
    pub fn statistic(&mut self) -> Result<f64> {
        let needed = self.config.min_observations();
        if self.t < needed {
            return Err(Error::InsufficientData {
                needed,
                have: self.t,
            });
        }
        self.full_statistic()
    }

    /// Per-direction full maximisation: `(direction, 2Q, argmax τ)`.
    pub fn statistic_by_direction(&mut self) -> Result<Vec<(Direction, f64, Option<u64>)>> {
        self.states
            .iter_mut()
            .map(|s| s.q_full().map(|(q, tau)| (s.direction(), 2.0 * q, tau)))
            .collect()
    }
}
