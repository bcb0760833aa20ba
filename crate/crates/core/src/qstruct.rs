//! Pruned functional representation of the cost `Q_T` for one direction.
//!
//! Each retained record is a candidate changepoint `τ`. Consecutive records
//! delimit segments, and the last record opens the suffix segment `(τ_n, T]`.
//! A curve `τ` can only contribute to the pointwise maximum of `Q_T` if the
//! segment means of `γ` strictly increase along the list (strictly decrease
//! for a downward change). Comparing segment means is equivalent to
//! comparing the roots of the difference curves, so no root is ever computed
//! on the production path.
//!
//! Every update appends the singleton segment of the new observation and then
//! merges trailing segments while the ordering is violated. With the
//! pre-change parameter known, leading segments whose mean does not exceed
//! the null mean `μ(θ₀)` are also dropped; this is the `max{Q, 0}` of Page's
//! recursion. With the pre-change parameter unknown there is no such boundary.

use std::collections::VecDeque;

use crate::counters::CounterSet;
use crate::error::{Error, Result};
use crate::family::{Direction, FamilySpec, SuffStat};
use crate::maxcheck::NullModel;

/// Pre-change parameter specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prechange {
    Known(f64),
    Unknown,
}

/// A retained candidate changepoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRecord {
    /// Candidate change time: the distribution may differ from `tau + 1` on.
    pub tau: u64,
    /// Observations between the current origin and `tau`.
    pub cum_count: u64,
    /// `Σ γ(x_t)` between the current origin and `tau`.
    pub cum_sum: f64,
    /// `Σ γ(x_t)` over this record's own segment, accumulated directly so
    /// that short segments of small values do not lose precision to
    /// cancellation between prefix sums.
    pub seg_sum: f64,
    /// Running sum of segment statistics up to this record, before the
    /// offset of the first record is removed. See [`PruneState::bound`].
    pub m_prefix_bound: f64,
}

impl CurveRecord {
    fn prefix(&self) -> SuffStat {
        SuffStat {
            sum_g: self.cum_sum,
            count: self.cum_count,
        }
    }
}

/// Read-only view of one segment of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub tau: u64,
    pub stat: SuffStat,
    pub m_prefix_bound: f64,
}

/// Retained candidate set for one direction.
#[derive(Debug, Clone)]
pub struct PruneState {
    spec: FamilySpec,
    direction: Direction,
    prechange: Prechange,
    null: NullModel,
    records: VecDeque<CurveRecord>,
    /// Absolute totals at the current origin. The origin moves forward when a
    /// null-drop empties the record list (known pre-change only).
    base: SuffStat,
    /// Totals accumulated since the origin.
    run: SuffStat,
    bound_pending: bool,
    pub(crate) counters: CounterSet,
}

impl PruneState {
    pub fn new(direction: Direction, prechange: Prechange, spec: FamilySpec) -> Result<Self> {
        let null = NullModel::new(&spec, prechange)?;
        Ok(PruneState {
            spec,
            direction,
            prechange,
            null,
            records: VecDeque::new(),
            base: SuffStat::EMPTY,
            run: SuffStat::EMPTY,
            bound_pending: false,
            counters: CounterSet::default(),
        })
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn prechange(&self) -> Prechange {
        self.prechange
    }

    pub(crate) fn null_model(&self) -> &NullModel {
        &self.null
    }

    /// Number of observations seen.
    pub fn t(&self) -> u64 {
        self.base.count + self.run.count
    }

    /// Absolute totals `(T, Σ γ(x_t))`.
    pub fn totals(&self) -> SuffStat {
        SuffStat {
            sum_g: self.base.sum_g + self.run.sum_g,
            count: self.t(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl ExactSizeIterator<Item = &CurveRecord> {
        self.records.iter()
    }

    pub fn taus(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.tau).collect()
    }

    pub fn counters(&self) -> &CounterSet {
        &self.counters
    }

    /// Prefix statistic at record `i`, relative to the origin. With the
    /// pre-change parameter unknown the origin never moves, so this is the
    /// absolute prefix `x_{1:τ}`.
    pub(crate) fn prefix(&self, i: usize) -> SuffStat {
        self.records[i].prefix()
    }

    fn segment_end(&self, i: usize) -> SuffStat {
        self.records
            .get(i + 1)
            .map(CurveRecord::prefix)
            .unwrap_or(self.run)
    }

    pub(crate) fn segment_stat(&self, i: usize) -> SuffStat {
        SuffStat {
            sum_g: self.records[i].seg_sum,
            count: self.segment_end(i).count - self.records[i].cum_count,
        }
    }

    fn segment_mean(&self, i: usize) -> f64 {
        let s = self.segment_stat(i);
        s.sum_g / s.count as f64
    }

    /// Effective prefix bound `M_τ` of record `i`.
    pub fn bound(&self, i: usize) -> f64 {
        let m = self.records[i].m_prefix_bound - self.records[0].m_prefix_bound;
        m.max(0.0)
    }

    /// Segments in `τ` order; the last entry is the suffix `(τ_n, T]`.
    pub fn segments(&self) -> Vec<Segment> {
        (0..self.records.len())
            .map(|i| Segment {
                tau: self.records[i].tau,
                stat: self.segment_stat(i),
                m_prefix_bound: if self.records[i].m_prefix_bound.is_nan() {
                    f64::NAN
                } else {
                    self.bound(i)
                },
            })
            .collect()
    }

    /// Absorbs `g = γ(x_T)`.
    pub fn update(&mut self, g: f64) {
        let tau = self.t();
        let before = self.run;
        self.run.push(g);
        self.records.push_back(CurveRecord {
            tau,
            cum_count: before.count,
            cum_sum: before.sum_g,
            seg_sum: g,
            m_prefix_bound: f64::NAN,
        });
        self.bound_pending = true;

        // Ties merge: the earlier candidate survives.
        while self.records.len() >= 2 {
            let n = self.records.len();
            let last = self.segment_mean(n - 1);
            let prev = self.segment_mean(n - 2);
            if self.direction.beyond(last, prev) {
                break;
            }
            let merged = self.records.pop_back().map_or(0.0, |r| r.seg_sum);
            self.records[n - 2].seg_sum += merged;
            self.bound_pending = false;
            self.counters.merges += 1;
        }

        if let Some(g0) = self.null.null_mean() {
            while !self.records.is_empty() && !self.direction.beyond(self.segment_mean(0), g0) {
                self.records.pop_front();
                self.counters.merges += 1;
            }
            if self.records.is_empty() {
                self.base.sum_g += self.run.sum_g;
                self.base.count += self.run.count;
                self.run = SuffStat::EMPTY;
                self.bound_pending = false;
            }
        }

        debug_assert!(self.invariants_hold(), "pruning invariants violated");
    }

    /// True when the last record was appended by the latest update and still
    /// needs its prefix bound.
    pub(crate) fn take_pending_bound(&mut self) -> bool {
        std::mem::take(&mut self.bound_pending)
    }

    pub(crate) fn set_raw_bound(&mut self, i: usize, value: f64) {
        self.records[i].m_prefix_bound = value;
    }

    pub(crate) fn raw_bound(&self, i: usize) -> f64 {
        self.records[i].m_prefix_bound
    }

    /// Checks strict monotonicity of segment means, the null boundary, and
    /// telescoping of the counts.
    pub fn invariants_hold(&self) -> bool {
        let n = self.records.len();
        if n == 0 {
            return true;
        }
        let mut count = self.records[0].cum_count;
        for i in 0..n {
            let s = self.segment_stat(i);
            if s.count == 0 {
                return false;
            }
            count += s.count;
            if i > 0 {
                if self.records[i].tau <= self.records[i - 1].tau {
                    return false;
                }
                if !self
                    .direction
                    .beyond(self.segment_mean(i), self.segment_mean(i - 1))
                {
                    return false;
                }
            }
        }
        if let Some(g0) = self.null.null_mean() {
            if !self.direction.beyond(self.segment_mean(0), g0) {
                return false;
            }
        }
        count == self.run.count && self.base.count + self.run.count == self.t()
    }

    /// Full maximisation over every retained record, bypassing the adaptive
    /// check. Returns the maximal `m_{τ,T}` (on the `Q` scale, not `2Q`) and
    /// its earliest maximiser, or `(0, None)` when no record has positive
    /// evidence.
    pub fn q_full(&mut self) -> Result<(f64, Option<u64>)> {
        let mut best = 0.0;
        let mut arg = None;
        let mut suffix = SuffStat::EMPTY;
        // Walk backwards so suffix sums accumulate segment by segment; ties
        // keep the earliest record.
        for i in (0..self.records.len()).rev() {
            suffix = suffix.join(&self.segment_stat(i));
            let (m, calls) = self
                .null
                .eval(&self.spec, self.prefix(i), suffix, self.direction)?;
            self.counters.full_evaluations += 1;
            self.counters.transcendental_calls += calls;
            if m > 0.0 && m >= best {
                best = m;
                arg = Some(self.records[i].tau);
            }
        }
        Ok((best, arg))
    }
}

#[derive(Debug, Clone, Copy)]
struct RootRecord {
    tau: u64,
    count: u64,
    seg_sum: f64,
    root: f64,
}

/// Alternative pruning that orders candidates by numerically computed roots
/// of the difference curves, as in the original quadratic-difference
/// formulation. Known pre-change parameter only. Exists to compare costs
/// against mean-based pruning; it retains the same candidates.
#[derive(Debug, Clone)]
pub struct RootPruneState {
    spec: FamilySpec,
    direction: Direction,
    theta0: f64,
    alpha0: f64,
    beta0: f64,
    g0: f64,
    tolerance: f64,
    records: VecDeque<RootRecord>,
    run: SuffStat,
    base_count: u64,
    counters: CounterSet,
}

impl RootPruneState {
    pub fn new(
        direction: Direction,
        spec: FamilySpec,
        theta0: f64,
        tolerance: f64,
    ) -> Result<Self> {
        spec.check_theta(theta0)?;
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "root tolerance must be positive, got {tolerance}"
            )));
        }
        Ok(RootPruneState {
            spec,
            direction,
            theta0,
            alpha0: spec.alpha(theta0)?,
            beta0: spec.beta(theta0)?,
            g0: spec.mean_suff(theta0)?,
            tolerance,
            records: VecDeque::new(),
            run: SuffStat::EMPTY,
            base_count: 0,
            counters: CounterSet::default(),
        })
    }

    pub fn taus(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.tau).collect()
    }

    pub fn roots(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.root).collect()
    }

    pub fn counters(&self) -> &CounterSet {
        &self.counters
    }

    fn segment(&self, i: usize) -> SuffStat {
        let end = self.records.get(i + 1).map_or(self.run.count, |r| r.count);
        SuffStat {
            sum_g: self.records[i].seg_sum,
            count: end - self.records[i].count,
        }
    }

    pub fn update(&mut self, g: f64) -> Result<()> {
        let tau = self.base_count + self.run.count;
        let count = self.run.count;
        self.run.push(g);
        let root = self.largest_root(SuffStat::new(g, 1))?;
        self.records.push_back(RootRecord {
            tau,
            count,
            seg_sum: g,
            root,
        });

        while self.records.len() >= 2 {
            let n = self.records.len();
            if self
                .direction
                .beyond(self.records[n - 1].root, self.records[n - 2].root)
            {
                break;
            }
            let popped = self.records.pop_back().map_or(0.0, |r| r.seg_sum);
            self.records[n - 2].seg_sum += popped;
            self.counters.merges += 1;
            let merged = self.segment(n - 2);
            self.records[n - 2].root = self.largest_root(merged)?;
        }

        while let Some(first) = self.records.front() {
            if self.direction.beyond(first.root, self.theta0) {
                break;
            }
            self.records.pop_front();
            self.counters.merges += 1;
        }
        if self.records.is_empty() {
            self.base_count += self.run.count;
            self.run = SuffStat::EMPTY;
        }
        Ok(())
    }

    /// The root `θ ≠ θ₀` of the segment's difference curve on the directional
    /// side, or `θ₀` when the curve is non-positive there. When the curve
    /// stays positive up to the edge of the domain the edge is returned.
    pub fn largest_root(&mut self, stat: SuffStat) -> Result<f64> {
        let gbar = stat.sum_g / stat.count as f64;
        if !self.direction.beyond(gbar, self.g0) {
            return Ok(self.theta0);
        }
        let (lo_dom, hi_dom) = self.spec.param_domain();
        let edge = match self.direction {
            Direction::Up => hi_dom,
            Direction::Down => lo_dom,
        };
        let peak = self.spec.mle(gbar)?;
        if !self.spec.in_domain(peak) {
            return Ok(edge);
        }
        // The root depends on the segment only through its mean, so the
        // per-observation curve is used and equal means give equal roots.
        let calls = if self.spec.is_transcendental() { 2 } else { 0 };
        let spec = self.spec;
        let (a0, b0) = (self.alpha0, self.beta0);
        let curve =
            |t: f64| -> Result<f64> { Ok((spec.alpha(t)? - a0) * gbar - (spec.beta(t)? - b0)) };

        // Expand away from the peak until the curve turns negative.
        let mut inner = peak;
        let mut outer = peak;
        let mut found = false;
        let mut step = (peak - self.theta0).abs().max(1e-3);
        for _ in 0..200 {
            let next = match (self.direction, edge.is_finite()) {
                (Direction::Up, false) => outer + step,
                (Direction::Down, false) => outer - step,
                (_, true) => 0.5 * (outer + edge),
            };
            if next == outer || next == edge {
                break;
            }
            self.counters.transcendental_calls += calls;
            if curve(next)? < 0.0 {
                outer = next;
                found = true;
                break;
            }
            inner = next;
            outer = next;
            step *= 2.0;
        }
        if !found {
            return Ok(edge);
        }

        // Safeguarded Newton on the bracket [inner, outer]; curve(inner) > 0.
        let mut x = 0.5 * (inner + outer);
        for _ in 0..200 {
            self.counters.transcendental_calls += calls;
            let c = curve(x)?;
            if c.abs() <= self.tolerance {
                return Ok(x);
            }
            if c > 0.0 {
                inner = x;
            } else {
                outer = x;
            }
            let slope = spec.alpha_deriv(x)? * gbar - spec.beta_deriv(x)?;
            let newton = x - c / slope;
            let (a, b) = if inner < outer {
                (inner, outer)
            } else {
                (outer, inner)
            };
            x = if newton > a && newton < b && newton.is_finite() {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
                return Ok(x);
            }
        }
        Err(Error::Numeric(format!(
            "root search did not converge for segment mean {gbar}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(dir: Direction, pre: Prechange, spec: FamilySpec) -> PruneState {
        PruneState::new(dir, pre, spec).unwrap()
    }

    #[test]
    fn new_state_examples() {
        let s = state(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        );
        assert!(s.is_empty());
        let s = state(Direction::Down, Prechange::Unknown, FamilySpec::poisson());
        assert_eq!(s.len(), 0);
        assert!(matches!(
            PruneState::new(Direction::Up, Prechange::Known(-1.0), FamilySpec::poisson()),
            Err(Error::ParamDomain { .. })
        ));
    }

    #[test]
    fn update_merges_and_null_drops() {
        let mut s = state(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        );
        s.update(1.0);
        s.update(0.5);
        let segs = s.segments();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].tau, 0);
        assert_eq!(segs[0].stat, SuffStat::new(1.5, 2));
        let (q, tau) = s.q_full().unwrap();
        assert!((q - 0.5625).abs() < 1e-15);
        assert_eq!(tau, Some(0));

        s.update(-2.0);
        assert!(s.is_empty());
        assert_eq!(s.q_full().unwrap(), (0.0, None));
        assert_eq!(s.t(), 3);
        // One cascade merge at t = 2, one at t = 3, then the null-drop.
        assert_eq!(s.counters().merges, 3);
    }

    #[test]
    fn increasing_means_keep_both_records() {
        let mut s = state(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        );
        s.update(0.5);
        s.update(1.0);
        assert_eq!(s.taus(), vec![0, 1]);
        let segs = s.segments();
        assert_eq!(segs[0].stat, SuffStat::new(0.5, 1));
        assert_eq!(segs[1].stat, SuffStat::new(1.0, 1));
    }

    #[test]
    fn unknown_prechange_q_full() {
        let mut s = state(Direction::Up, Prechange::Unknown, FamilySpec::gauss_mean());
        for g in [0.0, 0.0, 2.0] {
            s.update(g);
        }
        let (q, tau) = s.q_full().unwrap();
        assert!((q - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(tau, Some(2));
    }

    #[test]
    fn down_direction_mirrors_up() {
        let data = [0.3, -1.2, 0.8, -0.4, -2.0, 1.1, 0.0, -0.7];
        let mut up = state(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        );
        let mut down = state(
            Direction::Down,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        );
        for &x in &data {
            up.update(-x);
            down.update(x);
            assert_eq!(up.taus(), down.taus());
            let (qu, _) = up.q_full().unwrap();
            let (qd, _) = down.q_full().unwrap();
            assert!((qu - qd).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_state_views() {
        let mut s = state(Direction::Up, Prechange::Unknown, FamilySpec::poisson());
        assert!(s.segments().is_empty());
        assert_eq!(s.q_full().unwrap(), (0.0, None));
    }

    #[test]
    fn root_examples() {
        let mut r =
            RootPruneState::new(Direction::Up, FamilySpec::gauss_mean(), 0.0, 1e-13).unwrap();
        let root = r.largest_root(SuffStat::new(1.0, 1)).unwrap();
        assert!((root - 2.0).abs() < 1e-12);

        // Frozen from a bracketing root solve of 4 log θ − 2(θ − 1) = 0.
        let mut r = RootPruneState::new(Direction::Up, FamilySpec::poisson(), 1.0, 1e-13).unwrap();
        let root = r.largest_root(SuffStat::new(4.0, 2)).unwrap();
        assert!((root - 3.512862417252326).abs() < 1e-10, "{root}");

        let mut r =
            RootPruneState::new(Direction::Down, FamilySpec::poisson(), 1.0, 1e-13).unwrap();
        assert_eq!(r.largest_root(SuffStat::new(0.0, 3)).unwrap(), 0.0);
        assert_eq!(r.largest_root(SuffStat::new(5.0, 3)).unwrap(), 1.0);
    }

    #[test]
    fn root_pruning_rejects_bad_input() {
        assert!(RootPruneState::new(Direction::Up, FamilySpec::poisson(), 0.0, 1e-9).is_err());
        assert!(RootPruneState::new(Direction::Up, FamilySpec::poisson(), 1.0, 0.0).is_err());
    }
}
