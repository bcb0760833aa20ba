//! Adaptive maxima check.
//!
//! For retained candidates `τ_1 < … < τ_n` the statistic for a change at any
//! `τ_i` with `i ≤ k` is bounded by
//!
//! ```text
//! max_{i ≤ k} m_{τ_i, T}  ≤  M_{τ_k} + m_{τ_k, T},    M_{τ_k} = Σ_{i<k} m_{τ_i, τ_{i+1}}.
//! ```
//!
//! `M` is stored with each record when it is appended, so the check walks the
//! records from the latest backwards and usually stops after one evaluation.

use crate::error::{Error, Result};
use crate::family::{Direction, FamilySpec, SuffStat};
use crate::qstruct::{Prechange, PruneState};

/// Pre-change hypothesis with the constant terms precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NullModel {
    Known { alpha0: f64, beta0: f64, g0: f64 },
    Unknown,
}

impl NullModel {
    pub(crate) fn new(spec: &FamilySpec, prechange: Prechange) -> Result<Self> {
        match prechange {
            Prechange::Known(theta0) => Ok(NullModel::Known {
                alpha0: spec.alpha(theta0)?,
                beta0: spec.beta(theta0)?,
                g0: spec.mean_suff(theta0)?,
            }),
            Prechange::Unknown => Ok(NullModel::Unknown),
        }
    }

    /// `μ(θ₀)` for a known pre-change parameter.
    pub(crate) fn null_mean(&self) -> Option<f64> {
        match *self {
            NullModel::Known { g0, .. } => Some(g0),
            NullModel::Unknown => None,
        }
    }

    /// `m_{τ_i, τ_j}` from the prefix up to `τ_i` and the segment
    /// `(τ_i, τ_j]`, together with the number of transcendental calls spent.
    pub(crate) fn eval(
        &self,
        spec: &FamilySpec,
        prefix_i: SuffStat,
        seg: SuffStat,
        direction: Direction,
    ) -> Result<(f64, u64)> {
        if seg.count == 0 {
            return Err(Error::InsufficientData {
                needed: prefix_i.count + 1,
                have: prefix_i.count,
            });
        }
        let n = seg.count as f64;
        let g_seg = seg.sum_g / n;
        let cost = |k: u64| if spec.is_transcendental() { k } else { 0 };
        match *self {
            NullModel::Known { alpha0, beta0, g0 } => {
                if !direction.beyond(g_seg, g0) {
                    return Ok((0.0, 0));
                }
                let gap = spec.conjugate(g_seg)? - (alpha0 * g_seg - beta0);
                Ok(((n * gap).max(0.0), cost(1)))
            }
            NullModel::Unknown => {
                if prefix_i.count == 0 {
                    return Ok((0.0, 0));
                }
                let n_pre = prefix_i.count as f64;
                let g_pre = prefix_i.sum_g / n_pre;
                if !direction.beyond(g_seg, g_pre) {
                    return Ok((0.0, 0));
                }
                let all = prefix_i.join(&seg);
                let n_all = all.count as f64;
                let g_all = all.sum_g / n_all;
                let m = n_pre * spec.conjugate(g_pre)? + n * spec.conjugate(g_seg)?
                    - n_all * spec.conjugate(g_all)?;
                Ok((m.max(0.0), cost(3)))
            }
        }
    }
}

/// Likelihood-ratio statistic (on the `Q` scale) for a change at `τ_i` with
/// data ending at `τ_j`, given prefix statistics `x_{1:τ_i}` and `x_{1:τ_j}`.
///
/// With `θ₀` known this is the directional segment statistic of
/// `(τ_i, τ_j]`. With `θ₀` unknown it is the gain of a two-segment fit over
/// the pooled fit, zero unless the segment mean lies strictly beyond the
/// prefix mean in the tested direction.
pub fn m_between(
    spec: &FamilySpec,
    prechange: Prechange,
    prefix_i: SuffStat,
    prefix_j: SuffStat,
    direction: Direction,
) -> Result<f64> {
    if prefix_j.count <= prefix_i.count {
        return Err(Error::InsufficientData {
            needed: prefix_i.count + 1,
            have: prefix_j.count,
        });
    }
    let null = NullModel::new(spec, prechange)?;
    null.eval(spec, prefix_i, prefix_i.until(&prefix_j), direction)
        .map(|(m, _)| m)
}

/// Sets `M` for a record appended by the latest update: the bound of the
/// previous record plus `m` of the segment between them. A record that opens
/// the list gets 0. Merged records keep their bound.
pub fn attach_bounds(state: &mut PruneState) -> Result<()> {
    if !state.take_pending_bound() {
        return Ok(());
    }
    let n = state.len();
    debug_assert!(n > 0);
    if n == 1 {
        state.set_raw_bound(0, 0.0);
        return Ok(());
    }
    let (m, calls) = state.null_model().eval(
        state.spec(),
        state.prefix(n - 2),
        state.segment_stat(n - 2),
        state.direction(),
    )?;
    state.counters.transcendental_calls += calls;
    let raw = state.raw_bound(n - 2) + m;
    state.set_raw_bound(n - 1, raw);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    NoChange,
    /// Change on `[tau_low, t_now]` with statistic `stat` on the `2Q` scale.
    Change {
        tau_low: u64,
        t_now: u64,
        stat: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOutcome {
    pub decision: Decision,
    pub curves_evaluated: u64,
    /// Last bound examined, on the `2Q` scale.
    pub bound_used: f64,
}

/// Decides whether `2·max_τ m_{τ,T} ≥ threshold`, evaluating as few curves as
/// the prefix bounds allow.
pub fn check(state: &mut PruneState, threshold: f64) -> Result<CheckOutcome> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let t_now = state.t();
    let mut evaluated = 0;
    let mut bound_used = 0.0;
    let mut suffix = SuffStat::EMPTY;
    for k in (0..state.len()).rev() {
        suffix = suffix.join(&state.segment_stat(k));
        let (m, calls) =
            state
                .null_model()
                .eval(state.spec(), state.prefix(k), suffix, state.direction())?;
        evaluated += 1;
        state.counters.transcendental_calls += calls;
        bound_used = 2.0 * (m + state.bound(k));
        if bound_used < threshold {
            break;
        }
        if 2.0 * m >= threshold {
            let tau_low = state.records().nth(k).map(|r| r.tau).unwrap_or_default();
            return Ok(CheckOutcome {
                decision: Decision::Change {
                    tau_low,
                    t_now,
                    stat: 2.0 * m,
                },
                curves_evaluated: evaluated,
                bound_used,
            });
        }
    }
    Ok(CheckOutcome {
        decision: Decision::NoChange,
        curves_evaluated: evaluated,
        bound_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feed(state: &mut PruneState, data: &[f64]) {
        for &g in data {
            state.update(g);
            attach_bounds(state).unwrap();
        }
    }

    #[test]
    fn m_between_examples() {
        let gm = FamilySpec::gauss_mean();
        let m = m_between(
            &gm,
            Prechange::Unknown,
            SuffStat::new(0.0, 2),
            SuffStat::new(2.0, 3),
            Direction::Up,
        )
        .unwrap();
        assert!((m - 4.0 / 3.0).abs() < 1e-12);

        let m = m_between(
            &gm,
            Prechange::Unknown,
            SuffStat::new(2.0, 1),
            SuffStat::new(2.0, 2),
            Direction::Up,
        )
        .unwrap();
        assert_eq!(m, 0.0);

        let p = FamilySpec::poisson();
        let m = m_between(
            &p,
            Prechange::Known(2.0),
            SuffStat::new(1.0, 1),
            SuffStat::new(7.0, 4),
            Direction::Up,
        )
        .unwrap();
        assert_eq!(m, 0.0);

        assert!(m_between(
            &p,
            Prechange::Unknown,
            SuffStat::new(1.0, 3),
            SuffStat::new(1.0, 3),
            Direction::Up
        )
        .is_err());
    }

    #[test]
    fn unknown_prefix_at_origin_is_zero() {
        let p = FamilySpec::poisson();
        let m = m_between(
            &p,
            Prechange::Unknown,
            SuffStat::EMPTY,
            SuffStat::new(9.0, 3),
            Direction::Up,
        )
        .unwrap();
        assert_eq!(m, 0.0);
    }

    #[test]
    fn bounds_attach_on_append() {
        let mut s = PruneState::new(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        )
        .unwrap();
        feed(&mut s, &[0.5]);
        assert_eq!(s.segments()[0].m_prefix_bound, 0.0);
        feed(&mut s, &[1.0]);
        let segs = s.segments();
        assert_eq!(segs.len(), 2);
        assert!((segs[1].m_prefix_bound - 0.125).abs() < 1e-15);
    }

    #[test]
    fn bound_zero_when_first_segment_at_null_mean() {
        let mut s =
            PruneState::new(Direction::Up, Prechange::Unknown, FamilySpec::gauss_mean()).unwrap();
        // The first segment always starts at the origin, where m is 0.
        feed(&mut s, &[1.0, 2.0]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.segments()[1].m_prefix_bound, 0.0);
    }

    #[test]
    fn check_examples() {
        let mut s = PruneState::new(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        )
        .unwrap();
        let out = check(&mut s, 8.0).unwrap();
        assert_eq!(out.decision, Decision::NoChange);
        assert_eq!(out.curves_evaluated, 0);

        feed(&mut s, &[0.7]);
        let out = check(&mut s, 1e9).unwrap();
        assert_eq!(out.decision, Decision::NoChange);
        assert_eq!(out.curves_evaluated, 1);

        let mut s = PruneState::new(
            Direction::Up,
            Prechange::Known(0.0),
            FamilySpec::gauss_mean(),
        )
        .unwrap();
        feed(&mut s, &[3.0, 3.0]);
        let out = check(&mut s, 8.0).unwrap();
        assert_eq!(
            out.decision,
            Decision::Change {
                tau_low: 0,
                t_now: 2,
                stat: 18.0
            }
        );
        assert!(check(&mut s, 0.0).is_err());
    }

    #[test]
    fn bounds_are_monotone_along_records() {
        let mut s =
            PruneState::new(Direction::Down, Prechange::Unknown, FamilySpec::poisson()).unwrap();
        let data = [3.0, 1.0, 0.0, 2.0, 0.0, 4.0, 1.0, 0.0, 0.0, 1.0, 5.0, 0.0];
        for &g in &data {
            s.update(g);
            attach_bounds(&mut s).unwrap();
            let segs = s.segments();
            for w in segs.windows(2) {
                assert!(w[0].m_prefix_bound >= 0.0);
                assert!(w[1].m_prefix_bound >= w[0].m_prefix_bound);
            }
        }
    }
}
