//! Exhaustive reference computations.
//!
//! Nothing here touches the pruned state or the prefix bounds: every
//! candidate changepoint is scored from raw prefix sums. Cost is `O(T)` per
//! call, so these are for tests and small experiments only.

use crate::error::{Error, Result};
use crate::family::{Direction, FamilySpec};
use crate::qstruct::Prechange;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Maximal statistic on the `Q` scale.
    pub q: f64,
    /// Earliest maximiser; `None` when `q = 0`.
    pub tau_hat: Option<u64>,
    /// `(τ, m_{τ,T})` for every admissible `τ`.
    pub per_tau: Vec<(u64, f64)>,
}

/// Forward prefix sums and backward suffix sums of `γ(x_t)`. Suffixes are
/// accumulated from the end rather than taken as prefix differences, so short
/// tails of small values keep full relative precision.
fn running_sums(spec: &FamilySpec, data: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let g: Vec<f64> = data.iter().map(|&x| spec.suff(x)).collect::<Result<_>>()?;
    let mut prefix = Vec::with_capacity(g.len() + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for &v in &g {
        acc += v;
        prefix.push(acc);
    }
    let mut suffix = vec![0.0; g.len() + 1];
    for t in (0..g.len()).rev() {
        suffix[t] = suffix[t + 1] + g[t];
    }
    Ok((prefix, suffix))
}

/// Statistic for a change after `tau` with data `x_{1:T}`.
fn score(
    spec: &FamilySpec,
    prechange: Prechange,
    direction: Direction,
    prefix: &[f64],
    suffix: &[f64],
    tau: usize,
) -> Result<f64> {
    let t_end = prefix.len() - 1;
    let n_seg = (t_end - tau) as f64;
    let g_seg = suffix[tau] / n_seg;
    match prechange {
        Prechange::Known(theta0) => {
            let g0 = spec.mean_suff(theta0)?;
            if !direction.beyond(g_seg, g0) {
                return Ok(0.0);
            }
            // n [A(ḡ) − α(θ₀) ḡ + β(θ₀)]
            let a0 = spec.alpha(theta0)?;
            let b0 = spec.beta(theta0)?;
            Ok((n_seg * (spec.conjugate(g_seg)? - a0 * g_seg + b0)).max(0.0))
        }
        Prechange::Unknown => {
            let n_pre = tau as f64;
            let g_pre = prefix[tau] / n_pre;
            if !direction.beyond(g_seg, g_pre) {
                return Ok(0.0);
            }
            let n_all = t_end as f64;
            let g_all = prefix[t_end] / n_all;
            let two_fit = n_pre * spec.conjugate(g_pre)? + n_seg * spec.conjugate(g_seg)?;
            Ok((two_fit - n_all * spec.conjugate(g_all)?).max(0.0))
        }
    }
}

/// Exhaustive maximisation over every candidate `τ ∈ {0..T−1}`
/// (`{1..T−1}` with the pre-change parameter unknown).
pub fn naive_q(
    spec: &FamilySpec,
    prechange: Prechange,
    direction: Direction,
    data: &[f64],
) -> Result<OracleResult> {
    if data.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    let (prefix, suffix) = running_sums(spec, data)?;
    let first = match prechange {
        Prechange::Known(theta0) => {
            spec.check_theta(theta0)?;
            0
        }
        Prechange::Unknown => 1,
    };
    let mut per_tau = Vec::with_capacity(data.len());
    let mut q = 0.0;
    let mut tau_hat = None;
    for tau in first..data.len() {
        let m = score(spec, prechange, direction, &prefix, &suffix, tau)?;
        per_tau.push((tau as u64, m));
        if m > q {
            q = m;
            tau_hat = Some(tau as u64);
        }
    }
    Ok(OracleResult {
        q,
        tau_hat,
        per_tau,
    })
}

/// [`naive_q`] for every prefix `x_{1:t}`, `t = 1..=T`.
pub fn naive_q_path(
    spec: &FamilySpec,
    prechange: Prechange,
    direction: Direction,
    data: &[f64],
) -> Result<Vec<OracleResult>> {
    (1..=data.len())
        .map(|t| naive_q(spec, prechange, direction, &data[..t]))
        .collect()
}

/// Restricted maximisation over `τ` and a finite grid of post-change
/// parameters with `θ₀` known, evaluating the likelihood-difference sum
/// `[α(θ₁) − α(θ₀)] S − [β(θ₁) − β(θ₀)] n` directly. A lower bound on
/// [`naive_q`] that converges to it as the grid is refined.
pub fn grid_q(
    spec: &FamilySpec,
    theta0: f64,
    direction: Direction,
    data: &[f64],
    theta_grid: &[f64],
) -> Result<f64> {
    let (_, suffix) = running_sums(spec, data)?;
    let a0 = spec.alpha(theta0)?;
    let b0 = spec.beta(theta0)?;
    let t_end = data.len();
    let mut coeffs = Vec::with_capacity(theta_grid.len());
    for &theta in theta_grid {
        if !direction.beyond(theta, theta0) {
            return Err(Error::InvalidConfig(format!(
                "grid point {theta} is not on the {} side of θ₀ = {theta0}",
                direction.as_str()
            )));
        }
        coeffs.push((spec.alpha(theta)? - a0, spec.beta(theta)? - b0));
    }
    let mut best = 0.0f64;
    for (tau, &s) in suffix[..t_end].iter().enumerate() {
        let n = (t_end - tau) as f64;
        for &(da, db) in &coeffs {
            best = best.max(da * s - db * n);
        }
    }
    Ok(best)
}
