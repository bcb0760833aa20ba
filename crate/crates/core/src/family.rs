//! One-parameter exponential families.
//!
//! Every family is written as `f(x | θ) = exp[α(θ) γ(x) − β(θ) + δ(x)]`.
//! The base measure `δ(x)` cancels from every likelihood ratio and is not
//! represented. Besides `α`, `β` and `γ` each family supplies the mean map
//! `μ(θ) = β′(θ)/α′(θ)`, its inverse (the maximum likelihood estimate from a
//! segment mean of `γ`), and the conjugate
//!
//! ```text
//! A(ḡ) = sup_θ [α(θ) ḡ − β(θ)] = α(θ̂) ḡ − β(θ̂),   θ̂ = μ⁻¹(ḡ),
//! ```
//!
//! so that the maximised log-likelihood of a segment with `n` points and
//! mean statistic `ḡ` is `n·A(ḡ)` up to the cancelled base measure.
//!
//! Parametrisations:
//!
//! | family       | θ          | α(θ)            | β(θ)            | γ(x) | μ(θ) |
//! |--------------|------------|-----------------|-----------------|------|------|
//! | `GaussMean`  | mean       | θ               | θ²/2            | x    | θ    |
//! | `GaussVar`   | variance   | −1/(2θ)         | (log θ)/2       | x²   | θ    |
//! | `Poisson`    | rate       | log θ           | θ               | x    | θ    |
//! | `Binomial`   | success p  | log(θ/(1−θ))    | −N log(1−θ)     | x    | Nθ   |
//! | `Gamma`      | scale      | −1/θ            | k log θ         | x    | kθ   |

use crate::error::{Error, Result};

/// Direction of the change being tested for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// θ₁ > θ₀
    Up,
    /// θ₁ < θ₀
    Down,
}

impl Direction {
    /// True when `candidate` lies strictly on this direction's side of `reference`.
    #[inline]
    pub fn beyond(self, candidate: f64, reference: f64) -> bool {
        match self {
            Direction::Up => candidate > reference,
            Direction::Down => candidate < reference,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// Sufficient statistic of a segment: the sum of `γ(x_t)` and the number of
/// observations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SuffStat {
    pub sum_g: f64,
    pub count: u64,
}

impl SuffStat {
    pub const EMPTY: SuffStat = SuffStat {
        sum_g: 0.0,
        count: 0,
    };

    pub fn new(sum_g: f64, count: u64) -> Self {
        debug_assert!(count > 0 || sum_g == 0.0);
        SuffStat { sum_g, count }
    }

    /// Segment mean `ḡ`; `None` for an empty segment.
    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_g / self.count as f64)
    }

    /// Statistic of the segment `(self, later]` given two prefix snapshots.
    pub fn until(&self, later: &SuffStat) -> SuffStat {
        debug_assert!(later.count >= self.count);
        SuffStat {
            sum_g: later.sum_g - self.sum_g,
            count: later.count - self.count,
        }
    }

    /// Statistic of two adjacent segments taken together.
    pub fn join(&self, other: &SuffStat) -> SuffStat {
        SuffStat {
            sum_g: self.sum_g + other.sum_g,
            count: self.count + other.count,
        }
    }

    pub fn push(&mut self, g: f64) {
        self.sum_g += g;
        self.count += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    GaussMean,
    GaussVar,
    Poisson,
    Binomial,
    Gamma,
}

/// A concrete one-parameter exponential family.
///
/// Constructed through [`FamilySpec::new`] or the named constructors, which
/// enforce that the Binomial trial count and the Gamma shape are present and
/// valid exactly when needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    trials: u32,
    shape: f64,
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, trials: Option<u32>, shape: Option<f64>) -> Result<Self> {
        match (kind, trials, shape) {
            (FamilyKind::Binomial, Some(n), None) if n >= 1 => Ok(FamilySpec {
                kind,
                trials: n,
                shape: 0.0,
            }),
            (FamilyKind::Binomial, Some(n), None) => Err(Error::InvalidFamily(format!(
                "binomial needs at least one trial, got {n}"
            ))),
            (FamilyKind::Gamma, None, Some(k)) if k.is_finite() && k > 0.0 => Ok(FamilySpec {
                kind,
                trials: 0,
                shape: k,
            }),
            (FamilyKind::Gamma, None, Some(k)) => Err(Error::InvalidFamily(format!(
                "gamma shape must be positive and finite, got {k}"
            ))),
            (FamilyKind::Binomial, None, _) => Err(Error::InvalidFamily(
                "binomial requires a trial count".into(),
            )),
            (FamilyKind::Gamma, _, None) => {
                Err(Error::InvalidFamily("gamma requires a shape".into()))
            }
            (_, None, None) => Ok(FamilySpec {
                kind,
                trials: 0,
                shape: 0.0,
            }),
            (k, _, _) => Err(Error::InvalidFamily(format!(
                "{} does not take trial or shape parameters",
                FamilySpec {
                    kind: k,
                    trials: 0,
                    shape: 0.0
                }
                .name()
            ))),
        }
    }

    pub fn gauss_mean() -> Self {
        FamilySpec {
            kind: FamilyKind::GaussMean,
            trials: 0,
            shape: 0.0,
        }
    }

    pub fn gauss_var() -> Self {
        FamilySpec {
            kind: FamilyKind::GaussVar,
            trials: 0,
            shape: 0.0,
        }
    }

    pub fn poisson() -> Self {
        FamilySpec {
            kind: FamilyKind::Poisson,
            trials: 0,
            shape: 0.0,
        }
    }

    pub fn binomial(trials: u32) -> Result<Self> {
        Self::new(FamilyKind::Binomial, Some(trials), None)
    }

    pub fn gamma(shape: f64) -> Result<Self> {
        Self::new(FamilyKind::Gamma, None, Some(shape))
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// Trials per observation (Binomial only).
    pub fn trials(&self) -> Option<u32> {
        (self.kind == FamilyKind::Binomial).then_some(self.trials)
    }

    /// Fixed shape (Gamma only).
    pub fn shape(&self) -> Option<f64> {
        (self.kind == FamilyKind::Gamma).then_some(self.shape)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::GaussMean => "gauss-mean",
            FamilyKind::GaussVar => "gauss-var",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Binomial => "binomial",
            FamilyKind::Gamma => "gamma",
        }
    }

    /// Open interval of admissible parameter values.
    pub fn param_domain(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::GaussMean => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::Binomial => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn domain_str(&self) -> &'static str {
        match self.kind {
            FamilyKind::GaussMean => "(-inf, inf)",
            FamilyKind::Binomial => "(0, 1)",
            _ => "(0, inf)",
        }
    }

    pub fn in_domain(&self, theta: f64) -> bool {
        let (lo, hi) = self.param_domain();
        theta.is_finite() && theta > lo && theta < hi
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if self.in_domain(theta) {
            Ok(())
        } else {
            Err(Error::ParamDomain {
                family: self.name(),
                theta,
                domain: self.domain_str(),
            })
        }
    }

    /// Whether evaluating the conjugate involves a logarithm.
    pub fn is_transcendental(&self) -> bool {
        self.kind != FamilyKind::GaussMean
    }

    /// Natural-parameter map `α(θ)`.
    pub fn alpha(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::GaussMean => theta,
            FamilyKind::GaussVar => -0.5 / theta,
            FamilyKind::Poisson => theta.ln(),
            FamilyKind::Binomial => (theta / (1.0 - theta)).ln(),
            FamilyKind::Gamma => -1.0 / theta,
        })
    }

    /// Log-partition term `β(θ)`.
    pub fn beta(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::GaussMean => 0.5 * theta * theta,
            FamilyKind::GaussVar => 0.5 * theta.ln(),
            FamilyKind::Poisson => theta,
            FamilyKind::Binomial => -(self.trials as f64) * (-theta).ln_1p(),
            FamilyKind::Gamma => self.shape * theta.ln(),
        })
    }

    /// `α′(θ)`, used by the root-finding pruning variant.
    pub fn alpha_deriv(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::GaussMean => 1.0,
            FamilyKind::GaussVar => 0.5 / (theta * theta),
            FamilyKind::Poisson => 1.0 / theta,
            FamilyKind::Binomial => 1.0 / (theta * (1.0 - theta)),
            FamilyKind::Gamma => 1.0 / (theta * theta),
        })
    }

    /// `β′(θ)`.
    pub fn beta_deriv(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::GaussMean => theta,
            FamilyKind::GaussVar => 0.5 / theta,
            FamilyKind::Poisson => 1.0,
            FamilyKind::Binomial => self.trials as f64 / (1.0 - theta),
            FamilyKind::Gamma => self.shape / theta,
        })
    }

    /// Sufficient statistic `γ(x)`, validating that `x` is in the support.
    pub fn suff(&self, x: f64) -> Result<f64> {
        let ok = x.is_finite()
            && match self.kind {
                FamilyKind::GaussMean | FamilyKind::GaussVar => true,
                FamilyKind::Poisson => x >= 0.0 && x.fract() == 0.0,
                FamilyKind::Binomial => x >= 0.0 && x <= self.trials as f64 && x.fract() == 0.0,
                FamilyKind::Gamma => x > 0.0,
            };
        if !ok {
            return Err(Error::DataSupport {
                family: self.name(),
                x,
            });
        }
        Ok(match self.kind {
            FamilyKind::GaussVar => x * x,
            _ => x,
        })
    }

    /// Mean of `γ(x)` under θ: `μ(θ) = β′(θ)/α′(θ)`.
    pub fn mean_suff(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(match self.kind {
            FamilyKind::GaussMean | FamilyKind::GaussVar | FamilyKind::Poisson => theta,
            FamilyKind::Binomial => self.trials as f64 * theta,
            FamilyKind::Gamma => self.shape * theta,
        })
    }

    /// Closure of the range of `μ` over the parameter domain.
    pub fn mean_range(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::GaussMean => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::Binomial => (0.0, self.trials as f64),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn check_mean(&self, gbar: f64) -> Result<()> {
        let (lo, hi) = self.mean_range();
        if gbar.is_finite() && gbar >= lo && gbar <= hi {
            Ok(())
        } else {
            Err(Error::MeanRange {
                family: self.name(),
                gbar,
            })
        }
    }

    /// Maximum likelihood estimate `θ̂ = μ⁻¹(ḡ)`. Boundary means map to the
    /// corresponding boundary of the parameter domain.
    pub fn mle(&self, gbar: f64) -> Result<f64> {
        self.check_mean(gbar)?;
        Ok(match self.kind {
            FamilyKind::GaussMean | FamilyKind::GaussVar | FamilyKind::Poisson => gbar,
            FamilyKind::Binomial => gbar / self.trials as f64,
            FamilyKind::Gamma => gbar / self.shape,
        })
    }

    /// Conjugate `A(ḡ) = sup_θ [α(θ) ḡ − β(θ)]`.
    pub fn conjugate(&self, gbar: f64) -> Result<f64> {
        self.check_mean(gbar)?;
        Ok(match self.kind {
            FamilyKind::GaussMean => 0.5 * gbar * gbar,
            FamilyKind::GaussVar => {
                self.positive_mean(gbar)?;
                -0.5 * (1.0 + gbar.ln())
            }
            FamilyKind::Poisson => xlogx(gbar) - gbar,
            FamilyKind::Binomial => {
                let n = self.trials as f64;
                xlogx(gbar) + xlogx(n - gbar) - xlogx(n)
            }
            FamilyKind::Gamma => {
                self.positive_mean(gbar)?;
                let k = self.shape;
                -k - k * (gbar / k).ln()
            }
        })
    }

    fn positive_mean(&self, gbar: f64) -> Result<()> {
        if gbar > 0.0 {
            Ok(())
        } else {
            Err(Error::DegenerateSegment {
                family: self.name(),
                gbar,
            })
        }
    }

    /// Directional segment statistic with the pre-change parameter known:
    ///
    /// `sup_{θ₁ on the directional side of θ₀} n[(α(θ₁)−α(θ₀)) ḡ − (β(θ₁)−β(θ₀))]`.
    ///
    /// Zero whenever the segment mean is not strictly beyond `μ(θ₀)`.
    pub fn seg_lr_known(&self, theta0: f64, stat: SuffStat, direction: Direction) -> Result<f64> {
        let gbar = stat
            .mean()
            .ok_or(Error::InsufficientData { needed: 1, have: 0 })?;
        let g0 = self.mean_suff(theta0)?;
        if !direction.beyond(gbar, g0) {
            return Ok(0.0);
        }
        let a0 = self.alpha(theta0)?;
        let b0 = self.beta(theta0)?;
        let gap = self.conjugate(gbar)? - (a0 * gbar - b0);
        Ok((stat.count as f64 * gap).max(0.0))
    }

    /// Checks that `θ₁ ↦ (β(θ₁)−β(θ₀))/(α(θ₁)−α(θ₀))` is strictly increasing
    /// over `probe_grid`. Points equal to `θ₀` or outside the domain make the
    /// check fail.
    pub fn validate_monotone(&self, theta0: f64, probe_grid: &[f64]) -> bool {
        let (Ok(a0), Ok(b0)) = (self.alpha(theta0), self.beta(theta0)) else {
            return false;
        };
        let mut prev = f64::NEG_INFINITY;
        for &t in probe_grid {
            if t == theta0 {
                return false;
            }
            let (Ok(a), Ok(b)) = (self.alpha(t), self.beta(t)) else {
                return false;
            };
            let ratio = (b - b0) / (a - a0);
            if ratio.is_nan() || ratio <= prev {
                return false;
            }
            prev = ratio;
        }
        true
    }

    /// A small probe grid around `θ₀` used for start-up sanity checks.
    pub fn default_probe_grid(&self, theta0: f64) -> Vec<f64> {
        let factors = [0.25, 0.5, 0.9, 1.1, 2.0, 4.0];
        match self.kind {
            FamilyKind::GaussMean => [-3.0, -1.0, -0.1, 0.1, 1.0, 3.0]
                .iter()
                .map(|d| theta0 + d)
                .collect(),
            FamilyKind::Binomial => {
                // Logit-space offsets stay inside (0, 1).
                let logit = (theta0 / (1.0 - theta0)).ln();
                [-3.0, -1.0, -0.1, 0.1, 1.0, 3.0]
                    .iter()
                    .map(|d| 1.0 / (1.0 + (-(logit + d)).exp()))
                    .filter(|&t| t != theta0 && self.in_domain(t))
                    .collect()
            }
            _ => factors.iter().map(|f| theta0 * f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn families() -> Vec<FamilySpec> {
        vec![
            FamilySpec::gauss_mean(),
            FamilySpec::gauss_var(),
            FamilySpec::poisson(),
            FamilySpec::binomial(7).unwrap(),
            FamilySpec::gamma(2.5).unwrap(),
        ]
    }

    fn theta_grid(spec: &FamilySpec) -> Vec<f64> {
        match spec.kind() {
            FamilyKind::GaussMean => (-20..=20).map(|i| i as f64 * 0.25).collect(),
            FamilyKind::Binomial => (1..40).map(|i| i as f64 / 40.0).collect(),
            _ => (1..=40).map(|i| i as f64 * 0.2).collect(),
        }
    }

    #[test]
    fn alpha_examples() {
        let p = FamilySpec::poisson();
        assert!((p.alpha(2.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(FamilySpec::gauss_mean().alpha(0.0).unwrap(), 0.0);
        assert_eq!(FamilySpec::gamma(1.0).unwrap().alpha(1.0).unwrap(), -1.0);
        assert!(matches!(p.alpha(-1.0), Err(Error::ParamDomain { .. })));
    }

    #[test]
    fn beta_examples() {
        assert_eq!(FamilySpec::poisson().beta(1.0).unwrap(), 1.0);
        assert_eq!(FamilySpec::gauss_mean().beta(0.0).unwrap(), 0.0);
        let b = FamilySpec::binomial(1).unwrap().beta(0.5).unwrap();
        assert!((b - 0.5f64.ln().abs()).abs() < 1e-15);
        // Bernoulli(0.5) log-density of either outcome is log 0.5 = α·x − β
        // with α(0.5) = 0.
        assert!((-b - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn suff_examples() {
        assert_eq!(FamilySpec::gauss_var().suff(-3.0).unwrap(), 9.0);
        assert_eq!(FamilySpec::poisson().suff(0.0).unwrap(), 0.0);
        let b4 = FamilySpec::binomial(4).unwrap();
        assert!(matches!(b4.suff(5.0), Err(Error::DataSupport { .. })));
        assert!(FamilySpec::poisson().suff(1.5).is_err());
        assert!(FamilySpec::gamma(1.0).unwrap().suff(0.0).is_err());
        assert!(FamilySpec::gauss_mean().suff(f64::NAN).is_err());
    }

    #[test]
    fn mean_and_mle_examples() {
        assert_eq!(FamilySpec::poisson().mean_suff(3.0).unwrap(), 3.0);
        assert!((FamilySpec::binomial(10).unwrap().mean_suff(0.2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(FamilySpec::gamma(2.0).unwrap().mean_suff(1.5).unwrap(), 3.0);

        assert_eq!(FamilySpec::poisson().mle(2.0).unwrap(), 2.0);
        assert_eq!(FamilySpec::binomial(4).unwrap().mle(3.0).unwrap(), 0.75);
        assert_eq!(FamilySpec::gamma(0.5).unwrap().mle(3.0).unwrap(), 6.0);
        assert!(matches!(
            FamilySpec::binomial(4).unwrap().mle(4.5),
            Err(Error::MeanRange { .. })
        ));
        assert!(FamilySpec::poisson().mle(-0.1).is_err());
    }

    #[test]
    fn conjugate_examples() {
        assert_eq!(FamilySpec::gauss_mean().conjugate(1.0).unwrap(), 0.5);
        assert_eq!(FamilySpec::poisson().conjugate(0.0).unwrap(), 0.0);
        // Frozen from a bounded scalar maximisation of 0.75·α(θ) − β(θ).
        let b = FamilySpec::binomial(1).unwrap().conjugate(0.75).unwrap();
        assert!((b - (-0.5623351446188292)).abs() < 1e-12);
        assert_eq!(
            FamilySpec::binomial(3).unwrap().conjugate(3.0).unwrap(),
            0.0
        );
        assert!(matches!(
            FamilySpec::gamma(1.0).unwrap().conjugate(0.0),
            Err(Error::DegenerateSegment { .. })
        ));
        assert!(matches!(
            FamilySpec::gauss_var().conjugate(0.0),
            Err(Error::DegenerateSegment { .. })
        ));
    }

    #[test]
    fn seg_lr_known_examples() {
        let gm = FamilySpec::gauss_mean();
        let v = gm
            .seg_lr_known(0.0, SuffStat::new(2.0, 2), Direction::Up)
            .unwrap();
        assert!((v - 1.0).abs() < 1e-15);

        let p = FamilySpec::poisson();
        let v = p
            .seg_lr_known(1.0, SuffStat::new(4.0, 2), Direction::Up)
            .unwrap();
        assert!((v - 0.7725887222397811).abs() < 1e-12);
        let v = p
            .seg_lr_known(1.0, SuffStat::new(0.0, 3), Direction::Up)
            .unwrap();
        assert_eq!(v, 0.0);
        let v = p
            .seg_lr_known(1.0, SuffStat::new(0.0, 3), Direction::Down)
            .unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn validate_monotone_examples() {
        assert!(FamilySpec::poisson().validate_monotone(1.0, &[0.5, 2.0, 4.0]));
        assert!(FamilySpec::gauss_mean().validate_monotone(0.0, &[-1.0, 1.0, 2.0]));
        assert!(FamilySpec::gauss_var().validate_monotone(1.0, &[0.5, 2.0, 4.0]));
        assert!(!FamilySpec::poisson().validate_monotone(1.0, &[2.0, 0.5]));
        assert!(!FamilySpec::poisson().validate_monotone(1.0, &[1.0, 2.0]));
        for spec in families() {
            for theta0 in theta_grid(&spec).into_iter().step_by(7) {
                let grid = spec.default_probe_grid(theta0);
                assert!(spec.validate_monotone(theta0, &grid), "{spec:?} {theta0}");
            }
        }
    }

    #[test]
    fn construction_rules() {
        assert!(FamilySpec::binomial(0).is_err());
        assert!(FamilySpec::gamma(0.0).is_err());
        assert!(FamilySpec::gamma(f64::INFINITY).is_err());
        assert!(FamilySpec::new(FamilyKind::Poisson, None, Some(1.0)).is_err());
        assert!(FamilySpec::new(FamilyKind::GaussMean, Some(3), None).is_err());
        assert!(FamilySpec::new(FamilyKind::Gamma, None, None).is_err());
        assert_eq!(FamilySpec::binomial(3).unwrap().trials(), Some(3));
        assert_eq!(FamilySpec::poisson().trials(), None);
    }

    #[test]
    fn conjugate_matches_mle_plug_in() {
        for spec in families() {
            for theta in theta_grid(&spec) {
                let mu = spec.mean_suff(theta).unwrap();
                let lhs = spec.conjugate(mu).unwrap();
                let rhs = spec.alpha(theta).unwrap() * mu - spec.beta(theta).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0),
                    "{spec:?} θ={theta}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn conjugate_convex_and_divergence_nonnegative() {
        for spec in families() {
            let grid = theta_grid(&spec);
            let means: Vec<f64> = grid.iter().map(|&t| spec.mean_suff(t).unwrap()).collect();
            for w in means.windows(3) {
                let mid = 0.5 * (w[0] + w[2]);
                let a_mid = spec.conjugate(mid).unwrap();
                let chord = 0.5 * (spec.conjugate(w[0]).unwrap() + spec.conjugate(w[2]).unwrap());
                assert!(a_mid <= chord + 1e-12 * chord.abs().max(1.0), "{spec:?}");
            }
            for &theta0 in grid.iter().step_by(5) {
                let a0 = spec.alpha(theta0).unwrap();
                let b0 = spec.beta(theta0).unwrap();
                let g0 = spec.mean_suff(theta0).unwrap();
                let at_null = spec.conjugate(g0).unwrap() - a0 * g0 + b0;
                assert!(at_null.abs() < 1e-12 * (1.0 + spec.conjugate(g0).unwrap().abs()));
                for &g in &means {
                    let d = spec.conjugate(g).unwrap() - a0 * g + b0;
                    assert!(d >= -1e-12, "{spec:?} θ0={theta0} g={g}: {d}");
                    if (g - g0).abs() > 1e-9 {
                        assert!(d > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn mean_suff_matches_finite_difference() {
        for spec in families() {
            for theta in theta_grid(&spec) {
                let h = 1e-6 * theta.abs().max(1e-2);
                let (lo, hi) = (theta - h, theta + h);
                if !spec.in_domain(lo) || !spec.in_domain(hi) {
                    continue;
                }
                let db = (spec.beta(hi).unwrap() - spec.beta(lo).unwrap()) / (2.0 * h);
                let da = (spec.alpha(hi).unwrap() - spec.alpha(lo).unwrap()) / (2.0 * h);
                let mu = spec.mean_suff(theta).unwrap();
                assert!(
                    (db / da - mu).abs() <= 1e-6 * mu.abs().max(1.0),
                    "{spec:?} θ={theta}"
                );
                assert!((spec.alpha_deriv(theta).unwrap() - da).abs() <= 1e-5 * da.abs().max(1.0));
                assert!((spec.beta_deriv(theta).unwrap() - db).abs() <= 1e-5 * db.abs().max(1.0));
            }
        }
    }

    /// Dense-grid maximisation of the directional log-likelihood ratio.
    fn grid_seg_lr(spec: &FamilySpec, theta0: f64, stat: SuffStat, dir: Direction) -> f64 {
        let (lo, hi) = match (spec.kind(), dir) {
            (FamilyKind::GaussMean, Direction::Up) => (theta0, theta0 + 10.0),
            (FamilyKind::GaussMean, Direction::Down) => (theta0 - 10.0, theta0),
            (FamilyKind::Binomial, Direction::Up) => (theta0, 1.0),
            (FamilyKind::Binomial, Direction::Down) => (0.0, theta0),
            (_, Direction::Up) => (theta0, theta0 * 12.0),
            (_, Direction::Down) => (0.0, theta0),
        };
        let a0 = spec.alpha(theta0).unwrap();
        let b0 = spec.beta(theta0).unwrap();
        let n = stat.count as f64;
        let eval =
            |t: f64| (spec.alpha(t).unwrap() - a0) * stat.sum_g - (spec.beta(t).unwrap() - b0) * n;
        // 1,000-point grid, zoomed around the best point a few times.
        let (mut lo, mut hi) = (lo, hi);
        let mut best = 0.0f64;
        for _ in 0..5 {
            let step = (hi - lo) / 1000.0;
            let mut arg = lo;
            for i in 1..1000 {
                let t = lo + step * i as f64;
                let v = eval(t);
                if v > best {
                    best = v;
                    arg = t;
                }
            }
            lo = (arg - step).max(lo);
            hi = (arg + step).min(hi);
        }
        best
    }

    #[test]
    fn seg_lr_known_matches_grid_maximisation() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut unif = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        for spec in families() {
            for _ in 0..100 {
                let n = 1 + (unif() * 30.0) as u64;
                let (theta0, gbar) = match spec.kind() {
                    FamilyKind::GaussMean => (unif() * 2.0 - 1.0, unif() * 4.0 - 2.0),
                    FamilyKind::Binomial => {
                        let t0 = 0.2 + 0.6 * unif();
                        (t0, spec.mean_suff(0.1 + 0.8 * unif()).unwrap())
                    }
                    _ => {
                        let t0 = 0.5 + unif();
                        (t0, spec.mean_suff(t0 * (0.4 + 1.4 * unif())).unwrap())
                    }
                };
                let stat = SuffStat::new(gbar * n as f64, n);
                for dir in [Direction::Up, Direction::Down] {
                    let closed = spec.seg_lr_known(theta0, stat, dir).unwrap();
                    let grid = grid_seg_lr(&spec, theta0, stat, dir);
                    assert!(closed >= grid - 1e-9, "{spec:?} {closed} < {grid}");
                    assert!(
                        (closed - grid).abs() <= 1e-6,
                        "{spec:?} θ0={theta0} ḡ={gbar} n={n} {dir:?}: {closed} vs {grid}"
                    );
                }
            }
        }
    }
}
