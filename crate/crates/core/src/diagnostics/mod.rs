//! Deciders for the convergence conditions on predictive distributions.
//!
//! Each check produces [`ConvergenceCurve`]s (a statistic against an index
//! grid, with Monte Carlo standard errors from path batching) and a
//! three-valued [`Decision`]. The decision is a pure function of the curves
//! and the [`Thresholds`], so stored curves can be re-judged later.

mod checks;

use serde::{Deserialize, Serialize};

pub use checks::*;

use crate::error::{invalid, Error, Result};

/// Decision thresholds. Margins are in standard-error multiples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// A probability statistic below this (plus margin) counts as vanishing.
    pub fail: f64,
    /// A probability statistic above this (minus margin) counts as persistent.
    pub floor: f64,
    pub se_multiple: f64,
    /// Cauchy gap `ε`.
    pub epsilon: f64,
    /// Excursion size `δ` for the almost-sure check.
    pub delta: f64,
    /// Absolute slack for statistics that should reach zero.
    pub tolerance: f64,
    /// Number of path batches used for standard errors.
    pub batches: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { fail: 0.05, floor: 0.20, se_multiple: 3.0, epsilon: 0.1, delta: 0.4, tolerance: 0.01, batches: 30 }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let probs = [self.fail, self.floor];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || self.fail >= self.floor {
            return invalid("thresholds need 0 <= fail < floor <= 1");
        }
        if [self.se_multiple, self.epsilon, self.delta, self.tolerance].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return invalid("threshold margins must be finite and non-negative");
        }
        if self.batches < 30 {
            return invalid(format!("at least 30 batches are required, got {}", self.batches));
        }
        Ok(())
    }

    /// `default` when every field has its default value, else `custom`.
    pub fn profile(&self) -> &'static str {
        if *self == Thresholds::default() {
            "default"
        } else {
            "custom"
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Converges,
    Diverges,
    Inconclusive,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Converges => "converges",
            Decision::Diverges => "diverges",
            Decision::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "converges" => Ok(Decision::Converges),
            "diverges" => Ok(Decision::Diverges),
            "inconclusive" => Ok(Decision::Inconclusive),
            _ => Err(Error::InvalidArgument(format!("unknown decision '{s}'"))),
        }
    }
}

/// The property a verdict is about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Convergence in probability of `αₙ(f)`.
    Star,
    /// Almost-sure convergence of `αₙ(f)`.
    As,
    AsympExch,
    /// Summability of expected absolute predictive drift.
    Qmc,
    Wlln,
    LaggedWlln,
    Stable,
    SecondMoment,
    Marginal,
    Increment,
}

impl Condition {
    pub const ALL: [Condition; 10] = [
        Condition::Star,
        Condition::As,
        Condition::AsympExch,
        Condition::Qmc,
        Condition::Wlln,
        Condition::LaggedWlln,
        Condition::Stable,
        Condition::SecondMoment,
        Condition::Marginal,
        Condition::Increment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Star => "star",
            Condition::As => "as",
            Condition::AsympExch => "asymp_exch",
            Condition::Qmc => "qmc",
            Condition::Wlln => "wlln",
            Condition::LaggedWlln => "lagged_wlln",
            Condition::Stable => "stable",
            Condition::SecondMoment => "second_moment",
            Condition::Marginal => "marginal",
            Condition::Increment => "increment",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown condition '{s}'")))
    }
}

/// Statistic tags used by the decision rules.
pub mod tag {
    pub const P_EXCEED: &str = "p_exceed";
    pub const EXCURSION: &str = "excursion_fraction";
    pub const PARTIAL_SUM: &str = "partial_sum";
    pub const MEDIAN_RESIDUAL: &str = "median_residual";
    pub const MEDIAN_GAP: &str = "median_gap";
    pub const MEAN: &str = "mean";
    pub const STATISTIC: &str = "statistic";
    pub const FLOOR: &str = "floor";
    pub const EXCESS: &str = "excess";
    pub const LIMIT_DISTANCE: &str = "limit_distance";
    pub const ABS_ERROR: &str = "abs_error";
    pub const GAP: &str = "gap";
    pub const ALPHA_SQ: &str = "alpha_sq";
    pub const BETA_SQ: &str = "beta_sq";
    pub const MU_SQ: &str = "mu_sq";
    pub const MEAN_F_SQ: &str = "mean_f_sq";
    pub const PROB: &str = "prob";
    pub const BOUND_GAP: &str = "bound_gap";
}

/// A statistic against an increasing index grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub f_id: String,
    pub statistic: String,
    pub grid: Vec<u64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub method: String,
}

impl ConvergenceCurve {
    pub fn new(f_id: &str, statistic: &str, grid: Vec<u64>, values: Vec<f64>, stderr: Vec<f64>, method: &str) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
            return invalid(format!("{statistic}: grid must be non-empty and strictly increasing"));
        }
        if values.len() != grid.len() || stderr.len() != grid.len() {
            return invalid(format!("{statistic}: grid, values and stderr lengths differ"));
        }
        if stderr.iter().any(|s| s.is_nan() || *s < 0.0) {
            return invalid(format!("{statistic}: standard errors must be non-negative"));
        }
        Ok(ConvergenceCurve { f_id: f_id.into(), statistic: statistic.into(), grid, values, stderr, method: method.into() })
    }

    fn last(&self, back: usize) -> Option<(f64, f64)> {
        let i = self.values.len().checked_sub(back + 1)?;
        Some((self.values[i], self.stderr[i]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticVerdict {
    pub condition: Condition,
    pub f_id: String,
    pub decision: Decision,
    pub evidence: Vec<ConvergenceCurve>,
    pub thresholds: Thresholds,
}

impl DiagnosticVerdict {
    /// Judge `evidence` under `thresholds`.
    pub fn judge(condition: Condition, f_id: &str, evidence: Vec<ConvergenceCurve>, thresholds: &Thresholds) -> Self {
        let decision = decide(condition, &evidence, thresholds);
        DiagnosticVerdict { condition, f_id: f_id.into(), decision, evidence, thresholds: thresholds.clone() }
    }

    pub fn curve(&self, statistic: &str) -> Option<&ConvergenceCurve> {
        self.evidence.iter().find(|c| c.statistic == statistic)
    }
}

/// The decision rule for `condition` applied to `evidence`.
pub fn decide(condition: Condition, evidence: &[ConvergenceCurve], t: &Thresholds) -> Decision {
    let find = |s: &str| evidence.iter().find(|c| c.statistic == s);
    let with_prefix = |s: &str| evidence.iter().filter(move |c| c.statistic.starts_with(s)).collect::<Vec<_>>();
    match condition {
        Condition::Star | Condition::LaggedWlln => find(tag::P_EXCEED).map_or(Decision::Inconclusive, |c| probability_rule(c, t)),
        Condition::As => find(tag::EXCURSION).map_or(Decision::Inconclusive, |c| probability_rule(c, t)),
        Condition::Wlln => find(tag::MEDIAN_RESIDUAL).map_or(Decision::Inconclusive, |c| to_zero_rule(c, t)),
        Condition::AsympExch => find(tag::EXCESS).map_or(Decision::Inconclusive, |c| to_zero_rule(c, t)),
        Condition::SecondMoment => find(tag::GAP).map_or(Decision::Inconclusive, |c| to_zero_rule(c, t)),
        Condition::Qmc => find(tag::PARTIAL_SUM).map_or(Decision::Inconclusive, |c| partial_sum_rule(c, t)),
        Condition::Stable => combine(with_prefix(tag::ABS_ERROR).into_iter().map(|c| to_zero_rule(c, t))),
        Condition::Marginal => combine(with_prefix(tag::PROB).into_iter().map(|c| stabilise_rule(c, t))),
        Condition::Increment => {
            let base = find(tag::P_EXCEED).map_or(Decision::Inconclusive, |c| probability_rule(c, t));
            match find(tag::BOUND_GAP) {
                Some(b) if base == Decision::Converges && !bound_holds(b, t) => Decision::Inconclusive,
                _ => base,
            }
        }
    }
}

/// All converge ⇒ converges; any diverges ⇒ diverges; otherwise inconclusive.
fn combine(ds: impl Iterator<Item = Decision>) -> Decision {
    let ds: Vec<Decision> = ds.collect();
    if ds.is_empty() {
        Decision::Inconclusive
    } else if ds.iter().all(|d| *d == Decision::Converges) {
        Decision::Converges
    } else if ds.contains(&Decision::Diverges) {
        Decision::Diverges
    } else {
        Decision::Inconclusive
    }
}

/// Vanishing probability: non-increasing in trend and below `fail` with
/// margin at the last index. Persistent: above `floor` with margin at the
/// last two indices.
fn probability_rule(c: &ConvergenceCurve, t: &Thresholds) -> Decision {
    let k = t.se_multiple;
    let (last, se) = c.last(0).expect("non-empty curve");
    let trend = last <= c.values[0] + k * c.stderr[0];
    if trend && last + k * se < t.fail {
        return Decision::Converges;
    }
    let tail = c.values.len().min(2);
    if (0..tail).all(|b| c.last(b).is_some_and(|(v, s)| v - k * s > t.floor)) {
        return Decision::Diverges;
    }
    Decision::Inconclusive
}

/// Statistic tending to zero: within `tolerance` plus margin at the last
/// index. Bounded away: beyond it at the last two indices.
fn to_zero_rule(c: &ConvergenceCurve, t: &Thresholds) -> Decision {
    let k = t.se_multiple;
    let (last, se) = c.last(0).expect("non-empty curve");
    if last.abs() <= k * se + t.tolerance {
        return Decision::Converges;
    }
    let tail = c.values.len().min(2);
    if (0..tail).all(|b| c.last(b).is_some_and(|(v, s)| v.abs() - k * s > t.tolerance)) {
        return Decision::Diverges;
    }
    Decision::Inconclusive
}

/// Absolute slack for exact partial sums that are zero up to rounding.
const ROUNDING: f64 = 1e-12;

/// Partial sums: Cauchy over the last three indices.
fn partial_sum_rule(c: &ConvergenceCurve, t: &Thresholds) -> Decision {
    let (Some((s3, _)), Some((s2, _)), Some((s1, se))) = (c.last(2), c.last(1), c.last(0)) else {
        return Decision::Inconclusive;
    };
    let k = t.se_multiple;
    let (d1, d2) = (s2 - s3, s1 - s2);
    if d2 <= t.tolerance + k * se && d2 <= d1 + k * se + ROUNDING {
        Decision::Converges
    } else if d2 - k * se > t.tolerance && d2 >= d1 - k * se {
        Decision::Diverges
    } else {
        Decision::Inconclusive
    }
}

/// A probability curve that settles: the last two values agree within
/// margin plus `tolerance`.
fn stabilise_rule(c: &ConvergenceCurve, t: &Thresholds) -> Decision {
    let k = t.se_multiple;
    let moved = |b: usize| -> Option<f64> {
        let (v1, s1) = c.last(b)?;
        let (v0, s0) = c.last(b + 1)?;
        Some((v1 - v0).abs() - k * (s0 * s0 + s1 * s1).sqrt())
    };
    match (moved(0), moved(1)) {
        (Some(m), _) if m <= t.tolerance => Decision::Converges,
        (Some(m0), Some(m1)) if m0 > t.tolerance && m1 > t.tolerance => Decision::Diverges,
        (None, _) => Decision::Inconclusive,
        _ => Decision::Inconclusive,
    }
}

/// Every point of a `bound_gap` curve is non-positive within margin.
fn bound_holds(c: &ConvergenceCurve, t: &Thresholds) -> bool {
    c.values.iter().zip(&c.stderr).all(|(v, s)| v - t.se_multiple * s <= 0.0)
}

/// One emitted verdict, reduced to what the hierarchy check needs.
#[derive(Clone, Debug, PartialEq)]
pub struct VerdictKey {
    pub scenario: String,
    pub condition: Condition,
    pub f_id: String,
    pub decision: Decision,
}

/// Violations of "a.s. convergence ⇒ convergence in probability ⇒
/// asymptotic exchangeability" among emitted verdicts, per scenario.
pub fn hierarchy_violations(rows: &[VerdictKey]) -> Vec<String> {
    let mut scenarios: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    let mut out = Vec::new();
    for s in scenarios {
        let of = |c: Condition| rows.iter().filter(move |r| r.scenario == s && r.condition == c);
        for a in of(Condition::As).filter(|r| r.decision == Decision::Converges) {
            if let Some(st) = of(Condition::Star).find(|r| r.f_id == a.f_id) {
                if st.decision != Decision::Converges {
                    out.push(format!("{s}: {} converges almost surely but not in probability", a.f_id));
                }
            }
        }
        let stars: Vec<_> = of(Condition::Star).collect();
        if !stars.is_empty() && stars.iter().all(|r| r.decision == Decision::Converges) {
            for e in of(Condition::AsympExch).filter(|r| r.decision != Decision::Converges) {
                out.push(format!("{s}: predictives converge but {} is not asymptotically exchangeable", e.f_id));
            }
        }
    }
    out
}
