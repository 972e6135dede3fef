//! Exact predictive distributions `αₙ(f) = E{f(X_{n+1}) | Fₙ}`.
//!
//! Two independent routes are provided. [`Predictor`] updates `αₙ` along an
//! observed path using each model's closed form (or an exact forward filter
//! for m-dependent models). The enumeration route sums joint path
//! probabilities over every latent configuration consistent with a prefix,
//! and serves as the oracle for the first.

mod enumerate;
mod tracker;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use enumerate::{condition, prefix_table, Conditional, PrefixRow};
pub use tracker::{unit_moments, Predictor, Prepared, MAX_FILTER_STATES, MAX_LOOKAHEAD_BRANCHES};

use crate::error::{invalid, Error, Result};
use crate::measure::{Point, TestFunction};
use crate::processes::{sample_path, LaggedModel, ModelKind, PathSample, ProcessModel};
use crate::seed::{derive_seed, stream_tag};

/// Default number of coordinates enumeration may reach.
pub const ENUMERATION_BUDGET: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Enumeration,
    Quadrature,
    ExactFilter,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Enumeration => "enumeration",
            Method::Quadrature => "quadrature",
            Method::ExactFilter => "exact_filter",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveValue {
    pub n: usize,
    pub f_id: String,
    pub value: f64,
    pub method: Method,
}

/// Method used by [`Predictor`] for a model.
pub fn tracker_method(model: &ProcessModel) -> Method {
    match model.kind {
        ModelKind::MDependent { .. } => Method::ExactFilter,
        ModelKind::Clt { .. } => Method::Quadrature,
        _ => Method::ClosedForm,
    }
}

fn check_function(model: &ProcessModel, f: &TestFunction) -> Result<()> {
    model.space.ensure_same(&f.space)
}

fn prefix_of(path: &PathSample, n: usize) -> Result<&[Point]> {
    path.values.get(..n).ok_or_else(|| Error::InvalidArgument(format!("index {n} exceeds path length {}", path.len())))
}

/// `αₙ(f)` from the model's registered formula, evaluated on `path`.
pub fn closed_form_predictive(model: &ProcessModel, path: &PathSample, n: usize, f: &TestFunction) -> Result<PredictiveValue> {
    check_function(model, f)?;
    if matches!(model.kind, ModelKind::MDependent { .. }) {
        return Err(Error::Unsupported("m-dependent predictives have no closed form; use enumeration or the exact filter".into()));
    }
    let mut p = Predictor::new(model)?;
    p.observe_all(prefix_of(path, n)?)?;
    Ok(PredictiveValue { n, f_id: f.id.clone(), value: p.predictive(f), method: tracker_method(model) })
}

/// `E{f(X_{n+1}) | X₁..Xₙ = prefix}` by summing over latent configurations.
pub fn enumerate_predictive(model: &ProcessModel, prefix: &[Point], f: &TestFunction) -> Result<PredictiveValue> {
    enumerate_predictive_with_budget(model, prefix, f, ENUMERATION_BUDGET)
}

pub fn enumerate_predictive_with_budget(model: &ProcessModel, prefix: &[Point], f: &TestFunction, budget: usize) -> Result<PredictiveValue> {
    check_function(model, f)?;
    let n = prefix.len();
    let c = condition(model, prefix, n, &|x: &Point| f.eval_raw(x), budget)?;
    Ok(PredictiveValue { n, f_id: f.id.clone(), value: c.value()?, method: Method::Enumeration })
}

/// `E{f(X_{n+2}) − f(X_{n+1}) | Fₙ}` on `path`.
pub fn predictive_increment(model: &ProcessModel, path: &PathSample, n: usize, f: &TestFunction) -> Result<f64> {
    check_function(model, f)?;
    let mut p = Predictor::new(model)?;
    p.observe_all(prefix_of(path, n)?)?;
    p.increment(f)
}

/// The increment by enumeration: one more step of the tower.
pub fn enumerate_increment(model: &ProcessModel, prefix: &[Point], f: &TestFunction) -> Result<f64> {
    check_function(model, f)?;
    let g = |x: &Point| f.eval_raw(x);
    let n = prefix.len();
    let two = condition(model, prefix, n + 1, &g, ENUMERATION_BUDGET)?.value()?;
    let one = condition(model, prefix, n, &g, ENUMERATION_BUDGET)?.value()?;
    Ok(two - one)
}

/// `βₙ(f) = E{f(X_{n+1}) | Gₙ}` where `Gₙ` sees the first `n − g(n)`
/// coordinates of `prefix` (which has length `n`).
pub fn sub_filtration_predictive(lagged: &LaggedModel, prefix: &[Point], f: &TestFunction) -> Result<PredictiveValue> {
    let model = &lagged.inner;
    check_function(model, f)?;
    let n = prefix.len();
    let v = lagged.lag.visible(n as u64) as usize;
    let c = condition(model, &prefix[..v], n, &|x: &Point| f.eval_raw(x), ENUMERATION_BUDGET)?;
    Ok(PredictiveValue { n, f_id: f.id.clone(), value: c.value()?, method: Method::Enumeration })
}

/// `βₙ(f)` along a path from the sequential predictor: the look-ahead from
/// time `n − g(n)` to `n + 1`.
pub fn sub_filtration_tracked(lagged: &LaggedModel, path: &[Point], n: usize, f: &TestFunction) -> Result<f64> {
    let v = lagged.lag.visible(n as u64) as usize;
    let mut p = Predictor::new(&lagged.inner)?;
    p.observe_all(&path[..v])?;
    p.ahead(f, n + 1 - v)
}

/// How a moment is computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentMode {
    Exact,
    MonteCarlo { paths: usize, seed: u64, batches: usize },
}

/// A value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Mean of `xs` with a standard error from `batches` contiguous batch means.
pub fn batch_mean(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let value = pairwise_sum(xs) / n as f64;
    let b = batches.min(n).max(1);
    if b < 2 {
        return Estimate { value, stderr: 0.0 };
    }
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &xs[i * n / b..(i + 1) * n / b];
            pairwise_sum(chunk) / chunk.len() as f64
        })
        .collect();
    let mm = pairwise_sum(&means) / b as f64;
    let var = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
    Estimate { value, stderr: (var / b as f64).sqrt() }
}

/// Summation in a fixed binary tree, independent of thread count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `E{αₙ(f)²}`.
pub fn predictive_second_moment(model: &ProcessModel, n: usize, f: &TestFunction, mode: MomentMode) -> Result<Estimate> {
    check_function(model, f)?;
    match mode {
        MomentMode::Exact => {
            let rows = prefix_table(model, n, n, &|x: &Point| f.eval_raw(x), ENUMERATION_BUDGET)?;
            let terms: Vec<f64> = rows.iter().map(|r| r.prob * r.value * r.value).collect();
            Ok(Estimate { value: pairwise_sum(&terms), stderr: 0.0 })
        }
        MomentMode::MonteCarlo { paths, seed, batches } => {
            let tag = stream_tag("second_moment");
            let xs = per_path(paths, |i| {
                let pf = Prepared::new(model, f);
                let mut p = Predictor::new(model)?;
                if n > 0 {
                    let path = sample_path(model, n, derive_seed(seed, i as u64, tag))?;
                    path.values.iter().for_each(|x| p.observe_sampled(x));
                }
                Ok(p.predictive_prepared(&pf).powi(2))
            })?;
            Ok(batch_mean(&xs, batches))
        }
    }
}

/// `E{βₙ(f)²}` for the lagged sub-filtration.
pub fn sub_filtration_second_moment(lagged: &LaggedModel, n: usize, f: &TestFunction, mode: MomentMode) -> Result<Estimate> {
    let model = &lagged.inner;
    check_function(model, f)?;
    let v = lagged.lag.visible(n as u64) as usize;
    match mode {
        MomentMode::Exact => {
            let rows = prefix_table(model, v, n, &|x: &Point| f.eval_raw(x), ENUMERATION_BUDGET)?;
            let terms: Vec<f64> = rows.iter().map(|r| r.prob * r.value * r.value).collect();
            Ok(Estimate { value: pairwise_sum(&terms), stderr: 0.0 })
        }
        MomentMode::MonteCarlo { paths, seed, batches } => {
            let tag = stream_tag("sub_filtration_second_moment");
            let xs = per_path(paths, |i| {
                let path = sample_path(model, n.max(1), derive_seed(seed, i as u64, tag))?;
                Ok(sub_filtration_tracked(lagged, &path.values, n, f)?.powi(2))
            })?;
            Ok(batch_mean(&xs, batches))
        }
    }
}

/// Evaluate `job` on path indices `0..paths` in parallel, in index order.
pub fn per_path<T: Send, F: Fn(usize) -> Result<T> + Sync>(paths: usize, job: F) -> Result<Vec<T>> {
    if paths == 0 {
        return invalid("at least one path is required");
    }
    (0..paths).into_par_iter().map(&job).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{standard_test_suite, StateSpace};
    use crate::processes::*;

    fn binary_prefixes(len: usize) -> Vec<Vec<Point>> {
        (0..1usize << len).map(|bits| (0..len).map(|i| Point::scalar(((bits >> i) & 1) as f64)).collect()).collect()
    }

    #[test]
    fn triple_closed_form_examples() {
        let m = triple_model(SequenceSpec::Constant { value: 0.25 }).unwrap();
        let f = TestFunction::singleton(&StateSpace::binary(), 1.0);
        let path = PathSample { model_id: "triple".into(), seed: 0, values: vec![Point::scalar(0.0); 2], auxiliary: None };
        assert_eq!(closed_form_predictive(&m, &path, 0, &f).unwrap().value, 0.25);
        let v = closed_form_predictive(&m, &path, 2, &f).unwrap().value;
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sine_closed_form_examples() {
        let m = sine_pair_model();
        let f = TestFunction::trig(&StateSpace::UnitInterval, 1, crate::measure::Phase::Cos);
        let path = PathSample { model_id: "sine".into(), seed: 0, values: vec![Point::scalar(0.0), Point::scalar(0.25), Point::scalar(0.7)], auxiliary: None };
        assert!((closed_form_predictive(&m, &path, 2, &f).unwrap().value - 0.5).abs() < 1e-15);
        assert_eq!(closed_form_predictive(&m, &path, 3, &f).unwrap().value, 0.0);
        assert!(matches!(
            closed_form_predictive(&m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap(), &path, 0, &f),
            Err(Error::Unsupported(_)) | Err(Error::SpaceMismatch(_))
        ));
    }

    /// Both routes agree on every binary prefix up to length 8.
    #[test]
    fn tracker_matches_enumeration_on_binary_models() {
        let bin = Categorical::uniform(vec![0.0, 1.0]).unwrap();
        let k = KernelSpec { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] };
        let models = [
            triple_model(SequenceSpec::ReciprocalSqrt { shift: 4.0 }).unwrap(),
            recursive_predictive_model(bin.clone(), SequenceSpec::Constant { value: 0.6 }, vec![k.clone(), KernelSpec::identity(2)]).unwrap(),
            kernel_mixture_model(bin.clone(), SequenceSpec::Geometric { scale: 1.0, ratio: 2.0 }, vec![k]).unwrap(),
            m_dependent_model(1, bin).unwrap(),
        ];
        for m in &models {
            let suite = standard_test_suite(&m.space);
            for len in 0..=8 {
                for prefix in binary_prefixes(len) {
                    let mut p = Predictor::new(m).unwrap();
                    let tracked = p.observe_all(&prefix);
                    for f in &suite {
                        match enumerate_predictive(m, &prefix, f) {
                            Ok(e) => {
                                tracked.as_ref().unwrap();
                                assert!((p.predictive(f) - e.value).abs() < 1e-12, "{} {prefix:?} {}", m.id, f.id);
                            }
                            Err(Error::NullConditioning(_)) | Err(Error::Domain(_)) => assert!(tracked.is_err()),
                            Err(e) => panic!("{e}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn increments_agree() {
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        let id = TestFunction::identity(&m.space).unwrap();
        let prefix = [Point::scalar(1.0), Point::scalar(0.0)];
        let path = PathSample { model_id: m.id.clone(), seed: 0, values: prefix.to_vec(), auxiliary: None };
        let a = predictive_increment(&m, &path, 2, &id).unwrap();
        let b = enumerate_increment(&m, &prefix, &id).unwrap();
        assert!((a - b).abs() < 1e-14);
        assert!(a.abs() > 0.1);
    }

    #[test]
    fn sub_filtration_matches_tower() {
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        let lagged = lagged_filtration_model(m.clone(), LagSpec::Constant { m: 1 }).unwrap();
        let id = TestFunction::identity(&m.space).unwrap();
        let prefix = [Point::scalar(1.0), Point::scalar(-1.0), Point::scalar(0.0)];
        assert_eq!(sub_filtration_predictive(&lagged, &prefix, &id).unwrap().value, 0.0);
        assert_eq!(sub_filtration_tracked(&lagged, &prefix, 3, &id).unwrap(), 0.0);
    }

    #[test]
    fn polya_second_moment_exact() {
        let urn = classical_polya(1.0, 1.0).unwrap();
        let f = TestFunction::on_coordinate(&urn.space, URN_Y, TestFunction::singleton(&StateSpace::binary(), 1.0)).unwrap();
        for n in [0usize, 1, 5, 9] {
            let e = predictive_second_moment(&urn, n, &f, MomentMode::Exact).unwrap();
            let nf = n as f64;
            assert!((e.value - (2.0 * nf + 3.0) / (6.0 * (nf + 2.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_mean_standard_error() {
        let xs: Vec<f64> = (0..300).map(|i| (i % 2) as f64).collect();
        let e = batch_mean(&xs, 30);
        assert_eq!(e.value, 0.5);
        assert_eq!(e.stderr, 0.0);
        assert_eq!(pairwise_sum(&[1.0; 100]), 100.0);
    }
}
