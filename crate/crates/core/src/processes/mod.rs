//! Catalog of dependent sequences with seeded samplers and ground truth.
//!
//! Every model samples the exact law of its first `n` coordinates from a
//! single ChaCha8 stream, consuming randomness in a fixed order per step, so
//! a longer path with the same seed extends a shorter one.

pub mod finite;
pub mod innovation;
pub mod lag;
mod sample;
pub mod sequence;

use serde::{Deserialize, Serialize};

pub use finite::{Categorical, KernelSpec};
pub use innovation::Innovation;
pub use lag::{lagged_filtration_model, LagSpec, LaggedModel};
pub use sample::{sample_path, PathSample};
pub use sequence::SequenceSpec;

use crate::error::{invalid, Result};
use crate::measure::StateSpace;
use sequence::looks_summable;

/// Expected behaviour of a convergence condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Converges,
    Diverges,
    Unknown,
}

impl Expectation {
    pub fn as_str(self) -> &'static str {
        match self {
            Expectation::Converges => "converges",
            Expectation::Diverges => "diverges",
            Expectation::Unknown => "unknown",
        }
    }
}

/// Known structural facts about a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub is_exchangeable: bool,
    pub is_cid: bool,
    pub m_cid_order: Option<u32>,
    pub is_stationary: bool,
    /// Convergence in probability of every predictive integral.
    pub expected_star: Expectation,
    /// Almost-sure convergence of every predictive integral.
    pub expected_as: Expectation,
    pub expected_asymp_exch: Expectation,
    /// One-line description of why the flags hold.
    pub basis: String,
}

impl GroundTruth {
    /// Exchangeable ⇒ c.i.d. ⇒ order 0 and a.s. convergence ⇒ convergence
    /// in probability ⇒ asymptotic exchangeability.
    pub fn check_consistency(&self) -> Result<()> {
        use Expectation::*;
        if self.is_exchangeable && !self.is_cid {
            return invalid("exchangeable model not flagged c.i.d.");
        }
        if self.is_cid && (self.m_cid_order != Some(0) || self.expected_as != Converges) {
            return invalid("c.i.d. model must have order 0 and a.s. convergence");
        }
        if self.expected_as == Converges && self.expected_star != Converges {
            return invalid("a.s. convergence without convergence in probability");
        }
        if self.expected_star == Converges && self.expected_asymp_exch != Converges {
            return invalid("convergence in probability without asymptotic exchangeability");
        }
        if self.expected_star == Diverges && self.expected_as == Unknown {
            return invalid("a.s. verdict should follow from a divergent in-probability verdict");
        }
        Ok(())
    }
}

/// One atom of a finite reinforcement law: `black` balls are added after a
/// black draw, `red` after a red draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reinforcement {
    pub black: f64,
    pub red: f64,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Iid { base: Categorical },
    PolyaUrn { b: f64, r: f64, reinforcement: Vec<Reinforcement> },
    /// `α_{n+1} = qₙ αₙ + (1 − qₙ) Kₙ(X_{n+1}, ·)` with `Kₙ = kernels[n mod len]`.
    RecursivePredictive { initial: Categorical, q: SequenceSpec, kernels: Vec<KernelSpec> },
    /// `αₙ = Dₙ⁻¹ Σ_{i<n} dᵢ Kᵢ(X_{i+1}, ·)`, `α₀ = initial`.
    KernelMixture { initial: Categorical, d: SequenceSpec, kernels: Vec<KernelSpec> },
    Triple { d: SequenceSpec },
    SinePair {},
    MDependent { m: u32, base: Categorical },
    Clt { innovation: Innovation },
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Iid { .. } => "iid",
            ModelKind::PolyaUrn { .. } => "polya_urn",
            ModelKind::RecursivePredictive { .. } => "recursive_predictive",
            ModelKind::KernelMixture { .. } => "kernel_mixture",
            ModelKind::Triple { .. } => "triple",
            ModelKind::SinePair {} => "sine_pair",
            ModelKind::MDependent { .. } => "m_dependent",
            ModelKind::Clt { .. } => "clt",
        }
    }
}

/// A catalog process: parameters, state space and ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessModel {
    pub id: String,
    pub space: StateSpace,
    pub kind: ModelKind,
    pub truth: GroundTruth,
}

/// Index of the `Y` coordinate in urn points `(B, R, Y)`.
pub const URN_Y: usize = 2;

impl ProcessModel {
    /// Validate parameters and derive the space and ground truth.
    pub fn new(id: impl Into<String>, kind: ModelKind) -> Result<Self> {
        let (space, truth) = derive(&kind)?;
        truth.check_consistency()?;
        Ok(ProcessModel { id: id.into(), space, kind, truth })
    }

    /// Alphabet of a finite scalar model.
    pub fn alphabet(&self) -> Option<&[f64]> {
        match &self.space {
            StateSpace::Finite { alphabet } => Some(alphabet),
            _ => None,
        }
    }
}

pub fn iid_model(base: Categorical) -> Result<ProcessModel> {
    ProcessModel::new("iid", ModelKind::Iid { base })
}

pub fn polya_urn_model(b: f64, r: f64, reinforcement: Vec<Reinforcement>) -> Result<ProcessModel> {
    ProcessModel::new("polya_urn", ModelKind::PolyaUrn { b, r, reinforcement })
}

/// Classical urn: one ball of the drawn colour is added each time.
pub fn classical_polya(b: f64, r: f64) -> Result<ProcessModel> {
    polya_urn_model(b, r, vec![Reinforcement { black: 1.0, red: 1.0, prob: 1.0 }])
}

pub fn recursive_predictive_model(initial: Categorical, q: SequenceSpec, kernels: Vec<KernelSpec>) -> Result<ProcessModel> {
    ProcessModel::new("recursive_predictive", ModelKind::RecursivePredictive { initial, q, kernels })
}

pub fn kernel_mixture_model(initial: Categorical, d: SequenceSpec, kernels: Vec<KernelSpec>) -> Result<ProcessModel> {
    ProcessModel::new("kernel_mixture", ModelKind::KernelMixture { initial, d, kernels })
}

pub fn triple_model(d: SequenceSpec) -> Result<ProcessModel> {
    ProcessModel::new("triple", ModelKind::Triple { d })
}

pub fn sine_pair_model() -> ProcessModel {
    ProcessModel::new("sine_pair", ModelKind::SinePair {}).expect("parameter-free model")
}

pub fn m_dependent_model(m: u32, base: Categorical) -> Result<ProcessModel> {
    ProcessModel::new("m_dependent", ModelKind::MDependent { m, base })
}

pub fn clt_model(innovation: Innovation) -> Result<ProcessModel> {
    ProcessModel::new("clt", ModelKind::Clt { innovation })
}

/// Support of `Yᵢ − Y_{i+m}` in sorted order.
pub fn difference_alphabet(base: &Categorical) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, a) in base.alphabet.iter().enumerate() {
        for (j, b) in base.alphabet.iter().enumerate() {
            if base.weights[i] > 0.0 && base.weights[j] > 0.0 {
                let d = a - b;
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Sorted distinct values of an urn coordinate.
pub fn urn_support(reinforcement: &[Reinforcement], black: bool) -> Vec<f64> {
    let mut v: Vec<f64> = Vec::new();
    for r in reinforcement.iter().filter(|r| r.prob > 0.0) {
        let x = if black { r.black } else { r.red };
        if !v.contains(&x) {
            v.push(x);
        }
    }
    v.sort_by(f64::total_cmp);
    v
}

#[allow(clippy::too_many_arguments)]
fn truth(
    exch: bool,
    cid: bool,
    order: Option<u32>,
    stationary: bool,
    star: Expectation,
    as_: Expectation,
    ae: Expectation,
    basis: &str,
) -> GroundTruth {
    GroundTruth {
        is_exchangeable: exch,
        is_cid: cid,
        m_cid_order: order,
        is_stationary: stationary,
        expected_star: star,
        expected_as: as_,
        expected_asymp_exch: ae,
        basis: basis.into(),
    }
}

fn check_kernels(kernels: &[KernelSpec], size: usize) -> Result<()> {
    if kernels.is_empty() {
        return invalid("at least one kernel is required");
    }
    kernels.iter().try_for_each(|k| k.validate(size))
}

fn derive(kind: &ModelKind) -> Result<(StateSpace, GroundTruth)> {
    use Expectation::*;
    match kind {
        ModelKind::Iid { base } => {
            base.validate()?;
            let t = truth(true, true, Some(0), true, Converges, Converges, Converges, "i.i.d. sequence: constant predictive");
            Ok((base.space(), t))
        }
        ModelKind::PolyaUrn { b, r, reinforcement } => {
            if !(b.is_finite() && r.is_finite() && *b > 0.0 && *r > 0.0) {
                return invalid("urn needs positive initial counts");
            }
            if reinforcement.is_empty() {
                return invalid("reinforcement law is empty");
            }
            if reinforcement.iter().any(|x| !(x.black >= 0.0 && x.red >= 0.0 && x.black.is_finite() && x.red.is_finite())) {
                return invalid("reinforcement counts must be finite and non-negative");
            }
            let probs: Vec<f64> = reinforcement.iter().map(|x| x.prob).collect();
            finite::check_probability(&probs, probs.len(), "reinforcement probabilities")?;
            let eb: f64 = reinforcement.iter().map(|x| x.prob * x.black).sum();
            let er: f64 = reinforcement.iter().map(|x| x.prob * x.red).sum();
            if (eb - er).abs() > 1e-12 {
                return invalid(format!("reinforcement violates E(B) = E(R): {eb} vs {er}"));
            }
            if eb <= 0.0 {
                return invalid("reinforcement needs E(B) > 0");
            }
            let bs = urn_support(reinforcement, true);
            let rs = urn_support(reinforcement, false);
            let classical = bs.len() == 1 && rs.len() == 1 && bs[0] == rs[0];
            let equal_laws = bs == rs
                && bs.iter().all(|v| {
                    let pb: f64 = reinforcement.iter().filter(|x| x.black == *v).map(|x| x.prob).sum();
                    let pr: f64 = reinforcement.iter().filter(|x| x.red == *v).map(|x| x.prob).sum();
                    (pb - pr).abs() <= 1e-12
                });
            let space = StateSpace::product(vec![
                StateSpace::Finite { alphabet: bs },
                StateSpace::Finite { alphabet: rs },
                StateSpace::binary(),
            ])?;
            let t = if classical {
                truth(true, true, Some(0), true, Converges, Converges, Converges, "classical Polya urn: exchangeable")
            } else if equal_laws {
                truth(
                    false,
                    true,
                    Some(0),
                    false,
                    Converges,
                    Converges,
                    Converges,
                    "B and R equal in law: draw probability is a martingale",
                )
            } else {
                truth(
                    false,
                    false,
                    None,
                    false,
                    Converges,
                    Converges,
                    Converges,
                    "urn with i.i.d. reinforcement: draw probability is a bounded quasi-martingale",
                )
            };
            Ok((space, t))
        }
        ModelKind::RecursivePredictive { initial, q, kernels } => {
            initial.validate()?;
            check_kernels(kernels, initial.alphabet.len())?;
            q.check_open_range(0, 0.0, 1.0, "q")?;
            let identity = kernels.iter().all(KernelSpec::is_identity);
            let t = if identity {
                truth(false, true, Some(0), false, Converges, Converges, Converges, "identity kernels: predictive is a martingale")
            } else if looks_summable(|n| q.complement(n), 0) {
                truth(false, false, None, false, Converges, Converges, Converges, "summable 1 - q_n: predictive is a quasi-martingale")
            } else {
                truth(false, false, None, false, Unknown, Unknown, Unknown, "1 - q_n not summable: no sufficient condition applies")
            };
            Ok((initial.space(), t))
        }
        ModelKind::KernelMixture { initial, d, kernels } => {
            initial.validate()?;
            check_kernels(kernels, initial.alphabet.len())?;
            d.check_positive("d")?;
            let identity = kernels.iter().all(KernelSpec::is_identity);
            let t = if identity {
                truth(false, true, Some(0), false, Converges, Converges, Converges, "identity kernels: predictive is a martingale")
            } else if mixture_ratio_summable(d) {
                truth(false, false, None, false, Converges, Converges, Converges, "summable d_n / D_{n+1}: predictive is a quasi-martingale")
            } else {
                truth(false, false, None, false, Unknown, Unknown, Unknown, "d_n / D_{n+1} not summable: no sufficient condition applies")
            };
            Ok((initial.space(), t))
        }
        ModelKind::Triple { d } => {
            d.check_open_range(1, 0.0, 0.5, "d")?;
            let vanishing = d.term(1_000_000) < 1e-2 && d.term(1_000_000) < d.term(1);
            let t = if !vanishing {
                truth(false, false, None, false, Diverges, Diverges, Unknown, "non-vanishing d_n: third coordinate keeps reacting")
            } else if looks_summable(|n| d.term(n).powi(2), 1) {
                truth(false, false, None, false, Converges, Converges, Converges, "d_n -> 0 with summable squares")
            } else {
                truth(
                    false,
                    false,
                    None,
                    false,
                    Converges,
                    Diverges,
                    Converges,
                    "d_n -> 0 with divergent squares: in probability but not almost surely",
                )
            };
            Ok((StateSpace::binary(), t))
        }
        ModelKind::SinePair {} => Ok((
            StateSpace::UnitInterval,
            truth(
                false,
                false,
                None,
                false,
                Diverges,
                Diverges,
                Converges,
                "sine-perturbed pairs: asymptotically i.i.d. uniform, predictive of cos oscillates",
            ),
        )),
        ModelKind::MDependent { m, base } => {
            base.validate()?;
            if *m == 0 {
                return invalid("m-dependent model needs m >= 1");
            }
            if base.is_degenerate() {
                return invalid("m-dependent model needs a non-degenerate base");
            }
            let space = StateSpace::finite(difference_alphabet(base))?;
            let t = truth(
                false,
                false,
                Some(*m),
                true,
                Diverges,
                Diverges,
                Diverges,
                "stationary m-dependent differences: not asymptotically exchangeable",
            );
            Ok((space, t))
        }
        ModelKind::Clt { innovation } => {
            innovation.validate()?;
            let t = truth(
                false,
                false,
                None,
                false,
                Diverges,
                Diverges,
                Converges,
                "normalised partial sums: stable limit, shifted sequence tends to (W, W, ...)",
            );
            Ok((StateSpace::RealLine, t))
        }
    }
}

/// Numerical test of `Σ dₙ/(d₀ + … + dₙ) < ∞`, computed in the log domain.
pub fn mixture_ratio_summable(d: &SequenceSpec) -> bool {
    let mut ln_d_acc = f64::NEG_INFINITY;
    let mut s = 0.0;
    let mut at_1e5 = 0.0;
    for n in 0..1_000_000u64 {
        let l = d.ln_term(n);
        ln_d_acc = log_add(ln_d_acc, l);
        s += (l - ln_d_acc).exp();
        if n + 1 == 100_000 {
            at_1e5 = s;
        }
    }
    s - at_1e5 < 1e-3
}

pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> SequenceSpec {
        SequenceSpec::Geometric { scale: 0.5, ratio: 0.5 }
    }

    #[test]
    fn catalog_flags_are_consistent() {
        let models = [
            iid_model(Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap(),
            classical_polya(1.0, 1.0).unwrap(),
            triple_model(SequenceSpec::ReciprocalSqrt { shift: 4.0 }).unwrap(),
            sine_pair_model(),
            m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap(),
            clt_model(Innovation::standard_gaussian()).unwrap(),
        ];
        for m in &models {
            m.truth.check_consistency().unwrap();
        }
        assert!(models[1].truth.is_cid);
        assert_eq!(models[2].truth.expected_star, Expectation::Converges);
        assert_eq!(models[2].truth.expected_as, Expectation::Diverges);
        assert_eq!(models[3].truth.expected_asymp_exch, Expectation::Converges);
        assert_eq!(models[4].truth.m_cid_order, Some(1));
        assert_eq!(models[4].truth.expected_asymp_exch, Expectation::Diverges);
    }

    #[test]
    fn urn_validation() {
        let unequal = vec![Reinforcement { black: 2.0, red: 1.0, prob: 1.0 }];
        assert!(polya_urn_model(1.0, 1.0, unequal).is_err());
        assert!(polya_urn_model(0.0, 1.0, vec![Reinforcement { black: 1.0, red: 1.0, prob: 1.0 }]).is_err());
        let swapped = vec![
            Reinforcement { black: 1.0, red: 2.0, prob: 0.5 },
            Reinforcement { black: 2.0, red: 1.0, prob: 0.5 },
        ];
        let s = polya_urn_model(1.0, 1.0, swapped).unwrap();
        assert!(s.truth.is_cid && !s.truth.is_exchangeable);
        let mixed = vec![
            Reinforcement { black: 1.0, red: 2.0, prob: 0.5 },
            Reinforcement { black: 3.0, red: 2.0, prob: 0.5 },
        ];
        let m = polya_urn_model(1.0, 1.0, mixed).unwrap();
        assert!(!m.truth.is_cid);
        assert_eq!(m.truth.expected_star, Expectation::Converges);
        assert_eq!(m.space.dim(), 3);
    }

    #[test]
    fn recursive_flags() {
        let init = Categorical::uniform(vec![0.0, 1.0]).unwrap();
        let q = SequenceSpec::OneMinus { inner: Box::new(half()) };
        let k = KernelSpec { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] };
        let m = recursive_predictive_model(init.clone(), q.clone(), vec![k.clone()]).unwrap();
        assert_eq!(m.truth.expected_as, Expectation::Converges);
        assert!(!m.truth.is_cid);
        let polya = recursive_predictive_model(init.clone(), SequenceSpec::PolyaRatio { offset: 2.0 }, vec![KernelSpec::identity(2)]).unwrap();
        assert!(polya.truth.is_cid);
        let slow = recursive_predictive_model(init.clone(), SequenceSpec::PolyaRatio { offset: 2.0 }, vec![k]).unwrap();
        assert_eq!(slow.truth.expected_as, Expectation::Unknown);
        assert!(recursive_predictive_model(init, SequenceSpec::Constant { value: 1.0 }, vec![KernelSpec::identity(2)]).is_err());
    }

    /// Partial-sum oracle for `Σ dₙ/D_{n+1}` under three weight sequences.
    #[test]
    fn kernel_mixture_summability() {
        assert!(mixture_ratio_summable(&half()));
        assert!(!mixture_ratio_summable(&SequenceSpec::Geometric { scale: 1.0, ratio: 2.0 }));
        // dₙ/D_{n+1} → 1 for factorial weights, so the series diverges.
        assert!(!mixture_ratio_summable(&SequenceSpec::Factorial));
        let init = Categorical::uniform(vec![0.0, 1.0]).unwrap();
        let k = KernelSpec { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] };
        let m = kernel_mixture_model(init, SequenceSpec::Factorial, vec![k]).unwrap();
        assert_eq!(m.truth.expected_as, Expectation::Unknown);
    }

    #[test]
    fn triple_and_m_dependent_validation() {
        assert!(triple_model(SequenceSpec::Constant { value: 0.5 }).is_err());
        assert!(m_dependent_model(1, Categorical::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap()).is_err());
        assert!(m_dependent_model(0, Categorical::uniform(vec![0.0, 1.0]).unwrap()).is_err());
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(m.alphabet().unwrap(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn clt_rejects_unstandardised_innovation() {
        assert!(clt_model(Innovation::Gaussian { mean: 0.1, sd: 1.0 }).is_err());
    }
}
