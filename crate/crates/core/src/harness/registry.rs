use serde::{Deserialize, Serialize};

use crate::diagnostics::{clt_positive_start_moment, BlockSpec, Condition, Decision, LimitLaw, MomentCheck};
use crate::error::{Error, Result};
use crate::measure::{suite_function, PointSet, StateSpace, TestFunction};
use crate::processes::*;

/// Where a verdict's predicted decision comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    /// The model's ground-truth flag for the condition; unknown flags make
    /// the verdict informational.
    Truth,
    Fixed(Decision),
    Informational,
}

/// A set named by its standard-suite id, or given explicitly on a scalar
/// space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetRef {
    Suite(String),
    Custom(PointSet),
}

impl SetRef {
    pub fn resolve(&self, space: &StateSpace) -> Result<TestFunction> {
        match self {
            SetRef::Suite(id) => suite_function(space, id),
            SetRef::Custom(set) => Ok(TestFunction::indicator(space, set.clone())),
        }
    }
}

/// A conditioning event `{X_{index+1} ∈ set}` with its registered target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub id: String,
    pub index: usize,
    pub set: SetRef,
    pub target: f64,
}

/// A diagnostic with its parameters. Function ids refer to the model's
/// standard test suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    Cauchy { f: String, grid: Vec<u64> },
    /// Horizon is three times the last grid index.
    AlmostSure { f: String, grid: Vec<u64> },
    QuasiMartingale { f: String, grid: Vec<u64>, exact: bool },
    Wlln { f: String, grid: Vec<u64> },
    LaggedWlln { f: String, grid: Vec<u64> },
    Exchangeability { grid: Vec<u64>, block: BlockSpec },
    Stable { f: String, grid: Vec<u64>, events: Vec<EventSpec> },
    SecondMoment { f: String, grid: Vec<u64>, exact: bool, moment: MomentCheck },
    Marginal { sets: Vec<SetRef>, grid: Vec<u64> },
    Increment { f: String, grid: Vec<u64> },
}

impl Check {
    pub fn condition(&self) -> Condition {
        match self {
            Check::Cauchy { .. } => Condition::Star,
            Check::AlmostSure { .. } => Condition::As,
            Check::QuasiMartingale { .. } => Condition::Qmc,
            Check::Wlln { .. } => Condition::Wlln,
            Check::LaggedWlln { .. } => Condition::LaggedWlln,
            Check::Exchangeability { .. } => Condition::AsympExch,
            Check::Stable { .. } => Condition::Stable,
            Check::SecondMoment { .. } => Condition::SecondMoment,
            Check::Marginal { .. } => Condition::Marginal,
            Check::Increment { .. } => Condition::Increment,
        }
    }

    /// Exact checks keep their own grid under a configured override.
    pub fn is_exact(&self) -> bool {
        matches!(self, Check::QuasiMartingale { exact: true, .. } | Check::SecondMoment { exact: true, .. })
    }

    pub fn grid_mut(&mut self) -> &mut Vec<u64> {
        match self {
            Check::Cauchy { grid, .. }
            | Check::AlmostSure { grid, .. }
            | Check::QuasiMartingale { grid, .. }
            | Check::Wlln { grid, .. }
            | Check::LaggedWlln { grid, .. }
            | Check::Exchangeability { grid, .. }
            | Check::Stable { grid, .. }
            | Check::SecondMoment { grid, .. }
            | Check::Marginal { grid, .. }
            | Check::Increment { grid, .. } => grid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub check: Check,
    pub expect: Expect,
}

impl Entry {
    /// The predicted decision for `truth`, if any.
    pub fn expected(&self, truth: &GroundTruth) -> Option<Decision> {
        let from = |e: Expectation| match e {
            Expectation::Converges => Some(Decision::Converges),
            Expectation::Diverges => Some(Decision::Diverges),
            Expectation::Unknown => None,
        };
        match self.expect {
            Expect::Fixed(d) => Some(d),
            Expect::Informational => None,
            Expect::Truth => match self.check.condition() {
                Condition::Star => from(truth.expected_star),
                Condition::As => from(truth.expected_as),
                Condition::AsympExch => from(truth.expected_asymp_exch),
                _ => None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub summary: String,
    /// Why the predicted decisions hold.
    pub citation: String,
    pub default_paths: usize,
    pub model: ModelKind,
    pub lag: Option<LagSpec>,
    pub battery: Vec<Entry>,
}

fn pow2(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}

fn truth(check: Check) -> Entry {
    Entry { check, expect: Expect::Truth }
}

fn converges(check: Check) -> Entry {
    Entry { check, expect: Expect::Fixed(Decision::Converges) }
}

fn diverges(check: Check) -> Entry {
    Entry { check, expect: Expect::Fixed(Decision::Diverges) }
}

fn s(x: &str) -> String {
    x.to_string()
}

fn suite(ids: &[&str]) -> Vec<SetRef> {
    ids.iter().map(|id| SetRef::Suite(s(id))).collect()
}

fn binary() -> Categorical {
    Categorical::uniform(vec![0.0, 1.0]).expect("valid law")
}

fn kernel() -> KernelSpec {
    KernelSpec { rows: vec![vec![0.3, 0.7], vec![0.6, 0.4]] }
}

fn block(k: usize, coordinate: Option<usize>, limit: Option<LimitLaw>) -> BlockSpec {
    BlockSpec { k, coordinate, limit }
}

/// Standard convergent battery for a binary predictive with test function `f`.
fn convergent_battery(f: &str, exact_qmc: bool) -> Vec<Entry> {
    vec![
        truth(Check::Cauchy { f: s(f), grid: pow2(5, 12) }),
        truth(Check::AlmostSure { f: s(f), grid: pow2(5, 10) }),
        truth(Check::Exchangeability { grid: vec![32, 256, 2048], block: block(2, None, None) }),
        converges(Check::QuasiMartingale { f: s(f), grid: if exact_qmc { vec![4, 8, 12] } else { pow2(7, 10) }, exact: exact_qmc }),
        converges(Check::Wlln { f: s(f), grid: vec![100, 1000, 10000] }),
        converges(Check::Increment { f: s(f), grid: pow2(5, 12) }),
    ]
}

/// Every registered scenario.
pub fn scenarios() -> Vec<Scenario> {
    let y = "c2:ind{1}";
    let clamp = "clamp[-1,1]";
    let urn_y = Some(URN_Y);
    let generalized = vec![Reinforcement { black: 1.0, red: 2.0, prob: 0.5 }, Reinforcement { black: 3.0, red: 2.0, prob: 0.5 }];
    let mut iid = convergent_battery("ind{1}", true);
    iid.extend([
        converges(Check::SecondMoment { f: s("ind{1}"), grid: vec![2, 6, 10], exact: true, moment: MomentCheck::Degenerate }),
        converges(Check::Marginal { sets: suite(&["ind{0}", "ind{1}"]), grid: pow2(5, 12) }),
    ]);
    let urn_battery = |exact_qmc: bool| {
        let mut b = convergent_battery(y, exact_qmc);
        b[2] = truth(Check::Exchangeability { grid: vec![32, 256, 2048], block: block(2, urn_y, None) });
        b.push(converges(Check::Marginal { sets: suite(&["c2:ind{0}", "c2:ind{1}"]), grid: pow2(5, 12) }));
        b
    };
    let mut polya = urn_battery(true);
    polya.extend([
        converges(Check::Stable {
            f: s(y),
            grid: pow2(5, 12),
            events: vec![EventSpec { id: s("y1"), index: 0, set: SetRef::Suite(s(y)), target: 1.0 / 3.0 }],
        }),
        converges(Check::SecondMoment { f: s(y), grid: pow2(5, 12), exact: false, moment: MomentCheck::Target { value: 1.0 / 3.0 } }),
    ]);
    let clt_space = StateSpace::RealLine;
    let g = suite_function(&clt_space, clamp).expect("suite member");
    let clt_target = clt_positive_start_moment(&g, 1_000_000);
    let positive = PointSet::Interval { lo: 0.0, hi: f64::INFINITY, lo_closed: false, hi_closed: false };

    vec![
        Scenario {
            id: s("iid"),
            summary: s("i.i.d. uniform bits"),
            citation: s("constant predictive; trivially c.i.d. and exchangeable"),
            default_paths: 1000,
            model: ModelKind::Iid { base: binary() },
            lag: None,
            battery: iid,
        },
        Scenario {
            id: s("polya_urn"),
            summary: s("classical Polya urn, one black and one red ball, unit reinforcement"),
            citation: s("exchangeable; predictive is a bounded martingale with a uniform limit, E{alpha(f)^2} = 1/3"),
            default_paths: 2000,
            model: ModelKind::PolyaUrn { b: 1.0, r: 1.0, reinforcement: vec![Reinforcement { black: 1.0, red: 1.0, prob: 1.0 }] },
            lag: None,
            battery: polya,
        },
        Scenario {
            id: s("polya_generalized"),
            summary: s("generalized urn with random reinforcement (1,2) or (3,2)"),
            citation: s("expected drift of the black proportion is O(1/n^2), so the quasi-martingale condition holds"),
            default_paths: 2000,
            model: ModelKind::PolyaUrn { b: 1.0, r: 1.0, reinforcement: generalized },
            lag: None,
            battery: urn_battery(false),
        },
        Scenario {
            id: s("recursive_predictive"),
            summary: s("recursive predictive with q_n = 1 - 2^-(n+1) and a fixed kernel"),
            citation: s("sum of sup(1 - q_n) is finite, so the quasi-martingale condition holds"),
            default_paths: 1000,
            model: ModelKind::RecursivePredictive {
                initial: binary(),
                q: SequenceSpec::OneMinus { inner: Box::new(SequenceSpec::Geometric { scale: 0.5, ratio: 0.5 }) },
                kernels: vec![kernel()],
            },
            lag: None,
            battery: convergent_battery("ind{1}", true),
        },
        Scenario {
            id: s("kernel_mixture"),
            summary: s("convex kernel combination with weights d_n = 2^-n"),
            citation: s("the mixing ratios d_n / sum d_j are summable"),
            default_paths: 1000,
            model: ModelKind::KernelMixture { initial: binary(), d: SequenceSpec::Geometric { scale: 1.0, ratio: 0.5 }, kernels: vec![kernel()] },
            lag: None,
            battery: convergent_battery("ind{1}", true),
        },
        Scenario {
            id: s("triple"),
            summary: s("triples (A, B, C) with d_n = 1/sqrt(n+4)"),
            citation: s("d_n -> 0 gives convergence in probability; sum d_n^2 = infinity gives infinitely many jumps to 1"),
            default_paths: 10_000,
            model: ModelKind::Triple { d: SequenceSpec::ReciprocalSqrt { shift: 4.0 } },
            lag: None,
            battery: vec![
                truth(Check::Cauchy { f: s("ind{1}"), grid: vec![32, 64, 96, 128, 256, 512, 1024, 2048, 4096] }),
                truth(Check::AlmostSure { f: s("ind{1}"), grid: pow2(5, 10) }),
                truth(Check::Exchangeability { grid: vec![32, 256, 2048], block: block(2, None, None) }),
                converges(Check::Marginal { sets: suite(&["ind{1}"]), grid: pow2(5, 12) }),
            ],
        },
        Scenario {
            id: s("sine_pair"),
            summary: s("pairs (Y_k, Z_k) with density 1 + sin(2 pi k y) cos(2 pi z)"),
            citation: s("alpha_2n(cos) = sin(2 pi n Y_n)/2 has a non-degenerate stationary law; the density perturbation vanishes weakly"),
            default_paths: 10_000,
            model: ModelKind::SinePair {},
            lag: None,
            battery: vec![
                truth(Check::Cauchy { f: s("cos1"), grid: vec![32, 64, 100, 128, 256, 512] }),
                truth(Check::AlmostSure { f: s("cos1"), grid: pow2(5, 8) }),
                truth(Check::Exchangeability { grid: vec![32, 100, 256], block: block(2, None, Some(LimitLaw::IidUniform)) }),
                converges(Check::Marginal { sets: suite(&["ind[0,0.5)", "ind[0.5,1]"]), grid: pow2(5, 10) }),
            ],
        },
        Scenario {
            id: s("m_dependent"),
            summary: s("X_i = Y_i - Y_(i+1) with Y i.i.d. uniform bits"),
            citation: s("1-c.i.d. and stationary but the predictive keeps a +-1/2 component; the 3-block law is not permutation invariant"),
            default_paths: 1000,
            model: ModelKind::MDependent { m: 1, base: binary() },
            lag: None,
            battery: vec![
                truth(Check::Cauchy { f: s("id"), grid: pow2(5, 12) }),
                truth(Check::AlmostSure { f: s("id"), grid: pow2(5, 10) }),
                truth(Check::Exchangeability { grid: vec![32, 256, 2048], block: block(3, None, None) }),
                diverges(Check::QuasiMartingale { f: s("id"), grid: vec![4, 8, 12], exact: true }),
                converges(Check::Wlln { f: s("id"), grid: vec![100, 1000, 10000] }),
                converges(Check::Marginal { sets: suite(&["ind{-1}", "ind{0}", "ind{1}"]), grid: pow2(5, 12) }),
                diverges(Check::Increment { f: s("id"), grid: pow2(5, 12) }),
            ],
        },
        Scenario {
            id: s("lagged_m_dependent"),
            summary: s("the 1-dependent differences observed with constant lag 1"),
            citation: s("the lagged predictive is 0 while E{alpha_n^2} stays positive; 1-dependent stationary sequences obey the weak law"),
            default_paths: 1000,
            model: ModelKind::MDependent { m: 1, base: binary() },
            lag: Some(LagSpec::Constant { m: 1 }),
            battery: vec![
                diverges(Check::SecondMoment { f: s("id"), grid: vec![4, 8, 12], exact: true, moment: MomentCheck::SubFiltration }),
                converges(Check::LaggedWlln { f: s("id"), grid: pow2(5, 12) }),
            ],
        },
        Scenario {
            id: s("lagged_polya"),
            summary: s("classical Polya urn observed with lag floor(sqrt(n))"),
            citation: s("c.i.d. predictives make beta_n a delayed martingale with the same limit"),
            default_paths: 1000,
            model: ModelKind::PolyaUrn { b: 1.0, r: 1.0, reinforcement: vec![Reinforcement { black: 1.0, red: 1.0, prob: 1.0 }] },
            lag: Some(LagSpec::Sqrt),
            battery: vec![
                converges(Check::SecondMoment { f: s(y), grid: vec![4, 8, 12], exact: true, moment: MomentCheck::SubFiltration }),
                converges(Check::LaggedWlln { f: s(y), grid: pow2(5, 12) }),
            ],
        },
        Scenario {
            id: s("clt"),
            summary: s("normalised partial sums of standard Gaussian innovations"),
            citation: s("X_n converges in law but not in probability, while E{g(X_n+2) - g(X_n+1) | F_n} = O(1/n)"),
            default_paths: 2000,
            model: ModelKind::Clt { innovation: Innovation::standard_gaussian() },
            lag: None,
            battery: vec![
                truth(Check::Cauchy { f: s(clamp), grid: pow2(5, 12) }),
                truth(Check::AlmostSure { f: s(clamp), grid: pow2(5, 8) }),
                truth(Check::Exchangeability { grid: vec![32, 256, 2048], block: block(2, None, Some(LimitLaw::Diagonal)) }),
                converges(Check::Increment { f: s(clamp), grid: vec![32, 100, 1000, 4096] }),
                converges(Check::Marginal { sets: suite(&["ind(-inf,0]"]), grid: pow2(5, 12) }),
                converges(Check::Stable {
                    f: s(clamp),
                    grid: pow2(5, 12),
                    events: vec![EventSpec { id: s("z1_positive"), index: 0, set: SetRef::Custom(positive), target: clt_target }],
                }),
            ],
        },
    ]
}

pub fn find_scenario(id: &str) -> Result<Scenario> {
    scenarios().into_iter().find(|s| s.id == id).ok_or_else(|| {
        let ids: Vec<String> = scenarios().into_iter().map(|s| s.id).collect();
        Error::Config(format!("unknown scenario '{id}'; known: {}", ids.join(", ")))
    })
}
