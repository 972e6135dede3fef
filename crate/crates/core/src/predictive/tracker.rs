use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::measure::{FunctionKind, Phase, Point, PointSet, TestFunction};
use crate::processes::{log_add, ModelKind, ProcessModel};
use crate::quad::integrate_with_breaks;

/// Largest number of filter states kept for m-dependent models.
pub const MAX_FILTER_STATES: usize = 1 << 16;
/// Largest number of branches explored by a multi-step look-ahead.
pub const MAX_LOOKAHEAD_BRANCHES: usize = 1 << 16;

/// A test function with the integrals the sine-pair closed form needs.
#[derive(Clone, Debug)]
pub struct Prepared<'f> {
    pub f: &'f TestFunction,
    /// `(∫₀¹ f, ∫₀¹ f(z) cos(2πz) dz)`.
    unit: Option<(f64, f64)>,
}

impl<'f> Prepared<'f> {
    pub fn new(model: &ProcessModel, f: &'f TestFunction) -> Self {
        let unit = matches!(model.kind, ModelKind::SinePair {}).then(|| unit_moments(f));
        Prepared { f, unit }
    }
}

/// `∫₀¹ f` and `∫₀¹ f(z) cos(2πz) dz`.
pub fn unit_moments(f: &TestFunction) -> (f64, f64) {
    match &f.kind {
        FunctionKind::Trig { frequency, phase } => match phase {
            Phase::Cos if *frequency == 1 => (0.0, 0.5),
            _ => (0.0, 0.0),
        },
        FunctionKind::Indicator(PointSet::Interval { lo, hi, .. }) => {
            let (a, b) = (lo.max(0.0), hi.min(1.0));
            if b <= a {
                (0.0, 0.0)
            } else {
                (b - a, ((TAU * b).sin() - (TAU * a).sin()) / TAU)
            }
        }
        FunctionKind::Indicator(_) => (0.0, 0.0),
        _ => {
            let breaks: Vec<f64> = match &f.kind {
                FunctionKind::ClampLinear { lo, hi } => vec![*lo, *hi],
                FunctionKind::LipschitzPiecewise { knots, .. } => knots.clone(),
                _ => Vec::new(),
            };
            let m0 = integrate_with_breaks(|z| f.eval_scalar(z), 0.0, 1.0, &breaks, 1e-12);
            let m1 = integrate_with_breaks(|z| f.eval_scalar(z) * (TAU * z).cos(), 0.0, 1.0, &breaks, 1e-12);
            (m0, m1)
        }
    }
}

#[derive(Clone, Debug)]
enum State {
    Fixed,
    Urn { black: f64, total: f64 },
    Weights { w: Vec<f64>, ln_acc: f64 },
    Triple { pending: Vec<bool> },
    Sine { last: f64 },
    /// Posterior over the unresolved window `(Y_{n+1}, …, Y_{n+m})`,
    /// encoded base `|A|` with `Y_{n+1}` as the least significant digit.
    Filter { p: Vec<f64> },
    Clt { last: f64 },
}

/// Sequential evaluator of `αₙ` along an observed path.
///
/// Every model gets an exact update: closed forms for the catalog formulas
/// and a forward filter over the hidden window for m-dependent models.
#[derive(Clone, Debug)]
pub struct Predictor<'m> {
    model: &'m ProcessModel,
    n: usize,
    state: State,
}

impl<'m> Predictor<'m> {
    pub fn new(model: &'m ProcessModel) -> Result<Self> {
        let state = match &model.kind {
            ModelKind::Iid { .. } => State::Fixed,
            ModelKind::PolyaUrn { b, r, .. } => State::Urn { black: *b, total: b + r },
            ModelKind::RecursivePredictive { initial, .. } | ModelKind::KernelMixture { initial, .. } => {
                State::Weights { w: initial.weights.clone(), ln_acc: f64::NEG_INFINITY }
            }
            ModelKind::Triple { .. } => State::Triple { pending: Vec::new() },
            ModelKind::SinePair {} => State::Sine { last: f64::NAN },
            ModelKind::MDependent { m, base } => {
                let a = base.alphabet.len();
                let states = a.checked_pow(*m).filter(|s| *s <= MAX_FILTER_STATES).ok_or_else(|| {
                    Error::Unsupported(format!("filter for m = {m} over {a} symbols exceeds {MAX_FILTER_STATES} states"))
                })?;
                let p = (0..states)
                    .map(|mut code| {
                        let mut w = 1.0;
                        for _ in 0..*m {
                            w *= base.weights[code % a];
                            code /= a;
                        }
                        w
                    })
                    .collect();
                State::Filter { p }
            }
            ModelKind::Clt { .. } => State::Clt { last: 0.0 },
        };
        Ok(Predictor { model, n: 0, state })
    }

    /// Number of observations absorbed.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Visit each outcome of `X_{n+1}` with its probability; `false` when
    /// the model's space is not finite. Outcomes may repeat.
    pub fn for_each_outcome<V: FnMut(Point, f64)>(&self, mut visit: V) -> bool {
        let m = self.model;
        match (&m.kind, &self.state) {
            (ModelKind::Iid { base }, _) => {
                for (x, w) in base.alphabet.iter().zip(&base.weights) {
                    visit(Point::scalar(*x), *w);
                }
            }
            (ModelKind::PolyaUrn { reinforcement, .. }, State::Urn { black, total }) => {
                let p1 = black / total;
                for r in reinforcement {
                    for (y, py) in [(0.0, 1.0 - p1), (1.0, p1)] {
                        visit(Point::new(&[r.black, r.red, y]).expect("three coordinates"), r.prob * py);
                    }
                }
            }
            (ModelKind::RecursivePredictive { initial, .. } | ModelKind::KernelMixture { initial, .. }, State::Weights { w, .. }) => {
                for (x, p) in initial.alphabet.iter().zip(w) {
                    visit(Point::scalar(*x), *p);
                }
            }
            (ModelKind::Triple { d }, State::Triple { pending }) => {
                let dk = d.term(self.n as u64 / 3 + 1);
                let p1 = match pending.as_slice() {
                    [true, true] => 1.0,
                    [false, false] => dk / (1.0 - dk),
                    [_, _] => 0.0,
                    _ => dk,
                };
                visit(Point::scalar(0.0), 1.0 - p1);
                visit(Point::scalar(1.0), p1);
            }
            (ModelKind::MDependent { base, .. }, State::Filter { p }) => {
                let a = base.alphabet.len();
                for (code, pw) in p.iter().enumerate().filter(|(_, pw)| **pw > 0.0) {
                    let head = base.alphabet[code % a];
                    for (y, bj) in base.alphabet.iter().zip(&base.weights) {
                        visit(Point::scalar(head - y), pw * bj);
                    }
                }
            }
            _ => return false,
        }
        true
    }

    /// Law of `X_{n+1}` given the observations, on finite-space models,
    /// with repeated outcomes merged in first-seen order.
    pub fn next_law(&self) -> Option<Vec<(Point, f64)>> {
        let mut law: Vec<(Point, f64)> = Vec::new();
        let finite = self.for_each_outcome(|x, w| match law.iter_mut().find(|(y, _)| *y == x) {
            Some(e) => e.1 += w,
            None => law.push((x, w)),
        });
        finite.then_some(law)
    }

    /// `αₙ(f)`.
    pub fn predictive(&self, f: &TestFunction) -> f64 {
        self.predictive_prepared(&Prepared::new(self.model, f))
    }

    pub fn predictive_prepared(&self, pf: &Prepared) -> f64 {
        let f = pf.f;
        match (&self.model.kind, &self.state) {
            (ModelKind::SinePair {}, State::Sine { last }) => {
                let (m0, m1) = pf.unit.unwrap_or_else(|| unit_moments(f));
                if self.n == 0 {
                    f.eval_scalar(0.0)
                } else if self.n % 2 == 1 {
                    m0
                } else {
                    let k = (self.n / 2) as f64;
                    m0 + (TAU * k * last).sin() * m1
                }
            }
            (ModelKind::Clt { innovation }, State::Clt { last }) => {
                let nf = self.n as f64;
                innovation.expect(f, (nf / (nf + 1.0)).sqrt() * last, 1.0 / (nf + 1.0).sqrt(), 1)
            }
            _ => {
                let mut s = 0.0;
                self.for_each_outcome(|x, w| s += w * f.eval_raw(&x));
                s
            }
        }
    }

    /// `E{f(X_{n+h}) | Fₙ}` for `h ≥ 1`.
    pub fn ahead(&self, f: &TestFunction, h: usize) -> Result<f64> {
        self.ahead_prepared(&Prepared::new(self.model, f), h)
    }

    pub fn ahead_prepared(&self, pf: &Prepared, h: usize) -> Result<f64> {
        if h == 0 {
            return Err(Error::InvalidArgument("look-ahead must be at least one step".into()));
        }
        if h == 1 || self.model.truth.is_cid {
            return Ok(self.predictive_prepared(pf));
        }
        match (&self.model.kind, &self.state) {
            (ModelKind::SinePair {}, _) => Ok(pf.unit.unwrap_or_else(|| unit_moments(pf.f)).0),
            (ModelKind::Clt { innovation }, State::Clt { last }) => {
                let (nf, hf) = (self.n as f64, h as f64);
                if h == 2 {
                    Ok(innovation.expect(pf.f, (nf / (nf + 2.0)).sqrt() * last, 1.0 / (nf + 2.0).sqrt(), 2))
                } else if let crate::processes::Innovation::Gaussian { .. } = innovation {
                    // Sum of h standard Gaussians is √h times one.
                    Ok(innovation.expect(pf.f, (nf / (nf + hf)).sqrt() * last, (hf / (nf + hf)).sqrt(), 1))
                } else {
                    Err(Error::Unsupported("look-ahead beyond two steps needs Gaussian innovations".into()))
                }
            }
            (ModelKind::Triple { d }, State::Triple { .. }) => {
                let target = self.n + h - 1;
                if target / 3 != self.n / 3 || target % 3 < 2 {
                    let dk = d.term(target as u64 / 3 + 1);
                    return Ok(pf.f.eval_scalar(0.0) + (pf.f.eval_scalar(1.0) - pf.f.eval_scalar(0.0)) * dk);
                }
                self.branch_ahead(pf, h)
            }
            (ModelKind::MDependent { base, .. }, State::Filter { p }) => {
                let a = base.alphabet.len();
                let mut p = p.clone();
                for _ in 1..h {
                    p = predict_filter(&p, &base.weights, a);
                }
                let mut s = 0.0;
                for (code, pw) in p.iter().enumerate().filter(|(_, pw)| **pw > 0.0) {
                    let head = base.alphabet[code % a];
                    for (j, bj) in base.weights.iter().enumerate() {
                        s += pw * bj * pf.f.eval_scalar(head - base.alphabet[j]);
                    }
                }
                Ok(s)
            }
            (ModelKind::Iid { .. }, _) => Ok(self.predictive_prepared(pf)),
            _ => self.branch_ahead(pf, h),
        }
    }

    /// Exhaustive look-ahead through the next `h − 1` observations.
    fn branch_ahead(&self, pf: &Prepared, h: usize) -> Result<f64> {
        let law = self.next_law().ok_or_else(|| Error::Unsupported("look-ahead needs a finite model".into()))?;
        let support = law.iter().filter(|(_, w)| *w > 0.0).count().max(1);
        let branches = (support as f64).powi(h as i32 - 1);
        if branches > MAX_LOOKAHEAD_BRANCHES as f64 {
            return Err(Error::BudgetExceeded(format!("{h}-step look-ahead needs {branches} branches")));
        }
        let mut s = 0.0;
        for (x, w) in law.into_iter().filter(|(_, w)| *w > 0.0) {
            let mut next = self.clone();
            next.observe(&x)?;
            s += w * next.ahead_prepared(pf, h - 1)?;
        }
        Ok(s)
    }

    /// `E{f(X_{n+2}) − f(X_{n+1}) | Fₙ}`.
    pub fn increment(&self, f: &TestFunction) -> Result<f64> {
        let pf = Prepared::new(self.model, f);
        self.increment_prepared(&pf)
    }

    pub fn increment_prepared(&self, pf: &Prepared) -> Result<f64> {
        Ok(self.ahead_prepared(pf, 2)? - self.predictive_prepared(pf))
    }

    /// Absorb `X_{n+1} = x`.
    pub fn observe(&mut self, x: &Point) -> Result<()> {
        if !self.model.space.contains(x) {
            return Err(Error::Domain(format!("{x} is not in {}", self.model.space.describe())));
        }
        let mut mass = 0.0;
        let finite = self.for_each_outcome(|y, w| {
            if y == *x {
                mass += w;
            }
        });
        if finite && mass <= 0.0 {
            return Err(Error::NullConditioning(format!("X_{} = {x} has probability 0", self.n + 1)));
        }
        self.absorb(x)
    }

    /// Absorb an observation known to come from the model's own sampler.
    pub(crate) fn observe_sampled(&mut self, x: &Point) {
        self.absorb(x).expect("sampled values have positive probability")
    }

    fn absorb(&mut self, x: &Point) -> Result<()> {
        let model = self.model;
        let n = self.n;
        match (&model.kind, &mut self.state) {
            (ModelKind::Iid { .. }, _) => {}
            (ModelKind::PolyaUrn { .. }, State::Urn { black, total }) => {
                let (b, r, y) = (x[0], x[1], x[2]);
                if y == 1.0 {
                    *black += b;
                    *total += b;
                } else {
                    *total += r;
                }
            }
            (ModelKind::RecursivePredictive { initial, q, kernels }, State::Weights { w, .. }) => {
                let i = initial.index_of(x.x()).expect("checked membership");
                let (qn, cn) = (q.term(n as u64), q.complement(n as u64));
                mix_row(w, qn, cn, kernels[n % kernels.len()].row(i));
            }
            (ModelKind::KernelMixture { initial, d, kernels }, State::Weights { w, ln_acc }) => {
                let i = initial.index_of(x.x()).expect("checked membership");
                let ln_d = d.ln_term(n as u64);
                let next = log_add(*ln_acc, ln_d);
                let (qn, cn) = ((*ln_acc - next).exp(), (ln_d - next).exp());
                *ln_acc = next;
                mix_row(w, qn, cn, kernels[n % kernels.len()].row(i));
            }
            (ModelKind::Triple { .. }, State::Triple { pending }) => {
                if pending.len() == 2 {
                    pending.clear();
                } else {
                    pending.push(x.x() == 1.0);
                }
            }
            (ModelKind::SinePair {}, State::Sine { last }) => {
                if n == 0 && x.x() != 0.0 {
                    return Err(Error::NullConditioning(format!("X_1 = {x} but the first coordinate is 0")));
                }
                *last = x.x();
            }
            (ModelKind::MDependent { base, .. }, State::Filter { p }) => {
                let a = base.alphabet.len();
                let top = p.len() / a;
                let mut out = vec![0.0; p.len()];
                for (code, pw) in p.iter().enumerate().filter(|(_, pw)| **pw > 0.0) {
                    let head = base.alphabet[code % a];
                    for (j, bj) in base.weights.iter().enumerate() {
                        if head - base.alphabet[j] == x.x() {
                            out[code / a + j * top] += pw * bj;
                        }
                    }
                }
                let total: f64 = out.iter().sum();
                out.iter_mut().for_each(|v| *v /= total);
                *p = out;
            }
            (ModelKind::Clt { .. }, State::Clt { last }) => *last = x.x(),
            _ => unreachable!("state matches model"),
        }
        self.n += 1;
        Ok(())
    }

    /// Absorb a sequence of observations.
    pub fn observe_all(&mut self, xs: &[Point]) -> Result<()> {
        xs.iter().try_for_each(|x| self.observe(x))
    }
}

fn mix_row(w: &mut [f64], q: f64, c: f64, row: &[f64]) {
    for (wj, kj) in w.iter_mut().zip(row) {
        *wj = q * *wj + c * kj;
    }
}

/// Advance the window posterior one step without an observation.
fn predict_filter(p: &[f64], base: &[f64], a: usize) -> Vec<f64> {
    let top = p.len() / a;
    let mut out = vec![0.0; p.len()];
    for (code, pw) in p.iter().enumerate().filter(|(_, pw)| **pw > 0.0) {
        for (j, bj) in base.iter().enumerate() {
            out[code / a + j * top] += pw * bj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::StateSpace;
    use crate::processes::*;

    #[test]
    fn unit_moment_closed_forms_match_quadrature() {
        let u = StateSpace::UnitInterval;
        let fs = [
            TestFunction::trig(&u, 1, Phase::Cos),
            TestFunction::trig(&u, 3, Phase::Sin),
            TestFunction::indicator(&u, PointSet::closed_open(0.25, 0.5)),
        ];
        for f in &fs {
            let (a, b) = unit_moments(f);
            let qa = integrate_with_breaks(|z| f.eval_scalar(z), 0.0, 1.0, &[0.25, 0.5], 1e-13);
            let qb = integrate_with_breaks(|z| f.eval_scalar(z) * (TAU * z).cos(), 0.0, 1.0, &[0.25, 0.5], 1e-13);
            assert!((a - qa).abs() < 1e-10 && (b - qb).abs() < 1e-10, "{}", f.id);
        }
    }

    #[test]
    fn urn_formula_examples() {
        let urn = classical_polya(1.0, 1.0).unwrap();
        let f = TestFunction::on_coordinate(&urn.space, URN_Y, TestFunction::singleton(&StateSpace::binary(), 1.0)).unwrap();
        let mut p = Predictor::new(&urn).unwrap();
        assert_eq!(p.predictive(&f), 0.5);
        let one = Point::new(&[1.0, 1.0, 1.0]).unwrap();
        p.observe_all(&[one, one]).unwrap();
        assert_eq!(p.predictive(&f), 0.75);
        let urn2 = classical_polya(2.0, 1.0).unwrap();
        let mut p2 = Predictor::new(&urn2).unwrap();
        p2.observe(&Point::new(&[1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(p2.predictive(&f), 0.5);
    }

    #[test]
    fn null_and_domain_observations() {
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        let mut p = Predictor::new(&m).unwrap();
        p.observe(&Point::scalar(1.0)).unwrap();
        // X₁ = 1 forces Y₂ = 0, so X₂ = 1 is impossible.
        assert!(matches!(p.observe(&Point::scalar(1.0)), Err(Error::NullConditioning(_))));
        assert!(matches!(p.observe(&Point::scalar(0.5)), Err(Error::Domain(_))));
        let s = sine_pair_model();
        assert!(Predictor::new(&s).unwrap().observe(&Point::scalar(0.3)).is_err());
    }

    #[test]
    fn m_dependent_filter_values() {
        let m = m_dependent_model(1, Categorical::uniform(vec![0.0, 1.0]).unwrap()).unwrap();
        let id = TestFunction::identity(&m.space).unwrap();
        let mut p = Predictor::new(&m).unwrap();
        assert_eq!(p.predictive(&id), 0.0);
        p.observe(&Point::scalar(1.0)).unwrap();
        assert_eq!(p.predictive(&id), -0.5);
        let mut q = Predictor::new(&m).unwrap();
        q.observe(&Point::scalar(0.0)).unwrap();
        assert_eq!(q.predictive(&id), 0.0);
    }

    #[test]
    fn clt_gaussian_lookahead_matches_two_step_convolution() {
        let m = clt_model(Innovation::standard_gaussian()).unwrap();
        let g = TestFunction::clamp_linear(&m.space, -1.0, 1.0).unwrap();
        let mut p = Predictor::new(&m).unwrap();
        p.observe_all(&[Point::scalar(0.8), Point::scalar(1.1)]).unwrap();
        let pf = Prepared::new(&m, &g);
        let two = Innovation::standard_gaussian().expect(&g, (2.0f64 / 4.0).sqrt() * 1.1, 0.5, 2);
        assert!((p.ahead_prepared(&pf, 2).unwrap() - two).abs() < 1e-12);
    }
}
