use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::space::{Point, StateSpace};
use crate::error::{invalid, Error, Result};

/// Points used when spot-checking declared bounds on continuous spaces.
pub const CHECK_GRID: usize = 1 << 10;

/// Range used for the real line by grid checks and the standard suite.
pub const REAL_WINDOW: (f64, f64) = (-4.0, 4.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSet {
    Interval { lo: f64, hi: f64, lo_closed: bool, hi_closed: bool },
    Values(Vec<f64>),
    Points(Vec<Vec<f64>>),
}

impl PointSet {
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        PointSet::Interval { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            PointSet::Interval { lo, hi, lo_closed, hi_closed } => {
                let x = p.x();
                let above = if *lo_closed { x >= *lo } else { x > *lo };
                let below = if *hi_closed { x <= *hi } else { x < *hi };
                above && below
            }
            PointSet::Values(v) => v.contains(&p.x()),
            PointSet::Points(v) => v.iter().any(|q| q.as_slice() == p.coords()),
        }
    }

    fn label(&self) -> String {
        match self {
            PointSet::Interval { lo, hi, lo_closed, hi_closed } => format!(
                "{}{},{}{}",
                if *lo_closed { '[' } else { '(' },
                lo,
                hi,
                if *hi_closed { ']' } else { ')' }
            ),
            PointSet::Values(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("{{{}}}", s.join(","))
            }
            PointSet::Points(v) => {
                let s: Vec<String> = v
                    .iter()
                    .map(|q| q.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(":"))
                    .collect();
                format!("{{{}}}", s.join(","))
            }
        }
    }

    /// Finite endpoints, used as quadrature breakpoints.
    pub fn edges(&self) -> Vec<f64> {
        match self {
            PointSet::Interval { lo, hi, .. } => {
                [*lo, *hi].into_iter().filter(|x| x.is_finite()).collect()
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Cos,
    Sin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Indicator(PointSet),
    ClampLinear { lo: f64, hi: f64 },
    /// `cos(2π·frequency·x)` or `sin(2π·frequency·x)`.
    Trig { frequency: u32, phase: Phase },
    /// Finite map from labels to values.
    Table { labels: Vec<f64>, values: Vec<f64> },
    /// Linear interpolation between knots, constant outside them.
    LipschitzPiecewise { knots: Vec<f64>, values: Vec<f64> },
    /// Scalar function applied to one coordinate of a product point.
    Coordinate { index: usize, inner: Box<TestFunction> },
}

/// A bounded measurable function with its sup-norm and, when continuous,
/// its Lipschitz constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub id: String,
    pub space: StateSpace,
    pub kind: FunctionKind,
    pub sup_norm: f64,
    pub lipschitz: Option<f64>,
}

impl TestFunction {
    pub fn indicator(space: &StateSpace, set: PointSet) -> Self {
        let lipschitz = if space.is_finite() { Some(finite_lipschitz_indicator(space, &set)) } else { None };
        TestFunction {
            id: format!("ind{}", set.label()),
            space: space.clone(),
            kind: FunctionKind::Indicator(set),
            sup_norm: 1.0,
            lipschitz,
        }
    }

    pub fn singleton(space: &StateSpace, x: f64) -> Self {
        Self::indicator(space, PointSet::Values(vec![x]))
    }

    pub fn clamp_linear(space: &StateSpace, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return invalid("clamp_linear needs finite lo < hi");
        }
        Ok(TestFunction {
            id: format!("clamp[{lo},{hi}]"),
            space: space.clone(),
            kind: FunctionKind::ClampLinear { lo, hi },
            sup_norm: lo.abs().max(hi.abs()),
            lipschitz: Some(1.0),
        })
    }

    pub fn trig(space: &StateSpace, frequency: u32, phase: Phase) -> Self {
        let name = match phase {
            Phase::Cos => "cos",
            Phase::Sin => "sin",
        };
        TestFunction {
            id: format!("{name}{frequency}"),
            space: space.clone(),
            kind: FunctionKind::Trig { frequency, phase },
            sup_norm: 1.0,
            lipschitz: Some(TAU * frequency as f64),
        }
    }

    pub fn table(space: &StateSpace, labels: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let StateSpace::Finite { alphabet } = space else {
            return invalid("table functions need a finite space");
        };
        if labels.len() != values.len() {
            return invalid("table labels and values differ in length");
        }
        if let Some(a) = alphabet.iter().find(|a| !labels.contains(a)) {
            return invalid(format!("table does not cover label {a}"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("table has a non-finite value");
        }
        let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut f = TestFunction {
            id: "table".into(),
            space: space.clone(),
            kind: FunctionKind::Table { labels, values },
            sup_norm,
            lipschitz: None,
        };
        f.lipschitz = Some(f.finite_lipschitz());
        Ok(f)
    }

    /// The identity map on a finite alphabet.
    pub fn identity(space: &StateSpace) -> Result<Self> {
        let StateSpace::Finite { alphabet } = space else {
            return invalid("identity table needs a finite space");
        };
        let mut f = Self::table(space, alphabet.clone(), alphabet.clone())?;
        f.id = "id".into();
        Ok(f)
    }

    pub fn piecewise(space: &StateSpace, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() {
            return invalid("piecewise function needs matching non-empty knots and values");
        }
        if knots.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1]) {
            return invalid("piecewise knots must be strictly increasing");
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return invalid("piecewise function has a non-finite entry");
        }
        let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lip = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(k, v)| (v[1] - v[0]).abs() / (k[1] - k[0]))
            .fold(0.0, f64::max);
        Ok(TestFunction {
            id: "pl".into(),
            space: space.clone(),
            kind: FunctionKind::LipschitzPiecewise { knots, values },
            sup_norm,
            lipschitz: Some(lip),
        })
    }

    /// Lift a scalar function to coordinate `index` of a product space.
    pub fn on_coordinate(space: &StateSpace, index: usize, inner: TestFunction) -> Result<Self> {
        let StateSpace::Product { components } = space else {
            return invalid("coordinate functions need a product space");
        };
        let Some(c) = components.get(index) else {
            return invalid(format!("coordinate {index} out of range"));
        };
        c.ensure_same(&inner.space)?;
        Ok(TestFunction {
            id: format!("c{index}:{}", inner.id),
            space: space.clone(),
            sup_norm: inner.sup_norm,
            lipschitz: inner.lipschitz,
            kind: FunctionKind::Coordinate { index, inner: Box::new(inner) },
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Checked evaluation.
    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        if !self.space.contains(x) {
            return Err(Error::Domain(format!("point {x} outside {}", self.space.describe())));
        }
        Ok(self.eval_raw(x))
    }

    /// Evaluation without the membership check.
    pub fn eval_raw(&self, x: &Point) -> f64 {
        match &self.kind {
            FunctionKind::Coordinate { index, inner } => inner.eval_scalar(x[*index]),
            FunctionKind::Indicator(set @ PointSet::Points(_)) => f64::from(u8::from(set.contains(x))),
            _ => self.eval_scalar(x.x()),
        }
    }

    /// Evaluation of a scalar function at `x`.
    pub fn eval_scalar(&self, x: f64) -> f64 {
        match &self.kind {
            FunctionKind::Indicator(set) => f64::from(u8::from(set.contains(&Point::scalar(x)))),
            FunctionKind::ClampLinear { lo, hi } => x.clamp(*lo, *hi),
            FunctionKind::Trig { frequency, phase } => {
                let a = TAU * *frequency as f64 * x;
                match phase {
                    Phase::Cos => a.cos(),
                    Phase::Sin => a.sin(),
                }
            }
            FunctionKind::Table { labels, values } => labels
                .iter()
                .position(|l| *l == x)
                .map_or(f64::NAN, |i| values[i]),
            FunctionKind::LipschitzPiecewise { knots, values } => interpolate(knots, values, x),
            FunctionKind::Coordinate { inner, .. } => inner.eval_scalar(x),
        }
    }

    /// Spot-check the declared sup-norm and Lipschitz constant on a grid of
    /// the space (all points for finite spaces).
    pub fn verify_bounds(&self) -> Result<()> {
        let pts = grid_points(&self.space);
        let vals: Vec<f64> = pts.iter().map(|p| self.eval_raw(p)).collect();
        let tol = 1e-12 * (1.0 + self.sup_norm);
        if let Some((p, v)) = pts.iter().zip(&vals).find(|(_, v)| v.is_nan() || v.abs() > self.sup_norm + tol) {
            return invalid(format!("{}: |f({p})| = {} exceeds sup-norm {}", self.id, v.abs(), self.sup_norm));
        }
        if let Some(l) = self.lipschitz {
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len().min(i + 3) {
                    let d = pts[i].l1(&pts[j]);
                    if (vals[i] - vals[j]).abs() > l * d + tol {
                        return invalid(format!("{}: Lipschitz bound {l} violated", self.id));
                    }
                }
            }
        }
        Ok(())
    }

    fn finite_lipschitz(&self) -> f64 {
        let pts = self.space.enumerate_points().unwrap_or_default();
        let mut lip = 0.0f64;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                lip = lip.max((self.eval_raw(p) - self.eval_raw(q)).abs() / p.l1(q));
            }
        }
        lip
    }
}

fn finite_lipschitz_indicator(space: &StateSpace, set: &PointSet) -> f64 {
    let f = TestFunction {
        id: String::new(),
        space: space.clone(),
        kind: FunctionKind::Indicator(set.clone()),
        sup_norm: 1.0,
        lipschitz: None,
    };
    f.finite_lipschitz()
}

fn interpolate(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let n = knots.len();
    if x <= knots[0] {
        return values[0];
    }
    if x >= knots[n - 1] {
        return values[n - 1];
    }
    let i = knots.partition_point(|k| *k <= x);
    let (k0, k1) = (knots[i - 1], knots[i]);
    let t = (x - k0) / (k1 - k0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Sorted check points of a space: every point when finite, otherwise a
/// uniform grid of [`CHECK_GRID`] points per continuous coordinate range
/// (thinned for products).
pub fn grid_points(space: &StateSpace) -> Vec<Point> {
    if let Some(pts) = space.enumerate_points() {
        return pts;
    }
    let axis = |s: &StateSpace, count: usize| -> Vec<f64> {
        match s {
            StateSpace::Finite { alphabet } => {
                let mut a = alphabet.clone();
                a.sort_by(f64::total_cmp);
                a
            }
            StateSpace::UnitInterval => (0..count).map(|i| i as f64 / (count - 1) as f64).collect(),
            _ => {
                let (lo, hi) = REAL_WINDOW;
                (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
            }
        }
    };
    match space {
        StateSpace::Product { components } => {
            let per = ((CHECK_GRID as f64).powf(1.0 / components.len() as f64) as usize).max(2);
            let mut out: Vec<Vec<f64>> = vec![Vec::new()];
            for c in components {
                let ax = axis(c, per);
                out = out
                    .into_iter()
                    .flat_map(|p| {
                        ax.iter().map(move |&x| {
                            let mut v = p.clone();
                            v.push(x);
                            v
                        })
                    })
                    .collect();
            }
            out.iter().map(|v| Point::new(v).expect("dimension checked")).collect()
        }
        s => axis(s, CHECK_GRID).into_iter().map(Point::scalar).collect(),
    }
}

/// Deterministic family of test functions for a space.
///
/// Finite spaces get every singleton indicator plus the identity table.
/// Continuous spaces get indicators of dyadic intervals to depth 4, `cos`
/// and `sin` at frequencies 1 to 4, and one clamp. Products get the lifted
/// component families, plus product singletons when the space is finite
/// with at most 64 points.
pub fn standard_test_suite(space: &StateSpace) -> Vec<TestFunction> {
    match space {
        StateSpace::Finite { alphabet } => {
            let mut a = alphabet.clone();
            a.sort_by(f64::total_cmp);
            let mut out: Vec<TestFunction> = a.iter().map(|&x| TestFunction::singleton(space, x)).collect();
            out.push(TestFunction::identity(space).expect("finite space"));
            out
        }
        StateSpace::UnitInterval => continuous_suite(space, 0.0, 1.0, (0.25, 0.75), false),
        StateSpace::RealLine => continuous_suite(space, REAL_WINDOW.0, REAL_WINDOW.1, (-1.0, 1.0), true),
        StateSpace::Product { components } => {
            let mut out = Vec::new();
            for (i, c) in components.iter().enumerate() {
                for f in standard_test_suite(c) {
                    out.push(TestFunction::on_coordinate(space, i, f).expect("component suite"));
                }
            }
            if let Some(pts) = space.enumerate_points() {
                if pts.len() <= 64 {
                    for p in pts {
                        out.push(TestFunction::indicator(space, PointSet::Points(vec![p.coords().to_vec()])));
                    }
                }
            }
            out
        }
    }
}

fn continuous_suite(space: &StateSpace, lo: f64, hi: f64, clamp: (f64, f64), half_line: bool) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for depth in 1..=4u32 {
        let cells = 1usize << depth;
        let w = (hi - lo) / cells as f64;
        for j in 0..cells {
            let a = lo + w * j as f64;
            let b = lo + w * (j + 1) as f64;
            let last = j + 1 == cells && !half_line;
            let set = PointSet::Interval { lo: a, hi: b, lo_closed: true, hi_closed: last };
            out.push(TestFunction::indicator(space, set));
        }
    }
    if half_line {
        let set = PointSet::Interval { lo: f64::NEG_INFINITY, hi: 0.0, lo_closed: false, hi_closed: true };
        out.push(TestFunction::indicator(space, set));
    }
    for k in 1..=4 {
        out.push(TestFunction::trig(space, k, Phase::Cos));
        out.push(TestFunction::trig(space, k, Phase::Sin));
    }
    out.push(TestFunction::clamp_linear(space, clamp.0, clamp.1).expect("valid clamp"));
    out
}

/// Look up a member of the standard suite by id.
pub fn suite_function(space: &StateSpace, id: &str) -> Result<TestFunction> {
    standard_test_suite(space)
        .into_iter()
        .find(|f| f.id == id)
        .ok_or_else(|| Error::InvalidArgument(format!("no test function '{id}' for {}", space.describe())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let b = StateSpace::binary();
        assert_eq!(TestFunction::singleton(&b, 1.0).evaluate(&Point::scalar(1.0)).unwrap(), 1.0);
        let u = StateSpace::UnitInterval;
        assert_eq!(TestFunction::trig(&u, 1, Phase::Cos).evaluate(&Point::scalar(0.0)).unwrap(), 1.0);
        let r = StateSpace::RealLine;
        let c = TestFunction::clamp_linear(&r, -1.0, 1.0).unwrap();
        assert_eq!(c.evaluate(&Point::scalar(3.0)).unwrap(), 1.0);
        assert_eq!(c.id, "clamp[-1,1]");
    }

    #[test]
    fn domain_errors() {
        let f = TestFunction::singleton(&StateSpace::binary(), 1.0);
        assert!(matches!(f.evaluate(&Point::scalar(0.5)), Err(Error::Domain(_))));
        let g = TestFunction::trig(&StateSpace::UnitInterval, 2, Phase::Sin);
        assert!(g.evaluate(&Point::scalar(-0.1)).is_err());
    }

    #[test]
    fn suites_have_expected_members() {
        let b = standard_test_suite(&StateSpace::binary());
        let ids: Vec<&str> = b.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["ind{0}", "ind{1}", "id"]);
        let u = standard_test_suite(&StateSpace::UnitInterval);
        assert!(u.len() >= 8);
        assert!(u.iter().any(|f| f.id == "cos1"));
        assert!(u.iter().any(|f| f.id == "ind[0.25,0.5)"));
        let r = standard_test_suite(&StateSpace::RealLine);
        assert!(r.iter().any(|f| f.id == "clamp[-1,1]"));
        assert!(r.iter().any(|f| f.id == "ind(-inf,0]"));
    }

    #[test]
    fn product_suite_lifts_components() {
        let s = StateSpace::product(vec![StateSpace::binary(), StateSpace::binary()]).unwrap();
        let suite = standard_test_suite(&s);
        let f = suite.iter().find(|f| f.id == "c1:ind{1}").unwrap();
        assert_eq!(f.evaluate(&Point::new(&[0.0, 1.0]).unwrap()).unwrap(), 1.0);
        assert_eq!(suite.iter().filter(|f| f.id.starts_with("ind{")).count(), 4);
    }

    #[test]
    fn every_suite_member_respects_declared_bounds() {
        let spaces = [
            StateSpace::binary(),
            StateSpace::finite(vec![-1.0, 0.0, 1.0]).unwrap(),
            StateSpace::UnitInterval,
            StateSpace::RealLine,
            StateSpace::product(vec![StateSpace::binary(), StateSpace::UnitInterval]).unwrap(),
        ];
        for s in &spaces {
            for f in standard_test_suite(s) {
                f.verify_bounds().unwrap();
            }
        }
    }

    #[test]
    fn wrong_declared_bound_is_caught() {
        let mut f = TestFunction::trig(&StateSpace::UnitInterval, 3, Phase::Sin);
        f.lipschitz = Some(1.0);
        assert!(f.verify_bounds().is_err());
        let mut g = TestFunction::clamp_linear(&StateSpace::RealLine, -2.0, 2.0).unwrap();
        g.sup_norm = 1.0;
        assert!(g.verify_bounds().is_err());
    }

    #[test]
    fn piecewise_interpolates() {
        let f = TestFunction::piecewise(&StateSpace::RealLine, vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
        assert_eq!(f.eval_scalar(0.5), 0.25);
        assert_eq!(f.eval_scalar(-3.0), 0.0);
        assert_eq!(f.eval_scalar(9.0), 0.5);
        assert_eq!(f.lipschitz, Some(0.5));
    }

    #[test]
    fn table_must_cover_alphabet() {
        let s = StateSpace::finite(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(TestFunction::table(&s, vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        let t = TestFunction::table(&s, vec![0.0, 1.0, 2.0], vec![0.0, 3.0, 3.0]).unwrap();
        assert_eq!(t.lipschitz, Some(3.0));
    }
}
