use std::collections::BTreeMap;

use super::function::TestFunction;
use super::space::{Point, StateSpace};
use crate::error::{invalid, Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Probability measure with finite support.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    space: StateSpace,
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights must be non-negative and sum to one within [`WEIGHT_TOL`];
    /// they are never renormalised.
    pub fn new(space: StateSpace, atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return invalid("measure has no atoms");
        }
        if atoms.len() != weights.len() {
            return invalid("atoms and weights differ in length");
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("weights must be finite and non-negative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        if let Some(a) = atoms.iter().find(|a| !space.contains(a)) {
            return Err(Error::Domain(format!("atom {a} outside {}", space.describe())));
        }
        Ok(DiscreteMeasure { space, atoms, weights })
    }

    pub fn dirac(space: StateSpace, x: Point) -> Result<Self> {
        Self::new(space, vec![x], vec![1.0])
    }

    /// Measure on a finite scalar alphabet from per-label weights.
    pub fn on_alphabet(space: &StateSpace, weights: Vec<f64>) -> Result<Self> {
        let StateSpace::Finite { alphabet } = space else {
            return invalid("on_alphabet needs a finite space");
        };
        let atoms = alphabet.iter().map(|&x| Point::scalar(x)).collect();
        Self::new(space.clone(), atoms, weights)
    }

    pub fn uniform_on(space: &StateSpace, atoms: Vec<Point>) -> Result<Self> {
        let w = 1.0 / atoms.len().max(1) as f64;
        let weights = vec![w; atoms.len()];
        Self::new(space.clone(), atoms, weights)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ wᵢ f(atomᵢ)`.
    pub fn integrate(&self, f: &TestFunction) -> Result<f64> {
        self.space.ensure_same(&f.space)?;
        Ok(self.integrate_raw(f))
    }

    pub(crate) fn integrate_raw(&self, f: &TestFunction) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| w * f.eval_raw(a)).sum()
    }

    /// Weight of the atoms equal to `x`.
    pub fn mass_at(&self, x: &Point) -> f64 {
        let k = x.key();
        self.atoms.iter().zip(&self.weights).filter(|(a, _)| a.key() == k).map(|(_, w)| w).sum()
    }

    /// Same measure with equal atoms merged and atoms sorted.
    pub fn canonical(&self) -> DiscreteMeasure {
        let mut acc: BTreeMap<_, (Point, f64)> = BTreeMap::new();
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            acc.entry(a.key()).or_insert((*a, 0.0)).1 += w;
        }
        let mut pairs: Vec<(Point, f64)> = acc.into_values().collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (atoms, weights) = pairs.into_iter().unzip();
        DiscreteMeasure { space: self.space.clone(), atoms, weights }
    }

    /// Convex combination `t·self + (1−t)·other`.
    pub fn mix(&self, other: &DiscreteMeasure, t: f64) -> Result<DiscreteMeasure> {
        self.space.ensure_same(&other.space)?;
        if !(0.0..=1.0).contains(&t) {
            return invalid("mixing weight outside [0,1]");
        }
        let mut atoms = self.atoms.clone();
        atoms.extend_from_slice(&other.atoms);
        let mut weights: Vec<f64> = self.weights.iter().map(|w| t * w).collect();
        weights.extend(other.weights.iter().map(|w| (1.0 - t) * w));
        Ok(DiscreteMeasure { space: self.space.clone(), atoms, weights }.canonical())
    }
}

/// Empirical measure of `points`: distinct values in sorted order, each
/// weighted by its relative frequency.
pub fn empirical_measure(space: &StateSpace, points: &[Point]) -> Result<DiscreteMeasure> {
    if points.is_empty() {
        return invalid("empirical measure of an empty sample");
    }
    if let Some(p) = points.iter().find(|p| !space.contains(p)) {
        return Err(Error::Domain(format!("sample point {p} outside {}", space.describe())));
    }
    let mut counts: BTreeMap<_, (Point, usize)> = BTreeMap::new();
    for p in points {
        counts.entry(p.key()).or_insert((*p, 0)).1 += 1;
    }
    let n = points.len() as f64;
    let mut pairs: Vec<(Point, usize)> = counts.into_values().collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let atoms = pairs.iter().map(|(p, _)| *p).collect();
    let weights = pairs.iter().map(|(_, c)| *c as f64 / n).collect();
    Ok(DiscreteMeasure { space: space.clone(), atoms, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::function::TestFunction;

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| Point::scalar(x)).collect()
    }

    #[test]
    fn weight_validation() {
        let s = StateSpace::binary();
        assert!(DiscreteMeasure::new(s.clone(), pts(&[0.0, 1.0]), vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(DiscreteMeasure::new(s.clone(), pts(&[0.0, 1.0]), vec![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(s.clone(), pts(&[0.0]), vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(s.clone(), pts(&[2.0]), vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(s, pts(&[0.0, 1.0]), vec![0.5, 0.5 + 1e-13]).is_ok());
    }

    #[test]
    fn integrate_examples() {
        let s = StateSpace::binary();
        let id = TestFunction::identity(&s).unwrap();
        let u = DiscreteMeasure::on_alphabet(&s, vec![0.5, 0.5]).unwrap();
        assert_eq!(u.integrate(&id).unwrap(), 0.5);
        let m = DiscreteMeasure::on_alphabet(&s, vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let one = TestFunction::singleton(&s, 1.0);
        assert_eq!(m.integrate(&one).unwrap(), 1.0 / 3.0);
        let d = DiscreteMeasure::dirac(StateSpace::RealLine, Point::scalar(0.3)).unwrap();
        let c = TestFunction::clamp_linear(&StateSpace::RealLine, -1.0, 1.0).unwrap();
        assert_eq!(d.integrate(&c).unwrap(), 0.3);
        assert!(matches!(d.integrate(&one), Err(Error::SpaceMismatch(_))));
    }

    #[test]
    fn empirical_examples() {
        let s = StateSpace::binary();
        let m = empirical_measure(&s, &pts(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.atoms(), &pts(&[0.0, 1.0])[..]);
        assert_eq!(m.weights(), &[2.0 / 3.0, 1.0 / 3.0]);
        let r = StateSpace::RealLine;
        let d = empirical_measure(&r, &pts(&[2.5])).unwrap();
        assert_eq!(d.weights(), &[1.0]);
        let u = empirical_measure(&r, &pts(&[4.0, 2.0, 3.0, 1.0])).unwrap();
        assert_eq!(u.weights(), &[0.25; 4]);
        assert_eq!(u.atoms()[0], Point::scalar(1.0));
        assert!(empirical_measure(&r, &[]).is_err());
    }

    #[test]
    fn canonical_merges_atoms() {
        let s = StateSpace::binary();
        let m = DiscreteMeasure::new(s, pts(&[1.0, 0.0, 1.0]), vec![0.25, 0.5, 0.25]).unwrap();
        let c = m.canonical();
        assert_eq!(c.atoms(), &pts(&[0.0, 1.0])[..]);
        assert_eq!(c.weights(), &[0.5, 0.5]);
    }
}
