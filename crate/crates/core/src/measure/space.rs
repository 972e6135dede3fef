use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest supported point dimension.
pub const MAX_DIM: usize = 4;

/// Sample space of a process.
///
/// Products are flat: every component is a scalar space and the total
/// dimension is at most [`MAX_DIM`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpace {
    Finite { alphabet: Vec<f64> },
    UnitInterval,
    RealLine,
    Product { components: Vec<StateSpace> },
}

impl StateSpace {
    pub fn finite(alphabet: Vec<f64>) -> Result<Self> {
        let s = StateSpace::Finite { alphabet };
        s.validate()?;
        Ok(s)
    }

    pub fn binary() -> Self {
        StateSpace::Finite { alphabet: vec![0.0, 1.0] }
    }

    pub fn product(components: Vec<StateSpace>) -> Result<Self> {
        let s = StateSpace::Product { components };
        s.validate()?;
        Ok(s)
    }

    /// `k` copies of a scalar space.
    pub fn power(base: &StateSpace, k: usize) -> Result<Self> {
        if k == 1 {
            return Ok(base.clone());
        }
        StateSpace::product(vec![base.clone(); k])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StateSpace::Finite { alphabet } => {
                if alphabet.is_empty() {
                    return invalid("finite alphabet is empty");
                }
                if alphabet.iter().any(|x| !x.is_finite()) {
                    return invalid("finite alphabet has a non-finite label");
                }
                let mut sorted = alphabet.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return invalid("finite alphabet has repeated labels");
                }
                Ok(())
            }
            StateSpace::UnitInterval | StateSpace::RealLine => Ok(()),
            StateSpace::Product { components } => {
                if components.len() < 2 {
                    return invalid("product space needs at least two components");
                }
                if components.len() > MAX_DIM {
                    return invalid(format!("product dimension exceeds {MAX_DIM}"));
                }
                for c in components {
                    if matches!(c, StateSpace::Product { .. }) {
                        return invalid("nested product spaces are not supported");
                    }
                    c.validate()?;
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            StateSpace::Product { components } => components.len(),
            _ => 1,
        }
    }

    /// Scalar component `i`; the space itself when scalar.
    pub fn component(&self, i: usize) -> &StateSpace {
        match self {
            StateSpace::Product { components } => &components[i],
            _ => self,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            StateSpace::Finite { .. } => true,
            StateSpace::Product { components } => components.iter().all(|c| c.is_finite()),
            _ => false,
        }
    }

    /// Whether a scalar lies in this scalar space.
    pub fn contains_scalar(&self, x: f64) -> bool {
        match self {
            StateSpace::Finite { alphabet } => alphabet.contains(&x),
            StateSpace::UnitInterval => (0.0..=1.0).contains(&x),
            StateSpace::RealLine => x.is_finite(),
            StateSpace::Product { .. } => false,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() {
            return false;
        }
        (0..p.dim()).all(|i| self.component(i).contains_scalar(p[i]))
    }

    /// All points of a finite space in lexicographic order.
    pub fn enumerate_points(&self) -> Option<Vec<Point>> {
        match self {
            StateSpace::Finite { alphabet } => {
                let mut a = alphabet.clone();
                a.sort_by(f64::total_cmp);
                Some(a.into_iter().map(Point::scalar).collect())
            }
            StateSpace::Product { components } => {
                let mut out = vec![Vec::new()];
                for c in components {
                    let StateSpace::Finite { alphabet } = c else {
                        return None;
                    };
                    let mut a = alphabet.clone();
                    a.sort_by(f64::total_cmp);
                    out = out
                        .into_iter()
                        .flat_map(|prefix: Vec<f64>| {
                            a.iter().map(move |&x| {
                                let mut v = prefix.clone();
                                v.push(x);
                                v
                            })
                        })
                        .collect();
                }
                Some(out.iter().map(|v| Point::new(v).expect("dimension checked")).collect())
            }
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            StateSpace::Finite { alphabet } => {
                let labels: Vec<String> = alphabet.iter().map(|x| x.to_string()).collect();
                format!("finite{{{}}}", labels.join(","))
            }
            StateSpace::UnitInterval => "unit_interval".into(),
            StateSpace::RealLine => "real_line".into(),
            StateSpace::Product { components } => {
                let parts: Vec<String> = components.iter().map(|c| c.describe()).collect();
                parts.join(" x ")
            }
        }
    }

    pub(crate) fn ensure_same(&self, other: &StateSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!("{} vs {}", self.describe(), other.describe())))
        }
    }
}

/// A point of a (possibly product) state space, stored inline. Serialises
/// as its coordinate list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    len: u8,
    coords: [f64; MAX_DIM],
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

impl Point {
    pub fn scalar(x: f64) -> Self {
        let mut coords = [0.0; MAX_DIM];
        coords[0] = x;
        Point { len: 1, coords }
    }

    pub fn new(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() || xs.len() > MAX_DIM {
            return invalid(format!("point dimension must be in 1..={MAX_DIM}"));
        }
        let mut coords = [0.0; MAX_DIM];
        coords[..xs.len()].copy_from_slice(xs);
        Ok(Point { len: xs.len() as u8, coords })
    }

    pub fn dim(&self) -> usize {
        self.len as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    /// First coordinate.
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    /// Lexicographic total order.
    pub fn total_cmp(&self, other: &Point) -> Ordering {
        for (a, b) in self.coords().iter().zip(other.coords()) {
            match a.total_cmp(b) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.len.cmp(&other.len)
    }

    /// ℓ1 distance.
    pub fn l1(&self, other: &Point) -> f64 {
        self.coords().iter().zip(other.coords()).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Hashable key; `-0.0` and `0.0` share a key.
    pub fn key(&self) -> PointKey {
        let mut k = [0u64; MAX_DIM];
        for (i, c) in self.coords().iter().enumerate() {
            k[i] = (c + 0.0).to_bits();
        }
        PointKey { len: self.len, bits: k }
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords()[i]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(":"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointKey {
    len: u8,
    bits: [u64; MAX_DIM],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_alphabet_validation() {
        assert!(StateSpace::finite(vec![]).is_err());
        assert!(StateSpace::finite(vec![0.0, 1.0, 0.0]).is_err());
        assert!(StateSpace::finite(vec![f64::NAN]).is_err());
        assert!(StateSpace::finite(vec![-1.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn product_validation() {
        assert!(StateSpace::product(vec![StateSpace::UnitInterval]).is_err());
        let p = StateSpace::product(vec![StateSpace::UnitInterval, StateSpace::RealLine]).unwrap();
        assert!(StateSpace::product(vec![p.clone(), StateSpace::RealLine]).is_err());
        assert!(StateSpace::product(vec![StateSpace::RealLine; 5]).is_err());
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn membership() {
        let s = StateSpace::binary();
        assert!(s.contains(&Point::scalar(1.0)));
        assert!(!s.contains(&Point::scalar(0.5)));
        assert!(StateSpace::UnitInterval.contains(&Point::scalar(0.0)));
        assert!(!StateSpace::UnitInterval.contains(&Point::scalar(1.5)));
        assert!(!StateSpace::RealLine.contains(&Point::scalar(f64::INFINITY)));
        let p = StateSpace::product(vec![StateSpace::binary(), StateSpace::UnitInterval]).unwrap();
        assert!(p.contains(&Point::new(&[1.0, 0.3]).unwrap()));
        assert!(!p.contains(&Point::scalar(1.0)));
    }

    #[test]
    fn enumerate_finite_product() {
        let p = StateSpace::product(vec![StateSpace::binary(), StateSpace::binary()]).unwrap();
        let pts = p.enumerate_points().unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[2].coords(), &[1.0, 0.0]);
        assert!(StateSpace::RealLine.enumerate_points().is_none());
    }

    #[test]
    fn signed_zero_shares_key() {
        assert_eq!(Point::scalar(-0.0).key(), Point::scalar(0.0).key());
    }
}
