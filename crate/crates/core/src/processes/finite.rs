use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::measure::{DiscreteMeasure, Point, StateSpace, WEIGHT_TOL};

/// Probability vector over a finite real alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Categorical {
    pub alphabet: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Categorical {
    pub fn new(alphabet: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let c = Categorical { alphabet, weights };
        c.validate()?;
        Ok(c)
    }

    pub fn uniform(alphabet: Vec<f64>) -> Result<Self> {
        let w = 1.0 / alphabet.len().max(1) as f64;
        let weights = vec![w; alphabet.len()];
        Self::new(alphabet, weights)
    }

    pub fn validate(&self) -> Result<()> {
        StateSpace::finite(self.alphabet.clone())?;
        check_probability(&self.weights, self.alphabet.len(), "categorical weights")
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::Finite { alphabet: self.alphabet.clone() }
    }

    pub fn measure(&self) -> DiscreteMeasure {
        DiscreteMeasure::on_alphabet(&self.space(), self.weights.clone()).expect("validated")
    }

    pub fn mean(&self) -> f64 {
        self.alphabet.iter().zip(&self.weights).map(|(x, w)| x * w).sum()
    }

    pub fn is_degenerate(&self) -> bool {
        self.weights.iter().filter(|w| **w > 0.0).count() <= 1
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.alphabet.iter().position(|a| *a == x)
    }

    pub fn point(&self, i: usize) -> Point {
        Point::scalar(self.alphabet[i])
    }
}

pub(crate) fn check_probability(w: &[f64], len: usize, what: &str) -> Result<()> {
    if w.len() != len {
        return invalid(format!("{what}: expected {len} entries, got {}", w.len()));
    }
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return invalid(format!("{what}: entries must be finite and non-negative"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > WEIGHT_TOL {
        return invalid(format!("{what}: entries sum to {s}, not 1"));
    }
    Ok(())
}

/// Index drawn from probability vector `w` by inversion of `u ∈ [0,1)`.
pub(crate) fn invert(w: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in w.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` above the final partial sum: take the last positive entry.
    w.iter().rposition(|p| *p > 0.0).unwrap_or(w.len() - 1)
}

/// Row-stochastic matrix indexed by source state in alphabet order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KernelSpec {
    pub rows: Vec<Vec<f64>>,
}

impl KernelSpec {
    pub fn identity(size: usize) -> Self {
        let rows = (0..size).map(|i| (0..size).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        KernelSpec { rows }
    }

    pub fn validate(&self, size: usize) -> Result<()> {
        if self.rows.len() != size {
            return invalid(format!("kernel has {} rows for an alphabet of {size}", self.rows.len()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            check_probability(r, size, &format!("kernel row {i}"))?;
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| r.iter().enumerate().all(|(j, &v)| v == f64::from(u8::from(i == j))))
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from]
    }

    pub fn row_measure(&self, alphabet: &[f64], from: usize) -> DiscreteMeasure {
        let space = StateSpace::Finite { alphabet: alphabet.to_vec() };
        DiscreteMeasure::on_alphabet(&space, self.rows[from].clone()).expect("validated kernel")
    }
}
