use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Number of leading terms checked when validating a declared range.
pub const RANGE_CHECK_TERMS: u64 = 1 << 16;

/// A deterministic real sequence `s₀, s₁, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    Constant { value: f64 },
    /// `1/√(n + shift)`.
    ReciprocalSqrt { shift: f64 },
    /// `scale · ratioⁿ`.
    Geometric { scale: f64, ratio: f64 },
    /// `n!`.
    Factorial,
    /// Listed values; the last one repeats.
    Table { values: Vec<f64> },
    /// `1 − inner(n)`.
    OneMinus { inner: Box<SequenceSpec> },
    /// `(n + offset)/(n + offset + 1)`.
    PolyaRatio { offset: f64 },
}

impl SequenceSpec {
    pub fn term(&self, n: u64) -> f64 {
        let x = n as f64;
        match self {
            SequenceSpec::Constant { value } => *value,
            SequenceSpec::ReciprocalSqrt { shift } => 1.0 / (x + shift).sqrt(),
            SequenceSpec::Geometric { scale, ratio } => scale * ratio.powf(x),
            SequenceSpec::Factorial => libm::tgamma(x + 1.0),
            SequenceSpec::Table { values } => values[(n as usize).min(values.len() - 1)],
            SequenceSpec::OneMinus { inner } => inner.complement(n),
            SequenceSpec::PolyaRatio { offset } => (x + offset) / (x + offset + 1.0),
        }
    }

    /// `1 − term(n)`, computed without cancellation where possible.
    pub fn complement(&self, n: u64) -> f64 {
        match self {
            SequenceSpec::OneMinus { inner } => inner.term(n),
            SequenceSpec::PolyaRatio { offset } => 1.0 / (n as f64 + offset + 1.0),
            s => 1.0 - s.term(n),
        }
    }

    pub fn ln_complement(&self, n: u64) -> f64 {
        match self {
            SequenceSpec::OneMinus { inner } => inner.ln_term(n),
            s => s.complement(n).ln(),
        }
    }

    /// `ln term(n)`, finite even where `term` overflows.
    pub fn ln_term(&self, n: u64) -> f64 {
        let x = n as f64;
        match self {
            SequenceSpec::Geometric { scale, ratio } => scale.ln() + x * ratio.ln(),
            SequenceSpec::Factorial => libm::lgamma(x + 1.0),
            s => s.term(n).ln(),
        }
    }

    pub fn validate_shape(&self) -> Result<()> {
        match self {
            SequenceSpec::Constant { value } if !value.is_finite() => invalid("constant sequence is not finite"),
            SequenceSpec::ReciprocalSqrt { shift } if !(shift.is_finite() && *shift > 0.0) => {
                invalid("reciprocal_sqrt needs a positive shift")
            }
            SequenceSpec::Geometric { scale, ratio } if !(*scale > 0.0 && *ratio > 0.0 && scale.is_finite() && ratio.is_finite()) => {
                invalid("geometric sequence needs positive scale and ratio")
            }
            SequenceSpec::Table { values } if values.is_empty() || values.iter().any(|v| !v.is_finite()) => {
                invalid("table sequence needs finite values")
            }
            SequenceSpec::OneMinus { inner } => inner.validate_shape(),
            SequenceSpec::PolyaRatio { offset } if !(offset.is_finite() && *offset > 0.0) => {
                invalid("polya_ratio needs a positive offset")
            }
            _ => Ok(()),
        }
    }

    /// Check that terms `first..first + RANGE_CHECK_TERMS` lie strictly
    /// between `lo` and `hi`.
    pub fn check_open_range(&self, first: u64, lo: f64, hi: f64, what: &str) -> Result<()> {
        self.validate_shape()?;
        for n in first..first + RANGE_CHECK_TERMS {
            let t = self.term(n);
            let below = if hi == 1.0 { self.ln_complement(n) > f64::NEG_INFINITY } else { t < hi };
            let inside = t > lo && below;
            if !inside {
                return invalid(format!("{what}: term {n} = {t} outside ({lo}, {hi})"));
            }
        }
        Ok(())
    }

    /// Check that every checked term is positive, in the log domain.
    pub fn check_positive(&self, what: &str) -> Result<()> {
        self.validate_shape()?;
        for n in 0..RANGE_CHECK_TERMS {
            let l = self.ln_term(n);
            if l.is_nan() || l == f64::NEG_INFINITY {
                return invalid(format!("{what}: term {n} is not positive"));
            }
        }
        Ok(())
    }
}

/// Partial sums of a non-negative series at `10⁵` and `10⁶` terms.
pub fn partial_sums<F: Fn(u64) -> f64>(term: F, first: u64) -> (f64, f64) {
    let mut s = 0.0;
    let mut at_1e5 = 0.0;
    for n in first..first + 1_000_000 {
        s += term(n);
        if n + 1 - first == 100_000 {
            at_1e5 = s;
        }
    }
    (at_1e5, s)
}

/// Numerical summability test: the tail between `10⁵` and `10⁶` terms
/// contributes less than `1e-3`.
pub fn looks_summable<F: Fn(u64) -> f64>(term: F, first: u64) -> bool {
    let (a, b) = partial_sums(term, first);
    b.is_finite() && b - a < 1e-3
}
