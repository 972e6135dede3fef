use serde::{Deserialize, Serialize};

use super::ProcessModel;
use crate::error::{invalid, Result};

/// Horizon up to which lag invariants are verified.
pub const LAG_CHECK_HORIZON: u64 = 1_000_000;

/// Lag function `g` of a sub-filtration `Gₙ = F_{n − g(n)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagSpec {
    /// `g(n) = min(m, n)`; `Gₙ` is trivial for `n ≤ m`.
    Constant { m: u64 },
    /// `g(n) = ⌊√n⌋`.
    Sqrt,
    /// `g(n) = ⌊ln(1 + n)⌋`.
    Log,
}

impl LagSpec {
    pub fn lag(&self, n: u64) -> u64 {
        match self {
            LagSpec::Constant { m } => (*m).min(n),
            LagSpec::Sqrt => (n as f64).sqrt().floor() as u64,
            LagSpec::Log => (n as f64).ln_1p().floor() as u64,
        }
    }

    /// Number of leading coordinates observed at time `n`.
    pub fn visible(&self, n: u64) -> u64 {
        n - self.lag(n)
    }

    /// `g` non-decreasing, `g(n) ≤ n`, `n − g(n)` non-decreasing, and
    /// `n⁻² Σ_{j≤n} g(j)` decreasing across `10⁴, 10⁵, 10⁶`.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0;
        let mut prev_vis = 0;
        let mut acc = 0.0f64;
        let mut ratios = Vec::new();
        for n in 0..=LAG_CHECK_HORIZON {
            let g = self.lag(n);
            if g > n {
                return invalid(format!("lag {g} exceeds n = {n}"));
            }
            if g < prev {
                return invalid(format!("lag decreases at n = {n}"));
            }
            let vis = n - g;
            if vis < prev_vis {
                return invalid(format!("observed prefix shrinks at n = {n}"));
            }
            prev = g;
            prev_vis = vis;
            acc += g as f64;
            if n == 10_000 || n == 100_000 || n == LAG_CHECK_HORIZON {
                ratios.push(acc / (n as f64).powi(2));
            }
        }
        if ratios.windows(2).any(|w| w[1] >= w[0]) && ratios.iter().any(|r| *r > 0.0) {
            return invalid(format!("n^-2 sum of lags does not decrease: {ratios:?}"));
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self {
            LagSpec::Constant { m } => format!("constant({m})"),
            LagSpec::Sqrt => "sqrt".into(),
            LagSpec::Log => "log".into(),
        }
    }
}

/// A process together with the sub-filtration induced by a lag.
#[derive(Clone, Debug, PartialEq)]
pub struct LaggedModel {
    pub inner: ProcessModel,
    pub lag: LagSpec,
}

/// Attach lag metadata to a finite-alphabet process.
pub fn lagged_filtration_model(inner: ProcessModel, lag: LagSpec) -> Result<LaggedModel> {
    if !inner.space.is_finite() {
        return invalid("sub-filtration predictives need a finite state space");
    }
    lag.validate()?;
    Ok(LaggedModel { inner, lag })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_lag_trivialises_early_filtration() {
        let g = LagSpec::Constant { m: 1 };
        assert_eq!(g.visible(0), 0);
        assert_eq!(g.visible(1), 0);
        assert_eq!(g.visible(5), 4);
        let z = LagSpec::Constant { m: 0 };
        assert_eq!(z.visible(7), 7);
    }

    #[test]
    fn catalog_lags_satisfy_invariants() {
        for g in [LagSpec::Constant { m: 0 }, LagSpec::Constant { m: 3 }, LagSpec::Sqrt, LagSpec::Log] {
            g.validate().unwrap();
        }
    }

    #[test]
    fn sqrt_lag_values() {
        assert_eq!(LagSpec::Sqrt.lag(15), 3);
        assert_eq!(LagSpec::Sqrt.lag(16), 4);
        assert_eq!(LagSpec::Log.lag(0), 0);
    }
}
