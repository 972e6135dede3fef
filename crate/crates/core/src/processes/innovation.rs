use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::finite::{check_probability, invert};
use crate::error::{invalid, Result};
use crate::measure::{FunctionKind, Phase, PointSet, TestFunction};
use crate::quad::{integrate_with_breaks, normal_cdf, normal_pdf};

/// Standardisation tolerance on mean and variance.
const STANDARD_TOL: f64 = 1e-12;
/// Quadrature tolerance for expectations without a closed form.
pub const QUAD_TOL: f64 = 1e-9;
/// Half-width, in standard deviations, of the Gaussian integration range.
const GAUSS_RANGE: f64 = 8.0;

/// Law of the i.i.d. increments of a normalised random walk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Innovation {
    Gaussian { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl Innovation {
    pub fn standard_gaussian() -> Self {
        Innovation::Gaussian { mean: 0.0, sd: 1.0 }
    }

    pub fn standard_uniform() -> Self {
        let h = 3f64.sqrt();
        Innovation::Uniform { lo: -h, hi: h }
    }

    pub fn rademacher() -> Self {
        Innovation::Discrete { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Innovation::Gaussian { mean, .. } => *mean,
            Innovation::Uniform { lo, hi } => 0.5 * (lo + hi),
            Innovation::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Innovation::Gaussian { sd, .. } => sd * sd,
            Innovation::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Innovation::Discrete { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m).powi(2)).sum()
            }
        }
    }

    /// Mean 0 and variance 1 within tolerance.
    pub fn validate(&self) -> Result<()> {
        match self {
            Innovation::Gaussian { mean, sd } if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) => {
                return invalid("gaussian innovation needs finite mean and positive sd")
            }
            Innovation::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                return invalid("uniform innovation needs finite lo < hi")
            }
            Innovation::Discrete { values, probs } => {
                check_probability(probs, values.len(), "innovation probabilities")?;
                if values.iter().any(|v| !v.is_finite()) {
                    return invalid("innovation values must be finite");
                }
            }
            _ => {}
        }
        let (m, v) = (self.mean(), self.variance());
        if m.abs() > STANDARD_TOL || (v - 1.0).abs() > STANDARD_TOL {
            return invalid(format!("innovation is not standardised: mean {m}, variance {v}"));
        }
        Ok(())
    }

    pub fn is_absolutely_continuous(&self) -> bool {
        !matches!(self, Innovation::Discrete { .. })
    }

    /// `E|Z|`.
    pub fn mean_abs(&self) -> f64 {
        match self {
            Innovation::Gaussian { mean, sd } => {
                let a = mean / sd;
                sd * (2.0 * normal_pdf(a)) + mean * (1.0 - 2.0 * normal_cdf(-a))
            }
            Innovation::Uniform { lo, hi } => {
                if *lo >= 0.0 {
                    0.5 * (lo + hi)
                } else if *hi <= 0.0 {
                    -0.5 * (lo + hi)
                } else {
                    (lo * lo + hi * hi) / (2.0 * (hi - lo))
                }
            }
            Innovation::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| p * v.abs()).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Innovation::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Innovation::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Innovation::Discrete { values, probs } => values[invert(probs, rng.random())],
        }
    }

    /// `E g(shift + scale·(Z₁ + … + Z_k))` for `k ∈ {1, 2}`.
    pub fn expect(&self, g: &TestFunction, shift: f64, scale: f64, k: u32) -> f64 {
        debug_assert!(k == 1 || k == 2);
        if scale == 0.0 {
            return g.eval_scalar(shift);
        }
        match self {
            Innovation::Gaussian { mean, sd } => {
                let kf = f64::from(k);
                gaussian_expect(g, shift + scale * kf * mean, scale.abs() * sd * kf.sqrt())
            }
            Innovation::Discrete { values, probs } => {
                let mut s = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    if k == 1 {
                        s += p * g.eval_scalar(shift + scale * v);
                    } else {
                        for (w, q) in values.iter().zip(probs) {
                            s += p * q * g.eval_scalar(shift + scale * (v + w));
                        }
                    }
                }
                s
            }
            Innovation::Uniform { lo, hi } => {
                let width = hi - lo;
                let breaks = function_breaks(g, shift, scale);
                if k == 1 {
                    let h = |z: f64| g.eval_scalar(shift + scale * z) / width;
                    integrate_with_breaks(h, *lo, *hi, &breaks, QUAD_TOL)
                } else {
                    // Triangular density of the sum on [2lo, 2hi].
                    let mid = lo + hi;
                    let dens = |s: f64| (width - (s - mid).abs()).max(0.0) / (width * width);
                    let h = |s: f64| g.eval_scalar(shift + scale * s) * dens(s);
                    let mut b = breaks;
                    b.push(mid);
                    integrate_with_breaks(h, 2.0 * lo, 2.0 * hi, &b, QUAD_TOL)
                }
            }
        }
    }
}

/// Points `z` where `g(shift + scale·z)` has a kink or jump.
fn function_breaks(g: &TestFunction, shift: f64, scale: f64) -> Vec<f64> {
    let xs: Vec<f64> = match &g.kind {
        FunctionKind::Indicator(set) => set.edges(),
        FunctionKind::ClampLinear { lo, hi } => vec![*lo, *hi],
        FunctionKind::LipschitzPiecewise { knots, .. } => knots.clone(),
        _ => Vec::new(),
    };
    xs.into_iter().map(|x| (x - shift) / scale).collect()
}

/// `E g(μ + σN)` for standard normal `N`, in closed form where available.
pub fn gaussian_expect(g: &TestFunction, mu: f64, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return g.eval_scalar(mu);
    }
    match &g.kind {
        FunctionKind::ClampLinear { lo, hi } => {
            let a = (lo - mu) / sigma;
            let b = (hi - mu) / sigma;
            let (fa, fb) = (normal_cdf(a), normal_cdf(b));
            lo * fa + hi * (1.0 - fb) + mu * (fb - fa) - sigma * (normal_pdf(b) - normal_pdf(a))
        }
        FunctionKind::Indicator(PointSet::Interval { lo, hi, .. }) => {
            normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma)
        }
        FunctionKind::Indicator(_) => 0.0,
        FunctionKind::Trig { frequency, phase } => {
            let w = TAU * f64::from(*frequency);
            let damp = (-0.5 * w * w * sigma * sigma).exp();
            match phase {
                Phase::Cos => damp * (w * mu).cos(),
                Phase::Sin => damp * (w * mu).sin(),
            }
        }
        _ => {
            let breaks = function_breaks(g, mu, sigma);
            let h = |z: f64| g.eval_scalar(mu + sigma * z) * normal_pdf(z);
            integrate_with_breaks(h, -GAUSS_RANGE, GAUSS_RANGE, &breaks, QUAD_TOL)
        }
    }
}

/// `E|N|` for a standard normal.
pub fn half_normal_mean() -> f64 {
    (2.0 / PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::StateSpace;

    #[test]
    fn standardisation() {
        assert!(Innovation::standard_gaussian().validate().is_ok());
        assert!(Innovation::standard_uniform().validate().is_ok());
        assert!(Innovation::rademacher().validate().is_ok());
        assert!(Innovation::Gaussian { mean: 0.0, sd: 2.0 }.validate().is_err());
        assert!(Innovation::Uniform { lo: 0.0, hi: 1.0 }.validate().is_err());
    }

    #[test]
    fn mean_abs_oracles() {
        assert!((Innovation::standard_gaussian().mean_abs() - half_normal_mean()).abs() < 1e-15);
        assert!((Innovation::standard_uniform().mean_abs() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(Innovation::rademacher().mean_abs(), 1.0);
    }

    /// Closed forms against direct quadrature of `g(μ+σz)φ(z)`.
    #[test]
    fn gaussian_closed_forms_match_quadrature() {
        let s = StateSpace::RealLine;
        let fs = [
            TestFunction::clamp_linear(&s, -1.0, 1.0).unwrap(),
            TestFunction::trig(&s, 1, Phase::Cos),
            TestFunction::trig(&s, 2, Phase::Sin),
            TestFunction::indicator(&s, PointSet::closed_open(-0.5, 2.0)),
        ];
        for f in &fs {
            for &(mu, sigma) in &[(0.0, 1.0), (0.7, 0.3), (-1.2, 2.0)] {
                let closed = gaussian_expect(f, mu, sigma);
                let h = |z: f64| f.eval_scalar(mu + sigma * z) * normal_pdf(z);
                let brute = integrate_with_breaks(h, -12.0, 12.0, &function_breaks(f, mu, sigma), 1e-12);
                assert!((closed - brute).abs() < 1e-9, "{} at ({mu},{sigma}): {closed} vs {brute}", f.id);
            }
        }
    }

    #[test]
    fn two_step_uniform_uses_triangular_density() {
        let s = StateSpace::RealLine;
        let sq = TestFunction::piecewise(&s, vec![-10.0, 0.0, 10.0], vec![10.0, 0.0, 10.0]).unwrap();
        // E|Z1 + Z2| = 2h/3 for two uniforms on [-h, h]: the sum is triangular on [-2h, 2h].
        let u = Innovation::standard_uniform();
        let exact = 2.0 * 3f64.sqrt() / 3.0;
        let got = u.expect(&sq, 0.0, 1.0, 2);
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn discrete_two_step() {
        let s = StateSpace::RealLine;
        let ind = TestFunction::indicator(&s, PointSet::Values(vec![0.0]));
        // Z1 + Z2 = 0 with probability 1/2 for Rademacher steps.
        assert_eq!(Innovation::rademacher().expect(&ind, 0.0, 1.0, 2), 0.5);
    }
}
