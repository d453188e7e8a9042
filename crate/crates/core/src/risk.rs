//! Entropic certainty equivalents and the ruin-weighted continuation integral.

use crate::error::{Error, Result};
use crate::grid::ValueFn;
use crate::kernel::ContinuationKernel;
use crate::model::IncrementModel;

/// Discount factor and risk aversion. `gamma == 0` selects plain expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    beta: f64,
    gamma: f64,
}

impl RiskParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParams(format!("beta must lie in (0,1), got {beta}")));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParams(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { beta, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_risk_neutral(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.beta, gamma)
    }
}

/// Upper bound b̄ = β E Z⁺ / (1 − β) on the bounded part of any value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbarBound {
    pub value: f64,
    beta: f64,
}

impl BbarBound {
    pub fn new(beta: f64, model: &IncrementModel) -> Self {
        Self { value: beta * model.mean_positive_part() / (1.0 - beta), beta }
    }

    /// ξ* = b̄ / (1 − β), the a-priori cap on the no-payout threshold.
    pub fn xi_star(&self) -> f64 {
        self.value / (1.0 - self.beta)
    }
}

/// −(1/γ) ln Σ wᵢ e^{−γ vᵢ}, or Σ wᵢ vᵢ when γ = 0.
pub fn certainty_equivalent(values: &[f64], weights: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() || weights.is_empty() {
        return Err(Error::EmptySupport);
    }
    if values.len() != weights.len() {
        return Err(Error::InvalidParams(format!(
            "{} values against {} weights",
            values.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidParams("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("weights sum to {total}, not 1")));
    }
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidParams(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if gamma == 0.0 {
        return Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum());
    }
    let m = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return Err(Error::EmptySupport);
    }
    let s: f64 = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| w * (-gamma * (v - m)).exp())
        .sum();
    Ok(m - s.ln() / gamma)
}

/// The continuation integral at retained surplus u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuationIntegral {
    /// R(u) = ∫_0^∞ e^{−γv(w)} g(w−u) dw + G(−u), stored as ln R.
    Entropic { ln_value: f64 },
    /// E[v(u+Z); Z ≥ −u] together with the ruin mass G(−u).
    Expectation { survival_value: f64, ruin_mass: f64 },
}

impl ContinuationIntegral {
    /// Certainty equivalent of v(u+Z) with ruin paying zero.
    pub fn certainty_equivalent(&self, gamma: f64) -> f64 {
        match *self {
            Self::Entropic { ln_value } => -ln_value / gamma,
            Self::Expectation { survival_value, ruin_mass } => survival_value + 0.0 * ruin_mass,
        }
    }
}

fn check_reach(v: &ValueFn, u: f64) -> Result<()> {
    let x_max = v.grid().x_max();
    if !(u >= 0.0) || u > x_max * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::GridTooShort { u, x_max });
    }
    Ok(())
}

/// Evaluates the continuation integral of v at u.
pub fn risk_integral(v: &ValueFn, u: f64, model: &IncrementModel, gamma: f64) -> Result<ContinuationIntegral> {
    check_reach(v, u)?;
    let k = ContinuationKernel::new(v, model, gamma);
    Ok(if gamma > 0.0 {
        ContinuationIntegral::Entropic { ln_value: k.log_risk_integral(u) }
    } else {
        ContinuationIntegral::Expectation { survival_value: k.expectation(u), ruin_mass: model.cdf(-u) }
    })
}

/// ln R(u) for γ > 0.
pub fn log_risk_integral(v: &ValueFn, u: f64, model: &IncrementModel, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams("log_risk_integral needs gamma > 0".into()));
    }
    check_reach(v, u)?;
    Ok(ContinuationKernel::new(v, model, gamma).log_risk_integral(u))
}

/// Γ(u) = −(β/γ) ln R(u), or β E[v(u+Z); Z ≥ −u] when γ = 0.
pub fn gamma_transform(v: &ValueFn, u: f64, params: RiskParams, model: &IncrementModel) -> Result<f64> {
    check_reach(v, u)?;
    Ok(ContinuationKernel::new(v, model, params.gamma()).gamma_transform(u, params.beta()))
}

/// Γ at every grid node, sharing one kernel setup.
pub fn gamma_profile(v: &ValueFn, params: RiskParams, model: &IncrementModel) -> Vec<f64> {
    let k = ContinuationKernel::new(v, model, params.gamma());
    let grid = v.grid();
    crate::par::map_nodes(grid.n_nodes(), |i| k.gamma_transform(grid.x(i), params.beta()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SurplusGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dist() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (prop::collection::vec(-20.0f64..20.0, n), prop::collection::vec(0.01f64..1.0, n)).prop_map(
                |(v, w)| {
                    let s: f64 = w.iter().sum();
                    (v, w.iter().map(|x| x / s).collect())
                },
            )
        })
    }

    #[test]
    fn two_point_examples() {
        let ce = certainty_equivalent(&[0.0, 1.0], &[0.5, 0.5], 1.0).unwrap();
        let direct = -((1.0 + (-1.0f64).exp()) / 2.0).ln();
        assert_relative_eq!(ce, direct, epsilon = 1e-15);
        assert_relative_eq!(ce, 0.379_885_49, epsilon = 1e-8);
        assert_eq!(certainty_equivalent(&[0.0, 1.0], &[0.5, 0.5], 0.0).unwrap(), 0.5);
        assert_relative_eq!(certainty_equivalent(&[3.5; 4], &[0.25; 4], 7.0).unwrap(), 3.5, epsilon = 1e-14);
    }

    #[test]
    fn rejects_empty_and_unnormalized() {
        assert!(matches!(certainty_equivalent(&[], &[], 1.0), Err(Error::EmptySupport)));
        assert!(matches!(certainty_equivalent(&[1.0], &[0.9], 1.0), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn large_magnitudes_stay_finite() {
        let v = [500.0, -500.0, 250.0];
        let w = [0.2, 0.3, 0.5];
        for g in [0.5, 1.0, 1.4] {
            let ce = certainty_equivalent(&v, &w, g).unwrap();
            assert!(ce.is_finite());
            // dominated by the worst outcome
            assert!((ce - (-500.0 - 0.3f64.ln() / g)).abs() < 1e-9);
        }
        let ce = certainty_equivalent(&[500.0, 499.0], &[0.5, 0.5], 1.4).unwrap();
        assert!(ce > 499.0 && ce < 500.0);
    }

    #[test]
    fn mean_variance_approximation() {
        let v = [0.3, 1.7, -0.4, 2.2];
        let w = [0.1, 0.4, 0.3, 0.2];
        let mean: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let var: f64 = v.iter().zip(&w).map(|(a, b)| b * (a - mean).powi(2)).sum();
        for g in [1e-2, 1e-3, 1e-4] {
            let ce = certainty_equivalent(&v, &w, g).unwrap();
            let approx = mean - g / 2.0 * var;
            // next term of the cumulant expansion is O(γ²)
            assert!((ce - approx).abs() <= 2.0 * g * g, "gamma={g}: {ce} vs {approx}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn monotone((v, w) in dist(), bump in prop::collection::vec(0.0f64..3.0, 12), g in 0.0f64..5.0) {
            let v2: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let a = certainty_equivalent(&v, &w, g).unwrap();
            let b = certainty_equivalent(&v2, &w, g).unwrap();
            prop_assert!(a <= b + 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn translation((v, w) in dist(), c in -50.0f64..50.0, g in 0.0f64..5.0) {
            let shifted: Vec<f64> = v.iter().map(|a| a + c).collect();
            let a = certainty_equivalent(&v, &w, g).unwrap();
            let b = certainty_equivalent(&shifted, &w, g).unwrap();
            prop_assert!((b - a - c).abs() <= 1e-10 * (1.0 + a.abs() + c.abs()));
        }

        #[test]
        fn below_mean((v, w) in dist(), g in 0.0f64..5.0) {
            let ce = certainty_equivalent(&v, &w, g).unwrap();
            let mean: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            prop_assert!(ce <= mean + 1e-10 * (1.0 + mean.abs()));
            let spread = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().cloned().fold(f64::INFINITY, f64::min);
            if g > 1e-3 && spread > 1e-3 {
                prop_assert!(ce < mean);
            }
        }
    }

    fn dexp(mu: f64) -> IncrementModel {
        IncrementModel::double_exponential(mu).unwrap()
    }

    #[test]
    fn zero_value_integral_is_one() {
        let grid = SurplusGrid::new(0.1, 400).unwrap();
        let zero = ValueFn::from_bounded(grid, grid.nodes().map(|x| -x).collect()).unwrap();
        for u in [0.0, 1.0, 5.0] {
            let ci = risk_integral(&zero, u, &dexp(2.0), 1.3).unwrap();
            match ci {
                ContinuationIntegral::Entropic { ln_value } => assert!(ln_value.abs() < 1e-12),
                _ => unreachable!(),
            }
        }
        let p = RiskParams::new(0.9, 1.3).unwrap();
        assert!(gamma_transform(&zero, 2.0, p, &dexp(2.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn identity_at_origin_gives_premium() {
        let grid = SurplusGrid::new(0.05, 1200).unwrap();
        let id = ValueFn::identity(grid);
        let m = dexp(2.0);
        let lr = log_risk_integral(&id, 0.0, &m, 1.0).unwrap();
        assert_relative_eq!(lr.exp(), (-m.entropic_premium_positive_part(1.0)).exp(), max_relative = 1e-11);
        let p = RiskParams::new(0.99, 1.0).unwrap();
        let g0 = gamma_transform(&id, 0.0, p, &m).unwrap();
        assert_relative_eq!(g0, 0.99 * m.entropic_premium_positive_part(1.0), max_relative = 1e-11);
        let neutral = RiskParams::new(0.99, 0.0).unwrap();
        let g0 = gamma_transform(&id, 0.0, neutral, &m).unwrap();
        assert_relative_eq!(g0, 0.99 * m.mean_positive_part(), max_relative = 1e-12);
    }

    #[test]
    fn expectation_branch_pair() {
        let grid = SurplusGrid::new(0.05, 1200).unwrap();
        let id = ValueFn::identity(grid);
        let m = dexp(0.5);
        match risk_integral(&id, 1.0, &m, 0.0).unwrap() {
            ContinuationIntegral::Expectation { survival_value, ruin_mass } => {
                // E[(1+Z); Z ≥ −1] = P(Z ≥ −1) + ∫_{−1}^∞ z g
                let want = (1.0 - m.cdf(-1.0)) + m.first_moment_above(-1.0);
                assert_relative_eq!(survival_value, want, max_relative = 1e-12);
                assert_relative_eq!(ruin_mass, m.cdf(-1.0), max_relative = 1e-14);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn bounded_by_shifted_identity() {
        let m = dexp(1.2);
        let p = RiskParams::new(0.95, 0.7).unwrap();
        let bbar = BbarBound::new(p.beta(), &m).value;
        let grid = SurplusGrid::new(0.1, 600).unwrap();
        let v = ValueFn::shifted_identity(grid, bbar);
        for u in [0.0, 3.0, 20.0] {
            let g = gamma_transform(&v, u, p, &m).unwrap();
            assert!(g >= 0.0 && g <= p.beta() * (u + bbar) + p.beta() * m.mean_positive_part() + 1e-12);
        }
    }

    #[test]
    fn translation_and_monotonicity_of_gamma() {
        let m = dexp(0.8);
        let p = RiskParams::new(0.9, 2.0).unwrap();
        let grid = SurplusGrid::new(0.1, 300).unwrap();
        let b: Vec<f64> = grid.nodes().map(|x| 1.0 - (-x).exp()).collect();
        let v = ValueFn::from_bounded(grid, b.clone()).unwrap();
        let up = ValueFn::from_bounded(grid, b.iter().map(|x| x + 0.4).collect()).unwrap();
        for u in [0.0, 1.0, 7.0] {
            let a = gamma_transform(&v, u, p, &m).unwrap();
            let c = gamma_transform(&up, u, p, &m).unwrap();
            assert!(c >= a);
            // shifting v by a constant on [0,∞) keeps the ruin value at zero, so the
            // increase is at most β·0.4
            assert!(c - a <= 0.9 * 0.4 + 1e-12);
        }
    }

    #[test]
    fn beyond_grid_is_an_error() {
        let grid = SurplusGrid::new(0.1, 11).unwrap();
        let v = ValueFn::identity(grid);
        let err = gamma_transform(&v, 2.0, RiskParams::new(0.9, 1.0).unwrap(), &dexp(1.0)).unwrap_err();
        assert!(matches!(err, Error::GridTooShort { .. }));
    }

    #[test]
    fn params_validation() {
        assert!(RiskParams::new(1.0, 0.5).is_err());
        assert!(RiskParams::new(0.5, -0.1).is_err());
        assert!(RiskParams::new(0.5, 0.0).unwrap().is_risk_neutral());
    }
}
