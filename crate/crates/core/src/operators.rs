//! Bellman-type operators on grid value functions.
//!
//! Substituting u = x − a turns sup_{a ∈ [0,x]} {a + Γ(x − a)} into
//! x + max_{u ≤ x} h(u) with h(u) = −u + Γ(u), so one sweep is a single
//! profile evaluation followed by a running maximum.

use crate::error::{Error, Result};
use crate::grid::{PolicyFn, SurplusGrid, ValueFn};
use crate::model::IncrementModel;
use crate::risk::{gamma_profile, RiskParams};

/// Relative width of the tie band used when selecting maximisers.
pub const TIE_TOL: f64 = 1e-10;

/// h(x_i) = −x_i + Γ(x_i), its running maximum and the maximiser selected for each prefix.
#[derive(Debug, Clone)]
pub struct HProfile {
    grid: SurplusGrid,
    h: Vec<f64>,
    prefix_max: Vec<f64>,
    argmax: Vec<usize>,
}

impl HProfile {
    /// Profile of Γ applied to `v`.
    pub fn build(v: &ValueFn, params: RiskParams, model: &IncrementModel) -> Self {
        let grid = v.grid();
        let gamma = gamma_profile(v, params, model);
        let h = gamma.iter().enumerate().map(|(i, g)| g - grid.x(i)).collect();
        Self::from_h(grid, h)
    }

    /// Running maximum of a given profile. The maximiser for prefix i is the
    /// smallest index whose value is within `TIE_TOL·(1+|max|)` of the max.
    pub fn from_h(grid: SurplusGrid, h: Vec<f64>) -> Self {
        let n = h.len();
        let mut prefix_max = Vec::with_capacity(n);
        let mut argmax = Vec::with_capacity(n);
        let mut best = f64::NEG_INFINITY;
        let mut p = 0usize;
        for i in 0..n {
            best = best.max(h[i]);
            prefix_max.push(best);
            let threshold = best - TIE_TOL * (1.0 + best.abs());
            // thresholds never decrease, so the pointer only moves forward
            while h[p] < threshold {
                p += 1;
            }
            argmax.push(p);
        }
        // make the selection idempotent: the node a maximiser retains must itself pay nothing
        for i in 0..n {
            argmax[i] = argmax[argmax[i]];
        }
        Self { grid, h, prefix_max, argmax }
    }

    pub fn grid(&self) -> SurplusGrid {
        self.grid
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn prefix_max(&self) -> &[f64] {
        &self.prefix_max
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }

    /// Largest-dividend maximiser as a policy.
    pub fn policy(&self) -> PolicyFn {
        PolicyFn::from_retained(self.grid, self.argmax.clone()).expect("argmax indices never exceed their node")
    }
}

fn same_grid(a: SurplusGrid, b: SurplusGrid) -> Result<()> {
    if a != b {
        return Err(Error::InvalidGrid("value function and policy live on different grids".into()));
    }
    Ok(())
}

/// One Bellman step: Tv and its largest maximiser.
pub fn bellman_t(v: &ValueFn, params: RiskParams, model: &IncrementModel) -> Result<(ValueFn, PolicyFn)> {
    let profile = HProfile::build(v, params, model);
    let tv = ValueFn::from_bounded(v.grid(), profile.prefix_max.clone())?;
    Ok((tv, profile.policy()))
}

/// The operator on bounded parts: Ub = (T(id + b)) − id.
pub fn operator_u(grid: SurplusGrid, b: &[f64], params: RiskParams, model: &IncrementModel) -> Result<Vec<f64>> {
    let v = ValueFn::from_bounded(grid, b.to_vec())?;
    Ok(HProfile::build(&v, params, model).prefix_max)
}

/// (L_α v)(x_i) = a_i + Γ(x_i − a_i).
pub fn operator_l(v: &ValueFn, alpha: &PolicyFn, params: RiskParams, model: &IncrementModel) -> Result<ValueFn> {
    same_grid(v.grid(), alpha.grid())?;
    let profile = HProfile::build(v, params, model);
    Ok(apply_policy(&profile, alpha))
}

/// Bounded part of L_α v is h at the retained node.
pub(crate) fn apply_policy(profile: &HProfile, alpha: &PolicyFn) -> ValueFn {
    let b = alpha.retained().iter().map(|&r| profile.h[r]).collect();
    ValueFn::from_bounded(profile.grid, b).expect("policy and profile share the grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{gamma_transform, BbarBound};
    use proptest::prelude::*;

    fn dexp(mu: f64) -> IncrementModel {
        IncrementModel::double_exponential(mu).unwrap()
    }

    #[test]
    fn prefix_max_picks_smallest_tie() {
        let grid = SurplusGrid::new(1.0, 6).unwrap();
        let p = HProfile::from_h(grid, vec![0.0, 2.0, 1.0, 2.0, 3.0, 3.0 - 1e-13]);
        assert_eq!(p.prefix_max(), &[0.0, 2.0, 2.0, 2.0, 3.0, 3.0]);
        assert_eq!(p.argmax(), &[0, 1, 1, 1, 4, 4]);
    }

    #[test]
    fn zero_function_pays_everything() {
        let grid = SurplusGrid::new(0.1, 200).unwrap();
        let zero = ValueFn::from_bounded(grid, grid.nodes().map(|x| -x).collect()).unwrap();
        // bounded support keeps every integral inside the grid away from the end
        let m = IncrementModel::left_exponential(6.0, 1.1).unwrap();
        let (tv, pol) = bellman_t(&zero, RiskParams::new(0.9, 1.0).unwrap(), &m).unwrap();
        for i in 0..grid.n_nodes() - 12 {
            assert!(tv.bounded()[i].abs() < 1e-12);
            assert_eq!(pol.retained_index(i), 0);
        }
    }

    #[test]
    fn identity_maps_to_two_stage_value() {
        let grid = SurplusGrid::new(0.05, 400).unwrap();
        let m = dexp(2.0);
        for gamma in [0.0, 0.5, 2.0] {
            let p = RiskParams::new(0.99, gamma).unwrap();
            let (tv, pol) = bellman_t(&ValueFn::identity(grid), p, &m).unwrap();
            let c = 0.99 * m.entropic_premium_positive_part(gamma);
            for i in 0..grid.n_nodes() {
                assert!((tv.bounded()[i] - c).abs() < 1e-10);
                assert_eq!(pol.retained_index(i), 0);
            }
        }
    }

    #[test]
    fn brute_force_agrees_with_prefix_max() {
        let grid = SurplusGrid::new(0.1, 120).unwrap();
        let m = dexp(0.6);
        let p = RiskParams::new(0.95, 0.8).unwrap();
        let b: Vec<f64> = grid.nodes().map(|x| 2.0 * (1.0 - (-0.5 * x).exp())).collect();
        let v = ValueFn::from_bounded(grid, b).unwrap();
        let (tv, pol) = bellman_t(&v, p, &m).unwrap();
        for i in 0..grid.n_nodes() {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0.0f64;
            for j in 0..=i {
                let a = grid.x(i) - grid.x(j);
                let val = a + gamma_transform(&v, grid.x(j), p, &m).unwrap();
                if val > best + 1e-10 * (1.0 + best.abs()) {
                    best = val;
                    best_a = a;
                } else if val >= best - 1e-10 * (1.0 + best.abs()) {
                    best = best.max(val);
                    best_a = best_a.max(a);
                }
            }
            assert!((tv.value(i) - best).abs() < 1e-12 * (1.0 + best.abs()), "node {i}");
            assert!((pol.action(i) - best_a).abs() < 1e-9, "node {i}: {} vs {best_a}", pol.action(i));
        }
    }

    #[test]
    fn l_with_pay_all_on_zero_is_identity() {
        let grid = SurplusGrid::new(0.2, 50).unwrap();
        let zero = ValueFn::from_bounded(grid, grid.nodes().map(|x| -x).collect()).unwrap();
        let m = IncrementModel::left_exponential(6.0, 1.1).unwrap();
        let lv = operator_l(&zero, &PolicyFn::pay_all(grid), RiskParams::new(0.9, 2.0).unwrap(), &m).unwrap();
        assert!(lv.bounded().iter().all(|b| b.abs() < 1e-12));
    }

    #[test]
    fn l_stays_below_upper_bound() {
        let m = dexp(1.2);
        let p = RiskParams::new(0.95, 1.0).unwrap();
        let bbar = BbarBound::new(p.beta(), &m).value;
        let grid = SurplusGrid::new(0.25, 400).unwrap();
        let v = ValueFn::shifted_identity(grid, bbar);
        for alpha in [PolicyFn::pay_all(grid), PolicyFn::barrier(grid, 20)] {
            let lv = operator_l(&v, &alpha, p, &m).unwrap();
            assert!(lv.bounded().iter().all(|b| *b <= bbar + 1e-10));
        }
    }

    fn bounded_strategy(n: usize, bbar: f64) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..bbar, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn u_is_a_beta_contraction(b in bounded_strategy(60, 2.0), c in bounded_strategy(60, 2.0), gamma in 0.0f64..3.0) {
            let grid = SurplusGrid::new(0.2, 60).unwrap();
            let m = dexp(0.7);
            let p = RiskParams::new(0.9, gamma).unwrap();
            let ub = operator_u(grid, &b, p, &m).unwrap();
            let uc = operator_u(grid, &c, p, &m).unwrap();
            let lhs = ub.iter().zip(&uc).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let rhs = b.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(lhs <= 0.9 * rhs + 1e-12);
        }

        #[test]
        fn t_is_monotone_and_secant(b in bounded_strategy(60, 2.0), bump in bounded_strategy(60, 0.5), gamma in 0.0f64..3.0) {
            let grid = SurplusGrid::new(0.2, 60).unwrap();
            let m = dexp(0.7);
            let p = RiskParams::new(0.9, gamma).unwrap();
            let v = ValueFn::from_bounded(grid, b.clone()).unwrap();
            let w = ValueFn::from_bounded(grid, b.iter().zip(&bump).map(|(x, y)| x + y).collect()).unwrap();
            let (tv, _) = bellman_t(&v, p, &m).unwrap();
            let (tw, _) = bellman_t(&w, p, &m).unwrap();
            for i in 0..60 {
                prop_assert!(tv.value(i) <= tw.value(i) + 1e-12);
                prop_assert!(tv.value(i) >= grid.x(i) - 1e-12);
                if i > 0 {
                    prop_assert!(tv.value(i) - tv.value(i - 1) >= grid.step() - 1e-12);
                }
            }
        }

        #[test]
        fn maximiser_is_idempotent(h in prop::collection::vec(-1.0f64..1.0, 2..80)) {
            let n = h.len();
            let grid = SurplusGrid::new(0.1, n).unwrap();
            let p = HProfile::from_h(grid, h);
            for i in 0..n {
                let r = p.argmax()[i];
                prop_assert!(r <= i);
                prop_assert_eq!(p.argmax()[r], r);
                prop_assert!(p.h()[r] >= p.prefix_max()[i] - 3e-10 * (1.0 + p.prefix_max()[i].abs()));
                if i > 0 {
                    prop_assert!(p.argmax()[i] >= p.argmax()[i - 1]);
                }
            }
        }
    }
}
