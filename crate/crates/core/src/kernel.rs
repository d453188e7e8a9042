//! Exact evaluation of the continuation integral
//!
//!   R(u) = ∫_0^∞ e^{−γ v(w)} g(w − u) dw + G(−u)          (γ > 0)
//!   E(u) = ∫_0^∞ v(w) g(w − u) dw                          (γ = 0)
//!
//! for a grid value function v (linear between nodes, constant bounded part
//! past the last node). On every grid cell the integrand is an exponential
//! (or polynomial) times the density piece, so each cell integrates in closed
//! form. Exponential tails are handled with running accumulators, which makes
//! one evaluation O(1) after an O(n) setup; linear (tabulated) pieces are
//! summed over the cells under their window.
//!
//! The entropic branch works in log space throughout: far from the origin both
//! the ruin mass and the continuation term underflow long before their ratio
//! matters.

use crate::grid::ValueFn;
use crate::model::{DensityPiece, IncrementModel};
use crate::numeric::{int_exp_moments, ln_int_exp, log_add_exp, log_sum_exp};

#[derive(Debug, Clone)]
enum TailAcc {
    /// rate r, scale factor ln(A) + r·hi, upper offset hi, accumulator per node
    Left { rate: f64, ln_factor: f64, hi: f64, acc: Vec<f64> },
    Right { decay: f64, ln_factor: f64, lo: f64, acc: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct ContinuationKernel<'a> {
    model: &'a IncrementModel,
    gamma: f64,
    step: f64,
    last: usize,
    /// v at the left end of cell i (cell `last` is the tail extension)
    v_left: Vec<f64>,
    /// slope of v on cell i
    slope: Vec<f64>,
    tails: Vec<TailAcc>,
    linear: Vec<(f64, f64, f64, f64)>,
}

impl<'a> ContinuationKernel<'a> {
    pub(crate) fn new(v: &ValueFn, model: &'a IncrementModel, gamma: f64) -> Self {
        let grid = v.grid();
        let h = grid.step();
        let n = grid.n_nodes();
        let b = v.bounded();
        let v_left: Vec<f64> = (0..n).map(|i| grid.x(i) + b[i]).collect();
        let mut slope: Vec<f64> = (0..n - 1).map(|i| 1.0 + (b[i + 1] - b[i]) / h).collect();
        slope.push(1.0);
        let mut kernel = Self {
            model,
            gamma,
            step: h,
            last: n - 1,
            v_left,
            slope,
            tails: Vec::new(),
            linear: Vec::new(),
        };
        for piece in model.pieces() {
            match piece {
                DensityPiece::LeftTail { ln_scale, rate, hi } => {
                    let acc = kernel.left_accumulator(rate);
                    kernel.tails.push(TailAcc::Left { rate, ln_factor: ln_scale + rate * hi, hi, acc });
                }
                DensityPiece::RightTail { ln_scale, decay, lo } => {
                    let acc = kernel.right_accumulator(decay);
                    kernel.tails.push(TailAcc::Right { decay, ln_factor: ln_scale - decay * lo, lo, acc });
                }
                DensityPiece::Linear { lo, hi, intercept, slope } => {
                    kernel.linear.push((lo, hi, intercept, slope));
                }
            }
        }
        kernel
    }

    fn entropic(&self) -> bool {
        self.gamma > 0.0
    }

    /// Cell index and offset inside it for a surplus level t ≥ 0.
    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        let i = ((t / self.step).floor().max(0.0) as usize).min(self.last);
        (i, t - i as f64 * self.step)
    }

    #[inline]
    fn v_at(&self, i: usize, off: f64) -> f64 {
        self.v_left[i] + self.slope[i] * off
    }

    /// Entropic: ln ∫_0^{x_i} e^{−γv(w)} e^{−r(x_i−w)} dw.
    /// Expectation: ∫_0^{x_i} v(w) e^{−r(x_i−w)} dw.
    fn left_accumulator(&self, rate: f64) -> Vec<f64> {
        let h = self.step;
        let g = self.gamma;
        let mut acc = Vec::with_capacity(self.last + 1);
        if self.entropic() {
            acc.push(f64::NEG_INFINITY);
            for i in 0..self.last {
                let cell = -g * self.v_left[i] - rate * h + ln_int_exp(rate - g * self.slope[i], h);
                acc.push(log_add_exp(acc[i] - rate * h, cell));
            }
        } else {
            acc.push(0.0);
            let decay = (-rate * h).exp();
            let (n0, n1) = int_exp_moments(-rate, h);
            for i in 0..self.last {
                let m = self.slope[i];
                let cell = (self.v_left[i] + m * h) * n0 - m * n1;
                acc.push(decay * acc[i] + cell);
            }
        }
        acc
    }

    /// Entropic: ln ∫_{x_i}^∞ e^{−γv(w)} e^{−s(w−x_i)} dw.
    /// Expectation: ∫_{x_i}^∞ v(w) e^{−s(w−x_i)} dw.
    fn right_accumulator(&self, decay: f64) -> Vec<f64> {
        let h = self.step;
        let g = self.gamma;
        let mut acc = vec![0.0; self.last + 1];
        if self.entropic() {
            acc[self.last] = -g * self.v_left[self.last] - (g + decay).ln();
            for i in (0..self.last).rev() {
                let cell = -g * self.v_left[i] + ln_int_exp(-g * self.slope[i] - decay, h);
                acc[i] = log_add_exp(acc[i + 1] - decay * h, cell);
            }
        } else {
            acc[self.last] = self.v_left[self.last] / decay + 1.0 / (decay * decay);
            let shrink = (-decay * h).exp();
            let (n0, n1) = int_exp_moments(-decay, h);
            for i in (0..self.last).rev() {
                acc[i] = shrink * acc[i + 1] + self.v_left[i] * n0 + self.slope[i] * n1;
            }
        }
        acc
    }

    fn left_eval(&self, rate: f64, acc: &[f64], t: f64) -> f64 {
        let g = self.gamma;
        if self.entropic() {
            if t <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let (i, off) = self.locate(t);
            let part = -g * self.v_left[i] - rate * off + ln_int_exp(rate - g * self.slope[i], off);
            log_add_exp(acc[i] - rate * off, part)
        } else {
            if t <= 0.0 {
                return 0.0;
            }
            let (i, off) = self.locate(t);
            let m = self.slope[i];
            let (n0, n1) = int_exp_moments(-rate, off);
            (-rate * off).exp() * acc[i] + (self.v_left[i] + m * off) * n0 - m * n1
        }
    }

    fn right_eval(&self, decay: f64, acc: &[f64], t: f64) -> f64 {
        let g = self.gamma;
        let h = self.step;
        if t < 0.0 {
            return if self.entropic() { acc[0] + decay * t } else { (decay * t).exp() * acc[0] };
        }
        let (i, off) = self.locate(t);
        let vt = self.v_at(i, off);
        if self.entropic() {
            if i == self.last {
                return -g * vt - (g + decay).ln();
            }
            let rest = h - off;
            log_add_exp(acc[i + 1] - decay * rest, -g * vt + ln_int_exp(-g * self.slope[i] - decay, rest))
        } else {
            if i == self.last {
                return vt / decay + 1.0 / (decay * decay);
            }
            let rest = h - off;
            let (n0, n1) = int_exp_moments(-decay, rest);
            (-decay * rest).exp() * acc[i + 1] + vt * n0 + self.slope[i] * n1
        }
    }

    /// Sub-intervals [a, b] of the window [lo, hi] split at grid cells, with the cell index.
    fn cells_in(&self, lo: f64, hi: f64) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let (first, _) = self.locate(lo);
        let h = self.step;
        let last = self.last;
        (first..=last).map_while(move |i| {
            let a = lo.max(i as f64 * h);
            if a >= hi {
                return None;
            }
            let b = if i == last { hi } else { hi.min((i + 1) as f64 * h) };
            Some((i, a, b))
        })
    }

    /// Entropic: ln ∫ e^{−γv(w)} (c + s(w−u)) dw over the piece's window.
    /// Expectation: ∫ v(w) (c + s(w−u)) dw.
    fn linear_eval(&self, piece: (f64, f64, f64, f64), u: f64) -> f64 {
        let (lo, hi, intercept, dslope) = piece;
        let start = (u + lo).max(0.0);
        let end = u + hi;
        let g = self.gamma;
        if end <= start {
            return if self.entropic() { f64::NEG_INFINITY } else { 0.0 };
        }
        if self.entropic() {
            let (i0, off0) = self.locate(start);
            let v_ref = self.v_at(i0, off0);
            let mut sum = 0.0;
            for (i, a, b) in self.cells_in(start, end) {
                let m = self.slope[i];
                let va = self.v_at(i, a - i as f64 * self.step);
                let c0 = intercept + dslope * (a - u);
                let (m0, m1) = int_exp_moments(-g * m, b - a);
                sum += (-g * (va - v_ref)).exp() * (c0 * m0 + dslope * m1);
            }
            if sum > 0.0 {
                sum.ln() - g * v_ref
            } else {
                f64::NEG_INFINITY
            }
        } else {
            let mut sum = 0.0;
            for (i, a, b) in self.cells_in(start, end) {
                let m = self.slope[i];
                let va = self.v_at(i, a - i as f64 * self.step);
                let c0 = intercept + dslope * (a - u);
                let len = b - a;
                sum += va * c0 * len + (va * dslope + m * c0) * len * len / 2.0 + m * dslope * len.powi(3) / 3.0;
            }
            sum
        }
    }

    /// ln R(u) for γ > 0.
    pub(crate) fn log_risk_integral(&self, u: f64) -> f64 {
        debug_assert!(self.entropic());
        let mut terms = Vec::with_capacity(2 + self.tails.len() + self.linear.len());
        terms.push(self.model.ln_cdf(-u));
        for tail in &self.tails {
            match tail {
                TailAcc::Left { rate, ln_factor, hi, acc } => {
                    terms.push(ln_factor + self.left_eval(*rate, acc, u + hi));
                }
                TailAcc::Right { decay, ln_factor, lo, acc } => {
                    terms.push(ln_factor + self.right_eval(*decay, acc, u + lo));
                }
            }
        }
        for &piece in &self.linear {
            terms.push(self.linear_eval(piece, u));
        }
        log_sum_exp(&terms).min(0.0)
    }

    /// E[v(u+Z); u+Z ≥ 0] for γ = 0.
    pub(crate) fn expectation(&self, u: f64) -> f64 {
        debug_assert!(!self.entropic());
        let mut total = 0.0;
        for tail in &self.tails {
            total += match tail {
                TailAcc::Left { rate, ln_factor, hi, acc } => ln_factor.exp() * self.left_eval(*rate, acc, u + hi),
                TailAcc::Right { decay, ln_factor, lo, acc } => {
                    ln_factor.exp() * self.right_eval(*decay, acc, u + lo)
                }
            };
        }
        for &piece in &self.linear {
            total += self.linear_eval(piece, u);
        }
        total
    }

    /// Γ(u) = −(β/γ) ln R(u), or β·E(u) in the risk-neutral branch.
    pub(crate) fn gamma_transform(&self, u: f64, beta: f64) -> f64 {
        if self.entropic() {
            -beta / self.gamma * self.log_risk_integral(u)
        } else {
            beta * self.expectation(u)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SurplusGrid;
    use crate::quad::{integrate_piecewise, QuadTol};

    fn models() -> Vec<IncrementModel> {
        vec![
            IncrementModel::left_exponential(6.0, 1.1).unwrap(),
            IncrementModel::double_exponential(2.0).unwrap(),
            IncrementModel::double_exponential(-0.5).unwrap(),
            IncrementModel::tabulated(vec![-2.0, -0.5, 0.5, 0.5, 1.5], vec![0.0, 0.6, 1.0, 0.3, 0.0])
                .unwrap(),
        ]
    }

    fn wavy_value(grid: SurplusGrid) -> ValueFn {
        let b: Vec<f64> = grid.nodes().map(|x| 1.0 + 0.8 * (1.0 - (-0.7 * x).exp()) + 0.05 * (3.0 * x).sin()).collect();
        ValueFn::from_bounded(grid, b).unwrap()
    }

    // brute-force quadrature of the defining integrals, split at grid nodes and kinks
    fn oracle(v: &ValueFn, m: &IncrementModel, gamma: f64, u: f64) -> f64 {
        let (lo, hi) = m.truncated_support();
        let a = (u + lo).max(0.0);
        let b = u + hi;
        let mut breaks: Vec<f64> = v.grid().nodes().filter(|&x| x > a && x < b).collect();
        breaks.extend(m.breakpoints().into_iter().map(|z| z + u).filter(|&w| w > a && w < b));
        breaks.push(a);
        breaks.push(b);
        breaks.sort_by(f64::total_cmp);
        let tol = QuadTol { abs: 1e-15, rel: 1e-13, ..QuadTol::default() };
        if gamma > 0.0 {
            integrate_piecewise(|w| (-gamma * v.eval(w)).exp() * m.pdf(w - u), &breaks, tol).value + m.cdf(-u)
        } else {
            integrate_piecewise(|w| v.eval(w) * m.pdf(w - u), &breaks, tol).value
        }
    }

    #[test]
    fn kernel_matches_quadrature() {
        let grid = SurplusGrid::new(0.3, 12).unwrap();
        let v = wavy_value(grid);
        for m in models() {
            for &gamma in &[0.0, 0.2, 1.0, 4.0] {
                let k = ContinuationKernel::new(&v, &m, gamma);
                for &u in &[0.0, 0.3, 1.35, 2.1, 3.3] {
                    let want = oracle(&v, &m, gamma, u);
                    let got = if gamma > 0.0 { k.log_risk_integral(u).exp() } else { k.expectation(u) };
                    assert!(
                        (got - want).abs() < 1e-11 * want.abs().max(1.0),
                        "{} gamma={gamma} u={u}: {got} vs {want}",
                        m.descriptor()
                    );
                }
            }
        }
    }

    #[test]
    fn zero_value_gives_unit_integral() {
        let grid = SurplusGrid::new(0.5, 10).unwrap();
        // v(w) = 0 on w ≥ 0 is bounded part −w
        let b: Vec<f64> = grid.nodes().map(|x| -x).collect();
        let zero = ValueFn::from_bounded(grid, b).unwrap();
        for m in models() {
            let k = ContinuationKernel::new(&zero, &m, 1.5);
            for &u in &[0.0, 1.0, 4.5] {
                // tail extension makes v(w) = w − x_max past the grid; stay inside it
                let (_, hi) = m.truncated_support();
                if u + hi > grid.x_max() {
                    continue;
                }
                assert!(k.log_risk_integral(u).abs() < 1e-12, "{} u={u}", m.descriptor());
            }
        }
    }

    #[test]
    fn far_surplus_does_not_underflow() {
        let grid = SurplusGrid::new(1.0, 2001).unwrap();
        let v = ValueFn::shifted_identity(grid, 50.0);
        for m in models() {
            let k = ContinuationKernel::new(&v, &m, 3.0);
            let lr = k.log_risk_integral(2000.0);
            assert!(lr.is_finite() && lr < -100.0, "{} {lr}", m.descriptor());
        }
    }
}
