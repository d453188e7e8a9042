//! Uniform surplus grids and the value functions and decision rules that live on them.

use crate::error::{Error, Result};

/// Uniform grid x_i = i·step, i = 0..n_nodes on the surplus half-line.
#[derive(Debug, Clone, Copy)]
pub struct SurplusGrid {
    step: f64,
    n_nodes: usize,
}

impl SurplusGrid {
    pub fn new(step: f64, n_nodes: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if n_nodes < 2 {
            return Err(Error::InvalidGrid("a grid needs at least two nodes".into()));
        }
        Ok(Self { step, n_nodes })
    }

    /// Smallest grid with the given step whose last node is at least `x_max`.
    pub fn covering(step: f64, x_max: f64) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("x_max must be positive, got {x_max}")));
        }
        let n = (x_max / step - 1e-9).ceil() as usize + 1;
        Self::new(step, n.max(2))
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n_nodes - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |i| self.x(i))
    }

    /// Whether the grid reaches `xi_star + 5·step`, the a-priori cap on the
    /// no-payout threshold.
    pub fn covers(&self, xi_star: f64) -> bool {
        self.x_max() >= xi_star + 5.0 * self.step
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        ((x / self.step).round().max(0.0) as usize).min(self.n_nodes - 1)
    }
}

/// Value function v(x) = x + b(x) on a grid, stored through its bounded part b.
///
/// Between nodes v is linear; beyond the last node b is held constant; below
/// zero v vanishes (ruin).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFn {
    grid: SurplusGrid,
    bounded: Vec<f64>,
}

impl ValueFn {
    pub fn from_bounded(grid: SurplusGrid, bounded: Vec<f64>) -> Result<Self> {
        if bounded.len() != grid.n_nodes() {
            return Err(Error::InvalidGrid(format!(
                "bounded part has {} entries for {} nodes",
                bounded.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { grid, bounded })
    }

    /// v(x) = x + c on the grid.
    pub fn shifted_identity(grid: SurplusGrid, c: f64) -> Self {
        Self { grid, bounded: vec![c; grid.n_nodes()] }
    }

    /// The identity v(x) = x (J_1 and the pay-all lower bound).
    pub fn identity(grid: SurplusGrid) -> Self {
        Self::shifted_identity(grid, 0.0)
    }

    /// Builds from node values v(x_i).
    pub fn from_values(grid: SurplusGrid, values: &[f64]) -> Result<Self> {
        let bounded = values.iter().enumerate().map(|(i, v)| v - grid.x(i)).collect();
        Self::from_bounded(grid, bounded)
    }

    pub fn grid(&self) -> SurplusGrid {
        self.grid
    }

    pub fn bounded(&self) -> &[f64] {
        &self.bounded
    }

    /// v(x_i).
    pub fn value(&self, i: usize) -> f64 {
        self.grid.x(i) + self.bounded[i]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.grid.n_nodes()).map(|i| self.value(i)).collect()
    }

    /// v at an arbitrary surplus level.
    pub fn eval(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        let h = self.grid.step();
        let last = self.grid.n_nodes() - 1;
        let pos = w / h;
        if pos >= last as f64 {
            return w + self.bounded[last];
        }
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        w + self.bounded[i] + t * (self.bounded[i + 1] - self.bounded[i])
    }

    /// sup_i |b_i − c_i|.
    pub fn sup_distance(&self, other: &ValueFn) -> f64 {
        self.bounded
            .iter()
            .zip(&other.bounded)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Stationary or single-stage decision rule on a grid.
///
/// The dividend at x_i is a grid multiple: paying a_i leaves the surplus at a
/// grid node, stored as its index (`retained[i] <= i`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyFn {
    grid: SurplusGrid,
    retained: Vec<usize>,
}

impl PartialEq for SurplusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.step.to_bits() == other.step.to_bits() && self.n_nodes == other.n_nodes
    }
}

impl Eq for SurplusGrid {}

impl PolicyFn {
    pub fn from_retained(grid: SurplusGrid, retained: Vec<usize>) -> Result<Self> {
        if retained.len() != grid.n_nodes() {
            return Err(Error::InvalidGrid("policy length does not match the grid".into()));
        }
        if let Some(i) = retained.iter().enumerate().position(|(i, &r)| r > i) {
            return Err(Error::InvalidParams(format!("dividend at node {i} is negative")));
        }
        Ok(Self { grid, retained })
    }

    /// Builds from dividends a_i, which must be grid multiples in [0, x_i].
    pub fn from_actions(grid: SurplusGrid, actions: &[f64]) -> Result<Self> {
        if actions.len() != grid.n_nodes() {
            return Err(Error::InvalidGrid("policy length does not match the grid".into()));
        }
        let h = grid.step();
        let mut retained = Vec::with_capacity(actions.len());
        for (i, &a) in actions.iter().enumerate() {
            let k = (a / h).round();
            if (a - k * h).abs() > 1e-9 * h.max(a.abs()) || k < 0.0 || k as usize > i {
                return Err(Error::InvalidParams(format!(
                    "dividend {a} at node {i} is not an admissible grid multiple"
                )));
            }
            retained.push(i - k as usize);
        }
        Ok(Self { grid, retained })
    }

    /// α(x) = x.
    pub fn pay_all(grid: SurplusGrid) -> Self {
        Self { grid, retained: vec![0; grid.n_nodes()] }
    }

    /// α(x) = (x − c)⁺ with c = x_level.
    pub fn barrier(grid: SurplusGrid, level: usize) -> Self {
        Self { grid, retained: (0..grid.n_nodes()).map(|i| i.min(level)).collect() }
    }

    pub fn grid(&self) -> SurplusGrid {
        self.grid
    }

    /// Index of the node the surplus is paid down to at node i.
    pub fn retained_index(&self, i: usize) -> usize {
        self.retained[i]
    }

    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn action(&self, i: usize) -> f64 {
        (i - self.retained[i]) as f64 * self.grid.step()
    }

    pub fn actions(&self) -> Vec<f64> {
        (0..self.grid.n_nodes()).map(|i| self.action(i)).collect()
    }

    /// Dividend at an off-grid surplus level, read as a band policy: on
    /// (x_i, x_{i+1}] the rule pays down to node i+1's retained level when
    /// node i+1 pays, and nothing otherwise. Beyond the grid the last
    /// retention level applies.
    pub fn action_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let h = self.grid.step();
        let last = self.grid.n_nodes() - 1;
        let pos = x / h;
        let upper = (pos - 1e-12).ceil() as usize;
        if upper > last {
            return x - self.grid.x(self.retained[last]);
        }
        let r = self.retained[upper];
        if r == upper {
            0.0
        } else {
            (x - self.grid.x(r)).max(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_reaches_target() {
        let g = SurplusGrid::covering(0.1, 1.05).unwrap();
        assert!(g.x_max() >= 1.05);
        assert_eq!(g.n_nodes(), 12);
        let exact = SurplusGrid::covering(0.5, 2.0).unwrap();
        assert_eq!(exact.n_nodes(), 5);
    }

    #[test]
    fn value_interpolates_and_extends() {
        let g = SurplusGrid::new(1.0, 3).unwrap();
        let v = ValueFn::from_bounded(g, vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(v.eval(-0.5), 0.0);
        assert!((v.eval(0.5) - 2.0).abs() < 1e-15);
        assert!((v.eval(5.0) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn actions_round_trip() {
        let g = SurplusGrid::new(0.25, 6).unwrap();
        let p = PolicyFn::barrier(g, 2);
        assert_eq!(p.actions(), vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.75]);
        assert_eq!(PolicyFn::from_actions(g, &p.actions()).unwrap(), p);
        assert!(PolicyFn::from_actions(g, &[0.0, 0.5, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(PolicyFn::from_actions(g, &[0.0, 0.1, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn off_grid_action_follows_bands() {
        let g = SurplusGrid::new(1.0, 5).unwrap();
        let p = PolicyFn::barrier(g, 2);
        assert_eq!(p.action_at(1.5), 0.0);
        assert_eq!(p.action_at(2.0), 0.0);
        assert!((p.action_at(2.5) - 0.5).abs() < 1e-15);
        assert!((p.action_at(10.0) - 8.0).abs() < 1e-15);
        let all = PolicyFn::pay_all(g);
        assert!((all.action_at(0.3) - 0.3).abs() < 1e-15);
        assert!((all.action_at(7.0) - 7.0).abs() < 1e-15);
    }
}
