//! Band and barrier structure of grid policies.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{PolicyFn, SurplusGrid};

/// Structural class of a band policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyClass {
    PayAll,
    Barrier,
    FiniteBand,
}

impl fmt::Display for PolicyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyClass::PayAll => "PayAll",
            PolicyClass::Barrier => "Barrier",
            PolicyClass::FiniteBand => "FiniteBand",
        })
    }
}

/// α(x) = 0 on [0, c_0], x − c_k on (c_k, d_{k+1}], 0 on (d_{k+1}, c_{k+1}],
/// and x − c_m above c_m.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPolicy {
    grid: SurplusGrid,
    /// node indices of c_0..c_m
    c_idx: Vec<usize>,
    /// node indices of d_1..d_m
    d_idx: Vec<usize>,
}

impl BandPolicy {
    /// Retention levels c_0, …, c_m.
    pub fn retention_levels(&self) -> Vec<f64> {
        self.c_idx.iter().map(|&i| self.grid.x(i)).collect()
    }

    /// Upper triggers d_1, …, d_m.
    pub fn triggers(&self) -> Vec<f64> {
        self.d_idx.iter().map(|&i| self.grid.x(i)).collect()
    }

    /// Top barrier c_m = ξ.
    pub fn top_barrier(&self) -> f64 {
        self.grid.x(*self.c_idx.last().expect("at least one retention level"))
    }

    /// Intervals on which nothing is paid: [0, c_0], (d_1, c_1], …
    pub fn zero_set(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, self.grid.x(self.c_idx[0]))];
        for (k, &d) in self.d_idx.iter().enumerate() {
            out.push((self.grid.x(d), self.grid.x(self.c_idx[k + 1])));
        }
        out
    }

    pub fn classify(&self) -> PolicyClass {
        classify(self)
    }

    /// Grid policy described by the bands.
    pub fn reconstruct(&self) -> PolicyFn {
        let n = self.grid.n_nodes();
        let mut retained: Vec<usize> = (0..n).collect();
        let m = self.c_idx.len() - 1;
        for (k, &c) in self.c_idx.iter().enumerate() {
            let upper = if k < m { self.d_idx[k] } else { n - 1 };
            for r in retained.iter_mut().take(upper + 1).skip(c + 1) {
                *r = c;
            }
        }
        PolicyFn::from_retained(self.grid, retained).expect("retention levels lie below their band")
    }

    /// Rows (k, c_k, d_{k+1}, classification) with a header; the top band has d = inf.
    pub fn to_csv(&self) -> String {
        let class = self.classify();
        let mut s = String::from("k,c_k,d_k1,classification\n");
        let d = self.triggers();
        for (k, c) in self.retention_levels().iter().enumerate() {
            let dk = d.get(k).map_or_else(|| "inf".to_string(), |v| crate::format::num(*v));
            s.push_str(&format!("{k},{},{dk},{class}\n", crate::format::num(*c)));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: xi={} with {} retention level(s)",
            self.classify(),
            crate::format::num(self.top_barrier()),
            self.c_idx.len()
        )
    }
}

/// Default threshold below which a dividend counts as zero.
pub fn default_eps_zero(grid: SurplusGrid) -> f64 {
    grid.step() / 2.0
}

/// Largest grid node at which the policy pays at most `eps_zero`.
///
/// Pay-all policies return 0.
pub fn extract_xi(policy: &PolicyFn, eps_zero: f64) -> Result<f64> {
    let grid = policy.grid();
    let i = (0..grid.n_nodes()).rev().find(|&i| policy.action(i) <= eps_zero).unwrap_or(0);
    Ok(grid.x(i))
}

/// Decomposes a grid policy into bands.
///
/// Every maximal run of paying nodes must pay down to the node just before
/// the run; otherwise the first offending node is reported.
pub fn extract_bands(policy: &PolicyFn, eps_zero: f64) -> Result<BandPolicy> {
    let grid = policy.grid();
    let n = grid.n_nodes();
    let pays = |i: usize| policy.action(i) > eps_zero;
    let mut c_idx = Vec::new();
    let mut d_idx = Vec::new();
    let mut i = 0;
    if pays(0) {
        return Err(Error::NotBandStructured { node: 0, x: 0.0 });
    }
    while i < n {
        // zero run
        while i < n && !pays(i) {
            i += 1;
        }
        let c = i - 1;
        c_idx.push(c);
        if i == n {
            break;
        }
        while i < n && pays(i) {
            if policy.retained_index(i) != c {
                return Err(Error::NotBandStructured { node: i, x: grid.x(i) });
            }
            i += 1;
        }
        if i < n {
            d_idx.push(i - 1);
        }
    }
    // a trailing zero run is read as a barrier at the last zero node
    Ok(BandPolicy { grid, c_idx, d_idx })
}

pub fn classify(band: &BandPolicy) -> PolicyClass {
    if band.top_barrier() == 0.0 {
        PolicyClass::PayAll
    } else if band.d_idx.is_empty() {
        PolicyClass::Barrier
    } else {
        PolicyClass::FiniteBand
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> SurplusGrid {
        SurplusGrid::new(0.1, 50).unwrap()
    }

    #[test]
    fn barrier_round_trip() {
        let p = PolicyFn::barrier(grid(), 7);
        let eps = default_eps_zero(grid());
        assert!((extract_xi(&p, eps).unwrap() - 0.7).abs() < 1e-12);
        let b = extract_bands(&p, eps).unwrap();
        assert_eq!(b.classify(), PolicyClass::Barrier);
        assert_eq!(b.retention_levels().len(), 1);
        assert_eq!(b.reconstruct(), p);
    }

    #[test]
    fn pay_all() {
        let p = PolicyFn::pay_all(grid());
        let eps = default_eps_zero(grid());
        assert_eq!(extract_xi(&p, eps).unwrap(), 0.0);
        let b = extract_bands(&p, eps).unwrap();
        assert_eq!(b.classify(), PolicyClass::PayAll);
        assert_eq!(b.retention_levels(), vec![0.0]);
        assert_eq!(b.reconstruct(), p);
    }

    #[test]
    fn two_levels() {
        let g = grid();
        // zero on [0,0.3], pay down to 0.3 up to 0.6, zero on (0.6,1.2], pay down to 1.2 above
        let retained: Vec<usize> = (0..50)
            .map(|i| match i {
                0..=3 => i,
                4..=6 => 3,
                7..=12 => i,
                _ => 12,
            })
            .collect();
        let p = PolicyFn::from_retained(g, retained).unwrap();
        let b = extract_bands(&p, default_eps_zero(g)).unwrap();
        assert_eq!(b.classify(), PolicyClass::FiniteBand);
        assert_eq!(b.triggers().len(), 1);
        assert!((b.top_barrier() - 1.2).abs() < 1e-12);
        assert_eq!(b.zero_set().len(), 2);
        assert_eq!(b.reconstruct(), p);
        assert!(b.to_csv().starts_with("k,c_k,d_k1,classification\n0,0.3"));
    }

    #[test]
    fn non_band_is_reported() {
        let g = grid();
        let mut retained: Vec<usize> = (0..50).map(|i| i.min(10)).collect();
        retained[20] = 5;
        let p = PolicyFn::from_retained(g, retained).unwrap();
        match extract_bands(&p, default_eps_zero(g)) {
            Err(Error::NotBandStructured { node, .. }) => assert_eq!(node, 20),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn random_band_policies_round_trip(cuts in prop::collection::btree_set(1usize..60, 0..8)) {
            let n = 70;
            let g = SurplusGrid::new(0.05, n).unwrap();
            // alternate zero and paying runs between sorted cut points
            let cuts: Vec<usize> = cuts.into_iter().collect();
            let mut retained: Vec<usize> = (0..n).collect();
            let mut paying = false;
            let mut start = 0;
            for &c in cuts.iter().chain(std::iter::once(&n)) {
                if paying && start > 0 {
                    for r in retained.iter_mut().take(c).skip(start) {
                        *r = start - 1;
                    }
                }
                paying = !paying;
                start = c;
            }
            let p = PolicyFn::from_retained(g, retained).unwrap();
            let eps = default_eps_zero(g);
            let b = extract_bands(&p, eps).unwrap();
            prop_assert_eq!(b.reconstruct(), p.clone());
            prop_assert_eq!(extract_xi(&p, eps).unwrap(), b.top_barrier());
        }
    }
}
