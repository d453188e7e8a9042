//! Increment distributions: the law of one period's premium income minus claims.
//!
//! Three families are supported. `LeftExponential` and `DoubleExponential` have
//! closed-form cdf, partial moments and quantiles; `Tabulated` is a
//! piecewise-linear density on a finite support, integrated exactly segment by
//! segment. Every family also exposes itself as a short list of density pieces
//! (exponential tails or linear segments), which is what the continuation
//! integral kernel consumes.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result, Violations};
use crate::numeric::{int_exp_moments, ln_int_exp, log_add_exp, log_sum_exp};
use crate::quad::{integrate_piecewise, QuadTol};

/// Tail truncation (in units of the tail scale) used by quadrature.
const TAIL_SCALES: f64 = 40.0;

/// A piecewise-linear density on `[nodes[0], nodes[n-1]]`.
///
/// Nodes are non-decreasing; a repeated node encodes a jump of the density.
/// Densities are rescaled on construction so that the density integrates to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    nodes: Vec<f64>,
    densities: Vec<f64>,
    cdf_at_nodes: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(nodes: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if nodes.len() != densities.len() || nodes.len() < 2 {
            return Err(Error::InvalidModel(
                "tabulated density needs at least two (node, density) pairs".into(),
            ));
        }
        if nodes.iter().chain(&densities).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("tabulated values must be finite".into()));
        }
        if densities.iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidModel("tabulated densities must be nonnegative".into()));
        }
        for w in nodes.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidModel("tabulated nodes must be ascending".into()));
            }
        }
        for w in nodes.windows(3) {
            if w[0] == w[2] {
                return Err(Error::InvalidModel("a node may appear at most twice".into()));
            }
        }
        let mut cdf = Vec::with_capacity(nodes.len());
        cdf.push(0.0);
        for k in 0..nodes.len() - 1 {
            let mass = 0.5 * (densities[k] + densities[k + 1]) * (nodes[k + 1] - nodes[k]);
            cdf.push(cdf[k] + mass);
        }
        let total = *cdf.last().unwrap();
        if total <= 0.0 {
            return Err(Error::InvalidModel("tabulated density has zero mass".into()));
        }
        let densities = densities.into_iter().map(|g| g / total).collect();
        let cdf_at_nodes = cdf.into_iter().map(|c| c / total).collect();
        Ok(Self { nodes, densities, cdf_at_nodes })
    }

    /// Reads a two-column CSV `node,density`; a non-numeric first line is a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut nodes = Vec::new();
        let mut dens = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::InvalidModel(format!("line {}: expected two columns", lineno + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(z), Ok(g)) => {
                    nodes.push(z);
                    dens.push(g);
                }
                _ if nodes.is_empty() => continue, // header row
                _ => {
                    return Err(Error::InvalidModel(format!("line {}: not numeric", lineno + 1)));
                }
            }
        }
        Self::new(nodes, dens)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Non-degenerate segments as (lo, hi, intercept, slope) with g(z) = intercept + slope·z.
    fn segments(&self) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
        (0..self.nodes.len() - 1).filter_map(move |k| {
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            if b <= a {
                return None;
            }
            let slope = (self.densities[k + 1] - self.densities[k]) / (b - a);
            Some((a, b, self.densities[k] - slope * a, slope))
        })
    }

    /// Index k of the segment [z_k, z_{k+1}) containing z (right-continuous at jumps).
    fn segment_of(&self, z: f64) -> usize {
        let k = self.nodes.partition_point(|&n| n <= z);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn pdf(&self, z: f64) -> f64 {
        let n = self.nodes.len();
        if z < self.nodes[0] || z > self.nodes[n - 1] {
            return 0.0;
        }
        let k = self.segment_of(z);
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        if b <= a {
            return self.densities[k + 1];
        }
        let t = (z - a) / (b - a);
        self.densities[k] + t * (self.densities[k + 1] - self.densities[k])
    }

    fn cdf(&self, z: f64) -> f64 {
        let n = self.nodes.len();
        if z <= self.nodes[0] {
            return 0.0;
        }
        if z >= self.nodes[n - 1] {
            return 1.0;
        }
        let k = self.segment_of(z);
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        if b <= a {
            return self.cdf_at_nodes[k + 1];
        }
        let t = z - a;
        let slope = (self.densities[k + 1] - self.densities[k]) / (b - a);
        (self.cdf_at_nodes[k] + self.densities[k] * t + 0.5 * slope * t * t).min(1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        let n = self.nodes.len();
        let k = self.cdf_at_nodes.partition_point(|&c| c <= p).clamp(1, n - 1) - 1;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        if b <= a {
            return a;
        }
        let r = (p - self.cdf_at_nodes[k]).max(0.0);
        let g0 = self.densities[k];
        let slope = (self.densities[k + 1] - g0) / (b - a);
        let disc = (g0 * g0 + 2.0 * slope * r).max(0.0);
        let denom = g0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (a + t).min(b)
    }
}

/// Parametric family of an [`IncrementModel`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// g(z) = λ e^{λ(z−d)} for z ≤ d, zero above.
    LeftExponential { lambda: f64, d: f64 },
    /// g(z) = ½ e^{−|z−μ|}.
    DoubleExponential { mu: f64 },
    Tabulated(TabulatedDensity),
}

/// Law of the per-period increment Z.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementModel {
    kind: ModelKind,
}

/// A violated modelling assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssumptionViolation {
    /// E Z⁺ is not finite.
    InfinitePositiveMean,
    /// ν(−∞, 0) = 0: ruin can never happen.
    RuinImpossible,
    /// Left-exponential model with λ·d ≤ 1 (nonpositive mean).
    ShiftRateViolation { lambda: f64, d: f64 },
}

impl fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InfinitePositiveMean => f.write_str("E Z+ is not finite"),
            Self::RuinImpossible => f.write_str("P(Z < 0) = 0, ruin is impossible"),
            Self::ShiftRateViolation { lambda, d } => {
                write!(f, "left-exponential model needs lambda*d > 1 (lambda={lambda}, d={d})")
            }
        }
    }
}

/// One piece of a density, in the form the continuation kernel integrates exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum DensityPiece {
    /// exp(ln_scale + rate·z) on (−∞, hi], rate > 0.
    LeftTail { ln_scale: f64, rate: f64, hi: f64 },
    /// exp(ln_scale − decay·z) on (lo, ∞), decay > 0.
    RightTail { ln_scale: f64, decay: f64, lo: f64 },
    /// intercept + slope·z on [lo, hi].
    Linear { lo: f64, hi: f64, intercept: f64, slope: f64 },
}

impl IncrementModel {
    pub fn left_exponential(lambda: f64, d: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !d.is_finite() {
            return Err(Error::InvalidModel(format!(
                "left-exponential needs a finite rate > 0 and finite shift (lambda={lambda}, d={d})"
            )));
        }
        Ok(Self { kind: ModelKind::LeftExponential { lambda, d } })
    }

    pub fn double_exponential(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidModel(format!("double-exponential mean must be finite, got {mu}")));
        }
        Ok(Self { kind: ModelKind::DoubleExponential { mu } })
    }

    pub fn tabulated(nodes: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        Ok(Self { kind: ModelKind::Tabulated(TabulatedDensity::new(nodes, densities)?) })
    }

    pub fn from_tabulated(t: TabulatedDensity) -> Self {
        Self { kind: ModelKind::Tabulated(t) }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Short human-readable description, e.g. `double_exponential(mu=2)`.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => format!("left_exponential(lambda={lambda}, d={d})"),
            ModelKind::DoubleExponential { mu } => format!("double_exponential(mu={mu})"),
            ModelKind::Tabulated(t) => format!(
                "tabulated({} nodes on [{}, {}])",
                t.nodes.len(),
                t.nodes[0],
                t.nodes[t.nodes.len() - 1]
            ),
        }
    }

    /// Bounds of the set where the density can be positive.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            ModelKind::LeftExponential { d, .. } => (f64::NEG_INFINITY, *d),
            ModelKind::DoubleExponential { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ModelKind::Tabulated(t) => (t.nodes[0], t.nodes[t.nodes.len() - 1]),
        }
    }

    /// Support truncated where the remaining tail mass is below e^{-40}.
    pub fn truncated_support(&self) -> (f64, f64) {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => (d - TAIL_SCALES / lambda, *d),
            ModelKind::DoubleExponential { mu } => (mu - TAIL_SCALES, mu + TAIL_SCALES),
            ModelKind::Tabulated(_) => self.support(),
        }
    }

    /// Points where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::LeftExponential { d, .. } => vec![*d],
            ModelKind::DoubleExponential { mu } => vec![*mu],
            ModelKind::Tabulated(t) => t.nodes.clone(),
        }
    }

    /// Locations where the density jumps (including the support ends).
    pub fn discontinuities(&self) -> Vec<f64> {
        match &self.kind {
            ModelKind::LeftExponential { d, .. } => vec![*d],
            ModelKind::DoubleExponential { .. } => Vec::new(),
            ModelKind::Tabulated(t) => {
                let n = t.nodes.len();
                let mut out = Vec::new();
                if t.densities[0] > 0.0 {
                    out.push(t.nodes[0]);
                }
                for k in 0..n - 1 {
                    if t.nodes[k] == t.nodes[k + 1] && t.densities[k] != t.densities[k + 1] {
                        out.push(t.nodes[k]);
                    }
                }
                if t.densities[n - 1] > 0.0 {
                    out.push(t.nodes[n - 1]);
                }
                out
            }
        }
    }

    pub fn pdf(&self, z: f64) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => {
                if z > *d {
                    0.0
                } else {
                    lambda * (lambda * (z - d)).exp()
                }
            }
            ModelKind::DoubleExponential { mu } => 0.5 * (-(z - mu).abs()).exp(),
            ModelKind::Tabulated(t) => t.pdf(z),
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => {
                if z >= *d {
                    1.0
                } else {
                    (lambda * (z - d)).exp()
                }
            }
            ModelKind::DoubleExponential { mu } => {
                if z <= *mu {
                    0.5 * (z - mu).exp()
                } else {
                    1.0 - 0.5 * (mu - z).exp()
                }
            }
            ModelKind::Tabulated(t) => t.cdf(z),
        }
    }

    /// ln G(z), accurate far into the left tail.
    pub fn ln_cdf(&self, z: f64) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => {
                if z >= *d {
                    0.0
                } else {
                    lambda * (z - d)
                }
            }
            ModelKind::DoubleExponential { mu } => {
                if z <= *mu {
                    0.5f64.ln() + (z - mu)
                } else {
                    (-0.5 * (mu - z).exp()).ln_1p()
                }
            }
            ModelKind::Tabulated(t) => t.cdf(z).ln(),
        }
    }

    /// Inverse cdf, used for sampling.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => d + p.ln() / lambda,
            ModelKind::DoubleExponential { mu } => {
                if p < 0.5 {
                    mu + (2.0 * p).ln()
                } else {
                    mu - (2.0 * (1.0 - p)).ln()
                }
            }
            ModelKind::Tabulated(t) => t.quantile(p),
        }
    }

    /// E Z⁺ = ∫_0^∞ z g(z) dz.
    pub fn mean_positive_part(&self) -> f64 {
        self.first_moment_above(0.0)
    }

    /// E Z.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => d - 1.0 / lambda,
            ModelKind::DoubleExponential { mu } => *mu,
            ModelKind::Tabulated(t) => t
                .segments()
                .map(|(a, b, p, s)| p * (b * b - a * a) / 2.0 + s * (b.powi(3) - a.powi(3)) / 3.0)
                .sum(),
        }
    }

    /// ∫_lo^∞ z g(z) dz.
    pub fn first_moment_above(&self, lo: f64) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => {
                if lo >= *d {
                    return 0.0;
                }
                // substitute t = d − z on [0, span]
                let span = d - lo;
                let tail = (-lambda * span).exp();
                d * (1.0 - tail) - (1.0 - tail * (1.0 + lambda * span)) / lambda
            }
            ModelKind::DoubleExponential { mu } => {
                let a = lo.max(*mu);
                let right = 0.5 * (mu - a).exp() * (a + 1.0);
                let left = if lo < *mu {
                    0.5 * ((mu - 1.0) - (lo - mu).exp() * (lo - 1.0))
                } else {
                    0.0
                };
                right + left
            }
            ModelKind::Tabulated(t) => t
                .segments()
                .filter_map(|(a, b, p, s)| {
                    let a = a.max(lo);
                    (b > a).then(|| p * (b * b - a * a) / 2.0 + s * (b.powi(3) - a.powi(3)) / 3.0)
                })
                .sum(),
        }
    }

    /// ∫_lo^∞ e^{−γz} g(z) dz for γ ≥ 0 (finite `lo`).
    pub fn exp_moment_above(&self, lo: f64, gamma: f64) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => {
                if lo >= *d {
                    return 0.0;
                }
                let k = lambda - gamma;
                let span = d - lo;
                let integral = if k == 0.0 { span } else { -(-k * span).exp_m1() / k };
                lambda * (-gamma * d).exp() * integral
            }
            ModelKind::DoubleExponential { mu } => {
                let a = lo.max(*mu);
                let right = 0.5 * (mu - a - gamma * a).exp() / (1.0 + gamma);
                let left = if lo < *mu {
                    let k = 1.0 - gamma;
                    let span = mu - lo;
                    let integral = if k == 0.0 { span } else { -(-k * span).exp_m1() / k };
                    0.5 * (-gamma * mu).exp() * integral
                } else {
                    0.0
                };
                right + left
            }
            ModelKind::Tabulated(t) => t
                .segments()
                .filter_map(|(a, b, p, s)| {
                    let a = a.max(lo);
                    (b > a).then(|| {
                        let (m0, m1) = int_exp_moments(-gamma, b - a);
                        (-gamma * a).exp() * ((p + s * a) * m0 + s * m1)
                    })
                })
                .sum(),
        }
    }

    /// ln ∫_0^∞ e^{−γw} g(w − u) dw, i.e. ln(e^{−γu} ∫_{−u}^∞ e^{−γz} g(z) dz),
    /// evaluated without forming the two exponentials separately.
    pub fn ln_shifted_exp_moment(&self, u: f64, gamma: f64) -> f64 {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => {
                let top = u + d;
                if top <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                lambda.ln() - lambda * top + ln_int_exp(lambda - gamma, top)
            }
            ModelKind::DoubleExponential { mu } => {
                let m = u + mu;
                let a = m.max(0.0);
                let right = 0.5f64.ln() + m - (1.0 + gamma) * a - (1.0 + gamma).ln();
                if m > 0.0 {
                    log_add_exp(right, 0.5f64.ln() - m + ln_int_exp(1.0 - gamma, m))
                } else {
                    right
                }
            }
            ModelKind::Tabulated(t) => {
                let terms: Vec<f64> = t
                    .segments()
                    .filter_map(|(a, b, p, s)| {
                        let lo = (a + u).max(0.0);
                        let hi = b + u;
                        (hi > lo).then(|| {
                            let (m0, m1) = int_exp_moments(-gamma, hi - lo);
                            let mass = (p + s * (lo - u)) * m0 + s * m1;
                            if mass > 0.0 {
                                -gamma * lo + mass.ln()
                            } else {
                                f64::NEG_INFINITY
                            }
                        })
                    })
                    .collect();
                if terms.is_empty() {
                    f64::NEG_INFINITY
                } else {
                    log_sum_exp(&terms)
                }
            }
        }
    }

    /// Entropic certainty equivalent of Z⁺: −(1/γ) ln E e^{−γZ⁺}; E Z⁺ at γ = 0.
    ///
    /// Evaluated as −(1/γ) ln(1 − D) with D = ∫_0^∞ (1 − e^{−γz}) g(z) dz so that
    /// small γ does not cancel.
    pub fn entropic_premium_positive_part(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return self.mean_positive_part();
        }
        let (_, hi) = self.truncated_support();
        if hi <= 0.0 {
            return 0.0;
        }
        let mut breaks = vec![0.0];
        breaks.extend(self.breakpoints().into_iter().filter(|&b| b > 0.0 && b < hi));
        breaks.push(hi);
        breaks.dedup();
        let tol = QuadTol { abs: 1e-15, rel: 1e-13, ..QuadTol::default() };
        let d = integrate_piecewise(|z| -(-gamma * z).exp_m1() * self.pdf(z), &breaks, tol).value;
        -(-d).ln_1p() / gamma
    }

    /// Checks A1 (E Z⁺ finite), A2 (P(Z<0) > 0) and, for the left-exponential
    /// family, λ·d > 1.
    pub fn validate_assumptions(&self) -> Vec<AssumptionViolation> {
        let mut out = Vec::new();
        if !self.mean_positive_part().is_finite() {
            out.push(AssumptionViolation::InfinitePositiveMean);
        }
        if self.cdf(0.0) <= 0.0 {
            out.push(AssumptionViolation::RuinImpossible);
        }
        if let ModelKind::LeftExponential { lambda, d } = self.kind {
            if lambda * d <= 1.0 {
                out.push(AssumptionViolation::ShiftRateViolation { lambda, d });
            }
        }
        out
    }

    /// `Err` listing every violation, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate_assumptions();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::AssumptionsViolated(Violations(v)))
        }
    }

    pub(crate) fn pieces(&self) -> Vec<DensityPiece> {
        match &self.kind {
            ModelKind::LeftExponential { lambda, d } => vec![DensityPiece::LeftTail {
                ln_scale: lambda.ln() - lambda * d,
                rate: *lambda,
                hi: *d,
            }],
            ModelKind::DoubleExponential { mu } => vec![
                DensityPiece::LeftTail { ln_scale: 0.5f64.ln() - mu, rate: 1.0, hi: *mu },
                DensityPiece::RightTail { ln_scale: 0.5f64.ln() + mu, decay: 1.0, lo: *mu },
            ],
            ModelKind::Tabulated(t) => t
                .segments()
                .map(|(lo, hi, intercept, slope)| DensityPiece::Linear { lo, hi, intercept, slope })
                .collect(),
        }
    }
}
