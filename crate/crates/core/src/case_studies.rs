//! Closed forms and semi-analytic barriers for two worked settings:
//! the left-exponential increment in the infinite-horizon problem, and
//! short horizons (two and three periods) for arbitrary increments.

use std::fmt;

use crate::bands::{default_eps_zero, extract_bands, PolicyClass};
use crate::error::{Error, Result};
use crate::format::num;
use crate::model::IncrementModel;
use crate::numeric::{golden_max, log_add_exp};
use crate::risk::{BbarBound, RiskParams};
use crate::solvers::{solve_auto, AutoGrid};

/// Outcome of the regime test for the left-exponential increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpRegime {
    /// γ/(βλ) ≥ 1: paying everything at once is optimal.
    PayAll,
    /// γ/(βλ) < 1: an interior barrier is possible; whether it is positive
    /// depends on the sign of h′(0⁺), which only the solver can decide.
    InteriorBarrierExpected,
    /// γ/(βλ) within 1e-9 below 1. The barrier-value formula diverges there.
    BoundaryCase,
}

/// Regime of the left-exponential increment with rate λ and upper end d.
pub fn exp_case_regime(lambda: f64, d: f64, params: RiskParams) -> Result<ExpRegime> {
    if !(lambda > 0.0 && lambda * d > 1.0) {
        return Err(Error::InvalidParams(format!("need lambda*d > 1, got lambda={lambda}, d={d}")));
    }
    if !(params.gamma() > 0.0) {
        return Err(Error::InvalidParams("the regime test needs gamma > 0".into()));
    }
    let ratio = params.gamma() / (params.beta() * lambda);
    Ok(if ratio >= 1.0 {
        ExpRegime::PayAll
    } else if ratio > 1.0 - 1e-9 {
        ExpRegime::BoundaryCase
    } else {
        ExpRegime::InteriorBarrierExpected
    })
}

/// J(p) at an interior barrier p: [d + (1/γ) ln(1 − γ/(βλ))] / (1/β − 1).
///
/// A negative result means no interior barrier is consistent with the model.
pub fn exp_barrier_value_closed_form(lambda: f64, d: f64, params: RiskParams) -> Result<f64> {
    let (beta, gamma) = (params.beta(), params.gamma());
    if !(gamma > 0.0) {
        return Err(Error::RegimeViolation("closed form needs gamma > 0".into()));
    }
    let ratio = gamma / (beta * lambda);
    if !(ratio < 1.0) {
        return Err(Error::RegimeViolation(format!("gamma/(beta*lambda) = {ratio} >= 1")));
    }
    Ok((d + (-ratio).ln_1p() / gamma) / (1.0 / beta - 1.0))
}

/// J_2(x) = x + β ρ(Z⁺).
pub fn two_stage_closed_form(x: f64, params: RiskParams, model: &IncrementModel) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParams(format!("surplus must be >= 0, got {x}")));
    }
    Ok(x + params.beta() * model.entropic_premium_positive_part(params.gamma()))
}

/// The three-period objective h(u) = J_3(x) − x at retained surplus u, given J_2.
#[derive(Debug, Clone)]
pub struct ThreeStageProfile<'a> {
    model: &'a IncrementModel,
    beta: f64,
    gamma: f64,
    /// β ρ(Z⁺), the bounded part of J_2
    c2: f64,
}

impl<'a> ThreeStageProfile<'a> {
    pub fn new(params: RiskParams, model: &'a IncrementModel) -> Self {
        let c2 = params.beta() * model.entropic_premium_positive_part(params.gamma());
        Self { model, beta: params.beta(), gamma: params.gamma(), c2 }
    }

    /// −u − (β/γ) ln(e^{−γ(u+c₂)} ∫_{−u}^∞ e^{−γz} g + G(−u)); the
    /// expectation analogue when γ = 0.
    pub fn h(&self, u: f64) -> f64 {
        let m = self.model;
        if self.gamma == 0.0 {
            let survive = 1.0 - m.cdf(-u);
            return -u + self.beta * ((u + self.c2) * survive + m.first_moment_above(-u));
        }
        -u - self.beta / self.gamma * self.ln_r(u)
    }

    fn ln_r(&self, u: f64) -> f64 {
        let m = self.model;
        log_add_exp(-self.gamma * self.c2 + m.ln_shifted_exp_moment(u, self.gamma), m.ln_cdf(-u))
    }

    /// h′(u) in closed form.
    pub fn h_prime(&self, u: f64) -> f64 {
        let m = self.model;
        let (beta, gamma) = (self.beta, self.gamma);
        if gamma == 0.0 {
            return -1.0 + beta * (1.0 - m.cdf(-u)) + beta * self.c2 * m.pdf(-u);
        }
        let c = -(-gamma * self.c2).exp_m1() / gamma;
        let r = self.ln_r(u).exp();
        -1.0 + beta * (1.0 - (m.cdf(-u) - c * m.pdf(-u)) / r)
    }
}

/// Maximiser of the three-period objective over [0, ξ*].
///
/// A geometric scan locates the best bracket, which golden-section search
/// refines to 1e-8. Returns 0 when no positive retained level beats u = 0.
pub fn three_stage_barrier(params: RiskParams, model: &IncrementModel) -> f64 {
    let xi_star = BbarBound::new(params.beta(), model).xi_star();
    let profile = ThreeStageProfile::new(params, model);
    let n = 4000;
    let lo = (xi_star * 1e-9).max(1e-12);
    let mut pts = Vec::with_capacity(n + 2);
    pts.push(0.0);
    for k in 0..=n {
        pts.push(lo * (xi_star / lo).powf(k as f64 / n as f64));
    }
    let vals: Vec<f64> = pts.iter().map(|&u| profile.h(u)).collect();
    let mut best = 0;
    for k in 1..pts.len() {
        if vals[k] > vals[best] + 1e-14 * (1.0 + vals[best].abs()) {
            best = k;
        }
    }
    if best == 0 {
        return 0.0;
    }
    let a = pts[best - 1];
    let b = pts[(best + 1).min(pts.len() - 1)];
    let (u, hu) = golden_max(|u| profile.h(u), a, b, 1e-8);
    if hu > vals[0] {
        u
    } else {
        0.0
    }
}

/// How each curve point is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMode {
    ThreeStage,
    /// ξ of the infinite-horizon optimal policy
    InfiniteHorizon { grid: AutoGrid, tol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub gamma: f64,
    /// NaN when the point failed
    pub barrier: f64,
    pub note: String,
}

/// Barrier level as a function of γ for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierCurve {
    pub points: Vec<CurvePoint>,
    pub model_descriptor: String,
    pub beta: f64,
}

/// 0 followed by `n` log-uniform values on [1e-3, γ_max].
pub fn default_gammas(gamma_max: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let lo: f64 = 1e-3;
    for k in 0..n {
        let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 1.0 };
        out.push(lo * (gamma_max / lo).powf(t));
    }
    out
}

/// Computes the barrier at each γ. Individual failures become NaN points.
pub fn barrier_curve(model: &IncrementModel, gammas: &[f64], beta: f64, mode: CurveMode) -> Result<BarrierCurve> {
    if gammas.is_empty() {
        return Err(Error::InvalidParams("empty gamma list".into()));
    }
    if gammas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("gammas must be strictly increasing".into()));
    }
    RiskParams::new(beta, gammas[0])?;
    let points = gammas
        .iter()
        .map(|&gamma| {
            let res = RiskParams::new(beta, gamma).and_then(|p| match mode {
                CurveMode::ThreeStage => Ok(three_stage_barrier(p, model)),
                CurveMode::InfiniteHorizon { grid, tol } => {
                    let sol = solve_auto(p, model, grid, tol)?;
                    let bands = extract_bands(&sol.policy, default_eps_zero(sol.grid))?;
                    Ok(if bands.classify() == PolicyClass::PayAll { 0.0 } else { bands.top_barrier() })
                }
            });
            match res {
                Ok(b) => CurvePoint { gamma, barrier: b, note: String::new() },
                Err(e) => CurvePoint { gamma, barrier: f64::NAN, note: e.to_string() },
            }
        })
        .collect();
    Ok(BarrierCurve { points, model_descriptor: model.descriptor(), beta })
}

impl BarrierCurve {
    pub fn gammas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.gamma).collect()
    }

    pub fn barriers(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.barrier).collect()
    }

    /// b(γ_{k+1}) ≤ b(γ_k) + tol for all k.
    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.barriers().windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Rises (weakly) to a single positive peak, falls (weakly) after it and
    /// ends at zero; `tol` absorbs wiggles of the refinement.
    pub fn is_unimodal_with_zero_tail(&self, tol: f64) -> bool {
        let b = self.barriers();
        if b.is_empty() || b.iter().any(|x| x.is_nan()) {
            return false;
        }
        let peak = (0..b.len()).fold(0, |best, k| if b[k] > b[best] { k } else { best });
        let rising = b[..=peak].windows(2).all(|w| w[1] >= w[0] - tol);
        let falling = b[peak..].windows(2).all(|w| w[1] <= w[0] + tol);
        rising && falling && b[peak] > tol && b.last().is_some_and(|x| x.abs() <= tol)
    }

    /// Header comment, column names, then one row per γ.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# model={} beta={}\ngamma,barrier,note\n", self.model_descriptor, num(self.beta));
        for p in &self.points {
            s.push_str(&format!("{},{},{}\n", num(p.gamma), num(p.barrier), p.note.replace([',', '\n'], ";")));
        }
        s
    }
}

impl fmt::Display for BarrierCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv())
    }
}
