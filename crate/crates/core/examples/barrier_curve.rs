//! Three-stage barrier as a function of risk aversion for several drifts.

use riskdiv::case_studies::{barrier_curve, default_gammas, CurveMode};
use riskdiv::IncrementModel;

fn main() -> riskdiv::Result<()> {
    let gammas = default_gammas(10.0, 30);
    for mu in [1.2, 2.0, 5.0, 8.0] {
        let curve = barrier_curve(&IncrementModel::double_exponential(mu)?, &gammas, 0.99, CurveMode::ThreeStage)?;
        let b = curve.barriers();
        let peak = b.iter().copied().fold(0.0, f64::max);
        println!(
            "mu={mu}: b(0)={:.4} peak={peak:.4} b(10)={:.4} nonincreasing={} unimodal={}",
            b[0],
            b[b.len() - 1],
            curve.is_nonincreasing(1e-9),
            curve.is_unimodal_with_zero_tail(1e-6)
        );
    }
    let curve = barrier_curve(&IncrementModel::double_exponential(5.0)?, &gammas, 0.99, CurveMode::ThreeStage)?;
    print!("{}", curve.to_csv());
    Ok(())
}
