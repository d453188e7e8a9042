//! The γ = 0 solver against an independently coded risk-neutral value iteration.

use riskdiv::oracles::risk_neutral_vi;
use riskdiv::{infinite_horizon_solve, IncrementModel, RiskParams, SurplusGrid};

fn main() -> riskdiv::Result<()> {
    let model = IncrementModel::double_exponential(1.2)?;
    let beta = 0.9;
    let grid = SurplusGrid::covering(0.02, 25.0)?;
    let (v, _, report) = infinite_horizon_solve(RiskParams::new(beta, 0.0)?, &model, grid, 1e-10)?;
    let oracle = risk_neutral_vi(&model, beta, grid, 1e-10)?;
    println!("{} sweeps, sup distance to oracle {:.3e}", report.iterations, v.sup_distance(&oracle));
    for gamma in [1e-4, 1e-3, 1e-2] {
        let (vg, _, _) = infinite_horizon_solve(RiskParams::new(beta, gamma)?, &model, grid, 1e-10)?;
        println!("gamma={gamma}: sup |J_gamma - J_0| = {:.4e}", vg.sup_distance(&v));
    }
    Ok(())
}
