//! Policy iteration from the pay-all rule, printing each improvement.

use riskdiv::solvers::policy_iteration_traced;
use riskdiv::{extract_xi, IncrementModel, RiskParams, SurplusGrid};

fn main() -> riskdiv::Result<()> {
    let model = IncrementModel::double_exponential(1.2)?;
    let params = RiskParams::new(0.99, 0.5)?;
    let grid = SurplusGrid::covering(0.05, 60.0)?;
    let (_, value, report, trace) = policy_iteration_traced(params, &model, grid, 1e-8, None)?;
    for (k, (policy, v)) in trace.policies.iter().zip(&trace.values).enumerate() {
        let gap = if k == 0 { f64::NAN } else { trace.gaps[k - 1] };
        println!("round {k}: xi={:.3} J(0)={:.6} gap={gap:.3e}", extract_xi(policy, grid.step() / 2.0)?, v.value(0));
    }
    println!("stopped after {} rounds, J(0) = {:.8}", report.iterations, value.value(0));
    Ok(())
}
