//! Nested Monte-Carlo evaluation of finite-horizon optimal rules.

use riskdiv::oracles::{nested_mc_evaluate, McConfig};
use riskdiv::{finite_horizon_solve, IncrementModel, RiskParams, SurplusGrid};

fn main() -> riskdiv::Result<()> {
    let model = IncrementModel::double_exponential(2.0)?;
    let params = RiskParams::new(0.99, 1.0)?;
    let grid = SurplusGrid::covering(0.02, 40.0)?;
    let cfg = McConfig { outer: 20_000, inner: 1_000, seed: 7 };
    for horizon in [2, 3] {
        let res = finite_horizon_solve(horizon, params, &model, grid)?;
        let j = res.values.last().expect("horizon >= 1");
        for x in [0.0, 2.0, 20.0] {
            let mc = nested_mc_evaluate(x, &res.policies, params, &model, cfg)?;
            let z = (j.eval(x) - mc.estimate) / mc.stderr_proxy;
            println!("N={horizon} x={x}: solver {:.6} MC {:.6} ± {:.6} ({z:+.2} sigma)", j.eval(x), mc.estimate, mc.stderr_proxy);
        }
    }
    Ok(())
}
