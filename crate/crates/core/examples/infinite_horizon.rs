//! Value iteration on an automatically sized grid.

use riskdiv::solvers::{solve_auto, AutoGrid};
use riskdiv::{extract_bands, IncrementModel, RiskParams};

fn main() -> riskdiv::Result<()> {
    let model = IncrementModel::double_exponential(5.0)?;
    let params = RiskParams::new(0.99, 0.5)?;
    let sol = solve_auto(params, &model, AutoGrid::default(), 1e-8)?;
    let bands = extract_bands(&sol.policy, sol.grid.step() / 2.0)?;
    println!("grid: step {:.4}, {} nodes, x_max {:.2}", sol.grid.step(), sol.grid.n_nodes(), sol.grid.x_max());
    print!("{}", sol.report.to_text());
    println!("{}", bands.summary());
    for x in [0.0, 10.0, 100.0, 300.0] {
        println!("J({x}) = {:.6}", sol.value.eval(x));
    }
    Ok(())
}
