//! Band decomposition of optimal policies, including a multi-band example.

use riskdiv::{extract_bands, infinite_horizon_solve, IncrementModel, RiskParams, SurplusGrid};

fn main() -> riskdiv::Result<()> {
    // a density with a jump produces several retention levels
    let jumpy = IncrementModel::tabulated(vec![-1.0, 0.0, 0.0, 1.0], vec![0.25, 0.25, 0.5, 0.5])?;
    let smooth = IncrementModel::double_exponential(1.2)?;
    for (name, model, gamma) in [("jump density", &jumpy, 0.5), ("double exponential", &smooth, 0.5)] {
        let params = RiskParams::new(0.95, gamma)?;
        let grid = SurplusGrid::covering(0.005, 12.0)?;
        let (_, policy, _) = infinite_horizon_solve(params, model, grid, 1e-9)?;
        let bands = extract_bands(&policy, grid.step() / 2.0)?;
        println!("{name}: {}", bands.summary());
        print!("{}", bands.to_csv());
        let same = bands.reconstruct() == policy;
        println!("reconstructs the grid policy: {same}\n");
    }
    Ok(())
}
