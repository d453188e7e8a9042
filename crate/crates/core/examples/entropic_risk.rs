//! Certainty equivalents of a discrete payoff for increasing risk aversion.

use riskdiv::certainty_equivalent;

fn main() -> riskdiv::Result<()> {
    let payoff = [-2.0, 0.5, 1.0, 4.0];
    let probs = [0.1, 0.3, 0.4, 0.2];
    let mean: f64 = payoff.iter().zip(&probs).map(|(v, p)| v * p).sum();
    let var: f64 = payoff.iter().zip(&probs).map(|(v, p)| p * (v - mean).powi(2)).sum();
    println!("gamma,rho,mean_minus_half_gamma_var");
    for gamma in [0.0, 1e-3, 0.1, 0.5, 1.0, 5.0] {
        let rho = certainty_equivalent(&payoff, &probs, gamma)?;
        println!("{gamma},{rho:.9},{:.9}", mean - gamma / 2.0 * var);
    }
    Ok(())
}
