//! Wasserstein and bounded-Lipschitz distances on pairs, and the
//! assignment solver behind equal-weight transport.

use std::sync::Arc;

use symld::measure::{Alphabet, PairMeasure};
use symld::transport::{bl_distance_pairs, count_optimal_assignments, solve_assignment, wasserstein_pairs, PairGround};

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let product = PairMeasure::new(alphabet.clone(), vec![0.25; 4])?;
    for t in [0.5, 0.7, 0.9] {
        let (d, o) = (t / 2.0, (1.0 - t) / 2.0);
        let nu = PairMeasure::new(alphabet.clone(), vec![d, o, o, d])?;
        let (w, plan) = wasserstein_pairs(&product, &nu, PairGround::TILDE_SUM)?;
        let bl = bl_distance_pairs(&product, &nu, PairGround::TILDE_SUM)?;
        println!("t = {t}: W = {w:.6}  BL = {bl:.6}  plan cells {}", plan.mass.len());
    }

    let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
    let a = solve_assignment(&cost)?;
    println!("assignment {:?} mean cost {:.4}", a.permutation.images(), a.cost);
    let ties = vec![vec![1.0; 3]; 3];
    println!("optimal assignments of a constant 3x3 cost: {}", count_optimal_assignments(&ties)?);
    Ok(())
}
