//! Entropy projection under marginal and observable constraints, and the
//! infimum of the rate over a transport ball.

use std::sync::Arc;

use symld::measure::{product, Alphabet, DiscreteMeasure, Measure, PairMeasure};
use symld::rate::{ball_infimum, entropy_project, ConstraintSet, Observable};

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let mu = DiscreteMeasure::from_counts(alphabet.clone(), &[1, 1])?;
    let reference = product(&mu, &mu)?;
    let constraints = ConstraintSet {
        marginal: Some(mu.clone()),
        observables: vec![Observable {
            g: vec![1.0, 0.0, 0.0, 1.0],
            target: 0.8,
        }],
        ball: None,
    };
    let p = entropy_project(&reference, &constraints)?;
    println!("minimizer {:?}", p.minimizer.weights());
    println!("value {:.10}  (closed form {:.10})", p.value, 2f64.ln() + 0.8 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
    println!("marginal residual {:.1e}, {} dual steps", p.residuals.marginal_l1, p.dual_history.len());

    let center = PairMeasure::new(alphabet, vec![0.45, 0.05, 0.05, 0.45])?;
    let b = ball_infimum(&mu, &center, 0.05)?;
    println!("inf of rate over the 0.05-ball around the t = 0.9 tilt: {:.6} (certified: {})", b.value, b.certified);
    Ok(())
}
