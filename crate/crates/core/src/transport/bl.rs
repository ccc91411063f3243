//! Dual bounded-Lipschitz distance as a linear program on the joint support.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use super::metric::{point_matrix, BaseMetric, PairGround};
use crate::error::{domain, Error, Result};
use crate::measure::{DiscreteMeasure, Measure, PairMeasure};

/// `sup { Σ f (rho − nu) : ‖f‖_∞ + ‖f‖_L ≤ 1 }` with `f` ranging over
/// functions on the union of the supports. Variables are `f`, a sup-norm
/// bound `c` and a Lipschitz bound `L` with `c + L ≤ 1`.
pub fn bl_program(rho: &[f64], nu: &[f64], ground: &[Vec<f64>]) -> Result<f64> {
    if rho.len() != nu.len() || ground.len() != rho.len() {
        return domain("bounded-Lipschitz inputs have mismatched sizes");
    }
    let cells: Vec<usize> = (0..rho.len()).filter(|&i| rho[i] > 0.0 || nu[i] > 0.0).collect();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let c = lp.add_var(0.0, (0.0, 1.0));
    let lip = lp.add_var(0.0, (0.0, 1.0));
    let f: Vec<_> = cells
        .iter()
        .map(|&i| lp.add_var(rho[i] - nu[i], (-1.0, 1.0)))
        .collect();
    lp.add_constraint(&[(c, 1.0), (lip, 1.0)], ComparisonOp::Le, 1.0);
    for &fi in &f {
        lp.add_constraint(&[(fi, 1.0), (c, -1.0)], ComparisonOp::Le, 0.0);
        lp.add_constraint(&[(fi, -1.0), (c, -1.0)], ComparisonOp::Le, 0.0);
    }
    for (a, &i) in cells.iter().enumerate() {
        for (b, &j) in cells.iter().enumerate() {
            if a != b {
                lp.add_constraint(
                    &[(f[a], 1.0), (f[b], -1.0), (lip, -ground[i][j])],
                    ComparisonOp::Le,
                    0.0,
                );
            }
        }
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Infeasible(format!("bounded-Lipschitz program: {e}")))?;
    Ok(sol.objective().max(0.0))
}

pub fn bl_distance(rho: &DiscreteMeasure, nu: &DiscreteMeasure, base: BaseMetric) -> Result<f64> {
    if **rho.alphabet() != **nu.alphabet() {
        return domain("bounded-Lipschitz distance across alphabets");
    }
    bl_program(rho.weights(), nu.weights(), &point_matrix(rho.alphabet(), base))
}

/// `β_BL` on `Σ²`, typically with [`PairGround::TILDE_MAX`].
pub fn bl_distance_pairs(rho: &PairMeasure, nu: &PairMeasure, ground: PairGround) -> Result<f64> {
    if **rho.alphabet() != **nu.alphabet() {
        return domain("bounded-Lipschitz distance across alphabets");
    }
    bl_program(rho.weights(), nu.weights(), &ground.matrix(rho.alphabet()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Alphabet;
    use std::sync::Arc;

    /// Dense grid over `(c, L, f_a, f_b)` for two Diracs at distance `t`.
    fn grid_two_point(t: f64) -> f64 {
        let steps = 200;
        let mut best: f64 = 0.0;
        for ci in 0..=steps {
            let c = ci as f64 / steps as f64;
            let l = 1.0 - c;
            for ai in 0..=steps {
                let fa = -c + 2.0 * c * ai as f64 / steps as f64;
                // The best f_b given f_a is as small as both constraints allow.
                let fb = (-c).max(fa - l * t);
                best = best.max(fa - fb);
            }
        }
        best
    }

    #[test]
    fn two_point_diracs() {
        for d in [0.3, 1.0, 4.0] {
            let a = Arc::new(Alphabet::on_line(&[0.0, d]).unwrap());
            let t = d / (1.0 + d);
            let da = DiscreteMeasure::dirac(a.clone(), 0).unwrap();
            let db = DiscreteMeasure::dirac(a, 1).unwrap();
            let v = bl_distance(&da, &db, BaseMetric::Tilde).unwrap();
            assert!((v - grid_two_point(t)).abs() < 1e-2, "{v}");
            assert!((v - 2.0 * t / (2.0 + t)).abs() < 1e-9, "{v}");
            assert!(v <= 2.0);
        }
    }

    #[test]
    fn equal_measures_zero() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0, 2.5]).unwrap());
        let mu = DiscreteMeasure::new(a, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(bl_distance(&mu, &mu, BaseMetric::Tilde).unwrap().abs() < 1e-12);
    }
}
