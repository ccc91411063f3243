//! Optimal transport between atomic measures.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use num_traits::ToPrimitive;
use serde::Serialize;

use super::assignment::solve_assignment;
use super::metric::{point_matrix, BaseMetric, PairGround};
use crate::error::{domain, Error, Result};
use crate::measure::{DiscreteMeasure, Measure, PairAtoms, PairMeasure};

/// Mass tolerance on plan margins.
pub const PLAN_TOLERANCE: f64 = 1e-10;

/// Largest common denominator for which equal-weight measures are expanded
/// into atoms and solved as an assignment.
pub const ASSIGNMENT_MAX_ATOMS: usize = 256;

/// A coupling between two measures, restricted to their supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    /// Indices (into the measures' weight vectors) of the source atoms.
    pub source_cells: Vec<usize>,
    pub target_cells: Vec<usize>,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    /// `mass[a][b]` moved from `source_cells[a]` to `target_cells[b]`.
    pub mass: Vec<Vec<f64>>,
}

impl TransportPlan {
    /// Largest violation of the margin constraints.
    pub fn margin_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (a, row) in self.mass.iter().enumerate() {
            err = err.max((row.iter().sum::<f64>() - self.source[a]).abs());
        }
        for b in 0..self.target.len() {
            let col: f64 = self.mass.iter().map(|r| r[b]).sum();
            err = err.max((col - self.target[b]).abs());
        }
        err
    }

    pub fn cost(&self, ground: &[Vec<f64>]) -> f64 {
        let mut c = 0.0;
        for (a, row) in self.mass.iter().enumerate() {
            for (b, m) in row.iter().enumerate() {
                c += m * ground[self.source_cells[a]][self.target_cells[b]];
            }
        }
        c
    }
}

fn support(w: &[f64]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > 0.0).collect()
}

/// Dense transport program `min Σ c x` over couplings of `source` and
/// `target` (full weight vectors; `ground` indexed by cell).
pub fn transport_program(
    source: &[f64],
    target: &[f64],
    ground: &[Vec<f64>],
) -> Result<(f64, TransportPlan)> {
    let ms: f64 = source.iter().sum();
    let mt: f64 = target.iter().sum();
    if (ms - mt).abs() > 1e-9 {
        return domain(format!("unequal total masses {ms} and {mt}"));
    }
    if source.iter().chain(target).any(|w| *w < 0.0 || !w.is_finite()) {
        return domain("transport masses must be finite and nonnegative");
    }
    let rows = support(source);
    let cols = support(target);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<Vec<_>> = rows
        .iter()
        .map(|&a| {
            cols.iter()
                .map(|&b| lp.add_var(ground[a][b], (0.0, f64::INFINITY)))
                .collect()
        })
        .collect();
    for (r, &a) in rows.iter().enumerate() {
        lp.add_constraint(vars[r].iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, source[a]);
    }
    // One column constraint is implied by the others and the total mass.
    for (c, &b) in cols.iter().enumerate().skip(1) {
        lp.add_constraint(vars.iter().map(|row| (row[c], 1.0)), ComparisonOp::Eq, target[b]);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Infeasible(format!("transport program: {e}")))?;
    let mass: Vec<Vec<f64>> = vars
        .iter()
        .map(|row| row.iter().map(|&v| sol[v].max(0.0)).collect())
        .collect();
    let plan = TransportPlan {
        source: rows.iter().map(|&a| source[a]).collect(),
        target: cols.iter().map(|&b| target[b]).collect(),
        source_cells: rows,
        target_cells: cols,
        mass,
    };
    Ok((sol.objective(), plan))
}

/// Common denominator `n` when every weight is a multiple of `1/n`.
fn atom_count(w: &[num_rational::BigRational]) -> Option<usize> {
    let mut n = num_bigint::BigInt::from(1);
    for r in w {
        let d = r.denom();
        n = num_integer::Integer::lcm(&n, d);
    }
    n.to_usize()
}

fn expand(w: &[num_rational::BigRational], n: usize) -> Vec<usize> {
    let mut atoms = Vec::with_capacity(n);
    for (cell, r) in w.iter().enumerate() {
        let c = (r * num_rational::BigRational::from_integer(n.into()))
            .to_integer()
            .to_usize()
            .unwrap_or(0);
        atoms.extend(std::iter::repeat_n(cell, c));
    }
    atoms
}

/// Assignment between equal-weight atom lists, aggregated into a plan.
fn assignment_plan(
    src_atoms: &[usize],
    dst_atoms: &[usize],
    source: &[f64],
    target: &[f64],
    ground: &[Vec<f64>],
) -> Result<(f64, TransportPlan)> {
    let n = src_atoms.len();
    let cost: Vec<Vec<f64>> = src_atoms
        .iter()
        .map(|&a| dst_atoms.iter().map(|&b| ground[a][b]).collect())
        .collect();
    let r = solve_assignment(&cost)?;
    let rows = support(source);
    let cols = support(target);
    let mut mass = vec![vec![0.0; cols.len()]; rows.len()];
    for i in 0..n {
        let a = rows.binary_search(&src_atoms[i]).expect("atom in support");
        let b = cols
            .binary_search(&dst_atoms[r.permutation.apply(i)])
            .expect("atom in support");
        mass[a][b] += 1.0 / n as f64;
    }
    let plan = TransportPlan {
        source: rows.iter().map(|&a| source[a]).collect(),
        target: cols.iter().map(|&b| target[b]).collect(),
        source_cells: rows,
        target_cells: cols,
        mass,
    };
    Ok((r.cost, plan))
}

fn solve_measures<M: Measure + ExactWeights>(
    rho: &M,
    nu: &M,
    ground: &[Vec<f64>],
) -> Result<(f64, TransportPlan)> {
    if rho.weights().len() != nu.weights().len() || **rho.alphabet() != **nu.alphabet() {
        return domain("transport between measures on different alphabets");
    }
    if let (Some(a), Some(b)) = (rho.exact_weights(), nu.exact_weights()) {
        if let (Some(na), Some(nb)) = (atom_count(a), atom_count(b)) {
            let n = num_integer::Integer::lcm(&na, &nb);
            if n <= ASSIGNMENT_MAX_ATOMS {
                return assignment_plan(
                    &expand(a, n),
                    &expand(b, n),
                    rho.weights(),
                    nu.weights(),
                    ground,
                );
            }
        }
    }
    transport_program(rho.weights(), nu.weights(), ground)
}

trait ExactWeights {
    fn exact_weights(&self) -> Option<&[num_rational::BigRational]>;
}

impl ExactWeights for DiscreteMeasure {
    fn exact_weights(&self) -> Option<&[num_rational::BigRational]> {
        self.exact()
    }
}

impl ExactWeights for PairMeasure {
    fn exact_weights(&self) -> Option<&[num_rational::BigRational]> {
        self.exact()
    }
}

/// `β_W` on `Σ` with ground metric `base`. Measures whose exact weights
/// share a denominator `n ≤ ASSIGNMENT_MAX_ATOMS` are solved as an
/// assignment; all others by the dense transport program.
pub fn wasserstein(
    rho: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    base: BaseMetric,
) -> Result<(f64, TransportPlan)> {
    let ground = point_matrix(rho.alphabet(), base);
    solve_measures(rho, nu, &ground)
}

/// `β_W` on `Σ²` with a pair ground metric.
pub fn wasserstein_pairs(
    rho: &PairMeasure,
    nu: &PairMeasure,
    ground: PairGround,
) -> Result<(f64, TransportPlan)> {
    let g = ground.matrix(rho.alphabet());
    solve_measures(rho, nu, &g)
}

/// The same distance forced through the transport program.
pub fn wasserstein_pairs_lp(
    rho: &PairMeasure,
    nu: &PairMeasure,
    ground: PairGround,
) -> Result<(f64, TransportPlan)> {
    if **rho.alphabet() != **nu.alphabet() {
        return domain("transport between measures on different alphabets");
    }
    transport_program(rho.weights(), nu.weights(), &ground.matrix(rho.alphabet()))
}

/// `β_W` between two equal-weight atom lists of the same length, by assignment.
pub fn wasserstein_atoms(a: &PairAtoms, b: &PairAtoms, ground: PairGround) -> Result<f64> {
    if a.len() != b.len() {
        return domain(format!("atom counts differ: {} vs {}", a.len(), b.len()));
    }
    if **a.alphabet() != **b.alphabet() {
        return domain("atoms on different alphabets");
    }
    let alphabet = a.alphabet();
    let cost: Vec<Vec<f64>> = a
        .atoms()
        .iter()
        .map(|&p| b.atoms().iter().map(|&q| ground.distance(alphabet, p, q)).collect())
        .collect();
    Ok(solve_assignment(&cost)?.cost)
}
