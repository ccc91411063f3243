//! Rate functions of symmetrised empirical measures and entropy
//! projections onto linear and transport-ball constraint sets.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{kl_weights, product, DiscreteMeasure, Measure, PairMeasure};
use crate::transport::{wasserstein_pairs, PairGround};

/// Tolerance on marginal equality in the rate functions and on IPF output.
pub const MARGINAL_TOLERANCE: f64 = 1e-10;
/// Observable gap at which the dual search stops.
pub const OBSERVABLE_TOLERANCE: f64 = 1e-8;
/// Entropy tolerance.
pub const ENTROPY_TOLERANCE: f64 = 1e-8;
/// Tolerance of linear-program feasibility and ball membership.
pub const LP_TOLERANCE: f64 = 1e-9;

const IPF_MAX_ITERATIONS: usize = 200_000;
/// IPF budget per trial multiplier inside the bisection before falling back
/// to a full fit; the chosen multiplier is refitted fully.
const SEARCH_IPF_ITERATIONS: usize = 2_000;
const MAX_SWEEPS: usize = 10_000;
const LAMBDA_LIMIT: f64 = 1e4;

/// First-layer rate function `𝒮`.
#[derive(Debug, Clone)]
pub enum RateOracle {
    /// `ρ ↦ H(ρ | 𝔪)`.
    Sanov(DiscreteMeasure),
    /// 0 at the center, `+∞` elsewhere.
    Indicator(DiscreteMeasure),
}

impl RateOracle {
    pub fn eval(&self, rho: &DiscreteMeasure) -> Result<f64> {
        match self {
            RateOracle::Sanov(m) => crate::measure::relative_entropy(rho, m),
            RateOracle::Indicator(center) => {
                same_alphabet(rho, center)?;
                Ok(if cellwise_equal(rho.weights(), center.weights()) {
                    0.0
                } else {
                    f64::INFINITY
                })
            }
        }
    }

    pub fn anchor(&self) -> &DiscreteMeasure {
        match self {
            RateOracle::Sanov(m) | RateOracle::Indicator(m) => m,
        }
    }
}

fn same_alphabet<A: Measure, B: Measure>(a: &A, b: &B) -> Result<()> {
    if a.alphabet() != b.alphabet() && **a.alphabet() != **b.alphabet() {
        return domain("measures live on different alphabets");
    }
    Ok(())
}

fn cellwise_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= MARGINAL_TOLERANCE)
}

/// `𝒮(ν₁) + H(ν | ν₁ ⊗ ν₁)` when `ν₁ = ν₂`, else `+∞`.
pub fn rate_j(nu: &PairMeasure, s: &RateOracle) -> Result<f64> {
    same_alphabet(nu, s.anchor())?;
    let first = nu.first_marginal();
    let second = nu.second_marginal();
    if !cellwise_equal(first.weights(), second.weights()) {
        return Ok(f64::INFINITY);
    }
    let head = s.eval(&first)?;
    if head.is_infinite() {
        return Ok(head);
    }
    let reference = product(&first, &first)?;
    Ok(head + kl_weights(nu.weights(), reference.weights()))
}

/// `H(ν | μ ⊗ μ)` when `ν₁ = ν₂ = μ`, else `+∞`; evaluated as
/// `rate_j` with the indicator first-layer rate at `μ`.
pub fn rate_i(nu: &PairMeasure, mu: &DiscreteMeasure) -> Result<f64> {
    rate_j(nu, &RateOracle::Indicator(mu.clone()))
}

/// Linear constraint `Σ g(cell) ν(cell) = target` over row-major cells.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Observable {
    pub g: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct BallConstraint {
    pub center: PairMeasure,
    pub radius: f64,
    pub ground: PairGround,
}

/// Feasible set of an entropy projection.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    /// Both marginals must equal this measure.
    pub marginal: Option<DiscreteMeasure>,
    pub observables: Vec<Observable>,
    /// Closed transport ball.
    pub ball: Option<BallConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// `Σ|row − μ| + Σ|col − μ|`, zero without a marginal constraint.
    pub marginal_l1: f64,
    pub observable_gaps: Vec<f64>,
    /// Distance to the ball center minus the radius (≤ 0 inside).
    pub ball_excess: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyProjection {
    #[serde(serialize_with = "ser_pair_weights")]
    pub minimizer: PairMeasure,
    pub value: f64,
    pub residuals: Residuals,
    /// Lagrange dual objective after each coordinate update of the tilt.
    /// Exact coordinate maximisation makes it nondecreasing, so the gap
    /// `value − dual` is nonincreasing and ends at zero.
    pub dual_history: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Whether `value` is the exact infimum (rather than an upper bound).
    pub certified: bool,
    /// Frank-Wolfe duality gap when a ball constraint was active.
    pub duality_gap: Option<f64>,
}

fn ser_pair_weights<S: serde::Serializer>(
    m: &PairMeasure,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::Error as _;
    let doc = m.to_doc().map_err(S::Error::custom)?;
    doc.serialize(s)
}

struct Problem2<'a> {
    k: usize,
    reference: &'a PairMeasure,
    support: Vec<usize>,
    marginal: Option<Vec<f64>>,
    observables: &'a [Observable],
}

type BallArgs<'a> = (&'a [f64], &'a [Vec<f64>], f64);

impl Problem2<'_> {
    fn ref_weights(&self) -> &[f64] {
        self.reference.weights()
    }

    fn marginal_l1(&self, q: &[f64]) -> f64 {
        let Some(mu) = &self.marginal else { return 0.0 };
        marginal_error(q, self.k, mu)
    }

    fn gaps(&self, q: &[f64]) -> Vec<f64> {
        self.observables
            .iter()
            .map(|o| expectation(&o.g, q) - o.target)
            .collect()
    }

    fn measure(&self, q: &[f64]) -> Result<PairMeasure> {
        let total: f64 = q.iter().sum();
        PairMeasure::new(
            self.reference.alphabet().clone(),
            q.iter().map(|x| x / total).collect(),
        )
    }

    /// LP over the cell polytope, lifted by a transport plan to the ball
    /// center when `ball` is given. Without an objective the LP minimises
    /// the transport cost to the center (or just finds a feasible point).
    fn lp(&self, objective: Option<&[f64]>, ball: Option<BallArgs>) -> Result<Vec<f64>> {
        let k = self.k;
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let cells: Vec<(usize, Variable)> = self
            .support
            .iter()
            .map(|&c| (c, lp.add_var(objective.map_or(0.0, |o| o[c]), (0.0, f64::INFINITY))))
            .collect();
        if let Some(mu) = &self.marginal {
            for i in 0..k {
                let row: Vec<_> = cells.iter().filter(|(c, _)| c / k == i).map(|(_, v)| (*v, 1.0)).collect();
                lp.add_constraint(row, ComparisonOp::Eq, mu[i]);
            }
            // The last column sum is implied.
            for j in 0..k - 1 {
                let col: Vec<_> = cells.iter().filter(|(c, _)| c % k == j).map(|(_, v)| (*v, 1.0)).collect();
                lp.add_constraint(col, ComparisonOp::Eq, mu[j]);
            }
        } else if ball.is_none() {
            lp.add_constraint(cells.iter().map(|(_, v)| (*v, 1.0)), ComparisonOp::Eq, 1.0);
        }
        for o in self.observables {
            lp.add_constraint(cells.iter().map(|(c, v)| (*v, o.g[*c])), ComparisonOp::Eq, o.target);
        }
        if let Some((center, ground, radius)) = ball {
            let targets: Vec<usize> = (0..center.len()).filter(|&b| center[b] > 0.0).collect();
            let plan: Vec<Vec<Variable>> = cells
                .iter()
                .map(|(c, _)| {
                    targets
                        .iter()
                        .map(|&b| {
                            let obj = if objective.is_none() { ground[*c][b] } else { 0.0 };
                            lp.add_var(obj, (0.0, f64::INFINITY))
                        })
                        .collect()
                })
                .collect();
            for (r, (_, v)) in cells.iter().enumerate() {
                let mut expr: Vec<(Variable, f64)> = plan[r].iter().map(|&x| (x, 1.0)).collect();
                expr.push((*v, -1.0));
                lp.add_constraint(expr, ComparisonOp::Eq, 0.0);
            }
            let skip = usize::from(self.marginal.is_some());
            for (t, &b) in targets.iter().enumerate().skip(skip) {
                lp.add_constraint(plan.iter().map(|row| (row[t], 1.0)), ComparisonOp::Eq, center[b]);
            }
            if objective.is_some() {
                let mut expr = Vec::new();
                for (r, (c, _)) in cells.iter().enumerate() {
                    for (t, &b) in targets.iter().enumerate() {
                        expr.push((plan[r][t], ground[*c][b]));
                    }
                }
                lp.add_constraint(expr, ComparisonOp::Le, radius);
            }
        }
        let sol = lp
            .solve()
            .map_err(|e| Error::Infeasible(format!("constraint polytope: {e}")))?;
        let mut q = vec![0.0; k * k];
        for (c, v) in &cells {
            q[*c] = sol[*v].max(0.0);
        }
        Ok(q)
    }
}

fn marginal_error(q: &[f64], k: usize, mu: &[f64]) -> f64 {
    let mut err = 0.0;
    for i in 0..k {
        let row: f64 = (0..k).map(|j| q[i * k + j]).sum();
        let col: f64 = (0..k).map(|j| q[j * k + i]).sum();
        err += (row - mu[i]).abs() + (col - mu[i]).abs();
    }
    err
}

/// `g_ij − ḡ_i· − ḡ_·j + ḡ`, the part of `g` that is not a row or column sum.
fn double_centre(g: &[f64], k: usize) -> Vec<f64> {
    let kf = k as f64;
    let row: Vec<f64> = (0..k).map(|i| (0..k).map(|j| g[i * k + j]).sum::<f64>() / kf).collect();
    let col: Vec<f64> = (0..k).map(|j| (0..k).map(|i| g[i * k + j]).sum::<f64>() / kf).collect();
    let all = row.iter().sum::<f64>() / kf;
    (0..k * k).map(|c| g[c] - row[c / k] - col[c % k] + all).collect()
}

fn expectation(g: &[f64], q: &[f64]) -> f64 {
    g.iter().zip(q).map(|(a, b)| a * b).sum()
}

/// Scale `kernel` to the required marginals, or just normalise it.
fn ipf(kernel: &[f64], k: usize, marginal: Option<&[f64]>) -> Result<Vec<f64>> {
    let (q, err) = ipf_fit(kernel, k, marginal, IPF_MAX_ITERATIONS)?;
    if err < MARGINAL_TOLERANCE {
        return Ok(q);
    }
    if let Some(mu) = marginal {
        if let Some((q, err)) = newton_fit(kernel, k, mu) {
            if err < MARGINAL_TOLERANCE {
                return Ok(q);
            }
        }
    }
    Err(Error::NonConvergence {
        message: "iterative proportional fitting did not reach the marginals".into(),
        residuals: vec![err],
    })
}

/// Marginal fit by damped Newton steps on the log scalings `q_ij = K_ij
/// e^{u_i + v_j}`, minimising the convex `Σ q − Σ μ_i (u_i + v_i)`. Used when
/// IPF stalls because mass must pass through nearly empty cells.
fn newton_fit(kernel: &[f64], k: usize, mu: &[f64]) -> Option<(Vec<f64>, f64)> {
    let total: f64 = kernel.iter().sum();
    let kern: Vec<f64> = kernel.iter().map(|x| x / total).collect();
    let rows: Vec<usize> = (0..k).filter(|&i| mu[i] > 0.0).collect();
    // The last active column is pinned to remove the common shift.
    let cols: Vec<usize> = rows[..rows.len().saturating_sub(1)].to_vec();
    let dim = rows.len() + cols.len();
    let fit = |x: &[f64]| -> Vec<f64> {
        let mut q = vec![0.0; k * k];
        for (a, &i) in rows.iter().enumerate() {
            for &j in &rows {
                let v = cols.iter().position(|&c| c == j).map_or(0.0, |b| x[rows.len() + b]);
                q[i * k + j] = kern[i * k + j] * (x[a] + v).exp();
            }
        }
        q
    };
    let objective = |x: &[f64], q: &[f64]| -> f64 {
        let linear: f64 = rows.iter().enumerate().map(|(a, &i)| mu[i] * x[a]).sum::<f64>()
            + cols.iter().enumerate().map(|(b, &j)| mu[j] * x[rows.len() + b]).sum::<f64>();
        q.iter().sum::<f64>() - linear
    };
    let mut x: Vec<f64> = rows
        .iter()
        .map(|&i| {
            let r: f64 = (0..k).map(|j| kern[i * k + j]).sum();
            if r > 0.0 { (mu[i] / r).ln() } else { 0.0 }
        })
        .chain(std::iter::repeat_n(0.0, cols.len()))
        .collect();
    let mut q = fit(&x);
    for _ in 0..500 {
        if marginal_error(&q, k, mu) < 1e-14 {
            break;
        }
        let row = |i: usize| -> f64 { (0..k).map(|j| q[i * k + j]).sum() };
        let col = |j: usize| -> f64 { (0..k).map(|i| q[i * k + j]).sum() };
        let mut grad: Vec<f64> = rows.iter().map(|&i| row(i) - mu[i]).collect();
        grad.extend(cols.iter().map(|&j| col(j) - mu[j]));
        let mut hess = vec![vec![0.0; dim]; dim];
        for (a, &i) in rows.iter().enumerate() {
            hess[a][a] = row(i);
            for (b, &j) in cols.iter().enumerate() {
                hess[a][rows.len() + b] = q[i * k + j];
                hess[rows.len() + b][a] = q[i * k + j];
            }
        }
        for (b, &j) in cols.iter().enumerate() {
            hess[rows.len() + b][rows.len() + b] = col(j);
        }
        let ridge = 1e-14 * hess.iter().enumerate().map(|(d, r)| r[d]).fold(0.0, f64::max);
        (0..dim).for_each(|d| hess[d][d] += ridge);
        let step = solve_linear(hess, grad.clone())?;
        let slope: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
        let f0 = objective(&x, &q);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let qt = fit(&trial);
            let ft = objective(&trial, &qt);
            if ft.is_finite() && ft <= f0 + 1e-4 * t * slope + 1e-15 * f0.abs() {
                x = trial;
                q = qt;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Some((q.clone(), marginal_error(&q, k, mu)));
            }
        }
    }
    let err = marginal_error(&q, k, mu);
    Some((q, err))
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c] == 0.0 || !a[p][c].is_finite() {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Best IPF fit within the iteration cap, with its marginal L1 error.
/// Kernels concentrating near the boundary of the transport polytope fit
/// only sublinearly; callers that need just the sign of an observable gap
/// can use the approximate fit.
fn ipf_fit(
    kernel: &[f64],
    k: usize,
    marginal: Option<&[f64]>,
    max_iterations: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut q = kernel.to_vec();
    let total: f64 = q.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::NonConvergence {
            message: "tilted reference has no usable mass".into(),
            residuals: vec![total],
        });
    }
    q.iter_mut().for_each(|x| *x /= total);
    let Some(mu) = marginal else { return Ok((q, 0.0)) };
    let mut err = f64::INFINITY;
    for _ in 0..max_iterations {
        for i in 0..k {
            let row: f64 = (0..k).map(|j| q[i * k + j]).sum();
            let scale = if row > 0.0 { mu[i] / row } else { 0.0 };
            (0..k).for_each(|j| q[i * k + j] *= scale);
        }
        for j in 0..k {
            let col: f64 = (0..k).map(|i| q[i * k + j]).sum();
            let scale = if col > 0.0 { mu[j] / col } else { 0.0 };
            (0..k).for_each(|i| q[i * k + j] *= scale);
        }
        err = marginal_error(&q, k, mu);
        if err < 1e-14 {
            break;
        }
    }
    Ok((q, err))
}

/// `argmin H(· | reference)` over the constraint set.
///
/// Marginal and observable constraints are handled by an exponential tilt
/// `reference · exp(Σ λ_m g_m)` fitted to the marginals by iterative
/// proportional fitting; each `λ_m` is found by bisection and the
/// multipliers are swept by coordinate ascent on the dual. When the tilted
/// optimum lies outside a ball constraint the search switches to
/// Frank-Wolfe over the polytope lifted by a transport plan to the center.
pub fn entropy_project(
    reference: &PairMeasure,
    constraints: &ConstraintSet,
) -> Result<EntropyProjection> {
    let k = reference.side();
    if let Some(m) = &constraints.marginal {
        same_alphabet(reference, m)?;
    }
    for o in &constraints.observables {
        if o.g.len() != k * k || o.g.iter().any(|x| !x.is_finite()) || !o.target.is_finite() {
            return domain("observables must be finite on every cell");
        }
    }
    let ground = match &constraints.ball {
        Some(b) => {
            same_alphabet(reference, &b.center)?;
            if !(b.radius > 0.0) {
                return domain("ball radius must be positive");
            }
            Some(b.ground.matrix(reference.alphabet()))
        }
        None => None,
    };
    let problem = Problem2 {
        k,
        reference,
        support: (0..k * k).filter(|&c| reference.weights()[c] > 0.0).collect(),
        marginal: constraints.marginal.as_ref().map(|m| m.weights().to_vec()),
        observables: &constraints.observables,
    };
    let ball = constraints
        .ball
        .as_ref()
        .zip(ground.as_ref())
        .map(|(b, g)| (b, g.as_slice()));

    // Feasibility pre-pass: the polytope without the ball, then the
    // nearest polytope point to the ball center.
    problem.lp(None, None)?;
    let nearest = match ball {
        Some((b, g)) => {
            let x = problem.lp(None, Some((b.center.weights(), g, b.radius)))?;
            let d = wasserstein_pairs(&problem.measure(&x)?, &b.center, b.ground)?.0;
            if d > b.radius + LP_TOLERANCE {
                return Err(Error::Infeasible(format!(
                    "nearest feasible measure is at distance {d} from the ball center, radius {}",
                    b.radius
                )));
            }
            Some(x)
        }
        None => None,
    };

    let mut tilted = tilt_project(&problem)?;
    let (Some((b, g)), Some(inside)) = (ball, nearest) else { return Ok(tilted) };
    let d = wasserstein_pairs(&tilted.minimizer, &b.center, b.ground)?.0;
    if d <= b.radius + LP_TOLERANCE {
        tilted.residuals.ball_excess = Some(d - b.radius);
        return Ok(tilted);
    }
    let outside = tilted.minimizer.weights().to_vec();
    frank_wolfe(&problem, b, g, &inside, &outside, tilted.dual_history)
}

fn tilt_project(p: &Problem2) -> Result<EntropyProjection> {
    let k = p.k;
    let refw = p.ref_weights();
    let mu = p.marginal.as_deref();
    let m = p.observables.len();
    // Row and column parts of an observable are constant on the marginal
    // polytope and IPF absorbs them, so only the interaction part enters
    // the exponent. This keeps large multipliers from underflowing cells.
    let tilts: Vec<Vec<f64>> = p
        .observables
        .iter()
        .map(|o| if mu.is_some() { double_centre(&o.g, k) } else { o.g.clone() })
        .collect();
    // Exponents are shifted by their maximum; IPF normalises anyway.
    let kernel = |lams: &[f64]| -> Vec<f64> {
        let exponent = |c: usize| -> f64 { tilts.iter().zip(lams).map(|(g, l)| l * g[c]).sum() };
        let shift = p.support.iter().map(|&c| exponent(c)).fold(f64::NEG_INFINITY, f64::max);
        (0..k * k)
            .map(|c| if refw[c] > 0.0 { refw[c] * (exponent(c) - shift).exp() } else { 0.0 })
            .collect()
    };
    let dual = |q: &[f64], lams: &[f64]| -> f64 {
        kl_weights(q, refw)
            - p.observables
                .iter()
                .zip(lams)
                .map(|(o, l)| l * (expectation(&o.g, q) - o.target))
                .sum::<f64>()
    };
    let mut lambdas = vec![0.0; m];
    let mut q = ipf(&kernel(&lambdas), k, mu)?;
    let mut history = vec![dual(&q, &lambdas)];
    let mut sweeps = 0;
    while m > 0 {
        let gaps = p.gaps(&q);
        if gaps.iter().all(|g| g.abs() < 1e-12) {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            if gaps.iter().all(|g| g.abs() < OBSERVABLE_TOLERANCE) {
                break;
            }
            return Err(Error::NonConvergence {
                message: format!("dual coordinate ascent stopped after {MAX_SWEEPS} sweeps"),
                residuals: gaps,
            });
        }
        sweeps += 1;
        for idx in 0..m {
            let (lam, qn) = solve_coordinate(p, &kernel, &lambdas, idx)?;
            lambdas[idx] = lam;
            q = qn;
            history.push(dual(&q, &lambdas));
        }
    }
    let residuals = Residuals {
        marginal_l1: p.marginal_l1(&q),
        observable_gaps: p.gaps(&q),
        ball_excess: None,
    };
    if residuals.marginal_l1 >= MARGINAL_TOLERANCE
        || residuals.observable_gaps.iter().any(|g| g.abs() >= OBSERVABLE_TOLERANCE)
    {
        let mut r = vec![residuals.marginal_l1];
        r.extend(&residuals.observable_gaps);
        return Err(Error::NonConvergence {
            message: "entropy projection missed its tolerances".into(),
            residuals: r,
        });
    }
    Ok(EntropyProjection {
        minimizer: p.measure(&q)?,
        value: kl_weights(&q, refw),
        residuals,
        dual_history: history,
        lambdas,
        certified: true,
        duality_gap: None,
    })
}

/// Multiplier `idx` making observable `idx` exact with the others fixed.
/// The fitted expectation is nondecreasing in its own multiplier.
fn solve_coordinate(
    p: &Problem2,
    kernel: &dyn Fn(&[f64]) -> Vec<f64>,
    lambdas: &[f64],
    idx: usize,
) -> Result<(f64, Vec<f64>)> {
    let obs = &p.observables[idx];
    let mut lams = lambdas.to_vec();
    let mut eval = |lam: f64| -> Result<(f64, Vec<f64>)> {
        lams[idx] = lam;
        let kern = kernel(&lams);
        let (mut q, err) = ipf_fit(&kern, p.k, p.marginal.as_deref(), SEARCH_IPF_ITERATIONS)?;
        if err >= MARGINAL_TOLERANCE {
            // A poorly fitted trial can report the wrong sign.
            q = ipf(&kern, p.k, p.marginal.as_deref())?;
        }
        Ok((expectation(&obs.g, &q) - obs.target, q))
    };
    let start = lambdas[idx];
    let (g0, q0) = eval(start)?;
    if g0 == 0.0 {
        return Ok((start, q0));
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut near = start;
    let mut step = 1.0;
    let far = loop {
        let cand = start + dir * step;
        if cand.abs() > LAMBDA_LIMIT {
            return Err(Error::NonConvergence {
                message: "observable target lies on the boundary of its feasible range".into(),
                residuals: vec![g0],
            });
        }
        let (g, _) = eval(cand)?;
        if g == 0.0 || g.signum() != g0.signum() {
            break cand;
        }
        near = cand;
        step *= 2.0;
    };
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    let mut best = (start, f64::INFINITY, q0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (g, q) = eval(mid)?;
        if g.abs() < best.1 {
            best = (mid, g.abs(), q);
        }
        if g.abs() < 1e-15 {
            break;
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut chosen = lambdas.to_vec();
    chosen[idx] = best.0;
    let q = ipf(&kernel(&chosen), p.k, p.marginal.as_deref())?;
    Ok((best.0, q))
}

const FW_MAX_ITERATIONS: usize = 2_000;

fn frank_wolfe(
    p: &Problem2,
    b: &BallConstraint,
    ground: &[Vec<f64>],
    inside: &[f64],
    outside: &[f64],
    dual_history: Vec<f64>,
) -> Result<EntropyProjection> {
    let refw = p.ref_weights();
    let args = (b.center.weights(), ground, b.radius);
    let dist = |x: &[f64]| -> Result<f64> {
        Ok(wasserstein_pairs(&p.measure(x)?, &b.center, b.ground)?.0)
    };
    let mix = |x: &[f64], y: &[f64], t: f64| -> Vec<f64> {
        x.iter().zip(y).map(|(a, c)| (1.0 - t) * a + t * c).collect()
    };
    // The ball is convex, so its trace on the segment is an interval.
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dist(&mix(inside, outside, mid))? <= b.radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = mix(inside, outside, lo);
    let mut gap = f64::INFINITY;
    for _ in 0..FW_MAX_ITERATIONS {
        let grad: Vec<f64> = (0..x.len())
            .map(|c| if refw[c] > 0.0 { (x[c].max(1e-300) / refw[c]).ln() + 1.0 } else { 0.0 })
            .collect();
        let s = p.lp(Some(&grad), Some(args))?;
        gap = grad.iter().zip(x.iter().zip(&s)).map(|(g, (a, c))| g * (a - c)).sum();
        if gap < ENTROPY_TOLERANCE * 1e-2 {
            break;
        }
        let h = |t: f64| kl_weights(&mix(&x, &s, t), refw);
        let t = golden_min(h, 0.0, 1.0);
        x = mix(&x, &s, t);
    }
    let value = kl_weights(&x, refw);
    let minimizer = p.measure(&x)?;
    let excess = wasserstein_pairs(&minimizer, &b.center, b.ground)?.0 - b.radius;
    Ok(EntropyProjection {
        residuals: Residuals {
            marginal_l1: p.marginal_l1(&x),
            observable_gaps: p.gaps(&x),
            ball_excess: Some(excess),
        },
        minimizer,
        value,
        dual_history,
        lambdas: Vec::new(),
        certified: false,
        duality_gap: Some(gap.max(0.0)),
    })
}

/// Minimiser of a unimodal function on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // Endpoints win when the minimum sits on the boundary.
    [0.0f64, 1.0, mid]
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(mid)
}

#[derive(Debug, Clone, Serialize)]
pub struct BallInfimum {
    pub value: f64,
    #[serde(serialize_with = "ser_opt_pair")]
    pub minimizer: Option<PairMeasure>,
    /// False when no measure with marginals `μ` lies in the ball.
    pub feasible: bool,
    /// True when the value is exact: always on two-point alphabets, and
    /// whenever `μ ⊗ μ` itself is in the ball.
    pub certified: bool,
    pub duality_gap: Option<f64>,
}

fn ser_opt_pair<S: serde::Serializer>(
    m: &Option<PairMeasure>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::Error as _;
    match m {
        Some(m) => s.serialize_some(&m.to_doc().map_err(S::Error::custom)?),
        None => s.serialize_none(),
    }
}

/// `inf { rate_i(ν, μ) : β_{W,d̃₂,₊}(ν, center) ≤ radius }` over the closed ball.
pub fn ball_infimum(mu: &DiscreteMeasure, center: &PairMeasure, radius: f64) -> Result<BallInfimum> {
    if !(radius > 0.0) {
        return domain("ball radius must be positive");
    }
    same_alphabet(center, mu)?;
    let ground = PairGround::TILDE_SUM;
    let reference = product(mu, mu)?;
    if wasserstein_pairs(&reference, center, ground)?.0 <= radius + LP_TOLERANCE {
        return Ok(BallInfimum {
            value: 0.0,
            minimizer: Some(reference),
            feasible: true,
            certified: true,
            duality_gap: None,
        });
    }
    if mu.len() == 2 {
        return two_point_ball(mu, center, radius);
    }
    let constraints = ConstraintSet {
        marginal: Some(mu.clone()),
        observables: Vec::new(),
        ball: Some(BallConstraint {
            center: center.clone(),
            radius,
            ground,
        }),
    };
    match entropy_project(&reference, &constraints) {
        Ok(p) => Ok(BallInfimum {
            value: p.value,
            minimizer: Some(p.minimizer),
            feasible: true,
            certified: false,
            duality_gap: p.duality_gap,
        }),
        Err(Error::Infeasible(_)) => Ok(BallInfimum {
            value: f64::INFINITY,
            minimizer: None,
            feasible: false,
            certified: false,
            duality_gap: None,
        }),
        Err(e) => Err(e),
    }
}

/// Measures on two points with both marginals `(p, 1 − p)`:
/// `[[s, p − s], [p − s, 1 − 2p + s]]` for `s ∈ [max(0, 2p − 1), p]`.
pub fn two_point_family(mu: &DiscreteMeasure, s: f64) -> Result<PairMeasure> {
    let p = mu.weight(0);
    let w = vec![s, p - s, p - s, 1.0 - 2.0 * p + s];
    if w.iter().any(|x| *x < -1e-15) {
        return domain(format!("s = {s} is outside the two-point family"));
    }
    let w: Vec<f64> = w.into_iter().map(|x| x.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    PairMeasure::new(mu.alphabet().clone(), w.into_iter().map(|x| x / total).collect())
}

pub fn two_point_range(mu: &DiscreteMeasure) -> (f64, f64) {
    let p = mu.weight(0);
    ((2.0 * p - 1.0).max(0.0), p)
}

fn two_point_ball(mu: &DiscreteMeasure, center: &PairMeasure, radius: f64) -> Result<BallInfimum> {
    let ground = PairGround::TILDE_SUM;
    let (lo, hi) = two_point_range(mu);
    let dist = |s: f64| -> Result<f64> {
        Ok(wasserstein_pairs(&two_point_family(mu, s)?, center, ground)?.0)
    };
    // Distance to the center is convex along the family.
    let (mut a, mut b) = (lo, hi);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if dist(m1)? <= dist(m2)? {
            b = m2;
        } else {
            a = m1;
        }
    }
    let s_in = 0.5 * (a + b);
    if dist(s_in)? > radius + LP_TOLERANCE {
        return Ok(BallInfimum {
            value: f64::INFINITY,
            minimizer: None,
            feasible: false,
            certified: true,
            duality_gap: None,
        });
    }
    // The entropy is convex with its minimum at s = p², outside the ball;
    // the infimum sits on the ball boundary between s_in and p².
    let s_star = mu.weight(0).powi(2);
    let (mut inside, mut outside) = (s_in, s_star);
    for _ in 0..100 {
        let mid = 0.5 * (inside + outside);
        if dist(mid)? <= radius {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    let nu = two_point_family(mu, inside)?;
    Ok(BallInfimum {
        value: rate_i(&nu, mu)?,
        minimizer: Some(nu),
        feasible: true,
        certified: true,
        duality_gap: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Alphabet;
    use std::sync::Arc;

    fn ab() -> Arc<Alphabet> {
        Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap())
    }

    fn closed_form(t: f64) -> f64 {
        let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
        std::f64::consts::LN_2 + xlogx(t) + xlogx(1.0 - t)
    }

    fn tilted(t: f64) -> PairMeasure {
        PairMeasure::new(ab(), vec![t / 2.0, (1.0 - t) / 2.0, (1.0 - t) / 2.0, t / 2.0]).unwrap()
    }

    #[test]
    fn rate_i_cases() {
        let mu = DiscreteMeasure::uniform(ab());
        let pp = product(&mu, &mu).unwrap();
        assert_eq!(rate_i(&pp, &mu).unwrap(), 0.0);
        let other = DiscreteMeasure::new(ab(), vec![0.3, 0.7]).unwrap();
        let off = product(&other, &other).unwrap();
        assert_eq!(rate_i(&off, &mu).unwrap(), f64::INFINITY);
        for t in [0.1, 0.5, 0.9, 1.0] {
            assert!((rate_i(&tilted(t), &mu).unwrap() - closed_form(t)).abs() < 1e-12);
        }
        assert!(rate_i(&tilted(0.5), &mu).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rate_j_cases() {
        let m = DiscreteMeasure::new(ab(), vec![0.3, 0.7]).unwrap();
        let s = RateOracle::Sanov(m.clone());
        assert!(rate_j(&product(&m, &m).unwrap(), &s).unwrap().abs() < 1e-15);
        let skew = PairMeasure::new(ab(), vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        assert_eq!(rate_j(&skew, &s).unwrap(), f64::INFINITY);
        let mu = DiscreteMeasure::uniform(ab());
        let ind = RateOracle::Indicator(mu.clone());
        for t in [0.2, 0.5, 0.7] {
            assert_eq!(rate_j(&tilted(t), &ind).unwrap(), rate_i(&tilted(t), &mu).unwrap());
        }
    }

    #[test]
    fn project_without_constraints() {
        let r = tilted(0.3);
        let p = entropy_project(&r, &ConstraintSet::default()).unwrap();
        assert!(p.value.abs() < 1e-15);
        assert!(p.minimizer.approx_eq(&r, 1e-15));
    }

    #[test]
    fn diagonal_family_closed_form() {
        let mu = DiscreteMeasure::uniform(ab());
        let reference = product(&mu, &mu).unwrap();
        for t in [0.05, 0.3, 0.5, 0.9, 0.99] {
            let c = ConstraintSet {
                marginal: Some(mu.clone()),
                observables: vec![Observable {
                    g: vec![1.0, 0.0, 0.0, 1.0],
                    target: t,
                }],
                ball: None,
            };
            let p = entropy_project(&reference, &c).unwrap();
            assert!((p.value - closed_form(t)).abs() < 1e-8, "t = {t}");
            assert!(p.minimizer.approx_eq(&tilted(t), 1e-8));
            assert!(p.residuals.marginal_l1 < 1e-10);
            for w in p.dual_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }

    #[test]
    fn stalled_ipf_falls_back_to_newton() {
        let kernel = [
            1.86e-4, 2.39e-15, 8.98e-17, 4.33e-16, 6.03e-8, 2.0e-8, 4.94e-16, 3.63e-9, 2.57e-6,
        ];
        let mu = [0.013638069374335812, 0.32176559670977906, 0.6645963339158851];
        let (_, err) = ipf_fit(&kernel, 3, Some(&mu), IPF_MAX_ITERATIONS).unwrap();
        assert!(err >= MARGINAL_TOLERANCE);
        let q = ipf(&kernel, 3, Some(&mu)).unwrap();
        assert!(marginal_error(&q, 3, &mu) < MARGINAL_TOLERANCE);
        // Still a diagonal rescaling of the kernel.
        let cross = |m: &[f64]| m[0] * m[4] / (m[1] * m[3]);
        assert!((cross(&q) / cross(&kernel) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn satisfied_constraint_costs_nothing() {
        let mu = DiscreteMeasure::uniform(ab());
        let reference = product(&mu, &mu).unwrap();
        let c = ConstraintSet {
            marginal: Some(mu),
            observables: vec![Observable {
                g: vec![1.0, 0.0, 0.0, 1.0],
                target: 0.5,
            }],
            ball: None,
        };
        assert!(entropy_project(&reference, &c).unwrap().value.abs() < 1e-14);
    }

    #[test]
    fn infeasible_constraints_reported() {
        let mu = DiscreteMeasure::uniform(ab());
        let reference = product(&mu, &mu).unwrap();
        let c = ConstraintSet {
            marginal: Some(mu),
            observables: vec![Observable {
                g: vec![1.0, 0.0, 0.0, 0.0],
                target: 0.8,
            }],
            ball: None,
        };
        assert!(matches!(entropy_project(&reference, &c), Err(Error::Infeasible(_))));
    }

    #[test]
    fn ball_trivial_cases() {
        let mu = DiscreteMeasure::uniform(ab());
        let pp = product(&mu, &mu).unwrap();
        assert_eq!(ball_infimum(&mu, &pp, 0.01).unwrap().value, 0.0);
        assert_eq!(ball_infimum(&mu, &tilted(0.9), 5.0).unwrap().value, 0.0);
        assert!(ball_infimum(&mu, &pp, 0.0).is_err());
    }

    #[test]
    fn ball_two_point_example() {
        let mu = DiscreteMeasure::uniform(ab());
        let r = ball_infimum(&mu, &tilted(0.9), 0.05).unwrap();
        assert!(r.certified && r.feasible);
        assert!((r.value - closed_form(0.8)).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn ball_three_points_frank_wolfe() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0, 2.0]).unwrap());
        let mu = DiscreteMeasure::uniform(a.clone());
        let w = 0.3;
        let mut cells = vec![(1.0 - 3.0 * w) / 6.0; 9];
        for i in 0..3 {
            cells[i * 4] = w;
        }
        let center = PairMeasure::new(a, cells).unwrap();
        let r = ball_infimum(&mu, &center, 0.05).unwrap();
        assert!(r.feasible && !r.certified);
        let nu = r.minimizer.unwrap();
        assert!(r.value > 0.0 && r.value < rate_i(&center, &mu).unwrap());
        assert!(r.value <= rate_i(&nu, &mu).unwrap() + 1e-9);
        assert!(r.duality_gap.unwrap() < 1e-3);
        let d = wasserstein_pairs(&nu, &center, PairGround::TILDE_SUM).unwrap().0;
        assert!(d <= 0.05 + 1e-7);
    }
}
