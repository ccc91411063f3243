//! Symmetrised ensembles of Brownian bridges: paths pinned at `x_i` and
//! `x_{σ(i)}` for a uniform permutation `σ`, their cumulant functionals for
//! cylinder test functions, and the computable parts of the path-level rate.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{Alphabet, DiscreteMeasure, Measure, PairAtoms, PairMeasure};
use crate::permutation::Permutation;
use crate::quadrature::adaptive_gaussian_expectation;
use crate::rate::{rate_j, RateOracle};
use crate::rng::RngHandle;
use crate::sampler::{sample_permutation, FirstLayerSampler};

/// Successive quadrature refinements must agree to this (relative to 1).
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;
/// Clip level of the shipped quadratic functional.
pub const QUADRATIC_BOUND: f64 = 50.0;
/// Cap on tensor-grid evaluations per cylinder expectation.
pub const QUADRATURE_MAX_EVALUATIONS: usize = 20_000_000;

const TIME_TOLERANCE: f64 = 1e-12;

/// `0 = t₀ < t₁ < … < t_M = β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return domain("a time grid starts at 0 and has at least two points");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || !times.iter().all(|t| t.is_finite()) {
            return domain("grid times must be finite and strictly increasing");
        }
        Ok(TimeGrid { times })
    }

    /// `M + 1` equally spaced points on `[0, β]`.
    pub fn uniform(beta: f64, m: usize) -> Result<Self> {
        if !(beta > 0.0) || m == 0 {
            return domain("uniform grid needs β > 0 and M ≥ 1");
        }
        let mut times: Vec<f64> = (0..=m).map(|i| beta * i as f64 / m as f64).collect();
        times[m] = beta;
        Self::new(times)
    }

    pub fn beta(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= TIME_TOLERANCE * self.beta().max(1.0))
            .ok_or_else(|| Error::Domain(format!("time {t} is not a grid point")))
    }
}

/// Brownian motion in `ℝ^dim` with variance `scale` per unit time, run to
/// the horizon `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Diffusion {
    pub dim: usize,
    pub scale: f64,
    pub beta: f64,
}

impl Diffusion {
    pub fn new(dim: usize, scale: f64, beta: f64) -> Result<Self> {
        if dim == 0 || !(scale > 0.0) || !(beta > 0.0) {
            return domain("diffusion needs dim ≥ 1, scale > 0 and β > 0");
        }
        Ok(Diffusion { dim, scale, beta })
    }

    pub fn bridge(&self, x: &[f64], y: &[f64]) -> Result<BridgeSpec> {
        BridgeSpec::new(*self, x.to_vec(), y.to_vec())
    }
}

/// The diffusion conditioned on `ξ₀ = x`, `ξ_β = y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeSpec {
    pub diffusion: Diffusion,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BridgeSpec {
    pub fn new(diffusion: Diffusion, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != diffusion.dim || y.len() != diffusion.dim {
            return domain("bridge endpoints must have the diffusion's dimension");
        }
        Ok(BridgeSpec { diffusion, x, y })
    }

    fn beta(&self) -> f64 {
        self.diffusion.beta
    }
}

/// Mean vector and per-coordinate variance of `ξ_s` under the bridge.
pub fn bridge_marginal(spec: &BridgeSpec, s: f64) -> Result<(Vec<f64>, f64)> {
    let beta = spec.beta();
    if !(0.0..=beta).contains(&s) {
        return domain(format!("time {s} outside [0, {beta}]"));
    }
    let mean = spec
        .x
        .iter()
        .zip(&spec.y)
        .map(|(x, y)| x + (s / beta) * (y - x))
        .collect();
    Ok((mean, spec.diffusion.scale * s * (beta - s) / beta))
}

/// `Cov(ξ_s, ξ_t) = scale · (min(s,t) − s t / β)` per coordinate.
pub fn bridge_covariance(spec: &BridgeSpec, s: f64, t: f64) -> f64 {
    let beta = spec.beta();
    spec.diffusion.scale * (s.min(t) - s * t / beta)
}

/// A bounded function of the path at finitely many times.
#[derive(Clone)]
pub enum PhiKind {
    Zero,
    Constant(f64),
    /// `max(−a |ξ_t|², −QUADRATIC_BOUND)` at the single cylinder time.
    Quadratic(f64),
    /// `clamp(⟨c, ξ_t⟩, −bound, bound)` at the single cylinder time.
    Linear(Vec<f64>),
    /// Arbitrary evaluable map of the path values at the cylinder times.
    Custom(Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for PhiKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhiKind::Zero => write!(f, "Zero"),
            PhiKind::Constant(c) => write!(f, "Constant({c})"),
            PhiKind::Quadratic(a) => write!(f, "Quadratic({a})"),
            PhiKind::Linear(c) => write!(f, "Linear({c:?})"),
            PhiKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Cylinder functional `φ(ξ) = F(ξ_{t₁}, …, ξ_{t_r})` with `‖φ‖_∞ ≤ bound`.
#[derive(Debug, Clone)]
pub struct CylinderFunctional {
    times: Vec<f64>,
    bound: f64,
    kind: PhiKind,
}

impl CylinderFunctional {
    pub fn zero() -> Self {
        CylinderFunctional {
            times: Vec::new(),
            bound: 0.0,
            kind: PhiKind::Zero,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return domain("constant functional must be finite");
        }
        Ok(CylinderFunctional {
            times: Vec::new(),
            bound: c.abs(),
            kind: PhiKind::Constant(c),
        })
    }

    /// `−a |ξ_t|²`, clipped at `−QUADRATIC_BOUND` to make it bounded.
    pub fn quadratic(a: f64, t: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() {
            return domain("quadratic coefficient must be nonnegative");
        }
        Ok(CylinderFunctional {
            times: vec![t],
            bound: QUADRATIC_BOUND,
            kind: PhiKind::Quadratic(a),
        })
    }

    pub fn linear(c: Vec<f64>, t: f64, bound: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() || c.iter().any(|x| !x.is_finite()) {
            return domain("linear functional needs finite coefficients and bound");
        }
        Ok(CylinderFunctional {
            times: vec![t],
            bound,
            kind: PhiKind::Linear(c),
        })
    }

    pub fn custom(
        times: Vec<f64>,
        bound: f64,
        f: Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return domain("declared bound must be finite");
        }
        Ok(CylinderFunctional {
            times,
            bound,
            kind: PhiKind::Custom(f),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    /// Value at the path values `values[r] = ξ_{t_r}`; fails if the
    /// declared bound is exceeded.
    pub fn eval(&self, values: &[&[f64]]) -> Result<f64> {
        if values.len() != self.times.len() {
            return domain("one path value per cylinder time is required");
        }
        let v = match &self.kind {
            PhiKind::Zero => 0.0,
            PhiKind::Constant(c) => *c,
            PhiKind::Quadratic(a) => {
                let sq: f64 = values[0].iter().map(|x| x * x).sum();
                (-a * sq).max(-QUADRATIC_BOUND)
            }
            PhiKind::Linear(c) => {
                if c.len() != values[0].len() {
                    return domain("linear functional has the wrong dimension");
                }
                let dot: f64 = c.iter().zip(values[0]).map(|(a, b)| a * b).sum();
                dot.clamp(-self.bound, self.bound)
            }
            PhiKind::Custom(f) => f(values),
        };
        if !v.is_finite() || v.abs() > self.bound * (1.0 + 1e-12) {
            return domain(format!("functional value {v} exceeds its declared bound {}", self.bound));
        }
        Ok(v)
    }

    fn is_trivial(&self) -> Option<f64> {
        match self.kind {
            PhiKind::Zero => Some(0.0),
            PhiKind::Constant(c) => Some(c),
            _ => None,
        }
    }
}

/// `𝔼_{x,y}[e^{φ(ξ)}]`, or `𝔼_{x,y}[φ(ξ)]`, by tensor Gauss-Hermite over the joint Gaussian law
/// of the bridge at the cylinder times.
fn cylinder_mean(spec: &BridgeSpec, phi: &CylinderFunctional, exponential: bool) -> Result<f64> {
    let h = |v: f64| if exponential { v.exp() } else { v };
    if let Some(c) = phi.is_trivial() {
        return Ok(h(c));
    }
    if let PhiKind::Linear(c) = &phi.kind {
        return linear_mean(spec, phi.times[0], c, phi.bound, exponential);
    }
    if phi.times.len() > 3 {
        return domain("cylinder quadrature supports at most three times");
    }
    let d = spec.diffusion.dim;
    let r = phi.times.len();
    // Variables ordered (time, coordinate); coordinates are independent.
    let mut mean = Vec::with_capacity(r * d);
    for &t in &phi.times {
        mean.extend(bridge_marginal(spec, t)?.0);
    }
    let mut cov = vec![vec![0.0; r * d]; r * d];
    for (a, &s) in phi.times.iter().enumerate() {
        for (b, &t) in phi.times.iter().enumerate() {
            let c = bridge_covariance(spec, s, t);
            for k in 0..d {
                cov[a * d + k][b * d + k] = c;
            }
        }
    }
    let failure = std::cell::Cell::new(None::<String>);
    let f = |z: &[f64]| -> f64 {
        let values: Vec<&[f64]> = z.chunks(d).collect();
        match phi.eval(&values) {
            Ok(v) => h(v),
            Err(e) => {
                failure.set(Some(e.to_string()));
                0.0
            }
        }
    };
    let value = adaptive_gaussian_expectation(
        &mean,
        &cov,
        &f,
        QUADRATURE_TOLERANCE,
        QUADRATURE_MAX_EVALUATIONS,
    );
    if let Some(msg) = failure.take() {
        return Err(Error::Domain(msg));
    }
    value
}

/// Closed forms for `Y = clamp(⟨c, ξ_t⟩, −B, B)` with `⟨c, ξ_t⟩` Gaussian:
/// `𝔼 e^Y` when `exponential`, else `𝔼 Y`. Quadrature converges slowly
/// across the clamp kinks, so this case is handled analytically.
fn linear_mean(spec: &BridgeSpec, t: f64, c: &[f64], bound: f64, exponential: bool) -> Result<f64> {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    if c.len() != spec.diffusion.dim {
        return domain("linear functional has the wrong dimension");
    }
    let (mean, var) = bridge_marginal(spec, t)?;
    let m: f64 = c.iter().zip(&mean).map(|(a, b)| a * b).sum();
    let s2 = var * c.iter().map(|a| a * a).sum::<f64>();
    if s2 <= 0.0 {
        let y = m.clamp(-bound, bound);
        return Ok(if exponential { y.exp() } else { y });
    }
    let s = s2.sqrt();
    let z = Normal::standard();
    let (lo, hi) = ((-bound - m) / s, (bound - m) / s);
    let (p_lo, p_hi) = (z.cdf(lo), z.sf(hi));
    let inside = if exponential {
        (m + s2 / 2.0).exp() * (z.cdf(hi - s) - z.cdf(lo - s))
    } else {
        m * (z.cdf(hi) - z.cdf(lo)) + s * (z.pdf(lo) - z.pdf(hi))
    };
    Ok(if exponential {
        inside + bound.exp() * p_hi + (-bound).exp() * p_lo
    } else {
        inside + bound * (p_hi - p_lo)
    })
}

/// `𝔼^ξ_{x,y} e^{φ(ξ)}`.
pub fn cylinder_expectation(spec: &BridgeSpec, phi: &CylinderFunctional) -> Result<f64> {
    cylinder_mean(spec, phi, true)
}

/// `𝔼^ξ_{x,y} φ(ξ)`.
pub fn cylinder_value(spec: &BridgeSpec, phi: &CylinderFunctional) -> Result<f64> {
    cylinder_mean(spec, phi, false)
}

/// Path values at every grid time, pinned at both ends.
pub fn sample_bridge_path(
    spec: &BridgeSpec,
    grid: &TimeGrid,
    rng: &mut RngHandle,
) -> Result<Vec<Vec<f64>>> {
    if (grid.beta() - spec.beta()).abs() > TIME_TOLERANCE * spec.beta().max(1.0) {
        return domain("grid horizon differs from the diffusion horizon");
    }
    let t = grid.times();
    let beta = spec.beta();
    let scale = spec.diffusion.scale;
    let mut path = Vec::with_capacity(t.len());
    path.push(spec.x.clone());
    for k in 1..t.len() {
        if k == t.len() - 1 {
            path.push(spec.y.clone());
            break;
        }
        let prev = &path[k - 1];
        let remaining = beta - t[k - 1];
        let dt = t[k] - t[k - 1];
        let var = scale * dt * (beta - t[k]) / remaining;
        let sd = var.max(0.0).sqrt();
        let next: Vec<f64> = prev
            .iter()
            .zip(&spec.y)
            .map(|(p, y)| {
                let z: f64 = rng.sample(StandardNormal);
                p + (dt / remaining) * (y - p) + sd * z
            })
            .collect();
        path.push(next);
    }
    Ok(path)
}

/// Paths `ξ¹, …, ξⁿ` with `ξⁱ` a bridge from `x_i` to `x_{σ(i)}`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub endpoints: crate::measure::IndexedSample,
    pub permutation: Permutation,
    /// `paths[i][g]` is path `i` at grid time `g`.
    pub paths: Vec<Vec<Vec<f64>>>,
}

impl PathEnsemble {
    pub fn pair_atoms(&self) -> PairAtoms {
        let e = &self.endpoints;
        let atoms = (0..e.len()).map(|i| (e.at(i), e.at(self.permutation.apply(i)))).collect();
        PairAtoms::new(e.alphabet().clone(), atoms).expect("indices in range")
    }

    pub fn pair_measure(&self) -> PairMeasure {
        self.pair_atoms().to_measure()
    }
}

fn coords_of(alphabet: &Alphabet, diffusion: &Diffusion) -> Result<()> {
    if alphabet.dimension() != diffusion.dim {
        return domain(format!(
            "alphabet coordinates have dimension {}, diffusion has {}",
            alphabet.dimension(),
            diffusion.dim
        ));
    }
    Ok(())
}

/// Draw endpoints from `layer1`, then a uniform permutation, then one
/// bridge per pair. Endpoints and permutation consume `rng` exactly as
/// [`crate::sampler::sample_l_two_layer`] does, so both see the same pair
/// measure for the same handle; the paths use child streams keyed by a
/// further draw.
pub fn sample_ensemble(
    layer1: &FirstLayerSampler,
    diffusion: &Diffusion,
    grid: &TimeGrid,
    n: usize,
    rng: &mut RngHandle,
) -> Result<PathEnsemble> {
    let endpoints = layer1.draw(n, rng)?;
    coords_of(endpoints.alphabet(), diffusion)?;
    let permutation = sample_permutation(n, rng)?;
    let key: u64 = rng.random();
    let alphabet = endpoints.alphabet().clone();
    let mut paths = Vec::with_capacity(n);
    for i in 0..n {
        let spec = diffusion.bridge(
            alphabet.coords(endpoints.at(i)),
            alphabet.coords(endpoints.at(permutation.apply(i))),
        )?;
        let mut child = RngHandle::new(key, i as u64);
        paths.push(sample_bridge_path(&spec, grid, &mut child)?);
    }
    Ok(PathEnsemble {
        grid: grid.clone(),
        endpoints,
        permutation,
        paths,
    })
}

/// Cache of `log 𝔼_{x,y} e^{φ}` per alphabet pair.
struct LogMgf<'a> {
    alphabet: &'a Alphabet,
    diffusion: &'a Diffusion,
    phi: &'a CylinderFunctional,
    cache: BTreeMap<(usize, usize), f64>,
}

impl<'a> LogMgf<'a> {
    fn new(alphabet: &'a Alphabet, diffusion: &'a Diffusion, phi: &'a CylinderFunctional) -> Self {
        LogMgf {
            alphabet,
            diffusion,
            phi,
            cache: BTreeMap::new(),
        }
    }

    fn get(&mut self, pair: (usize, usize)) -> Result<f64> {
        if let Some(v) = self.cache.get(&pair) {
            return Ok(*v);
        }
        let spec = self
            .diffusion
            .bridge(self.alphabet.coords(pair.0), self.alphabet.coords(pair.1))?;
        let v = cylinder_expectation(&spec, self.phi)?.ln();
        self.cache.insert(pair, v);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaEstimate {
    /// `(1/n) Σ log 𝔼_{s_i,a_i} e^φ` by quadrature.
    pub exact: f64,
    /// The same quantity from simulated paths.
    pub mc: f64,
    pub std_error: f64,
    /// `|mc − exact| / std_error` (0 when both estimators are exact).
    pub z_score: f64,
}

/// `(1/n) Λₙ(φ)` for fixed endpoint pairs, by quadrature and by Monte
/// Carlo with `draws` simulated paths per pair.
pub fn lambda_n(
    pairs: &PairAtoms,
    diffusion: &Diffusion,
    grid: &TimeGrid,
    phi: &CylinderFunctional,
    draws: usize,
    rng: &mut RngHandle,
) -> Result<LambdaEstimate> {
    let alphabet = pairs.alphabet();
    coords_of(alphabet, diffusion)?;
    let n = pairs.len() as f64;
    let mut mgf = LogMgf::new(alphabet, diffusion, phi);
    let mut exact = 0.0;
    for &p in pairs.atoms() {
        exact += mgf.get(p)?;
    }
    exact /= n;
    if let Some(c) = phi.is_trivial() {
        return Ok(LambdaEstimate {
            exact: c,
            mc: c,
            std_error: 0.0,
            z_score: 0.0,
        });
    }
    if draws < 2 {
        return domain("Monte Carlo needs at least two draws per pair");
    }
    let idx: Vec<usize> = phi.times().iter().map(|&t| grid.index_of(t)).collect::<Result<_>>()?;
    let mut mc = 0.0;
    let mut var = 0.0;
    for (i, &(a, b)) in pairs.atoms().iter().enumerate() {
        let spec = diffusion.bridge(alphabet.coords(a), alphabet.coords(b))?;
        let mut child = rng.split(i as u64);
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..draws {
            let path = sample_bridge_path(&spec, grid, &mut child)?;
            let values: Vec<&[f64]> = idx.iter().map(|&g| path[g].as_slice()).collect();
            let e = phi.eval(&values)?.exp();
            sum += e;
            sumsq += e * e;
        }
        let m = draws as f64;
        let mean = sum / m;
        let sample_var = (sumsq - m * mean * mean).max(0.0) / (m - 1.0);
        mc += mean.ln();
        // Delta method: Var(log mean) ≈ Var(e^φ) / (m · mean²).
        var += sample_var / (m * mean * mean);
    }
    // Advance the caller's handle so repeated calls see fresh paths.
    let _: u64 = rng.random();
    let mc = mc / n;
    let std_error = var.sqrt() / n;
    let z_score = if std_error > 0.0 { (mc - exact).abs() / std_error } else { 0.0 };
    Ok(LambdaEstimate {
        exact,
        mc,
        std_error,
        z_score,
    })
}

/// `Λ(φ) = ∫ μ(dx,dy) log 𝔼^ξ_{x,y} e^{φ}` for an atomic endpoint law.
pub fn lambda_limit(
    mu_pair: &PairMeasure,
    diffusion: &Diffusion,
    phi: &CylinderFunctional,
) -> Result<f64> {
    let alphabet = mu_pair.alphabet();
    coords_of(alphabet, diffusion)?;
    if let Some(c) = phi.is_trivial() {
        return Ok(c);
    }
    let mut mgf = LogMgf::new(alphabet, diffusion, phi);
    let mut total = 0.0;
    for (i, j) in mu_pair.support() {
        total += mu_pair.get(i, j) * mgf.get((i, j))?;
    }
    Ok(total)
}

/// A path law through which `⟨φ, μ⟩` can be evaluated for cylinder `φ`.
pub trait PathLaw {
    /// Law of `(ξ₀, ξ_β)`.
    fn endpoint_law(&self) -> &PairMeasure;
    fn mean_of(&self, phi: &CylinderFunctional) -> Result<f64>;
}

/// `∫ μ₀β(dx,dy) ℙ^ξ_{x,y}`: bridges mixed over an endpoint law.
#[derive(Debug, Clone)]
pub struct BridgeMixture {
    pub endpoints: PairMeasure,
    pub diffusion: Diffusion,
}

impl PathLaw for BridgeMixture {
    fn endpoint_law(&self) -> &PairMeasure {
        &self.endpoints
    }

    fn mean_of(&self, phi: &CylinderFunctional) -> Result<f64> {
        let alphabet = self.endpoints.alphabet();
        coords_of(alphabet, &self.diffusion)?;
        let mut total = 0.0;
        for (i, j) in self.endpoints.support() {
            let spec = self.diffusion.bridge(alphabet.coords(i), alphabet.coords(j))?;
            total += self.endpoints.get(i, j) * cylinder_value(&spec, phi)?;
        }
        Ok(total)
    }
}

/// The empirical measure of a simulated ensemble.
#[derive(Debug, Clone)]
pub struct EmpiricalPaths {
    ensemble: PathEnsemble,
    endpoints: PairMeasure,
}

impl EmpiricalPaths {
    pub fn new(ensemble: PathEnsemble) -> Self {
        let endpoints = ensemble.pair_measure();
        EmpiricalPaths { ensemble, endpoints }
    }
}

impl PathLaw for EmpiricalPaths {
    fn endpoint_law(&self) -> &PairMeasure {
        &self.endpoints
    }

    fn mean_of(&self, phi: &CylinderFunctional) -> Result<f64> {
        let idx: Vec<usize> = phi
            .times()
            .iter()
            .map(|&t| self.ensemble.grid.index_of(t))
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        for path in &self.ensemble.paths {
            let values: Vec<&[f64]> = idx.iter().map(|&g| path[g].as_slice()).collect();
            total += phi.eval(&values)?;
        }
        Ok(total / self.ensemble.paths.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DictionaryBound {
    /// `max(0, max_φ term(φ))`, a lower bound for the full supremum.
    pub value: f64,
    /// `⟨φ, μ⟩ − ∫ μ₀β log 𝔼 e^φ` per dictionary entry.
    pub terms: Vec<f64>,
}

/// Lower bound for the path functional `L(μ)` from a finite dictionary.
/// `φ = 0` is always admissible, hence the bound is at least 0.
pub fn l_lower_bound(
    mu: &dyn PathLaw,
    diffusion: &Diffusion,
    dictionary: &[CylinderFunctional],
) -> Result<DictionaryBound> {
    let mut terms = Vec::with_capacity(dictionary.len());
    for phi in dictionary {
        let pairing = mu.mean_of(phi)?;
        let cumulant = lambda_limit(mu.endpoint_law(), diffusion, phi)?;
        terms.push(pairing - cumulant);
    }
    let value = terms.iter().cloned().fold(0.0, f64::max);
    Ok(DictionaryBound { value, terms })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRateBound {
    /// `rate_j(μ₀β, 𝒮) + L`, a lower bound for the path-level rate.
    pub value: f64,
    /// `𝒮(μ₀) + H(μ₀β | μ₀ ⊗ μ_β)`, computed by [`rate_j`].
    pub static_part: f64,
    pub l_term: f64,
    pub is_lower_bound: bool,
}

/// `𝒮(μ₀) + H(μ₀β | μ₀ ⊗ μ_β) + L(μ)` when `μ₀ = μ_β`, `+∞` otherwise,
/// with `L` replaced by a dictionary lower bound.
pub fn rate_t_eval(mu0beta: &PairMeasure, l_term: f64, s: &RateOracle) -> Result<PathRateBound> {
    if !(l_term >= 0.0) {
        return domain("the L term is a supremum containing φ = 0 and cannot be negative");
    }
    let static_part = rate_j(mu0beta, s)?;
    Ok(PathRateBound {
        value: static_part + l_term,
        static_part,
        l_term,
        is_lower_bound: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulantRow {
    pub n: usize,
    pub lambda_n: f64,
    pub lambda: f64,
    pub gap: f64,
    /// `Σ |pair-empirical − μ|` over cells.
    pub defect: f64,
}

/// `(1/n) Λₙ(φ)` against `Λ(φ)` along endpoint arrays whose pair-empirical
/// measures approach `mu_pair`: for each n the array realises the nearest
/// feasible table to `n · mu_pair` with margins `n · μ₀`.
pub fn cumulant_convergence(
    mu_pair: &PairMeasure,
    diffusion: &Diffusion,
    phi: &CylinderFunctional,
    ns: &[usize],
) -> Result<Vec<CumulantRow>> {
    let alphabet = mu_pair.alphabet();
    let lambda = lambda_limit(mu_pair, diffusion, phi)?;
    let mu0 = mu_pair.first_marginal();
    let mut mgf = LogMgf::new(alphabet, diffusion, phi);
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let table = endpoint_table(mu_pair, &mu0, n)?;
        let k = table.k();
        let mut lambda_n = 0.0;
        let mut defect = 0.0;
        for a in 0..k {
            for b in 0..k {
                let w = table.get(a, b) as f64 / n as f64;
                if w > 0.0 && phi.is_trivial().is_none() {
                    lambda_n += w * mgf.get((a, b))?;
                }
                defect += (w - mu_pair.get(a, b)).abs();
            }
        }
        if let Some(c) = phi.is_trivial() {
            lambda_n = c;
        }
        rows.push(CumulantRow {
            n,
            lambda_n,
            lambda,
            gap: (lambda_n - lambda).abs(),
            defect,
        });
    }
    Ok(rows)
}

fn endpoint_table(
    mu_pair: &PairMeasure,
    mu0: &DiscreteMeasure,
    n: usize,
) -> Result<crate::exact::PairTypeTable> {
    let margins = crate::exact::round_margins(mu0, n)?;
    crate::exact::nearest_feasible_table(mu_pair, &margins)
}

/// Endpoint pairs realising the table used by [`cumulant_convergence`].
pub fn endpoint_pairs(mu_pair: &PairMeasure, n: usize) -> Result<PairAtoms> {
    let table = endpoint_table(mu_pair, &mu_pair.first_marginal(), n)?;
    let k = table.k();
    let mut atoms = Vec::with_capacity(n);
    for a in 0..k {
        for b in 0..k {
            atoms.extend(std::iter::repeat_n((a, b), table.get(a, b) as usize));
        }
    }
    PairAtoms::new(mu_pair.alphabet().clone(), atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{product, IndexedSample};
    use crate::sampler::sample_l_two_layer;
    use crate::stats::ks_test;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn ab() -> Arc<Alphabet> {
        Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap())
    }

    fn diffusion() -> Diffusion {
        Diffusion::new(1, 1.0, 2.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.times(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.index_of(1.0).unwrap(), 2);
        assert!(g.index_of(0.7).is_err());
    }

    #[test]
    fn marginal_closed_forms() {
        let spec = diffusion().bridge(&[0.5], &[1.5]).unwrap();
        assert_eq!(bridge_marginal(&spec, 0.0).unwrap(), (vec![0.5], 0.0));
        assert_eq!(bridge_marginal(&spec, 2.0).unwrap(), (vec![1.5], 0.0));
        let (m, v) = bridge_marginal(&spec, 1.0).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        assert!(bridge_marginal(&spec, 2.5).is_err());
    }

    #[test]
    fn paths_are_pinned_and_gaussian() {
        let spec = diffusion().bridge(&[0.0], &[1.0]).unwrap();
        let grid = TimeGrid::uniform(2.0, 8).unwrap();
        let mut rng = RngHandle::new(12, 0);
        let mut mids = Vec::new();
        for _ in 0..10_000 {
            let p = sample_bridge_path(&spec, &grid, &mut rng).unwrap();
            assert_eq!(p[0], vec![0.0]);
            assert_eq!(p[8], vec![1.0]);
            mids.push(p[4][0]);
        }
        let (m, v) = bridge_marginal(&spec, 1.0).unwrap();
        let normal = Normal::new(m[0], v.sqrt()).unwrap();
        let ks = ks_test(&mids, |x| normal.cdf(x)).unwrap();
        assert!(ks.p_value > 0.001, "{ks:?}");
    }

    #[test]
    fn quadratic_matches_closed_form() {
        let spec = diffusion().bridge(&[0.3], &[1.7]).unwrap();
        for a in [0.1, 0.5, 2.0] {
            let phi = CylinderFunctional::quadratic(a, 1.0).unwrap();
            let (m, v) = bridge_marginal(&spec, 1.0).unwrap();
            let closed = (1.0 + 2.0 * a * v).powf(-0.5) * (-a * m[0] * m[0] / (1.0 + 2.0 * a * v)).exp();
            let q = cylinder_expectation(&spec, &phi).unwrap();
            assert!((q - closed).abs() < 1e-9, "a = {a}: {q} vs {closed}");
        }
        assert_eq!(cylinder_expectation(&spec, &CylinderFunctional::zero()).unwrap(), 1.0);
        let c = CylinderFunctional::constant(0.7).unwrap();
        assert_eq!(cylinder_expectation(&spec, &c).unwrap(), 0.7f64.exp());
    }

    #[test]
    fn declared_bound_enforced() {
        let bad = CylinderFunctional::custom(vec![1.0], 0.5, Arc::new(|v: &[&[f64]]| v[0][0])).unwrap();
        let spec = diffusion().bridge(&[0.0], &[0.0]).unwrap();
        assert!(matches!(cylinder_expectation(&spec, &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn lambda_trivial_and_agreeing() {
        let pairs = PairAtoms::new(ab(), vec![(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        let grid = TimeGrid::uniform(2.0, 4).unwrap();
        let mut rng = RngHandle::new(5, 0);
        let z = lambda_n(&pairs, &diffusion(), &grid, &CylinderFunctional::zero(), 10, &mut rng).unwrap();
        assert_eq!((z.exact, z.mc), (0.0, 0.0));
        let c = CylinderFunctional::constant(-1.25).unwrap();
        let z = lambda_n(&pairs, &diffusion(), &grid, &c, 10, &mut rng).unwrap();
        assert_eq!((z.exact, z.mc), (-1.25, -1.25));
        let q = CylinderFunctional::quadratic(0.8, 1.0).unwrap();
        let z = lambda_n(&pairs, &diffusion(), &grid, &q, 10_000, &mut rng).unwrap();
        assert!(z.z_score < 3.0, "{z:?}");
        let l = CylinderFunctional::linear(vec![1.0], 0.5, 0.4).unwrap();
        let z = lambda_n(&pairs, &diffusion(), &grid, &l, 10_000, &mut rng).unwrap();
        assert!(z.z_score < 3.0, "{z:?}");
    }

    #[test]
    fn ensemble_matches_two_layer_sampler() {
        let law = DiscreteMeasure::uniform(ab());
        let layer = FirstLayerSampler::Iid(law);
        let grid = TimeGrid::uniform(2.0, 4).unwrap();
        for seed in 0..20 {
            let mut r1 = RngHandle::new(seed, 3);
            let mut r2 = RngHandle::new(seed, 3);
            let e = sample_ensemble(&layer, &diffusion(), &grid, 5, &mut r1).unwrap();
            let l = sample_l_two_layer(&layer, 5, &mut r2).unwrap();
            assert_eq!(e.pair_measure(), l);
            for (i, p) in e.paths.iter().enumerate() {
                let a = e.endpoints.alphabet();
                assert_eq!(p[0].as_slice(), a.coords(e.endpoints.at(i)));
                assert_eq!(p[4].as_slice(), a.coords(e.endpoints.at(e.permutation.apply(i))));
            }
        }
        let one = FirstLayerSampler::Fixed(IndexedSample::from_ids(ab(), &["b"]).unwrap());
        let e = sample_ensemble(&one, &diffusion(), &grid, 1, &mut RngHandle::new(0, 0)).unwrap();
        assert_eq!(e.permutation, Permutation::identity(1));
    }

    #[test]
    fn dictionary_bound_on_mixture_is_zero() {
        let mu = DiscreteMeasure::uniform(ab());
        let mix = BridgeMixture {
            endpoints: product(&mu, &mu).unwrap(),
            diffusion: diffusion(),
        };
        let dict = vec![
            CylinderFunctional::zero(),
            CylinderFunctional::quadratic(0.7, 1.0).unwrap(),
            CylinderFunctional::linear(vec![1.5], 0.5, 3.0).unwrap(),
        ];
        let b = l_lower_bound(&mix, &diffusion(), &dict).unwrap();
        assert!(b.terms.iter().all(|t| *t <= 1e-9), "{:?}", b.terms);
        assert_eq!(b.value, 0.0);
        let smaller = l_lower_bound(&mix, &diffusion(), &dict[..1]).unwrap();
        assert!(smaller.value <= b.value);
    }

    #[test]
    fn path_rate_static_part_is_rate_j() {
        let m = DiscreteMeasure::new(ab(), vec![0.4, 0.6]).unwrap();
        let s = RateOracle::Sanov(m.clone());
        let pp = product(&m, &m).unwrap();
        let r = rate_t_eval(&pp, 0.0, &s).unwrap();
        assert_eq!(r.value, 0.0);
        let nu = PairMeasure::new(ab(), vec![0.3, 0.2, 0.2, 0.3]).unwrap();
        let r = rate_t_eval(&nu, 0.1, &s).unwrap();
        assert_eq!(r.static_part, rate_j(&nu, &s).unwrap());
        let skew = PairMeasure::new(ab(), vec![0.3, 0.3, 0.1, 0.3]).unwrap();
        assert_eq!(rate_t_eval(&skew, 0.0, &s).unwrap().value, f64::INFINITY);
    }

    #[test]
    fn cumulant_gaps_shrink() {
        let mu = PairMeasure::new(ab(), vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let phi = CylinderFunctional::quadratic(1.0, 1.0).unwrap();
        let rows = cumulant_convergence(&mu, &diffusion(), &phi, &[8, 32, 128]).unwrap();
        assert!(rows[0].gap > rows[1].gap && rows[1].gap > rows[2].gap, "{rows:?}");
        let zero = cumulant_convergence(&mu, &diffusion(), &CylinderFunctional::zero(), &[8, 32]).unwrap();
        assert!(zero.iter().all(|r| r.gap == 0.0));
    }
}
