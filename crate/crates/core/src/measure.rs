//! Finite alphabets, probability measures on an alphabet and on its square,
//! and relative entropy.
//!
//! Measures carry floating weights and, when they come from counting
//! (empirical measures, pair-types, uniform laws), an exact rational copy.
//! Exact and float weights are kept in sync by construction; the exact copy
//! is dropped by any operation that leaves the rationals.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::permutation::Permutation;

/// Default cap on alphabet size; every solver downstream is dense.
pub const DEFAULT_MAX_POINTS: usize = 16;

/// Total-mass tolerance for floating measures.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub id: String,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: impl Into<String>, coords: Vec<f64>) -> Self {
        Point {
            id: id.into(),
            coords,
        }
    }
}

/// A finite point set with a metric. Distinct identifiers may share
/// coordinates, in which case their distance is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    points: Vec<Point>,
    distances: Vec<f64>,
    explicit_distances: bool,
}

impl Alphabet {
    /// Alphabet with the Euclidean metric on the point coordinates.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        Self::build(points, None, DEFAULT_MAX_POINTS)
    }

    /// Alphabet with an explicit distance matrix, validated as a metric.
    pub fn with_distances(points: Vec<Point>, distances: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(points, Some(distances), DEFAULT_MAX_POINTS)
    }

    pub fn with_cap(
        points: Vec<Point>,
        distances: Option<Vec<Vec<f64>>>,
        max_points: usize,
    ) -> Result<Self> {
        Self::build(points, distances, max_points)
    }

    /// Points on the real line labelled `a`, `b`, `c`, ... (or `p<i>` past `z`).
    pub fn on_line(coords: &[f64]) -> Result<Self> {
        let points = coords
            .iter()
            .enumerate()
            .map(|(i, &x)| Point::new(default_label(i), vec![x]))
            .collect();
        Self::new(points)
    }

    fn build(
        points: Vec<Point>,
        distances: Option<Vec<Vec<f64>>>,
        max_points: usize,
    ) -> Result<Self> {
        let k = points.len();
        if k == 0 {
            return domain("alphabet must contain at least one point");
        }
        if k > max_points {
            return Err(Error::Resource(format!(
                "alphabet has {k} points, cap is {max_points}"
            )));
        }
        let dim = points[0].coords.len();
        for (i, p) in points.iter().enumerate() {
            if p.id.is_empty() || p.id.contains(',') {
                return domain(format!("invalid point id {:?}", p.id));
            }
            if p.coords.len() != dim {
                return domain("all points must have the same coordinate dimension");
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return domain(format!("point {:?} has non-finite coordinates", p.id));
            }
            if points[..i].iter().any(|q| q.id == p.id) {
                return domain(format!("duplicate point id {:?}", p.id));
            }
        }
        let explicit_distances = distances.is_some();
        let flat = match distances {
            Some(rows) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return domain("distance matrix must be k x k");
                }
                rows.into_iter().flatten().collect::<Vec<_>>()
            }
            None => {
                let mut flat = vec![0.0; k * k];
                for i in 0..k {
                    for j in 0..k {
                        flat[i * k + j] = euclidean(&points[i].coords, &points[j].coords);
                    }
                }
                flat
            }
        };
        validate_metric(&flat, k)?;
        Ok(Alphabet {
            points,
            distances: flat,
            explicit_distances,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn id(&self, i: usize) -> &str {
        &self.points[i].id
    }

    pub fn coords(&self, i: usize) -> &[f64] {
        &self.points[i].coords
    }

    pub fn dimension(&self) -> usize {
        self.points[0].coords.len()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.points.iter().position(|p| p.id == id)
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.len() + j]
    }

    fn distance_rows(&self) -> Vec<Vec<f64>> {
        self.distances.chunks(self.len()).map(|r| r.to_vec()).collect()
    }
}

fn default_label(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("p{i}")
    }
}

fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn validate_metric(d: &[f64], k: usize) -> Result<()> {
    let scale = d.iter().cloned().fold(0.0, f64::max).max(1.0);
    for i in 0..k {
        if d[i * k + i] != 0.0 {
            return domain("metric must vanish on the diagonal");
        }
        for j in 0..k {
            let v = d[i * k + j];
            if !v.is_finite() || v < 0.0 {
                return domain("metric entries must be finite and nonnegative");
            }
            if v != d[j * k + i] {
                return domain("metric must be symmetric");
            }
            for l in 0..k {
                if v > d[i * k + l] + d[l * k + j] + 1e-12 * scale {
                    return domain("metric violates the triangle inequality");
                }
            }
        }
    }
    Ok(())
}

/// Common read access to measures on an alphabet or on its square.
pub trait Measure {
    fn alphabet(&self) -> &Arc<Alphabet>;
    fn weights(&self) -> &[f64];
}

/// A probability measure on an alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    alphabet: Arc<Alphabet>,
    weights: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl DiscreteMeasure {
    pub fn new(alphabet: Arc<Alphabet>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != alphabet.len() {
            return domain(format!(
                "expected {} weights, got {}",
                alphabet.len(),
                weights.len()
            ));
        }
        check_float_mass(&weights)?;
        Ok(DiscreteMeasure {
            alphabet,
            weights,
            exact: None,
        })
    }

    pub fn from_exact(alphabet: Arc<Alphabet>, exact: Vec<BigRational>) -> Result<Self> {
        if exact.len() != alphabet.len() {
            return domain("exact weight vector has the wrong length");
        }
        check_exact_mass(&exact)?;
        Ok(DiscreteMeasure {
            weights: exact.iter().map(ratio_to_f64).collect(),
            alphabet,
            exact: Some(exact),
        })
    }

    /// Counts normalised by their total: the exact weights `c_j / n`.
    pub fn from_counts(alphabet: Arc<Alphabet>, counts: &[u64]) -> Result<Self> {
        Self::from_exact(alphabet, counts_to_ratios(counts)?)
    }

    pub fn dirac(alphabet: Arc<Alphabet>, i: usize) -> Result<Self> {
        let mut counts = vec![0; alphabet.len()];
        if i >= counts.len() {
            return domain("dirac index out of range");
        }
        counts[i] = 1;
        Self::from_counts(alphabet, &counts)
    }

    pub fn uniform(alphabet: Arc<Alphabet>) -> Self {
        let counts = vec![1; alphabet.len()];
        Self::from_counts(alphabet, &counts).expect("uniform law is valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Cell-wise comparison; exact comparison when both sides are exact.
    pub fn approx_eq(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        if self.len() != other.len() {
            return false;
        }
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            return a == b;
        }
        self.weights
            .iter()
            .zip(&other.weights)
            .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn to_doc(&self) -> Result<MeasureDoc> {
        let mut weights = BTreeMap::new();
        for i in 0..self.len() {
            let w = match &self.exact {
                Some(e) => WeightDoc::from_ratio(&e[i])?,
                None => WeightDoc::Float(self.weights[i]),
            };
            weights.insert(self.alphabet.id(i).to_string(), w);
        }
        Ok(MeasureDoc {
            points: self.alphabet.points.clone(),
            distances: self.alphabet.explicit_distances.then(|| self.alphabet.distance_rows()),
            weights,
        })
    }

    pub fn from_doc(doc: &MeasureDoc) -> Result<Self> {
        let alphabet = Arc::new(alphabet_from(&doc.points, &doc.distances)?);
        Self::from_doc_on(alphabet, &doc.weights)
    }

    pub(crate) fn from_doc_on(
        alphabet: Arc<Alphabet>,
        weights: &BTreeMap<String, WeightDoc>,
    ) -> Result<Self> {
        let k = alphabet.len();
        let mut cells = vec![None; k];
        for (key, w) in weights {
            let i = alphabet
                .index_of(key)
                .ok_or_else(|| Error::Format(format!("unknown point id {key:?}")))?;
            cells[i] = Some(w.clone());
        }
        match collect_weights(cells)? {
            Collected::Exact(e) => Self::from_exact(alphabet, e),
            Collected::Float(f) => Self::new(alphabet, f),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc()?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(text)?)
    }
}

impl Measure for DiscreteMeasure {
    fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// A probability measure on the square of an alphabet, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasure {
    alphabet: Arc<Alphabet>,
    weights: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

impl PairMeasure {
    pub fn new(alphabet: Arc<Alphabet>, weights: Vec<f64>) -> Result<Self> {
        let k = alphabet.len();
        if weights.len() != k * k {
            return domain(format!("expected {} pair weights, got {}", k * k, weights.len()));
        }
        check_float_mass(&weights)?;
        Ok(PairMeasure {
            alphabet,
            weights,
            exact: None,
        })
    }

    pub fn from_exact(alphabet: Arc<Alphabet>, exact: Vec<BigRational>) -> Result<Self> {
        let k = alphabet.len();
        if exact.len() != k * k {
            return domain("exact pair weight vector has the wrong length");
        }
        check_exact_mass(&exact)?;
        Ok(PairMeasure {
            weights: exact.iter().map(ratio_to_f64).collect(),
            alphabet,
            exact: Some(exact),
        })
    }

    /// Row-major cell counts normalised by their total.
    pub fn from_counts(alphabet: Arc<Alphabet>, counts: &[u64]) -> Result<Self> {
        Self::from_exact(alphabet, counts_to_ratios(counts)?)
    }

    pub fn side(&self) -> usize {
        self.alphabet.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.side() + j]
    }

    pub fn exact(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    /// Cells `(i, j)` with positive mass, row-major.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let k = self.side();
        (0..k * k)
            .filter(|&c| self.weights[c] > 0.0)
            .map(|c| (c / k, c % k))
            .collect()
    }

    pub fn first_marginal(&self) -> DiscreteMeasure {
        self.marginal(true)
    }

    pub fn second_marginal(&self) -> DiscreteMeasure {
        self.marginal(false)
    }

    fn marginal(&self, rows: bool) -> DiscreteMeasure {
        let k = self.side();
        let idx = |a: usize, b: usize| if rows { a * k + b } else { b * k + a };
        let weights: Vec<f64> = (0..k)
            .map(|a| (0..k).map(|b| self.weights[idx(a, b)]).sum())
            .collect();
        let exact = self.exact.as_ref().map(|e| {
            (0..k)
                .map(|a| (0..k).fold(BigRational::zero(), |acc, b| acc + &e[idx(a, b)]))
                .collect::<Vec<_>>()
        });
        match exact {
            Some(e) => DiscreteMeasure {
                weights: e.iter().map(ratio_to_f64).collect(),
                alphabet: self.alphabet.clone(),
                exact: Some(e),
            },
            None => DiscreteMeasure {
                alphabet: self.alphabet.clone(),
                weights,
                exact: None,
            },
        }
    }

    pub fn approx_eq(&self, other: &PairMeasure, tol: f64) -> bool {
        if self.weights.len() != other.weights.len() {
            return false;
        }
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            return a == b;
        }
        self.weights
            .iter()
            .zip(&other.weights)
            .all(|(a, b)| (a - b).abs() <= tol)
    }

    pub fn to_doc(&self) -> Result<MeasureDoc> {
        let k = self.side();
        let mut weights = BTreeMap::new();
        for c in 0..k * k {
            let w = match &self.exact {
                Some(e) => WeightDoc::from_ratio(&e[c])?,
                None => WeightDoc::Float(self.weights[c]),
            };
            let key = format!("{},{}", self.alphabet.id(c / k), self.alphabet.id(c % k));
            weights.insert(key, w);
        }
        Ok(MeasureDoc {
            points: self.alphabet.points.clone(),
            distances: self.alphabet.explicit_distances.then(|| self.alphabet.distance_rows()),
            weights,
        })
    }

    pub fn from_doc(doc: &MeasureDoc) -> Result<Self> {
        let alphabet = Arc::new(alphabet_from(&doc.points, &doc.distances)?);
        let k = alphabet.len();
        let mut cells = vec![None; k * k];
        for (key, w) in &doc.weights {
            let (a, b) = key
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("pair key {key:?} is not \"a,b\"")))?;
            let lookup = |id: &str| {
                alphabet
                    .index_of(id)
                    .ok_or_else(|| Error::Format(format!("unknown point id {id:?}")))
            };
            cells[lookup(a)? * k + lookup(b)?] = Some(w.clone());
        }
        match collect_weights(cells)? {
            Collected::Exact(e) => Self::from_exact(alphabet, e),
            Collected::Float(f) => Self::new(alphabet, f),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc()?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(text)?)
    }
}

impl Measure for PairMeasure {
    fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }
    fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// An ordered array of alphabet points `x_1, .., x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedSample {
    alphabet: Arc<Alphabet>,
    indices: Vec<usize>,
}

impl IndexedSample {
    pub fn new(alphabet: Arc<Alphabet>, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return domain("sample must be nonempty");
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= alphabet.len()) {
            return domain(format!("sample index {bad} outside the alphabet"));
        }
        Ok(IndexedSample { alphabet, indices })
    }

    pub fn from_ids(alphabet: Arc<Alphabet>, ids: &[&str]) -> Result<Self> {
        let indices = ids
            .iter()
            .map(|id| {
                alphabet
                    .index_of(id)
                    .ok_or_else(|| Error::Domain(format!("unknown point id {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, indices)
    }

    /// Sample with block counts `counts[j]` of point `j`, in alphabet order.
    pub fn from_counts(alphabet: Arc<Alphabet>, counts: &[u64]) -> Result<Self> {
        let indices = counts
            .iter()
            .enumerate()
            .flat_map(|(j, &c)| std::iter::repeat_n(j, c as usize))
            .collect();
        Self::new(alphabet, indices)
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn at(&self, i: usize) -> usize {
        self.indices[i]
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.alphabet.len()];
        for &i in &self.indices {
            counts[i] += 1;
        }
        counts
    }

    /// The reindexed sample `i ↦ x_{tau(i)}`.
    pub fn permuted(&self, tau: &Permutation) -> Result<Self> {
        if tau.len() != self.len() {
            return domain("permutation length differs from sample length");
        }
        Ok(IndexedSample {
            alphabet: self.alphabet.clone(),
            indices: (0..self.len()).map(|i| self.indices[tau.apply(i)]).collect(),
        })
    }

    pub fn to_doc(&self) -> SampleDoc {
        SampleDoc {
            points: self.alphabet.points.clone(),
            distances: self.alphabet.explicit_distances.then(|| self.alphabet.distance_rows()),
            sample: self
                .indices
                .iter()
                .map(|&i| self.alphabet.id(i).to_string())
                .collect(),
        }
    }

    pub fn from_doc(doc: &SampleDoc) -> Result<Self> {
        let alphabet = Arc::new(alphabet_from(&doc.points, &doc.distances)?);
        let ids: Vec<&str> = doc.sample.iter().map(String::as_str).collect();
        Self::from_ids(alphabet, &ids)
    }
}

/// An equal-weight list of pair atoms `(u_i, v_i)`, as produced by
/// independent-pairs sampling or by an approximating array.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAtoms {
    alphabet: Arc<Alphabet>,
    atoms: Vec<(usize, usize)>,
}

impl PairAtoms {
    pub fn new(alphabet: Arc<Alphabet>, atoms: Vec<(usize, usize)>) -> Result<Self> {
        if atoms.is_empty() {
            return domain("atom list must be nonempty");
        }
        let k = alphabet.len();
        if atoms.iter().any(|&(a, b)| a >= k || b >= k) {
            return domain("atom outside the alphabet");
        }
        Ok(PairAtoms { alphabet, atoms })
    }

    pub fn alphabet(&self) -> &Arc<Alphabet> {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(usize, usize)] {
        &self.atoms
    }

    pub fn to_measure(&self) -> PairMeasure {
        let k = self.alphabet.len();
        let mut counts = vec![0u64; k * k];
        for &(a, b) in &self.atoms {
            counts[a * k + b] += 1;
        }
        PairMeasure::from_counts(self.alphabet.clone(), &counts).expect("atoms are nonempty")
    }

    pub fn to_doc(&self) -> AtomsDoc {
        AtomsDoc {
            points: self.alphabet.points.clone(),
            distances: self.alphabet.explicit_distances.then(|| self.alphabet.distance_rows()),
            atoms: self
                .atoms
                .iter()
                .map(|&(a, b)| {
                    (
                        self.alphabet.id(a).to_string(),
                        self.alphabet.id(b).to_string(),
                    )
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &AtomsDoc) -> Result<Self> {
        let alphabet = Arc::new(alphabet_from(&doc.points, &doc.distances)?);
        let lookup = |id: &str| {
            alphabet
                .index_of(id)
                .ok_or_else(|| Error::Format(format!("unknown point id {id:?}")))
        };
        let atoms = doc
            .atoms
            .iter()
            .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(alphabet, atoms)
    }
}

/// `μⁿ = (1/n) Σ δ_{x_i}` with exact weights.
pub fn empirical_of(sample: &IndexedSample) -> DiscreteMeasure {
    DiscreteMeasure::from_counts(sample.alphabet.clone(), &sample.counts())
        .expect("samples are nonempty")
}

/// `(1/n) Σ δ_{(x_i, x_{σ(i)})}` with exact weights.
pub fn pair_empirical(sample: &IndexedSample, perm: &Permutation) -> Result<PairMeasure> {
    if perm.len() != sample.len() {
        return domain(format!(
            "permutation length {} differs from sample length {}",
            perm.len(),
            sample.len()
        ));
    }
    let k = sample.alphabet.len();
    let mut counts = vec![0u64; k * k];
    for i in 0..sample.len() {
        counts[sample.at(i) * k + sample.at(perm.apply(i))] += 1;
    }
    PairMeasure::from_counts(sample.alphabet.clone(), &counts)
}

pub fn marginals(nu: &PairMeasure) -> (DiscreteMeasure, DiscreteMeasure) {
    (nu.first_marginal(), nu.second_marginal())
}

/// `mu ⊗ rho`, exact when both factors are.
pub fn product(mu: &DiscreteMeasure, rho: &DiscreteMeasure) -> Result<PairMeasure> {
    if mu.alphabet != rho.alphabet && *mu.alphabet != *rho.alphabet {
        return domain("product of measures on different alphabets");
    }
    if let (Some(a), Some(b)) = (&mu.exact, &rho.exact) {
        let exact = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| x * y))
            .collect();
        return PairMeasure::from_exact(mu.alphabet.clone(), exact);
    }
    let weights = mu
        .weights
        .iter()
        .flat_map(|x| rho.weights.iter().map(move |y| x * y))
        .collect();
    PairMeasure::new(mu.alphabet.clone(), weights)
}

/// `H(nu | rho) = Σ nu log(nu / rho)` in nats, `+∞` without absolute continuity.
pub fn relative_entropy<M: Measure>(nu: &M, rho: &M) -> Result<f64> {
    if nu.weights().len() != rho.weights().len()
        || (nu.alphabet() != rho.alphabet() && **nu.alphabet() != **rho.alphabet())
    {
        return domain("relative entropy of measures on different index sets");
    }
    Ok(kl_weights(nu.weights(), rho.weights()))
}

/// Relative entropy of raw weight vectors with `0 log 0 = 0`.
pub fn kl_weights(nu: &[f64], rho: &[f64]) -> f64 {
    let mut h = 0.0;
    for (&p, &q) in nu.iter().zip(rho) {
        if p > 0.0 {
            if q <= 0.0 {
                return f64::INFINITY;
            }
            h += p * (p / q).ln();
        }
    }
    h.max(0.0)
}

fn check_float_mass(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return domain(format!("invalid weight {w}"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return domain(format!("weights sum to {total}, expected 1"));
    }
    Ok(())
}

fn check_exact_mass(weights: &[BigRational]) -> Result<()> {
    if weights.iter().any(|w| w.is_negative()) {
        return domain("negative exact weight");
    }
    let total = weights.iter().fold(BigRational::zero(), |acc, w| acc + w);
    if !total.is_one() {
        return domain(format!("exact weights sum to {total}, expected 1"));
    }
    Ok(())
}

fn counts_to_ratios(counts: &[u64]) -> Result<Vec<BigRational>> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return domain("counts must not all be zero");
    }
    let den = BigInt::from(n);
    Ok(counts
        .iter()
        .map(|&c| BigRational::new(BigInt::from(c), den.clone()))
        .collect())
}

/// Float value of a big rational, accurate even when both parts overflow `f64`.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    let sign = if r.is_negative() { -1.0 } else { 1.0 };
    sign * (crate::exact::ln_bigint(r.numer()) - crate::exact::ln_bigint(r.denom())).exp()
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetDoc {
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
}

impl AlphabetDoc {
    pub fn from_alphabet(a: &Alphabet) -> Self {
        AlphabetDoc {
            points: a.points.clone(),
            distances: a.explicit_distances.then(|| a.distance_rows()),
        }
    }

    pub fn to_alphabet(&self) -> Result<Alphabet> {
        alphabet_from(&self.points, &self.distances)
    }
}

fn alphabet_from(points: &[Point], distances: &Option<Vec<Vec<f64>>>) -> Result<Alphabet> {
    Alphabet::with_cap(points.to_vec(), distances.clone(), DEFAULT_MAX_POINTS)
}

/// A weight cell: a float or an exact rational `{"num": .., "den": ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightDoc {
    Exact { num: i64, den: u64 },
    Float(f64),
}

impl WeightDoc {
    fn from_ratio(r: &BigRational) -> Result<Self> {
        match (r.numer().to_i64(), r.denom().to_u64()) {
            (Some(num), Some(den)) => Ok(WeightDoc::Exact { num, den }),
            _ => Err(Error::Format(format!("rational {r} does not fit in 64 bits"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    pub weights: BTreeMap<String, WeightDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDoc {
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    pub sample: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomsDoc {
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    pub atoms: Vec<(String, String)>,
}

enum Collected {
    Exact(Vec<BigRational>),
    Float(Vec<f64>),
}

fn collect_weights(cells: Vec<Option<WeightDoc>>) -> Result<Collected> {
    let all_exact = cells
        .iter()
        .all(|c| matches!(c, None | Some(WeightDoc::Exact { .. })));
    if all_exact {
        let exact = cells
            .into_iter()
            .map(|c| match c {
                Some(WeightDoc::Exact { num, den }) if den > 0 => {
                    Ok(BigRational::new(num.into(), den.into()))
                }
                Some(WeightDoc::Exact { .. }) => Err(Error::Format("zero denominator".into())),
                _ => Ok(BigRational::zero()),
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(Collected::Exact(exact));
    }
    Ok(Collected::Float(
        cells
            .into_iter()
            .map(|c| match c {
                Some(WeightDoc::Float(x)) => x,
                Some(WeightDoc::Exact { num, den }) => num as f64 / den as f64,
                None => 0.0,
            })
            .collect(),
    ))
}
