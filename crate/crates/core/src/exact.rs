//! Exact finite-n laws of symmetrised empirical measures.
//!
//! The pair-type of `(1/n) Σ δ_{(x_i, x_{σ(i)})}` is a contingency table whose
//! row and column sums both equal the counts of the array. The number of
//! permutations realising a table `m` with margins `c` is
//! `(Π c_l!)² / Π m_jl!`, so the law of the pair-type under a uniform
//! permutation is available in big-integer arithmetic.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{Alphabet, DiscreteMeasure, IndexedSample, Measure, PairMeasure};
use crate::permutation::Permutation;

/// Exact rationals are kept on [`LogProb`] up to this size.
pub const EXACT_RETENTION_MAX_N: usize = 20;

/// Largest n accepted by [`ld_rate_exact`].
pub const LD_RATE_MAX_N: usize = 500;

/// Integer counts per alphabet point, summing to n.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MarginVector(Vec<u64>);

impl MarginVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return domain("margin vector needs at least one point");
        }
        if counts.iter().sum::<u64>() == 0 {
            return domain("margin vector must have n ≥ 1");
        }
        Ok(MarginVector(counts))
    }

    pub fn of_sample(sample: &IndexedSample) -> Self {
        MarginVector(sample.counts())
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn n(&self) -> usize {
        self.0.iter().sum::<u64>() as usize
    }

    /// The canonical sorted array with these counts.
    pub fn to_sample(&self, alphabet: Arc<Alphabet>) -> Result<IndexedSample> {
        IndexedSample::from_counts(alphabet, &self.0)
    }
}

/// Integer `k × k` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PairTypeTable {
    k: usize,
    cells: Vec<u64>,
}

impl PairTypeTable {
    pub fn new(k: usize, cells: Vec<u64>) -> Result<Self> {
        if k == 0 || cells.len() != k * k {
            return domain(format!("a {k}×{k} table needs {} cells", k * k));
        }
        Ok(PairTypeTable { k, cells })
    }

    /// Pair-type of `pair_empirical(sample, perm)`.
    pub fn of_permutation(sample: &IndexedSample, perm: &Permutation) -> Result<Self> {
        if perm.len() != sample.len() {
            return domain("permutation and sample lengths differ");
        }
        let k = sample.alphabet().len();
        let mut cells = vec![0; k * k];
        for i in 0..sample.len() {
            cells[sample.at(i) * k + sample.at(perm.apply(i))] += 1;
        }
        Ok(PairTypeTable { k, cells })
    }

    /// `n · nu` when that is integral; requires exact weights.
    pub fn of_measure(nu: &PairMeasure, n: usize) -> Result<Self> {
        let exact = nu
            .exact()
            .ok_or_else(|| Error::Domain("pair-type needs exact weights".into()))?;
        let scale = BigRational::from_integer(BigInt::from(n));
        let cells = exact
            .iter()
            .map(|w| {
                let v = w * &scale;
                if v.is_integer() {
                    v.to_integer().to_u64().ok_or_else(|| Error::Domain("cell overflow".into()))
                } else {
                    domain(format!("n·weight = {v} is not an integer"))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PairTypeTable {
            k: nu.side(),
            cells,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.cells[i * self.k + j]
    }

    pub fn n(&self) -> usize {
        self.cells.iter().sum::<u64>() as usize
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.k).map(|i| (0..self.k).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.k).map(|j| (0..self.k).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn has_margins(&self, margins: &MarginVector) -> bool {
        self.k == margins.k()
            && self.row_sums() == margins.counts()
            && self.col_sums() == margins.counts()
    }

    /// `m / n` as an exact pair measure.
    pub fn to_measure(&self, alphabet: Arc<Alphabet>) -> Result<PairMeasure> {
        if alphabet.len() != self.k {
            return domain("table and alphabet sizes differ");
        }
        PairMeasure::from_counts(alphabet, &self.cells)
    }
}

/// A probability in nats, with its exact value for small n.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogProb {
    pub ln: f64,
    #[serde(serialize_with = "ser_opt_ratio")]
    pub exact: Option<BigRational>,
}

impl LogProb {
    fn from_ratio(r: BigRational, keep_exact: bool) -> Self {
        LogProb {
            ln: ln_ratio(&r),
            exact: keep_exact.then_some(r),
        }
    }

    pub fn prob(&self) -> f64 {
        self.ln.exp()
    }
}

fn ser_opt_ratio<S: serde::Serializer>(
    v: &Option<BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

/// Configurable enumeration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct EnumerationCaps {
    pub max_k: usize,
    pub max_n: usize,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        EnumerationCaps { max_k: 6, max_n: 60 }
    }
}

impl EnumerationCaps {
    fn check(&self, k: usize, n: usize) -> Result<()> {
        if k > self.max_k || n > self.max_n {
            return Err(Error::Resource(format!(
                "enumeration with k = {k}, n = {n} exceeds caps k ≤ {}, n ≤ {}",
                self.max_k, self.max_n
            )));
        }
        Ok(())
    }
}

/// Lazy stream of all tables with the given row and column margins.
///
/// Cells of the leading `(k-1) × (k-1)` block are chosen in row-major order
/// between bounds that guarantee every partial choice completes, so the
/// search never backtracks out of a dead end.
#[derive(Debug, Clone)]
pub struct TableIter {
    k: usize,
    margins: Vec<u64>,
    vals: Vec<u64>,
    row_rem: Vec<u64>,
    col_rem: Vec<u64>,
    started: bool,
    done: bool,
}

impl TableIter {
    fn new(margins: &MarginVector) -> Self {
        let k = margins.k();
        let free = (k - 1) * (k - 1);
        TableIter {
            k,
            margins: margins.counts().to_vec(),
            vals: vec![0; free],
            row_rem: margins.counts().to_vec(),
            col_rem: margins.counts().to_vec(),
            started: false,
            done: false,
        }
    }

    fn pos(&self, q: usize) -> (usize, usize) {
        (q / (self.k - 1), q % (self.k - 1))
    }

    fn bounds(&self, q: usize) -> (u64, u64) {
        let (i, j) = self.pos(q);
        let hi = self.row_rem[i].min(self.col_rem[j]);
        // Completed rows have already claimed their last-column cell.
        let claimed: u64 = self.row_rem[..i].iter().sum();
        let later: u64 = self.col_rem[j + 1..self.k - 1].iter().sum::<u64>()
            + (self.col_rem[self.k - 1] - claimed);
        let lo = self.row_rem[i].saturating_sub(later);
        (lo, hi)
    }

    fn set(&mut self, q: usize, v: u64) {
        let (i, j) = self.pos(q);
        self.vals[q] = v;
        self.row_rem[i] -= v;
        self.col_rem[j] -= v;
    }

    fn unset(&mut self, q: usize) {
        let (i, j) = self.pos(q);
        self.row_rem[i] += self.vals[q];
        self.col_rem[j] += self.vals[q];
    }

    fn fill_from(&mut self, start: usize) {
        for q in start..self.vals.len() {
            let (lo, hi) = self.bounds(q);
            debug_assert!(lo <= hi);
            self.set(q, lo);
        }
    }

    fn current(&self) -> PairTypeTable {
        let k = self.k;
        let mut cells = vec![0; k * k];
        let mut col_rem = self.col_rem.clone();
        for i in 0..k - 1 {
            for j in 0..k - 1 {
                cells[i * k + j] = self.vals[i * (k - 1) + j];
            }
            cells[i * k + k - 1] = self.row_rem[i];
            col_rem[k - 1] -= self.row_rem[i];
        }
        for j in 0..k {
            cells[(k - 1) * k + j] = col_rem[j];
        }
        debug_assert_eq!(
            cells[(k - 1) * k..].iter().sum::<u64>(),
            self.margins[k - 1]
        );
        PairTypeTable { k, cells }
    }
}

impl Iterator for TableIter {
    type Item = PairTypeTable;

    fn next(&mut self) -> Option<PairTypeTable> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_from(0);
            return Some(self.current());
        }
        for q in (0..self.vals.len()).rev() {
            self.unset(q);
            let (_, hi) = self.bounds(q);
            let v = self.vals[q];
            if v < hi {
                self.set(q, v + 1);
                self.fill_from(q + 1);
                return Some(self.current());
            }
        }
        self.done = true;
        None
    }
}

/// Every table with row and column sums equal to `margins`, each exactly once.
pub fn enumerate_tables(margins: &MarginVector, caps: &EnumerationCaps) -> Result<TableIter> {
    caps.check(margins.k(), margins.n())?;
    Ok(TableIter::new(margins))
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Number of permutations whose pair-type is `m`.
pub fn table_count(margins: &MarginVector, m: &PairTypeTable) -> Result<BigUint> {
    if !m.has_margins(margins) {
        return domain("table margins differ from the margin vector");
    }
    let mut num = BigUint::one();
    for &c in margins.counts() {
        let f = factorial(c);
        num *= &f * &f;
    }
    let den = m.cells().iter().fold(BigUint::one(), |acc, &v| acc * factorial(v));
    Ok(num / den)
}

/// Permutation counts per table; they sum to `n!`.
pub fn exact_counts_v(
    margins: &MarginVector,
    caps: &EnumerationCaps,
) -> Result<BTreeMap<PairTypeTable, BigUint>> {
    enumerate_tables(margins, caps)?
        .map(|m| table_count(margins, &m).map(|c| (m, c)))
        .collect()
}

/// Law of the pair-type under a uniform permutation: `table_count / n!`.
pub fn exact_law_v(
    margins: &MarginVector,
    caps: &EnumerationCaps,
) -> Result<BTreeMap<PairTypeTable, LogProb>> {
    let n = margins.n();
    let total = BigInt::from(factorial(n as u64));
    let keep = n <= EXACT_RETENTION_MAX_N;
    Ok(exact_counts_v(margins, caps)?
        .into_iter()
        .map(|(m, c)| {
            let p = BigRational::new(BigInt::from(c), total.clone());
            (m, LogProb::from_ratio(p, keep))
        })
        .collect())
}

/// Histogram of pair-types over all `n!` permutations of `sample`.
pub fn permutation_histogram(sample: &IndexedSample) -> BTreeMap<PairTypeTable, BigUint> {
    let mut hist: BTreeMap<PairTypeTable, BigUint> = BTreeMap::new();
    for perm in Permutation::all(sample.len()) {
        let m = PairTypeTable::of_permutation(sample, &perm).expect("lengths agree");
        *hist.entry(m).or_default() += 1u32;
    }
    hist
}

/// Counts `n · mu`, which must be integral.
pub fn round_margins(mu: &DiscreteMeasure, n: usize) -> Result<MarginVector> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    let counts = match mu.exact() {
        Some(exact) => {
            let scale = BigRational::from_integer(BigInt::from(n));
            exact
                .iter()
                .map(|w| {
                    let v = w * &scale;
                    if v.is_integer() {
                        Ok(v.to_integer().to_u64().unwrap_or(0))
                    } else {
                        domain(format!("n·mu has the non-integer entry {v}"))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => mu
            .weights()
            .iter()
            .map(|&w| {
                let v = w * n as f64;
                if (v - v.round()).abs() > 1e-9 {
                    domain(format!("n·mu has the non-integer entry {v}"))
                } else {
                    Ok(v.round() as u64)
                }
            })
            .collect::<Result<Vec<_>>>()?,
    };
    MarginVector::new(counts)
}

/// Table with the given margins nearest to `n · target`.
///
/// Cells are floored, then units are added one at a time to the cell with
/// the largest remaining fractional excess among cells whose row and column
/// are both short, ties going to the lexicographically first cell.
pub fn nearest_feasible_table(
    target: &PairMeasure,
    margins: &MarginVector,
) -> Result<PairTypeTable> {
    let k = margins.k();
    if target.side() != k {
        return domain("target and margins have different alphabet sizes");
    }
    let n = margins.n() as f64;
    let scaled: Vec<f64> = target.weights().iter().map(|w| w * n).collect();
    let mut cells: Vec<u64> = scaled.iter().map(|v| (v + 1e-9).floor() as u64).collect();
    let mut excess: Vec<f64> = scaled.iter().zip(&cells).map(|(v, c)| v - *c as f64).collect();
    let mut row_def = Vec::with_capacity(k);
    let mut col_def = Vec::with_capacity(k);
    for i in 0..k {
        let row: u64 = (0..k).map(|j| cells[i * k + j]).sum();
        let col: u64 = (0..k).map(|j| cells[j * k + i]).sum();
        let c = margins.counts()[i];
        if row > c || col > c {
            return domain("target marginals are incompatible with the margins");
        }
        row_def.push(c - row);
        col_def.push(c - col);
    }
    loop {
        let mut best: Option<usize> = None;
        for cell in 0..k * k {
            let (i, j) = (cell / k, cell % k);
            if row_def[i] == 0 || col_def[j] == 0 {
                continue;
            }
            if best.is_none_or(|b| excess[cell] > excess[b] + 1e-12) {
                best = Some(cell);
            }
        }
        let Some(cell) = best else { break };
        cells[cell] += 1;
        excess[cell] -= 1.0;
        row_def[cell / k] -= 1;
        col_def[cell % k] -= 1;
    }
    PairTypeTable::new(k, cells)
}

/// Result of an exact finite-n rate evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ExactRate {
    pub n: usize,
    pub table: PairTypeTable,
    pub log_prob: LogProb,
    /// `-(1/n) ln P(pair-type = table)`.
    pub value: f64,
}

/// `-(1/n) ln P` at the feasible table nearest to `n · target`.
pub fn ld_rate_exact(target: &PairMeasure, mu: &DiscreteMeasure, n: usize) -> Result<ExactRate> {
    if n > LD_RATE_MAX_N {
        return Err(Error::Resource(format!("n = {n} exceeds {LD_RATE_MAX_N}")));
    }
    let margins = round_margins(mu, n)?;
    let table = nearest_feasible_table(target, &margins)?;
    let count = table_count(&margins, &table)?;
    let p = BigRational::new(BigInt::from(count), BigInt::from(factorial(n as u64)));
    let log_prob = LogProb::from_ratio(p, n <= EXACT_RETENTION_MAX_N);
    Ok(ExactRate {
        n,
        value: -log_prob.ln / n as f64,
        table,
        log_prob,
    })
}

/// Caps for the two-layer law.
pub const TWO_LAYER_CAPS: EnumerationCaps = EnumerationCaps { max_k: 4, max_n: 12 };

/// Joint law of (margins, pair-type) when the array is i.i.d. from `law`:
/// the multinomial probability of the margins times the conditional
/// pair-type law. Exact whenever `law` carries exact weights.
pub fn exact_law_two_layer(
    law: &DiscreteMeasure,
    n: usize,
) -> Result<BTreeMap<(MarginVector, PairTypeTable), LogProb>> {
    let k = law.len();
    TWO_LAYER_CAPS.check(k, n)?;
    if n == 0 {
        return domain("n must be at least 1");
    }
    let mut out = BTreeMap::new();
    for counts in compositions(n as u64, k) {
        let margins = MarginVector(counts);
        let (weight_exact, weight_ln) = margin_weight(law, &margins);
        if weight_ln == f64::NEG_INFINITY {
            continue;
        }
        let cfact = margins
            .counts()
            .iter()
            .fold(BigUint::one(), |acc, &c| acc * factorial(c));
        for m in TableIter::new(&margins) {
            let mfact = m.cells().iter().fold(BigUint::one(), |acc, &v| acc * factorial(v));
            // multinomial × count / n! collapses to Π p^c · Π c! / Π m!.
            let ratio = BigRational::new(BigInt::from(cfact.clone()), BigInt::from(mfact));
            let lp = match &weight_exact {
                Some(w) => LogProb::from_ratio(w * &ratio, true),
                None => LogProb {
                    ln: weight_ln + ln_ratio(&ratio),
                    exact: None,
                },
            };
            out.insert((margins.clone(), m), lp);
        }
    }
    Ok(out)
}

fn margin_weight(law: &DiscreteMeasure, margins: &MarginVector) -> (Option<BigRational>, f64) {
    let mut ln = 0.0;
    for (&c, &p) in margins.counts().iter().zip(law.weights()) {
        if c > 0 {
            ln += c as f64 * p.ln();
        }
    }
    let exact = law.exact().map(|e| {
        e.iter()
            .zip(margins.counts())
            .fold(BigRational::one(), |acc, (p, &c)| acc * p.pow(c as i32))
    });
    match exact {
        Some(e) if e.is_zero() => (Some(e), f64::NEG_INFINITY),
        Some(e) => {
            let l = ln_ratio(&e);
            (Some(e), l)
        }
        None => (None, ln),
    }
}

/// All vectors of `k` nonnegative integers summing to `n`, lexicographic.
pub fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    fn rec(n: u64, k: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=n {
            prefix.push(v);
            rec(n - v, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Probability that n i.i.d. draws from `μⁿ = margins / n` reproduce `μⁿ`
/// exactly, together with the lower bound `n! / nⁿ`, attained iff every
/// count is one.
pub fn empirical_match_bound(margins: &MarginVector) -> (BigRational, BigRational) {
    let n = margins.n() as u64;
    let nn = BigInt::from(n).pow(n as u32);
    let mut num = BigInt::from(factorial(n));
    let mut den = BigInt::one();
    for &c in margins.counts() {
        num *= BigInt::from(c).pow(c as u32);
        den *= BigInt::from(factorial(c));
    }
    let prob = BigRational::new(num, den * &nn);
    let bound = BigRational::new(BigInt::from(factorial(n)), nn);
    (prob, bound)
}

/// Natural log of a positive big integer, accurate to a few ulps at any size.
pub fn ln_bigint(x: &BigInt) -> f64 {
    ln_biguint(x.magnitude())
}

pub fn ln_biguint(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("64 bits") as f64;
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural log of a nonnegative big rational.
pub fn ln_ratio(r: &BigRational) -> f64 {
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::product;

    fn mv(c: &[u64]) -> MarginVector {
        MarginVector::new(c.to_vec()).unwrap()
    }

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn enumeration_small_cases() {
        let caps = EnumerationCaps::default();
        let one: Vec<_> = enumerate_tables(&mv(&[5]), &caps).unwrap().collect();
        assert_eq!(one, vec![PairTypeTable::new(1, vec![5]).unwrap()]);
        assert_eq!(enumerate_tables(&mv(&[1, 1]), &caps).unwrap().count(), 2);
        let t: Vec<_> = enumerate_tables(&mv(&[2, 1]), &caps).unwrap().collect();
        assert_eq!(t.len(), 2);
        assert!(t.contains(&PairTypeTable::new(2, vec![2, 0, 0, 1]).unwrap()));
        assert!(t.contains(&PairTypeTable::new(2, vec![1, 1, 1, 0]).unwrap()));
    }

    #[test]
    fn enumeration_respects_caps() {
        let caps = EnumerationCaps::default();
        assert!(matches!(
            enumerate_tables(&mv(&[1; 7]), &caps),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            enumerate_tables(&mv(&[61]), &caps),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn enumeration_is_distinct_and_complete() {
        // Number of 3×3 tables with margins (2,2,2) is 21.
        let tables: Vec<_> = TableIter::new(&mv(&[2, 2, 2])).collect();
        let distinct: std::collections::BTreeSet<_> = tables.iter().cloned().collect();
        assert_eq!(tables.len(), distinct.len());
        assert_eq!(tables.len(), 21);
        assert!(tables.iter().all(|t| t.has_margins(&mv(&[2, 2, 2]))));
    }

    #[test]
    fn counts_for_margins_2_1() {
        let m = mv(&[2, 1]);
        let swap = PairTypeTable::new(2, vec![1, 1, 1, 0]).unwrap();
        let diag = PairTypeTable::new(2, vec![2, 0, 0, 1]).unwrap();
        assert_eq!(table_count(&m, &swap).unwrap(), BigUint::from(4u32));
        assert_eq!(table_count(&m, &diag).unwrap(), BigUint::from(2u32));
        let law = exact_law_v(&m, &EnumerationCaps::default()).unwrap();
        assert_eq!(law[&swap].exact, Some(ratio(2, 3)));
        assert_eq!(law[&diag].exact, Some(ratio(1, 3)));
        assert!(table_count(&mv(&[1, 2]), &swap).is_err());
    }

    #[test]
    fn counts_sum_to_factorial() {
        let caps = EnumerationCaps::default();
        for c in [[3u64, 2, 1], [4, 4, 0], [1, 1, 6], [2, 3, 3]] {
            let m = mv(&c);
            let total: BigUint = exact_counts_v(&m, &caps).unwrap().values().sum();
            assert_eq!(total, factorial(m.n() as u64));
        }
    }

    #[test]
    fn histogram_matches_for_a_few_margins() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0, 2.0]).unwrap());
        for c in [[2u64, 1, 0], [1, 1, 1], [2, 2, 1]] {
            let m = mv(&c);
            let s = m.to_sample(a.clone()).unwrap();
            assert_eq!(
                permutation_histogram(&s),
                exact_counts_v(&m, &EnumerationCaps::default()).unwrap()
            );
        }
    }

    #[test]
    fn log_prob_exact_and_float_agree() {
        let law = exact_law_v(&mv(&[3, 4, 2]), &EnumerationCaps::default()).unwrap();
        for lp in law.values() {
            let e = lp.exact.as_ref().unwrap();
            assert!((crate::measure::ratio_to_f64(e) - lp.prob()).abs() < 1e-12);
            assert!(lp.ln <= 0.0);
        }
        let total: BigRational = law.values().map(|l| l.exact.clone().unwrap()).sum();
        assert!(total.is_one());
    }

    #[test]
    fn ln_of_huge_integer() {
        let f = factorial(500);
        let lgamma = statrs::function::gamma::ln_gamma(501.0);
        assert!((ln_biguint(&f) - lgamma).abs() < 1e-9 * lgamma);
        assert_eq!(ln_biguint(&BigUint::zero()), f64::NEG_INFINITY);
    }

    #[test]
    fn nearest_table_greedy() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap());
        let target = PairMeasure::new(a, vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let t = nearest_feasible_table(&target, &mv(&[25, 25])).unwrap();
        assert_eq!(t.cells(), &[23, 2, 2, 23]);
        let t = nearest_feasible_table(&target, &mv(&[50, 50])).unwrap();
        assert_eq!(t.cells(), &[45, 5, 5, 45]);
    }

    #[test]
    fn ld_rate_at_n_one() {
        let a = Arc::new(Alphabet::on_line(&[0.0]).unwrap());
        let mu = DiscreteMeasure::uniform(a);
        let nu = product(&mu, &mu).unwrap();
        let r = ld_rate_exact(&nu, &mu, 1).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn ld_rate_rejects_non_integral_margins() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap());
        let mu = DiscreteMeasure::uniform(a);
        let nu = product(&mu, &mu).unwrap();
        assert!(matches!(ld_rate_exact(&nu, &mu, 3), Err(Error::Domain(_))));
        assert!(matches!(ld_rate_exact(&nu, &mu, 502), Err(Error::Resource(_))));
    }

    #[test]
    fn two_layer_n2_uniform() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap());
        let law = exact_law_two_layer(&DiscreteMeasure::uniform(a), 2).unwrap();
        let key = (mv(&[2, 0]), PairTypeTable::new(2, vec![2, 0, 0, 0]).unwrap());
        assert_eq!(law[&key].exact, Some(ratio(1, 4)));
        let total: BigRational = law.values().map(|l| l.exact.clone().unwrap()).sum();
        assert!(total.is_one());
        assert_eq!(law.len(), 4);
    }

    #[test]
    fn match_bound_examples() {
        let (p, b) = empirical_match_bound(&mv(&[1, 1, 1]));
        assert_eq!(p, ratio(2, 9));
        assert_eq!(p, b);
        let (p, b) = empirical_match_bound(&mv(&[2, 1]));
        // 3 · (2/3)² · (1/3) = 4/9
        assert_eq!(p, ratio(4, 9));
        assert!(p > b);
        let (p, b) = empirical_match_bound(&mv(&[1]));
        assert!(p.is_one() && b.is_one());
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(4, 3).len(), 15);
        assert!(compositions(4, 3).iter().all(|c| c.iter().sum::<u64>() == 4));
    }
}
