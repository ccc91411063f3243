//! Seeded generators for permutations, symmetrised pair measures,
//! independent-pairs measures and the two-layer mechanism, plus a
//! chi-square harness comparing the laws of two measure generators.

use std::collections::BTreeMap;

use num_rational::BigRational;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::measure::{pair_empirical, DiscreteMeasure, IndexedSample, Measure, PairAtoms, PairMeasure};
pub use crate::permutation::Permutation;
use crate::rng::RngHandle;
use crate::stats::{chi_square_homogeneity, ChiSquare};

/// Uniform permutation by Fisher-Yates; bounded draws are unbiased.
pub fn sample_permutation(n: usize, rng: &mut RngHandle) -> Result<Permutation> {
    if n == 0 {
        return domain("cannot sample a permutation of an empty set");
    }
    let mut images: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        images.swap(i, j);
    }
    Ok(Permutation::from_vec_unchecked(images))
}

/// `Vⁿ` for a fixed array.
pub fn sample_v(sample: &IndexedSample, rng: &mut RngHandle) -> PairMeasure {
    let sigma = sample_permutation(sample.len(), rng).expect("samples are nonempty");
    pair_empirical(sample, &sigma).expect("lengths agree")
}

/// `Wⁿ`: n independent pairs whose coordinates are independent draws from `mu_n`.
pub fn sample_w(mu_n: &DiscreteMeasure, n: usize, rng: &mut RngHandle) -> Result<PairAtoms> {
    if n == 0 {
        return domain("Wⁿ needs n ≥ 1");
    }
    let law = WeightedIndex::new(mu_n.weights()).map_err(|e| Error::Domain(e.to_string()))?;
    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        let l = law.sample(rng);
        let r = law.sample(rng);
        atoms.push((l, r));
    }
    PairAtoms::new(mu_n.alphabet().clone(), atoms)
}

/// Law of the first-layer array `(X_1, .., X_n)`.
#[derive(Debug, Clone)]
pub enum FirstLayerSampler {
    /// A deterministic array.
    Fixed(IndexedSample),
    /// Independent draws from a common law.
    Iid(DiscreteMeasure),
}

impl FirstLayerSampler {
    pub fn draw(&self, n: usize, rng: &mut RngHandle) -> Result<IndexedSample> {
        match self {
            FirstLayerSampler::Fixed(sample) => {
                if sample.len() != n {
                    return domain(format!(
                        "fixed array has length {}, requested n = {n}",
                        sample.len()
                    ));
                }
                Ok(sample.clone())
            }
            FirstLayerSampler::Iid(law) => {
                if n == 0 {
                    return domain("n must be at least 1");
                }
                let dist =
                    WeightedIndex::new(law.weights()).map_err(|e| Error::Domain(e.to_string()))?;
                let indices = (0..n).map(|_| dist.sample(rng)).collect();
                IndexedSample::new(law.alphabet().clone(), indices)
            }
        }
    }
}

/// `ℒⁿ`: draw the array, then an independent uniform permutation.
pub fn sample_l_two_layer(
    layer1: &FirstLayerSampler,
    n: usize,
    rng: &mut RngHandle,
) -> Result<PairMeasure> {
    let sample = layer1.draw(n, rng)?;
    Ok(sample_v(&sample, rng))
}

/// Outcome of a two-sample chi-square comparison of measure-valued laws.
#[derive(Debug, Clone, Serialize)]
pub struct LawTestReport {
    /// Distinct measures observed, as exact row-major weights rendered `num/den`.
    pub categories: Vec<Vec<String>>,
    pub counts_a: Vec<u64>,
    pub counts_b: Vec<u64>,
    pub test: ChiSquare,
}

/// Draw `draws` measures from each generator (on split child streams 0 and
/// 1 of `rng`) and test whether their laws differ. Every generated measure
/// must carry exact weights, which is what makes the support enumerable.
pub fn law_equality_test<A, B>(
    mut gen_a: A,
    mut gen_b: B,
    draws: usize,
    rng: &RngHandle,
) -> Result<LawTestReport>
where
    A: FnMut(&mut RngHandle) -> Result<PairMeasure>,
    B: FnMut(&mut RngHandle) -> Result<PairMeasure>,
{
    if draws == 0 {
        return domain("law comparison needs at least one draw");
    }
    let mut table: BTreeMap<Vec<BigRational>, (u64, u64)> = BTreeMap::new();
    let mut ra = rng.split(0);
    let mut rb = rng.split(1);
    for _ in 0..draws {
        let a = gen_a(&mut ra)?;
        table.entry(exact_key(&a)?).or_default().0 += 1;
        let b = gen_b(&mut rb)?;
        table.entry(exact_key(&b)?).or_default().1 += 1;
    }
    let categories = table
        .keys()
        .map(|k| k.iter().map(|r| r.to_string()).collect())
        .collect();
    let counts_a: Vec<u64> = table.values().map(|c| c.0).collect();
    let counts_b: Vec<u64> = table.values().map(|c| c.1).collect();
    let test = chi_square_homogeneity(&counts_a, &counts_b)?;
    Ok(LawTestReport {
        categories,
        counts_a,
        counts_b,
        test,
    })
}

fn exact_key(m: &PairMeasure) -> Result<Vec<BigRational>> {
    m.exact()
        .map(|e| e.to_vec())
        .ok_or_else(|| Error::Domain("law comparison needs atomic measures with exact weights".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{empirical_of, marginals, Alphabet};
    use crate::stats::chi_square_gof;
    use std::sync::Arc;

    fn ab() -> Arc<Alphabet> {
        Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap())
    }

    #[test]
    fn n_one_is_identity() {
        let mut rng = RngHandle::new(1, 0);
        assert_eq!(sample_permutation(1, &mut rng).unwrap(), Permutation::identity(1));
        assert!(sample_permutation(0, &mut rng).is_err());
    }

    #[test]
    fn permutation_uniform_n3() {
        let mut rng = RngHandle::new(2024, 0);
        let all: Vec<Permutation> = Permutation::all(3).collect();
        let mut counts = vec![0u64; 6];
        for _ in 0..60_000 {
            let p = sample_permutation(3, &mut rng).unwrap();
            counts[all.iter().position(|q| *q == p).unwrap()] += 1;
        }
        let r = chi_square_gof(&counts, &[1.0 / 6.0; 6]).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
    }

    #[test]
    fn permutation_uniform_up_to_5() {
        for n in 2..=5usize {
            let all: Vec<Permutation> = Permutation::all(n).collect();
            let mut rng = RngHandle::new(99, n as u64);
            let mut counts = vec![0u64; all.len()];
            for _ in 0..100_000 {
                let p = sample_permutation(n, &mut rng).unwrap();
                counts[all.binary_search(&p).unwrap()] += 1;
            }
            let probs = vec![1.0 / all.len() as f64; all.len()];
            let r = chi_square_gof(&counts, &probs).unwrap();
            assert!(r.p_value > 0.001, "n = {n}: {r:?}");
        }
    }

    #[test]
    fn v_marginals_match_empirical() {
        let s = IndexedSample::from_ids(ab(), &["a", "a", "b", "b", "a"]).unwrap();
        let mu = empirical_of(&s);
        let mut rng = RngHandle::new(5, 5);
        for _ in 0..200 {
            let v = sample_v(&s, &mut rng);
            let (m1, m2) = marginals(&v);
            assert_eq!(m1.exact(), mu.exact());
            assert_eq!(m2.exact(), mu.exact());
        }
        let one = IndexedSample::from_ids(ab(), &["b"]).unwrap();
        assert_eq!(sample_v(&one, &mut rng).weights(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn w_cells_follow_product_law() {
        let mu = DiscreteMeasure::new(ab(), vec![0.3, 0.7]).unwrap();
        let mut rng = RngHandle::new(8, 0);
        let mut counts = [0u64; 4];
        let draws = 40_000;
        for _ in 0..draws {
            let w = sample_w(&mu, 1, &mut rng).unwrap();
            let (l, r) = w.atoms()[0];
            counts[l * 2 + r] += 1;
        }
        let probs = [0.09, 0.21, 0.21, 0.49];
        for c in 0..4 {
            let p: f64 = probs[c];
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = counts[c] as f64 / draws as f64;
            assert!((freq - p).abs() < 3.0 * sd + 1e-12, "cell {c}: {freq} vs {p}");
        }
    }

    #[test]
    fn two_layer_marginals_always_equal() {
        let law = DiscreteMeasure::uniform(ab());
        let layer = FirstLayerSampler::Iid(law);
        let mut rng = RngHandle::new(3, 1);
        for _ in 0..500 {
            let l = sample_l_two_layer(&layer, 6, &mut rng).unwrap();
            let (m1, m2) = marginals(&l);
            assert_eq!(m1.exact(), m2.exact());
        }
    }

    #[test]
    fn fixed_layer_length_checked() {
        let s = IndexedSample::from_ids(ab(), &["a", "b"]).unwrap();
        let layer = FirstLayerSampler::Fixed(s);
        let mut rng = RngHandle::new(0, 0);
        assert!(sample_l_two_layer(&layer, 3, &mut rng).is_err());
    }

    #[test]
    fn law_test_requires_exact_measures() {
        let a = ab();
        let gen = |_: &mut RngHandle| PairMeasure::new(a.clone(), vec![0.25; 4]);
        let r = law_equality_test(gen, gen, 10, &RngHandle::new(0, 0));
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
