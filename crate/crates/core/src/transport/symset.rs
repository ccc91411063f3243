//! The permutation set `𝒱ₙ` of a sample, projections onto it, and the
//! minimal and maximal couplings of an independent-pairs measure with it.


use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use super::assignment::sample_optimal_assignment;
use super::metric::{tilde_metric, PairGround};
use super::ot::wasserstein_atoms;
use crate::error::{domain, Error, Result};
use crate::exact::{enumerate_tables, table_count, EnumerationCaps, MarginVector, PairTypeTable};
use crate::measure::{empirical_of, pair_empirical, IndexedSample, Measure, PairAtoms, PairMeasure};
use crate::permutation::Permutation;
use crate::rng::RngHandle;

/// Elements of `𝒱ₙ` are listed explicitly up to this n.
pub const SYMSET_ENUMERATION_MAX_N: usize = 8;

/// Coupling distances closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// One distinct element of `𝒱ₙ`.
#[derive(Debug, Clone)]
pub struct SymElement {
    pub table: PairTypeTable,
    pub measure: PairMeasure,
    /// A permutation realising the element from the generating sample.
    pub representative: Permutation,
    /// Number of permutations realising it.
    pub multiplicity: BigUint,
    pub atoms: PairAtoms,
}

/// `𝒱ₙ = { pair_empirical(sample, σ) : σ ∈ 𝔖ₙ }`.
#[derive(Debug, Clone)]
pub struct SymSet {
    sample: IndexedSample,
    elements: Option<Vec<SymElement>>,
}

impl SymSet {
    pub fn new(sample: IndexedSample) -> Result<Self> {
        let elements = if sample.len() <= SYMSET_ENUMERATION_MAX_N {
            let margins = MarginVector::of_sample(&sample);
            let caps = EnumerationCaps {
                max_k: sample.alphabet().len(),
                max_n: SYMSET_ENUMERATION_MAX_N,
            };
            let mut out = Vec::new();
            for table in enumerate_tables(&margins, &caps)? {
                let representative = representative_permutation(&sample, &table)?;
                let measure = pair_empirical(&sample, &representative)?;
                out.push(SymElement {
                    multiplicity: table_count(&margins, &table)?,
                    atoms: atoms_of_permutation(&sample, &representative),
                    table,
                    measure,
                    representative,
                });
            }
            Some(out)
        } else {
            None
        };
        Ok(SymSet { sample, elements })
    }

    pub fn sample(&self) -> &IndexedSample {
        &self.sample
    }

    pub fn n(&self) -> usize {
        self.sample.len()
    }

    /// The enumerated elements, present for `n ≤ SYMSET_ENUMERATION_MAX_N`.
    pub fn elements(&self) -> Option<&[SymElement]> {
        self.elements.as_deref()
    }

    /// Membership: `n·nu` integral with both marginals equal to the
    /// sample's empirical measure (every such table is realisable).
    pub fn contains(&self, nu: &PairMeasure) -> bool {
        let Ok(table) = PairTypeTable::of_measure(nu, self.n()) else {
            return false;
        };
        table.has_margins(&MarginVector::of_sample(&self.sample))
    }
}

/// A permutation of `sample` whose pair-type is `table`.
pub fn representative_permutation(
    sample: &IndexedSample,
    table: &PairTypeTable,
) -> Result<Permutation> {
    let margins = MarginVector::of_sample(sample);
    if !table.has_margins(&margins) {
        return domain("table margins differ from the sample counts");
    }
    let k = table.k();
    let mut positions: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..sample.len() {
        positions[sample.at(i)].push(i);
    }
    let mut next_src = vec![0; k];
    let mut next_dst = vec![0; k];
    let mut images = vec![0; sample.len()];
    for a in 0..k {
        for b in 0..k {
            for _ in 0..table.get(a, b) {
                let i = positions[a][next_src[a]];
                next_src[a] += 1;
                images[i] = positions[b][next_dst[b]];
                next_dst[b] += 1;
            }
        }
    }
    Permutation::new(images)
}

fn atoms_of_permutation(sample: &IndexedSample, perm: &Permutation) -> PairAtoms {
    let atoms = (0..sample.len())
        .map(|i| (sample.at(i), sample.at(perm.apply(i))))
        .collect();
    PairAtoms::new(sample.alphabet().clone(), atoms).expect("indices in range")
}

/// Atoms of an equal-weight n-atom pair measure, in row-major cell order.
pub fn atoms_from_measure(w: &PairMeasure, n: usize) -> Result<PairAtoms> {
    let table = PairTypeTable::of_measure(w, n)
        .map_err(|_| Error::Domain(format!("measure is not an equal-weight {n}-atom measure")))?;
    let k = table.k();
    let mut atoms = Vec::with_capacity(n);
    for a in 0..k {
        for b in 0..k {
            atoms.extend(std::iter::repeat_n((a, b), table.get(a, b) as usize));
        }
    }
    PairAtoms::new(w.alphabet().clone(), atoms)
}

/// Assignment of each of `points` to a distinct sample position under `d̃`,
/// chosen uniformly among the optima.
fn assign_side(
    points: &[usize],
    sample: &IndexedSample,
    rng: &mut RngHandle,
) -> Result<(Permutation, f64)> {
    let alphabet = sample.alphabet();
    let cost: Vec<Vec<f64>> = points
        .iter()
        .map(|&u| {
            (0..sample.len())
                .map(|j| tilde_metric(alphabet, u, sample.at(j)))
                .collect()
        })
        .collect();
    let r = sample_optimal_assignment(&cost, rng)?;
    Ok((r.permutation, r.cost))
}

#[derive(Debug, Clone, Serialize)]
pub struct Projection {
    #[serde(skip)]
    pub measure: PairMeasure,
    /// First-coordinate assignment: atom `i` goes to sample position `σ(i)`.
    pub sigma: Permutation,
    pub tau: Permutation,
    /// `τ ∘ σ⁻¹`, so that the output equals `pair_empirical(sample, ·)`.
    pub representative: Permutation,
    pub cost_u: f64,
    pub cost_v: f64,
}

/// Project atoms `(u_i, v_i)` onto `𝒱ₙ`: optimal assignments `σ` of the
/// `u`'s and `τ` of the `v`'s to sample positions under `d̃`, giving
/// `(1/n) Σ δ_{(x_{σ(i)}, x_{τ(i)})}`. Ties are broken uniformly.
pub fn project_to_symset(
    gamma: &PairAtoms,
    sym: &SymSet,
    rng: &mut RngHandle,
) -> Result<Projection> {
    if gamma.len() != sym.n() {
        return domain(format!("{} atoms but the sample has n = {}", gamma.len(), sym.n()));
    }
    if **gamma.alphabet() != **sym.sample().alphabet() {
        return domain("atoms and sample live on different alphabets");
    }
    let us: Vec<usize> = gamma.atoms().iter().map(|p| p.0).collect();
    let vs: Vec<usize> = gamma.atoms().iter().map(|p| p.1).collect();
    let (sigma, cost_u) = assign_side(&us, sym.sample(), rng)?;
    let (tau, cost_v) = assign_side(&vs, sym.sample(), rng)?;
    let representative = tau.compose(&sigma.inverse())?;
    let measure = pair_empirical(sym.sample(), &representative)?;
    Ok(Projection {
        measure,
        sigma,
        tau,
        representative,
        cost_u,
        cost_v,
    })
}

#[derive(Debug, Clone)]
pub struct Coupling {
    pub measure: PairMeasure,
    pub representative: Permutation,
    /// `β_{W,d̃₂,₊}` between the input atoms and `measure`.
    pub distance: f64,
}

/// The element of `𝒱ₙ` nearest to `w` in `β_{W,d̃₂,₊}`, built from two
/// independent uniformly tie-broken assignments of the left and right
/// coordinates of `w` to sample positions.
pub fn couple_min(w: &PairAtoms, sym: &SymSet, rng: &mut RngHandle) -> Result<Coupling> {
    let p = project_to_symset(w, sym, rng)?;
    let atoms = atoms_of_permutation(sym.sample(), &p.representative);
    let distance = wasserstein_atoms(w, &atoms, PairGround::TILDE_SUM)?;
    Ok(Coupling {
        measure: p.measure,
        representative: p.representative,
        distance,
    })
}

/// The element of `𝒱ₙ` farthest from `w`; ties are resolved with weight
/// proportional to the number of permutations realising each element.
/// Needs the enumerated set.
pub fn couple_max(w: &PairAtoms, sym: &SymSet, rng: &mut RngHandle) -> Result<Coupling> {
    if w.len() != sym.n() {
        return domain(format!("{} atoms but the sample has n = {}", w.len(), sym.n()));
    }
    let elements = sym.elements().ok_or_else(|| {
        Error::Resource(format!(
            "maximal coupling needs 𝒱ₙ enumerated (n ≤ {SYMSET_ENUMERATION_MAX_N})"
        ))
    })?;
    let distances = elements
        .iter()
        .map(|e| wasserstein_atoms(w, &e.atoms, PairGround::TILDE_SUM))
        .collect::<Result<Vec<_>>>()?;
    let best = distances.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..elements.len())
        .filter(|&i| distances[i] >= best - TIE_TOLERANCE)
        .collect();
    let weights: Vec<u64> = ties
        .iter()
        .map(|&i| elements[i].multiplicity.to_u64().expect("n ≤ 8"))
        .collect();
    let mut pick = rng.random_range(0..weights.iter().sum::<u64>());
    let mut chosen = ties[0];
    for (&i, &wt) in ties.iter().zip(&weights) {
        if pick < wt {
            chosen = i;
            break;
        }
        pick -= wt;
    }
    let e = &elements[chosen];
    Ok(Coupling {
        measure: e.measure.clone(),
        representative: e.representative.clone(),
        distance: distances[chosen],
    })
}

/// Check that a measure has the marginals of the sample, exactly.
pub fn has_sample_marginals(nu: &PairMeasure, sample: &IndexedSample) -> bool {
    let mu = empirical_of(sample);
    let expect: Option<&[BigRational]> = mu.exact();
    nu.first_marginal().exact() == expect && nu.second_marginal().exact() == expect
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Alphabet;
    use crate::sampler::sample_w;
    use std::sync::Arc;

    fn ab() -> Arc<Alphabet> {
        Arc::new(Alphabet::on_line(&[0.0, 1.0]).unwrap())
    }

    #[test]
    fn enumerated_elements_have_sample_marginals() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0, 2.0]).unwrap());
        let s = IndexedSample::from_ids(a, &["a", "b", "a", "c", "b"]).unwrap();
        let sym = SymSet::new(s.clone()).unwrap();
        let total: BigUint = sym.elements().unwrap().iter().map(|e| e.multiplicity.clone()).sum();
        assert_eq!(total, BigUint::from(120u32));
        for e in sym.elements().unwrap() {
            assert!(has_sample_marginals(&e.measure, &s));
            assert_eq!(pair_empirical(&s, &e.representative).unwrap(), e.measure);
            assert!(sym.contains(&e.measure));
        }
    }

    #[test]
    fn projection_of_member_is_identity() {
        let s = IndexedSample::from_ids(ab(), &["a", "b", "b", "a"]).unwrap();
        let sym = SymSet::new(s.clone()).unwrap();
        let perm = Permutation::new(vec![1, 0, 3, 2]).unwrap();
        let gamma = atoms_of_permutation(&s, &perm);
        let mut rng = RngHandle::new(0, 0);
        let p = project_to_symset(&gamma, &sym, &mut rng).unwrap();
        assert_eq!(p.measure, pair_empirical(&s, &perm).unwrap());
        assert_eq!(p.cost_u + p.cost_v, 0.0);
        let c = couple_min(&gamma, &sym, &mut rng).unwrap();
        assert_eq!(c.distance, 0.0);
    }

    #[test]
    fn projection_ties_split_evenly() {
        // Two copies of (a,a) against sample (a,b): every assignment of
        // either coordinate is optimal, so both elements of 𝒱₂ are equidistant.
        let s = IndexedSample::from_ids(ab(), &["a", "b"]).unwrap();
        let sym = SymSet::new(s).unwrap();
        let gamma = PairAtoms::new(ab(), vec![(0, 0), (0, 0)]).unwrap();
        let mut rng = RngHandle::new(4, 2);
        let mut diag = 0;
        let draws = 20_000;
        for _ in 0..draws {
            let p = project_to_symset(&gamma, &sym, &mut rng).unwrap();
            if p.measure.get(0, 0) > 0.0 {
                diag += 1;
            }
        }
        let f = diag as f64 / draws as f64;
        assert!((f - 0.5).abs() < 4.0 * (0.25 / draws as f64).sqrt(), "{f}");
    }

    #[test]
    fn projection_matches_exhaustive_search() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 0.9, 2.2]).unwrap());
        let s = IndexedSample::from_ids(a.clone(), &["a", "b", "c"]).unwrap();
        let sym = SymSet::new(s.clone()).unwrap();
        let gamma = PairAtoms::new(a.clone(), vec![(2, 0), (1, 1), (0, 2)]).unwrap();
        let mut best = f64::INFINITY;
        for sigma in Permutation::all(3) {
            for tau in Permutation::all(3) {
                let c: f64 = (0..3)
                    .map(|i| {
                        tilde_metric(&a, gamma.atoms()[i].0, s.at(sigma.apply(i)))
                            + tilde_metric(&a, gamma.atoms()[i].1, s.at(tau.apply(i)))
                    })
                    .sum::<f64>()
                    / 3.0;
                best = best.min(c);
            }
        }
        let p = project_to_symset(&gamma, &sym, &mut RngHandle::new(1, 1)).unwrap();
        assert!((p.cost_u + p.cost_v - best).abs() < 1e-12);
    }

    #[test]
    fn min_is_optimal_and_below_max() {
        let a = Arc::new(Alphabet::on_line(&[0.0, 1.0, 2.5]).unwrap());
        let mut rng = RngHandle::new(77, 0);
        for n in 2..=6 {
            let s = IndexedSample::new(a.clone(), (0..n).map(|i| (i * 7 + 1) % 3).collect()).unwrap();
            let sym = SymSet::new(s.clone()).unwrap();
            let mu = empirical_of(&s);
            for _ in 0..10 {
                let w = sample_w(&mu, n, &mut rng).unwrap();
                let lo = couple_min(&w, &sym, &mut rng).unwrap();
                let hi = couple_max(&w, &sym, &mut rng).unwrap();
                for e in sym.elements().unwrap() {
                    let d = wasserstein_atoms(&w, &e.atoms, PairGround::TILDE_SUM).unwrap();
                    assert!(lo.distance <= d + 1e-12);
                    assert!(hi.distance >= d - 1e-12);
                }
                assert!(sym.contains(&lo.measure));
            }
        }
    }

    #[test]
    fn non_atomic_input_rejected() {
        let w = PairMeasure::new(ab(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(matches!(atoms_from_measure(&w, 4), Err(Error::Domain(_))));
        let ok = PairMeasure::from_counts(ab(), &[1, 2, 0, 1]).unwrap();
        assert_eq!(atoms_from_measure(&ok, 4).unwrap().atoms(), &[(0, 0), (0, 1), (0, 1), (1, 1)]);
    }
}
