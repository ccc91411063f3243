//! Invariants checked on random inputs.

use std::sync::Arc;

use num_bigint::BigUint;
use proptest::prelude::*;
use symld::exact::{exact_counts_v, factorial, table_count, EnumerationCaps, MarginVector, PairTypeTable};
use symld::measure::{product, relative_entropy, Alphabet, DiscreteMeasure, PairMeasure};
use symld::permutation::Permutation;
use symld::rate::{entropy_project, rate_i, rate_j, ConstraintSet, Observable, RateOracle};
use symld::rng::RngHandle;
use symld::sampler::{sample_permutation, sample_v};
use symld::transport::{bl_distance_pairs, solve_assignment, wasserstein_pairs, wasserstein_pairs_lp, PairGround};

fn alphabet(coords: &[f64]) -> Arc<Alphabet> {
    Arc::new(Alphabet::on_line(coords).unwrap())
}

fn coords(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..5.0, k).prop_filter("distinct points", |c| {
        let mut s = c.clone();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[1] - w[0] > 1e-3)
    })
}

fn weights(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|w| {
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    })
}

fn margins() -> impl Strategy<Value = Vec<u64>> {
    (1usize..=3).prop_flat_map(|k| prop::collection::vec(0u64..=3, k)).prop_filter("n ≥ 1", |c| c.iter().sum::<u64>() >= 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_counts_sum_to_n_factorial(counts in margins()) {
        let m = MarginVector::new(counts).unwrap();
        let law = exact_counts_v(&m, &EnumerationCaps::default()).unwrap();
        let total: BigUint = law.values().sum();
        prop_assert_eq!(total, factorial(m.n() as u64));
        for table in law.keys() {
            prop_assert_eq!(table.row_sums(), m.counts().to_vec());
            prop_assert_eq!(table.col_sums(), m.counts().to_vec());
        }
    }

    #[test]
    fn transposed_tables_are_equally_likely(counts in margins()) {
        let m = MarginVector::new(counts).unwrap();
        let k = m.k();
        for (table, c) in exact_counts_v(&m, &EnumerationCaps::default()).unwrap() {
            let t: Vec<u64> = (0..k * k).map(|x| table.get(x % k, x / k)).collect();
            let t = PairTypeTable::new(k, t).unwrap();
            prop_assert_eq!(table_count(&m, &t).unwrap(), c);
        }
    }

    #[test]
    fn permutations_invert(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = RngHandle::new(seed, 0);
        let p = sample_permutation(n, &mut rng).unwrap();
        prop_assert_eq!(p.compose(&p.inverse()).unwrap(), Permutation::identity(n));
    }

    #[test]
    fn sampled_v_keeps_sample_marginals(seed in any::<u64>(), counts in prop::collection::vec(1u64..4, 2..4)) {
        let k = counts.len();
        let a = alphabet(&(0..k).map(|i| i as f64).collect::<Vec<_>>());
        let sample = MarginVector::new(counts.clone()).unwrap().to_sample(a.clone()).unwrap();
        let v = sample_v(&sample, &mut RngHandle::new(seed, 1));
        let mu = DiscreteMeasure::from_counts(a, &counts).unwrap();
        prop_assert!(v.first_marginal().approx_eq(&mu, 1e-12));
        prop_assert!(v.second_marginal().approx_eq(&mu, 1e-12));
        prop_assert!(rate_i(&v, &mu).unwrap().is_finite());
    }

    #[test]
    fn rate_i_is_rate_j_with_indicator((c, mu_w, nu_w) in (2usize..=3).prop_flat_map(|k| (coords(k), weights(k), weights(k * k)))) {
        let a = alphabet(&c);
        let mu = DiscreteMeasure::new(a.clone(), mu_w).unwrap();
        let nu = PairMeasure::new(a, nu_w).unwrap();
        let i = rate_i(&nu, &mu).unwrap();
        prop_assert_eq!(i.to_bits(), rate_j(&nu, &RateOracle::Indicator(mu.clone())).unwrap().to_bits());
        prop_assert!(i >= 0.0);
        let pp = product(&mu, &mu).unwrap();
        prop_assert!(rate_i(&pp, &mu).unwrap().abs() < 1e-12);
        prop_assert!(rate_j(&pp, &RateOracle::Sanov(mu)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pair_wasserstein_is_a_metric((c, x, y, z) in (2usize..=3).prop_flat_map(|k| (coords(k), weights(k * k), weights(k * k), weights(k * k)))) {
        let a = alphabet(&c);
        let (x, y, z) = (
            PairMeasure::new(a.clone(), x).unwrap(),
            PairMeasure::new(a.clone(), y).unwrap(),
            PairMeasure::new(a, z).unwrap(),
        );
        let g = PairGround::TILDE_SUM;
        let w = |p: &PairMeasure, q: &PairMeasure| wasserstein_pairs(p, q, g).unwrap().0;
        prop_assert!(w(&x, &x).abs() < 1e-9);
        prop_assert!((w(&x, &y) - w(&y, &x)).abs() < 1e-9);
        prop_assert!(w(&x, &z) <= w(&x, &y) + w(&y, &z) + 1e-9);
        prop_assert!((w(&x, &y) - wasserstein_pairs_lp(&x, &y, g).unwrap().0).abs() < 1e-9);
        // Bounded-Lipschitz test functions are 1-Lipschitz.
        prop_assert!(bl_distance_pairs(&x, &y, g).unwrap() <= w(&x, &y) + 1e-9);
    }

    #[test]
    fn assignment_matches_brute_force(cost in (1usize..=6).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n))) {
        let n = cost.len();
        let best = Permutation::all(n)
            .map(|p| (0..n).map(|i| cost[i][p.apply(i)]).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        prop_assert!((solve_assignment(&cost).unwrap().cost - best).abs() < 1e-12);
    }

    #[test]
    fn projection_beats_feasible_points((mu_w, theta, g) in (2usize..=3).prop_flat_map(|k| (weights(k), 0.0f64..1.0, prop::collection::vec(-1.0f64..1.0, k * k)))) {
        let k = mu_w.len();
        let a = alphabet(&(0..k).map(|i| i as f64).collect::<Vec<_>>());
        let mu = DiscreteMeasure::new(a.clone(), mu_w.clone()).unwrap();
        let reference = product(&mu, &mu).unwrap();
        // θ·diag(μ) + (1−θ)·μ⊗μ has marginals μ.
        let nu_w: Vec<f64> = (0..k * k)
            .map(|c| {
                let (i, j) = (c / k, c % k);
                theta * if i == j { mu_w[i] } else { 0.0 } + (1.0 - theta) * mu_w[i] * mu_w[j]
            })
            .collect();
        let target: f64 = nu_w.iter().zip(&g).map(|(p, x)| p * x).sum();
        let nu = PairMeasure::new(a, nu_w).unwrap();
        let constraints = ConstraintSet {
            marginal: Some(mu),
            observables: vec![Observable { g, target }],
            ball: None,
        };
        let p = entropy_project(&reference, &constraints).unwrap();
        prop_assert!(p.residuals.marginal_l1 < 1e-10);
        prop_assert!(p.residuals.observable_gaps[0].abs() < 1e-8);
        prop_assert!(p.value <= relative_entropy(&nu, &reference).unwrap() + 1e-8);
        prop_assert!(p.dual_history.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn split_streams_are_reproducible(seed in any::<u64>(), child in any::<u64>()) {
        use rand::RngCore;
        let root = RngHandle::new(seed, 0);
        let (mut a, mut b) = (root.split(child), root.split(child));
        prop_assert_eq!(a.next_u64(), b.next_u64());
        let mut c = root.split(child.wrapping_add(1));
        let mut a2 = root.split(child);
        prop_assert_ne!(a2.next_u64(), c.next_u64());
    }
}
