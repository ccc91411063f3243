//! Seeded draws of the symmetrised, independent-pairs and two-layer
//! measures, and a chi-square comparison of two generators.

use std::sync::Arc;

use symld::exact::PairTypeTable;
use symld::measure::{empirical_of, Alphabet, DiscreteMeasure, IndexedSample};
use symld::sampler::{law_equality_test, sample_l_two_layer, sample_v, sample_w, FirstLayerSampler};
use symld::RngHandle;

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let x = IndexedSample::from_ids(alphabet.clone(), &["a", "a", "b", "b", "b"])?;
    let mut rng = RngHandle::new(7, 0);

    let v = sample_v(&x, &mut rng);
    println!("V  table {:?}", PairTypeTable::of_measure(&v, 5)?.cells());
    let w = sample_w(&empirical_of(&x), 5, &mut rng)?;
    println!("W  atoms {:?}", w.atoms());
    let layer = FirstLayerSampler::Iid(DiscreteMeasure::uniform(alphabet));
    let l = sample_l_two_layer(&layer, 5, &mut rng)?;
    println!("L  table {:?}", PairTypeTable::of_measure(&l, 5)?.cells());

    // Two independent streams of the same generator should agree in law.
    let report = law_equality_test(
        |r| Ok(sample_v(&x, r)),
        |r| Ok(sample_v(&x, r)),
        20_000,
        &RngHandle::new(8, 0),
    )?;
    println!("chi-square {:.3} on {} dof, p = {:.3}", report.test.statistic, report.test.dof, report.test.p_value);
    Ok(())
}
