//! Coupling an independent-pairs empirical measure to the nearest and
//! farthest elements of the permutation set of a sample.

use std::sync::Arc;

use symld::measure::{empirical_of, Alphabet, IndexedSample};
use symld::sampler::sample_w;
use symld::transport::{couple_max, couple_min, SymSet};
use symld::RngHandle;

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let x = IndexedSample::from_ids(alphabet, &["a", "a", "b", "b"])?;
    let sym = SymSet::new(x.clone())?;
    for e in sym.elements().unwrap_or_default() {
        println!("element {:?} realised by {} permutations", e.table.cells(), e.multiplicity);
    }
    let mut rng = RngHandle::new(3, 0);
    for _ in 0..4 {
        let w = sample_w(&empirical_of(&x), 4, &mut rng)?;
        let lo = couple_min(&w, &sym, &mut rng)?;
        let hi = couple_max(&w, &sym, &mut rng)?;
        println!(
            "W {:?}: nearest at {:.4} via {:?}, farthest at {:.4}",
            w.atoms(),
            lo.distance,
            lo.representative.images(),
            hi.distance
        );
    }
    Ok(())
}
