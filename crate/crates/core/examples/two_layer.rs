//! Exact joint law of margins and pair-type when the array itself is
//! drawn i.i.d., against the composed rate function.

use std::sync::Arc;

use symld::exact::{exact_law_two_layer, MarginVector, PairTypeTable};
use symld::measure::{Alphabet, DiscreteMeasure, PairMeasure};
use symld::rate::{rate_j, RateOracle};

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let m = DiscreteMeasure::from_counts(alphabet.clone(), &[1, 1])?;
    let s = RateOracle::Sanov(m.clone());
    let skewed = PairMeasure::new(alphabet, vec![0.5, 0.25, 0.25, 0.0])?;
    println!("rate_J of a skewed pair measure: {:.6}", rate_j(&skewed, &s)?);
    for n in [4usize, 8, 12] {
        let law = exact_law_two_layer(&m, n)?;
        let total: f64 = law.values().map(|p| p.prob()).sum();
        let q = n as u64 / 4;
        let table = PairTypeTable::new(2, vec![q; 4])?;
        let p = &law[&(MarginVector::new(table.row_sums())?, table)];
        println!(
            "n = {n:>2}: {} atoms, total mass {total:.12}, -(1/n) ln P(uniform table) = {:.6}",
            law.len(),
            -p.ln / n as f64
        );
    }
    Ok(())
}
