//! Exact law of the pair-type table under a uniform permutation, checked
//! against brute force over all permutations.

use std::sync::Arc;

use symld::exact::{exact_counts_v, exact_law_v, permutation_histogram, EnumerationCaps, MarginVector};
use symld::measure::Alphabet;

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0, 2.0])?);
    let margins = MarginVector::new(vec![2, 2, 1])?;
    let caps = EnumerationCaps::default();

    let law = exact_law_v(&margins, &caps)?;
    println!("{} pair-type tables for margins {:?}", law.len(), margins.counts());
    for (table, p) in &law {
        let exact = p.exact.as_ref().map(|r| r.to_string()).unwrap_or_default();
        println!("  {:?}  P = {exact}", table.cells());
    }

    let counts = exact_counts_v(&margins, &caps)?;
    let brute = permutation_histogram(&margins.to_sample(alphabet)?);
    println!("matches brute force over 5! permutations: {}", counts == brute);
    Ok(())
}
