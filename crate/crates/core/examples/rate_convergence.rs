//! `-(1/n) log P(nearest table)` approaching the rate function.

use std::sync::Arc;

use symld::exact::ld_rate_exact;
use symld::measure::{Alphabet, DiscreteMeasure, PairMeasure};
use symld::rate::rate_i;

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let mu = DiscreteMeasure::from_counts(alphabet.clone(), &[1, 1])?;
    let target = PairMeasure::new(alphabet, vec![0.45, 0.05, 0.05, 0.45])?;
    let rate = rate_i(&target, &mu)?;
    println!("rate_I(target) = {rate:.6}");
    println!("{:>5} {:>18} {:>12} {:>12}", "n", "table", "-(1/n)lnP", "gap");
    for n in [50, 100, 200, 400] {
        let r = ld_rate_exact(&target, &mu, n)?;
        println!("{n:>5} {:>18} {:>12.6} {:>12.6}", format!("{:?}", r.table.cells()), r.value, (r.value - rate).abs());
    }
    Ok(())
}
