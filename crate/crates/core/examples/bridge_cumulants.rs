//! Brownian bridges pinned at permuted endpoints: sampling, the cumulant
//! functional for a quadratic test function, and dictionary lower bounds.

use std::sync::Arc;

use statrs::statistics::Statistics;
use symld::bridge::{
    bridge_marginal, cumulant_convergence, endpoint_pairs, l_lower_bound, lambda_n, sample_ensemble,
    BridgeMixture, CylinderFunctional, Diffusion, EmpiricalPaths, TimeGrid,
};
use symld::measure::{product, Alphabet, DiscreteMeasure, PairMeasure};
use symld::sampler::FirstLayerSampler;
use symld::RngHandle;

fn main() -> symld::Result<()> {
    let alphabet = Arc::new(Alphabet::on_line(&[0.0, 1.0])?);
    let diffusion = Diffusion::new(1, 1.0, 1.0)?;
    let grid = TimeGrid::uniform(1.0, 4)?;
    let phi = CylinderFunctional::quadratic(1.0, 0.5)?;
    let mu_pair = PairMeasure::new(alphabet.clone(), vec![0.45, 0.05, 0.05, 0.45])?;

    for row in cumulant_convergence(&mu_pair, &diffusion, &phi, &[8, 32, 128])? {
        println!("n = {:>3}: lambda_n = {:.8}  limit = {:.8}  gap = {:.2e}", row.n, row.lambda_n, row.lambda, row.gap);
    }
    let mut rng = RngHandle::new(1, 0);
    let est = lambda_n(&endpoint_pairs(&mu_pair, 8)?, &diffusion, &grid, &phi, 10_000, &mut rng)?;
    println!("quadrature {:.6} vs Monte Carlo {:.6} ± {:.6}", est.exact, est.mc, est.std_error);

    let uniform = DiscreteMeasure::uniform(alphabet);
    let layer = FirstLayerSampler::Iid(uniform.clone());
    let ensemble = sample_ensemble(&layer, &diffusion, &grid, 2_000, &mut rng)?;
    let spec = diffusion.bridge(&[0.0], &[1.0])?;
    let mids: Vec<f64> = ensemble
        .paths
        .iter()
        .zip(ensemble.pair_atoms().atoms())
        .filter(|(_, &(a, b))| (a, b) == (0, 1))
        .map(|(p, _)| p[2][0])
        .collect();
    let (mean, var) = bridge_marginal(&spec, 0.5)?;
    println!(
        "midpoints of a->b bridges: mean {:.3} (exact {:.3}), variance {:.3} (exact {:.3})",
        mids.as_slice().mean(),
        mean[0],
        mids.as_slice().variance(),
        var
    );

    let dictionary = vec![
        CylinderFunctional::zero(),
        phi.clone(),
        CylinderFunctional::linear(vec![2.0], 0.5, 5.0)?,
    ];
    let mixture = BridgeMixture {
        endpoints: product(&uniform, &uniform)?,
        diffusion,
    };
    println!("L lower bound at the bridge mixture: {:.3e}", l_lower_bound(&mixture, &diffusion, &dictionary)?.value);
    let empirical = EmpiricalPaths::new(ensemble);
    println!("L lower bound at the simulated ensemble: {:.3e}", l_lower_bound(&empirical, &diffusion, &dictionary)?.value);
    Ok(())
}
