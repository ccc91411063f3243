//! Gauss-Hermite quadrature for expectations under multivariate Gaussians.

use crate::error::{domain, Error, Result};

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ wᵢ f(xᵢ)`, found by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Lower-triangular factor `L` with `L Lᵀ = cov`, tolerating zero-variance
/// directions (pinned coordinates).
fn cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = cov.len();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(cov[i][i].abs())).max(1e-300);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = cov[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s < -1e-10 * scale {
                    return domain("covariance is not positive semidefinite");
                }
                l[i][i] = if s > 1e-14 * scale { s.sqrt() } else { 0.0 };
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(l)
}

/// `E f(X)` for `X ~ N(mean, cov)` on a tensor grid of `nodes` points per
/// nondegenerate direction.
pub fn gaussian_expectation(
    mean: &[f64],
    cov: &[Vec<f64>],
    f: &dyn Fn(&[f64]) -> f64,
    nodes: usize,
) -> Result<f64> {
    let dim = mean.len();
    if cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
        return domain("mean and covariance sizes differ");
    }
    let l = cholesky(cov)?;
    let active: Vec<usize> = (0..dim).filter(|&i| l[i][i] > 0.0).collect();
    let (x, w) = gauss_hermite(nodes);
    let norm = std::f64::consts::PI.powf(-0.5 * active.len() as f64);
    let mut idx = vec![0usize; active.len()];
    let mut total = 0.0;
    let mut point = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    loop {
        let mut weight = norm;
        z.iter_mut().for_each(|v| *v = 0.0);
        for (a, &d) in active.iter().enumerate() {
            z[d] = std::f64::consts::SQRT_2 * x[idx[a]];
            weight *= w[idx[a]];
        }
        for i in 0..dim {
            point[i] = mean[i] + (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>();
        }
        total += weight * f(&point);
        // Odometer over the active directions.
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(total);
            }
            idx[pos] += 1;
            if idx[pos] < nodes {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Successive refinement: 4, 8, 16, … nodes per direction until two
/// consecutive values differ by less than `tol`.
pub fn adaptive_gaussian_expectation(
    mean: &[f64],
    cov: &[Vec<f64>],
    f: &dyn Fn(&[f64]) -> f64,
    tol: f64,
    max_evaluations: usize,
) -> Result<f64> {
    let l = cholesky(cov)?;
    let active = (0..mean.len()).filter(|&i| l[i][i] > 0.0).count() as u32;
    let mut nodes = 4;
    let mut prev = gaussian_expectation(mean, cov, f, nodes)?;
    loop {
        nodes *= 2;
        if active > 0 && (nodes as f64).powi(active as i32) > max_evaluations as f64 {
            return Err(Error::NonConvergence {
                message: format!("quadrature did not settle below {tol} within {max_evaluations} evaluations"),
                residuals: vec![prev],
            });
        }
        let cur = gaussian_expectation(mean, cov, f, nodes)?;
        if (cur - prev).abs() < tol {
            return Ok(cur);
        }
        if active == 0 {
            return Ok(cur);
        }
        if nodes >= 512 {
            return Err(Error::NonConvergence {
                message: format!("quadrature did not settle below {tol}"),
                residuals: vec![prev, cur],
            });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rules() {
        let (x, w) = gauss_hermite(2);
        assert!((x[0] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((w[0] - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
        let (x, w) = gauss_hermite(40);
        let mass: f64 = w.iter().sum();
        assert!((mass - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let second: f64 = x.iter().zip(&w).map(|(x, w)| x * x * w).sum();
        assert!((second - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments() {
        let cov = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let mean = [1.0, -1.0];
        let e = gaussian_expectation(&mean, &cov, &|p| p[0] * p[1], 8).unwrap();
        assert!((e - (0.5 - 1.0)).abs() < 1e-12);
        let mgf = gaussian_expectation(&[0.3], &[vec![0.7]], &|p| p[0].exp(), 30).unwrap();
        assert!((mgf - (0.3f64 + 0.35).exp()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_direction() {
        let cov = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
        let e = gaussian_expectation(&[2.0, 0.0], &cov, &|p| p[0] + p[1] * p[1], 4).unwrap();
        assert!((e - 3.0).abs() < 1e-12);
    }
}
