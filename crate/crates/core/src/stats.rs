//! Goodness-of-fit statistics used by the Monte Carlo checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

fn chi_square_sf(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .sf(statistic)
}

/// Pearson goodness of fit of `observed` counts against cell probabilities.
/// Cells of zero probability must be empty, otherwise the p-value is 0.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() || observed.is_empty() {
        return domain("observed counts and probabilities must have equal nonzero length");
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return domain("no observations");
    }
    let n = total as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            if o > 0 {
                return Ok(ChiSquare {
                    statistic: f64::INFINITY,
                    dof: observed.len() - 1,
                    p_value: 0.0,
                });
            }
            continue;
        }
        let e = n * p;
        statistic += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

/// Two-sample chi-square homogeneity test on a shared list of categories.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquare> {
    if a.len() != b.len() || a.is_empty() {
        return domain("samples must be counted over the same categories");
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return domain("both samples need observations");
    }
    let (na, nb) = (na as f64, nb as f64);
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64;
        if pooled == 0.0 {
            continue;
        }
        let ea = pooled * na / (na + nb);
        let eb = pooled * nb / (na + nb);
        statistic += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KolmogorovSmirnov {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, with the
/// asymptotic Kolmogorov tail and the usual small-sample correction.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KolmogorovSmirnov> {
    if samples.is_empty() {
        return domain("KS test needs samples");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sqrt_n = n.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    Ok(KolmogorovSmirnov {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    })
}

/// `Q(λ) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² λ²)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gof_perfect_fit() {
        let r = chi_square_gof(&[250, 250, 500], &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gof_known_value() {
        // statistic = (60-50)^2/50 + (40-50)^2/50 = 4, dof 1, sf = 0.0455003
        let r = chi_square_gof(&[60, 40], &[0.5, 0.5]).unwrap();
        assert!((r.statistic - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.045_500_263_9).abs() < 1e-8);
    }

    #[test]
    fn gof_impossible_cell() {
        let r = chi_square_gof(&[1, 9], &[0.0, 1.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn homogeneity_identical_samples() {
        let r = chi_square_homogeneity(&[10, 20, 0, 30], &[10, 20, 0, 30]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 2);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.0) = 0.26999967, Q(1.36) ~ 0.0494
        assert!((kolmogorov_tail(1.0) - 0.269_999_67).abs() < 1e-7);
        assert!((kolmogorov_tail(1.36) - 0.049_41).abs() < 1e-4);
    }

    #[test]
    fn ks_on_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((r.statistic - 0.0005).abs() < 1e-12);
        assert!(r.p_value > 0.999);
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0).powi(2)).unwrap();
        assert!(r.p_value < 1e-6);
    }
}
