//! Acceptance suites: oracle, coupling, rate and bridge checks with
//! measured values, wall-clock budgets and reproducibility fingerprints.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bridge::{
    bridge_marginal, cumulant_convergence, endpoint_pairs, lambda_n, sample_bridge_path,
    CylinderFunctional, Diffusion, TimeGrid,
};
use crate::error::{Error, Result};
use crate::exact::{
    compositions, empirical_match_bound, exact_counts_v, exact_law_two_layer, ld_rate_exact,
    permutation_histogram, EnumerationCaps, MarginVector, PairTypeTable,
};
use crate::measure::{empirical_of, product, Alphabet, DiscreteMeasure, Measure, PairAtoms, PairMeasure, Point};
use crate::rate::{entropy_project, rate_i, rate_j, ConstraintSet, Observable, RateOracle};
use crate::rng::RngHandle;
use crate::sampler::{law_equality_test, sample_v, sample_w};
use crate::stats::ks_test;
use crate::transport::{
    couple_max, couple_min, solve_assignment, transport_program, wasserstein_pairs, PairGround,
    SymSet,
};

/// Rejection level of every statistical check.
pub const SIGNIFICANCE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Oracle,
    Coupling,
    Rate,
    Bridge,
    All,
}

impl Suite {
    pub const UNITS: [Suite; 4] = [Suite::Oracle, Suite::Coupling, Suite::Rate, Suite::Bridge];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Oracle => "oracle",
            Suite::Coupling => "coupling",
            Suite::Rate => "rate",
            Suite::Bridge => "bridge",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Suite::Oracle),
            "coupling" => Ok(Suite::Coupling),
            "rate" => Ok(Suite::Rate),
            "bridge" => Ok(Suite::Bridge),
            "all" => Ok(Suite::All),
            other => Err(Error::Domain(format!("unknown suite {other:?}"))),
        }
    }
}

/// Deliberate corruptions used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// Add one to the first table count of the first margin vector checked.
    FlipTableCount,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl VerifyOptions {
    pub fn seeded(seed: u64) -> Self {
        VerifyOptions { seed, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: String,
    pub title: String,
    /// Numeric checks and budget together.
    pub pass: bool,
    pub checks_pass: bool,
    pub within_budget: bool,
    pub budget_ms: u128,
    pub elapsed_ms: u128,
    pub measured: Vec<Measurement>,
    pub detail: String,
}

impl CriterionReport {
    /// One human-readable line.
    pub fn line(&self) -> String {
        format!(
            "criterion {:<3} {} {} ({} ms) {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.title,
            self.elapsed_ms,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub pass: bool,
    pub elapsed_ms: u128,
    pub criteria: Vec<CriterionReport>,
    /// SHA-256 over everything except timings.
    pub fingerprint: String,
}

fn fingerprint(criteria: &[CriterionReport]) -> String {
    let mut h = Sha256::new();
    for c in criteria {
        h.update(c.id.as_bytes());
        h.update([u8::from(c.checks_pass)]);
        for m in &c.measured {
            h.update(m.name.as_bytes());
            h.update(m.value.to_bits().to_le_bytes());
        }
        h.update(c.detail.as_bytes());
    }
    format!("{:x}", h.finalize())
}

struct Check {
    measured: Vec<Measurement>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            measured: Vec::new(),
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn record(&mut self, name: impl Into<String>, value: f64) {
        self.measured.push(Measurement {
            name: name.into(),
            value,
        });
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

fn run(id: &str, title: &str, budget_s: u64, body: impl FnOnce(&mut Check) -> Result<()>) -> CriterionReport {
    let start = Instant::now();
    let mut check = Check::new();
    if let Err(e) = body(&mut check) {
        check.failures.push(format!("error: {e}"));
    }
    let elapsed_ms = start.elapsed().as_millis();
    let budget_ms = u128::from(budget_s) * 1000;
    let checks_pass = check.failures.is_empty();
    let within_budget = elapsed_ms < budget_ms;
    let mut detail = if checks_pass {
        check.notes.join("; ")
    } else {
        format!("failed: {}", check.failures.join("; "))
    };
    if detail.len() > 400 {
        detail.truncate(400);
        detail.push('…');
    }
    CriterionReport {
        id: id.into(),
        title: title.into(),
        pass: checks_pass && within_budget,
        checks_pass,
        within_budget,
        budget_ms,
        elapsed_ms,
        measured: check.measured,
        detail,
    }
}

fn line_alphabet(k: usize) -> Arc<Alphabet> {
    let coords: Vec<f64> = (0..k).map(|i| i as f64).collect();
    Arc::new(Alphabet::on_line(&coords).expect("distinct points"))
}

fn uniform2() -> DiscreteMeasure {
    DiscreteMeasure::from_counts(line_alphabet(2), &[1, 1]).expect("valid counts")
}

/// `[[t/2, (1−t)/2], [(1−t)/2, t/2]]`.
fn diagonal_tilt(t: f64) -> PairMeasure {
    let (d, o) = (t / 2.0, (1.0 - t) / 2.0);
    PairMeasure::new(line_alphabet(2), vec![d, o, o, d]).expect("probability vector")
}

fn tilt_rate(t: f64) -> f64 {
    let xlx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    std::f64::consts::LN_2 + xlx(t) + xlx(1.0 - t)
}

/// Exact law of the pair-type against brute force over all permutations.
pub fn criterion_1(opts: &VerifyOptions) -> CriterionReport {
    run("1", "exact law of V equals the permutation histogram (k ≤ 3, n ≤ 8)", 60, |c| {
        let caps = EnumerationCaps::default();
        let mut checked = 0usize;
        let mut mismatched = 0usize;
        let mut faulted = false;
        for k in 1..=3 {
            let alphabet = line_alphabet(k);
            for n in 1..=8u64 {
                for counts in compositions(n, k) {
                    let margins = MarginVector::new(counts)?;
                    let mut law: BTreeMap<PairTypeTable, BigUint> = exact_counts_v(&margins, &caps)?;
                    if opts.fault == Some(Fault::FlipTableCount) && !faulted {
                        if let Some(v) = law.values_mut().next() {
                            *v += 1u32;
                            faulted = true;
                        }
                    }
                    let brute = permutation_histogram(&margins.to_sample(alphabet.clone())?);
                    checked += 1;
                    if law != brute {
                        mismatched += 1;
                    }
                }
            }
        }
        c.record("margin_vectors", checked as f64);
        c.record("mismatches", mismatched as f64);
        c.require(mismatched == 0, format!("{mismatched} of {checked} margin vectors disagree"));
        c.notes.push(format!("{checked} margin vectors agree exactly"));
        Ok(())
    })
}

/// Rate convergence of the exact finite-n probability at the nearest table.
pub fn criterion_2(_opts: &VerifyOptions) -> CriterionReport {
    run("2", "-(1/n) log P(nearest table) approaches rate_I", 10, |c| {
        let mu = uniform2();
        let targets = [("product", product(&mu, &mu)?), ("tilt0.9", diagonal_tilt(0.9))];
        for (label, target) in &targets {
            let rate = rate_i(target, &mu)?;
            let mut prev = f64::INFINITY;
            for n in [50usize, 100, 200, 400] {
                let r = ld_rate_exact(target, &mu, n)?;
                let gap = (r.value - rate).abs();
                let envelope = 9.0 * ((n + 1) as f64).ln() / n as f64;
                c.record(format!("{label}_gap_n{n}"), gap);
                c.require(gap < prev, format!("{label}: gap at n = {n} did not decrease"));
                c.require(gap <= envelope, format!("{label}: gap {gap} above envelope {envelope} at n = {n}"));
                prev = gap;
            }
        }
        c.notes.push("gaps decrease inside the Stirling envelope".into());
        Ok(())
    })
}

const COUPLING_DRAWS: usize = 100_000;

fn coupling_setup() -> Result<(SymSet, DiscreteMeasure)> {
    let sample = MarginVector::new(vec![2, 2])?.to_sample(line_alphabet(2))?;
    let mu_n = empirical_of(&sample);
    Ok((SymSet::new(sample)?, mu_n))
}

fn coupling_law(
    id: &str,
    title: &str,
    opts: &VerifyOptions,
    stream: u64,
    coupling: fn(&PairAtoms, &SymSet, &mut RngHandle) -> Result<crate::transport::Coupling>,
) -> CriterionReport {
    run(id, title, 120, |c| {
        let (sym, mu_n) = coupling_setup()?;
        let n = sym.n();
        let rng = RngHandle::new(opts.seed, stream);
        let report = law_equality_test(
            |r| {
                let w = sample_w(&mu_n, n, r)?;
                Ok(coupling(&w, &sym, r)?.measure)
            },
            |r| Ok(sample_v(sym.sample(), r)),
            COUPLING_DRAWS,
            &rng,
        )?;
        c.record("chi_square", report.test.statistic);
        c.record("p_value", report.test.p_value);
        for (cat, (a, b)) in report.categories.iter().zip(report.counts_a.iter().zip(&report.counts_b)) {
            c.record(format!("coupled[{}]", cat.join(",")), *a as f64);
            c.record(format!("direct[{}]", cat.join(",")), *b as f64);
        }
        c.require(
            !report.test.rejects(SIGNIFICANCE),
            format!("chi-square p = {:.3e} rejects at {SIGNIFICANCE}", report.test.p_value),
        );
        c.notes.push(format!("p = {:.4}", report.test.p_value));
        Ok(())
    })
}

/// Law of the minimal coupling of `Wⁿ` onto `𝒱ₙ` against `Vⁿ`.
pub fn criterion_3a(opts: &VerifyOptions) -> CriterionReport {
    coupling_law("3a", "couple_min(W) has the law of V (n = 4, k = 2)", opts, 31, couple_min)
}

/// Law of the maximal coupling against `Vⁿ`.
pub fn criterion_3b(opts: &VerifyOptions) -> CriterionReport {
    coupling_law("3b", "couple_max(W) has the law of V (n = 4, k = 2)", opts, 32, couple_max)
}

/// `P(μⁿ reproduced) = n!/nⁿ` for distinct points, strictly more with ties.
pub fn criterion_4(_opts: &VerifyOptions) -> CriterionReport {
    run("4", "P(empirical = μⁿ) vs n!/nⁿ, exact", 5, |c| {
        let mut ties = 0usize;
        for n in 1..=7u64 {
            let (p, bound) = empirical_match_bound(&MarginVector::new(vec![1; n as usize])?);
            c.require(p == bound, format!("distinct n = {n}: {p} ≠ {bound}"));
            c.record(format!("distinct_n{n}"), crate::exact::ln_ratio(&p).exp());
            for k in 1..n as usize {
                for counts in compositions(n, k) {
                    if counts.contains(&0) {
                        continue;
                    }
                    let (p, bound) = empirical_match_bound(&MarginVector::new(counts.clone())?);
                    ties += 1;
                    c.require(p > bound, format!("ties {counts:?}: {p} not above {bound}"));
                }
            }
        }
        let (p3, _) = empirical_match_bound(&MarginVector::new(vec![1, 1, 1])?);
        c.require(p3.to_string() == "2/9", format!("n = 3 gives {p3}"));
        c.record("tied_margin_vectors", ties as f64);
        c.notes.push(format!("equality for distinct points, strict for {ties} tied vectors"));
        Ok(())
    })
}

/// Two-layer exact law along a fixed feasible target sequence.
pub fn criterion_5(_opts: &VerifyOptions) -> CriterionReport {
    run("5", "two-layer -(1/n) log P approaches rate_J", 60, |c| {
        let m = uniform2();
        let target = product(&m, &m)?;
        let rate = rate_j(&target, &RateOracle::Sanov(m.clone()))?;
        let mut prev = f64::INFINITY;
        for n in [4usize, 8, 12] {
            let law = exact_law_two_layer(&m, n)?;
            let q = n as u64 / 4;
            let table = PairTypeTable::new(2, vec![q; 4])?;
            let key = (MarginVector::new(table.row_sums())?, table);
            let lp = law
                .get(&key)
                .ok_or_else(|| Error::Domain(format!("target table missing at n = {n}")))?;
            let gap = (-lp.ln / n as f64 - rate).abs();
            c.record(format!("gap_n{n}"), gap);
            c.require(gap < prev, format!("gap at n = {n} did not decrease"));
            prev = gap;
        }
        c.notes.push("gap strictly decreasing".into());
        Ok(())
    })
}

/// Diagonal-mass projection against its closed form and a grid oracle.
pub fn criterion_6(_opts: &VerifyOptions) -> CriterionReport {
    run("6", "entropy projection on the k = 2 diagonal family", 5, |c| {
        let mu = uniform2();
        let reference = product(&mu, &mu)?;
        let diag = vec![1.0, 0.0, 0.0, 1.0];
        for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let constraints = ConstraintSet {
                marginal: Some(mu.clone()),
                observables: vec![Observable {
                    g: diag.clone(),
                    target: t,
                }],
                ball: None,
            };
            let p = entropy_project(&reference, &constraints)?;
            let closed = diagonal_tilt(t);
            let cell_err = p
                .minimizer
                .weights()
                .iter()
                .zip(closed.weights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let value_err = (p.value - tilt_rate(t)).abs();
            // Grid oracle: the marginal family [[s, ½−s], [½−s, s]] at step 1e-3,
            // keeping the points that meet the diagonal constraint.
            let mut grid_best = f64::INFINITY;
            for i in 0..=500 {
                let s = i as f64 * 1e-3;
                if (2.0 * s - t).abs() <= 1e-9 {
                    let nu = PairMeasure::new(mu.alphabet().clone(), vec![s, 0.5 - s, 0.5 - s, s])?;
                    grid_best = grid_best.min(rate_i(&nu, &mu)?);
                }
            }
            c.record(format!("t{t}_cell_error"), cell_err);
            c.record(format!("t{t}_value_error"), value_err);
            c.record(format!("t{t}_marginal_residual"), p.residuals.marginal_l1);
            c.record(format!("t{t}_grid_value"), grid_best);
            c.require(cell_err <= 1e-8, format!("t = {t}: minimizer off by {cell_err}"));
            c.require(value_err <= 1e-8, format!("t = {t}: value off by {value_err}"));
            c.require(
                p.residuals.marginal_l1 < 1e-10,
                format!("t = {t}: marginal residual {}", p.residuals.marginal_l1),
            );
            c.require(p.value <= grid_best + 1e-12, format!("t = {t}: value above grid oracle"));
            c.require(
                p.dual_history.windows(2).all(|w| w[1] >= w[0] - 1e-12),
                format!("t = {t}: dual objective decreased"),
            );
        }
        c.notes.push("closed form, residuals and grid oracle all met".into());
        Ok(())
    })
}

fn random_pair_measure(alphabet: &Arc<Alphabet>, rng: &mut RngHandle) -> Result<PairMeasure> {
    let k = alphabet.len();
    let mut w: Vec<f64> = (0..k * k).map(|_| rng.random::<f64>()).collect();
    // Sparsify now and then so boundary cases appear.
    for x in w.iter_mut() {
        if rng.random::<f64>() < 0.2 {
            *x = 0.0;
        }
    }
    if w.iter().all(|x| *x == 0.0) {
        w[0] = 1.0;
    }
    let total: f64 = w.iter().sum();
    PairMeasure::new(alphabet.clone(), w.into_iter().map(|x| x / total).collect())
}

/// Assignment against the transport program, and metric axioms.
pub fn criterion_7(opts: &VerifyOptions) -> CriterionReport {
    run("7", "assignment = transport program; β_W metric axioms", 30, |c| {
        let mut rng = RngHandle::new(opts.seed, 7);
        let mut worst_opt = 0.0f64;
        for _ in 0..200 {
            let n = rng.random_range(1..=8usize);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect();
            let a = solve_assignment(&cost)?;
            let uniform = vec![1.0 / n as f64; n];
            let (lp, _) = transport_program(&uniform, &uniform, &cost)?;
            worst_opt = worst_opt.max((a.cost - lp).abs());
        }
        c.record("max_assignment_vs_lp", worst_opt);
        c.require(worst_opt <= 1e-9, format!("assignment and LP differ by {worst_opt}"));
        let mut worst_axiom = 0.0f64;
        for _ in 0..200 {
            let k = rng.random_range(2..=3usize);
            let points = (0..k)
                .map(|i| Point::new(format!("p{i}"), vec![rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0]))
                .collect();
            let alphabet = Arc::new(Alphabet::new(points)?);
            let (a, b, d) = (
                random_pair_measure(&alphabet, &mut rng)?,
                random_pair_measure(&alphabet, &mut rng)?,
                random_pair_measure(&alphabet, &mut rng)?,
            );
            let w = |x: &PairMeasure, y: &PairMeasure| wasserstein_pairs(x, y, PairGround::TILDE_SUM).map(|r| r.0);
            let (ab, ba, bd, ad, aa) = (w(&a, &b)?, w(&b, &a)?, w(&b, &d)?, w(&a, &d)?, w(&a, &a)?);
            worst_axiom = worst_axiom
                .max(aa.abs())
                .max((ab - ba).abs())
                .max(ad - ab - bd)
                .max(-ab);
        }
        c.record("max_axiom_violation", worst_axiom);
        c.require(worst_axiom <= 1e-9, format!("metric axioms violated by {worst_axiom}"));
        c.notes.push(format!("LP gap {worst_opt:.1e}, axiom slack {worst_axiom:.1e}"));
        Ok(())
    })
}

/// Paths per endpoint pair in the Monte Carlo cumulant check.
const BRIDGE_DRAWS: usize = 10_000;

/// Cumulant limit, Monte Carlo agreement and bridge marginals.
pub fn criterion_8(opts: &VerifyOptions) -> CriterionReport {
    run("8", "cumulant limit, MC agreement and bridge KS test", 120, |c| {
        let diffusion = Diffusion::new(1, 1.0, 1.0)?;
        let grid = TimeGrid::uniform(1.0, 4)?;
        let phi = CylinderFunctional::quadratic(1.0, 0.5)?;
        // Uniform endpoint marginals with mass 0.9 on the diagonal, so that
        // the finite-n endpoint tables differ from the limit.
        let mu_pair = diagonal_tilt(0.9);
        let rows = cumulant_convergence(&mu_pair, &diffusion, &phi, &[8, 32, 128])?;
        let mut prev = f64::INFINITY;
        for r in &rows {
            c.record(format!("gap_n{}", r.n), r.gap);
            c.record(format!("defect_n{}", r.n), r.defect);
            c.require(r.gap < prev, format!("gap at n = {} did not decrease", r.n));
            prev = r.gap;
        }
        let mut rng = RngHandle::new(opts.seed, 8);
        let pairs = endpoint_pairs(&mu_pair, 8)?;
        let est = lambda_n(&pairs, &diffusion, &grid, &phi, BRIDGE_DRAWS, &mut rng)?;
        c.record("lambda_exact", est.exact);
        c.record("lambda_mc", est.mc);
        c.record("lambda_std_error", est.std_error);
        c.require(est.z_score <= 3.0, format!("MC off by {:.2} standard errors", est.z_score));
        let spec = diffusion.bridge(&[0.0], &[1.0])?;
        let (mean, var) = bridge_marginal(&spec, 0.5)?;
        let g = grid.index_of(0.5)?;
        let mut mids = Vec::with_capacity(BRIDGE_DRAWS);
        for _ in 0..BRIDGE_DRAWS {
            mids.push(sample_bridge_path(&spec, &grid, &mut rng)?[g][0]);
        }
        let normal = Normal::new(mean[0], var.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
        let ks = ks_test(&mids, |x| normal.cdf(x))?;
        c.record("ks_statistic", ks.statistic);
        c.record("ks_p_value", ks.p_value);
        c.require(ks.p_value >= SIGNIFICANCE, format!("KS p = {:.3e}", ks.p_value));
        c.notes.push(format!("z = {:.2}, KS p = {:.3}", est.z_score, ks.p_value));
        Ok(())
    })
}

fn unit_criteria(suite: Suite, opts: &VerifyOptions) -> Vec<CriterionReport> {
    match suite {
        Suite::Oracle => vec![criterion_1(opts), criterion_2(opts), criterion_4(opts), criterion_5(opts)],
        Suite::Coupling => vec![criterion_3a(opts), criterion_3b(opts), criterion_7(opts)],
        Suite::Rate => vec![criterion_6(opts)],
        Suite::Bridge => vec![criterion_8(opts)],
        Suite::All => Suite::UNITS.iter().flat_map(|s| unit_criteria(*s, opts)).collect(),
    }
}

/// Run a suite. Failures are report content, not errors. `All` runs every
/// unit suite twice and appends the reproducibility criterion.
pub fn verify(suite: Suite, opts: &VerifyOptions) -> SuiteReport {
    let start = Instant::now();
    let mut criteria = if suite == Suite::All {
        let (reports, c9) = reproducibility(opts);
        let mut all: Vec<CriterionReport> = reports.into_iter().flat_map(|r| r.criteria).collect();
        all.push(c9);
        all
    } else {
        unit_criteria(suite, opts)
    };
    criteria.sort_by(|a, b| a.id.cmp(&b.id));
    SuiteReport {
        suite,
        seed: opts.seed,
        pass: criteria.iter().all(|c| c.pass),
        elapsed_ms: start.elapsed().as_millis(),
        fingerprint: fingerprint(&criteria),
        criteria,
    }
}

/// Budget for a full `verify all`.
pub const FULL_RUN_BUDGET_S: u64 = 480;

/// Compare two runs of the same suites and seed bit for bit, and time a
/// full run against its budget.
pub fn criterion_9(first: &[SuiteReport], second: &[SuiteReport]) -> CriterionReport {
    run("9", "same seed reproduces every suite bit for bit", u64::MAX / 1000, |c| {
        c.require(first.len() == second.len(), "different numbers of suite runs");
        for (a, b) in first.iter().zip(second) {
            let same = a.suite == b.suite && a.seed == b.seed && a.fingerprint == b.fingerprint;
            c.record(format!("{}_identical", a.suite.name()), f64::from(u8::from(same)));
            c.require(same, format!("suite {} differs between runs", a.suite.name()));
        }
        let total_ms: u128 = first.iter().map(|r| r.elapsed_ms).sum();
        c.record("full_run_seconds", total_ms as f64 / 1000.0);
        c.require(
            total_ms < u128::from(FULL_RUN_BUDGET_S) * 1000,
            format!("full run took {} s", total_ms / 1000),
        );
        c.notes.push(format!("{} suites identical", first.len()));
        Ok(())
    })
}

/// Standard criterion 9 run: every unit suite twice with the same seed.
pub fn reproducibility(opts: &VerifyOptions) -> (Vec<SuiteReport>, CriterionReport) {
    let first: Vec<SuiteReport> = Suite::UNITS.iter().map(|s| verify(*s, opts)).collect();
    let second: Vec<SuiteReport> = Suite::UNITS.iter().map(|s| verify(*s, opts)).collect();
    let c9 = criterion_9(&first, &second);
    (first, c9)
}
