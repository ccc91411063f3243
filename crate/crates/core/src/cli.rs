//! Configuration-driven experiment runner behind the `symld` binary.
//!
//! Every run is described by an [`ExperimentConfig`], read from `--config`
//! or assembled from the command line (flags override the file). Results
//! go to `--out` (atomically) or stdout, as CSV or JSON. Errors produce a
//! JSON body on stderr and a category exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | configuration, domain or infeasibility error |
//! | 3 | enumeration or size cap exceeded |
//! | 4 | numeric non-convergence |
//! | 5 | internal or output error |

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bridge::{lambda_limit, lambda_n, CylinderFunctional, Diffusion, TimeGrid};
use crate::error::Error;
use crate::exact::{ld_rate_exact, PairTypeTable, LD_RATE_MAX_N};
use crate::measure::{
    empirical_of, product, DiscreteMeasure, IndexedSample, Measure, MeasureDoc, PairAtoms,
    PairMeasure, SampleDoc,
};
use crate::rate::{
    entropy_project, rate_i, rate_j, BallConstraint, ConstraintSet, Observable, RateOracle,
};
use crate::rng::RngHandle;
use crate::sampler::{sample_l_two_layer, sample_permutation, FirstLayerSampler};
use crate::transport::{
    couple_min, project_to_symset, wasserstein, wasserstein_pairs, BaseMetric, PairGround,
    PairMode, SymSet,
};
use crate::verify::{self, Fault, Suite, VerifyOptions};

/// The only configuration schema this build reads.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Size limits checked before any work is done.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub max_n: usize,
    pub max_k: usize,
    pub max_draws: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_n: LD_RATE_MAX_N,
            max_k: crate::measure::DEFAULT_MAX_POINTS,
            max_draws: 10_000_000,
        }
    }
}

/// A complete, replayable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub caps: Caps,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Draw pair-type tables of the two-layer measure.
    Sample(SampleArgs),
    /// Exact `-(1/n) log P` at the feasible table nearest a target.
    ExactLd(ExactLdArgs),
    /// Evaluate a rate function.
    Rate(RateArgs),
    /// Entropy projection onto marginal, observable and ball constraints.
    Project(ProjectArgs),
    /// Transport distances and projections onto the permutation set.
    #[command(subcommand)]
    Transport(TransportCommand),
    /// Cumulant functionals of symmetrised bridge ensembles.
    Bridge(BridgeArgs),
    /// Run acceptance suites.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Sample(_) => "sample",
            Command::ExactLd(_) => "exact-ld",
            Command::Rate(_) => "rate",
            Command::Project(_) => "project",
            Command::Transport(TransportCommand::Wasserstein(_)) => "transport-wasserstein",
            Command::Transport(TransportCommand::Project(_)) => "transport-project",
            Command::Bridge(_) => "bridge",
            Command::Verify(_) => "verify",
        }
    }

    fn randomized(&self) -> bool {
        matches!(
            self,
            Command::Sample(_)
                | Command::Bridge(_)
                | Command::Verify(_)
                | Command::Transport(TransportCommand::Project(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub draws: usize,
    /// `fixed:<sample.json>` or `iid:<measure.json>`.
    #[arg(long)]
    pub layer1: String,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ExactLdArgs {
    #[arg(long)]
    pub mu: PathBuf,
    /// One or more sizes, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub target: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum RateKind {
    #[value(name = "I")]
    I,
    #[value(name = "J")]
    J,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RateArgs {
    #[arg(long, value_enum)]
    pub rate: RateKind,
    #[arg(long)]
    pub nu: PathBuf,
    /// The marginal for `I`, the Sanov reference for `J`.
    #[arg(long)]
    pub mu: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ProjectArgs {
    /// Reference pair measure; defaults to `μ ⊗ μ`.
    #[arg(long)]
    #[serde(default)]
    pub reference: Option<PathBuf>,
    /// Required common marginal.
    #[arg(long)]
    #[serde(default)]
    pub mu: Option<PathBuf>,
    /// JSON list of `{"g": [row-major cells], "target": t}`.
    #[arg(long)]
    #[serde(default)]
    pub observables: Option<PathBuf>,
    #[arg(long, requires = "ball_radius")]
    #[serde(default)]
    pub ball_center: Option<PathBuf>,
    #[arg(long, requires = "ball_center")]
    #[serde(default)]
    pub ball_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum TransportCommand {
    /// `β_W` between two measures on points or on pairs.
    Wasserstein(WassersteinArgs),
    /// Nearest element of the permutation set to a list of pair atoms.
    Project(TransportProjectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GroundKind {
    #[default]
    TildeSum,
    TildeMax,
    RawSum,
    RawMax,
}

impl GroundKind {
    fn pair(self) -> PairGround {
        let (base, mode) = match self {
            GroundKind::TildeSum => (BaseMetric::Tilde, PairMode::Sum),
            GroundKind::TildeMax => (BaseMetric::Tilde, PairMode::Max),
            GroundKind::RawSum => (BaseMetric::Raw, PairMode::Sum),
            GroundKind::RawMax => (BaseMetric::Raw, PairMode::Max),
        };
        PairGround { base, mode }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct WassersteinArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    /// Ground metric; the pair mode is ignored for point measures.
    #[arg(long, value_enum, default_value_t = GroundKind::TildeSum)]
    #[serde(default)]
    pub ground: GroundKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct TransportProjectArgs {
    /// Pair atoms `{"points": .., "atoms": [["a","b"], ..]}`.
    #[arg(long)]
    pub atoms: PathBuf,
    /// The generating sample `{"points": .., "sample": [..]}`.
    #[arg(long)]
    pub sample: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct BridgeArgs {
    #[arg(long)]
    pub beta: f64,
    /// Number of grid steps `M`.
    #[arg(long)]
    pub grid: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Simulated paths per endpoint pair.
    #[arg(long)]
    pub draws: usize,
    /// `zero`, `const:<c>` or `quad:<a>@<t>`.
    #[arg(long)]
    pub phi: String,
    /// `fixed:<sample.json>`, `iid:<measure.json>`, or a bare sample file.
    #[arg(long)]
    pub layer1: String,
    /// Variance per unit time of the driving Brownian motion.
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// `oracle`, `coupling`, `rate`, `bridge` or `all`.
    #[arg(long, default_value = "all")]
    #[serde(default = "all_suites")]
    pub suite: String,
    /// Corrupt one exact table count (negative control).
    #[arg(long)]
    #[serde(default)]
    pub inject_fault: bool,
}

fn all_suites() -> String {
    "all".into()
}

#[derive(Debug, Parser)]
#[command(name = "symld", version, about = "Experiments on symmetrised empirical measures")]
pub struct Cli {
    /// JSON experiment configuration; flags given here override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, written atomically; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// A failure with its exit code and machine-readable body.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub residuals: Option<Vec<f64>>,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: "config",
            message: message.into(),
            residuals: None,
        }
    }

    fn cap(message: impl Into<String>) -> Self {
        CliError {
            code: 3,
            kind: "cap",
            message: message.into(),
            residuals: None,
        }
    }

    fn output(message: impl Into<String>) -> Self {
        CliError {
            code: 5,
            kind: "output",
            message: message.into(),
            residuals: None,
        }
    }

    pub fn body(&self) -> Value {
        let mut v = json!({ "error": self.kind, "exit_code": self.code, "message": self.message });
        if let Some(r) = &self.residuals {
            v["residuals"] = json!(r);
        }
        v
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind, residuals) = match &e {
            Error::Domain(_) => (2, "domain", None),
            Error::Infeasible(_) => (2, "infeasible", None),
            Error::Format(_) => (2, "format", None),
            Error::Json(_) => (2, "format", None),
            Error::Resource(_) => (3, "resource", None),
            Error::NonConvergence { residuals, .. } => (4, "non-convergence", Some(residuals.clone())),
            Error::Io(_) => (5, "io", None),
        };
        CliError {
            code,
            kind,
            message: e.to_string(),
            residuals,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Provenance and headline numbers of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    /// SHA-256 of the configuration and the bytes of every input file.
    pub inputs_digest: String,
    pub outputs: BTreeMap<String, f64>,
    pub duration_ms: u128,
}

/// Rendered output of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub result: Value,
}

impl RunOutput {
    pub fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(Vec::new());
                w.write_record(&self.header).map_err(|e| CliError::output(e.to_string()))?;
                for row in &self.rows {
                    w.write_record(row).map_err(|e| CliError::output(e.to_string()))?;
                }
                w.into_inner().map_err(|e| CliError::output(e.to_string()))
            }
            Format::Json => {
                let doc = json!({ "record": self.record, "result": self.result });
                let mut text = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::output(e.to_string()))?;
                text.push(b'\n');
                Ok(text)
            }
        }
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .map_err(|e| CliError::output(format!("temporary file in {}: {e}", dir.display())))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| CliError::output(e.to_string()))?;
    tmp.persist(path)
        .map_err(|e| CliError::output(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

/// Loads input files and remembers their bytes for the digest.
struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn new(config: &ExperimentConfig) -> CliResult<Self> {
        let mut hasher = Sha256::new();
        // Output placement does not change results.
        let mut canonical = config.clone();
        canonical.out = None;
        canonical.format = Format::Csv;
        let text = serde_json::to_vec(&canonical).map_err(|e| CliError::output(e.to_string()))?;
        hasher.update(&text);
        Ok(Inputs { hasher })
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        self.hasher.update(path.to_string_lossy().as_bytes());
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self, path: &Path) -> CliResult<T> {
        let text = self.read(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    fn measure(&mut self, path: &Path) -> CliResult<DiscreteMeasure> {
        let doc: MeasureDoc = self.json(path)?;
        Ok(DiscreteMeasure::from_doc(&doc)?)
    }

    fn pair_measure(&mut self, path: &Path) -> CliResult<PairMeasure> {
        let doc: MeasureDoc = self.json(path)?;
        Ok(PairMeasure::from_doc(&doc)?)
    }

    fn sample(&mut self, path: &Path) -> CliResult<IndexedSample> {
        let doc: SampleDoc = self.json(path)?;
        Ok(IndexedSample::from_doc(&doc)?)
    }

    fn layer1(&mut self, spec: &str) -> CliResult<FirstLayerSampler> {
        match spec.split_once(':') {
            Some(("fixed", p)) => Ok(FirstLayerSampler::Fixed(self.sample(Path::new(p))?)),
            Some(("iid", p)) => Ok(FirstLayerSampler::Iid(self.measure(Path::new(p))?)),
            _ if !spec.is_empty() => Ok(FirstLayerSampler::Fixed(self.sample(Path::new(spec))?)),
            _ => Err(CliError::config("layer1 must be fixed:<file> or iid:<file>")),
        }
    }

    fn digest(self) -> String {
        format!("{:x}", self.hasher.finalize())
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn table_header(prefix: &str, k: usize) -> Vec<String> {
    (0..k)
        .flat_map(|i| (0..k).map(move |j| format!("{prefix}_{i}_{j}")))
        .collect()
}

fn check_alphabet(k: usize, caps: &Caps) -> CliResult<()> {
    if k > caps.max_k {
        return Err(CliError::cap(format!("alphabet of {k} points exceeds max_k = {}", caps.max_k)));
    }
    Ok(())
}

fn check_n(n: usize, caps: &Caps) -> CliResult<()> {
    if n > caps.max_n {
        return Err(CliError::cap(format!("n = {n} exceeds max_n = {}", caps.max_n)));
    }
    Ok(())
}

fn check_draws(draws: usize, caps: &Caps) -> CliResult<()> {
    if draws > caps.max_draws {
        return Err(CliError::cap(format!("{draws} draws exceed max_draws = {}", caps.max_draws)));
    }
    Ok(())
}

fn phi_from(spec: &str) -> CliResult<CylinderFunctional> {
    let bad = || CliError::config(format!("phi {spec:?} is not zero, const:<c> or quad:<a>@<t>"));
    if spec == "zero" {
        return Ok(CylinderFunctional::zero());
    }
    if let Some(c) = spec.strip_prefix("const:") {
        return Ok(CylinderFunctional::constant(c.parse().map_err(|_| bad())?)?);
    }
    if let Some(rest) = spec.strip_prefix("quad:") {
        let (a, t) = rest.split_once('@').ok_or_else(bad)?;
        let (a, t) = (a.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?);
        return Ok(CylinderFunctional::quadratic(a, t)?);
    }
    Err(bad())
}

struct Produced {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    result: Value,
    outputs: BTreeMap<String, f64>,
}

/// Validate and execute a configuration.
pub fn run(config: &ExperimentConfig) -> CliResult<RunOutput> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    if config.command.randomized() && config.seed.is_none() {
        return Err(CliError::config(format!("`{}` needs a seed", config.command.name())));
    }
    let start = Instant::now();
    let mut inputs = Inputs::new(config)?;
    let seed = config.seed.unwrap_or(0);
    let caps = &config.caps;
    let produced = match &config.command {
        Command::Sample(a) => run_sample(a, seed, caps, &mut inputs)?,
        Command::ExactLd(a) => run_exact_ld(a, caps, &mut inputs)?,
        Command::Rate(a) => run_rate(a, caps, &mut inputs)?,
        Command::Project(a) => run_project(a, caps, &mut inputs)?,
        Command::Transport(TransportCommand::Wasserstein(a)) => run_wasserstein(a, caps, &mut inputs)?,
        Command::Transport(TransportCommand::Project(a)) => run_transport_project(a, seed, caps, &mut inputs)?,
        Command::Bridge(a) => run_bridge(a, seed, caps, &mut inputs)?,
        Command::Verify(a) => run_verify(a, seed)?,
    };
    let inputs_digest = inputs.digest();
    Ok(RunOutput {
        record: ResultRecord {
            experiment_id: format!("{}-{}", config.command.name(), &inputs_digest[..12]),
            inputs_digest,
            outputs: produced.outputs,
            duration_ms: start.elapsed().as_millis(),
        },
        header: produced.header,
        rows: produced.rows,
        result: produced.result,
    })
}

fn run_sample(a: &SampleArgs, seed: u64, caps: &Caps, inputs: &mut Inputs) -> CliResult<Produced> {
    check_n(a.n, caps)?;
    check_draws(a.draws, caps)?;
    let layer = inputs.layer1(&a.layer1)?;
    let k = match &layer {
        FirstLayerSampler::Fixed(s) => s.alphabet().len(),
        FirstLayerSampler::Iid(m) => m.len(),
    };
    check_alphabet(k, caps)?;
    let root = RngHandle::new(seed, 0);
    let mut header = vec!["draw_id".to_string()];
    header.extend(table_header("p", k));
    let mut rows = Vec::with_capacity(a.draws);
    let mut tables = Vec::with_capacity(a.draws);
    for d in 0..a.draws {
        let mut rng = root.split(d as u64);
        let m = sample_l_two_layer(&layer, a.n, &mut rng)?;
        let table = PairTypeTable::of_measure(&m, a.n)?;
        let mut row = vec![d.to_string()];
        row.extend(table.cells().iter().map(|c| c.to_string()));
        rows.push(row);
        tables.push(json!({ "draw_id": d, "cells": table.cells() }));
    }
    let outputs = BTreeMap::from([("draws".to_string(), a.draws as f64), ("n".to_string(), a.n as f64)]);
    Ok(Produced {
        header,
        rows,
        result: json!({ "n": a.n, "k": k, "draws": tables }),
        outputs,
    })
}

fn run_exact_ld(a: &ExactLdArgs, caps: &Caps, inputs: &mut Inputs) -> CliResult<Produced> {
    let mu = inputs.measure(&a.mu)?;
    let target = inputs.pair_measure(&a.target)?;
    check_alphabet(mu.len(), caps)?;
    for &n in &a.n {
        check_n(n, caps)?;
    }
    let rate = rate_i(&target, &mu)?;
    let k = mu.len();
    let mut header = vec!["n".to_string()];
    header.extend(table_header("m", k));
    header.extend(["log_prob_exact".to_string(), "rate_gap".to_string()]);
    let (mut rows, mut results, mut outputs) = (Vec::new(), Vec::new(), BTreeMap::new());
    for &n in &a.n {
        let r = ld_rate_exact(&target, &mu, n)?;
        let gap = (r.value - rate).abs();
        let mut row = vec![n.to_string()];
        row.extend(r.table.cells().iter().map(|c| c.to_string()));
        row.extend([num(r.log_prob.ln), num(gap)]);
        rows.push(row);
        outputs.insert(format!("rate_gap_n{n}"), gap);
        results.push(json!({
            "n": n,
            "table": r.table.cells(),
            "log_prob_exact": r.log_prob.ln,
            "prob_exact": r.log_prob.exact.as_ref().map(|p| p.to_string()),
            "rate_value": r.value,
            "rate_gap": gap,
        }));
    }
    outputs.insert("rate_i".into(), rate);
    Ok(Produced {
        header,
        rows,
        result: json!({ "rate_i": rate, "rows": results }),
        outputs,
    })
}

fn run_rate(a: &RateArgs, caps: &Caps, inputs: &mut Inputs) -> CliResult<Produced> {
    let nu = inputs.pair_measure(&a.nu)?;
    let mu = inputs.measure(&a.mu)?;
    check_alphabet(mu.len(), caps)?;
    let (name, value) = match a.rate {
        RateKind::I => ("I", rate_i(&nu, &mu)?),
        RateKind::J => ("J", rate_j(&nu, &RateOracle::Sanov(mu))?),
    };
    Ok(Produced {
        header: vec!["rate".into(), "value".into()],
        rows: vec![vec![name.into(), num(value)]],
        result: json!({ "rate": name, "value": value }),
        outputs: BTreeMap::from([("value".to_string(), value)]),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservableDoc {
    g: Vec<f64>,
    target: f64,
}

fn run_project(a: &ProjectArgs, caps: &Caps, inputs: &mut Inputs) -> CliResult<Produced> {
    let mu = a.mu.as_deref().map(|p| inputs.measure(p)).transpose()?;
    let reference = match (&a.reference, &mu) {
        (Some(p), _) => inputs.pair_measure(p)?,
        (None, Some(m)) => product(m, m)?,
        (None, None) => return Err(CliError::config("project needs --reference or --mu")),
    };
    check_alphabet(reference.side(), caps)?;
    let observables = match &a.observables {
        Some(p) => inputs
            .json::<Vec<ObservableDoc>>(p)?
            .into_iter()
            .map(|o| Observable {
                g: o.g,
                target: o.target,
            })
            .collect(),
        None => Vec::new(),
    };
    let ball = match (&a.ball_center, a.ball_radius) {
        (Some(c), Some(radius)) => Some(BallConstraint {
            center: inputs.pair_measure(c)?,
            radius,
            ground: PairGround::TILDE_SUM,
        }),
        (None, None) => None,
        _ => return Err(CliError::config("ball_center and ball_radius go together")),
    };
    let constraints = ConstraintSet {
        marginal: mu,
        observables,
        ball,
    };
    let p = entropy_project(&reference, &constraints)?;
    let k = reference.side();
    let mut header = vec!["value".to_string(), "certified".to_string(), "marginal_residual".to_string()];
    header.extend(table_header("p", k));
    let mut row = vec![num(p.value), p.certified.to_string(), num(p.residuals.marginal_l1)];
    row.extend(p.minimizer.weights().iter().map(|w| num(*w)));
    let outputs = BTreeMap::from([
        ("value".to_string(), p.value),
        ("marginal_residual".to_string(), p.residuals.marginal_l1),
    ]);
    Ok(Produced {
        header,
        rows: vec![row],
        result: json!({
            "minimizer": p.minimizer.to_doc()?,
            "value": p.value,
            "residuals": p.residuals,
            "certified": p.certified,
            "duality_gap": p.duality_gap,
            "dual_history": p.dual_history,
        }),
        outputs,
    })
}

fn run_wasserstein(a: &WassersteinArgs, caps: &Caps, inputs: &mut Inputs) -> CliResult<Produced> {
    let rho: MeasureDoc = inputs.json(&a.rho)?;
    let nu: MeasureDoc = inputs.json(&a.nu)?;
    let is_pair = |d: &MeasureDoc| !d.weights.is_empty() && d.weights.keys().all(|k| k.contains(','));
    let ground = a.ground.pair();
    let (distance, plan) = match (is_pair(&rho), is_pair(&nu)) {
        (true, true) => {
            let (r, n) = (PairMeasure::from_doc(&rho)?, PairMeasure::from_doc(&nu)?);
            check_alphabet(r.side(), caps)?;
            wasserstein_pairs(&r, &n, ground)?
        }
        (false, false) => {
            let (r, n) = (DiscreteMeasure::from_doc(&rho)?, DiscreteMeasure::from_doc(&nu)?);
            check_alphabet(r.len(), caps)?;
            wasserstein(&r, &n, ground.base)?
        }
        _ => return Err(CliError::config("rho and nu must both be point measures or both pair measures")),
    };
    Ok(Produced {
        header: vec!["distance".into()],
        rows: vec![vec![num(distance)]],
        result: json!({ "distance": distance, "plan": plan }),
        outputs: BTreeMap::from([("distance".to_string(), distance)]),
    })
}

fn run_transport_project(
    a: &TransportProjectArgs,
    seed: u64,
    caps: &Caps,
    inputs: &mut Inputs,
) -> CliResult<Produced> {
    let atoms_doc = inputs.json(&a.atoms)?;
    let atoms = PairAtoms::from_doc(&atoms_doc)?;
    let sample = inputs.sample(&a.sample)?;
    check_alphabet(sample.alphabet().len(), caps)?;
    check_n(sample.len(), caps)?;
    let sym = SymSet::new(sample)?;
    let mut rng = RngHandle::new(seed, 0);
    let p = project_to_symset(&atoms, &sym, &mut rng)?;
    // The coupling distance is recomputed on a fresh stream so that the
    // projection above is unaffected by it.
    let coupling = couple_min(&atoms, &sym, &mut RngHandle::new(seed, 0))?;
    let header = ["position", "sigma", "tau", "representative"].map(String::from).to_vec();
    let rows = (0..sym.n())
        .map(|i| {
            vec![
                i.to_string(),
                p.sigma.apply(i).to_string(),
                p.tau.apply(i).to_string(),
                p.representative.apply(i).to_string(),
            ]
        })
        .collect();
    let outputs = BTreeMap::from([
        ("distance".to_string(), coupling.distance),
        ("cost_u".to_string(), p.cost_u),
        ("cost_v".to_string(), p.cost_v),
    ]);
    Ok(Produced {
        header,
        rows,
        result: json!({
            "projection": p,
            "measure": p.measure.to_doc()?,
            "distance": coupling.distance,
        }),
        outputs,
    })
}

fn run_bridge(a: &BridgeArgs, seed: u64, caps: &Caps, inputs: &mut Inputs) -> CliResult<Produced> {
    check_draws(a.draws, caps)?;
    for &n in &a.n {
        check_n(n, caps)?;
        check_draws(n.saturating_mul(a.draws), caps)?;
    }
    let layer = inputs.layer1(&a.layer1)?;
    let law = match &layer {
        FirstLayerSampler::Fixed(s) => empirical_of(s),
        FirstLayerSampler::Iid(m) => m.clone(),
    };
    let alphabet: Arc<_> = law.alphabet().clone();
    check_alphabet(alphabet.len(), caps)?;
    let diffusion = Diffusion::new(alphabet.dimension(), a.scale, a.beta)?;
    let grid = TimeGrid::uniform(a.beta, a.grid)?;
    let phi = phi_from(&a.phi)?;
    let limit = lambda_limit(&product(&law, &law)?, &diffusion, &phi)?;
    let header = ["n", "lambda_n_exact", "lambda_n_mc", "lambda_limit", "gap", "stderr"]
        .map(String::from)
        .to_vec();
    let root = RngHandle::new(seed, 0);
    let (mut rows, mut results, mut outputs) = (Vec::new(), Vec::new(), BTreeMap::new());
    for (idx, &n) in a.n.iter().enumerate() {
        let mut rng = root.split(idx as u64);
        let endpoints = layer.draw(n, &mut rng)?;
        let perm = sample_permutation(n, &mut rng)?;
        let pairs = PairAtoms::new(
            alphabet.clone(),
            (0..n).map(|i| (endpoints.at(i), endpoints.at(perm.apply(i)))).collect(),
        )?;
        let est = lambda_n(&pairs, &diffusion, &grid, &phi, a.draws, &mut rng)?;
        let gap = (est.exact - limit).abs();
        rows.push(vec![n.to_string(), num(est.exact), num(est.mc), num(limit), num(gap), num(est.std_error)]);
        outputs.insert(format!("gap_n{n}"), gap);
        results.push(json!({
            "n": n,
            "lambda_n_exact": est.exact,
            "lambda_n_mc": est.mc,
            "lambda_limit": limit,
            "gap": gap,
            "stderr": est.std_error,
            "z_score": est.z_score,
        }));
    }
    outputs.insert("lambda_limit".into(), limit);
    Ok(Produced {
        header,
        rows,
        result: json!({ "rows": results }),
        outputs,
    })
}

fn run_verify(a: &VerifyArgs, seed: u64) -> CliResult<Produced> {
    let suite: Suite = a.suite.parse()?;
    let opts = VerifyOptions {
        seed,
        fault: a.inject_fault.then_some(Fault::FlipTableCount),
    };
    let report = verify::verify(suite, &opts);
    let header = ["criterion", "pass", "checks_pass", "within_budget", "elapsed_ms", "title", "detail"]
        .map(String::from)
        .to_vec();
    let rows = report
        .criteria
        .iter()
        .map(|c| {
            vec![
                c.id.clone(),
                c.pass.to_string(),
                c.checks_pass.to_string(),
                c.within_budget.to_string(),
                c.elapsed_ms.to_string(),
                c.title.clone(),
                c.detail.clone(),
            ]
        })
        .collect();
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    let outputs = BTreeMap::from([
        ("passed".to_string(), passed as f64),
        ("failed".to_string(), (report.criteria.len() - passed) as f64),
    ]);
    Ok(Produced {
        header,
        rows,
        result: serde_json::to_value(&report).map_err(|e| CliError::output(e.to_string()))?,
        outputs,
    })
}

/// Merge a config file with command-line overrides.
pub fn resolve(cli: Cli) -> CliResult<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            let mut c: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            if let Some(cmd) = cli.command {
                c.command = cmd;
            }
            c
        }
        None => ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: None,
            out: None,
            format: Format::Csv,
            caps: Caps::default(),
            command: cli
                .command
                .ok_or_else(|| CliError::config("a subcommand or --config is required"))?,
        },
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.out.is_some() {
        config.out = cli.out;
    }
    if let Some(f) = cli.format {
        config.format = f;
    }
    Ok(config)
}

/// Run and write; returns the record on success.
pub fn execute(config: &ExperimentConfig) -> CliResult<ResultRecord> {
    let output = run(config)?;
    let bytes = output.render(config.format)?;
    match &config.out {
        Some(path) => {
            write_atomic(path, &bytes)?;
            if config.format == Format::Csv {
                let mut record_path = path.clone().into_os_string();
                record_path.push(".record.json");
                let mut text =
                    serde_json::to_vec_pretty(&output.record).map_err(|e| CliError::output(e.to_string()))?;
                text.push(b'\n');
                write_atomic(Path::new(&record_path), &text)?;
            }
        }
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::output(e.to_string()))?,
    }
    Ok(output.record)
}

/// Entry point of the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::config(e.to_string()));
        }
    };
    match resolve(cli).and_then(|c| execute(&c)) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.body());
    ExitCode::from(e.code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_specs() {
        assert!(matches!(phi_from("zero").unwrap().kind(), crate::bridge::PhiKind::Zero));
        assert_eq!(phi_from("const:0.5").unwrap().bound(), 0.5);
        assert_eq!(phi_from("quad:1.5@0.25").unwrap().times(), &[0.25]);
        for bad in ["quad:1", "const:x", "cubic:1@2", ""] {
            assert_eq!(phi_from(bad).unwrap_err().code, 2, "{bad}");
        }
    }

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(CliError::from(Error::Domain("x".into())).code, 2);
        assert_eq!(CliError::from(Error::Infeasible("x".into())).code, 2);
        assert_eq!(CliError::from(Error::Resource("x".into())).code, 3);
        let nc = CliError::from(Error::NonConvergence {
            message: "x".into(),
            residuals: vec![1.0],
        });
        assert_eq!((nc.code, nc.body()["residuals"][0].as_f64()), (4, Some(1.0)));
        assert_eq!(CliError::from(Error::Io(std::io::Error::other("x"))).code, 5);
    }

    #[test]
    fn config_rejects_unknown_fields_and_versions() {
        let text = r#"{"schema_version": 1, "seed": 3, "command": {"verify": {"suite": "rate"}}, "extra": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
        let text = r#"{"schema_version": 2, "command": {"verify": {"suite": "rate"}}}"#;
        let c: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(run(&c).unwrap_err().code, 2);
    }

    #[test]
    fn randomized_commands_need_seeds() {
        let c = ExperimentConfig {
            schema_version: 1,
            seed: None,
            out: None,
            format: Format::Csv,
            caps: Caps::default(),
            command: Command::Verify(VerifyArgs {
                suite: "rate".into(),
                inject_fault: false,
            }),
        };
        let e = run(&c).unwrap_err();
        assert_eq!((e.code, e.kind), (2, "config"));
    }
}
