//! Run configuration, result documents and file handling shared by the
//! command-line front end and the benchmark runner.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{brute_force, icm, DEFAULT_BUDGET};
use crate::dars::{dars_solve, DualParams, DualState};
use crate::error::{Error, Result};
use crate::fuses::{fuses_solve, Initialization};
use crate::metrics::{metrics_report, MetricInputs, MetricsReport, PhaseTimings};
use crate::mrf::{Labeling, MrfInstance};
use crate::staircase::RankStep;
use crate::tnt::SolverParams;

/// Default ICM sweep cap.
pub const DEFAULT_ICM_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fuses,
    Dars,
    Icm,
    Exact,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fuses, Method::Dars, Method::Icm, Method::Exact];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fuses => "fuses",
            Method::Dars => "dars",
            Method::Icm => "icm",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}' (expected fuses, dars, icm or exact)")))
    }
}

/// Everything needed to reproduce a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub solver: SolverParams,
    pub dual: DualParams,
    pub seed: u64,
    pub init: Initialization,
    pub icm_max_sweeps: usize,
    pub exact_budget: u64,
    pub verbosity: u8,
    /// Where the result goes. Not part of the recorded configuration, so
    /// that the same run written to two places yields identical documents.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `method`; the two relaxations use different gradient
    /// tolerances for their staircase.
    pub fn for_method(method: Method) -> Self {
        let solver = match method {
            Method::Dars => SolverParams::dars(),
            _ => SolverParams::fuses(),
        };
        RunConfig {
            method,
            solver,
            dual: DualParams::default(),
            seed: 0,
            init: Initialization::default(),
            icm_max_sweeps: DEFAULT_ICM_SWEEPS,
            exact_budget: DEFAULT_BUDGET,
            verbosity: 0,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.dual.validate()?;
        if self.icm_max_sweeps == 0 {
            return Err(Error::invalid("icm sweep cap must be positive"));
        }
        Ok(())
    }
}

/// The output of one solve, in energy units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    /// SHA-256 of the instance's canonical serialization.
    pub instance_digest: String,
    pub num_nodes: usize,
    pub num_labels: usize,
    pub method: Method,
    pub labeling: Labeling,
    /// Energy of `labeling`.
    pub f_rounded: f64,
    pub f_relaxed: Option<f64>,
    pub f_objective: Option<f64>,
    pub offset: Option<f64>,
    pub subopt_bound: Option<f64>,
    pub certified: Option<bool>,
    /// Dual ascent reached its tolerance, or ICM reached a fixed point.
    pub converged: Option<bool>,
    pub diverged: Option<bool>,
    pub iterations: Option<usize>,
    pub constraint_residual_max: Option<f64>,
    pub min_eigenvalue: Option<f64>,
    pub min_singular_value_ratio: Option<f64>,
    pub states_enumerated: Option<u64>,
    pub rank_history: Vec<RankStep>,
    pub dual_state: Option<DualState>,
    pub config: RunConfig,
    pub timings: PhaseTimings,
}

impl ResultDocument {
    fn new(mrf: &MrfInstance, config: &RunConfig, labeling: Labeling, f_rounded: f64) -> Self {
        ResultDocument {
            instance_digest: instance_digest(mrf),
            num_nodes: mrf.num_nodes(),
            num_labels: mrf.num_labels(),
            method: config.method,
            labeling,
            f_rounded,
            f_relaxed: None,
            f_objective: None,
            offset: None,
            subopt_bound: None,
            certified: None,
            converged: None,
            diverged: None,
            iterations: None,
            constraint_residual_max: None,
            min_eigenvalue: None,
            min_singular_value_ratio: None,
            states_enumerated: None,
            rank_history: Vec::new(),
            dual_state: None,
            config: config.clone(),
            timings: PhaseTimings::default(),
        }
    }

    /// Serialization with every timing zeroed; equal for repeated seeded runs.
    pub fn without_timings(&self) -> Self {
        ResultDocument { timings: PhaseTimings::default(), ..self.clone() }
    }
}

/// Machine-readable error report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDocument {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

impl From<&Error> for ErrorDocument {
    fn from(e: &Error) -> Self {
        ErrorDocument { kind: e.kind().to_string(), message: e.to_string(), exit_code: e.exit_code() }
    }
}

pub fn instance_digest(mrf: &MrfInstance) -> String {
    let bytes = serde_json::to_vec(mrf).expect("instances always serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn solve_instance(mrf: &MrfInstance, config: &RunConfig) -> Result<ResultDocument> {
    config.validate()?;
    let start = Instant::now();
    match config.method {
        Method::Fuses => {
            let r = fuses_solve(mrf, &config.solver, config.init, config.seed)?;
            let mut doc = ResultDocument::new(mrf, config, r.labeling, r.f_rounded);
            doc.f_relaxed = Some(r.f_relaxed);
            doc.f_objective = Some(r.f_objective);
            doc.offset = Some(r.offset);
            doc.subopt_bound = Some(r.subopt_bound);
            doc.certified = Some(r.certified);
            doc.iterations = Some(r.rank_history.iter().map(|s| s.iterations).sum());
            doc.min_eigenvalue = Some(r.min_eigenvalue);
            doc.min_singular_value_ratio = Some(r.min_singular_value_ratio);
            doc.rank_history = r.rank_history;
            doc.timings = r.timings;
            Ok(doc)
        }
        Method::Dars => {
            let r = dars_solve(mrf, &config.solver, &config.dual, config.seed)?;
            let mut doc = ResultDocument::new(mrf, config, r.labeling, r.f_rounded);
            doc.f_relaxed = Some(r.f_relaxed);
            doc.f_objective = Some(r.f_objective);
            doc.offset = Some(r.offset);
            doc.subopt_bound = Some(r.subopt_bound);
            doc.certified = Some(r.certified);
            doc.converged = Some(r.dual_converged);
            doc.diverged = Some(r.diverged);
            doc.iterations = Some(r.dual_iterations);
            doc.constraint_residual_max = Some(r.constraint_residual_max);
            doc.rank_history = r.rank_history;
            doc.dual_state = Some(r.state);
            doc.timings = r.timings;
            Ok(doc)
        }
        Method::Icm => {
            let init = mrf.unary_argmax_labeling();
            let r = icm(mrf, &init, config.icm_max_sweeps)?;
            let converged = r.sweeps < config.icm_max_sweeps || icm(mrf, &r.labeling, 1)?.labeling == r.labeling;
            let mut doc = ResultDocument::new(mrf, config, r.labeling, r.energy);
            doc.converged = Some(converged);
            doc.iterations = Some(r.sweeps);
            doc.timings = elapsed_only(start);
            Ok(doc)
        }
        Method::Exact => {
            let r = brute_force(mrf, config.exact_budget)?;
            let mut doc = ResultDocument::new(mrf, config, r.labeling, r.f_opt);
            doc.states_enumerated = Some(r.states_enumerated);
            doc.timings = elapsed_only(start);
            Ok(doc)
        }
    }
}

fn elapsed_only(start: Instant) -> PhaseTimings {
    let t = start.elapsed().as_secs_f64();
    PhaseTimings { solve_seconds: t, total_seconds: t, ..Default::default() }
}

/// Metrics for `result`, optionally against an exact solve and a ground
/// truth. Every document must describe the instance `mrf`.
pub fn evaluate(
    mrf: &MrfInstance,
    result: &ResultDocument,
    exact: Option<&ResultDocument>,
    ground_truth: Option<&Labeling>,
) -> Result<MetricsReport> {
    let digest = instance_digest(mrf);
    for doc in std::iter::once(result).chain(exact) {
        if doc.instance_digest != digest {
            return Err(Error::invalid(format!("{} result was produced for a different instance", doc.method)));
        }
    }
    if let Some(gt) = ground_truth {
        gt.validate(mrf.num_nodes(), mrf.num_labels())?;
    }
    let optimum = match exact {
        Some(e) if e.method != Method::Exact => {
            return Err(Error::invalid(format!("reference result must come from the exact method, not {}", e.method)))
        }
        Some(e) => Some((&e.labeling, e.f_rounded)),
        None => None,
    };
    // Recompute rather than trust the stored energy.
    let f_rounded = mrf.energy(&result.labeling)?;
    metrics_report(&MetricInputs {
        labeling: Some(&result.labeling),
        f_rounded: Some(f_rounded),
        f_relaxed: result.f_relaxed,
        offset: result.offset,
        optimum,
        ground_truth,
        timings: Some(result.timings),
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

/// Which relaxation's cost matrix to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    /// ±1 vector encoding.
    Pm,
    /// {0,1} matrix encoding.
    Zo,
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pm" => Ok(EncodingKind::Pm),
            "zo" => Ok(EncodingKind::Zo),
            _ => Err(Error::invalid(format!("unknown encoding '{s}' (expected pm or zo)"))),
        }
    }
}

/// Cost matrix as `row col value` lines, one per stored nonzero, after a
/// `#` header giving the dimension, offset and (for pm) the constraint
/// right-hand side.
pub fn matrix_triplet_text(mrf: &MrfInstance, kind: EncodingKind) -> String {
    let (name, dim, offset, rhs, trip) = match kind {
        EncodingKind::Pm => {
            let e = crate::encoding::encode_pm(mrf);
            ("pm", e.dim(), e.offset(), Some(e.rhs()), e.triplets())
        }
        EncodingKind::Zo => {
            let e = crate::encoding::encode_zo(mrf);
            ("zo", e.dim(), e.offset(), None, e.triplets())
        }
    };
    let mut out = format!("# encoding {name}\n# dim {dim}\n# offset {offset:?}\n");
    if let Some(r) = rhs {
        out.push_str(&format!("# rhs {r:?}\n"));
    }
    for (i, j, v) in trip {
        out.push_str(&format!("{i} {j} {v:?}\n"));
    }
    out
}
