//! Grid execution with incremental, resumable CSV output.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{
    erdos_renyi_dag, gen_adversarial, gen_graph_data, gen_standalone, AdversarialKind, AdversarialSpec, EdgeKind,
    GraphDgpSpec, StandaloneData, StandaloneFamily, StandaloneSpec,
};
use super::metrics::graph_metrics;
use super::missingness::{inject_missingness, Mechanism, MissingnessSpec};
use super::topology::load_topology;
use crate::baselines::{fisher_z, fz_rubin, fz_single, testwise_fisher_z};
use crate::ci_test::{pair_ci, CITestConfig, VarianceEstimator};
use crate::data::{ImputedStack, ImputerKind, IncompleteDataset, Matrix};
use crate::discovery::{dag_to_cpdag, discover, DiscoverConfig, Method};
use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::imputation::{impute, MiceConfig};
use crate::learners::Variant;
use crate::rng::{derive_seed, derived_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    /// PC graph recovery on random DAGs or a fixed topology.
    Graph,
    /// Single CI tests on standalone or adversarial DGPs.
    Ci,
}

fn default_replicates() -> usize {
    1
}
fn default_one() -> usize {
    1
}
fn default_alpha() -> f64 {
    0.05
}
fn default_m() -> usize {
    5
}
fn default_mechanisms() -> Vec<Mechanism> {
    vec![Mechanism::Mar]
}
fn default_rates() -> Vec<f64> {
    vec![0.3]
}
fn default_sizes() -> Vec<usize> {
    vec![1000]
}
fn default_signals() -> Vec<f64> {
    vec![0.0]
}
fn default_imputers() -> Vec<ImputerKind> {
    vec![ImputerKind::Mice]
}
fn default_variant() -> Variant {
    Variant::Fast
}
fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub methods: Vec<Method>,
    /// Graph plans: `linear`, `nonlinear`. CI plans: `linear_gaussian`,
    /// `post_nonlinear`, `latent_confounder`, `hub`, `hub_nonlinear`.
    pub dgps: Vec<String>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Node counts (graph) or conditioning dimensions (CI).
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default = "default_one")]
    pub graphs: usize,
    pub edge_prob: Option<f64>,
    pub n_incomplete: Option<usize>,
    pub topology: Option<PathBuf>,
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    #[serde(default = "default_signals")]
    pub signals: Vec<f64>,
    #[serde(default = "default_imputers")]
    pub imputers: Vec<ImputerKind>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_m")]
    pub m_imputations: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    pub k_folds: Option<usize>,
    pub n_trees: Option<usize>,
    pub variance_estimator: Option<VarianceEstimator>,
    pub early_stop: Option<bool>,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Error::Config(format!("plan lists no {what}"));
        if self.methods.is_empty() {
            return Err(empty("methods"));
        }
        if self.dgps.is_empty() {
            return Err(empty("dgps"));
        }
        if self.mechanisms.is_empty() || self.rates.is_empty() || self.sizes.is_empty() {
            return Err(empty("mechanisms, rates or sizes"));
        }
        if self.replicates == 0 || self.graphs == 0 {
            return Err(Error::Config("replicates and graphs must be positive".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::Config(format!("rate {r} outside (0, 1)")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        match self.kind {
            PlanKind::Graph => {
                for d in &self.dgps {
                    parse_edge_kind(d)?;
                }
                if self.topology.is_none() && self.dims.is_empty() {
                    return Err(empty("node counts (dims)"));
                }
            }
            PlanKind::Ci => {
                for d in &self.dgps {
                    CiDgp::parse(d)?;
                }
                if let Some(m) = self.methods.iter().find(|m| **m == Method::FzVote) {
                    return Err(Error::Config(format!("{m} is a graph method, not a CI test")));
                }
            }
        }
        self.ci_config(0).validate()?;
        Ok(())
    }

    pub fn ci_config(&self, seed: u64) -> CITestConfig {
        let mut c = CITestConfig::for_variant(self.variant);
        c.alpha = self.alpha;
        c.seed = seed;
        if let Some(k) = self.k_folds {
            c.k_folds = k;
        }
        if let Some(t) = self.n_trees {
            c.learner.n_trees = t;
        }
        if let Some(v) = self.variance_estimator {
            c.variance_estimator = v;
        }
        if let Some(e) = self.early_stop {
            c.early_stop.enabled = e;
        }
        c
    }

    pub fn mice_config(&self, seed: u64) -> MiceConfig {
        MiceConfig {
            m_imputations: self.m_imputations,
            seed,
            ..MiceConfig::default()
        }
    }
}

fn parse_edge_kind(s: &str) -> Result<EdgeKind> {
    match s {
        "linear" => Ok(EdgeKind::Linear),
        "nonlinear" => Ok(EdgeKind::Nonlinear),
        _ => Err(Error::Config(format!("unknown graph DGP '{s}'"))),
    }
}

/// A data-generating process for single CI tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiDgp {
    Standalone(StandaloneFamily),
    Adversarial(AdversarialKind),
}

impl CiDgp {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "linear_gaussian" => CiDgp::Standalone(StandaloneFamily::LinearGaussian),
            "post_nonlinear" => CiDgp::Standalone(StandaloneFamily::PostNonlinear),
            "latent_confounder" => CiDgp::Standalone(StandaloneFamily::LatentConfounder),
            "hub" => CiDgp::Adversarial(AdversarialKind::Hub),
            "hub_nonlinear" => CiDgp::Adversarial(AdversarialKind::HubNonlinear),
            _ => return Err(Error::Config(format!("unknown CI DGP '{s}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            CiDgp::Standalone(f) => f.name(),
            CiDgp::Adversarial(k) => k.name(),
        }
    }
}

/// One generated CI problem: truth, masked copy and the query `Z, Y | X`.
#[derive(Debug, Clone)]
pub struct CiProblem {
    pub truth: Matrix,
    pub data: IncompleteDataset,
    pub z: usize,
    pub y: usize,
    pub cond: Vec<usize>,
}

/// Generates data and masks it. Standalone DGPs lose values in the first
/// `ceil(d/2)` covariates; adversarial ones in the hub only. The signal is
/// ignored for adversarial DGPs, which are null by construction.
pub fn ci_problem(
    dgp: CiDgp,
    signal: f64,
    n: usize,
    d: usize,
    mechanism: Mechanism,
    rate: f64,
    seed: u64,
) -> Result<CiProblem> {
    let (data, targets): (StandaloneData, Vec<usize>) = match dgp {
        CiDgp::Standalone(family) => {
            let data = gen_standalone(&StandaloneSpec {
                family,
                signal,
                n,
                d,
                seed: derive_seed(seed, &[0]),
            })?;
            (data, (2..2 + d.div_ceil(2)).collect())
        }
        CiDgp::Adversarial(kind) => {
            let data = gen_adversarial(&AdversarialSpec::new(kind, n, derive_seed(seed, &[0])))?;
            (data, vec![2])
        }
    };
    let spec = MissingnessSpec::new(mechanism, rate, targets, derive_seed(seed, &[1]));
    let masked = inject_missingness(&data.values, data.names.clone(), &spec)?;
    Ok(CiProblem {
        cond: data.x_columns(),
        truth: data.values,
        data: masked,
        z: StandaloneData::Z,
        y: StandaloneData::Y,
    })
}

/// Outcome of one CI method on one problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiOutcome {
    pub p_value: f64,
    pub reject: bool,
}

/// Runs a single CI method. `stack` must be supplied for imputation-based
/// methods.
pub fn run_ci_method(
    method: Method,
    problem: &CiProblem,
    stack: Option<&ImputedStack>,
    config: &CITestConfig,
) -> Result<CiOutcome> {
    let (z, y, cond) = (problem.z, problem.y, &problem.cond[..]);
    let need = || stack.ok_or_else(|| Error::Contract(format!("{method} needs an imputed stack")));
    let fz = |r: crate::baselines::FisherZResult| if r.singular { 1.0 } else { r.p_value };
    let p_value = match method {
        Method::PairCi => return pair_ci(need()?, z, y, cond, config).map(|r| CiOutcome {
            p_value: r.p_value,
            reject: r.reject,
        }),
        Method::FzSingle => fz(fz_single(need()?, z, y, cond)?),
        Method::FzRubin => {
            let r = fz_rubin(need()?, z, y, cond)?;
            if r.singular {
                1.0
            } else {
                r.p_value
            }
        }
        Method::CompleteCase => {
            let cols: Vec<usize> = (0..problem.data.n_cols()).collect();
            let rows = problem.data.complete_rows(&cols);
            fz(fisher_z(&problem.data.values().select_rows(&rows), z, y, cond)?)
        }
        Method::Testwise => fz(testwise_fisher_z(&problem.data, z, y, cond)?),
        Method::FzVote => return Err(Error::Config("fz_vote is not a CI test".into())),
    };
    Ok(CiOutcome {
        p_value,
        reject: p_value < config.alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub method: String,
    pub dgp: String,
    pub mechanism: String,
    pub rate: f64,
    pub n: usize,
    pub p: usize,
    pub replicate: usize,
    pub shd_total: Option<usize>,
    pub shd_skeleton: Option<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub runtime_s: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub method: String,
    pub imputer: String,
    pub dgp: String,
    pub mechanism: String,
    pub rate: f64,
    pub n: usize,
    pub d: usize,
    pub signal: f64,
    pub replicate: usize,
    pub p_value: Option<f64>,
    pub reject: Option<bool>,
    pub runtime_s: f64,
    pub status: String,
}

pub const GRAPH_HEADER: [&str; 14] = [
    "method",
    "dgp",
    "mechanism",
    "rate",
    "n",
    "p",
    "replicate",
    "shd_total",
    "shd_skeleton",
    "precision",
    "recall",
    "f1",
    "runtime_s",
    "status",
];

pub const CI_HEADER: [&str; 13] = [
    "method",
    "imputer",
    "dgp",
    "mechanism",
    "rate",
    "n",
    "d",
    "signal",
    "replicate",
    "p_value",
    "reject",
    "runtime_s",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Graph(Vec<BenchmarkRecord>),
    Ci(Vec<CiRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Graph(r) => r.len(),
            Records::Ci(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Writes zero runtimes so repeated runs give identical files.
    pub deterministic: bool,
}

fn key_hash(parts: &str) -> u64 {
    // FNV-1a; only needs to be stable across runs.
    parts
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn graph_key(r: &BenchmarkRecord) -> String {
    format!("{}|{}|{}|{}|{}|{}|{}", r.method, r.dgp, r.mechanism, r.rate, r.n, r.p, r.replicate)
}

fn ci_key(r: &CiRecord) -> String {
    format!(
        "{}|{}|{}|{}|{}|{}|{}|{}|{}",
        r.method, r.imputer, r.dgp, r.mechanism, r.rate, r.n, r.d, r.signal, r.replicate
    )
}

fn imputer_name(k: ImputerKind) -> &'static str {
    match k {
        ImputerKind::Mice => "mice",
        ImputerKind::Mean => "mean",
        ImputerKind::Marginal => "marginal",
    }
}

/// Reads existing rows of a results file, checking the header.
fn read_existing<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    if !path.exists() || std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Validation(format!(
            "{} has header {:?}, expected {:?}",
            path.display(),
            found,
            header
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

struct Sink {
    writer: Option<csv::Writer<File>>,
}

impl Sink {
    fn open(path: Option<&Path>, header: &[&str]) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Sink { writer: None });
        };
        let fresh = !path.exists() || std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len() == 0;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            w.write_record(header)?;
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        Ok(Sink { writer: Some(w) })
    }

    fn write<T: Serialize>(&mut self, rows: &[T]) -> Result<()> {
        if let Some(w) = &mut self.writer {
            for r in rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| Error::io("results", e))?;
        }
        Ok(())
    }
}

/// Runs tasks a chunk at a time (one task per worker) and streams results
/// to the sink in task order.
fn execute<T, R, F>(tasks: &[T], sink: &mut Sink, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send + Serialize,
    F: Fn(&T) -> Vec<R> + Sync,
{
    let width = rayon::current_num_threads().max(1);
    let mut out = Vec::new();
    for chunk in tasks.chunks(width) {
        let done: Vec<Vec<R>> = chunk.par_iter().map(&f).collect();
        for rows in done {
            sink.write(&rows)?;
            out.extend(rows);
        }
    }
    Ok(out)
}

fn seconds(start: Instant, opts: &RunOptions) -> f64 {
    if opts.deterministic {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    }
}

/// Executes a plan. With `out`, rows already present in the file are kept
/// and their cells skipped; new rows are appended as they complete.
/// Returns every record of the plan, existing and new.
pub fn run_experiment(plan: &ExperimentPlan, out: Option<&Path>, opts: &RunOptions) -> Result<Records> {
    plan.validate()?;
    match plan.kind {
        PlanKind::Graph => run_graph(plan, out, opts).map(Records::Graph),
        PlanKind::Ci => run_ci(plan, out, opts).map(Records::Ci),
    }
}

struct CiTask {
    dgp: CiDgp,
    mechanism: Mechanism,
    rate: f64,
    n: usize,
    d: usize,
    signal: f64,
    replicate: usize,
    /// (imputer, method) pairs still to run.
    todo: Vec<(ImputerKind, Method)>,
}

fn run_ci(plan: &ExperimentPlan, out: Option<&Path>, opts: &RunOptions) -> Result<Vec<CiRecord>> {
    let existing: Vec<CiRecord> = match out {
        Some(p) => read_existing(p, &CI_HEADER)?,
        None => Vec::new(),
    };
    let done: HashSet<String> = existing.iter().map(ci_key).collect();
    let dims = if plan.dims.is_empty() { vec![5] } else { plan.dims.clone() };
    let mut tasks = Vec::new();
    let mut planned = Vec::new();
    for dgp_name in &plan.dgps {
        let dgp = CiDgp::parse(dgp_name)?;
        for &mechanism in &plan.mechanisms {
            for &rate in &plan.rates {
                for &n in &plan.sizes {
                    for &d in &dims {
                        for &signal in &plan.signals {
                            for replicate in 0..plan.replicates {
                                let mut todo = Vec::new();
                                for &imp in &plan.imputers {
                                    for &method in &plan.methods {
                                        let rec = ci_record(method, imp, dgp, mechanism, rate, n, d, signal, replicate);
                                        let key = ci_key(&rec);
                                        if !done.contains(&key) {
                                            todo.push((imp, method));
                                        }
                                        planned.push(key);
                                    }
                                }
                                if !todo.is_empty() {
                                    tasks.push(CiTask {
                                        dgp,
                                        mechanism,
                                        rate,
                                        n,
                                        d,
                                        signal,
                                        replicate,
                                        todo,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let mut sink = Sink::open(out, &CI_HEADER)?;
    let new = execute(&tasks, &mut sink, |t| ci_task(plan, t, opts))?;
    Ok(collect_planned(planned, existing.into_iter().chain(new), ci_key))
}

/// Plan-ordered records, last write wins for duplicate keys.
fn collect_planned<R>(planned: Vec<String>, records: impl Iterator<Item = R>, key: fn(&R) -> String) -> Vec<R> {
    let mut by_key: std::collections::HashMap<String, R> = records.map(|r| (key(&r), r)).collect();
    planned.into_iter().filter_map(|k| by_key.remove(&k)).collect()
}

#[allow(clippy::too_many_arguments)]
fn ci_record(
    method: Method,
    imputer: ImputerKind,
    dgp: CiDgp,
    mechanism: Mechanism,
    rate: f64,
    n: usize,
    d: usize,
    signal: f64,
    replicate: usize,
) -> CiRecord {
    CiRecord {
        method: method.name().into(),
        imputer: imputer_name(imputer).into(),
        dgp: dgp.name().into(),
        mechanism: mechanism.name().into(),
        rate,
        n,
        d,
        signal,
        replicate,
        p_value: None,
        reject: None,
        runtime_s: 0.0,
        status: "ok".into(),
    }
}

/// Seed of one replicate's data; shared by all methods and imputers.
pub fn ci_replicate_seed(master: u64, dgp: &str, mechanism: Mechanism, rate: f64, n: usize, d: usize, signal: f64, replicate: usize) -> u64 {
    let key = format!("ci|{dgp}|{}|{rate}|{n}|{d}|{signal}|{replicate}", mechanism.name());
    derive_seed(master, &[key_hash(&key)])
}

fn ci_task(plan: &ExperimentPlan, t: &CiTask, opts: &RunOptions) -> Vec<CiRecord> {
    let seed = ci_replicate_seed(plan.seed, t.dgp.name(), t.mechanism, t.rate, t.n, t.d, t.signal, t.replicate);
    let fail_all = |msg: &str| -> Vec<CiRecord> {
        t.todo
            .iter()
            .map(|&(imp, m)| CiRecord {
                status: format!("failed: {msg}"),
                ..ci_record(m, imp, t.dgp, t.mechanism, t.rate, t.n, t.d, t.signal, t.replicate)
            })
            .collect()
    };
    let problem = match ci_problem(t.dgp, t.signal, t.n, t.d, t.mechanism, t.rate, derive_seed(seed, &[0])) {
        Ok(p) => p,
        Err(e) => return fail_all(&e.to_string()),
    };
    let config = plan.ci_config(derive_seed(seed, &[2]));
    let mut out = Vec::new();
    let mut stacks: Vec<(ImputerKind, Result<ImputedStack>, f64)> = Vec::new();
    for &(imp, method) in &t.todo {
        let mut rec = ci_record(method, imp, t.dgp, t.mechanism, t.rate, t.n, t.d, t.signal, t.replicate);
        let mut impute_time = 0.0;
        let stack = if matches!(method, Method::PairCi | Method::FzSingle | Method::FzRubin) {
            if !stacks.iter().any(|(k, _, _)| *k == imp) {
                let s0 = Instant::now();
                let s = impute(&problem.data, imp, &plan.mice_config(derive_seed(seed, &[1])));
                stacks.push((imp, s, seconds(s0, opts)));
            }
            let (_, s, secs) = stacks.iter().find(|(k, _, _)| *k == imp).expect("just inserted");
            impute_time = *secs;
            match s {
                Ok(s) => Some(s),
                Err(e) => {
                    rec.status = format!("failed: {e}");
                    out.push(rec);
                    continue;
                }
            }
        } else {
            None
        };
        let start = Instant::now();
        match run_ci_method(method, &problem, stack, &config) {
            Ok(o) => {
                rec.p_value = Some(o.p_value);
                rec.reject = Some(o.reject);
            }
            Err(e) => rec.status = format!("failed: {e}"),
        }
        rec.runtime_s = seconds(start, opts) + impute_time;
        out.push(rec);
    }
    out
}

struct GraphTask {
    kind: EdgeKind,
    p: usize,
    graph_index: usize,
    mechanism: Mechanism,
    rate: f64,
    n: usize,
    replicate: usize,
    todo: Vec<Method>,
}

fn default_edge_prob(p: usize) -> f64 {
    match p {
        0..=10 => 0.25,
        11..=20 => 0.2,
        _ => 0.15,
    }
}

/// Number of incomplete variables at `p` nodes when the plan does not say.
pub fn default_incomplete(p: usize) -> usize {
    match p {
        10 => 3,
        20 => 6,
        30 => 8,
        _ => ((3 * p) / 10).max(1),
    }
}

fn run_graph(plan: &ExperimentPlan, out: Option<&Path>, opts: &RunOptions) -> Result<Vec<BenchmarkRecord>> {
    let existing: Vec<BenchmarkRecord> = match out {
        Some(p) => read_existing(p, &GRAPH_HEADER)?,
        None => Vec::new(),
    };
    let done: HashSet<String> = existing.iter().map(graph_key).collect();
    let topology = plan.topology.as_ref().map(load_topology).transpose()?;
    let (dims, graphs) = match &topology {
        Some(t) => (vec![t.graph.p()], 1),
        None => (plan.dims.clone(), plan.graphs),
    };
    let mut tasks = Vec::new();
    let mut planned = Vec::new();
    for dgp in &plan.dgps {
        let kind = parse_edge_kind(dgp)?;
        for &p in &dims {
            for g in 0..graphs {
                for &mechanism in &plan.mechanisms {
                    for &rate in &plan.rates {
                        for &n in &plan.sizes {
                            for r in 0..plan.replicates {
                                let replicate = g * plan.replicates + r;
                                let mut todo = Vec::new();
                                for &m in &plan.methods {
                                    let key = graph_key(&graph_record(m, kind, mechanism, rate, n, p, replicate));
                                    if !done.contains(&key) {
                                        todo.push(m);
                                    }
                                    planned.push(key);
                                }
                                if !todo.is_empty() {
                                    tasks.push(GraphTask {
                                        kind,
                                        p,
                                        graph_index: g,
                                        mechanism,
                                        rate,
                                        n,
                                        replicate,
                                        todo,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let fixed = topology.map(|t| t.graph);
    let mut sink = Sink::open(out, &GRAPH_HEADER)?;
    let new = execute(&tasks, &mut sink, |t| graph_task(plan, fixed.as_ref(), t, opts))?;
    Ok(collect_planned(planned, existing.into_iter().chain(new), graph_key))
}

fn graph_record(method: Method, kind: EdgeKind, mechanism: Mechanism, rate: f64, n: usize, p: usize, replicate: usize) -> BenchmarkRecord {
    BenchmarkRecord {
        method: method.name().into(),
        dgp: kind.name().into(),
        mechanism: mechanism.name().into(),
        rate,
        n,
        p,
        replicate,
        shd_total: None,
        shd_skeleton: None,
        precision: None,
        recall: None,
        f1: None,
        runtime_s: 0.0,
        status: "ok".into(),
    }
}

/// One graph replicate: the DAG, its masked sample and the truth CPDAG.
#[derive(Debug, Clone)]
pub struct GraphProblem {
    pub dag: MixedGraph,
    pub cpdag: MixedGraph,
    pub truth: Matrix,
    pub data: IncompleteDataset,
}

/// Builds a graph replicate. Incomplete variables are drawn from the
/// non-root nodes.
#[allow(clippy::too_many_arguments)]
pub fn graph_problem(
    dag: MixedGraph,
    kind: EdgeKind,
    noise_scale: f64,
    n: usize,
    mechanism: Mechanism,
    rate: f64,
    n_incomplete: usize,
    graph_seed: u64,
    data_seed: u64,
) -> Result<GraphProblem> {
    let p = dag.p();
    let spec = GraphDgpSpec::random(dag.clone(), kind, noise_scale, n, derive_seed(graph_seed, &[1]))?;
    let spec = GraphDgpSpec {
        seed: derive_seed(data_seed, &[0]),
        ..spec
    };
    let truth = gen_graph_data(&spec)?;
    let non_roots: Vec<usize> = (0..p).filter(|&v| !dag.parents(v).is_empty()).collect();
    let k = n_incomplete.min(non_roots.len());
    let mut trng = derived_rng(data_seed, &[1]);
    let targets: Vec<usize> = if k == 0 {
        Vec::new()
    } else {
        sample_indices(&mut trng, non_roots.len(), k)
            .into_iter()
            .map(|i| non_roots[i])
            .collect()
    };
    let mechanism = if targets.is_empty() {
        Mechanism::McarComplete
    } else {
        mechanism
    };
    let ms = MissingnessSpec::new(mechanism, rate, targets, derive_seed(data_seed, &[2]));
    let data = inject_missingness(&truth, IncompleteDataset::default_names(p), &ms)?;
    Ok(GraphProblem {
        cpdag: dag_to_cpdag(&dag)?,
        dag,
        truth,
        data,
    })
}

fn graph_task(plan: &ExperimentPlan, fixed: Option<&MixedGraph>, t: &GraphTask, opts: &RunOptions) -> Vec<BenchmarkRecord> {
    let graph_seed = derive_seed(plan.seed, &[key_hash("graph"), t.p as u64, t.graph_index as u64]);
    let data_key = format!(
        "data|{}|{}|{}|{}|{}|{}",
        t.kind.name(),
        t.p,
        t.mechanism.name(),
        t.rate,
        t.n,
        t.replicate
    );
    let data_seed = derive_seed(plan.seed, &[key_hash(&data_key)]);
    let problem = (|| {
        let dag = match fixed {
            Some(g) => g.clone(),
            None => erdos_renyi_dag(t.p, plan.edge_prob.unwrap_or_else(|| default_edge_prob(t.p)), graph_seed)?,
        };
        let k = plan.n_incomplete.unwrap_or_else(|| default_incomplete(t.p));
        graph_problem(dag, t.kind, plan.noise_scale, t.n, t.mechanism, t.rate, k, graph_seed, data_seed)
    })();
    let mut out = Vec::new();
    for &method in &t.todo {
        let mut rec = graph_record(method, t.kind, t.mechanism, t.rate, t.n, t.p, t.replicate);
        let problem = match &problem {
            Ok(p) => p,
            Err(e) => {
                rec.status = format!("failed: {e}");
                out.push(rec);
                continue;
            }
        };
        let config = DiscoverConfig {
            alpha: plan.alpha,
            imputer: ImputerKind::Mice,
            mice: plan.mice_config(derive_seed(data_seed, &[3])),
            ci: plan.ci_config(derive_seed(data_seed, &[4])),
        };
        let start = Instant::now();
        match discover(&problem.data, method, &config).and_then(|d| graph_metrics(&problem.cpdag, &d.graph)) {
            Ok(m) => {
                rec.shd_total = Some(m.shd_total);
                rec.shd_skeleton = Some(m.shd_skeleton);
                rec.precision = Some(m.precision);
                rec.recall = Some(m.recall);
                rec.f1 = Some(m.f1);
            }
            Err(e) => rec.status = format!("failed: {e}"),
        }
        rec.runtime_s = seconds(start, opts);
        out.push(rec);
    }
    out
}
