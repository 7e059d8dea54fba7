//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::benchmark::runner::{CI_HEADER, GRAPH_HEADER};
use crate::benchmark::{run_experiment, ExperimentPlan, RunOptions};
use crate::ci_test::{pair_ci, CITestConfig, VarianceEstimator};
use crate::data::{load_csv, ImputerKind, IncompleteDataset, DEFAULT_NA_MARKERS};
use crate::discovery::{discover, DiscoverConfig, Method};
use crate::error::{Error, Result};
use crate::imputation::{impute, MiceConfig};
use crate::learners::Variant;
use crate::stats::quartiles;

pub const SEED_ENV: &str = "PAIRCD_SEED";

#[derive(Debug, Parser)]
#[command(name = "paircd", version, about = "CI testing and PC discovery on incomplete data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test Z _||_ Y | X on a CSV file.
    CiTest(CiTestArgs),
    /// Learn a CPDAG from a CSV file.
    Discover(DiscoverArgs),
    /// Run an experiment plan.
    Benchmark(BenchmarkArgs),
    /// Summarize a results CSV.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    General,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImputerArg {
    Mice,
    Mean,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Bayle,
    NadeauBengio,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Master seed; falls back to $PAIRCD_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[arg(long, value_enum, default_value = "general")]
    pub variant: VariantArg,
    #[arg(long)]
    pub k_folds: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "mice")]
    pub imputer: ImputerArg,
    #[arg(long, value_enum, default_value = "bayle")]
    pub variance: VarianceArg,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    /// Force early stopping on or off regardless of the variant.
    #[arg(long)]
    pub early_stop: Option<bool>,
    /// Extra NA markers (repeatable); the defaults are always recognised.
    #[arg(long = "na")]
    pub na: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CiTestArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Column name or 0-based index.
    #[arg(long)]
    pub z: String,
    #[arg(long)]
    pub y: String,
    /// Comma-separated conditioning columns (default: all others).
    #[arg(long, value_delimiter = ',')]
    pub cond: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub test: TestArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DiscoverArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "pairci", value_parser = parse_method)]
    pub method: Method,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub test: TestArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write zero runtimes so reruns are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Also write the summary as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn init_threads(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    Ok(())
}

impl TestArgs {
    fn ci_config(&self, seed: u64) -> Result<CITestConfig> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let mut c = CITestConfig::for_variant(match self.variant {
            VariantArg::General => Variant::General,
            VariantArg::Fast => Variant::Fast,
        });
        c.alpha = self.alpha;
        c.seed = seed;
        c.variance_estimator = match self.variance {
            VarianceArg::Bayle => VarianceEstimator::Bayle,
            VarianceArg::NadeauBengio => VarianceEstimator::NadeauBengio,
        };
        if let Some(k) = self.k_folds {
            c.k_folds = k;
        }
        if let Some(t) = self.n_trees {
            c.learner.n_trees = t;
        }
        if let Some(l) = self.min_samples_leaf {
            c.learner.min_samples_leaf = l;
        }
        if let Some(e) = self.early_stop {
            c.early_stop.enabled = e;
        }
        c.validate()?;
        Ok(c)
    }

    fn mice(&self, seed: u64) -> MiceConfig {
        MiceConfig {
            m_imputations: self.m,
            seed,
            ..MiceConfig::default()
        }
    }

    fn imputer(&self) -> ImputerKind {
        match self.imputer {
            ImputerArg::Mice => ImputerKind::Mice,
            ImputerArg::Mean => ImputerKind::Mean,
            ImputerArg::Marginal => ImputerKind::Marginal,
        }
    }

    fn load(&self, path: &Path) -> Result<IncompleteDataset> {
        let mut markers: Vec<&str> = DEFAULT_NA_MARKERS.to_vec();
        markers.extend(self.na.iter().map(String::as_str));
        load_csv(path, &markers)
    }
}

fn column(data: &IncompleteDataset, key: &str) -> Result<usize> {
    if let Some(j) = data.column_index(key) {
        return Ok(j);
    }
    match key.parse::<usize>() {
        Ok(j) if j < data.n_cols() => Ok(j),
        _ => Err(Error::Config(format!("no column '{key}'"))),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| Error::io(p, e)),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

pub fn run_ci_test(a: &CiTestArgs) -> Result<()> {
    init_threads(a.common.jobs)?;
    let seed = resolve_seed(a.common.seed)?;
    let config = a.test.ci_config(seed)?;
    let data = a.test.load(&a.data)?;
    let z = column(&data, &a.z)?;
    let y = column(&data, &a.y)?;
    let cond: Vec<usize> = match &a.cond {
        Some(c) => c.iter().filter(|s| !s.is_empty()).map(|s| column(&data, s)).collect::<Result<_>>()?,
        None => (0..data.n_cols()).filter(|&j| j != z && j != y).collect(),
    };
    let stack = impute(&data, a.test.imputer(), &a.test.mice(seed))?;
    let result = pair_ci(&stack, z, y, &cond, &config)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&result)?)
}

pub fn run_discover(a: &DiscoverArgs) -> Result<()> {
    init_threads(a.common.jobs)?;
    let seed = resolve_seed(a.common.seed)?;
    let data = a.test.load(&a.data)?;
    let config = DiscoverConfig {
        alpha: a.test.alpha,
        imputer: a.test.imputer(),
        mice: a.test.mice(seed),
        ci: a.test.ci_config(seed)?,
    };
    let d = discover(&data, a.method, &config)?;
    #[derive(Serialize)]
    struct Out<'a> {
        method: &'a str,
        n_tests: usize,
        #[serde(flatten)]
        graph: crate::graph::GraphJson,
    }
    let out = Out {
        method: a.method.name(),
        n_tests: d.n_tests,
        graph: d.graph.to_json(Some(data.column_names())),
    };
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

pub fn run_benchmark(a: &BenchmarkArgs) -> Result<()> {
    init_threads(a.common.jobs)?;
    let mut plan = ExperimentPlan::load(&a.plan)?;
    if let Some(s) = a.common.seed {
        plan.seed = s;
    } else if std::env::var(SEED_ENV).is_ok() && plan.seed == 0 {
        plan.seed = resolve_seed(None)?;
    }
    let records = run_experiment(
        &plan,
        Some(&a.out),
        &RunOptions {
            deterministic: a.deterministic,
        },
    )?;
    eprintln!("{} records in {}", records.len(), a.out.display());
    Ok(())
}

pub fn run_summarize(a: &SummarizeArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.results).map_err(|e| Error::io(&a.results, e))?;
    let summary = render_summary(&text)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", summary.table);
    if let Some(p) = &a.json {
        std::fs::write(p, format!("{}\n", serde_json::to_string_pretty(&summary.rows)?)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

/// Median and interquartile range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

impl Spread {
    fn of(values: &[f64]) -> Option<Spread> {
        quartiles(values).map(|(q1, median, q3)| Spread {
            median,
            q1,
            q3,
            iqr: q3 - q1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Grouping columns in header order.
    pub group: BTreeMap<String, String>,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Per-metric spreads (graph results).
    pub metrics: BTreeMap<String, Spread>,
    /// Rejection rate among successful tests (CI results).
    pub rejection_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub table: String,
    pub warnings: Vec<String>,
}

const GRAPH_GROUP: [&str; 6] = ["method", "dgp", "mechanism", "rate", "n", "p"];
const GRAPH_METRICS: [&str; 6] = ["shd_total", "shd_skeleton", "precision", "recall", "f1", "runtime_s"];
const CI_GROUP: [&str; 8] = ["method", "imputer", "dgp", "mechanism", "rate", "n", "d", "signal"];

/// Groups a results CSV by condition and method. Rows are ordered by
/// condition, then method.
pub fn render_summary(csv_text: &str) -> Result<Summary> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let is_graph = header == GRAPH_HEADER;
    if !is_graph && header != CI_HEADER {
        return Err(Error::Validation(format!("unrecognised results header {header:?}")));
    }
    let group_cols: &[&str] = if is_graph { &GRAPH_GROUP } else { &CI_GROUP };
    let idx = |name: &str| header.iter().position(|h| h == name).expect("known header");
    let status = idx("status");
    // condition columns first so methods of one condition sit together
    let order: Vec<usize> = group_cols[1..].iter().chain(&group_cols[..1]).map(|c| idx(c)).collect();
    let mut groups: BTreeMap<Vec<SortKey>, Vec<csv::StringRecord>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let key = order.iter().map(|&i| SortKey::new(&rec[i])).collect();
        groups.entry(key).or_default().push(rec);
    }
    let mut warnings = Vec::new();
    if groups.is_empty() {
        warnings.push("no records".to_string());
    }
    let mut rows = Vec::new();
    for recs in groups.values() {
        let ok: Vec<&csv::StringRecord> = recs.iter().filter(|r| &r[status] == "ok").collect();
        let group = group_cols
            .iter()
            .map(|c| (c.to_string(), recs[0][idx(c)].to_string()))
            .collect();
        let mut metrics = BTreeMap::new();
        let mut rejection_rate = None;
        if is_graph {
            for m in GRAPH_METRICS {
                let vals: Vec<f64> = ok.iter().filter_map(|r| r[idx(m)].parse().ok()).collect();
                if let Some(s) = Spread::of(&vals) {
                    metrics.insert(m.to_string(), s);
                }
            }
        } else {
            let rej: Vec<bool> = ok.iter().filter_map(|r| r[idx("reject")].parse().ok()).collect();
            if !rej.is_empty() {
                rejection_rate = Some(rej.iter().filter(|&&b| b).count() as f64 / rej.len() as f64);
            }
            let vals: Vec<f64> = ok.iter().filter_map(|r| r[idx("runtime_s")].parse().ok()).collect();
            if let Some(s) = Spread::of(&vals) {
                metrics.insert("runtime_s".to_string(), s);
            }
        }
        rows.push(SummaryRow {
            group,
            n_ok: ok.len(),
            n_failed: recs.len() - ok.len(),
            metrics,
            rejection_rate,
        });
    }
    let table = render_table(&rows, group_cols, is_graph);
    Ok(Summary { rows, table, warnings })
}

/// Numbers sort numerically, everything else lexically.
#[derive(Debug, Clone)]
enum SortKey {
    Num(f64),
    Text(String),
}

impl SortKey {
    fn new(s: &str) -> Self {
        s.parse().map(SortKey::Num).unwrap_or_else(|_| SortKey::Text(s.to_string()))
    }
}

impl PartialEq for SortKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for SortKey {}

impl PartialOrd for SortKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SortKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (SortKey::Num(a), SortKey::Num(b)) => a.total_cmp(b),
            (SortKey::Num(_), SortKey::Text(_)) => Less,
            (SortKey::Text(_), SortKey::Num(_)) => Greater,
            (SortKey::Text(a), SortKey::Text(b)) => a.cmp(b),
        }
    }
}

fn fmt_spread(s: Option<&Spread>) -> String {
    match s {
        Some(s) => format!("{} [{}]", fmt_num(s.median), fmt_num(s.iqr)),
        None => "-".into(),
    }
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e9 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

fn render_table(rows: &[SummaryRow], group_cols: &[&str], is_graph: bool) -> String {
    let mut header: Vec<String> = group_cols.iter().map(|s| s.to_string()).collect();
    header.push("ok".into());
    header.push("failed".into());
    if is_graph {
        header.extend(["shd", "shd_skel", "f1", "runtime_s"].map(String::from));
    } else {
        header.extend(["reject_rate", "runtime_s"].map(String::from));
    }
    let mut cells: Vec<Vec<String>> = vec![header];
    for r in rows {
        let mut line: Vec<String> = group_cols.iter().map(|c| r.group[*c].clone()).collect();
        line.push(r.n_ok.to_string());
        line.push(r.n_failed.to_string());
        if is_graph {
            for m in ["shd_total", "shd_skeleton", "f1", "runtime_s"] {
                line.push(fmt_spread(r.metrics.get(m)));
            }
        } else {
            line.push(r.rejection_rate.map_or("-".into(), |x| format!("{x:.3}")));
            line.push(fmt_spread(r.metrics.get("runtime_s")));
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..cells[0].len())
        .map(|j| cells.iter().map(|l| l[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &cells {
        let padded: Vec<String> = line.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::CiTest(a) => run_ci_test(a),
        Command::Discover(a) => run_discover(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Summarize(a) => run_summarize(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 1,
                _ => 2,
            }
        }
    }
}
