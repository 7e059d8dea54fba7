//! PC causal discovery with pluggable CI oracles.

mod orient;
mod oracles;
mod pc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use orient::{dag_to_cpdag, meek_rules, orient_v_structures, orient_v_structures_with};
pub use oracles::{d_separated, CiOracle, DSeparationOracle, FisherZOracle, FzRubinOracle, PairCiOracle, TestwiseOracle};
pub use pc::{pc_skeleton, SkeletonResult};

use crate::ci_test::CITestConfig;
use crate::data::{ImputedStack, ImputerKind, IncompleteDataset};
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, SepSetMap};
use crate::imputation::{impute, MiceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[serde(rename = "pairci")]
    PairCi,
    CompleteCase,
    Testwise,
    FzSingle,
    FzRubin,
    FzVote,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::PairCi,
        Method::CompleteCase,
        Method::Testwise,
        Method::FzSingle,
        Method::FzRubin,
        Method::FzVote,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::PairCi => "pairci",
            Method::CompleteCase => "complete_case",
            Method::Testwise => "testwise",
            Method::FzSingle => "fz_single",
            Method::FzRubin => "fz_rubin",
            Method::FzVote => "fz_vote",
        }
    }

    fn needs_imputation(self) -> bool {
        matches!(self, Method::PairCi | Method::FzSingle | Method::FzRubin | Method::FzVote)
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
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscoverConfig {
    pub alpha: f64,
    pub imputer: ImputerKind,
    pub mice: MiceConfig,
    pub ci: CITestConfig,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        DiscoverConfig {
            alpha: 0.05,
            imputer: ImputerKind::Mice,
            mice: MiceConfig::default(),
            ci: CITestConfig::default(),
        }
    }
}

impl DiscoverConfig {
    /// Uses one seed for imputation and CI queries.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mice.seed = seed;
        self.ci.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Discovery {
    pub graph: MixedGraph,
    pub skeleton: MixedGraph,
    /// Empty for FZ-vote, whose orientation uses per-run sets.
    pub sepsets: SepSetMap,
    pub n_tests: usize,
}

/// Skeleton search followed by v-structures and Meek closure.
pub fn pc(oracle: &dyn CiOracle, p: usize, alpha: f64) -> Result<Discovery> {
    let sk = pc_skeleton(oracle, p, alpha)?;
    let oriented = orient_v_structures(&sk.skeleton, &sk.sepsets);
    Ok(Discovery {
        graph: meek_rules(&oriented)?,
        skeleton: sk.skeleton,
        sepsets: sk.sepsets,
        n_tests: sk.n_tests,
    })
}

/// Estimates a CPDAG from incomplete data.
pub fn discover(data: &IncompleteDataset, method: Method, config: &DiscoverConfig) -> Result<Discovery> {
    let p = data.n_cols();
    if method == Method::PairCi {
        config.ci.validate()?;
        let n_eff = data.n_rows().min(config.ci.max_subsample);
        if n_eff < 4 * config.ci.k_folds {
            return Err(Error::Config(format!(
                "{} rows is too few for {} folds (need at least {})",
                data.n_rows(),
                config.ci.k_folds,
                4 * config.ci.k_folds
            )));
        }
    }
    let stack = if method.needs_imputation() {
        Some(impute(data, config.imputer, &config.mice)?)
    } else {
        None
    };
    match method {
        Method::PairCi => {
            let oracle = PairCiOracle::new(stack.as_ref().expect("imputed"), config.ci);
            pc(&oracle, p, config.alpha)
        }
        Method::CompleteCase => {
            let rows = data.complete_rows(&(0..p).collect::<Vec<_>>());
            let m = data.values().select_rows(&rows);
            pc(&FisherZOracle { rows: &m }, p, config.alpha)
        }
        Method::Testwise => pc(&TestwiseOracle { data }, p, config.alpha),
        Method::FzSingle => pc(
            &FisherZOracle {
                rows: stack.as_ref().expect("imputed").dataset(0),
            },
            p,
            config.alpha,
        ),
        Method::FzRubin => pc(
            &FzRubinOracle {
                stack: stack.as_ref().expect("imputed"),
            },
            p,
            config.alpha,
        ),
        Method::FzVote => fz_vote(stack.as_ref().expect("imputed"), config.alpha),
    }
}

/// Majority-vote PC over the completed datasets.
///
/// An edge survives if present in more than half of the per-imputation
/// skeletons. For an unshielded triple `x - z - y` of the vote skeleton, the
/// runs that removed `x - y` vote on whether `z` was in their separating
/// set; a strict majority against is required for a collider.
pub fn fz_vote(stack: &ImputedStack, alpha: f64) -> Result<Discovery> {
    let p = stack.n_cols();
    let m = stack.m();
    let runs: Vec<SkeletonResult> = stack
        .datasets()
        .iter()
        .map(|d| pc_skeleton(&FisherZOracle { rows: d }, p, alpha))
        .collect::<Result<_>>()?;
    let mut skeleton = MixedGraph::empty(p);
    for i in 0..p {
        for j in i + 1..p {
            let votes = runs.iter().filter(|r| r.skeleton.is_adjacent(i, j)).count();
            if 2 * votes > m {
                skeleton.set_undirected(i, j);
            }
        }
    }
    let oriented = orient_v_structures_with(&skeleton, |x, z, y| {
        let (mut without, mut with) = (0usize, 0usize);
        for r in &runs {
            if let Some(s) = r.sepsets.get(x, y) {
                if s.contains(&z) {
                    with += 1;
                } else {
                    without += 1;
                }
            }
        }
        without > with
    });
    Ok(Discovery {
        graph: meek_rules(&oriented)?,
        skeleton,
        sepsets: SepSetMap::new(),
        n_tests: runs.iter().map(|r| r.n_tests).sum(),
    })
}
