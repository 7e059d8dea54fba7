//! Logistic self- and cross-masking.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{IncompleteDataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::derived_rng;
use crate::stats::{logistic, mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    #[serde(rename = "complete")]
    McarComplete,
    Mar,
    Mnar,
    Mixed,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::McarComplete => "complete",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
            Mechanism::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    pub target_columns: BTreeSet<usize>,
    pub steepness: f64,
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn new(mechanism: Mechanism, rate: f64, target_columns: impl IntoIterator<Item = usize>, seed: u64) -> Self {
        MissingnessSpec {
            mechanism,
            rate,
            target_columns: target_columns.into_iter().collect(),
            steepness: 5.0,
            seed,
        }
    }
}

const BISECTION_ITERS: usize = 40;

fn standardize(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    let sd = sample_variance(xs).sqrt();
    if sd > 0.0 {
        xs.iter().map(|x| (x - m) / sd).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

/// Intercept `a` such that the fraction of rows with `u < logistic(a + s z)`
/// is as close to `rate` as bisection gets.
fn calibrate(driver: &[f64], uniforms: &[f64], steepness: f64, rate: f64) -> f64 {
    let frac = |a: f64| {
        let hits = driver
            .iter()
            .zip(uniforms)
            .filter(|(z, u)| **u < logistic(a + steepness * **z))
            .count();
        hits as f64 / driver.len() as f64
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if frac(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (frac(lo), frac(hi));
    if (flo - rate).abs() <= (fhi - rate).abs() {
        lo
    } else {
        hi
    }
}

pub fn inject_missingness(data: &Matrix, names: Vec<String>, spec: &MissingnessSpec) -> Result<IncompleteDataset> {
    let (n, p) = (data.rows(), data.cols());
    if spec.mechanism == Mechanism::McarComplete {
        return IncompleteDataset::from_complete(data.clone(), names);
    }
    if !(spec.rate > 0.0 && spec.rate < 1.0) {
        return Err(Error::Config(format!("missingness rate must lie in (0, 1), got {}", spec.rate)));
    }
    if spec.target_columns.is_empty() {
        return Err(Error::Config("no target columns for missingness".into()));
    }
    if let Some(&bad) = spec.target_columns.iter().find(|&&c| c >= p) {
        return Err(Error::Config(format!("target column {bad} out of range (p = {p})")));
    }
    let mut rng = derived_rng(spec.seed, &[]);
    let targets: Vec<usize> = spec.target_columns.iter().copied().collect();
    let non_targets: Vec<usize> = (0..p).filter(|c| !spec.target_columns.contains(c)).collect();
    let mar: BTreeSet<usize> = match spec.mechanism {
        Mechanism::Mar => targets.iter().copied().collect(),
        Mechanism::Mnar => BTreeSet::new(),
        _ => {
            let mut shuffled = targets.clone();
            shuffled.shuffle(&mut rng);
            shuffled[..targets.len() / 2].iter().copied().collect()
        }
    };
    if !mar.is_empty() && non_targets.is_empty() {
        return Err(Error::Config("MAR missingness needs a fully observed non-target column".into()));
    }
    let mut mask = vec![true; n * p];
    for &j in &targets {
        let driver_col = if mar.contains(&j) {
            non_targets[rng.random_range(0..non_targets.len())]
        } else {
            j
        };
        let driver = standardize(data.column(driver_col));
        let uniforms: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let a = calibrate(&driver, &uniforms, spec.steepness, spec.rate);
        for i in 0..n {
            if uniforms[i] < logistic(a + spec.steepness * driver[i]) {
                mask[j * n + i] = false;
            }
        }
    }
    IncompleteDataset::new(data.clone(), mask, names)
}
