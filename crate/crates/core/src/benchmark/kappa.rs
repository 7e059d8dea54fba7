//! Imputation-error diagnostics on synthetic data with known truth.

use serde::{Deserialize, Serialize};

use crate::data::{ImputedStack, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaDiagnostics {
    /// Root mean squared imputation error per incomplete row.
    pub kappa_imp: f64,
    pub kappa_y: f64,
    pub kappa_z: f64,
    pub product: f64,
    pub n_cells: usize,
}

/// Pools imputed cells across imputations and replicates.
///
/// Each imputed cell contributes its error `delta = truth - imputed`
/// together with the row's `Y` and `Z`.
#[derive(Debug, Clone, Default)]
pub struct KappaAccumulator {
    delta: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    row_sq: f64,
    rows: usize,
}

impl KappaAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, truth: &Matrix, stack: &ImputedStack, z: usize, y: usize) -> Result<()> {
        let (n, p) = (stack.n_rows(), stack.n_cols());
        if truth.rows() != n || truth.cols() != p {
            return Err(Error::Validation("truth and stack shapes differ".into()));
        }
        if z >= p || y >= p {
            return Err(Error::Contract("Z or Y index out of range".into()));
        }
        let mask = stack.source_mask();
        for data in stack.datasets() {
            for i in 0..n {
                let mut sq = 0.0;
                let mut any = false;
                for j in 0..p {
                    if mask[j * n + i] {
                        continue;
                    }
                    let d = truth.get(i, j) - data.get(i, j);
                    self.delta.push(d);
                    self.y.push(truth.get(i, y));
                    self.z.push(truth.get(i, z));
                    sq += d * d;
                    any = true;
                }
                if any {
                    self.row_sq += sq;
                    self.rows += 1;
                }
            }
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<KappaDiagnostics> {
        if self.delta.is_empty() {
            return Err(Error::InsufficientData("no imputed cells".into()));
        }
        let corr = |a: &[f64]| crate::stats::correlation(a, &self.delta).map_or(0.0, f64::abs);
        let (kappa_y, kappa_z) = (corr(&self.y), corr(&self.z));
        Ok(KappaDiagnostics {
            kappa_imp: (self.row_sq / self.rows as f64).sqrt(),
            kappa_y,
            kappa_z,
            product: kappa_y * kappa_z,
            n_cells: self.delta.len(),
        })
    }
}

/// Diagnostics for a single replicate.
pub fn kappa_estimate(truth: &Matrix, stack: &ImputedStack, z: usize, y: usize) -> Result<KappaDiagnostics> {
    let mut acc = KappaAccumulator::new();
    acc.add(truth, stack, z, y)?;
    acc.finish()
}
