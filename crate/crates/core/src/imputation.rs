//! Multiple imputation.
//!
//! The default imputer is chained equations with Bayesian ridge regression:
//! every incomplete column is regressed on the current completions of the
//! other included columns, coefficients are drawn from their conjugate
//! posterior and the missing cells are redrawn from the posterior predictive.
//! Mean and marginal imputers are deliberately weaker alternatives.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ImputedStack, ImputerKind, IncompleteDataset, Matrix};
use crate::error::{Error, Result};
use crate::rng::{derived_rng, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiceConfig {
    pub m_imputations: usize,
    pub max_iterations: usize,
    pub ridge_prior_strength: f64,
    pub seed: u64,
}

impl Default for MiceConfig {
    fn default() -> Self {
        MiceConfig {
            m_imputations: 5,
            max_iterations: 10,
            ridge_prior_strength: 1.0,
            seed: 0,
        }
    }
}

impl MiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_imputations == 0 {
            return Err(Error::Config("m_imputations must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !(self.ridge_prior_strength > 0.0 && self.ridge_prior_strength.is_finite()) {
            return Err(Error::Config("ridge_prior_strength must be positive".into()));
        }
        Ok(())
    }
}

/// Conjugate posterior of a ridge regression on standardised predictors.
///
/// Prior `b ~ N(0, sigma^2 / lambda I)`; `sigma^2` is the maximum-likelihood
/// plug-in from the posterior-mean residuals. The intercept has a flat prior,
/// which makes it independent of the slopes once predictors are centred.
#[derive(Debug, Clone)]
pub struct BayesianRidgeFit {
    pub intercept_mean: f64,
    pub intercept_variance: f64,
    pub coefficient_mean: DVector<f64>,
    pub coefficient_covariance: DMatrix<f64>,
    pub noise_variance: f64,
    predictor_means: Vec<f64>,
    predictor_scales: Vec<f64>,
}

const NOISE_FLOOR: f64 = 1e-12;

impl BayesianRidgeFit {
    /// Fits `target` on `predictors` (each a full-length column) restricted
    /// to `rows`. Predictors with zero spread on those rows are dropped.
    pub fn fit(predictors: &[&[f64]], target: &[f64], rows: &[usize], lambda: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Fit("no rows to fit".into()));
        }
        let y: Vec<f64> = rows.iter().map(|&i| target[i]).collect();
        let y_mean = y.iter().sum::<f64>() / n as f64;

        let mut means = Vec::new();
        let mut scales = Vec::new();
        let mut kept: Vec<&[f64]> = Vec::new();
        for col in predictors {
            let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n as f64;
            let v = rows.iter().map(|&i| (col[i] - m).powi(2)).sum::<f64>() / n as f64;
            if v > 1e-12 * (1.0 + m * m) {
                means.push(m);
                scales.push(v.sqrt());
                kept.push(col);
            } else {
                means.push(m);
                scales.push(0.0);
            }
        }
        let k = kept.len();
        let mut x = DMatrix::<f64>::zeros(n, k);
        {
            let mut c = 0;
            for (j, col) in predictors.iter().enumerate() {
                if scales[j] == 0.0 {
                    continue;
                }
                for (r, &i) in rows.iter().enumerate() {
                    x[(r, c)] = (col[i] - means[j]) / scales[j];
                }
                c += 1;
            }
        }
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

        let (coef_mean, precision_inv) = if k == 0 {
            (DVector::zeros(0), DMatrix::zeros(0, 0))
        } else {
            let mut a = x.transpose() * &x;
            for d in 0..k {
                a[(d, d)] += lambda;
            }
            let chol = a
                .cholesky()
                .ok_or_else(|| Error::Fit("ridge system not positive definite".into()))?;
            let mean = chol.solve(&(x.transpose() * &yc));
            (mean, chol.inverse())
        };
        let resid = if k == 0 { yc.clone() } else { &yc - &x * &coef_mean };
        let noise = (resid.norm_squared() / n as f64).max(NOISE_FLOOR);
        let mut cov = precision_inv * noise;
        // symmetrise against round-off
        for i in 0..k {
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        Ok(BayesianRidgeFit {
            intercept_mean: y_mean,
            intercept_variance: noise / n as f64,
            coefficient_mean: coef_mean,
            coefficient_covariance: cov,
            noise_variance: noise,
            predictor_means: means,
            predictor_scales: scales,
        })
    }

    /// One posterior draw of (intercept, slopes on the kept predictors).
    pub fn draw(&self, rng: &mut Rng) -> PosteriorDraw<'_> {
        let k = self.coefficient_mean.len();
        let intercept =
            self.intercept_mean + self.intercept_variance.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let coefs = if k == 0 {
            DVector::zeros(0)
        } else {
            let z = DVector::from_iterator(k, (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)));
            match self.coefficient_covariance.clone().cholesky() {
                Some(ch) => &self.coefficient_mean + ch.l() * z,
                // covariance can be numerically semi-definite; fall back to
                // independent marginals
                None => DVector::from_iterator(
                    k,
                    (0..k).map(|d| {
                        self.coefficient_mean[d] + self.coefficient_covariance[(d, d)].max(0.0).sqrt() * z[d]
                    }),
                ),
            }
        };
        PosteriorDraw {
            fit: self,
            intercept,
            coefs,
        }
    }
}

pub struct PosteriorDraw<'a> {
    fit: &'a BayesianRidgeFit,
    intercept: f64,
    coefs: DVector<f64>,
}

impl PosteriorDraw<'_> {
    /// Linear predictor at `row` using full-length predictor columns.
    pub fn predict(&self, predictors: &[&[f64]], row: usize) -> f64 {
        let mut acc = self.intercept;
        let mut c = 0;
        for (j, col) in predictors.iter().enumerate() {
            let s = self.fit.predictor_scales[j];
            if s == 0.0 {
                continue;
            }
            acc += self.coefs[c] * (col[row] - self.fit.predictor_means[j]) / s;
            c += 1;
        }
        acc
    }
}

fn column_mean_of_observed(data: &IncompleteDataset, j: usize) -> f64 {
    let obs = data.observed_values(j);
    obs.iter().sum::<f64>() / obs.len() as f64
}

fn sorted_levels(data: &IncompleteDataset, j: usize) -> Vec<f64> {
    let mut v = data.observed_values(j);
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

fn nearest_level(levels: &[f64], x: f64) -> f64 {
    match levels.binary_search_by(|l| l.total_cmp(&x)) {
        Ok(i) => levels[i],
        Err(0) => levels[0],
        Err(i) if i == levels.len() => levels[i - 1],
        Err(i) => {
            if (x - levels[i - 1]) <= (levels[i] - x) {
                levels[i - 1]
            } else {
                levels[i]
            }
        }
    }
}

/// Chained-equation imputation with Bayesian-ridge posterior draws.
///
/// Columns in `excluded_columns` are neither imputed nor used as predictors;
/// their missing cells are filled with the observed column mean so the
/// returned matrices are complete.
pub fn mice_impute(
    data: &IncompleteDataset,
    config: &MiceConfig,
    excluded_columns: &BTreeSet<usize>,
) -> Result<ImputedStack> {
    config.validate()?;
    let p = data.n_cols();
    let n = data.n_rows();
    if let Some(&bad) = excluded_columns.iter().find(|&&j| j >= p) {
        return Err(Error::Config(format!("excluded column {bad} out of range")));
    }
    let included: Vec<usize> = (0..p).filter(|j| !excluded_columns.contains(j)).collect();
    for &j in &included {
        if data.observed_rows(j).len() < 2 {
            return Err(Error::Imputation {
                column: data.column_names()[j].clone(),
                message: "fewer than 2 observed values".into(),
            });
        }
    }
    let incomplete: Vec<usize> = included
        .iter()
        .copied()
        .filter(|&j| data.column_missing_count(j) > 0)
        .collect();
    if !incomplete.is_empty() && included.len() < 2 {
        return Err(Error::DegenerateDesign(
            "incomplete columns have no included predictors".into(),
        ));
    }

    let mut base = data.values().clone();
    for j in 0..p {
        if data.column_missing_count(j) == 0 {
            continue;
        }
        let fill = column_mean_of_observed(data, j);
        let mask = data.column_mask(j).to_vec();
        for (v, o) in base.column_mut(j).iter_mut().zip(mask) {
            if !o {
                *v = fill;
            }
        }
    }
    if incomplete.is_empty() {
        return Ok(ImputedStack::new(
            vec![base; config.m_imputations],
            ImputerKind::Mice,
            config.seed,
            data,
        ));
    }

    let plans: Vec<ColumnPlan> = incomplete
        .iter()
        .map(|&j| ColumnPlan {
            column: j,
            predictors: included.iter().copied().filter(|&c| c != j).collect(),
            observed: data.observed_rows(j),
            missing: (0..n).filter(|&i| !data.is_observed(i, j)).collect(),
            levels: (data.column_kinds()[j] == ColumnKind::Discrete).then(|| sorted_levels(data, j)),
        })
        .collect();

    let datasets = (0..config.m_imputations)
        .into_par_iter()
        .map(|chain| {
            let mut rng = derived_rng(config.seed, &[chain as u64]);
            run_chain(base.clone(), &plans, config, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImputedStack::new(datasets, ImputerKind::Mice, config.seed, data))
}

struct ColumnPlan {
    column: usize,
    predictors: Vec<usize>,
    observed: Vec<usize>,
    missing: Vec<usize>,
    levels: Option<Vec<f64>>,
}

fn run_chain(mut current: Matrix, plans: &[ColumnPlan], config: &MiceConfig, rng: &mut Rng) -> Result<Matrix> {
    for _sweep in 0..config.max_iterations {
        for plan in plans {
            let draws: Vec<f64> = {
                let preds: Vec<&[f64]> = plan.predictors.iter().map(|&c| current.column(c)).collect();
                let target = current.column(plan.column);
                let fit = BayesianRidgeFit::fit(&preds, target, &plan.observed, config.ridge_prior_strength)?;
                let draw = fit.draw(rng);
                let sd = fit.noise_variance.sqrt();
                plan.missing
                    .iter()
                    .map(|&i| {
                        let v = draw.predict(&preds, i) + sd * rng.sample::<f64, _>(StandardNormal);
                        match &plan.levels {
                            Some(levels) => nearest_level(levels, v),
                            None => v,
                        }
                    })
                    .collect()
            };
            let col = current.column_mut(plan.column);
            for (&i, v) in plan.missing.iter().zip(draws) {
                col[i] = v;
            }
        }
    }
    Ok(current)
}

/// Column-mean imputation; all `m` copies are identical.
pub fn mean_impute(data: &IncompleteDataset, m: usize) -> Result<ImputedStack> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    let mut filled = data.values().clone();
    for j in 0..data.n_cols() {
        if data.column_missing_count(j) == 0 {
            continue;
        }
        let fill = column_mean_of_observed(data, j);
        let mask = data.column_mask(j).to_vec();
        for (v, o) in filled.column_mut(j).iter_mut().zip(mask) {
            if !o {
                *v = fill;
            }
        }
    }
    Ok(ImputedStack::new(vec![filled; m], ImputerKind::Mean, 0, data))
}

/// Fills each missing cell with a uniform draw from the column's observed
/// values, independently for every copy.
pub fn marginal_impute(data: &IncompleteDataset, m: usize, seed: u64) -> Result<ImputedStack> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    let pools: Vec<Vec<f64>> = (0..data.n_cols()).map(|j| data.observed_values(j)).collect();
    let datasets = (0..m)
        .map(|chain| {
            let mut rng = derived_rng(seed, &[chain as u64]);
            let mut filled = data.values().clone();
            for (j, pool) in pools.iter().enumerate() {
                if data.column_missing_count(j) == 0 {
                    continue;
                }
                let mask = data.column_mask(j).to_vec();
                for (v, o) in filled.column_mut(j).iter_mut().zip(mask) {
                    if !o {
                        *v = pool[rng.random_range(0..pool.len())];
                    }
                }
            }
            filled
        })
        .collect();
    Ok(ImputedStack::new(datasets, ImputerKind::Marginal, seed, data))
}

/// Imputes once, with every variable available as a predictor, for reuse by
/// all CI queries of a discovery run.
pub fn build_cache(data: &IncompleteDataset, config: &MiceConfig) -> Result<ImputedStack> {
    mice_impute(data, config, &BTreeSet::new())
}

/// Dispatches on the imputer kind.
pub fn impute(data: &IncompleteDataset, kind: ImputerKind, config: &MiceConfig) -> Result<ImputedStack> {
    match kind {
        ImputerKind::Mice => build_cache(data, config),
        ImputerKind::Mean => mean_impute(data, config.m_imputations),
        ImputerKind::Marginal => marginal_impute(data, config.m_imputations, config.seed),
    }
}
