//! The paired cross-validated CI test over multiply imputed data.
//!
//! For every imputation and fold, a full model sees (X, Y) and a partial
//! model sees (X, U) where U is Y permuted within neighbourhoods of X. The
//! held-out loss gap is pooled across folds with a within-imputation variance
//! and across imputations with Rubin's rules.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnKind, ImputedStack, Matrix};
use crate::error::{Error, Result};
use crate::learners::{self, LearnerConfig, Variant, MAX_SUBSAMPLE};
use crate::permutation::permute_fold;
use crate::rng::{derive_seed, derived_rng};
use crate::stats::{mean, sample_variance, student_t_upper_tail};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceEstimator {
    Bayle,
    NadeauBengio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub enabled: bool,
    pub threshold: f64,
    pub after_m: usize,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            enabled: false,
            threshold: 4.0,
            after_m: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CITestConfig {
    pub k_folds: usize,
    pub alpha: f64,
    pub variance_estimator: VarianceEstimator,
    pub early_stop: EarlyStop,
    pub max_subsample: usize,
    pub learner: LearnerConfig,
    pub seed: u64,
}

impl Default for CITestConfig {
    fn default() -> Self {
        CITestConfig::general()
    }
}

impl CITestConfig {
    /// Random forests, 10 folds, no early stopping.
    pub fn general() -> Self {
        CITestConfig {
            k_folds: 10,
            alpha: 0.05,
            variance_estimator: VarianceEstimator::Bayle,
            early_stop: EarlyStop::default(),
            max_subsample: MAX_SUBSAMPLE,
            learner: LearnerConfig::default(),
            seed: 0,
        }
    }

    /// Extra-trees, 5 folds, early stopping after two imputations.
    pub fn fast() -> Self {
        CITestConfig {
            k_folds: 5,
            early_stop: EarlyStop {
                enabled: true,
                ..EarlyStop::default()
            },
            learner: LearnerConfig {
                variant: Variant::Fast,
                ..LearnerConfig::default()
            },
            ..CITestConfig::general()
        }
    }

    pub fn for_variant(variant: Variant) -> Self {
        match variant {
            Variant::General => CITestConfig::general(),
            Variant::Fast => CITestConfig::fast(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config("k_folds must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.early_stop.threshold > 0.0) {
            return Err(Error::Config("early-stop threshold must be positive".into()));
        }
        if self.early_stop.after_m == 0 {
            return Err(Error::Config("early-stop after_m must be at least 1".into()));
        }
        if self.max_subsample < 2 * self.k_folds {
            return Err(Error::Config("max_subsample too small for the fold count".into()));
        }
        self.learner.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldLoss {
    pub mu: f64,
    pub sigma2: f64,
    pub n_k: usize,
}

impl FoldLoss {
    pub fn from_differences(d: &[f64]) -> Self {
        FoldLoss {
            mu: mean(d),
            sigma2: sample_variance(d),
            n_k: d.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CITestResult {
    pub mu_hat: f64,
    pub mu_m: Vec<f64>,
    /// Within-imputation variance of each `mu_m`.
    pub u_m: Vec<f64>,
    pub w_bar: f64,
    pub b: f64,
    pub t_total: f64,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub reject: bool,
    pub early_stopped: bool,
    pub m_used: usize,
    pub n_used: usize,
    pub degenerate: bool,
    pub warnings: Vec<String>,
    /// Per-imputation fold summaries behind `mu_m` and `u_m`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_losses: Vec<Vec<FoldLoss>>,
}

/// `(1/n)(1/K) sum_k sigma2_k`.
pub fn bayle_variance(folds: &[FoldLoss], n: usize) -> Result<f64> {
    if folds.is_empty() {
        return Err(Error::Contract("no folds".into()));
    }
    if let Some(f) = folds.iter().find(|f| f.n_k < 2) {
        return Err(Error::Contract(format!("fold with n_k = {} < 2", f.n_k)));
    }
    let s: f64 = folds.iter().map(|f| f.sigma2).sum();
    Ok(s / (n as f64 * folds.len() as f64))
}

/// `(1/K + n_k/(n - n_k)) * s^2` with `s^2` the variance of fold means.
pub fn nadeau_bengio_variance(fold_means: &[f64], n: usize, n_k: usize) -> Result<f64> {
    if fold_means.len() < 2 {
        return Err(Error::Contract("need at least two folds".into()));
    }
    if n <= n_k {
        return Err(Error::Contract(format!("n ({n}) must exceed n_k ({n_k})")));
    }
    let k = fold_means.len() as f64;
    Ok((1.0 / k + n_k as f64 / (n - n_k) as f64) * sample_variance(fold_means))
}

/// Barnard-Rubin small-sample degrees of freedom.
pub fn barnard_rubin_df(b: f64, t: f64, m: usize, complete_df: f64) -> Result<f64> {
    if b < 0.0 || b.is_nan() {
        return Err(Error::Contract(format!("between variance must be non-negative, got {b}")));
    }
    if !(t > 0.0) {
        return Err(Error::Contract(format!("total variance must be positive, got {t}")));
    }
    if !(complete_df > 0.0) {
        return Err(Error::Contract("complete-data df must be positive".into()));
    }
    if m == 0 {
        return Err(Error::Contract("m must be at least 1".into()));
    }
    let gamma = ((1.0 + 1.0 / m as f64) * b / t).min(1.0);
    let nu_obs = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - gamma);
    if gamma == 0.0 || m < 2 {
        return Ok(nu_obs);
    }
    let nu_old = (m as f64 - 1.0) / (gamma * gamma);
    if nu_obs == 0.0 {
        return Ok(0.0);
    }
    Ok(nu_old * nu_obs / (nu_old + nu_obs))
}

/// Rubin-pooled statistics over per-imputation means and variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledStats {
    pub mu_hat: f64,
    pub w_bar: f64,
    pub b: f64,
    pub t_total: f64,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

// Student-t with df below this is numerically meaningless; only reached when
// the within variance vanishes.
const MIN_DF: f64 = 1e-2;

pub fn pool(mu_m: &[f64], u_m: &[f64], complete_df: f64) -> Result<PooledStats> {
    let m = mu_m.len();
    if m == 0 || m != u_m.len() {
        return Err(Error::Contract("pool needs matching non-empty inputs".into()));
    }
    let mu_hat = mean(mu_m);
    let w_bar = mean(u_m);
    let b = sample_variance(mu_m);
    let t_total = w_bar + (1.0 + 1.0 / m as f64) * b;
    if !(t_total > 0.0) {
        return Ok(PooledStats {
            mu_hat,
            w_bar,
            b,
            t_total,
            statistic: 0.0,
            df: complete_df,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let statistic = mu_hat / t_total.sqrt();
    let df = barnard_rubin_df(b, t_total, m, complete_df)?;
    let p_value = student_t_upper_tail(statistic, df.max(MIN_DF));
    Ok(PooledStats {
        mu_hat,
        w_bar,
        b,
        t_total,
        statistic,
        df,
        p_value,
        degenerate: false,
    })
}

/// True when the statistic pooled over the first `after_m` imputations
/// already exceeds the threshold in magnitude.
pub fn early_stop_check(partial: &PooledStats, config: &EarlyStop) -> bool {
    config.enabled && !partial.degenerate && partial.statistic.abs() > config.threshold
}

fn check_query(stack: &ImputedStack, z: usize, y: usize, cond: &[usize]) -> Result<()> {
    let p = stack.n_cols();
    for &c in [z, y].iter().chain(cond) {
        if c >= p {
            return Err(Error::Contract(format!("column {c} out of range (p = {p})")));
        }
    }
    if z == y {
        return Err(Error::Contract("z and y must differ".into()));
    }
    if cond.contains(&z) || cond.contains(&y) {
        return Err(Error::Contract("conditioning set contains a test variable".into()));
    }
    let mut c = cond.to_vec();
    c.sort_unstable();
    c.dedup();
    if c.len() != cond.len() {
        return Err(Error::Contract("conditioning set has duplicates".into()));
    }
    Ok(())
}

/// Runs the test of `Z _||_ Y | cond` on an imputed stack.
pub fn pair_ci(stack: &ImputedStack, z: usize, y: usize, cond: &[usize], config: &CITestConfig) -> Result<CITestResult> {
    config.validate()?;
    check_query(stack, z, y, cond)?;
    let n_all = stack.n_rows();
    let k = config.k_folds;

    let rows: Vec<usize> = if n_all > config.max_subsample {
        let mut rng = derived_rng(config.seed, &[0]);
        let mut r = sample_indices(&mut rng, n_all, config.max_subsample).into_vec();
        r.sort_unstable();
        r
    } else {
        (0..n_all).collect()
    };
    let n = rows.len();
    if n < 4 * k {
        return Err(Error::Config(format!("need at least {} rows for {k} folds, have {n}", 4 * k)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derived_rng(config.seed, &[1]));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
            (train, test)
        })
        .collect();

    let kind = stack.column_kinds()[z];
    let m_total = stack.m();
    let mut warnings = Vec::new();
    if m_total == 1 {
        warnings.push("single imputation: between-imputation variance set to 0".to_string());
    }
    let complete_df = (k - 1) as f64;
    let n_k_nominal = n / k;

    let mut mu_m = Vec::with_capacity(m_total);
    let mut u_m = Vec::with_capacity(m_total);
    let mut early_stopped = false;
    let mut all_folds = Vec::with_capacity(m_total);
    for m in 0..m_total {
        let fold_losses = imputation_folds(stack.dataset(m), &rows, &folds, z, y, cond, kind, config)?;
        mu_m.push(mean(&fold_losses.iter().map(|f| f.mu).collect::<Vec<_>>()));
        u_m.push(match config.variance_estimator {
            VarianceEstimator::Bayle => bayle_variance(&fold_losses, n)?,
            VarianceEstimator::NadeauBengio => {
                let means: Vec<f64> = fold_losses.iter().map(|f| f.mu).collect();
                nadeau_bengio_variance(&means, n, n_k_nominal)?
            }
        });
        all_folds.push(fold_losses);
        if config.early_stop.enabled && m + 1 == config.early_stop.after_m && m + 1 < m_total {
            let partial = pool(&mu_m, &u_m, complete_df)?;
            if early_stop_check(&partial, &config.early_stop) {
                early_stopped = true;
                break;
            }
        }
    }
    let stats = pool(&mu_m, &u_m, complete_df)?;
    if stats.degenerate {
        warnings.push("zero total variance: p-value set to 1".to_string());
    }
    Ok(CITestResult {
        mu_hat: stats.mu_hat,
        m_used: mu_m.len(),
        mu_m,
        u_m,
        w_bar: stats.w_bar,
        b: stats.b,
        t_total: stats.t_total,
        statistic: stats.statistic,
        df: stats.df,
        p_value: stats.p_value,
        reject: stats.p_value < config.alpha,
        early_stopped,
        n_used: n,
        degenerate: stats.degenerate,
        warnings,
        fold_losses: all_folds,
    })
}

fn gather(col: &[f64], rows: &[usize], pick: &[usize]) -> Vec<f64> {
    pick.iter().map(|&i| col[rows[i]]).collect()
}

#[allow(clippy::too_many_arguments)]
fn imputation_folds(
    data: &Matrix,
    rows: &[usize],
    folds: &[(Vec<usize>, Vec<usize>)],
    z: usize,
    y: usize,
    cond: &[usize],
    kind: ColumnKind,
    config: &CITestConfig,
) -> Result<Vec<FoldLoss>> {
    folds
        .par_iter()
        .enumerate()
        .map(|(k, (train, test))| {
            let x_train = Matrix::from_columns(cond.iter().map(|&c| gather(data.column(c), rows, train)).collect());
            let x_test = Matrix::from_columns(cond.iter().map(|&c| gather(data.column(c), rows, test)).collect());
            let x_train = with_rows(x_train, train.len());
            let x_test = with_rows(x_test, test.len());
            let y_train = gather(data.column(y), rows, train);
            let y_test = gather(data.column(y), rows, test);
            let z_train = gather(data.column(z), rows, train);
            let z_test = gather(data.column(z), rows, test);

            let placebo = permute_fold(&x_train, &y_train, &x_test, derive_seed(config.seed, &[2, k as u64]));
            // permutation and learner streams depend on the fold only, so
            // identical imputations yield identical fold losses
            let learner = LearnerConfig {
                seed: derive_seed(config.seed, &[3, k as u64]),
                ..config.learner
            };
            let candidate = Some(cond.len());

            let mut full_train = x_train.clone();
            full_train.push_column(&y_train);
            let mut partial_train = x_train;
            partial_train.push_column(&placebo.train);
            let mut full_test = x_test.clone();
            full_test.push_column(&y_test);
            let mut partial_test = x_test;
            partial_test.push_column(&placebo.test);

            let full = learners::fit(&full_train, &z_train, kind, &learner, candidate)?;
            let partial = learners::fit(&partial_train, &z_train, kind, &learner, candidate)?;
            let l_full = learners::loss(kind, &z_test, &full.predict(&full_test)?)?;
            let l_partial = learners::loss(kind, &z_test, &partial.predict(&partial_test)?)?;
            let d: Vec<f64> = l_partial.iter().zip(&l_full).map(|(a, b)| a - b).collect();
            Ok(FoldLoss::from_differences(&d))
        })
        .collect()
}

// Matrix::from_columns cannot infer a row count from zero columns.
fn with_rows(m: Matrix, rows: usize) -> Matrix {
    if m.cols() == 0 {
        Matrix::zeros(rows, 0)
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayle_arithmetic() {
        let folds = [
            FoldLoss { mu: 0.0, sigma2: 4.0, n_k: 50 },
            FoldLoss { mu: 0.0, sigma2: 8.0, n_k: 50 },
        ];
        assert!((bayle_variance(&folds, 100).unwrap() - 0.06).abs() < 1e-15);
        let flat = FoldLoss::from_differences(&[0.3; 10]);
        assert_eq!(bayle_variance(&[flat, flat], 20).unwrap(), 0.0);
    }

    #[test]
    fn bayle_rejects_tiny_folds() {
        let f = FoldLoss { mu: 0.0, sigma2: 0.0, n_k: 1 };
        assert!(matches!(bayle_variance(&[f], 1), Err(Error::Contract(_))));
    }

    #[test]
    fn nadeau_bengio_arithmetic() {
        // fold means with sample variance exactly 0.01
        let means = [0.0, 0.1, 0.2, 0.1, 0.1];
        let s2 = sample_variance(&means);
        let v = nadeau_bengio_variance(&means, 1000, 200).unwrap();
        assert!((v - 0.45 * s2).abs() < 1e-15);
        assert!((nadeau_bengio_variance(&[0.1, 0.12, 0.08, 0.1, 0.1], 1000, 200).unwrap()
            - 0.45 * sample_variance(&[0.1, 0.12, 0.08, 0.1, 0.1]))
        .abs()
            < 1e-15);
        assert_eq!(nadeau_bengio_variance(&[0.5; 5], 1000, 200).unwrap(), 0.0);
        assert!(nadeau_bengio_variance(&[0.1, 0.2], 100, 100).is_err());
    }

    #[test]
    fn barnard_rubin_limits() {
        assert!((barnard_rubin_df(0.0, 1.0, 5, 9.0).unwrap() - 7.5).abs() < 1e-12);
        let v = barnard_rubin_df(0.2, 1.0, 5, 9.0).unwrap();
        assert!((v - 5.268).abs() < 1e-3, "{v}");
        let low = barnard_rubin_df(0.1 / 1.2, 1.0, 5, 9.0).unwrap();
        let high = barnard_rubin_df(0.9 / 1.2, 1.0, 5, 9.0).unwrap();
        assert!(high < low);
        assert!(barnard_rubin_df(-0.1, 1.0, 5, 9.0).is_err());
    }

    #[test]
    fn pooling_with_identical_imputations_has_no_between_variance() {
        let s = pool(&[0.2; 5], &[0.01; 5], 4.0).unwrap();
        assert_eq!(s.b, 0.0);
        assert_eq!(s.t_total, s.w_bar);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let s = pool(&[0.0; 3], &[0.0; 3], 4.0).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.p_value, 1.0);
    }

    #[test]
    fn early_stop_threshold() {
        let mut s = pool(&[0.2, 0.21], &[0.001, 0.001], 4.0).unwrap();
        let cfg = EarlyStop { enabled: true, ..EarlyStop::default() };
        s.statistic = 5.1;
        assert!(early_stop_check(&s, &cfg));
        s.statistic = 3.9;
        assert!(!early_stop_check(&s, &cfg));
        s.statistic = 5.1;
        assert!(!early_stop_check(&s, &EarlyStop::default()));
    }

    #[test]
    fn config_defaults() {
        let g = CITestConfig::general();
        assert_eq!(g.k_folds, 10);
        assert_eq!(g.learner.variant, Variant::General);
        assert!(!g.early_stop.enabled);
        let f = CITestConfig::fast();
        assert_eq!(f.k_folds, 5);
        assert!(f.early_stop.enabled);
        assert_eq!(f.max_subsample, 2000);
        assert_eq!(f.learner.n_trees, 100);
        assert_eq!(f.learner.min_samples_leaf, 5);
    }

    fn gaussian_stack(n: usize, seed: u64, link: f64) -> ImputedStack {
        use rand::Rng as _;
        use rand_distr::StandardNormal;
        let mut rng = derived_rng(seed, &[]);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.sample::<f64, _>(StandardNormal)).collect();
        let z: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| a + link * b + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let names = crate::data::IncompleteDataset::default_names(3);
        ImputedStack::from_complete(Matrix::from_columns(vec![z, y, x]), names, 3).unwrap()
    }

    fn quick() -> CITestConfig {
        CITestConfig {
            learner: LearnerConfig { n_trees: 20, ..CITestConfig::fast().learner },
            early_stop: EarlyStop::default(),
            ..CITestConfig::fast()
        }
    }

    #[test]
    fn identical_z_and_y_rejects() {
        use rand::Rng as _;
        use rand_distr::StandardNormal;
        let mut rng = derived_rng(1, &[]);
        let y: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let names = crate::data::IncompleteDataset::default_names(2);
        let stack = ImputedStack::from_complete(Matrix::from_columns(vec![y.clone(), y]), names, 2).unwrap();
        let r = pair_ci(&stack, 0, 1, &[], &quick()).unwrap();
        assert!(r.reject);
        assert!(r.p_value < 1e-3);
        assert!(r.mu_hat > 0.5, "{}", r.mu_hat);
    }

    #[test]
    fn identical_imputations_give_rubin_identity() {
        let stack = gaussian_stack(200, 2, 0.0);
        let r = pair_ci(&stack, 0, 1, &[2], &quick()).unwrap();
        assert_eq!(r.b, 0.0);
        assert_eq!(r.t_total, r.w_bar);
        assert_eq!(r.m_used, 3);
    }

    #[test]
    fn seeded_runs_repeat() {
        let stack = gaussian_stack(150, 3, 0.5);
        let a = pair_ci(&stack, 0, 1, &[2], &quick()).unwrap();
        let b = pair_ci(&stack, 0, 1, &[2], &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn query_contract() {
        let stack = gaussian_stack(100, 4, 0.0);
        assert!(matches!(pair_ci(&stack, 0, 0, &[], &quick()), Err(Error::Contract(_))));
        assert!(matches!(pair_ci(&stack, 0, 1, &[1], &quick()), Err(Error::Contract(_))));
        assert!(matches!(pair_ci(&stack, 0, 1, &[7], &quick()), Err(Error::Contract(_))));
        let small = gaussian_stack(15, 4, 0.0);
        assert!(matches!(pair_ci(&small, 0, 1, &[], &quick()), Err(Error::Config(_))));
    }
}
