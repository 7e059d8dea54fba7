//! Fisher-Z partial-correlation tests and their deployment modes on
//! incomplete data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{ImputedStack, IncompleteDataset, Matrix};
use crate::error::{Error, Result};
use crate::stats::{correlation, mean, normal_two_sided_p, sample_variance, student_t_upper_tail};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherZResult {
    pub partial_corr: f64,
    pub z_stat: f64,
    pub p_value: f64,
    pub effective_n: usize,
    /// Rank-deficient conditioning design or a residual with no spread.
    pub singular: bool,
}

impl FisherZResult {
    fn singular(n: usize) -> Self {
        FisherZResult {
            partial_corr: 0.0,
            z_stat: 0.0,
            p_value: 1.0,
            effective_n: n,
            singular: true,
        }
    }
}

// keeps atanh finite for perfectly collinear inputs
const R_CAP: f64 = 1.0 - 1e-15;

/// Residuals of `targets` after OLS on `[1, cond]`, or `None` when the
/// design is rank-deficient.
fn ols_residuals(rows: &Matrix, cond: &[usize], targets: &[usize]) -> Option<Vec<Vec<f64>>> {
    let n = rows.rows();
    if cond.is_empty() {
        return Some(
            targets
                .iter()
                .map(|&t| {
                    let c = rows.column(t);
                    let m = mean(c);
                    c.iter().map(|v| v - m).collect()
                })
                .collect(),
        );
    }
    let s = cond.len() + 1;
    let design = DMatrix::from_fn(n, s, |i, j| if j == 0 { 1.0 } else { rows.get(i, cond[j - 1]) });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * (n.max(s) as f64);
    if svd.singular_values.iter().any(|&v| v <= tol) {
        return None;
    }
    Some(
        targets
            .iter()
            .map(|&t| {
                let y = DVector::from_column_slice(rows.column(t));
                let beta = svd.solve(&y, tol).expect("svd has u and v");
                (y - &design * beta).iter().copied().collect()
            })
            .collect(),
    )
}

/// Fisher-Z test of `z _||_ y | cond` on complete rows.
pub fn fisher_z(rows: &Matrix, z: usize, y: usize, cond: &[usize]) -> Result<FisherZResult> {
    let n = rows.rows();
    let dof = n as i64 - cond.len() as i64 - 3;
    if dof <= 0 {
        return Err(Error::InsufficientData(format!(
            "{n} rows for a conditioning set of size {}",
            cond.len()
        )));
    }
    let Some(res) = ols_residuals(rows, cond, &[z, y]) else {
        return Ok(FisherZResult::singular(n));
    };
    let Some(r) = correlation(&res[0], &res[1]) else {
        return Ok(FisherZResult::singular(n));
    };
    let z_stat = r.clamp(-R_CAP, R_CAP).atanh() * (dof as f64).sqrt();
    Ok(FisherZResult {
        partial_corr: r,
        z_stat,
        p_value: normal_two_sided_p(z_stat),
        effective_n: n,
        singular: false,
    })
}

/// Rows observed on every test column, as a matrix with columns
/// `[z, y, cond...]`.
pub fn testwise_delete(data: &IncompleteDataset, z: usize, y: usize, cond: &[usize]) -> Result<Matrix> {
    let cols: Vec<usize> = [z, y].iter().chain(cond).copied().collect();
    let rows = data.complete_rows(&cols);
    if rows.len() < cond.len() + 4 {
        return Err(Error::InsufficientData(format!(
            "{} complete rows for a conditioning set of size {}",
            rows.len(),
            cond.len()
        )));
    }
    Ok(data.values().submatrix(&rows, &cols))
}

/// Fisher-Z on the test-wise deleted rows.
pub fn testwise_fisher_z(data: &IncompleteDataset, z: usize, y: usize, cond: &[usize]) -> Result<FisherZResult> {
    let m = testwise_delete(data, z, y, cond)?;
    let local: Vec<usize> = (2..2 + cond.len()).collect();
    fisher_z(&m, 0, 1, &local)
}

/// Fisher-Z on the first completed dataset.
pub fn fz_single(stack: &ImputedStack, z: usize, y: usize, cond: &[usize]) -> Result<FisherZResult> {
    fisher_z(stack.dataset(0), z, y, cond)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FzRubinResult {
    pub q_bar: f64,
    pub w_bar: f64,
    pub b: f64,
    pub t_total: f64,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub m_used: usize,
    pub singular: bool,
}

/// Rubin-pooled Fisher-Z over the imputations of `stack`.
///
/// With zero between-imputation variance the normal reference is used, so
/// identical imputations reproduce the single-dataset test exactly.
pub fn fz_rubin(stack: &ImputedStack, z: usize, y: usize, cond: &[usize]) -> Result<FzRubinResult> {
    let n = stack.n_rows();
    let dfc = n as f64 - cond.len() as f64 - 3.0;
    let mut q = Vec::new();
    for m in stack.datasets() {
        let r = fisher_z(m, z, y, cond)?;
        if !r.singular {
            q.push(r.partial_corr.clamp(-R_CAP, R_CAP).atanh());
        }
    }
    if q.is_empty() {
        return Ok(FzRubinResult {
            q_bar: 0.0,
            w_bar: 0.0,
            b: 0.0,
            t_total: 0.0,
            statistic: 0.0,
            df: dfc,
            p_value: 1.0,
            m_used: 0,
            singular: true,
        });
    }
    let m = q.len();
    let q_bar = mean(&q);
    let w_bar = 1.0 / dfc;
    let b = sample_variance(&q);
    let t_total = w_bar + (1.0 + 1.0 / m as f64) * b;
    let mut statistic = q_bar / t_total.sqrt();
    let (df, p_value) = if b == 0.0 {
        // same expression as the single-dataset statistic, bit for bit
        statistic = q_bar * dfc.sqrt();
        (f64::INFINITY, normal_two_sided_p(statistic))
    } else {
        let df = crate::ci_test::barnard_rubin_df(b, t_total, m, dfc)?.max(1e-2);
        (df, (2.0 * student_t_upper_tail(statistic.abs(), df)).min(1.0))
    };
    Ok(FzRubinResult {
        q_bar,
        w_bar,
        b,
        t_total,
        statistic,
        df,
        p_value,
        m_used: m,
        singular: false,
    })
}
