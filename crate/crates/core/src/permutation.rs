//! Placebo construction: permute Y within nearest-neighbour bins of the
//! conditioning set so that U keeps Y's dependence on X but loses any direct
//! link to Z.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::Matrix;
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationPlan {
    /// Disjoint bins of row indices, covering every row once.
    pub bins: Vec<Vec<usize>>,
    pub k_nn: usize,
    /// One bin holding every row: unconditional permutation.
    pub fallback: bool,
}

/// `max(2, floor(n^(2/(d+2))))`, computed exactly.
pub fn compute_knn(n: usize, d: usize) -> usize {
    let e = d as u32 + 2;
    let n2 = (n as u128) * (n as u128);
    let pow_le = |k: u128| k.checked_pow(e).is_some_and(|v| v <= n2);
    let mut k = ((n as f64).powf(2.0 / e as f64).floor() as u128).max(1);
    while k > 1 && !pow_le(k) {
        k -= 1;
    }
    while pow_le(k + 1) {
        k += 1;
    }
    (k as usize).max(2)
}

fn sq_dist(x: &Matrix, a: usize, b: usize) -> f64 {
    (0..x.cols())
        .map(|j| {
            let c = x.column(j);
            let t = c[a] - c[b];
            t * t
        })
        .sum()
}

/// Greedy disjoint bins: visit rows in ascending order; each unassigned row
/// opens a bin with its `k_nn - 1` nearest unassigned neighbours (ties by
/// row index).
pub fn build_plan(x_hat: &Matrix) -> PermutationPlan {
    let n = x_hat.rows();
    let d = x_hat.cols();
    let k_nn = compute_knn(n.max(1), d);
    if d == 0 || k_nn < 2 || n < 2 {
        return PermutationPlan {
            bins: if n == 0 { Vec::new() } else { vec![(0..n).collect()] },
            k_nn,
            fallback: true,
        };
    }
    let mut assigned = vec![false; n];
    let mut bins = Vec::with_capacity(n / k_nn + 1);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n);
    for seed_row in 0..n {
        if assigned[seed_row] {
            continue;
        }
        assigned[seed_row] = true;
        scratch.clear();
        scratch.extend((0..n).filter(|&i| !assigned[i]).map(|i| (sq_dist(x_hat, seed_row, i), i)));
        let take = (k_nn - 1).min(scratch.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take > 0 && take < scratch.len() {
            scratch.select_nth_unstable_by(take - 1, cmp);
        }
        let mut bin = Vec::with_capacity(take + 1);
        bin.push(seed_row);
        for &(_, i) in &scratch[..take] {
            assigned[i] = true;
            bin.push(i);
        }
        bin.sort_unstable();
        bins.push(bin);
    }
    PermutationPlan { bins, k_nn, fallback: false }
}

fn permute_in_bins(plan: &PermutationPlan, y: &[f64], rng: &mut Rng) -> Vec<f64> {
    let mut u = y.to_vec();
    for bin in &plan.bins {
        let mut vals: Vec<f64> = bin.iter().map(|&i| y[i]).collect();
        vals.shuffle(rng);
        for (&i, v) in bin.iter().zip(vals) {
            u[i] = v;
        }
    }
    u
}

/// Permutes `y` within the bins of [`build_plan`] on `x_hat`.
pub fn conditional_permute(x_hat: &Matrix, y: &[f64], seed: u64) -> Vec<f64> {
    assert_eq!(x_hat.rows(), y.len(), "x_hat and y must have equal rows");
    let plan = build_plan(x_hat);
    let mut rng = rng_from_seed(seed);
    permute_in_bins(&plan, y, &mut rng)
}

/// Placebo values for one cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldPlacebo {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    pub plan: PermutationPlan,
}

/// Training rows are permuted within bins; each held-out row takes the y of
/// a uniformly chosen member of the training bin with the nearest centroid.
pub fn permute_fold(train_x: &Matrix, train_y: &[f64], test_x: &Matrix, seed: u64) -> FoldPlacebo {
    assert_eq!(train_x.rows(), train_y.len());
    assert_eq!(train_x.cols(), test_x.cols());
    let plan = build_plan(train_x);
    let mut rng = rng_from_seed(seed);
    let train = permute_in_bins(&plan, train_y, &mut rng);
    let d = train_x.cols();
    let test = if plan.fallback {
        (0..test_x.rows())
            .map(|_| train_y[rng.random_range(0..train_y.len())])
            .collect()
    } else {
        let centroids: Vec<Vec<f64>> = plan
            .bins
            .iter()
            .map(|bin| {
                (0..d)
                    .map(|j| {
                        let c = train_x.column(j);
                        bin.iter().map(|&i| c[i]).sum::<f64>() / bin.len() as f64
                    })
                    .collect()
            })
            .collect();
        (0..test_x.rows())
            .map(|r| {
                let row = test_x.row(r);
                let (best, _) = centroids
                    .iter()
                    .enumerate()
                    .map(|(b, c)| (b, c.iter().zip(&row).map(|(a, x)| (a - x) * (a - x)).sum::<f64>()))
                    .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
                let bin = &plan.bins[best];
                train_y[bin[rng.random_range(0..bin.len())]]
            })
            .collect()
    };
    FoldPlacebo { train, test, plan }
}
