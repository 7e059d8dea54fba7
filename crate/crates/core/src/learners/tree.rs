//! Single decision trees: best-split CART (bootstrap forests) and
//! random-threshold splits (extra-trees).

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;

use crate::rng::Rng;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SplitRule {
    Best,
    RandomThreshold,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Target<'a> {
    Regression(&'a [f64]),
    Classification { labels: &'a [u32], n_classes: usize },
}

impl Target<'_> {
    fn width(&self) -> usize {
        match self {
            Target::Regression(_) => 1,
            Target::Classification { n_classes, .. } => *n_classes,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
}

/// Flat tree: internal nodes route on `x[feature] <= threshold`; leaves
/// store an offset into `values` (`width` consecutive entries).
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
    values: Vec<f64>,
    width: usize,
    #[cfg(test)]
    pub(crate) split_candidates: Vec<Vec<usize>>,
}

pub(crate) struct TreeParams {
    pub rule: SplitRule,
    pub min_samples_leaf: usize,
    pub max_features: usize,
    pub candidate: Option<usize>,
}

impl Tree {
    /// Leaf values reached by the row `row` of a column-major feature block.
    pub(crate) fn leaf(&self, columns: &[&[f64]], row: usize) -> &[f64] {
        let mut at = 0usize;
        loop {
            let node = &self.nodes[at];
            if node.feature == LEAF {
                let off = node.left as usize;
                return &self.values[off..off + self.width];
            }
            at = if columns[node.feature as usize][row] <= node.threshold {
                node.left as usize
            } else {
                node.right as usize
            };
        }
    }

    pub(crate) fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }
}

struct Builder<'a> {
    columns: &'a [&'a [f64]],
    target: Target<'a>,
    params: &'a TreeParams,
    nodes: Vec<Node>,
    values: Vec<f64>,
    // scratch
    sort_buf: Vec<(f64, u32)>,
    left_counts: Vec<f64>,
    total_counts: Vec<f64>,
    #[cfg(test)]
    split_candidates: Vec<Vec<usize>>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// `presorted` holds, per feature, all training rows in ascending order; it
/// is only consulted by the best-split rule and is built on demand if absent.
pub(crate) fn grow(
    columns: &[&[f64]],
    target: Target<'_>,
    rows: Vec<u32>,
    presorted: Option<&[Vec<u32>]>,
    params: &TreeParams,
    rng: &mut Rng,
) -> Tree {
    let width = target.width();
    let mut b = Builder {
        columns,
        target,
        params,
        nodes: Vec::new(),
        values: Vec::new(),
        sort_buf: Vec::new(),
        left_counts: vec![0.0; width],
        total_counts: vec![0.0; width],
        #[cfg(test)]
        split_candidates: Vec::new(),
    };
    match params.rule {
        SplitRule::RandomThreshold => b.grow_unsorted(rows, rng),
        SplitRule::Best => {
            let owned;
            let sorted = match presorted {
                Some(s) => s,
                None => {
                    owned = presort(columns);
                    &owned
                }
            };
            b.grow_presorted(rows, sorted, rng)
        }
    }
    Tree {
        nodes: b.nodes,
        values: b.values,
        width,
        #[cfg(test)]
        split_candidates: b.split_candidates,
    }
}

/// Row indices of each column in ascending value order.
pub(crate) fn presort(columns: &[&[f64]]) -> Vec<Vec<u32>> {
    columns
        .iter()
        .map(|col| {
            let mut o: Vec<u32> = (0..col.len() as u32).collect();
            o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            o
        })
        .collect()
}

const EMPTY: Node = Node { feature: LEAF, threshold: 0.0, left: 0, right: 0 };

fn partition(idx: &mut [u32], column: &[f64], threshold: f64) -> usize {
    let mut i = 0;
    for j in 0..idx.len() {
        if column[idx[j] as usize] <= threshold {
            idx.swap(i, j);
            i += 1;
        }
    }
    i
}

impl Builder<'_> {
    fn attach(&mut self, node_id: usize, split: &Split) -> usize {
        let left = self.nodes.len();
        self.nodes.push(EMPTY);
        self.nodes.push(EMPTY);
        self.nodes[node_id] = Node {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        left
    }

    fn grow_unsorted(&mut self, rows: Vec<u32>, rng: &mut Rng) {
        let mut idx = rows;
        self.nodes.push(EMPTY);
        let mut stack = vec![(0usize, 0usize, idx.len())];
        while let Some((node_id, start, end)) = stack.pop() {
            match self.try_split(&idx[start..end], rng, None) {
                Some(split) => {
                    let mid = start + partition(&mut idx[start..end], self.columns[split.feature], split.threshold);
                    let left = self.attach(node_id, &split);
                    stack.push((left + 1, mid, end));
                    stack.push((left, start, mid));
                }
                None => {
                    self.nodes[node_id].left = self.values.len() as u32;
                    self.push_leaf_value(&idx[start..end]);
                }
            }
        }
    }

    /// Best-split growth over per-feature orderings that are kept sorted by
    /// stable partitioning, so no node re-sorts.
    fn grow_presorted(&mut self, rows: Vec<u32>, presorted: &[Vec<u32>], rng: &mut Rng) {
        let n = rows.len();
        let n_all = self.columns.first().map_or(0, |c| c.len());
        let mut counts = vec![0u32; n_all];
        for &r in &rows {
            counts[r as usize] += 1;
        }
        let mut orders: Vec<Vec<u32>> = presorted
            .iter()
            .map(|all| {
                let mut o = Vec::with_capacity(n);
                for &r in all {
                    for _ in 0..counts[r as usize] {
                        o.push(r);
                    }
                }
                o
            })
            .collect();
        // repeated bootstrap rows always fall on the same side
        let mut goes_left = vec![false; n_all];
        let mut tmp_right: Vec<u32> = Vec::with_capacity(n);
        self.nodes.push(EMPTY);
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((node_id, start, end)) = stack.pop() {
            let split = {
                let ords: Vec<&[u32]> = orders.iter().map(|o| &o[start..end]).collect();
                self.try_split(ords.first().copied().unwrap_or(&[]), rng, Some(&ords))
            };
            match split {
                Some(split) => {
                    let col = self.columns[split.feature];
                    for &r in &orders[0][start..end] {
                        goes_left[r as usize] = col[r as usize] <= split.threshold;
                    }
                    let mut mid = start;
                    for o in &mut orders {
                        tmp_right.clear();
                        let mut w = start;
                        for k in start..end {
                            let r = o[k];
                            if goes_left[r as usize] {
                                o[w] = r;
                                w += 1;
                            } else {
                                tmp_right.push(r);
                            }
                        }
                        o[w..end].copy_from_slice(&tmp_right);
                        mid = w;
                    }
                    let left = self.attach(node_id, &split);
                    stack.push((left + 1, mid, end));
                    stack.push((left, start, mid));
                }
                None => {
                    self.nodes[node_id].left = self.values.len() as u32;
                    let idx = orders[0][start..end].to_vec();
                    self.push_leaf_value(&idx);
                }
            }
        }
    }

    fn push_leaf_value(&mut self, idx: &[u32]) {
        match self.target {
            Target::Regression(y) => {
                let s: f64 = idx.iter().map(|&i| y[i as usize]).sum();
                self.values.push(s / idx.len() as f64);
            }
            Target::Classification { labels, n_classes } => {
                let off = self.values.len();
                self.values.resize(off + n_classes, 0.0);
                for &i in idx {
                    self.values[off + labels[i as usize] as usize] += 1.0;
                }
                let inv = 1.0 / idx.len() as f64;
                for v in &mut self.values[off..] {
                    *v *= inv;
                }
            }
        }
    }

    /// Returns `None` for pure nodes, undersized nodes, or when no feature
    /// in the sampled subset admits a valid split.
    fn try_split(&mut self, idx: &[u32], rng: &mut Rng, sorted: Option<&[&[u32]]>) -> Option<Split> {
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf;
        if n < 2 * min_leaf || n < 2 {
            return None;
        }
        if self.is_pure(idx) {
            return None;
        }
        let d = self.columns.len();
        let k = self.params.max_features.clamp(1, d);
        let mut features: Vec<usize> = if k >= d {
            (0..d).collect()
        } else {
            sample_indices(rng, d, k).into_vec()
        };
        if let Some(c) = self.params.candidate {
            if !features.contains(&c) {
                let slot = rng.random_range(0..features.len());
                features[slot] = c;
            }
        }
        #[cfg(test)]
        self.split_candidates.push(features.clone());

        let mut best: Option<Split> = None;
        for &f in &features {
            let cand = match self.params.rule {
                SplitRule::RandomThreshold => self.random_split(idx, f, rng),
                SplitRule::Best => match sorted {
                    Some(orders) => self.best_split_sorted(orders[f], f),
                    None => self.best_split(idx, f),
                },
            };
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn is_pure(&self, idx: &[u32]) -> bool {
        match self.target {
            Target::Regression(y) => {
                let first = y[idx[0] as usize];
                idx.iter().all(|&i| y[i as usize] == first)
            }
            Target::Classification { labels, .. } => {
                let first = labels[idx[0] as usize];
                idx.iter().all(|&i| labels[i as usize] == first)
            }
        }
    }

    fn random_split(&mut self, idx: &[u32], f: usize, rng: &mut Rng) -> Option<Split> {
        let col = self.columns[f];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx {
            let v = col[i as usize];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo {
            return None;
        }
        let mut threshold = lo + rng.random::<f64>() * (hi - lo);
        if threshold >= hi {
            threshold = lo;
        }
        let n = idx.len();
        let min_leaf = self.params.min_samples_leaf;
        let score = match self.target {
            Target::Regression(y) => {
                let (mut sl, mut nl, mut st) = (0.0, 0usize, 0.0);
                for &i in idx {
                    let yi = y[i as usize];
                    st += yi;
                    if col[i as usize] <= threshold {
                        sl += yi;
                        nl += 1;
                    }
                }
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    return None;
                }
                let sr = st - sl;
                sl * sl / nl as f64 + sr * sr / nr as f64
            }
            Target::Classification { labels, .. } => {
                self.left_counts.iter_mut().for_each(|c| *c = 0.0);
                self.total_counts.iter_mut().for_each(|c| *c = 0.0);
                let mut nl = 0usize;
                for &i in idx {
                    let c = labels[i as usize] as usize;
                    self.total_counts[c] += 1.0;
                    if col[i as usize] <= threshold {
                        self.left_counts[c] += 1.0;
                        nl += 1;
                    }
                }
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    return None;
                }
                let (mut ql, mut qr) = (0.0, 0.0);
                for (l, t) in self.left_counts.iter().zip(&self.total_counts) {
                    ql += l * l;
                    qr += (t - l) * (t - l);
                }
                ql / nl as f64 + qr / nr as f64
            }
        };
        Some(Split { feature: f, threshold, score })
    }

    fn best_split(&mut self, idx: &[u32], f: usize) -> Option<Split> {
        let col = self.columns[f];
        self.sort_buf.clear();
        self.sort_buf.extend(idx.iter().map(|&i| (col[i as usize], i)));
        self.sort_buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        self.scan_sorted(f)
    }

    /// As [`Self::best_split`] with rows already in ascending feature order.
    fn best_split_sorted(&mut self, ordered: &[u32], f: usize) -> Option<Split> {
        let col = self.columns[f];
        self.sort_buf.clear();
        self.sort_buf.extend(ordered.iter().map(|&i| (col[i as usize], i)));
        self.scan_sorted(f)
    }

    fn scan_sorted(&mut self, f: usize) -> Option<Split> {
        let n = self.sort_buf.len();
        let min_leaf = self.params.min_samples_leaf;
        if self.sort_buf[0].0 >= self.sort_buf[n - 1].0 {
            return None;
        }
        let buf = &self.sort_buf;
        let mut best: Option<(usize, f64)> = None;
        match self.target {
            Target::Regression(y) => {
                let total: f64 = buf.iter().map(|&(_, i)| y[i as usize]).sum();
                let mut sl = 0.0;
                for pos in 1..n {
                    sl += y[buf[pos - 1].1 as usize];
                    if pos < min_leaf || n - pos < min_leaf || buf[pos - 1].0 >= buf[pos].0 {
                        continue;
                    }
                    let sr = total - sl;
                    let score = sl * sl / pos as f64 + sr * sr / (n - pos) as f64;
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((pos, score));
                    }
                }
            }
            Target::Classification { labels, .. } => {
                self.left_counts.iter_mut().for_each(|c| *c = 0.0);
                self.total_counts.iter_mut().for_each(|c| *c = 0.0);
                for &(_, i) in buf {
                    self.total_counts[labels[i as usize] as usize] += 1.0;
                }
                let mut ql = 0.0;
                let mut qr: f64 = self.total_counts.iter().map(|t| t * t).sum();
                for pos in 1..n {
                    let c = labels[buf[pos - 1].1 as usize] as usize;
                    let l = self.left_counts[c];
                    let r = self.total_counts[c] - l;
                    ql += 2.0 * l + 1.0;
                    qr -= 2.0 * r - 1.0;
                    self.left_counts[c] = l + 1.0;
                    if pos < min_leaf || n - pos < min_leaf || buf[pos - 1].0 >= buf[pos].0 {
                        continue;
                    }
                    let score = ql / pos as f64 + qr / (n - pos) as f64;
                    if best.is_none_or(|(_, s)| score > s) {
                        best = Some((pos, score));
                    }
                }
            }
        }
        best.map(|(pos, score)| {
            let (a, b) = (buf[pos - 1].0, buf[pos].0);
            let mut threshold = 0.5 * (a + b);
            if threshold >= b {
                threshold = a;
            }
            Split { feature: f, threshold, score }
        })
    }
}
