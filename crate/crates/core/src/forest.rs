//! Random forests for classification (Gini) and regression (variance
//! reduction).
//!
//! Training rows are put into a canonical order before any randomness is
//! drawn, so a fitted model depends only on the multiset of `(row, target)`
//! pairs and the seed. Tree `t` uses the seed `seed::derive(seed, "tree", [t])`.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Classify,
    Regress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Minimum number of samples in each leaf.
    pub min_node_size: usize,
    /// Features tried per node; `None` picks the task default.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn classify() -> Self {
        ForestParams {
            n_trees: 100,
            min_node_size: 1,
            max_features: None,
            max_depth: None,
            bootstrap: true,
        }
    }

    pub fn regress() -> Self {
        ForestParams {
            min_node_size: 5,
            ..Self::classify()
        }
    }

    fn features_per_node(&self, task: Task, d: usize) -> usize {
        let default = match task {
            Task::Classify => (d as f64).sqrt().ceil() as usize,
            Task::Regress => (d as f64 / 3.0).ceil() as usize,
        };
        self.max_features.unwrap_or(default).clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Leaf {
    /// `(class, count)` pairs sorted by class.
    Votes(Vec<(usize, usize)>),
    Mean(f64),
}

impl Leaf {
    /// Majority class; ties go to the smaller label.
    pub fn majority(&self) -> Option<usize> {
        match self {
            Leaf::Votes(v) => v
                .iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|&(c, _)| c),
            Leaf::Mean(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

/// Binary tree stored as a node arena; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(invalid("tree needs at least one node"));
        }
        for n in &nodes {
            if let Node::Split { left, right, .. } = n {
                if *left >= nodes.len() || *right >= nodes.len() {
                    return Err(invalid("tree child index out of range"));
                }
            }
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(l) => return l,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    task: Task,
    n_features: usize,
    seed: u64,
    params: ForestParams,
}

impl ForestModel {
    /// Assemble a model from hand-built trees.
    pub fn from_trees(task: Task, n_features: usize, trees: Vec<Tree>) -> Self {
        let params = ForestParams {
            n_trees: trees.len(),
            ..match task {
                Task::Classify => ForestParams::classify(),
                Task::Regress => ForestParams::regress(),
            }
        };
        ForestModel {
            trees,
            task,
            n_features,
            seed: 0,
            params,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn check_dims(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(invalid(format!(
                "model trained on {} features, got {}",
                self.n_features,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Majority vote over trees; ties go to the smaller label.
    pub fn predict_classes(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.check_dims(x)?;
        if self.task != Task::Classify {
            return Err(invalid("predict_classes on a regression forest"));
        }
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| {
                let mut votes: Vec<(usize, usize)> = Vec::new();
                for t in &self.trees {
                    if let Some(c) = t.leaf_for(x.row(i)).majority() {
                        match votes.binary_search_by_key(&c, |v| v.0) {
                            Ok(p) => votes[p].1 += 1,
                            Err(p) => votes.insert(p, (c, 1)),
                        }
                    }
                }
                Leaf::Votes(votes).majority().unwrap_or(0)
            })
            .collect())
    }

    /// Mean of tree predictions.
    pub fn predict_values(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        if self.task != Task::Regress {
            return Err(invalid("predict_values on a classification forest"));
        }
        let nt = self.trees.len() as f64;
        Ok((0..x.rows())
            .into_par_iter()
            .map(|i| {
                self.trees
                    .iter()
                    .map(|t| match t.leaf_for(x.row(i)) {
                        Leaf::Mean(v) => *v,
                        Leaf::Votes(_) => 0.0,
                    })
                    .sum::<f64>()
                    / nt
            })
            .collect())
    }
}

#[derive(Clone, Copy)]
enum Targets<'a> {
    Classes(&'a [usize]),
    Values(&'a [f64]),
}

impl Targets<'_> {
    fn cmp_rows(&self, a: usize, b: usize) -> Ordering {
        match self {
            Targets::Classes(y) => y[a].cmp(&y[b]),
            Targets::Values(y) => y[a].total_cmp(&y[b]),
        }
    }
}

pub fn fit_classifier(x: &Matrix, y: &[usize], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    fit(x, Targets::Classes(y), Task::Classify, params, seed)
}

pub fn fit_regressor(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("regression targets must be finite"));
    }
    fit(x, Targets::Values(y), Task::Regress, params, seed)
}

fn fit(x: &Matrix, y: Targets<'_>, task: Task, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let n = x.rows();
    let ylen = match y {
        Targets::Classes(v) => v.len(),
        Targets::Values(v) => v.len(),
    };
    if n != ylen {
        return Err(invalid(format!("{n} rows but {ylen} targets")));
    }
    if n < 2 {
        return Err(invalid("forest needs at least 2 rows"));
    }
    if params.n_trees == 0 {
        return Err(invalid("forest needs at least one tree"));
    }
    x.ensure_finite()?;

    // canonical row order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| y.cmp_rows(a, b))
    });
    let xs = x.select_rows(&order);
    let ys_c: Vec<usize>;
    let ys_v: Vec<f64>;
    let ys = match y {
        Targets::Classes(v) => {
            ys_c = order.iter().map(|&i| v[i]).collect();
            Targets::Classes(&ys_c)
        }
        Targets::Values(v) => {
            ys_v = order.iter().map(|&i| v[i]).collect();
            Targets::Values(&ys_v)
        }
    };

    let mtry = params.features_per_node(task, x.cols());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, "tree", &[t as u64]));
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = TreeBuilder {
                x: &xs,
                y: ys,
                params,
                mtry,
                rng,
                nodes: Vec::new(),
            };
            b.grow(sample, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        task,
        n_features: x.cols(),
        seed,
        params: params.clone(),
    })
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: Targets<'a>,
    params: &'a ForestParams,
    mtry: usize,
    rng: seed::Rng,
    nodes: Vec<Node>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl TreeBuilder<'_> {
    fn leaf(&self, idx: &[usize]) -> Leaf {
        match self.y {
            Targets::Classes(y) => {
                let mut v: Vec<(usize, usize)> = Vec::new();
                for &i in idx {
                    match v.binary_search_by_key(&y[i], |e| e.0) {
                        Ok(p) => v[p].1 += 1,
                        Err(p) => v.insert(p, (y[i], 1)),
                    }
                }
                Leaf::Votes(v)
            }
            Targets::Values(y) => Leaf::Mean(idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64),
        }
    }

    fn is_pure(&self, idx: &[usize]) -> bool {
        match self.y {
            Targets::Classes(y) => idx.iter().all(|&i| y[i] == y[idx[0]]),
            Targets::Values(y) => idx.iter().all(|&i| y[i] == y[idx[0]]),
        }
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(Leaf::Mean(0.0)));
        let min_leaf = self.params.min_node_size.max(1);
        let depth_ok = self.params.max_depth.map_or(true, |m| depth < m);
        let split = if depth_ok && idx.len() >= 2 * min_leaf && !self.is_pure(&idx) {
            self.find_split(&idx, min_leaf)
        } else {
            None
        };
        match split {
            None => self.nodes[at] = Node::Leaf(self.leaf(&idx)),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.x.get(i, s.feature) <= s.threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[at] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                };
            }
        }
        at
    }

    /// Best split over a random feature subset; if none of those features
    /// admits a valid split, the remaining features are tried in the same
    /// random order.
    fn find_split(&mut self, idx: &[usize], min_leaf: usize) -> Option<SplitChoice> {
        let d = self.x.cols();
        let mut feats: Vec<usize> = (0..d).collect();
        feats.shuffle(&mut self.rng);
        for chunk_start in (0..d).step_by(self.mtry) {
            let mut chunk: Vec<usize> = feats[chunk_start..(chunk_start + self.mtry).min(d)].to_vec();
            chunk.sort_unstable();
            let mut best: Option<SplitChoice> = None;
            for f in chunk {
                if let Some(c) = self.best_on_feature(idx, f, min_leaf) {
                    if best.as_ref().map_or(true, |b| c.score < b.score) {
                        best = Some(c);
                    }
                }
            }
            if best.is_some() {
                return best;
            }
        }
        None
    }

    fn best_on_feature(&self, idx: &[usize], f: usize, min_leaf: usize) -> Option<SplitChoice> {
        let mut sorted: Vec<usize> = idx.to_vec();
        sorted.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
        let n = sorted.len();
        let mut best: Option<SplitChoice> = None;
        let consider = |pos: usize, score: f64, best: &mut Option<SplitChoice>| {
            let lo = self.x.get(sorted[pos - 1], f);
            let hi = self.x.get(sorted[pos], f);
            if lo == hi || pos < min_leaf || n - pos < min_leaf {
                return;
            }
            let mut thr = lo + (hi - lo) / 2.0;
            if thr >= hi {
                thr = lo;
            }
            if best.as_ref().map_or(true, |b| score < b.score) {
                *best = Some(SplitChoice {
                    feature: f,
                    threshold: thr,
                    score,
                });
            }
        };
        match self.y {
            Targets::Classes(y) => {
                let mut classes: Vec<usize> = sorted.iter().map(|&i| y[i]).collect();
                classes.sort_unstable();
                classes.dedup();
                let ci = |c: usize| classes.binary_search(&c).unwrap();
                let mut right = vec![0usize; classes.len()];
                for &i in &sorted {
                    right[ci(y[i])] += 1;
                }
                let mut left = vec![0usize; classes.len()];
                for pos in 1..n {
                    let c = ci(y[sorted[pos - 1]]);
                    left[c] += 1;
                    right[c] -= 1;
                    let weighted_gini = |counts: &[usize], m: usize| {
                        let m = m as f64;
                        m - counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / m
                    };
                    let score = weighted_gini(&left, pos) + weighted_gini(&right, n - pos);
                    consider(pos, score, &mut best);
                }
            }
            Targets::Values(y) => {
                let total: f64 = sorted.iter().map(|&i| y[i]).sum();
                let total_sq: f64 = sorted.iter().map(|&i| y[i] * y[i]).sum();
                let (mut s, mut sq) = (0.0, 0.0);
                for pos in 1..n {
                    let v = y[sorted[pos - 1]];
                    s += v;
                    sq += v * v;
                    let (nl, nr) = (pos as f64, (n - pos) as f64);
                    let sse_l = sq - s * s / nl;
                    let sse_r = (total_sq - sq) - (total - s) * (total - s) / nr;
                    consider(pos, sse_l + sse_r, &mut best);
                }
            }
        }
        best
    }
}
