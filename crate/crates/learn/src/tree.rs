//! Binary decision trees: the fitted representation and the histogram-based
//! grower shared by every tree learner.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::Binned;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf { value: f64 },
}

/// Nodes in preorder; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict_row(&self, x: &Matrix, row: usize) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(row, feature as usize) <= threshold {
                        left
                    } else {
                        right
                    } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    pub(crate) fn is_valid_for(&self, n_features: usize) -> bool {
        let n = self.nodes.len() as u32;
        !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(i, node)| match *node {
                Node::Leaf { value } => value.is_finite(),
                // Preorder layout: children come strictly after their parent,
                // which also rules out cycles.
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    (feature as usize) < n_features
                        && !threshold.is_nan()
                        && left < n
                        && right < n
                        && left as usize > i
                        && right as usize > i
                }
            })
    }
}

/// Per-row or aggregated statistics. Their meaning depends on the
/// criterion: for Gini `g` is the positive weight and `h` the total weight;
/// for boosting `g` and `h` are gradient and hessian sums. `n` is always the
/// (possibly bootstrap-weighted) sample count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Stat {
    pub g: f64,
    pub h: f64,
    pub n: f64,
}

impl Stat {
    fn add(&mut self, o: Stat) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    fn minus(self, o: Stat) -> Stat {
        Stat {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    /// Weighted Gini impurity decrease; leaves hold the positive fraction.
    Gini,
    /// Squared-error reduction on `g` (residuals); Newton leaf `g / h`.
    Variance,
    /// Second-order gain with L2 penalty `lambda` and split cost `gamma`;
    /// leaf `-g / (h + lambda)`.
    SecondOrder { lambda: f64, gamma: f64 },
}

impl Criterion {
    fn impurity(self, s: Stat) -> f64 {
        match self {
            Criterion::Gini => {
                if s.h > 0.0 {
                    2.0 * s.g * (s.h - s.g) / s.h
                } else {
                    0.0
                }
            }
            Criterion::Variance => {
                if s.n > 0.0 {
                    -s.g * s.g / s.n
                } else {
                    0.0
                }
            }
            Criterion::SecondOrder { lambda, .. } => -s.g * s.g / (s.h + lambda),
        }
    }

    fn gain(self, parent: Stat, left: Stat, right: Stat) -> f64 {
        let decrease = self.impurity(parent) - self.impurity(left) - self.impurity(right);
        match self {
            Criterion::SecondOrder { gamma, .. } => 0.5 * decrease - gamma,
            _ => decrease,
        }
    }

    fn accepts(self, gain: f64) -> bool {
        match self {
            // CART splits impure nodes even without immediate improvement
            // (XOR needs this at the root).
            Criterion::Gini => gain >= 0.0,
            _ => gain > 0.0,
        }
    }

    pub fn leaf_value(self, s: Stat) -> f64 {
        match self {
            Criterion::Gini => {
                if s.h > 0.0 {
                    s.g / s.h
                } else {
                    0.0
                }
            }
            Criterion::Variance => {
                if s.h > 1e-12 {
                    s.g / s.h
                } else {
                    0.0
                }
            }
            Criterion::SecondOrder { lambda, .. } => {
                let v = -s.g / (s.h + lambda);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GrowConfig {
    pub max_depth: usize,
    pub min_samples_leaf: f64,
    /// Candidate columns per split; `>= n_cols` means exhaustive.
    pub max_features: usize,
    /// Extra-trees style: one uniformly random cut per candidate column.
    pub random_cuts: bool,
    pub criterion: Criterion,
}

/// Sparse per-node histogram over only the columns some row touches.
struct Histogram {
    slot: Vec<u32>,
    touched: Vec<u32>,
    offsets: Vec<usize>,
    explicit_rows: Vec<u32>,
    bins: Vec<Stat>,
}

const NO_SLOT: u32 = u32::MAX;

impl Histogram {
    fn new(n_cols: usize) -> Self {
        Histogram {
            slot: vec![NO_SLOT; n_cols],
            touched: Vec::new(),
            offsets: Vec::new(),
            explicit_rows: Vec::new(),
            bins: Vec::new(),
        }
    }

    fn fill(&mut self, data: &Binned, rows: &[u32], stats: &[Stat], total: Stat) {
        for &c in &self.touched {
            self.slot[c as usize] = NO_SLOT;
        }
        self.touched.clear();
        self.offsets.clear();
        self.explicit_rows.clear();
        self.bins.clear();
        for &r in rows {
            let st = stats[r as usize];
            let (cols, bins) = data.row(r as usize);
            for (&c, &b) in cols.iter().zip(bins) {
                let mut s = self.slot[c as usize];
                if s == NO_SLOT {
                    s = self.touched.len() as u32;
                    self.slot[c as usize] = s;
                    self.touched.push(c);
                    self.offsets.push(self.bins.len());
                    self.explicit_rows.push(0);
                    let width = data.n_bins(c as usize);
                    self.bins.resize(self.bins.len() + width, Stat::default());
                }
                self.bins[self.offsets[s as usize] + b as usize].add(st);
                self.explicit_rows[s as usize] += 1;
            }
        }
        for s in 0..self.touched.len() {
            if self.explicit_rows[s] as usize == rows.len() {
                continue;
            }
            let c = self.touched[s] as usize;
            let range = self.offsets[s]..self.offsets[s] + data.n_bins(c);
            let mut explicit = Stat::default();
            for st in &self.bins[range] {
                explicit.add(*st);
            }
            self.bins[self.offsets[s] + data.zero_bin[c] as usize].add(total.minus(explicit));
        }
    }

    fn column(&self, data: &Binned, c: usize) -> Option<&[Stat]> {
        let s = self.slot[c];
        (s != NO_SLOT).then(|| {
            let start = self.offsets[s as usize];
            &self.bins[start..start + data.n_bins(c)]
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: u16,
}

/// Bins with nonzero sample count, as (first, last).
fn present_range(hist: &[Stat]) -> Option<(usize, usize)> {
    let first = hist.iter().position(|s| s.n > 0.0)?;
    let last = hist.iter().rposition(|s| s.n > 0.0)?;
    Some((first, last))
}

fn best_cut(hist: &[Stat], total: Stat, feature: usize, cfg: &GrowConfig) -> Option<Candidate> {
    let (first, last) = present_range(hist)?;
    let mut left = Stat::default();
    let mut best: Option<Candidate> = None;
    for (b, st) in hist.iter().enumerate().take(last).skip(first) {
        left.add(*st);
        if st.n == 0.0 {
            continue;
        }
        let right = total.minus(left);
        if left.n < cfg.min_samples_leaf || right.n < cfg.min_samples_leaf {
            continue;
        }
        let gain = cfg.criterion.gain(total, left, right);
        if best.is_none_or(|c| gain > c.gain) {
            best = Some(Candidate {
                gain,
                feature,
                bin: b as u16,
            });
        }
    }
    best
}

fn random_cut(
    hist: &[Stat],
    total: Stat,
    feature: usize,
    cfg: &GrowConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let (first, last) = present_range(hist)?;
    if first == last {
        return None;
    }
    let b = rng.gen_range(first..last);
    let mut left = Stat::default();
    for st in &hist[..=b] {
        left.add(*st);
    }
    let right = total.minus(left);
    if left.n < cfg.min_samples_leaf || right.n < cfg.min_samples_leaf {
        return None;
    }
    Some(Candidate {
        gain: cfg.criterion.gain(total, left, right),
        feature,
        bin: b as u16,
    })
}

fn is_constant(hist: Option<&[Stat]>) -> bool {
    hist.and_then(present_range).is_none_or(|(a, b)| a == b)
}

struct Grower<'a> {
    data: &'a Binned,
    stats: &'a [Stat],
    cfg: &'a GrowConfig,
    rng: &'a mut ChaCha8Rng,
    importance: &'a mut [f64],
    hist: Histogram,
    feature_order: Vec<u32>,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn total(&self, rows: &[u32]) -> Stat {
        let mut t = Stat::default();
        for &r in rows {
            t.add(self.stats[r as usize]);
        }
        t
    }

    fn push_leaf(&mut self, total: Stat) -> u32 {
        self.nodes.push(Node::Leaf {
            value: self.cfg.criterion.leaf_value(total),
        });
        (self.nodes.len() - 1) as u32
    }

    fn find_split(&mut self, rows: &[u32], total: Stat) -> Option<Candidate> {
        let data = self.data;
        let cfg = self.cfg;
        self.hist.fill(data, rows, self.stats, total);

        let n_cols = data.n_cols;
        let candidates: Vec<usize> = if cfg.max_features >= n_cols {
            let mut c: Vec<usize> = self.hist.touched.iter().map(|&c| c as usize).collect();
            c.sort_unstable();
            c
        } else {
            // Draw columns without replacement until enough non-constant
            // ones are found or none remain.
            let mut chosen = Vec::with_capacity(cfg.max_features);
            let mut drawn = 0;
            while chosen.len() < cfg.max_features && drawn < n_cols {
                let pick = self.rng.gen_range(drawn..n_cols);
                self.feature_order.swap(drawn, pick);
                let c = self.feature_order[drawn] as usize;
                drawn += 1;
                if !is_constant(self.hist.column(data, c)) {
                    chosen.push(c);
                }
            }
            chosen
        };

        let evaluate = |c: usize| self.hist.column(data, c).and_then(|h| best_cut(h, total, c, cfg));
        let pick = |a: Option<Candidate>, b: Option<Candidate>| match (a, b) {
            (Some(x), Some(y)) => Some(if y.gain > x.gain { y } else { x }),
            (x, None) => x,
            (None, y) => y,
        };
        let best = if cfg.random_cuts {
            let mut best = None;
            for c in candidates {
                let cand = self
                    .hist
                    .column(data, c)
                    .and_then(|h| random_cut(h, total, c, cfg, self.rng));
                best = pick(best, cand);
            }
            best
        } else if candidates.len() >= 256 {
            // Position-ordered reduction keeps ties on the earliest column.
            candidates
                .par_iter()
                .map(|&c| evaluate(c))
                .reduce(|| None, pick)
        } else {
            candidates.into_iter().map(evaluate).fold(None, pick)
        };
        best.filter(|c| cfg.criterion.accepts(c.gain))
    }

    fn grow(&mut self, rows: &mut [u32], depth: usize) -> u32 {
        let total = self.total(rows);
        let pure = self.cfg.criterion == Criterion::Gini && (total.g <= 0.0 || total.g >= total.h);
        if depth >= self.cfg.max_depth || pure || total.n < 2.0 * self.cfg.min_samples_leaf {
            return self.push_leaf(total);
        }
        let Some(split) = self.find_split(rows, total) else {
            return self.push_leaf(total);
        };
        self.importance[split.feature] += split.gain.max(0.0);

        let data = self.data;
        let mut mid = 0;
        for k in 0..rows.len() {
            if data.bin_at(rows[k] as usize, split.feature) <= split.bin {
                rows.swap(mid, k);
                mid += 1;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature as u32,
            threshold: data.thresholds[split.feature][split.bin as usize],
            left,
            right,
        };
        at as u32
    }
}

/// Grows one tree on `rows`, adding each split's gain to `importance`.
pub(crate) fn grow(
    data: &Binned,
    mut rows: Vec<u32>,
    stats: &[Stat],
    cfg: &GrowConfig,
    rng: &mut ChaCha8Rng,
    importance: &mut [f64],
) -> Tree {
    let mut g = Grower {
        data,
        stats,
        cfg,
        rng,
        importance,
        hist: Histogram::new(data.n_cols),
        feature_order: (0..data.n_cols as u32).collect(),
        nodes: Vec::new(),
    };
    g.grow(&mut rows, 0);
    Tree { nodes: g.nodes }
}
