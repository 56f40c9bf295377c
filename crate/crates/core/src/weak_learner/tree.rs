//! Gini-trained decision trees separating P-samples from Q-samples.
//!
//! Training aggregates samples by feature cell first, so the cost of a node is
//! proportional to the number of distinct feature cells it holds rather than
//! the number of rows.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::tabular::{AttributeSchema, Dataset};

/// Mapping from smoothed class weights at a leaf to its value in `[−C, C]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafValue {
    /// `C·sign(w_P − w_Q)`: the hard majority-class vote, 0 on ties.
    #[default]
    Sign,
    /// `clamp(ln((w_P + s) / (w_Q + s)), −C, C)`: a clipped log density-ratio.
    LogRatio,
    /// `C·(w_P − w_Q) / (w_P + w_Q + 2s)`: the signed class proportion.
    Proportion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf_count: usize,
    pub c_bound: f64,
    pub leaf_smoothing: f64,
    #[serde(default)]
    pub leaf_value: LeafValue,
    /// Rescale Q-sample weights so both classes carry the same total weight.
    #[serde(default = "default_true")]
    pub balance_classes: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_leaf_count: 5,
            c_bound: std::f64::consts::LN_2,
            leaf_smoothing: 1.0,
            leaf_value: LeafValue::Sign,
            balance_classes: true,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(FbdeError::InvalidArgument(
                "max_depth must be at least 1".into(),
            ));
        }
        if self.min_leaf_count == 0 {
            return Err(FbdeError::InvalidArgument(
                "min_leaf_count must be at least 1".into(),
            ));
        }
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return Err(FbdeError::InvalidArgument(format!(
                "c_bound must be positive, got {}",
                self.c_bound
            )));
        }
        if !(self.leaf_smoothing >= 0.0 && self.leaf_smoothing.is_finite()) {
            return Err(FbdeError::NegativeSmoothing(self.leaf_smoothing));
        }
        Ok(())
    }
}

/// Routing rule of an internal node. Rows satisfying it go left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// Categorical one-vs-rest: `code == k`.
    Eq(u32),
    /// Ordered threshold on a bin index: `code <= k`.
    Le(u32),
}

impl Split {
    pub fn goes_left(self, code: u32) -> bool {
        match self {
            Split::Eq(k) => code == k,
            Split::Le(k) => code <= k,
        }
    }
}

/// Tree node. Serialized as `{"leaf": v}` or `{"attr", "split", "left", "right"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Leaf {
        leaf: f64,
    },
    Split {
        /// Index into the schema's attributes.
        attr: usize,
        split: Split,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn num_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a TreeNode)) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.visit(f);
            right.visit(f);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeClassifier {
    c_bound: f64,
    root: TreeNode,
}

impl DecisionTreeClassifier {
    pub fn from_root(c_bound: f64, root: TreeNode) -> Self {
        DecisionTreeClassifier { c_bound, root }
    }

    pub fn c_bound(&self) -> f64 {
        self.c_bound
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn num_leaves(&self) -> usize {
        self.root.num_leaves()
    }

    pub fn score(&self, coords: &[u32]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { leaf } => return *leaf,
                TreeNode::Split {
                    attr,
                    split,
                    left,
                    right,
                } => {
                    node = if split.goes_left(coords[*attr]) {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Preorder index of the leaf reached by `coords`.
    pub fn leaf_id(&self, coords: &[u32]) -> usize {
        let mut node = &self.root;
        let mut id = 0;
        loop {
            match node {
                TreeNode::Leaf { .. } => return id,
                TreeNode::Split {
                    attr,
                    split,
                    left,
                    right,
                } => {
                    if split.goes_left(coords[*attr]) {
                        node = left;
                    } else {
                        id += left.num_leaves();
                        node = right;
                    }
                }
            }
        }
    }

    /// Attribute indices used by any split.
    pub fn split_attributes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| {
            if let TreeNode::Split { attr, .. } = n {
                out.push(*attr);
            }
        });
        out
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| {
            if let TreeNode::Leaf { leaf } = n {
                out.push(*leaf);
            }
        });
        out
    }

    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return Err(FbdeError::InvalidArgument(format!(
                "tree bound must be positive, got {}",
                self.c_bound
            )));
        }
        let mut problem = None;
        self.root.visit(&mut |n| {
            if problem.is_some() {
                return;
            }
            match n {
                TreeNode::Leaf { leaf } if !leaf.is_finite() => {
                    problem = Some(FbdeError::ClassifierUnbounded(*leaf));
                }
                TreeNode::Leaf { leaf } if leaf.abs() > self.c_bound => {
                    problem = Some(FbdeError::InvalidArgument(format!(
                        "leaf value {leaf} outside [-{0}, {0}]",
                        self.c_bound
                    )));
                }
                TreeNode::Split { attr, .. } if *attr >= schema.num_attributes() => {
                    problem = Some(FbdeError::SchemaMismatch(format!(
                        "split on attribute {attr} outside schema"
                    )));
                }
                TreeNode::Split { attr, .. } if *attr == schema.sensitive_index() => {
                    problem = Some(FbdeError::SchemaMismatch(
                        "tree splits on the sensitive attribute".into(),
                    ));
                }
                _ => {}
            }
        });
        problem.map_or(Ok(()), Err)
    }
}

/// Aggregated class weights of one feature cell.
#[derive(Clone, Debug)]
struct CellStat {
    coords: Vec<u32>,
    wp: f64,
    wq: f64,
    n: usize,
}

#[derive(Clone, Copy, Default)]
struct Counts {
    wp: f64,
    wq: f64,
    n: usize,
}

impl Counts {
    fn add(&mut self, s: &CellStat) {
        self.wp += s.wp;
        self.wq += s.wq;
        self.n += s.n;
    }

    fn minus(self, o: Counts) -> Counts {
        Counts {
            wp: self.wp - o.wp,
            wq: self.wq - o.wq,
            n: self.n - o.n,
        }
    }

    fn weight(self) -> f64 {
        self.wp + self.wq
    }

    /// `W · (1 − p_P² − p_Q²)`
    fn impurity(self) -> f64 {
        let w = self.weight();
        if w <= 0.0 {
            return 0.0;
        }
        let (fp, fq) = (self.wp / w, self.wq / w);
        w * (1.0 - fp * fp - fq * fq)
    }
}

/// Gini impurity of a two-class weighted node.
pub fn gini(wp: f64, wq: f64) -> f64 {
    let c = Counts { wp, wq, n: 0 };
    let w = c.weight();
    if w <= 0.0 {
        0.0
    } else {
        c.impurity() / w
    }
}

fn leaf_value(cfg: &TreeConfig, c: Counts) -> f64 {
    let s = cfg.leaf_smoothing;
    let bound = cfg.c_bound;
    let v = match cfg.leaf_value {
        LeafValue::Sign => {
            let diff = c.wp - c.wq;
            if diff.abs() <= 1e-12 * (c.wp + c.wq) {
                0.0
            } else {
                bound.copysign(diff)
            }
        }
        LeafValue::LogRatio => {
            let (num, den) = (c.wp + s, c.wq + s);
            if num <= 0.0 && den <= 0.0 {
                0.0
            } else {
                (num.ln() - den.ln()).clamp(-bound, bound)
            }
        }
        LeafValue::Proportion => {
            let den = c.wp + c.wq + 2.0 * s;
            if den <= 0.0 {
                0.0
            } else {
                (bound * (c.wp - c.wq) / den).clamp(-bound, bound)
            }
        }
    };
    // avoid a signed zero so serialized trees are canonical
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

fn check_samples(schema: &AttributeSchema, p: &Dataset, q: &Dataset) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Err(FbdeError::EmptyDataset);
    }
    schema.ensure_same_domain(q.schema())
}

fn class_scale(p: &Dataset, q: &Dataset, balance: bool) -> Result<f64> {
    let (tp, tq) = (p.total_weight(), q.total_weight());
    if !(tp > 0.0) || !(tq > 0.0) {
        return Err(FbdeError::InvalidArgument(
            "sample set has zero total weight".into(),
        ));
    }
    Ok(if balance { tp / tq } else { 1.0 })
}

fn aggregate(p: &Dataset, q: &Dataset, q_scale: f64) -> Vec<CellStat> {
    let schema = p.schema();
    let mut cells: BTreeMap<usize, CellStat> = BTreeMap::new();
    let mut add = |ds: &Dataset, is_p: bool| {
        for (i, row) in ds.rows().iter().enumerate() {
            let x = schema.x_index(row);
            let entry = cells.entry(x).or_insert_with(|| CellStat {
                coords: schema.coords_of(x, 0),
                wp: 0.0,
                wq: 0.0,
                n: 0,
            });
            if is_p {
                entry.wp += ds.weight(i);
            } else {
                entry.wq += ds.weight(i) * q_scale;
            }
            entry.n += 1;
        }
    };
    add(p, true);
    add(q, false);
    cells.into_values().collect()
}

struct Builder<'a> {
    cfg: &'a TreeConfig,
    schema: &'a AttributeSchema,
    features: Vec<usize>,
}

struct Candidate {
    score: f64,
    attr: usize,
    split: Split,
}

impl Builder<'_> {
    fn build(&self, stats: &[&CellStat], depth: usize) -> TreeNode {
        let mut total = Counts::default();
        for s in stats {
            total.add(s);
        }
        let pure = total.wp <= 0.0 || total.wq <= 0.0;
        if depth >= self.cfg.max_depth || pure || total.n < 2 * self.cfg.min_leaf_count {
            return TreeNode::Leaf {
                leaf: leaf_value(self.cfg, total),
            };
        }
        match self.best_split(stats, total) {
            Some(best) if best.score < total.impurity() - 1e-12 * total.weight() => {
                let (left, right): (Vec<&CellStat>, Vec<&CellStat>) = stats
                    .iter()
                    .partition(|s| best.split.goes_left(s.coords[best.attr]));
                TreeNode::Split {
                    attr: best.attr,
                    split: best.split,
                    left: Box::new(self.build(&left, depth + 1)),
                    right: Box::new(self.build(&right, depth + 1)),
                }
            }
            _ => TreeNode::Leaf {
                leaf: leaf_value(self.cfg, total),
            },
        }
    }

    /// Lowest summed child impurity; ties keep the lowest attribute, then the
    /// lowest split value.
    fn best_split(&self, stats: &[&CellStat], total: Counts) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let min_leaf = self.cfg.min_leaf_count;
        for &attr in &self.features {
            let card = self.schema.attribute(attr).cardinality;
            if card < 2 {
                continue;
            }
            let mut hist = vec![Counts::default(); card];
            for s in stats {
                hist[s.coords[attr] as usize].add(s);
            }
            let mut consider = |left: Counts, split: Split| {
                let right = total.minus(left);
                if left.n < min_leaf || right.n < min_leaf {
                    return;
                }
                if left.weight() <= 0.0 || right.weight() <= 0.0 {
                    return;
                }
                let score = left.impurity() + right.impurity();
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(Candidate { score, attr, split });
                }
            };
            if self.schema.attribute(attr).is_ordered() {
                let mut prefix = Counts::default();
                for (k, h) in hist.iter().enumerate().take(card - 1) {
                    prefix.wp += h.wp;
                    prefix.wq += h.wq;
                    prefix.n += h.n;
                    consider(prefix, Split::Le(k as u32));
                }
            } else {
                for (k, h) in hist.iter().enumerate() {
                    if h.n > 0 {
                        consider(*h, Split::Eq(k as u32));
                    }
                }
            }
        }
        best
    }
}

/// Trains `c : 𝒳 → [−C, C]` to output positive values on P-samples and negative
/// values on Q-samples. The sensitive attribute is never used as a feature.
pub fn train_tree(p: &Dataset, q: &Dataset, cfg: &TreeConfig) -> Result<DecisionTreeClassifier> {
    cfg.validate()?;
    let schema = p.schema();
    check_samples(schema, p, q)?;
    let q_scale = class_scale(p, q, cfg.balance_classes)?;
    let stats = aggregate(p, q, q_scale);
    let refs: Vec<&CellStat> = stats.iter().collect();
    let builder = Builder {
        cfg,
        schema,
        features: schema.feature_indices().collect(),
    };
    let root = builder.build(&refs, 0);
    Ok(DecisionTreeClassifier {
        c_bound: cfg.c_bound,
        root,
    })
}

/// Weighted Gini impurity of the partition a tree induces on the training
/// samples, using the same class weighting as [`train_tree`].
pub fn training_gini(
    tree: &DecisionTreeClassifier,
    p: &Dataset,
    q: &Dataset,
    cfg: &TreeConfig,
) -> Result<f64> {
    check_samples(p.schema(), p, q)?;
    let q_scale = class_scale(p, q, cfg.balance_classes)?;
    let stats = aggregate(p, q, q_scale);
    let mut leaves: BTreeMap<usize, Counts> = BTreeMap::new();
    let mut total = 0.0;
    for s in &stats {
        leaves.entry(tree.leaf_id(&s.coords)).or_default().add(s);
        total += s.wp + s.wq;
    }
    Ok(leaves.values().map(|c| c.impurity()).sum::<f64>() / total)
}
