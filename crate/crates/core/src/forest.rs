//! Random-forest binary classifier with Gini splitting.
//!
//! Each tree is grown on a bootstrap sample of the canonically ordered
//! training set. Bootstrap draws and per-node feature sampling come from a
//! ChaCha8 stream seeded with `splitmix64(seed + (tree_index + 1) · φ)`,
//! where φ is the 64-bit golden-ratio constant, so a forest is fully
//! determined by its examples, configuration and seed.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureSchema;

pub const MODEL_MAGIC: &str = "tapgesture-forest";
pub const MODEL_VERSION: u32 = 1;
pub const RNG_DESCRIPTION: &str = "ChaCha8Rng seeded by splitmix64(seed + (tree_index + 1) * 0x9E3779B97F4A7C15)";

/// Minimum impurity decrease for a split to count as an improvement.
const MIN_DECREASE: f64 = 1e-12;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn tree_seed(seed: u64, tree_index: usize) -> u64 {
    splitmix64(seed.wrapping_add((tree_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features sampled per node; `None` means ⌊√p⌋.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Grow each tree on a bootstrap sample; otherwise on every example once.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: None,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn mtry_for(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features.max(1))
    }
}

/// Row-major feature matrix with binary labels.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    n_features: usize,
    rows: Vec<f64>,
    labels: Vec<bool>,
}

impl TrainingSet {
    pub fn new(n_features: usize) -> Self {
        Self {
            n_features,
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], positive: bool) -> Result<()> {
        if features.len() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: self.n_features,
                found: features.len(),
            });
        }
        self.rows.extend_from_slice(features);
        self.labels.push(positive);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// `feature <= threshold` goes to the next node in preorder, otherwise to `right`.
    Split {
        feature: u32,
        threshold: f64,
        right: u32,
    },
    Leaf {
        positive_fraction: f64,
        sample_count: u32,
    },
}

/// Decision tree stored as a preorder node list.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        validate_preorder(&nodes)?;
        Ok(Self { nodes })
    }

    /// Leaf positive fraction reached by `x`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        i + 1
                    } else {
                        right as usize
                    };
                }
                Node::Leaf {
                    positive_fraction, ..
                } => return positive_fraction,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { right, .. } => 1 + walk(nodes, i + 1).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }
}

fn validate_preorder(nodes: &[Node]) -> Result<()> {
    // every node must be reachable exactly once from the root in preorder
    fn walk(nodes: &[Node], i: usize) -> std::result::Result<usize, String> {
        match nodes.get(i) {
            None => Err(format!("node {i} out of range")),
            Some(Node::Leaf { positive_fraction, .. }) => {
                if !(0.0..=1.0).contains(positive_fraction) {
                    return Err(format!("leaf {i} fraction {positive_fraction} outside [0,1]"));
                }
                Ok(i + 1)
            }
            Some(Node::Split { right, .. }) => {
                let after_left = walk(nodes, i + 1)?;
                if after_left != *right as usize {
                    return Err(format!("node {i} right child {right} is not preorder"));
                }
                walk(nodes, after_left)
            }
        }
    }
    match walk(nodes, 0) {
        Ok(end) if end == nodes.len() => Ok(()),
        Ok(end) => Err(Error::ModelFormat {
            line: 0,
            reason: format!("{} trailing nodes", nodes.len() - end),
        }),
        Err(reason) => Err(Error::ModelFormat { line: 0, reason }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub seed: u64,
    pub mtry: usize,
    pub schema: FeatureSchema,
    /// Normalized Gini importances; all zero when no tree has a split.
    pub importances: Vec<f64>,
}

impl ForestModel {
    /// Mean leaf positive fraction over the trees.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.schema.len() {
            return Err(Error::SchemaMismatch {
                expected: self.schema.len(),
                found: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.score(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// The `k` most important features, descending, ties in schema order.
    pub fn top_features(&self, k: usize) -> Vec<(String, f64)> {
        let mut order: Vec<usize> = (0..self.importances.len()).collect();
        order.sort_by(|&a, &b| {
            self.importances[b]
                .total_cmp(&self.importances[a])
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(k)
            .map(|i| (self.schema.names()[i].clone(), self.importances[i]))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION}");
        let _ = writeln!(s, "rng {RNG_DESCRIPTION}");
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "mtry {}", self.mtry);
        let _ = writeln!(s, "features {}", self.schema.len());
        for n in self.schema.names() {
            let _ = writeln!(s, "f {n}");
        }
        s.push_str("importances");
        for v in &self.importances {
            let _ = write!(s, " {v:?}");
        }
        s.push('\n');
        let _ = writeln!(s, "trees {}", self.trees.len());
        for (i, t) in self.trees.iter().enumerate() {
            let _ = writeln!(s, "tree {i} {}", t.nodes.len());
            for n in &t.nodes {
                match n {
                    Node::Split {
                        feature,
                        threshold,
                        right,
                    } => {
                        let _ = writeln!(s, "S {feature} {threshold:?} {right}");
                    }
                    Node::Leaf {
                        positive_fraction,
                        sample_count,
                    } => {
                        let _ = writeln!(s, "L {positive_fraction:?} {sample_count}");
                    }
                }
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_text().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let lines: Vec<String> = std::io::BufReader::new(f)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(path, e))?;
        Self::from_lines(&lines)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<String> = text.lines().map(String::from).collect();
        Self::from_lines(&lines)
    }

    fn from_lines(lines: &[String]) -> Result<Self> {
        let mut p = LineParser { lines, pos: 0 };
        let head = p.next()?;
        if head != format!("{MODEL_MAGIC} {MODEL_VERSION}") {
            return Err(p.err(format!("unsupported header '{head}'")));
        }
        p.expect_prefix("rng ")?;
        let seed: u64 = p.keyed("seed")?;
        let mtry: usize = p.keyed("mtry")?;
        let n_features: usize = p.keyed("features")?;
        let mut names = Vec::with_capacity(n_features);
        for _ in 0..n_features {
            names.push(p.expect_prefix("f ")?.to_string());
        }
        let imp_line = p.expect_prefix("importances")?;
        let importances = imp_line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| p.err(e.to_string()))?;
        if importances.len() != n_features {
            return Err(p.err("importance count does not match features".into()));
        }
        let n_trees: usize = p.keyed("trees")?;
        let mut trees = Vec::with_capacity(n_trees);
        for t in 0..n_trees {
            let line = p.next()?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "tree" || parts[1] != t.to_string() {
                return Err(p.err(format!("expected 'tree {t} <nodes>'")));
            }
            let n_nodes: usize = parts[2].parse().map_err(|_| p.err("bad node count".into()))?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let line = p.next()?;
                let f: Vec<&str> = line.split_whitespace().collect();
                let node = match f.as_slice() {
                    ["S", feat, thr, right] => Node::Split {
                        feature: feat.parse().map_err(|_| p.err("bad feature index".into()))?,
                        threshold: thr.parse().map_err(|_| p.err("bad threshold".into()))?,
                        right: right.parse().map_err(|_| p.err("bad child index".into()))?,
                    },
                    ["L", frac, count] => Node::Leaf {
                        positive_fraction: frac.parse().map_err(|_| p.err("bad fraction".into()))?,
                        sample_count: count.parse().map_err(|_| p.err("bad count".into()))?,
                    },
                    _ => return Err(p.err(format!("bad node line '{line}'"))),
                };
                if let Node::Split { feature, .. } = node {
                    if feature as usize >= n_features {
                        return Err(p.err("feature index out of range".into()));
                    }
                }
                nodes.push(node);
            }
            let tree = Tree::from_nodes(nodes).map_err(|e| p.err(e.to_string()))?;
            trees.push(tree);
        }
        if p.next()? != "end" {
            return Err(p.err("expected 'end'".into()));
        }
        if trees.is_empty() {
            return Err(p.err("model has no trees".into()));
        }
        Ok(Self {
            trees,
            seed,
            mtry,
            schema: FeatureSchema::from_names(names),
            importances,
        })
    }
}

struct LineParser<'a> {
    lines: &'a [String],
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, reason: String) -> Error {
        Error::ModelFormat {
            line: self.pos,
            reason,
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| self.err("unexpected end of file".into()))?;
        self.pos += 1;
        Ok(line.as_str())
    }

    fn expect_prefix(&mut self, prefix: &str) -> Result<&'a str> {
        let line = self.next()?;
        line.strip_prefix(prefix)
            .ok_or_else(|| self.err(format!("expected '{}'", prefix.trim())))
    }

    fn keyed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.expect_prefix(&format!("{key} "))?;
        v.trim().parse().map_err(|_| self.err(format!("bad value for {key}")))
    }
}

/// Column-major copy of the training set in canonical row order.
struct Columns {
    n: usize,
    cols: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl Columns {
    fn canonical(set: &TrainingSet) -> Self {
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.sort_by(|&a, &b| {
            set.row(a)
                .iter()
                .zip(set.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(set.label(a).cmp(&set.label(b)))
        });
        let cols = (0..set.n_features())
            .map(|f| order.iter().map(|&i| set.row(i)[f]).collect())
            .collect();
        let labels = order.iter().map(|&i| set.label(i)).collect();
        Self {
            n: set.len(),
            cols,
            labels,
        }
    }
}

#[derive(Clone, Copy)]
struct Entry {
    value: f64,
    weight: u32,
    positive: bool,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

#[inline]
fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct Task {
    lo: usize,
    hi: usize,
    depth: usize,
    parent: Option<usize>,
}

fn grow_tree(data: &Columns, cfg: &ForestConfig, mtry: usize, seed: u64, imp: &mut [f64]) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.n;
    let p = data.cols.len();
    let mut weights = vec![u32::from(!cfg.bootstrap); n];
    if cfg.bootstrap {
        for _ in 0..n {
            weights[rng.random_range(0..n)] += 1;
        }
    }
    let mut idx: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0).collect();
    let root_weight = n as f64;

    let mut nodes: Vec<Node> = Vec::new();
    let mut scratch: Vec<Entry> = Vec::with_capacity(idx.len());
    let mut stack = vec![Task {
        lo: 0,
        hi: idx.len(),
        depth: 0,
        parent: None,
    }];

    while let Some(task) = stack.pop() {
        let me = nodes.len();
        if let Some(parent) = task.parent {
            if let Node::Split { right, .. } = &mut nodes[parent] {
                *right = me as u32;
            }
        }
        let members = &idx[task.lo..task.hi];
        let (mut w, mut wp) = (0u64, 0u64);
        for &i in members {
            let wi = weights[i as usize] as u64;
            w += wi;
            if data.labels[i as usize] {
                wp += wi;
            }
        }
        let leaf = Node::Leaf {
            positive_fraction: wp as f64 / w as f64,
            sample_count: w as u32,
        };
        let depth_ok = cfg.max_depth.is_none_or(|d| task.depth < d);
        if wp == 0 || wp == w || (w as usize) < cfg.min_samples_split.max(2) || !depth_ok {
            nodes.push(leaf);
            continue;
        }

        let wf = w as f64;
        let parent_imp = gini(wp as f64, wf);
        let mut candidates = index::sample(&mut rng, p, mtry).into_vec();
        candidates.sort_unstable();
        let mut best: Option<BestSplit> = None;
        for &f in &candidates {
            scratch.clear();
            let col = &data.cols[f];
            scratch.extend(members.iter().map(|&i| Entry {
                value: col[i as usize],
                weight: weights[i as usize],
                positive: data.labels[i as usize],
            }));
            scratch.sort_unstable_by(|a, b| a.value.total_cmp(&b.value));
            if scratch[0].value == scratch[scratch.len() - 1].value {
                continue;
            }
            let (mut lw, mut lp) = (0u64, 0u64);
            for k in 0..scratch.len() - 1 {
                let e = scratch[k];
                lw += e.weight as u64;
                if e.positive {
                    lp += e.weight as u64;
                }
                let next = scratch[k + 1].value;
                if next == e.value {
                    continue;
                }
                let rw = w - lw;
                let rp = wp - lp;
                let child = (lw as f64 * gini(lp as f64, lw as f64) + rw as f64 * gini(rp as f64, rw as f64)) / wf;
                if best.as_ref().is_none_or(|b| child < b.impurity) {
                    let mut threshold = 0.5 * (e.value + next);
                    // midpoint can round up to `next` for adjacent floats
                    if threshold >= next {
                        threshold = e.value;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity: child,
                    });
                }
            }
        }

        match best {
            Some(b) if parent_imp - b.impurity > MIN_DECREASE => {
                imp[b.feature] += wf / root_weight * (parent_imp - b.impurity);
                let col = &data.cols[b.feature];
                let slice = &mut idx[task.lo..task.hi];
                let mut split_at = 0;
                for k in 0..slice.len() {
                    if col[slice[k] as usize] <= b.threshold {
                        slice.swap(k, split_at);
                        split_at += 1;
                    }
                }
                let mid = task.lo + split_at;
                nodes.push(Node::Split {
                    feature: b.feature as u32,
                    threshold: b.threshold,
                    right: 0,
                });
                stack.push(Task {
                    lo: mid,
                    hi: task.hi,
                    depth: task.depth + 1,
                    parent: Some(me),
                });
                stack.push(Task {
                    lo: task.lo,
                    hi: mid,
                    depth: task.depth + 1,
                    parent: None,
                });
            }
            _ => nodes.push(leaf),
        }
    }
    Tree { nodes }
}

/// Trains a forest on `set`.
pub fn train_forest(set: &TrainingSet, schema: &FeatureSchema, cfg: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if set.n_features() != schema.len() {
        return Err(Error::SchemaMismatch {
            expected: schema.len(),
            found: set.n_features(),
        });
    }
    let pos = set.positives();
    if pos == 0 || pos == set.len() {
        return Err(Error::SingleClassTrainingSet);
    }
    if cfg.n_trees == 0 {
        return Err(Error::InvalidConfig("forest needs at least one tree".into()));
    }
    let data = Columns::canonical(set);
    let p = set.n_features();
    let mtry = cfg.mtry_for(p);
    let grown: Vec<(Tree, Vec<f64>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut imp = vec![0.0; p];
            let tree = grow_tree(&data, cfg, mtry, tree_seed(seed, t), &mut imp);
            (tree, imp)
        })
        .collect();

    let mut importances = vec![0.0; p];
    for (_, imp) in &grown {
        for (acc, v) in importances.iter_mut().zip(imp) {
            *acc += v;
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }
    Ok(ForestModel {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        seed,
        mtry,
        schema: schema.clone(),
        importances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(p: usize) -> FeatureSchema {
        FeatureSchema::from_names((0..p).map(|i| format!("f{i}")).collect())
    }

    fn set_from(rows: &[(Vec<f64>, bool)]) -> TrainingSet {
        let mut s = TrainingSet::new(rows[0].0.len());
        for (r, l) in rows {
            s.push(r, *l).unwrap();
        }
        s
    }

    #[test]
    fn separable_pair() {
        let set = set_from(&[(vec![0.0], false), (vec![1.0], true)]);
        let cfg = ForestConfig {
            n_trees: 1,
            mtry: Some(1),
            ..Default::default()
        };
        // find a seed whose bootstrap draws both examples
        let model = (0..50)
            .map(|s| train_forest(&set, &schema(1), &cfg, s).unwrap())
            .find(|m| m.trees[0].split_count() == 1)
            .unwrap();
        assert_eq!(model.score(&[0.0]).unwrap(), 0.0);
        assert_eq!(model.score(&[1.0]).unwrap(), 1.0);
        assert_eq!(model.trees[0].nodes()[0], Node::Split { feature: 0, threshold: 0.5, right: 2 });
        let top = model.top_features(1);
        assert_eq!(top, vec![("f0".to_string(), 1.0)]);
    }

    #[test]
    fn identical_features_give_constant_model() {
        let rows: Vec<(Vec<f64>, bool)> = (0..10).map(|i| (vec![1.0, 2.0], i < 3)).collect();
        let set = set_from(&rows);
        let model = train_forest(&set, &schema(2), &ForestConfig { n_trees: 20, ..Default::default() }, 4).unwrap();
        for t in &model.trees {
            assert_eq!(t.nodes().len(), 1);
        }
        assert!(model.importances.iter().all(|v| *v == 0.0));
        let top = model.top_features(2);
        assert_eq!(top, vec![("f0".to_string(), 0.0), ("f1".to_string(), 0.0)]);
        // each tree's leaf is its bootstrap's positive fraction; the mean is near 0.3
        let s = model.score(&[5.0, -1.0]).unwrap();
        assert!((s - 0.3).abs() < 0.1, "{s}");
    }

    #[test]
    fn constant_leaf_scores_its_fraction() {
        let model = ForestModel {
            trees: vec![Tree::from_nodes(vec![Node::Leaf { positive_fraction: 0.3, sample_count: 10 }]).unwrap()],
            seed: 0,
            mtry: 1,
            schema: schema(3),
            importances: vec![0.0; 3],
        };
        assert_eq!(model.score(&[1.0, 2.0, 3.0]).unwrap(), 0.3);
        assert_eq!(model.score(&[-1e9, 0.0, 1e9]).unwrap(), 0.3);
        assert!(matches!(model.score(&[1.0]), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn single_class_rejected() {
        let set = set_from(&[(vec![0.0], true), (vec![1.0], true)]);
        assert!(matches!(
            train_forest(&set, &schema(1), &ForestConfig::default(), 0),
            Err(Error::SingleClassTrainingSet)
        ));
        assert!(matches!(
            train_forest(&set, &schema(2), &ForestConfig::default(), 0),
            Err(Error::SchemaMismatch { .. })
        ));
        let mut s = TrainingSet::new(2);
        assert!(s.push(&[1.0], true).is_err());
    }

    #[test]
    fn informative_feature_ranked_first() {
        let mut rows = Vec::new();
        let mut state = 12345u64;
        let mut next = || {
            state = splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..200 {
            let positive = i % 2 == 0;
            let mut r: Vec<f64> = (0..6).map(|_| next()).collect();
            r[3] = if positive { 1.0 + next() } else { next() };
            rows.push((r, positive));
        }
        let set = set_from(&rows);
        let model = train_forest(&set, &schema(6), &ForestConfig { n_trees: 50, ..Default::default() }, 1).unwrap();
        assert_eq!(model.top_features(1)[0].0, "f3");
        let total: f64 = model.importances.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn model_text_round_trip() {
        let rows: Vec<(Vec<f64>, bool)> = (0..40).map(|i| (vec![i as f64 * 0.1, (i % 7) as f64 / 3.0], i % 3 == 0)).collect();
        let set = set_from(&rows);
        let model = train_forest(&set, &schema(2), &ForestConfig { n_trees: 5, ..Default::default() }, 9).unwrap();
        let text = model.to_text();
        let back = ForestModel::from_text(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_text(), text);
        assert!(ForestModel::from_text(&text.replace("end\n", "")).is_err());
        assert!(ForestModel::from_text("nonsense").is_err());
    }

    #[test]
    fn bad_preorder_rejected() {
        let nodes = vec![
            Node::Split { feature: 0, threshold: 0.0, right: 1 },
            Node::Leaf { positive_fraction: 0.0, sample_count: 1 },
            Node::Leaf { positive_fraction: 1.0, sample_count: 1 },
        ];
        assert!(Tree::from_nodes(nodes).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn deterministic_and_order_invariant(seed in any::<u64>(), n in 6usize..40) {
            let rows: Vec<(Vec<f64>, bool)> = (0..n)
                .map(|i| {
                    let h = splitmix64(seed ^ i as u64);
                    (vec![(h % 1000) as f64, ((h >> 20) % 17) as f64, ((h >> 40) % 5) as f64], h % 3 == 0 || i == 0)
                })
                .chain(std::iter::once((vec![-1.0, -1.0, -1.0], false)))
                .collect();
            let cfg = ForestConfig { n_trees: 8, ..Default::default() };
            let a = train_forest(&set_from(&rows), &schema(3), &cfg, seed).unwrap();
            let mut rev = rows.clone();
            rev.reverse();
            let b = train_forest(&set_from(&rev), &schema(3), &cfg, seed).unwrap();
            prop_assert_eq!(a.to_text(), b.to_text());
            for (r, _) in &rows {
                let s = a.score(r).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
            }
            let total: f64 = a.importances.iter().sum();
            prop_assert!(a.importances.iter().all(|v| *v >= 0.0));
            prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
        }

        #[test]
        fn threshold_half_matches_majority_vote(seed in any::<u64>()) {
            // feature 0 is distinct and always drawn, so fully grown trees have pure leaves
            let rows: Vec<(Vec<f64>, bool)> = (0..60)
                .map(|i| {
                    let h = splitmix64(seed.wrapping_add(i));
                    (vec![i as f64, (h % 97) as f64], (h >> 7) % 2 == 0)
                })
                .collect();
            prop_assume!(rows.iter().any(|r| r.1) && rows.iter().any(|r| !r.1));
            let cfg = ForestConfig { n_trees: 15, mtry: Some(2), ..Default::default() };
            let m = train_forest(&set_from(&rows), &schema(2), &cfg, seed).unwrap();
            for t in &m.trees {
                for node in t.nodes() {
                    if let Node::Leaf { positive_fraction, .. } = node {
                        prop_assert!(*positive_fraction == 0.0 || *positive_fraction == 1.0);
                    }
                }
            }
            for i in 0..80 {
                let x = [i as f64 * 0.77, (i * 13 % 97) as f64];
                let votes = m.trees.iter().filter(|t| t.score(&x) > 0.5).count();
                let ties = m.trees.iter().any(|t| t.score(&x) == 0.5);
                if ties || votes * 2 == m.trees.len() {
                    continue;
                }
                let s = m.score(&x).unwrap();
                prop_assert_eq!(s >= 0.5, votes * 2 > m.trees.len());
            }
        }
    }
}
