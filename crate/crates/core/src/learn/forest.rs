//! Random forest classifier over Θ features: Gini-split CART trees with
//! bootstrap sampling and √d feature subsampling, deterministic per seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 100, max_depth: 12, min_leaf: 1, seed: 7 }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { label: usize },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomForest {
    trees: Vec<Tree>,
    pub n_classes: usize,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t) * (c as f64 / t)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = (0usize, 0usize);
    for (label, &c) in counts.iter().enumerate() {
        if c > best.1 {
            best = (label, c);
        }
    }
    best.0 // ties resolve to the lower label by scan order
}

fn grow(
    x: &[Vec<f64>],
    y: &[usize],
    idx: &[usize],
    n_classes: usize,
    depth: usize,
    config: &ForestConfig,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut counts = vec![0usize; n_classes];
    for &i in idx {
        counts[y[i]] += 1;
    }
    let node_gini = gini(&counts, idx.len());
    if depth >= config.max_depth || node_gini == 0.0 || idx.len() <= config.min_leaf {
        nodes.push(Node::Leaf { label: majority(&counts) });
        return nodes.len() - 1;
    }

    // √d feature subsample, drawn without replacement
    let d = x[0].len();
    let k = (d as f64).sqrt().ceil() as usize;
    let mut features: Vec<usize> = (0..d).collect();
    for i in 0..k.min(d) {
        let j = rng.gen_range(i..d);
        features.swap(i, j);
    }
    features.truncate(k.min(d));
    features.sort_unstable();

    let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)
    for &f in &features {
        let mut values: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = 0.5 * (w[0] + w[1]);
            let mut lc = vec![0usize; n_classes];
            let mut rc = vec![0usize; n_classes];
            let mut ln = 0;
            for &i in idx {
                if x[i][f] <= threshold {
                    lc[y[i]] += 1;
                    ln += 1;
                } else {
                    rc[y[i]] += 1;
                }
            }
            let rn = idx.len() - ln;
            if ln == 0 || rn == 0 {
                continue;
            }
            let score = (ln as f64 * gini(&lc, ln) + rn as f64 * gini(&rc, rn)) / idx.len() as f64;
            if best.map_or(true, |(b, _, _)| score < b - 1e-12) {
                best = Some((score, f, threshold));
            }
        }
    }

    match best {
        Some((score, feature, threshold)) if score < node_gini - 1e-12 => {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for &i in idx {
                if x[i][feature] <= threshold {
                    left.push(i);
                } else {
                    right.push(i);
                }
            }
            let at = nodes.len();
            nodes.push(Node::Leaf { label: 0 }); // placeholder
            let l = grow(x, y, &left, n_classes, depth + 1, config, rng, nodes);
            let r = grow(x, y, &right, n_classes, depth + 1, config, rng, nodes);
            nodes[at] = Node::Split { feature, threshold, left: l, right: r };
            at
        }
        _ => {
            nodes.push(Node::Leaf { label: majority(&counts) });
            nodes.len() - 1
        }
    }
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[usize], config: &ForestConfig) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty());
        let n_classes = y.iter().max().unwrap() + 1;
        let n = x.len();
        let mut trees = Vec::with_capacity(config.n_trees);
        for t in 0..config.n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut nodes = Vec::new();
            grow(x, y, &sample, n_classes, 0, config, &mut rng, &mut nodes);
            trees.push(Tree { nodes });
        }
        RandomForest { trees, n_classes }
    }

    /// Majority vote over trees; ties resolve to the lower label.
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        majority(&votes)
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let hits = x.iter().zip(y).filter(|(xi, &yi)| self.predict(xi) == yi).count();
        hits as f64 / x.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let t = i as f64 / n as f64;
            x.push(vec![t, (i % 5) as f64 * 0.1]);
            y.push(if t < 0.33 {
                0
            } else if t < 0.66 {
                1
            } else {
                2
            });
        }
        (x, y)
    }

    #[test]
    fn learns_separable_data() {
        let (x, y) = separable(120);
        let forest = RandomForest::fit(&x, &y, &ForestConfig { n_trees: 30, ..Default::default() });
        assert!(forest.accuracy(&x, &y) >= 0.98);
    }

    #[test]
    fn single_class_always_predicts_it() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![0usize; 10];
        let forest = RandomForest::fit(&x, &y, &ForestConfig::default());
        assert_eq!(forest.predict(&[3.0]), 0);
        assert_eq!(forest.predict(&[100.0]), 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = separable(60);
        let config = ForestConfig { n_trees: 10, seed: 42, ..Default::default() };
        let f1 = RandomForest::fit(&x, &y, &config);
        let f2 = RandomForest::fit(&x, &y, &config);
        for p in &x {
            assert_eq!(f1.predict(p), f2.predict(p));
        }
    }
}
