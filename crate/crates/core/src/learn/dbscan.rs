//! Density-based clustering with deterministic label assignment.
//!
//! Core points (≥ min_pts neighbors within eps, self included) are merged
//! by union-find; border points join the cluster of their lowest-index
//! core neighbor; the rest is noise (−1). Cluster ids follow the order of
//! each component's lowest point index, so labels are permutation-stable
//! up to renaming.

fn euclid2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // root at the smaller index keeps labels deterministic
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Labels each point with its cluster id (0..C−1) or −1 for noise.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<isize> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1);
    let n = points.len();
    let eps2 = eps * eps;
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if euclid2(&points[i], &points[j]) <= eps2 {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    let core: Vec<bool> = (0..n).map(|i| neighbors[i].len() + 1 >= min_pts).collect();

    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if core[i] {
            for &j in &neighbors[i] {
                if core[j] {
                    uf.union(i, j);
                }
            }
        }
    }

    // cluster ids in order of each component's lowest core index
    let mut labels = vec![-1isize; n];
    let mut next = 0isize;
    let mut root_label: Vec<isize> = vec![-1; n];
    for i in 0..n {
        if core[i] {
            let r = uf.find(i);
            if root_label[r] < 0 {
                root_label[r] = next;
                next += 1;
            }
            labels[i] = root_label[r];
        }
    }
    for i in 0..n {
        if !core[i] {
            if let Some(&c) = neighbors[i].iter().find(|&&j| core[j]) {
                labels[i] = labels[c]; // lowest-index core neighbor
            }
        }
    }
    labels
}

/// k-distance elbow heuristic for eps: sorts each point's distance to its
/// k-th nearest neighbor and returns the value at the point of maximum
/// deviation from the chord (the knee of the curve).
pub fn suggest_eps(points: &[Vec<f64>], k: usize) -> f64 {
    assert!(points.len() > k, "need more points than k");
    let mut kdist: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut ds: Vec<f64> =
                points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| euclid2(p, q).sqrt()).collect();
            ds.sort_by(f64::total_cmp);
            ds[k - 1]
        })
        .collect();
    kdist.sort_by(f64::total_cmp);
    let n = kdist.len();
    let (x0, y0) = (0.0, kdist[0]);
    let (x1, y1) = ((n - 1) as f64, kdist[n - 1]);
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt().max(1e-12);
    let mut best = (0.0, kdist[n / 2]);
    for (i, &d) in kdist.iter().enumerate() {
        // distance from (i, d) to the chord
        let dist = ((y1 - y0) * i as f64 - (x1 - x0) * d + x1 * y0 - y1 * x0).abs() / len;
        if dist > best.0 {
            best = (dist, d);
        }
    }
    best.1.max(1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(cx: f64, cy: f64, n: usize, spread: f64) -> Vec<Vec<f64>> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64((cx.to_bits() ^ cy.to_bits()) as u64);
        (0..n)
            .map(|_| {
                vec![
                    cx + rng.gen_range(-spread..spread),
                    cy + rng.gen_range(-spread..spread),
                ]
            })
            .collect()
    }

    #[test]
    fn two_blobs_give_two_clusters() {
        let mut pts = blob(0.0, 0.0, 12, 0.3);
        pts.extend(blob(10.0, 10.0, 12, 0.3));
        let labels = dbscan(&pts, 1.0, 4);
        let c: std::collections::BTreeSet<isize> =
            labels.iter().cloned().filter(|&l| l >= 0).collect();
        assert_eq!(c.len(), 2);
        assert!(labels[..12].iter().all(|&l| l == labels[0]));
        assert!(labels[12..].iter().all(|&l| l == labels[12]));
        assert_ne!(labels[0], labels[12]);
    }

    #[test]
    fn chain_with_small_gaps_is_one_cluster() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.5, 0.0]).collect();
        let labels = dbscan(&pts, 0.6, 2);
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn isolated_point_is_noise() {
        let mut pts = blob(0.0, 0.0, 8, 0.2);
        pts.push(vec![50.0, 50.0]);
        let labels = dbscan(&pts, 1.0, 4);
        assert_eq!(*labels.last().unwrap(), -1);
    }

    #[test]
    fn labels_stable_under_permutation() {
        let mut pts = blob(0.0, 0.0, 10, 0.3);
        pts.extend(blob(8.0, 0.0, 10, 0.3));
        let labels = dbscan(&pts, 1.0, 3);
        // reverse the points; cluster structure must match after renaming
        let rev: Vec<Vec<f64>> = pts.iter().rev().cloned().collect();
        let rev_labels = dbscan(&rev, 1.0, 3);
        let n = pts.len();
        let mut rename = std::collections::HashMap::new();
        for i in 0..n {
            let a = labels[i];
            let b = rev_labels[n - 1 - i];
            assert_eq!(a < 0, b < 0, "noise classification changed");
            if a >= 0 {
                let e = rename.entry(a).or_insert(b);
                assert_eq!(*e, b, "cluster split or merged under permutation");
            }
        }
        let count = |ls: &[isize]| ls.iter().filter(|&&l| l >= 0).map(|&l| l).collect::<std::collections::BTreeSet<_>>().len();
        assert_eq!(count(&labels), count(&rev_labels));
    }

    #[test]
    fn suggest_eps_separates_scales() {
        let mut pts = blob(0.0, 0.0, 15, 0.4);
        pts.extend(blob(20.0, 0.0, 15, 0.4));
        let eps = suggest_eps(&pts, 4);
        assert!(eps > 0.0 && eps < 10.0, "eps {eps}");
        let labels = dbscan(&pts, eps, 4);
        let c: std::collections::BTreeSet<isize> =
            labels.iter().cloned().filter(|&l| l >= 0).collect();
        assert_eq!(c.len(), 2, "eps {eps} labels {labels:?}");
    }
}
