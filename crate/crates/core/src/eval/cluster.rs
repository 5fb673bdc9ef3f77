use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::rng;

/// Cluster id per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
}

impl Partition {
    pub fn new(assignment: Vec<usize>) -> Self {
        Partition { assignment }
    }

    /// Cluster ids from arbitrary labels, numbered in order of first appearance.
    pub fn from_labels<T: Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Partition { assignment }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Member lists of the non-empty clusters, ordered by cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let k = self.assignment.iter().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out.retain(|c| !c.is_empty());
        out
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters().len()
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// `(a + b) / C(n, 2)`: `a` counts pairs together in both partitions, `b`
/// pairs apart in both.
pub fn rand_index(x: &Partition, y: &Partition) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid("Rand index needs at least two items"));
    }
    let mut joint = std::collections::HashMap::new();
    let mut rows = std::collections::HashMap::new();
    let mut cols = std::collections::HashMap::new();
    for (&a, &b) in x.assignment.iter().zip(&y.assignment) {
        *joint.entry((a, b)).or_insert(0u64) += 1;
        *rows.entry(a).or_insert(0u64) += 1;
        *cols.entry(b).or_insert(0u64) += 1;
    }
    let together_both: u64 = joint.values().map(|&c| pairs(c)).sum();
    let together_x: u64 = rows.values().map(|&c| pairs(c)).sum();
    let together_y: u64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n as u64);
    let apart_both = total + together_both - together_x - together_y;
    Ok((together_both + apart_both) as f64 / total as f64)
}

/// Mean Rand index between `reference` and random relabelings of `clustering`
/// that keep its cluster sizes.
pub fn random_rand_index(reference: &Partition, clustering: &Partition, shuffles: usize, seed: u64) -> Result<f64> {
    if shuffles == 0 {
        return Err(Error::invalid("need at least one shuffle"));
    }
    let mut r = rng::seeded(seed);
    let mut perm = clustering.assignment.clone();
    let mut total = 0.0;
    for _ in 0..shuffles {
        perm.shuffle(&mut r);
        total += rand_index(reference, &Partition::new(perm.clone()))?;
    }
    Ok(total / shuffles as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub partition: Partition,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroid after each assignment step.
    pub inertia: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, m) in centroids.iter().enumerate() {
        let d = sq_dist(p, m);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm from `k` distinct random points. An emptied cluster is
/// moved to the point farthest from its centroid.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            actual: v.len(),
        });
    }
    let mut r = rng::seeded(seed);
    let mut centroids: Vec<Vec<f64>> = index::sample(&mut r, n, k)
        .into_iter()
        .map(|i| vectors[i].clone())
        .collect();
    let mut assignment = vec![usize::MAX; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        iterations += 1;
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for (i, v) in vectors.iter().enumerate() {
            let (c, d) = nearest(v, &centroids);
            changed |= assignment[i] != c;
            assignment[i] = c;
            dists[i] = d;
        }

        let mut sizes = vec![0usize; k];
        for &c in &assignment {
            sizes[c] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a cluster with two members");
            sizes[assignment[far]] -= 1;
            assignment[far] = c;
            sizes[c] = 1;
            dists[far] = 0.0;
            centroids[c] = vectors[far].clone();
            changed = true;
        }
        inertia.push(dists.iter().sum());
        if !changed {
            break;
        }

        for (c, m) in centroids.iter_mut().enumerate() {
            m.iter_mut().for_each(|x| *x = 0.0);
            for (v, _) in vectors.iter().zip(&assignment).filter(|(_, &a)| a == c) {
                for (x, y) in m.iter_mut().zip(v) {
                    *x += y;
                }
            }
            let s = sizes[c] as f64;
            m.iter_mut().for_each(|x| *x /= s);
        }
    }
    Ok(KMeans {
        partition: Partition::new(assignment),
        centroids,
        inertia,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rand_index_examples() {
        let x = Partition::new(vec![0, 0, 0, 1, 1]);
        let y = Partition::new(vec![0, 0, 1, 1, 1]);
        assert!((rand_index(&x, &y).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(rand_index(&x, &x).unwrap(), 1.0);
        let singles = Partition::new(vec![0, 1, 2, 3]);
        let one = Partition::new(vec![0; 4]);
        assert_eq!(rand_index(&singles, &one).unwrap(), 0.0);
        assert!(rand_index(&Partition::new(vec![0]), &Partition::new(vec![0])).is_err());
        assert!(rand_index(&x, &singles).is_err());
    }

    #[test]
    fn from_labels_numbers_by_appearance() {
        let p = Partition::from_labels(&["b", "a", "b", "c"]);
        assert_eq!(p.assignment(), &[0, 1, 0, 2]);
        assert_eq!(p.clusters(), vec![vec![0, 2], vec![1], vec![3]]);
    }

    #[test]
    fn kmeans_separated() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 10.0], vec![10.0, 11.0]];
        for seed in 0..10 {
            let km = kmeans(&pts, 2, seed, 100).unwrap();
            let a = km.partition.assignment();
            assert_eq!(a[0], a[1]);
            assert_eq!(a[2], a[3]);
            assert_ne!(a[0], a[2]);
        }
    }

    #[test]
    fn kmeans_extremes() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, (i * i) as f64]).collect();
        assert_eq!(kmeans(&pts, 5, 3, 50).unwrap().partition.n_clusters(), 5);
        assert_eq!(kmeans(&pts, 1, 3, 50).unwrap().partition.n_clusters(), 1);
        assert!(kmeans(&pts, 6, 3, 50).is_err());
        assert!(kmeans(&pts, 0, 3, 50).is_err());
    }

    #[test]
    fn kmeans_duplicate_points_reseed() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![5.0]];
        let km = kmeans(&pts, 3, 0, 20).unwrap();
        assert_eq!(km.partition.n_clusters(), 3);
    }

    #[test]
    fn random_baseline_is_below_perfect() {
        let gold = Partition::new((0..40).map(|i| i % 4).collect());
        let base = random_rand_index(&gold, &gold, 100, 7).unwrap();
        assert!(base < 0.8 && base > 0.5, "{base}");
    }
}
