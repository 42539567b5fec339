//! Spherical k-means over L2-normalized sparse rows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::text::SparseVec;

const MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct Clustering {
    /// Unit-norm centroids, one per cluster (a centroid may be zero if its
    /// cluster ended empty).
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Cosine similarity of each row to its assigned centroid.
    pub similarity: Vec<f64>,
    pub iterations: usize,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn dense(row: &SparseVec, dim: usize) -> Vec<f64> {
    let mut d = vec![0.0; dim];
    for (i, v) in row.iter() {
        d[i] = v;
    }
    d
}

/// Index and value of the largest similarity; ties go to the lowest index.
pub fn best_centroid(row: &SparseVec, centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, cent) in centroids.iter().enumerate() {
        let s = row.dot_dense(cent);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// k-means++ seeding with cosine distance `1 - sim`. Returns fewer than `k`
/// seeds when the rows have fewer than `k` distinct directions.
fn seed_centroids(rows: &[SparseVec], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let candidates: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_zero()).collect();
    if candidates.is_empty() {
        return vec![vec![0.0; dim]];
    }
    let first = candidates[rng.random_range(0..candidates.len())];
    let mut centroids = vec![dense(&rows[first], dim)];
    let mut dist: Vec<f64> = candidates
        .iter()
        .map(|&i| (1.0 - rows[i].dot_dense(&centroids[0])).max(0.0))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        if total <= 1e-12 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = candidates.len() - 1;
        for (j, d) in dist.iter().enumerate() {
            if *d > 0.0 && target < *d {
                pick = j;
                break;
            }
            target -= d;
        }
        let c = dense(&rows[candidates[pick]], dim);
        for (j, &i) in candidates.iter().enumerate() {
            let d = (1.0 - rows[i].dot_dense(&c)).max(0.0);
            if d < dist[j] {
                dist[j] = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

impl Clustering {
    /// Sum of row-to-centroid similarities; the objective being maximized.
    pub fn objective(&self) -> f64 {
        self.similarity.iter().sum()
    }
}

/// Cluster `rows` (unit-norm or zero) of dimension `dim` into at most `k`
/// clusters by bisecting spherical k-means followed by Lloyd refinement.
///
/// Starting from one cluster, the cluster whose 2-means split raises the
/// objective most is split until there are `k`. Each split keeps the best of
/// `n_init` k-means++ trials. Deterministic given `seed`.
pub fn spherical_kmeans(rows: &[SparseVec], dim: usize, k: usize, seed: u64, n_init: usize) -> Clustering {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = bisect(rows, dim, k.max(1), n_init.max(1), &mut rng);
    lloyd(rows, dim, init)
}

struct Split {
    gain: f64,
    halves: [Vec<usize>; 2],
}

fn resultant(rows: &[SparseVec], members: &[usize], dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    for &i in members {
        for (j, v) in rows[i].iter() {
            sum[j] += v;
        }
    }
    sum
}

fn best_split(rows: &[SparseVec], members: &[usize], dim: usize, n_init: usize, rng: &mut ChaCha8Rng) -> Option<Split> {
    let sub: Vec<SparseVec> = members.iter().map(|&i| rows[i].clone()).collect();
    let whole = resultant(&sub, &(0..sub.len()).collect::<Vec<_>>(), dim);
    let base = whole.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut best: Option<Clustering> = None;
    for _ in 0..n_init {
        let seeds = seed_centroids(&sub, dim, 2, rng);
        if seeds.len() < 2 {
            return None;
        }
        let c = lloyd(&sub, dim, seeds);
        if best.as_ref().is_none_or(|b| c.objective() > b.objective()) {
            best = Some(c);
        }
    }
    let best = best?;
    let mut halves = [Vec::new(), Vec::new()];
    for (&i, &l) in members.iter().zip(&best.labels) {
        halves[l].push(i);
    }
    if halves.iter().any(Vec::is_empty) {
        return None;
    }
    Some(Split {
        gain: best.objective() - base,
        halves,
    })
}

fn bisect(rows: &[SparseVec], dim: usize, k: usize, n_init: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let all: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_zero()).collect();
    if all.is_empty() {
        return vec![vec![0.0; dim]];
    }
    let mut clusters = vec![all];
    let mut splits = vec![if k > 1 {
        best_split(rows, &clusters[0], dim, n_init, rng)
    } else {
        None
    }];
    while clusters.len() < k {
        let pick = splits
            .iter()
            .enumerate()
            .filter_map(|(c, s)| s.as_ref().map(|s| (c, s.gain)))
            .filter(|&(_, g)| g > 1e-12)
            .fold(None, |acc: Option<(usize, f64)>, (c, g)| match acc {
                Some((_, bg)) if bg >= g => acc,
                _ => Some((c, g)),
            });
        let Some((c, _)) = pick else { break };
        let [left, right] = splits[c].take().expect("picked split").halves;
        let left_split = best_split(rows, &left, dim, n_init, rng);
        let right_split = best_split(rows, &right, dim, n_init, rng);
        clusters[c] = left;
        splits[c] = left_split;
        clusters.push(right);
        splits.push(right_split);
    }
    clusters
        .iter()
        .map(|m| {
            let mut c = resultant(rows, m, dim);
            normalize(&mut c);
            c
        })
        .collect()
}

fn lloyd(rows: &[SparseVec], dim: usize, mut centroids: Vec<Vec<f64>>) -> Clustering {
    let mut labels = vec![usize::MAX; rows.len()];
    let mut similarity = vec![0.0; rows.len()];
    let mut iterations = 0;

    for it in 0..MAX_ITER {
        iterations = it + 1;
        let assigned: Vec<(usize, f64)> = rows.par_iter().map(|r| best_centroid(r, &centroids)).collect();
        let mut changed = false;
        for (i, (c, s)) in assigned.into_iter().enumerate() {
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            similarity[i] = s;
        }
        if !changed && it > 0 {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut sizes = vec![0usize; centroids.len()];
        for (row, &c) in rows.iter().zip(&labels) {
            sizes[c] += 1;
            for (j, v) in row.iter() {
                sums[c][j] += v;
            }
        }
        // Empty clusters are re-seeded at the worst-fitting rows.
        let empty: Vec<usize> = (0..centroids.len()).filter(|&c| sizes[c] == 0).collect();
        if !empty.is_empty() {
            let mut order: Vec<usize> = (0..rows.len()).filter(|&i| !rows[i].is_zero()).collect();
            order.sort_by(|&a, &b| similarity[a].total_cmp(&similarity[b]).then(a.cmp(&b)));
            let mut taken = order.into_iter();
            for c in empty {
                if let Some(i) = taken.next() {
                    sums[c] = dense(&rows[i], dim);
                }
            }
        }
        for (c, mut s) in sums.into_iter().enumerate() {
            normalize(&mut s);
            centroids[c] = s;
        }
    }

    Clustering {
        centroids,
        labels,
        similarity,
        iterations,
    }
}
