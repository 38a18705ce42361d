use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::{DistMatrix, Encoded};
use crate::util::derive_seed;

pub const KMEANS_RESTARTS: usize = 10;
const MAX_LLOYD_ITERATIONS: usize = 300;

fn choose2(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index from the contingency table of two labelings. Two
/// labelings whose pair structure admits no adjustment (e.g. both a single
/// cluster) are a perfect match and score 1.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len() as u64;
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return 1.0;
    }
    (index - expected) / denom
}

/// Mean silhouette (Euclidean) over the points at `rows`; `None` unless
/// there are between 2 and n−1 distinct labels.
pub(crate) fn silhouette(dist: &DistMatrix, rows: &[usize], labels: &[usize]) -> Option<f64> {
    let n = rows.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let used = sizes.iter().filter(|&&s| s > 0).count();
    if used < 2 || used > n - 1 {
        return None;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist.get(rows[i], rows[j]).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] == 1 {
            continue; // singleton clusters score 0
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / n as f64)
}

/// Centroid stored per variable block.
type Centroid = Vec<Vec<f64>>;

fn centroid_of(enc: &Encoded, members: impl Iterator<Item = usize>, fallback: &Centroid) -> Centroid {
    let mut c: Centroid = enc.block_sizes.iter().map(|&s| vec![0.0; s]).collect();
    let mut count = 0usize;
    for r in members {
        count += 1;
        for (v, cell) in enc.rows[r].iter().enumerate() {
            if let Some((i, x)) = cell {
                c[v][*i as usize] += x;
            }
        }
    }
    if count == 0 {
        return fallback.clone();
    }
    for block in &mut c {
        block.iter_mut().for_each(|x| *x /= count as f64);
    }
    c
}

fn point_centroid(enc: &Encoded, r: usize) -> Centroid {
    centroid_of(enc, std::iter::once(r), &Vec::new())
}

fn sq_dist_to(enc: &Encoded, r: usize, c: &Centroid, c_norm: f64) -> f64 {
    let mut d = c_norm;
    for (v, cell) in enc.rows[r].iter().enumerate() {
        if let Some((i, x)) = cell {
            d += x * x - 2.0 * x * c[v][*i as usize];
        }
    }
    d.max(0.0)
}

fn norm_sq(c: &Centroid) -> f64 {
    c.iter().flatten().map(|x| x * x).sum()
}

/// One k-means run: k-means++ seeding from `rng`, then Lloyd iterations.
/// Returns (labels, inertia).
fn kmeans_once(enc: &Encoded, dist: &DistMatrix, rows: &[usize], k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let n = rows.len();
    let mut seeds = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = rows.iter().map(|&r| dist.get(r, rows[seeds[0]])).collect();
    while seeds.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut t = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if t < w {
                    chosen = i;
                    break;
                }
                t -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        seeds.push(pick);
        for (i, &r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(dist.get(r, rows[pick]));
        }
    }
    let mut centroids: Vec<Centroid> = seeds.iter().map(|&s| point_centroid(enc, rows[s])).collect();
    let mut labels = vec![usize::MAX; n];
    let mut inertia = 0.0;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let norms: Vec<f64> = centroids.iter().map(norm_sq).collect();
        let mut changed = false;
        inertia = 0.0;
        for (i, &r) in rows.iter().enumerate() {
            let (best, d) = (0..k)
                .map(|c| (c, sq_dist_to(enc, r, &centroids[c], norms[c])))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            inertia += d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        centroids = (0..k)
            .map(|c| {
                let members = rows.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(&r, _)| r);
                centroid_of(enc, members, &centroids[c])
            })
            .collect();
    }
    (labels, inertia)
}

/// Best of `restarts` seeded k-means runs by inertia.
pub(crate) fn kmeans(enc: &Encoded, dist: &DistMatrix, rows: &[usize], k: usize, seed: u64, restarts: usize) -> Vec<usize> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &["kmeans", &k.to_string(), &restart.to_string()]));
        let (labels, inertia) = kmeans_once(enc, dist, rows, k, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    best.expect("at least one restart").0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub k: usize,
    pub silhouette: Option<f64>,
    /// No k in range produced a valid silhouette (e.g. all rows identical);
    /// everything is put in one cluster.
    pub degenerate: bool,
}

/// k-means for every k in 2..=k_max, keeping the labeling with the highest
/// silhouette (smaller k on ties).
pub(crate) fn select_clustering(
    enc: &Encoded,
    dist: &DistMatrix,
    rows: &[usize],
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> Clustering {
    let n = rows.len();
    let mut best: Option<Clustering> = None;
    for k in 2..=k_max.min(n.saturating_sub(1)) {
        let labels = kmeans(enc, dist, rows, k, seed, restarts);
        if let Some(s) = silhouette(dist, rows, &labels) {
            if best.as_ref().is_none_or(|b| s > b.silhouette.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(Clustering {
                    labels,
                    k,
                    silhouette: Some(s),
                    degenerate: false,
                });
            }
        }
    }
    best.unwrap_or(Clustering {
        labels: vec![0; n],
        k: 1,
        silhouette: None,
        degenerate: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAri {
    pub value: f64,
    pub k_truth: usize,
    pub k_predicted: usize,
    /// Clustering was ill-posed on at least one side.
    pub degenerate: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn cluster_ari_rows(
    enc_x: &Encoded,
    dxx: &DistMatrix,
    enc_y: &Encoded,
    dyy: &DistMatrix,
    rows: &[usize],
    k_max: usize,
    seed: u64,
    restarts: usize,
) -> ClusterAri {
    let cx = select_clustering(enc_x, dxx, rows, k_max, seed, restarts);
    let cy = select_clustering(enc_y, dyy, rows, k_max, seed, restarts);
    ClusterAri {
        value: adjusted_rand_index(&cx.labels, &cy.labels),
        k_truth: cx.k,
        k_predicted: cy.k,
        degenerate: cx.degenerate || cy.degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ari_hand_values() {
        assert_abs_diff_eq!(adjusted_rand_index(&[1, 1, 2, 2], &[1, 2, 1, 2]), -0.5, epsilon = 1e-12);
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1, 2], &[5, 5, 3, 3, 9]), 1.0);
        assert_eq!(adjusted_rand_index(&[0, 0, 0], &[1, 1, 1]), 1.0);
    }
}
