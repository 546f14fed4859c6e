//! Lloyd's k-means with k-means++ seeding, used to segment users.
//!
//! Distances ignore the last feature coordinate (the constant bias).

use rand::Rng;
use rayon::prelude::*;

use crate::domain::UserProfile;
use crate::error::{Error, Result};
use crate::rng::{substream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster of each user, aligned with the input.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn latent(u: &UserProfile) -> &[f64] {
    &u.features[..u.features.len().saturating_sub(1)]
}

/// Nearest centroid and squared distance per point, lowest index on ties.
fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .map(|p| {
            centroids
                .iter()
                .enumerate()
                .map(|(c, m)| (c, sq_dist(p, m)))
                .fold(
                    (0, f64::INFINITY),
                    |best, cur| if cur.1 < best.1 { cur } else { best },
                )
        })
        .collect()
}

fn seed_centroids<R: Rng + ?Sized>(points: &[&[f64]], q: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, points[first])).collect();
    while centroids.len() < q {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // All remaining points coincide with a centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        let c = points[next].to_vec();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters users into `q` non-empty segments.
pub fn kmeans_segment(
    users: &[UserProfile],
    q: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let n = users.len();
    if q == 0 {
        return Err(Error::Config("q must be positive".into()));
    }
    if q > n {
        return Err(Error::Config(format!(
            "q ({q}) exceeds the number of users ({n})"
        )));
    }
    let points: Vec<&[f64]> = users.iter().map(latent).collect();
    let dim = points[0].len();
    let mut rng = substream(seed, StreamTag::KMeans, &[]);
    let mut centroids = seed_centroids(&points, q, &mut rng);

    let mut current = assign(&points, &centroids);
    let mut history = vec![current.iter().map(|a| a.1).sum::<f64>()];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; q];
        let mut counts = vec![0usize; q];
        for (p, &(c, _)) in points.iter().zip(&current) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..q {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        reseed_empty(&points, &current, &counts, &mut centroids);

        let next = assign(&points, &centroids);
        let changed = next.iter().zip(&current).any(|(a, b)| a.0 != b.0);
        history.push(next.iter().map(|a| a.1).sum::<f64>());
        current = next;
        if !changed {
            break;
        }
    }

    let mut assignments: Vec<usize> = current.iter().map(|a| a.0).collect();
    force_non_empty(&points, &mut assignments, &mut centroids, q);
    let final_inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &c)| sq_dist(p, &centroids[c]))
        .sum::<f64>();
    if final_inertia < *history.last().unwrap() {
        history.push(final_inertia);
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia_history: history,
        iterations,
    })
}

/// Moves each empty cluster's centroid onto the point farthest from its
/// own centroid.
fn reseed_empty(
    points: &[&[f64]],
    current: &[(usize, f64)],
    counts: &[usize],
    centroids: &mut [Vec<f64>],
) {
    let empty: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == 0).collect();
    if empty.is_empty() {
        return;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| current[b].1.total_cmp(&current[a].1).then(a.cmp(&b)));
    for (c, &p) in empty.iter().zip(&order) {
        centroids[*c] = points[p].to_vec();
    }
}

/// Guarantees every cluster has a member by moving the farthest points of
/// multi-member clusters into empty ones.
fn force_non_empty(
    points: &[&[f64]],
    assignments: &mut [usize],
    centroids: &mut [Vec<f64>],
    q: usize,
) {
    let mut counts = vec![0usize; q];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for c in 0..q {
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(points[a], &centroids[assignments[a]])
                    .total_cmp(&sq_dist(points[b], &centroids[assignments[b]]))
                    .then(b.cmp(&a))
            })
            .expect("q <= n leaves a cluster with two members");
        counts[assignments[donor]] -= 1;
        assignments[donor] = c;
        counts[c] = 1;
        centroids[c] = points[donor].to_vec();
    }
}
