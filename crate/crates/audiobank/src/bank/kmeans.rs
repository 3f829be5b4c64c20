//! Seeded k-means++ with medoid projection.
//!
//! Lloyd iterations over flattened candidate vectors; the final detectors
//! are the nearest *actual* candidates to each converged centroid, so the
//! bank keeps genuine crops rather than blurred means.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(data: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(data[rng.random_range(0..n)].to_vec());

    let mut d2: Vec<f64> = data.iter().map(|p| dist_sq(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // All remaining mass at zero distance (duplicates): pick the
            // first index not yet chosen, deterministically.
            (0..n)
                .find(|i| !centroids.iter().any(|c| c.as_slice() == data[*i]))
                .unwrap_or(0)
        };
        centroids.push(data[next].to_vec());
        for (i, p) in data.iter().enumerate() {
            d2[i] = d2[i].min(dist_sq(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Cluster `data` into `k` groups and return the medoid index of each
/// cluster, ascending. Medoids are distinct; a duplicate resolves to the
/// next-nearest unused candidate.
pub fn kmeans_medoids(
    data: &[&[f64]],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<usize>> {
    let n = data.len();
    if n < k {
        return Err(Error::TooFewCandidates {
            requested: k,
            available: n,
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, k, &mut rng);
    let mut assign = vec![0usize; n];
    let mut prev_inertia = f64::INFINITY;

    for _ in 0..max_iter {
        // Assignment step.
        let mut inertia = 0.0;
        for (i, p) in data.iter().enumerate() {
            let (mut best, mut best_d) = (0usize, f64::INFINITY);
            for (c, cent) in centroids.iter().enumerate() {
                let d = dist_sq(p, cent);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            assign[i] = best;
            inertia += best_d;
        }
        assert!(
            inertia <= prev_inertia * (1.0 + 1e-9) + 1e-12,
            "k-means inertia increased: {prev_inertia} -> {inertia}"
        );

        // Update step.
        let dim = data[0].len();
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in data.iter().enumerate() {
            counts[assign[i]] += 1;
            for (s, v) in sums[assign[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // centroid (deterministic).
                let far = (0..n)
                    .max_by(|&a, &b| {
                        dist_sq(data[a], &centroids[assign[a]])
                            .partial_cmp(&dist_sq(data[b], &centroids[assign[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centroids[c] = data[far].to_vec();
            } else {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s * inv;
                }
            }
        }

        let converged = prev_inertia.is_finite()
            && (prev_inertia - inertia).abs() / prev_inertia.max(f64::MIN_POSITIVE) < tol;
        prev_inertia = inertia;
        if converged {
            break;
        }
    }

    // Medoid projection with duplicate resolution.
    let mut medoids = Vec::with_capacity(k);
    let mut used = vec![false; n];
    for cent in &centroids {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            dist_sq(data[a], cent)
                .partial_cmp(&dist_sq(data[b], cent))
                .unwrap()
                .then(a.cmp(&b))
        });
        let pick = order
            .iter()
            .copied()
            .find(|&i| !used[i])
            .expect("n >= k guarantees a free candidate");
        used[pick] = true;
        medoids.push(pick);
    }
    medoids.sort_unstable();
    Ok(medoids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn owned(points: &[Vec<f64>]) -> Vec<&[f64]> {
        points.iter().map(|p| p.as_slice()).collect()
    }

    #[test]
    fn k_equals_n_returns_all_points() {
        let pts = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 2.0]];
        let m = kmeans_medoids(&owned(&pts), 3, 1, 100, 1e-6).unwrap();
        assert_eq!(m, vec![0, 1, 2]);
    }

    #[test]
    fn separated_clusters_get_one_medoid_each() {
        // Two clusters with inter-cluster distance >= 10x intra.
        let mut pts = Vec::new();
        for i in 0..6 {
            pts.push(vec![0.0 + 0.1 * i as f64, 0.0]);
        }
        for i in 0..6 {
            pts.push(vec![100.0 + 0.1 * i as f64, 0.0]);
        }
        let m = kmeans_medoids(&owned(&pts), 2, 3, 100, 1e-6).unwrap();
        assert_eq!(m.len(), 2);
        let sides: Vec<bool> = m.iter().map(|&i| pts[i][0] > 50.0).collect();
        assert_ne!(sides[0], sides[1], "medoids {m:?} not one per cluster");

        // Brute-force oracle: every point is closer to its side's medoid.
        for (i, p) in pts.iter().enumerate() {
            let own = m
                .iter()
                .find(|&&j| (pts[j][0] > 50.0) == (p[0] > 50.0))
                .unwrap();
            let other = m
                .iter()
                .find(|&&j| (pts[j][0] > 50.0) != (p[0] > 50.0))
                .unwrap();
            assert!(
                dist_sq(p, &pts[*own]) <= dist_sq(p, &pts[*other]),
                "point {i} assigned across clusters"
            );
        }
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64, (i % 3) as f64])
            .collect();
        let a = kmeans_medoids(&owned(&pts), 5, 9, 100, 1e-6).unwrap();
        let b = kmeans_medoids(&owned(&pts), 5, 9, 100, 1e-6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn medoids_distinct_with_duplicate_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![9.0]];
        let m = kmeans_medoids(&owned(&pts), 3, 2, 50, 1e-6).unwrap();
        assert_eq!(m.len(), 3);
        let mut sorted = m.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 3, "medoids must be distinct: {m:?}");
    }

    #[test]
    fn too_few_candidates_rejected() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            kmeans_medoids(&owned(&pts), 3, 0, 10, 1e-6),
            Err(Error::TooFewCandidates { .. })
        ));
    }
}
