//! k-nearest-neighbor prediction.

use super::LabeledSet;
use crate::error::{Error, Result};

/// Majority vote among the k nearest training rows (Euclidean distance).
///
/// Tie rules, in order: vote ties go to the class with the smaller summed
/// distance among its voting neighbors, then to the lower class id;
/// distance ties at the k-th rank resolve by training-set index.
pub fn knn_predict(train: &LabeledSet, query: &[f64], k: usize) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if query.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: query.len(),
        });
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidNeighborCount { k, n: train.len() });
    }

    let mut ranked: Vec<(f64, usize)> = (0..train.len())
        .map(|i| {
            let d2: f64 = train
                .row(i)
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i)
        })
        .collect();
    ranked.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let n_classes = train.n_classes();
    let mut votes = vec![0usize; n_classes];
    let mut summed_dist = vec![0.0f64; n_classes];
    for &(d2, idx) in ranked.iter().take(k) {
        let class = train.labels()[idx];
        votes[class] += 1;
        summed_dist[class] += d2.sqrt();
    }

    let best_votes = *votes.iter().max().unwrap();
    let winner = (0..n_classes)
        .filter(|&c| votes[c] == best_votes)
        .min_by(|&a, &b| {
            summed_dist[a]
                .partial_cmp(&summed_dist[b])
                .unwrap()
                .then(a.cmp(&b))
        })
        .unwrap();
    Ok(winner)
}
