//! Category diversity of a single list.

use crate::corpus::{CategoryId, ItemId};

fn category_counts(predicted: &[ItemId], categories: &[CategoryId]) -> Vec<(CategoryId, usize)> {
    let mut counts: Vec<(CategoryId, usize)> = Vec::new();
    for item in predicted {
        let c = categories[item.index()];
        match counts.iter_mut().find(|(cat, _)| *cat == c) {
            Some((_, n)) => *n += 1,
            None => counts.push((c, 1)),
        }
    }
    counts
}

/// Mean pairwise Euclidean distance between one-hot category embeddings:
/// `√2` for a pair from different categories, 0 otherwise.
pub fn ild(predicted: &[ItemId], categories: &[CategoryId]) -> Option<f64> {
    let n = predicted.len();
    match n {
        0 => None,
        1 => Some(0.0),
        _ => {
            let same: usize = category_counts(predicted, categories)
                .iter()
                .map(|(_, c)| c * (c - 1) / 2)
                .sum();
            let pairs = n * (n - 1) / 2;
            Some(std::f64::consts::SQRT_2 * (pairs - same) as f64 / pairs as f64)
        }
    }
}

/// Shannon entropy (bits) of the category distribution.
pub fn entropy(predicted: &[ItemId], categories: &[CategoryId]) -> Option<f64> {
    if predicted.is_empty() {
        return None;
    }
    let n = predicted.len() as f64;
    Some(
        category_counts(predicted, categories)
            .iter()
            .map(|(_, c)| {
                let p = *c as f64 / n;
                -p * p.log2()
            })
            .sum::<f64>()
            .max(0.0),
    )
}

/// Distinct categories per recommended item.
pub fn ds(predicted: &[ItemId], categories: &[CategoryId]) -> Option<f64> {
    if predicted.is_empty() {
        return None;
    }
    Some(category_counts(predicted, categories).len() as f64 / predicted.len() as f64)
}
