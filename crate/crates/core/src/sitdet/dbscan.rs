use crate::scalar::{dist, Scalar};
use crate::SituationId;

use super::SitdetError;

/// Density-based clustering. A point is core when at least `min_samples` points, itself included,
/// lie within distance `eps` (inclusive). Clusters are grown depth-first from cores in index
/// order, so a border point reachable from two clusters joins the one discovered first.
pub fn dbscan<T: Scalar>(points: &[Vec<T>], eps: T, min_samples: usize) -> Result<Vec<SituationId>, SitdetError> {
    if points.is_empty() {
        return Err(SitdetError::EmptyInput);
    }
    let n = points.len();
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= eps).collect())
        .collect();
    let is_core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_samples).collect();

    let mut labels = vec![-1; n];
    let mut label: SituationId = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != -1 || !is_core[start] {
            continue;
        }
        let mut i = start;
        loop {
            if labels[i] == -1 {
                labels[i] = label;
                if is_core[i] {
                    stack.extend(neighborhoods[i].iter().copied().filter(|&j| labels[j] == -1));
                }
            }
            match stack.pop() {
                Some(j) => i = j,
                None => break,
            }
        }
        label += 1;
    }
    Ok(labels)
}
