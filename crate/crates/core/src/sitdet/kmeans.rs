//! Lloyd's k-means with k-means++ seeding, and the gap statistic for choosing k.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{sq_dist, Scalar};

use super::SitdetError;

const MAX_ITER: usize = 300;
const N_INIT: usize = 5;
/// Uniform reference datasets drawn per k by the gap statistic.
pub const GAP_REFERENCES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit<T> {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<T>>,
    /// Within-cluster sum of squared distances.
    pub inertia: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapResult<T> {
    pub k: usize,
    pub ks: Vec<usize>,
    pub gaps: Vec<T>,
    /// Standard error of the reference log-dispersion, scaled by sqrt(1 + 1/B).
    pub s: Vec<T>,
}

fn nearest<T: Scalar>(p: &[T], centers: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus<T: Scalar>(points: &[Vec<T>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<T> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: T = d2.iter().copied().sum();
        let idx = if total > T::zero() {
            let mut target = T::lit(rng.random::<f64>()) * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target = target - w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
        let c = centers.last().expect("just pushed");
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, c));
        }
    }
    centers
}

fn lloyd<T: Scalar>(points: &[Vec<T>], mut centers: Vec<Vec<T>>) -> KMeansFit<T> {
    let dim = points[0].len();
    let k = centers.len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITER {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &x) in sums[l].iter_mut().zip(p) {
                *s = *s + x;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous center
            if counts[c] > 0 {
                let cnt = T::from_usize(counts[c]).expect("count fits");
                centers[c] = sums[c].iter().map(|&s| s / cnt).collect();
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    KMeansFit {
        labels,
        centers,
        inertia,
    }
}

/// Fixed-k clustering: best of several k-means++ initialisations by inertia.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], k: usize, seed: u64) -> Result<KMeansFit<T>, SitdetError> {
    if points.is_empty() {
        return Err(SitdetError::EmptyInput);
    }
    if k == 0 || k > points.len() {
        return Err(SitdetError::KExceedsPoints { k, n: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit<T>> = None;
    for _ in 0..N_INIT {
        let fit = lloyd(points, plus_plus(points, k, &mut rng));
        if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one init"))
}

fn log_dispersion<T: Scalar>(inertia: T) -> T {
    inertia.max(T::min_positive_value()).ln()
}

/// Gap statistic over `k_min..=k_max` with `references` uniform datasets on the bounding box.
/// Picks the smallest k with `Gap(k) >= Gap(k+1) - s(k+1)`, falling back to the largest k.
pub fn gap_statistic<T: Scalar>(
    points: &[Vec<T>],
    k_min: usize,
    k_max: usize,
    references: usize,
    seed: u64,
) -> Result<GapResult<T>, SitdetError> {
    if points.is_empty() {
        return Err(SitdetError::EmptyInput);
    }
    let k_min = k_min.max(1);
    if k_min > points.len() {
        return Err(SitdetError::KExceedsPoints {
            k: k_min,
            n: points.len(),
        });
    }
    let k_max = k_max.min(points.len()).max(k_min);
    let dim = points[0].len();
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in points {
        for d in 0..dim {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let b = references.max(1);
    let refs: Vec<Vec<Vec<T>>> = (0..b)
        .map(|_| {
            (0..points.len())
                .map(|_| {
                    (0..dim)
                        .map(|d| lo[d] + (hi[d] - lo[d]) * T::lit(rng.random::<f64>()))
                        .collect()
                })
                .collect()
        })
        .collect();

    let bf = T::from_usize(b).expect("b fits");
    let ks: Vec<usize> = (k_min..=k_max).collect();
    let mut gaps = Vec::with_capacity(ks.len());
    let mut s = Vec::with_capacity(ks.len());
    for &k in &ks {
        let w = log_dispersion(kmeans(points, k, seed)?.inertia);
        let ref_logs: Vec<T> = refs
            .iter()
            .enumerate()
            .map(|(i, r)| kmeans(r, k, seed.wrapping_add(i as u64 + 1)).map(|f| log_dispersion(f.inertia)))
            .collect::<Result<_, _>>()?;
        let mean = ref_logs.iter().copied().sum::<T>() / bf;
        let var = ref_logs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / bf;
        gaps.push(mean - w);
        s.push(var.sqrt() * (T::one() + T::one() / bf).sqrt());
    }
    let mut k = *ks.last().expect("nonempty range");
    for i in 0..ks.len() - 1 {
        if gaps[i] >= gaps[i + 1] - s[i + 1] {
            k = ks[i];
            break;
        }
    }
    Ok(GapResult { k, ks, gaps, s })
}
