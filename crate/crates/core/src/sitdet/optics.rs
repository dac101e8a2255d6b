//! OPTICS ordering and ξ-steep cluster extraction.
//!
//! Semantics follow scikit-learn's `OPTICS(max_eps=inf, cluster_method="xi")`: core distance is
//! the distance to the `min_samples`-th nearest point counting the point itself, the next point
//! in the ordering is the unprocessed point with the smallest reachability (lowest index on ties),
//! and distances are rounded to the scalar's decimal precision before comparison.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::scalar::{dist, Scalar};
use crate::SituationId;

use super::SitdetError;

pub const DEFAULT_XI: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct OpticsOrdering<T> {
    pub ordering: Vec<usize>,
    pub reachability: Vec<T>,
    pub core_distances: Vec<T>,
    /// Point from which each point was reached; `None` for ordering starts.
    pub predecessor: Vec<Option<usize>>,
}

/// Rounds to the number of decimal digits the type reliably represents (15 for f64, 6 for f32),
/// which makes near-equal distances compare as equal.
pub fn round_to_precision<T: Scalar>(x: T) -> T {
    if !x.is_finite() {
        return x;
    }
    let digits = (-T::epsilon().log10()).floor();
    let scale = T::lit(10.0).powf(digits);
    let y = x * scale;
    let r = y.round();
    // round half to even
    let r = if (y - y.trunc()).abs() == T::lit(0.5) && (r / T::lit(2.0)).fract() != T::zero() {
        r - y.signum()
    } else {
        r
    };
    r / scale
}

#[derive(PartialEq)]
struct Entry<T>(T, usize);

impl<T: Scalar> Eq for Entry<T> {}

impl<T: Scalar> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .partial_cmp(&other.0)
            .unwrap_or(Ordering::Equal)
            .then(self.1.cmp(&other.1))
    }
}

/// Computes the OPTICS reachability ordering with an unbounded neighbourhood radius.
pub fn optics_ordering<T: Scalar>(points: &[Vec<T>], min_samples: usize) -> Result<OpticsOrdering<T>, SitdetError> {
    let n = points.len();
    if n == 0 {
        return Err(SitdetError::EmptyInput);
    }
    let min_samples = min_samples.clamp(1, n);
    let mut row = vec![T::zero(); n];
    let core_distances: Vec<T> = (0..n)
        .map(|i| {
            for (j, p) in points.iter().enumerate() {
                row[j] = dist(&points[i], p);
            }
            row.select_nth_unstable_by(min_samples - 1, |a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            round_to_precision(row[min_samples - 1])
        })
        .collect();

    let mut reachability = vec![T::infinity(); n];
    let mut predecessor = vec![None; n];
    let mut processed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut heap: BinaryHeap<Reverse<Entry<T>>> = BinaryHeap::new();
    let mut lowest_unprocessed = 0;

    while ordering.len() < n {
        let mut next = None;
        while let Some(Reverse(Entry(r, i))) = heap.pop() {
            if !processed[i] && reachability[i] == r {
                next = Some(i);
                break;
            }
        }
        let point = match next {
            Some(i) => i,
            None => {
                while processed[lowest_unprocessed] {
                    lowest_unprocessed += 1;
                }
                lowest_unprocessed
            }
        };
        processed[point] = true;
        ordering.push(point);
        let core = core_distances[point];
        if !core.is_finite() {
            continue;
        }
        for j in 0..n {
            if processed[j] {
                continue;
            }
            let rd = round_to_precision(dist(&points[point], &points[j]).max(core));
            if rd < reachability[j] {
                reachability[j] = rd;
                predecessor[j] = Some(point);
                heap.push(Reverse(Entry(rd, j)));
            }
        }
    }
    Ok(OpticsOrdering {
        ordering,
        reachability,
        core_distances,
        predecessor,
    })
}

#[derive(Debug, Clone)]
struct SteepDownArea<T> {
    start: usize,
    end: usize,
    mib: T,
}

/// Extends a steep region while it contains at most `min_samples` consecutive non-steep points
/// that do not go the opposite way.
fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_samples: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for index in start..steep.len() {
        if steep[index] {
            non_xward = 0;
            end = index;
        } else if !xward[index] {
            non_xward += 1;
            if non_xward > min_samples {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn update_filter_sdas<T: Scalar>(
    sdas: Vec<SteepDownArea<T>>,
    mib: T,
    xi_complement: T,
    plot: &[T],
) -> Vec<SteepDownArea<T>> {
    if mib.is_infinite() {
        return Vec::new();
    }
    sdas.into_iter()
        .filter(|d| mib <= plot[d.start] * xi_complement)
        .map(|mut d| {
            d.mib = d.mib.max(mib);
            d
        })
        .collect()
}

fn correct_predecessor<T: Scalar>(
    plot: &[T],
    predecessor_plot: &[Option<usize>],
    ordering: &[usize],
    s: usize,
    mut e: usize,
) -> Option<(usize, usize)> {
    while s < e {
        if plot[s] > plot[e] {
            return Some((s, e));
        }
        let p_e = predecessor_plot[e];
        if ordering[s..e].iter().any(|&o| Some(o) == p_e) {
            return Some((s, e));
        }
        e -= 1;
    }
    None
}

/// ξ-steep cluster extraction over a reachability ordering. Returns clusters as inclusive
/// `(start, end)` ranges of ordering positions, smaller nested clusters first.
pub fn xi_clusters<T: Scalar>(
    opt: &OpticsOrdering<T>,
    min_samples: usize,
    min_cluster_size: usize,
    xi: T,
) -> Vec<(usize, usize)> {
    let n = opt.ordering.len();
    let mut plot: Vec<T> = opt.ordering.iter().map(|&i| opt.reachability[i]).collect();
    plot.push(T::infinity());
    let predecessor_plot: Vec<Option<usize>> = opt.ordering.iter().map(|&i| opt.predecessor[i]).collect();
    let xi_complement = T::one() - xi;

    let ratio: Vec<T> = (0..n).map(|i| plot[i] / plot[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&r| r <= xi_complement).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&r| r >= T::one() / xi_complement).collect();
    let down: Vec<bool> = ratio.iter().map(|&r| r > T::one()).collect();
    let up: Vec<bool> = ratio.iter().map(|&r| r < T::one()).collect();

    let mut sdas: Vec<SteepDownArea<T>> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0;
    let mut mib = T::zero();

    for steep_index in (0..n).filter(|&i| steep_up[i] || steep_down[i]) {
        if steep_index < index {
            continue;
        }
        mib = plot[index..=steep_index].iter().fold(mib, |m, &x| m.max(x));

        if steep_down[steep_index] {
            sdas = update_filter_sdas(sdas, mib, xi_complement, &plot);
            let d_end = extend_region(&steep_down, &up, steep_index, min_samples);
            sdas.push(SteepDownArea {
                start: steep_index,
                end: d_end,
                mib: T::zero(),
            });
            index = d_end + 1;
            mib = plot[index];
        } else {
            sdas = update_filter_sdas(sdas, mib, xi_complement, &plot);
            let u_start = steep_index;
            let u_end = extend_region(&steep_up, &down, u_start, min_samples);
            index = u_end + 1;
            mib = plot[index];

            let mut u_clusters = Vec::new();
            for d in &sdas {
                let mut c_start = d.start;
                let mut c_end = u_end;
                if plot[c_end + 1] * xi_complement < d.mib {
                    continue;
                }
                let d_max = plot[d.start];
                if d_max * xi_complement >= plot[c_end + 1] {
                    while plot[c_start + 1] > plot[c_end + 1] && c_start < d.end {
                        c_start += 1;
                    }
                } else if plot[c_end + 1] * xi_complement >= d_max {
                    while plot[c_end - 1] > d_max && c_end > u_start {
                        c_end -= 1;
                    }
                }
                let Some((s, e)) = correct_predecessor(&plot, &predecessor_plot, &opt.ordering, c_start, c_end) else {
                    continue;
                };
                if e - s + 1 < min_cluster_size || s > d.end || e < u_start {
                    continue;
                }
                u_clusters.push((s, e));
            }
            u_clusters.reverse();
            clusters.extend(u_clusters);
        }
    }
    clusters
}

/// Labels points from extracted clusters. A cluster only claims its range when no point in it
/// already belongs to an earlier (smaller) cluster.
pub fn xi_labels(ordering: &[usize], clusters: &[(usize, usize)]) -> Vec<SituationId> {
    let mut by_position = vec![-1; ordering.len()];
    let mut label = 0;
    for &(s, e) in clusters {
        if by_position[s..=e].iter().all(|&l| l == -1) {
            by_position[s..=e].fill(label);
            label += 1;
        }
    }
    let mut labels = vec![-1; ordering.len()];
    for (pos, &point) in ordering.iter().enumerate() {
        labels[point] = by_position[pos];
    }
    labels
}

/// OPTICS with ξ extraction. Fewer points than `min_samples` yields all noise.
pub fn optics<T: Scalar>(
    points: &[Vec<T>],
    min_samples: usize,
    min_cluster_size: usize,
    xi: T,
) -> Result<Vec<SituationId>, SitdetError> {
    if points.is_empty() {
        return Err(SitdetError::EmptyInput);
    }
    if points.len() < min_samples {
        return Ok(vec![-1; points.len()]);
    }
    let opt = optics_ordering(points, min_samples)?;
    let clusters = xi_clusters(&opt, min_samples, min_cluster_size.max(2), xi);
    Ok(xi_labels(&opt.ordering, &clusters))
}
