use std::collections::BTreeMap;

use crate::SituationId;

use super::SitdetError;

/// Labels after stabilization, plus the renaming that was applied to the fresh clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringOutcome {
    pub labels: Vec<SituationId>,
    pub id_mapping: BTreeMap<SituationId, SituationId>,
}

/// Renames fresh cluster ids to maximise overlap with the previous round's labels.
///
/// Pairs (fresh, old) are matched greedily by descending overlap on the first `previous.len()`
/// points, ties going to the lower old id. Unmatched fresh clusters get ids above
/// `max(previous)`. Noise stays noise.
pub fn stabilize_labels(previous: &[SituationId], fresh: &[SituationId]) -> Result<ClusteringOutcome, SitdetError> {
    let floor = previous.iter().copied().max().unwrap_or(-1) + 1;
    stabilize_labels_from(previous, fresh, floor)
}

/// As [`stabilize_labels`], with new ids allocated from `next_id` upward (never below
/// `max(previous) + 1`), so ids that have disappeared are not reused.
pub fn stabilize_labels_from(
    previous: &[SituationId],
    fresh: &[SituationId],
    next_id: SituationId,
) -> Result<ClusteringOutcome, SitdetError> {
    if previous.len() > fresh.len() {
        return Err(SitdetError::LengthMismatch {
            previous: previous.len(),
            fresh: fresh.len(),
        });
    }
    let mut overlap: BTreeMap<(SituationId, SituationId), usize> = BTreeMap::new();
    for (&o, &f) in previous.iter().zip(fresh) {
        if o >= 0 && f >= 0 {
            *overlap.entry((f, o)).or_default() += 1;
        }
    }
    let mut pairs: Vec<((SituationId, SituationId), usize)> = overlap.into_iter().collect();
    pairs.sort_by(|((f1, o1), c1), ((f2, o2), c2)| c2.cmp(c1).then(o1.cmp(o2)).then(f1.cmp(f2)));

    let mut id_mapping = BTreeMap::new();
    let mut used_old = std::collections::BTreeSet::new();
    for ((f, o), _) in pairs {
        if !id_mapping.contains_key(&f) && !used_old.contains(&o) {
            id_mapping.insert(f, o);
            used_old.insert(o);
        }
    }
    let mut next = next_id.max(previous.iter().copied().max().unwrap_or(-1) + 1);
    for &f in fresh {
        if f >= 0 && !id_mapping.contains_key(&f) {
            id_mapping.insert(f, next);
            next += 1;
        }
    }
    let labels = fresh.iter().map(|&f| if f < 0 { -1 } else { id_mapping[&f] }).collect();
    Ok(ClusteringOutcome { labels, id_mapping })
}
