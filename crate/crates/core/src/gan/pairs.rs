//! Mining of (dominating, dominated) training pairs.

use crate::cost::ObjectiveValue;
use crate::moea::strictly_dominates;

/// Objective-space distance limit of a pair.
pub const DEFAULT_GAMMA: f64 = 80.0;
/// Maximum number of pairs sharing one dominating solution.
pub const DEFAULT_KAPPA: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DominancePairs {
    /// `(index into dominating set, index into compared set)`, grouped by
    /// dominating index, nearest-to-line first inside each group.
    pub pairs: Vec<(usize, usize)>,
    /// Compared-set indices that appear in some pair, without repeats, in
    /// order of first appearance. These form the next compared set.
    pub retained: Vec<usize>,
}

impl DominancePairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Componentwise minimum of `points`.
pub fn ideal_point(points: &[ObjectiveValue]) -> ObjectiveValue {
    points.iter().fold(ObjectiveValue { v1: f64::INFINITY, v2: f64::INFINITY }, |a, p| ObjectiveValue {
        v1: a.v1.min(p.v1),
        v2: a.v2.min(p.v2),
    })
}

fn distance(a: &ObjectiveValue, b: &ObjectiveValue) -> f64 {
    (a.v1 - b.v1).hypot(a.v2 - b.v2)
}

/// Distance from `q` to the line through `a` and `b`; point distance to `a`
/// when the two coincide.
pub fn line_distance(a: &ObjectiveValue, b: &ObjectiveValue, q: &ObjectiveValue) -> f64 {
    let (dx, dy) = (b.v1 - a.v1, b.v2 - a.v2);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return distance(a, q);
    }
    (dx * (q.v2 - a.v2) - dy * (q.v1 - a.v1)).abs() / len
}

pub fn find_pairs(dominating: &[ObjectiveValue], compared: &[ObjectiveValue], gamma: f64, kappa: usize) -> DominancePairs {
    let psi = ideal_point(dominating);
    let mut out = DominancePairs::default();
    let mut seen = vec![false; compared.len()];
    for (i, p) in dominating.iter().enumerate() {
        let mut group: Vec<(f64, usize)> = compared
            .iter()
            .enumerate()
            .filter(|(_, q)| strictly_dominates(p, q) && distance(p, q) <= gamma)
            .map(|(j, q)| (line_distance(&psi, p, q), j))
            .collect();
        group.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        group.truncate(kappa);
        for (_, j) in group {
            out.pairs.push((i, j));
            if !seen[j] {
                seen[j] = true;
                out.retained.push(j);
            }
        }
    }
    out
}
