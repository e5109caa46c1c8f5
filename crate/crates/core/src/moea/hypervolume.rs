//! Two-objective Pareto fronts and their hypervolume.

use crate::cost::ObjectiveValue;

use super::dominance::strictly_dominates;

/// Reference point used in the published comparison: 36000 s, 10000 J.
pub const STANDARD_REFERENCE: ObjectiveValue = ObjectiveValue { v1: 36000.0, v2: 10000.0 };

/// Mutually nondominated points sorted by ascending `v1` (so `v2` strictly
/// decreases). Each point keeps the index it had in the input.
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoFront {
    points: Vec<(usize, ObjectiveValue)>,
}

impl ParetoFront {
    /// Nondominated subset of `points`; duplicates collapse onto the first
    /// occurrence.
    pub fn from_points(points: &[ObjectiveValue]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a].v1.total_cmp(&points[b].v1).then(points[a].v2.total_cmp(&points[b].v2)).then(a.cmp(&b))
        });
        let mut kept: Vec<(usize, ObjectiveValue)> = Vec::new();
        for i in order {
            let p = points[i];
            match kept.last() {
                // Sorted by v1 then v2: p is dominated or equal unless it
                // strictly improves v2.
                Some((_, q)) if p.v2 >= q.v2 => {}
                _ => kept.push((i, p)),
            }
        }
        debug_assert!(kept.windows(2).all(|w| !strictly_dominates(&w[1].1, &w[0].1)));
        Self { points: kept }
    }

    pub fn points(&self) -> impl Iterator<Item = ObjectiveValue> + '_ {
        self.points.iter().map(|(_, p)| *p)
    }

    /// Input indices of the front members, in front order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().map(|(i, _)| *i)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn hypervolume(&self, reference: ObjectiveValue) -> f64 {
        let mut area = 0.0;
        let mut ceiling = reference.v2;
        for p in self.points() {
            if p.v1 >= reference.v1 {
                break;
            }
            if p.v2 < ceiling {
                area += (reference.v1 - p.v1) * (ceiling - p.v2);
                ceiling = p.v2;
            }
        }
        area
    }
}

/// Area dominated by `points` and bounded by `reference` (both objectives
/// minimized). Dominated points and points outside the reference box
/// contribute nothing.
pub fn hypervolume(points: &[ObjectiveValue], reference: ObjectiveValue) -> f64 {
    ParetoFront::from_points(points).hypervolume(reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<ObjectiveValue> {
        v.iter().map(|&(a, b)| ObjectiveValue::new(a, b)).collect()
    }

    #[test]
    fn staircase_example() {
        let p = pts(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]);
        assert_eq!(hypervolume(&p, ObjectiveValue::new(4.0, 4.0)), 6.0);
    }

    #[test]
    fn empty_front() {
        assert_eq!(hypervolume(&[], ObjectiveValue::new(4.0, 4.0)), 0.0);
    }

    #[test]
    fn points_beyond_reference_contribute_nothing() {
        let p = pts(&[(5.0, 1.0), (1.0, 5.0), (4.0, 0.0)]);
        assert_eq!(hypervolume(&p, ObjectiveValue::new(4.0, 4.0)), 0.0);
        let p = pts(&[(5.0, 1.0), (2.0, 2.0)]);
        assert_eq!(hypervolume(&p, ObjectiveValue::new(4.0, 4.0)), 4.0);
    }

    #[test]
    fn dominated_and_duplicate_points_are_dropped() {
        let p = pts(&[(2.0, 2.0), (3.0, 3.0), (2.0, 2.0), (1.0, 3.0), (1.0, 4.0)]);
        let f = ParetoFront::from_points(&p);
        assert_eq!(f.indices().collect::<Vec<_>>(), vec![3, 0]);
        assert_eq!(f.hypervolume(ObjectiveValue::new(4.0, 4.0)), 3.0 + 2.0);
    }
}
