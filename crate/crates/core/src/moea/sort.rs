use crate::cost::ObjectiveValue;

use super::dominance::strictly_dominates;

/// Partitions `points` into non-domination levels (indices into `points`).
/// Level 0 is the nondominated set; level `r` is nondominated once levels
/// `0..r` are removed. Indices inside each level are ascending.
pub fn nondominated_sort(points: &[ObjectiveValue]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<usize> = vec![0; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if strictly_dominates(&points[i], &points[j]) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if strictly_dominates(&points[j], &points[i]) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }

    let mut levels = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        levels.push(std::mem::replace(&mut current, next));
    }
    levels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<ObjectiveValue> {
        v.iter().map(|&(a, b)| ObjectiveValue::new(a, b)).collect()
    }

    #[test]
    fn hand_example() {
        let p = pts(&[(1.0, 2.0), (2.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert_eq!(nondominated_sort(&p), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn identical_points_form_one_level() {
        let p = pts(&[(1.0, 1.0); 5]);
        assert_eq!(nondominated_sort(&p), vec![vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn chain_gives_singletons() {
        let p = pts(&[(3.0, 3.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(nondominated_sort(&p), vec![vec![1], vec![2], vec![0]]);
    }

    #[test]
    fn empty() {
        assert!(nondominated_sort(&[]).is_empty());
    }
}
