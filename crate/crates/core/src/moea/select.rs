//! NSGA-III environmental selection for two objectives.

use crate::cost::ObjectiveValue;
use crate::error::{Error, Result};

use super::sort::nondominated_sort;

/// `r` evenly spaced unit directions in the positive quadrant, from the
/// v2 axis (`(0, 1)`) to the v1 axis (`(1, 0)`).
pub fn reference_directions(r: usize) -> Vec<[f64; 2]> {
    if r == 1 {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        return vec![[c, c]];
    }
    (0..r)
        .map(|i| {
            let a = i as f64 / (r - 1) as f64;
            let norm = (a * a + (1.0 - a) * (1.0 - a)).sqrt();
            [a / norm, (1.0 - a) / norm]
        })
        .collect()
}

fn perpendicular_distance(p: [f64; 2], dir: [f64; 2]) -> f64 {
    let proj = p[0] * dir[0] + p[1] * dir[1];
    let dx = p[0] - proj * dir[0];
    let dy = p[1] - proj * dir[1];
    (dx * dx + dy * dy).sqrt()
}

/// Chooses `r` survivors out of `points` (indices, ascending). Whole
/// non-domination levels are taken while they fit; the level that overflows
/// is thinned by reference-direction niching on objectives normalized to
/// `[0, 1]` over the levels considered.
pub fn environmental_selection(points: &[ObjectiveValue], r: usize) -> Result<Vec<usize>> {
    if r > points.len() {
        return Err(Error::Dimension { expected: r, actual: points.len() });
    }
    let mut chosen = Vec::with_capacity(r);
    let mut last: &[usize] = &[];
    let levels = nondominated_sort(points);
    for level in &levels {
        if chosen.len() + level.len() <= r {
            chosen.extend_from_slice(level);
            if chosen.len() == r {
                break;
            }
        } else {
            last = level;
            break;
        }
    }
    if chosen.len() < r {
        let picked = niching(points, &chosen, last, r - chosen.len());
        chosen.extend(picked);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Picks `k` members of `last` given the already selected `chosen`.
fn niching(points: &[ObjectiveValue], chosen: &[usize], last: &[usize], k: usize) -> Vec<usize> {
    let members = chosen.iter().chain(last);
    let mut ideal = [f64::INFINITY; 2];
    let mut nadir = [f64::NEG_INFINITY; 2];
    for &i in members.clone() {
        let p = [points[i].v1, points[i].v2];
        for m in 0..2 {
            ideal[m] = ideal[m].min(p[m]);
            nadir[m] = nadir[m].max(p[m]);
        }
    }
    let range = [0, 1].map(|m| {
        let d = nadir[m] - ideal[m];
        if d > 0.0 {
            d
        } else {
            1.0
        }
    });

    // One direction per survivor slot.
    let dirs = reference_directions(chosen.len() + k);
    let associate = |i: usize| -> (usize, f64) {
        let p = [(points[i].v1 - ideal[0]) / range[0], (points[i].v2 - ideal[1]) / range[1]];
        let mut best = (0, f64::INFINITY);
        for (j, d) in dirs.iter().enumerate() {
            let dist = perpendicular_distance(p, *d);
            if dist < best.1 {
                best = (j, dist);
            }
        }
        best
    };

    let mut niche_count = vec![0usize; dirs.len()];
    for &i in chosen {
        niche_count[associate(i).0] += 1;
    }
    let mut pool: Vec<Vec<(f64, usize)>> = vec![Vec::new(); dirs.len()];
    for &i in last {
        let (j, dist) = associate(i);
        pool[j].push((dist, i));
    }
    for candidates in &mut pool {
        // Reverse order so the closest candidate pops first.
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
    }

    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let best = (0..dirs.len())
            .filter(|&j| !pool[j].is_empty())
            .min_by(|&a, &b| {
                niche_count[a]
                    .cmp(&niche_count[b])
                    .then(pool[a].last().unwrap().0.total_cmp(&pool[b].last().unwrap().0))
                    .then(a.cmp(&b))
            })
            .expect("last level holds enough candidates");
        let (_, i) = pool[best].pop().unwrap();
        niche_count[best] += 1;
        picked.push(i);
    }
    picked
}

/// NSGA-III survivor selection from parents and offspring of equal size `R`.
/// Returned indices address the concatenation `parents ++ offspring`.
pub fn select(parents: &[ObjectiveValue], offspring: &[ObjectiveValue]) -> Result<Vec<usize>> {
    if parents.len() != offspring.len() {
        return Err(Error::Dimension { expected: parents.len(), actual: offspring.len() });
    }
    let all: Vec<ObjectiveValue> = parents.iter().chain(offspring).copied().collect();
    environmental_selection(&all, parents.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::dominance::strictly_dominates;

    fn pts(v: &[(f64, f64)]) -> Vec<ObjectiveValue> {
        v.iter().map(|&(a, b)| ObjectiveValue::new(a, b)).collect()
    }

    #[test]
    fn directions_span_the_quadrant() {
        let d = reference_directions(5);
        assert_eq!(d.len(), 5);
        assert!((d[0][0]).abs() < 1e-15 && (d[0][1] - 1.0).abs() < 1e-15);
        assert!((d[4][0] - 1.0).abs() < 1e-15 && d[4][1].abs() < 1e-15);
        for v in &d {
            assert!((v[0] * v[0] + v[1] * v[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_first_level_is_kept() {
        // Level 0 = {0, 1, 2}, R = 3.
        let p = pts(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0), (4.0, 4.0), (5.0, 5.0), (3.0, 3.0)]);
        assert_eq!(select(&p[..3], &p[3..]).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn whole_front_overflow_keeps_extremes() {
        // 2R mutually incomparable points on a concave front.
        let r = 6;
        let p: Vec<_> = (0..2 * r)
            .map(|i| {
                let a = std::f64::consts::FRAC_PI_2 * i as f64 / (2 * r - 1) as f64;
                ObjectiveValue::new(10.0 - 10.0 * a.sin(), 10.0 - 10.0 * a.cos())
            })
            .collect();
        let chosen = environmental_selection(&p, r).unwrap();
        assert_eq!(chosen.len(), r);
        let min_v1 = (0..p.len()).min_by(|&a, &b| p[a].v1.total_cmp(&p[b].v1)).unwrap();
        let min_v2 = (0..p.len()).min_by(|&a, &b| p[a].v2.total_cmp(&p[b].v2)).unwrap();
        assert!(chosen.contains(&min_v1) && chosen.contains(&min_v2));
    }

    #[test]
    fn single_survivor_is_nondominated() {
        let p = pts(&[(3.0, 3.0), (1.0, 2.0)]);
        let chosen = select(&p[..1], &p[1..]).unwrap();
        assert_eq!(chosen.len(), 1);
        assert!(!p.iter().any(|q| strictly_dominates(q, &p[chosen[0]])));
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let p = pts(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert!(select(&p[..1], &p[1..]).is_err());
        assert!(environmental_selection(&p, 4).is_err());
    }

    #[test]
    fn duplicates_are_distinct_individuals() {
        let p = pts(&[(1.0, 1.0); 4]);
        let chosen = environmental_selection(&p, 2).unwrap();
        assert_eq!(chosen.len(), 2);
    }
}
