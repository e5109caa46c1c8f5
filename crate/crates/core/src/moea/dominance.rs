use crate::cost::ObjectiveValue;

/// Pareto relation of one objective point to another (both minimized).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dominance {
    /// The first point dominates the second.
    Dominates,
    /// The first point is dominated by the second.
    Dominated,
    Incomparable,
    Equal,
}

/// Relation of `a` to `b`: `a` dominates when it is no worse in both
/// objectives and strictly better in at least one.
pub fn dominates(a: &ObjectiveValue, b: &ObjectiveValue) -> Dominance {
    let better = a.v1 < b.v1 || a.v2 < b.v2;
    let worse = a.v1 > b.v1 || a.v2 > b.v2;
    match (better, worse) {
        (true, false) => Dominance::Dominates,
        (false, true) => Dominance::Dominated,
        (true, true) => Dominance::Incomparable,
        (false, false) => Dominance::Equal,
    }
}

/// `a` strictly dominates `b`.
pub fn strictly_dominates(a: &ObjectiveValue, b: &ObjectiveValue) -> bool {
    dominates(a, b) == Dominance::Dominates
}

/// `a` dominates or equals `b`.
pub fn weakly_dominates(a: &ObjectiveValue, b: &ObjectiveValue) -> bool {
    a.v1 <= b.v1 && a.v2 <= b.v2
}
