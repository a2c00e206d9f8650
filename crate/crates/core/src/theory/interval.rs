//! Unions of closed intervals on the real line, with optional tags on the
//! endpoints recording which bound produced them.

use std::cmp::Ordering;

use num_traits::Signed;

use super::{Clause, Literal, Theory, VarId};
use crate::exact::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint<T> {
    pub value: Rational,
    pub tag: T,
}

/// `None` on either side means unbounded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span<T> {
    pub lo: Option<Endpoint<T>>,
    pub hi: Option<Endpoint<T>>,
}

impl<T> Span<T> {
    pub fn full() -> Self {
        Span { lo: None, hi: None }
    }

    pub fn closed(lo: Rational, lo_tag: T, hi: Rational, hi_tag: T) -> Self {
        Span {
            lo: Some(Endpoint { value: lo, tag: lo_tag }),
            hi: Some(Endpoint { value: hi, tag: hi_tag }),
        }
    }

    pub fn at_most(value: Rational, tag: T) -> Self {
        Span {
            lo: None,
            hi: Some(Endpoint { value, tag }),
        }
    }

    pub fn at_least(value: Rational, tag: T) -> Self {
        Span {
            lo: Some(Endpoint { value, tag }),
            hi: None,
        }
    }

    fn has_width(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => l.value < h.value,
            _ => true,
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.lo.as_ref().is_none_or(|l| &l.value <= x) && self.hi.as_ref().is_none_or(|h| x <= &h.value)
    }

    pub fn finite(&self) -> Option<(&Rational, &Rational)> {
        Some((&self.lo.as_ref()?.value, &self.hi.as_ref()?.value))
    }
}

fn cmp_lo<T>(a: &Option<Endpoint<T>>, b: &Option<Endpoint<T>>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Less,
        (_, None) => Ordering::Greater,
        (Some(x), Some(y)) => x.value.cmp(&y.value),
    }
}

fn cmp_hi<T>(a: &Option<Endpoint<T>>, b: &Option<Endpoint<T>>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, _) => Ordering::Greater,
        (_, None) => Ordering::Less,
        (Some(x), Some(y)) => x.value.cmp(&y.value),
    }
}

/// Sorted, pairwise disjoint spans of positive width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanSet<T> {
    spans: Vec<Span<T>>,
}

impl<T: Clone> SpanSet<T> {
    pub fn empty() -> Self {
        SpanSet { spans: Vec::new() }
    }

    pub fn full() -> Self {
        SpanSet {
            spans: vec![Span::full()],
        }
    }

    /// Union of arbitrary spans; touching spans merge, zero-width ones vanish.
    pub fn union_of(spans: impl IntoIterator<Item = Span<T>>) -> Self {
        let mut spans: Vec<Span<T>> = spans.into_iter().filter(Span::has_width).collect();
        spans.sort_by(|a, b| cmp_lo(&a.lo, &b.lo));
        let mut merged: Vec<Span<T>> = Vec::with_capacity(spans.len());
        for span in spans {
            if let Some(last) = merged.last_mut() {
                let touches = match (&last.hi, &span.lo) {
                    (None, _) | (_, None) => true,
                    (Some(h), Some(l)) => l.value <= h.value,
                };
                if touches {
                    if cmp_hi(&span.hi, &last.hi) == Ordering::Greater {
                        last.hi = span.hi;
                    }
                    continue;
                }
            }
            merged.push(span);
        }
        SpanSet { spans: merged }
    }

    pub fn intersect(&self, other: &SpanSet<T>) -> SpanSet<T> {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.spans.len() && j < other.spans.len() {
            let (a, b) = (&self.spans[i], &other.spans[j]);
            let lo = if cmp_lo(&a.lo, &b.lo) == Ordering::Less { &b.lo } else { &a.lo };
            let hi = if cmp_hi(&a.hi, &b.hi) == Ordering::Greater { &b.hi } else { &a.hi };
            let span = Span {
                lo: lo.clone(),
                hi: hi.clone(),
            };
            if span.has_width() {
                out.push(span);
            }
            if cmp_hi(&a.hi, &b.hi) == Ordering::Greater {
                j += 1;
            } else {
                i += 1;
            }
        }
        SpanSet { spans: out }
    }

    pub fn spans(&self) -> &[Span<T>] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.spans.iter().any(|s| s.contains(x))
    }

    /// Bounded spans as `(lo, hi)` pairs; unbounded spans are skipped.
    pub fn finite_intervals(&self) -> Vec<(Rational, Rational)> {
        self.spans
            .iter()
            .filter_map(|s| s.finite().map(|(l, h)| (l.clone(), h.clone())))
            .collect()
    }
}

/// The set of `v` values where a single-variable literal holds.
/// Literals over other variables (or Booleans) are treated as false.
pub(crate) fn literal_ray(lit: &Literal, v: VarId) -> Option<Span<()>> {
    let atom = lit.as_linear()?;
    if atom.terms().len() != 1 {
        return None;
    }
    let (u, c) = &atom.terms()[0];
    if *u != v {
        return None;
    }
    let bound = -atom.constant() / c;
    Some(if c.is_positive() {
        Span::at_most(bound, ())
    } else {
        Span::at_least(bound, ())
    })
}

/// Feasible values of `v` under clauses that mention only `v`, intersected
/// with `[lo, hi]`.
pub fn unary_feasible_intervals<'a>(
    clauses: impl IntoIterator<Item = &'a Clause>,
    v: VarId,
    lo: &Rational,
    hi: &Rational,
) -> Vec<(Rational, Rational)> {
    let mut feasible = SpanSet::union_of([Span::closed(lo.clone(), (), hi.clone(), ())]);
    for clause in clauses {
        let rays = clause.literals().iter().filter_map(|l| literal_ray(l, v));
        feasible = feasible.intersect(&SpanSet::union_of(rays));
        if feasible.is_empty() {
            break;
        }
    }
    feasible.finite_intervals()
}

/// Exact feasible set of a theory over exactly one real variable, as
/// sorted maximal disjoint closed intervals (empty when UNSAT).
///
/// # Panics
/// If the theory does not have exactly one real variable.
pub fn univariate_feasible_set(theory: &Theory) -> Vec<(Rational, Rational)> {
    let vars: Vec<VarId> = theory.real_vars().collect();
    assert_eq!(vars.len(), 1, "univariate_feasible_set needs exactly one real variable");
    if theory.is_unsat() {
        return Vec::new();
    }
    let v = vars[0];
    let (lo, hi) = theory.table().domain(v).expect("real variable has a domain");
    unary_feasible_intervals(theory.clauses(), v, lo, hi)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::exact::{int, ratio};
    use crate::theory::{domain_clauses, LinearAtom, Normalized, VarTable};

    fn lit(v: VarId, coeff: i64, constant: Rational) -> Literal {
        match LinearAtom::normalize([(v, int(coeff))], constant) {
            Normalized::Atom(a) => Literal::Linear(a),
            Normalized::Ground(_) => unreachable!(),
        }
    }

    fn single(lo: Rational, hi: Rational, clauses: Vec<Clause>) -> Theory {
        let mut table = VarTable::new();
        let x = table.declare_real("x", lo.clone(), hi.clone()).unwrap();
        let mut all = clauses;
        all.extend(domain_clauses(x, &lo, &hi));
        Theory::new(Arc::new(table), [x].into(), all)
    }

    #[test]
    fn disjunction_against_domain() {
        let x = VarId(0);
        // (x ≤ -1/4) ∨ (7/4 ≤ x) on [-1, 1]
        let clause = Clause::new(vec![lit(x, 1, ratio(1, 4)), lit(x, -1, ratio(7, 4))]);
        let theory = single(int(-1), int(1), vec![clause]);
        assert_eq!(univariate_feasible_set(&theory), vec![(int(-1), ratio(-1, 4))]);
    }

    #[test]
    fn plain_domain() {
        let theory = single(int(0), int(1), vec![]);
        assert_eq!(univariate_feasible_set(&theory), vec![(int(0), int(1))]);
    }

    #[test]
    fn contradiction_is_empty() {
        let x = VarId(0);
        let theory = single(
            int(0),
            int(1),
            vec![Clause::new(vec![lit(x, 1, int(0))]), Clause::new(vec![lit(x, -1, int(1))])],
        );
        assert!(univariate_feasible_set(&theory).is_empty());
    }

    #[test]
    fn tags_survive_intersection() {
        let a: SpanSet<&str> = SpanSet::union_of([Span::closed(int(0), "a0", int(5), "a5")]);
        let b = SpanSet::union_of([Span::at_most(int(3), "b3"), Span::at_least(int(4), "b4")]);
        let c = a.intersect(&b);
        assert_eq!(c.spans().len(), 2);
        assert_eq!(c.spans()[0].lo.as_ref().unwrap().tag, "a0");
        assert_eq!(c.spans()[0].hi.as_ref().unwrap().tag, "b3");
        assert_eq!(c.spans()[1].lo.as_ref().unwrap().tag, "b4");
        assert_eq!(c.spans()[1].hi.as_ref().unwrap().tag, "a5");
    }

    #[test]
    fn touching_spans_merge() {
        let s: SpanSet<()> = SpanSet::union_of([
            Span::closed(int(1), (), int(2), ()),
            Span::closed(int(0), (), int(1), ()),
            Span::closed(int(3), (), int(3), ()),
        ]);
        assert_eq!(s.finite_intervals(), vec![(int(0), int(2))]);
    }

    fn random_clause() -> impl Strategy<Value = Vec<(bool, i64, i64)>> {
        prop::collection::vec((any::<bool>(), -12i64..12, 1i64..4), 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn membership_matches_direct_evaluation(
            clauses in prop::collection::vec(random_clause(), 0..5),
            probes in prop::collection::vec(-20000i64..20000, 1000),
        ) {
            let x = VarId(0);
            let built: Vec<Clause> = clauses
                .iter()
                .map(|c| Clause::new(c.iter().map(|(upper, n, d)| {
                    let bound = ratio(*n, *d);
                    if *upper { lit(x, 1, -bound) } else { lit(x, -1, bound) }
                }).collect()))
                .collect();
            let theory = single(int(-3), int(3), built);
            let feasible = univariate_feasible_set(&theory);
            for w in feasible.windows(2) {
                prop_assert!(w[0].1 < w[1].0);
            }
            // m/6979 never equals a bound n/d with d ≤ 3 unless it is an integer
            for m in probes.into_iter().filter(|m| m % 6979 != 0) {
                let p = ratio(m, 6979);
                let inside = feasible.iter().any(|(l, h)| l <= &p && &p <= h);
                let direct = theory.holds_at(|_| p.clone(), |_| false);
                prop_assert_eq!(inside, direct, "probe {}", p);
            }
        }
    }
}
