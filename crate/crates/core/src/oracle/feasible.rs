//! Exact test for a CNF having a solution set of positive volume:
//! backtracking over one literal per clause, with Fourier-Motzkin
//! elimination on the strict version of the chosen inequalities.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};

use crate::exact::Rational;
use crate::theory::{primal_graph, Clause, LinearAtom, Literal, Theory, VarId};

/// `Σ terms + constant < 0`, terms sorted by variable, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Strict {
    terms: Vec<(VarId, Rational)>,
    constant: Rational,
}

impl Strict {
    fn from_atom(a: &LinearAtom) -> Self {
        Strict {
            terms: a.terms().to_vec(),
            constant: a.constant().clone(),
        }
    }

    fn coefficient(&self, v: VarId) -> Option<&Rational> {
        self.terms.iter().find(|(u, _)| *u == v).map(|(_, c)| c)
    }

    /// Positive combination `p/|p_v| + q/|q_v|`, which cancels `v`.
    fn cancel(p: &Strict, q: &Strict, v: VarId) -> Strict {
        let sp = p.coefficient(v).expect("mentions v").abs().recip();
        let sq = q.coefficient(v).expect("mentions v").abs().recip();
        let mut terms: BTreeMap<VarId, Rational> = BTreeMap::new();
        for (u, c) in &p.terms {
            *terms.entry(*u).or_insert_with(Rational::zero) += c * &sp;
        }
        for (u, c) in &q.terms {
            *terms.entry(*u).or_insert_with(Rational::zero) += c * &sq;
        }
        let mut out = Strict {
            terms: terms.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            constant: &p.constant * &sp + &q.constant * &sq,
        };
        if let Some((_, lead)) = out.terms.first() {
            let scale = lead.abs();
            for (_, c) in out.terms.iter_mut() {
                *c /= &scale;
            }
            out.constant /= &scale;
        }
        out
    }
}

/// Whether the strict system has a real solution.
fn strictly_feasible(system: &[Strict]) -> bool {
    let mut rows: BTreeSet<Strict> = system.iter().cloned().collect();
    loop {
        if rows.iter().any(|r| r.terms.is_empty() && !r.constant.is_negative()) {
            return false;
        }
        rows.retain(|r| !r.terms.is_empty());
        // eliminate the variable with the fewest generated pairs
        let mut counts: BTreeMap<VarId, (usize, usize)> = BTreeMap::new();
        for r in &rows {
            for (v, c) in &r.terms {
                let e = counts.entry(*v).or_default();
                if c.is_positive() {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let Some((&v, _)) = counts.iter().min_by_key(|(_, (p, n))| p * n) else {
            return true;
        };
        let (mentioning, rest): (Vec<Strict>, Vec<Strict>) = rows.into_iter().partition(|r| r.coefficient(v).is_some());
        let (pos, neg): (Vec<&Strict>, Vec<&Strict>) =
            mentioning.iter().partition(|r| r.coefficient(v).is_some_and(|c| c.is_positive()));
        rows = rest.into_iter().collect();
        for p in &pos {
            for q in &neg {
                rows.insert(Strict::cancel(p, q, v));
            }
        }
    }
}

struct Search<'a> {
    clauses: Vec<&'a Clause>,
    chosen: Vec<Strict>,
    bools: BTreeMap<VarId, bool>,
}

impl Search<'_> {
    fn satisfied(&self, clause: &Clause) -> bool {
        clause.literals().iter().any(|l| match l {
            Literal::Bool { var, positive } => self.bools.get(var) == Some(positive),
            Literal::Linear(a) => self.chosen.contains(&Strict::from_atom(a)),
        })
    }

    fn run(&mut self, next: usize) -> bool {
        let Some(clause) = self.clauses.get(next).copied() else {
            return true;
        };
        if self.satisfied(clause) {
            return self.run(next + 1);
        }
        for lit in clause.literals() {
            match lit {
                Literal::Bool { var, positive } => {
                    if self.bools.contains_key(var) {
                        continue;
                    }
                    self.bools.insert(*var, *positive);
                    if self.run(next + 1) {
                        return true;
                    }
                    self.bools.remove(var);
                }
                Literal::Linear(a) => {
                    self.chosen.push(Strict::from_atom(a));
                    if strictly_feasible(&self.chosen) && self.run(next + 1) {
                        return true;
                    }
                    self.chosen.pop();
                }
            }
        }
        false
    }
}

/// True iff the models of `theory` (over its live variables) have positive
/// volume. Boolean variables only need some satisfying value.
pub fn has_positive_measure(theory: &Theory) -> bool {
    if theory.is_unsat() {
        return false;
    }
    primal_graph(theory).components().into_iter().all(|comp| {
        let part = theory.restrict(&comp);
        let mut clauses: Vec<&Clause> = part.clauses().iter().collect();
        clauses.sort_by_key(|c| c.literals().len());
        let clauses = clauses.into_iter().cloned().collect::<Vec<_>>();
        let mut search = Search {
            clauses: clauses.iter().collect(),
            chosen: Vec::new(),
            bools: BTreeMap::new(),
        };
        search.run(0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;
    use crate::theory::parse_problem;

    fn positive(text: &str) -> bool {
        has_positive_measure(&parse_problem(text).unwrap().theory)
    }

    #[test]
    fn boxes_and_contradictions() {
        assert!(positive("(declare-real x 0 1)"));
        assert!(!positive("(declare-real x 0 1) (assert (<= x -1))"));
        // a single point has no volume
        assert!(!positive("(declare-real x 0 1) (assert (<= x 1/2)) (assert (<= 1/2 x))"));
    }

    #[test]
    fn needs_elimination() {
        // x + y ≥ 5/4 and x - y ≥ 1/2 inside the unit square: a small triangle
        assert!(positive("(declare-real x 0 1) (declare-real y 0 1) (assert (<= 5/4 (+ x y))) (assert (<= 1/2 (- x y)))"));
        // tightening to 3/2 leaves only the corner point (1, 1/2)
        assert!(!positive("(declare-real x 0 1) (declare-real y 0 1) (assert (<= 3/2 (+ x y))) (assert (<= 1/2 (- x y)))"));
        // x + y ≥ 3/2 and x ≤ y - 1/2 forces y > 1
        assert!(!positive("(declare-real x 0 1) (declare-real y 0 1) (assert (<= 3/2 (+ x y))) (assert (<= x (- y 1)))"));
    }

    #[test]
    fn disjunctions_and_booleans() {
        let theta = "(declare-real y -1 1) (declare-real x -1/2 1/2)
                     (assert (or (<= (+ x 1) y) (<= y (- x 1))))";
        let p = parse_problem(theta).unwrap();
        let y = p.table().lookup("y").unwrap();
        assert!(has_positive_measure(&p.theory));
        assert!(!has_positive_measure(&p.theory.substitute(y, &ratio(0, 1))));
        assert!(has_positive_measure(&p.theory.substitute(y, &ratio(3, 4))));
        assert!(!positive("(declare-bool b) (declare-real x 0 1) (assert b) (assert (or (not b) (<= x 0)))"));
        assert!(positive("(declare-bool b) (declare-real x 0 1) (assert (or b (<= x 0))) (assert (or (not b) (<= x 1/2)))"));
    }
}
