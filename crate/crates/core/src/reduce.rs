//! Rewrites weighted problems with Booleans into sums of unweighted,
//! real-only problems.
//!
//! * Each Boolean `b` becomes a real `__lam_b ∈ [-1, 1]` with `b ↦ 0 < λ`.
//! * A monomial weight `β·Π xᵢ^pᵢ` on guard `g` becomes one auxiliary real
//!   per factor, with `g ⇒ 0 ≤ z ≤ xᵢ` and `¬g ⇒ z ≤ 1`, plus a coefficient
//!   variable `v` with `g ⇒ v ≤ β` and `¬g ⇒ v ≤ 1` when `β ≠ 1`.
//! * Multi-term weights are split either by linearity (one summand per
//!   choice of terms) or with a selector variable.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::exact::{format_compact, int, Rational};
use crate::theory::{
    domain_clauses, unary_feasible_intervals, Clause, LinearAtom, Literal, Monomial, Normalized, Problem, Theory,
    VarId, VarKind, VarTable, WeightEntry, WeightSpec,
};

/// How multi-term polynomial weights are encoded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightStrategy {
    /// `(g ? Σ fₜ : 1) = Σₜ (1/k)·(g ? k·fₜ : 1)`, one summand per term choice.
    #[default]
    Expand,
    /// One selector variable per weight whose unit slices pick a term.
    Selector,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReduceError {
    #[error("weight #{entry} has a negative coefficient {coeff}")]
    NegativeCoefficient { entry: usize, coeff: String },
    #[error("weight #{entry}: `{var}` can be negative where the guard holds, so its power is not a length")]
    NegativeBase { entry: usize, var: String },
    #[error("Boolean variables must be eliminated before weights are reduced")]
    BooleansPresent,
    #[error("expanding the weights would produce {0} summands")]
    TooManySummands(u128),
}

/// Where an introduced variable came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxOrigin {
    BoolIndicator { boolean: String },
    Factor { entry: usize, term: usize, factor: usize, base: String },
    Coefficient { entry: usize, term: usize },
    Selector { entry: usize },
}

impl fmt::Display for AuxOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuxOrigin::BoolIndicator { boolean } => write!(f, "indicator of Boolean {boolean}"),
            AuxOrigin::Factor { entry, term, factor, base } => {
                write!(f, "factor {factor} ({base}) of term {term} in weight #{entry}")
            }
            AuxOrigin::Coefficient { entry, term } => write!(f, "coefficient of term {term} in weight #{entry}"),
            AuxOrigin::Selector { entry } => write!(f, "term selector of weight #{entry}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReductionTrace {
    pub introduced: Vec<(String, AuxOrigin)>,
    /// Boolean literal replaced by its linear stand-in, as display strings.
    pub literal_map: Vec<(String, String)>,
}

impl ReductionTrace {
    pub fn origin(&self, name: &str) -> Option<&AuxOrigin> {
        self.introduced.iter().find(|(n, _)| n == name).map(|(_, o)| o)
    }

    fn record(&mut self, name: &str, origin: AuxOrigin) {
        if self.origin(name).is_none() {
            self.introduced.push((name.to_string(), origin));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summand {
    pub coeff: Rational,
    pub problem: Problem,
}

const MAX_SUMMANDS: u128 = 1 << 16;

fn atom_literal(terms: Vec<(VarId, Rational)>, constant: Rational) -> Literal {
    match LinearAtom::normalize(terms, constant) {
        Normalized::Atom(a) => Literal::Linear(a),
        Normalized::Ground(_) => unreachable!("atom with a variable"),
    }
}

/// `v ≤ c`
fn at_most(v: VarId, c: &Rational) -> Literal {
    atom_literal(vec![(v, int(1))], -c)
}

/// `c ≤ v`
fn at_least(v: VarId, c: &Rational) -> Literal {
    atom_literal(vec![(v, int(-1))], c.clone())
}

/// Replaces every Boolean `b` by a real `__lam_b ∈ [-1, 1]`. Variable ids are
/// preserved, so the primal graph is unchanged up to relabelling.
pub fn eliminate_booleans(problem: &Problem) -> (Problem, ReductionTrace) {
    let old = problem.table();
    let mut trace = ReductionTrace::default();
    if problem.theory.bool_vars().next().is_none() {
        return (problem.clone(), trace);
    }
    let mut table = VarTable::new();
    for v in old.ids() {
        let info = old.info(v);
        let id = match &info.kind {
            VarKind::Real { lo, hi } => table.declare_real(&info.name, lo.clone(), hi.clone()),
            VarKind::Bool => {
                let name = format!("__lam_{}", info.name);
                trace.record(&name, AuxOrigin::BoolIndicator { boolean: info.name.clone() });
                table.declare_real(&name, int(-1), int(1))
            }
        }
        .expect("fresh table mirrors a valid one");
        debug_assert_eq!(id, v);
    }
    let table = Arc::new(table);
    let lam = |var: VarId, positive: bool| {
        // b ↦ 0 < λ, ¬b ↦ λ ≤ 0
        if positive {
            atom_literal(vec![(var, int(-1))], Rational::zero())
        } else {
            atom_literal(vec![(var, int(1))], Rational::zero())
        }
    };
    let map = |lit: &Literal| match lit {
        Literal::Bool { var, positive } => lam(*var, *positive),
        other => other.clone(),
    };
    let theory = &problem.theory;
    let mut clauses: Vec<Clause> = theory
        .clauses()
        .iter()
        .map(|c| Clause::new(c.literals().iter().map(map).collect()))
        .collect();
    if theory.is_unsat() {
        clauses.push(Clause::new(vec![]));
    }
    for b in theory.bool_vars() {
        clauses.extend(domain_clauses(b, &int(-1), &int(1)));
        for positive in [true, false] {
            let from = theory.display_literal(&Literal::Bool { var: b, positive }).to_string();
            let to = Theory::new(table.clone(), BTreeSet::new(), vec![]);
            let to = to.display_literal(&lam(b, positive)).to_string();
            trace.literal_map.push((from, to));
        }
    }
    let weights = WeightSpec {
        entries: problem
            .weights
            .entries
            .iter()
            .map(|e| WeightEntry {
                guard: e.guard.iter().map(map).collect(),
                poly: e.poly.clone(),
            })
            .collect(),
    };
    let reduced = Problem {
        theory: Theory::new(table, theory.vars().clone(), clauses),
        weights,
    };
    (reduced, trace)
}

struct Builder {
    table: VarTable,
    vars: BTreeSet<VarId>,
    clauses: Vec<Clause>,
}

impl Builder {
    fn new(problem: &Problem) -> Self {
        let mut clauses = problem.theory.clauses().to_vec();
        if problem.theory.is_unsat() {
            clauses.push(Clause::new(vec![]));
        }
        Builder {
            table: (**problem.table()).clone(),
            vars: problem.theory.vars().clone(),
            clauses,
        }
    }

    fn fresh(&mut self, name: &str, hi: Rational) -> VarId {
        let v = self
            .table
            .declare_real(name, Rational::zero(), hi.clone())
            .expect("reserved names are unique");
        self.vars.insert(v);
        self.clauses.extend(domain_clauses(v, &Rational::zero(), &hi));
        v
    }

    /// `guard ⇒ lit` as one clause.
    fn implied_by(&mut self, guard: &[Literal], lit: Literal) {
        let mut lits: Vec<Literal> = guard.iter().map(Literal::negate).collect();
        lits.push(lit);
        self.clauses.push(Clause::new(lits));
    }

    /// `¬guard ⇒ lit` as one clause per guard literal.
    fn implied_by_negation(&mut self, guard: &[Literal], lit: Literal) {
        for g in guard {
            self.clauses.push(Clause::new(vec![g.clone(), lit.clone()]));
        }
    }

    fn finish(self, weights: WeightSpec) -> Problem {
        let theory = Theory::new(Arc::new(self.table), self.vars, self.clauses);
        Problem { theory, weights }
    }
}

fn check_term(problem: &Problem, entry: usize, guard: &[Literal], m: &Monomial) -> Result<(), ReduceError> {
    if m.coeff.is_negative() {
        return Err(ReduceError::NegativeCoefficient {
            entry,
            coeff: format_compact(&m.coeff),
        });
    }
    let table = problem.table();
    for (x, _) in &m.powers {
        let (lo, hi) = table.domain(*x).expect("weights range over reals");
        let unit: Vec<Clause> = guard
            .iter()
            .filter(|l| l.vars() == [*x])
            .map(|l| Clause::new(vec![l.clone()]))
            .collect();
        let feasible = unary_feasible_intervals(&unit, *x, lo, hi);
        if feasible.first().is_some_and(|(l, _)| l.is_negative()) {
            return Err(ReduceError::NegativeBase {
                entry,
                var: table.name(*x).to_string(),
            });
        }
    }
    Ok(())
}

/// Encodes `guard ? m : 1` as auxiliary variables whose joint volume is that
/// value. `term` tells selector slices of one weight apart in the names.
fn encode_monomial(
    b: &mut Builder,
    trace: &mut ReductionTrace,
    guard: &[Literal],
    m: &Monomial,
    entry: usize,
    term: Option<usize>,
) {
    let suffix = match term {
        Some(t) => format!("{entry}_{t}"),
        None => entry.to_string(),
    };
    let mut j = 0;
    for (x, p) in &m.powers {
        let hi = b.table.domain(*x).expect("real base").1.clone();
        let base = b.table.name(*x).to_string();
        for _ in 0..*p {
            let name = format!("__z_{suffix}_{j}");
            trace.record(
                &name,
                AuxOrigin::Factor {
                    entry,
                    term: term.unwrap_or(0),
                    factor: j,
                    base: base.clone(),
                },
            );
            let z = b.fresh(&name, hi.clone().max(Rational::one()));
            // z ≤ x
            b.implied_by(guard, atom_literal(vec![(z, int(1)), (*x, int(-1))], Rational::zero()));
            b.implied_by_negation(guard, at_most(z, &Rational::one()));
            j += 1;
        }
    }
    if !m.coeff.is_one() {
        let name = format!("__v_{suffix}");
        trace.record(
            &name,
            AuxOrigin::Coefficient {
                entry,
                term: term.unwrap_or(0),
            },
        );
        let v = b.fresh(&name, m.coeff.clone().max(Rational::one()));
        b.implied_by(guard, at_most(v, &m.coeff));
        b.implied_by_negation(guard, at_most(v, &Rational::one()));
    }
}

/// The clause set for one monomial weight: the joint volume of the new
/// variables is `m` where `guard` holds and 1 elsewhere.
pub fn monomial_theory(problem: &Problem, guard: &[Literal], m: &Monomial, entry: usize) -> Result<(Problem, ReductionTrace), ReduceError> {
    check_term(problem, entry, guard, m)?;
    let mut b = Builder::new(problem);
    let mut trace = ReductionTrace::default();
    if m.coeff.is_zero() {
        // weight zero: the guard region contributes nothing
        b.clauses.push(Clause::new(guard.iter().map(Literal::negate).collect()));
    } else {
        encode_monomial(&mut b, &mut trace, guard, m, entry, None);
    }
    Ok((b.finish(WeightSpec::default()), trace))
}

/// Unweighted, real-only problems whose coefficient-weighted MI sum is the
/// WMI of `problem`.
pub fn reduce_weights(problem: &Problem, strategy: WeightStrategy) -> Result<(Vec<Summand>, ReductionTrace), ReduceError> {
    if problem.theory.bool_vars().next().is_some() {
        return Err(ReduceError::BooleansPresent);
    }
    let entries = &problem.weights.entries;
    for (i, e) in entries.iter().enumerate() {
        for m in &e.poly.terms {
            check_term(problem, i, &e.guard, m)?;
        }
    }
    let base = Problem::unweighted(problem.theory.clone());
    match strategy {
        WeightStrategy::Expand => expand(&base, entries),
        WeightStrategy::Selector => selector(&base, entries).map(|(p, t)| {
            (
                vec![Summand {
                    coeff: Rational::one(),
                    problem: p,
                }],
                t,
            )
        }),
    }
}

fn live_terms(e: &WeightEntry) -> Vec<&Monomial> {
    e.poly.terms.iter().filter(|m| !m.coeff.is_zero()).collect()
}

fn expand(base: &Problem, entries: &[WeightEntry]) -> Result<(Vec<Summand>, ReductionTrace), ReduceError> {
    let choices: Vec<Vec<&Monomial>> = entries.iter().map(live_terms).collect();
    let count = choices
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.len().max(1) as u128))
        .unwrap_or(u128::MAX);
    if count > MAX_SUMMANDS {
        return Err(ReduceError::TooManySummands(count));
    }
    let mut trace = ReductionTrace::default();
    let mut summands = Vec::new();
    let mut pick = vec![0usize; entries.len()];
    loop {
        let mut b = Builder::new(base);
        let mut coeff = Rational::one();
        for (i, (e, terms)) in entries.iter().zip(&choices).enumerate() {
            if terms.is_empty() {
                b.clauses.push(Clause::new(e.guard.iter().map(Literal::negate).collect()));
                continue;
            }
            let k = Rational::from_integer(terms.len().into());
            let mut m = terms[pick[i]].clone();
            if terms.len() > 1 {
                coeff /= &k;
                m.coeff *= &k;
            }
            encode_monomial(&mut b, &mut trace, &e.guard, &m, i, None);
        }
        summands.push(Summand {
            coeff,
            problem: b.finish(WeightSpec::default()),
        });
        // odometer over term choices
        let mut i = 0;
        loop {
            if i == entries.len() {
                return Ok((summands, trace));
            }
            pick[i] += 1;
            if pick[i] < choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

fn selector(base: &Problem, entries: &[WeightEntry]) -> Result<(Problem, ReductionTrace), ReduceError> {
    let mut b = Builder::new(base);
    let mut trace = ReductionTrace::default();
    for (i, e) in entries.iter().enumerate() {
        let terms = live_terms(e);
        match terms.len() {
            0 => b.clauses.push(Clause::new(e.guard.iter().map(Literal::negate).collect())),
            1 => encode_monomial(&mut b, &mut trace, &e.guard, terms[0], i, None),
            k => {
                // λ ∈ [0, k+1]: under the guard λ ranges over k unit slices,
                // slice t carrying term t; otherwise λ sits in (k, k+1].
                let kq = Rational::from_integer(k.into());
                let name = format!("__sel_{i}");
                trace.record(&name, AuxOrigin::Selector { entry: i });
                let lam = b.fresh(&name, &kq + Rational::one());
                b.implied_by(&e.guard, at_most(lam, &kq));
                b.implied_by_negation(&e.guard, at_least(lam, &kq));
                for (t, m) in terms.iter().enumerate() {
                    let lo = Rational::from_integer(t.into());
                    let hi = &lo + Rational::one();
                    let slice = [at_least(lam, &lo), at_most(lam, &hi)];
                    encode_monomial(&mut b, &mut trace, &slice, m, i, Some(t));
                }
            }
        }
    }
    Ok((b.finish(WeightSpec::default()), trace))
}

/// Boolean elimination followed by weight reduction:
/// `WMI(problem) = Σ coeffᵢ · MI(problemᵢ)`.
pub fn full_reduce(problem: &Problem, strategy: WeightStrategy) -> Result<(Vec<Summand>, ReductionTrace), ReduceError> {
    let (real_only, mut trace) = eliminate_booleans(problem);
    let (summands, weight_trace) = reduce_weights(&real_only, strategy)?;
    trace.introduced.extend(weight_trace.introduced);
    Ok((summands, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;
    use crate::theory::{is_tree, parse_problem, primal_graph};

    #[test]
    fn booleans_become_indicator_reals() {
        let p = parse_problem("(declare-bool b) (assert (or b (not b))) (weight b 2) (weight (not b) 3)").unwrap();
        let (r, trace) = eliminate_booleans(&p);
        let lam = r.table().lookup("__lam_b").unwrap();
        assert_eq!(r.theory.bool_vars().count(), 0);
        assert_eq!(r.table().domain(lam), Some((&int(-1), &int(1))));
        assert_eq!(trace.origin("__lam_b"), Some(&AuxOrigin::BoolIndicator { boolean: "b".into() }));
        assert_eq!(trace.literal_map.len(), 2);
        assert_eq!(r.weights.entries[0].guard, vec![at_least(lam, &Rational::zero())]);
    }

    #[test]
    fn identity_without_booleans() {
        let p = parse_problem("(declare-real x 0 1)").unwrap();
        let (r, trace) = eliminate_booleans(&p);
        assert_eq!(r, p);
        assert!(trace.introduced.is_empty());
        let (summands, _) = full_reduce(&p, WeightStrategy::Expand).unwrap();
        assert_eq!(summands.len(), 1);
        assert_eq!(summands[0].coeff, int(1));
        assert_eq!(summands[0].problem, p);
    }

    #[test]
    fn squared_price_gets_two_factor_variables() {
        let p = parse_problem(
            "(declare-real price 0 3000) (declare-real sqft 0 200) (declare-bool b)
             (assert (or b (not b)))
             (assert (or (< price (+ (* 10 sqft) 1000)) (< price (+ (* 20 sqft) 100))))
             (weight b 1.5)
             (weight (< 0 price 3000) (* 1 (^ price 2)))",
        )
        .unwrap();
        let (summands, trace) = full_reduce(&p, WeightStrategy::Expand).unwrap();
        assert_eq!(summands.len(), 1);
        let r = &summands[0].problem;
        let names: Vec<&str> = r.theory.vars().iter().map(|v| r.table().name(*v)).collect();
        assert_eq!(names, ["price", "sqft", "__lam_b", "__v_0", "__z_1_0", "__z_1_1"]);
        assert_eq!(r.table().domain(r.table().lookup("__v_0").unwrap()).unwrap().1, &ratio(3, 2));
        assert_eq!(r.table().domain(r.table().lookup("__z_1_0").unwrap()).unwrap().1, &int(3000));
        assert!(matches!(trace.origin("__z_1_1"), Some(AuxOrigin::Factor { base, .. }) if base == "price"));
        assert!(is_tree(&primal_graph(&r.theory)));
    }

    #[test]
    fn expansion_splits_terms_evenly() {
        let p = parse_problem("(declare-real x 0 1) (weight (< 0 x 1) (+ x (^ x 2) 3))").unwrap();
        let (summands, _) = reduce_weights(&p, WeightStrategy::Expand).unwrap();
        assert_eq!(summands.len(), 3);
        assert!(summands.iter().all(|s| s.coeff == ratio(1, 3)));
        assert!(summands.iter().all(|s| is_tree(&primal_graph(&s.problem.theory))));
        // the constant term 3 is scaled to 9 and needs a coefficient variable
        let last = &summands[2].problem;
        let v = last.table().lookup("__v_0").unwrap();
        assert_eq!(last.table().domain(v).unwrap().1, &int(9));
    }

    #[test]
    fn rejected_weights() {
        let neg = parse_problem("(declare-real x 0 1) (weight (< 0 x 1) (* -2 x))").unwrap();
        assert!(matches!(
            reduce_weights(&neg, WeightStrategy::Expand),
            Err(ReduceError::NegativeCoefficient { entry: 0, .. })
        ));
        let base = parse_problem("(declare-real x -1 1) (weight (< x 1/2) (^ x 2))").unwrap();
        assert!(matches!(
            reduce_weights(&base, WeightStrategy::Expand),
            Err(ReduceError::NegativeBase { .. })
        ));
        let ok = parse_problem("(declare-real x -1 1) (weight (< 0 x) (^ x 2))").unwrap();
        assert!(reduce_weights(&ok, WeightStrategy::Expand).is_ok());
        let bools = parse_problem("(declare-bool b)").unwrap();
        assert_eq!(reduce_weights(&bools, WeightStrategy::Expand), Err(ReduceError::BooleansPresent));
    }

    #[test]
    fn selector_adds_one_variable_per_multi_term_weight() {
        let p = parse_problem("(declare-real x 0 1) (weight (< 0 x 1/2) (+ 2 3))").unwrap();
        let (summands, trace) = reduce_weights(&p, WeightStrategy::Selector).unwrap();
        assert_eq!(summands.len(), 1);
        let r = &summands[0].problem;
        let sel = r.table().lookup("__sel_0").unwrap();
        assert_eq!(r.table().domain(sel).unwrap().1, &int(3));
        assert_eq!(trace.origin("__v_0_1"), Some(&AuxOrigin::Coefficient { entry: 0, term: 1 }));
        assert!(is_tree(&primal_graph(&r.theory)));
    }
}
