//! SMT(LRA) problems in conjunctive normal form.
//!
//! Every linear atom is kept in the canonical shape `Σ cᵥ·v + k ≤ 0` with
//! its leading coefficient scaled to ±1. Strict and non-strict comparisons
//! are collapsed, since integration never sees measure-zero boundaries.

mod graph;
mod interval;
mod parse;
mod partition;
mod write;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_traits::{Signed, Zero};

use crate::exact::{format_compact, Rational};

pub use graph::{
    build_pseudo_tree, is_tree, primal_graph, rooted_height, NotATree, PrimalGraph, PseudoTree,
    PseudoTreeStrategy,
};
pub use interval::{univariate_feasible_set, unary_feasible_intervals, Endpoint, Span, SpanSet};
pub use parse::{parse_problem, parse_query, ParseError, ParseErrorKind};
pub use partition::{partition, ChildPart, Partition};
pub use write::write_problem;

/// Variable names starting with this prefix are reserved for reductions.
pub const RESERVED_PREFIX: &str = "__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    Real { lo: Rational, hi: Rational },
    Bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeclareError {
    #[error("variable `{0}` declared twice")]
    Duplicate(String),
    #[error("empty domain for `{0}`: lower bound must be below upper bound")]
    EmptyDomain(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarTable {
    vars: Vec<VarInfo>,
    by_name: HashMap<String, VarId>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn declare(&mut self, name: &str, kind: VarKind) -> Result<VarId, DeclareError> {
        if self.by_name.contains_key(name) {
            return Err(DeclareError::Duplicate(name.to_string()));
        }
        let id = VarId(self.vars.len() as u32);
        self.vars.push(VarInfo {
            name: name.to_string(),
            kind,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn declare_real(&mut self, name: &str, lo: Rational, hi: Rational) -> Result<VarId, DeclareError> {
        if lo >= hi {
            return Err(DeclareError::EmptyDomain(name.to_string()));
        }
        self.declare(name, VarKind::Real { lo, hi })
    }

    pub fn declare_bool(&mut self, name: &str) -> Result<VarId, DeclareError> {
        self.declare(name, VarKind::Bool)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn info(&self, id: VarId) -> &VarInfo {
        &self.vars[id.index()]
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.vars[id.index()].name
    }

    pub fn is_real(&self, id: VarId) -> bool {
        matches!(self.vars[id.index()].kind, VarKind::Real { .. })
    }

    pub fn domain(&self, id: VarId) -> Option<(&Rational, &Rational)> {
        match &self.vars[id.index()].kind {
            VarKind::Real { lo, hi } => Some((lo, hi)),
            VarKind::Bool => None,
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.vars.len() as u32).map(VarId)
    }
}

/// `Σ cᵥ·v + constant ≤ 0` with at least one nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearAtom {
    terms: Vec<(VarId, Rational)>,
    constant: Rational,
}

/// Result of normalizing a linear constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Atom(LinearAtom),
    Ground(bool),
}

impl LinearAtom {
    /// Builds `Σ terms + constant ≤ 0`, merging repeated variables.
    pub fn normalize(terms: impl IntoIterator<Item = (VarId, Rational)>, constant: Rational) -> Normalized {
        let mut merged: Vec<(VarId, Rational)> = Vec::new();
        let mut sorted: Vec<(VarId, Rational)> = terms.into_iter().collect();
        sorted.sort_by_key(|(v, _)| *v);
        for (v, c) in sorted {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        if merged.is_empty() {
            return Normalized::Ground(!constant.is_positive());
        }
        let scale = merged[0].1.abs();
        for (_, c) in merged.iter_mut() {
            *c /= &scale;
        }
        Normalized::Atom(LinearAtom {
            terms: merged,
            constant: constant / scale,
        })
    }

    pub fn terms(&self) -> &[(VarId, Rational)] {
        &self.terms
    }

    pub fn constant(&self) -> &Rational {
        &self.constant
    }

    pub fn coefficient(&self, v: VarId) -> Option<&Rational> {
        self.terms.iter().find(|(u, _)| *u == v).map(|(_, c)| c)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|(v, _)| *v)
    }

    /// Complement with the boundary collapsed: `¬(e ≤ 0)` becomes `-e ≤ 0`.
    pub fn negate(&self) -> LinearAtom {
        LinearAtom {
            terms: self.terms.iter().map(|(v, c)| (*v, -c)).collect(),
            constant: -&self.constant,
        }
    }

    pub fn lhs(&self, value: impl Fn(VarId) -> Rational) -> Rational {
        self.terms
            .iter()
            .fold(self.constant.clone(), |acc, (v, c)| acc + c * value(*v))
    }

    pub fn holds(&self, value: impl Fn(VarId) -> Rational) -> bool {
        !self.lhs(value).is_positive()
    }

    pub fn substitute(&self, v: VarId, value: &Rational) -> Normalized {
        match self.coefficient(v) {
            None => Normalized::Atom(self.clone()),
            Some(c) => {
                let constant = &self.constant + c * value;
                LinearAtom::normalize(
                    self.terms.iter().filter(|(u, _)| *u != v).cloned(),
                    constant,
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Literal {
    Linear(LinearAtom),
    Bool { var: VarId, positive: bool },
}

impl Literal {
    pub fn negate(&self) -> Literal {
        match self {
            Literal::Linear(a) => Literal::Linear(a.negate()),
            Literal::Bool { var, positive } => Literal::Bool {
                var: *var,
                positive: !positive,
            },
        }
    }

    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Literal::Linear(a) => a.vars().collect(),
            Literal::Bool { var, .. } => vec![*var],
        }
    }

    pub fn mentions(&self, v: VarId) -> bool {
        match self {
            Literal::Linear(a) => a.coefficient(v).is_some(),
            Literal::Bool { var, .. } => *var == v,
        }
    }

    pub fn as_linear(&self) -> Option<&LinearAtom> {
        match self {
            Literal::Linear(a) => Some(a),
            Literal::Bool { .. } => None,
        }
    }
}

/// Disjunction of literals, sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clause(Vec<Literal>);

impl Clause {
    pub fn new(mut lits: Vec<Literal>) -> Clause {
        lits.sort();
        lits.dedup();
        Clause(lits)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.0.iter().flat_map(Literal::vars).collect()
    }

    pub fn mentions(&self, v: VarId) -> bool {
        self.0.iter().any(|l| l.mentions(v))
    }

    /// `Some(truth)` once the clause is decided, otherwise the residual.
    fn simplify(&self, mut rewrite: impl FnMut(&Literal) -> Result<Literal, bool>) -> Result<Clause, bool> {
        let mut kept = Vec::with_capacity(self.0.len());
        for lit in &self.0 {
            match rewrite(lit) {
                Ok(l) => kept.push(l),
                Err(true) => return Err(true),
                Err(false) => {}
            }
        }
        if kept.is_empty() {
            Err(false)
        } else {
            Ok(Clause::new(kept))
        }
    }
}

/// A CNF over a shared variable table.
///
/// `vars` lists the variables still free in this (possibly residual)
/// theory; equality and hashing ignore the table so that canonical theories
/// can serve directly as cache keys.
#[derive(Debug, Clone)]
pub struct Theory {
    table: Arc<VarTable>,
    vars: BTreeSet<VarId>,
    clauses: Vec<Clause>,
    unsat: bool,
}

impl PartialEq for Theory {
    fn eq(&self, other: &Self) -> bool {
        self.unsat == other.unsat && self.vars == other.vars && self.clauses == other.clauses
    }
}

impl Eq for Theory {}

impl Hash for Theory {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.unsat.hash(state);
        self.vars.hash(state);
        self.clauses.hash(state);
    }
}

impl Theory {
    pub fn new(table: Arc<VarTable>, vars: BTreeSet<VarId>, clauses: Vec<Clause>) -> Theory {
        let mut clauses = clauses;
        let unsat = clauses.iter().any(Clause::is_empty);
        if unsat {
            clauses.clear();
        } else {
            clauses.sort();
            clauses.dedup();
        }
        Theory {
            table,
            vars,
            clauses,
            unsat,
        }
    }

    pub fn table(&self) -> &Arc<VarTable> {
        &self.table
    }

    pub fn vars(&self) -> &BTreeSet<VarId> {
        &self.vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_unsat(&self) -> bool {
        self.unsat
    }

    pub fn name(&self, v: VarId) -> &str {
        self.table.name(v)
    }

    pub fn real_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().copied().filter(|v| self.table.is_real(*v))
    }

    pub fn bool_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().copied().filter(|v| !self.table.is_real(*v))
    }

    /// Distinct linear atoms up to complement, i.e. the LRA literal count.
    pub fn lra_atom_count(&self) -> usize {
        let mut seen = BTreeSet::new();
        for clause in &self.clauses {
            for lit in clause.literals() {
                if let Literal::Linear(a) = lit {
                    let neg = a.negate();
                    seen.insert(if *a < neg { a.clone() } else { neg });
                }
            }
        }
        seen.len()
    }

    /// Instantiates real variable `v`, folding it into every constant.
    /// Ground literals are decided; decided-true clauses disappear.
    pub fn substitute(&self, v: VarId, value: &Rational) -> Theory {
        self.rewrite(v, |lit| match lit {
            Literal::Linear(a) if a.coefficient(v).is_some() => match a.substitute(v, value) {
                Normalized::Atom(b) => Ok(Literal::Linear(b)),
                Normalized::Ground(t) => Err(t),
            },
            other => Ok(other.clone()),
        })
    }

    /// Conditions on a Boolean variable.
    pub fn assign_bool(&self, v: VarId, value: bool) -> Theory {
        self.rewrite(v, |lit| match lit {
            Literal::Bool { var, positive } if *var == v => Err(*positive == value),
            other => Ok(other.clone()),
        })
    }

    fn rewrite(&self, v: VarId, mut f: impl FnMut(&Literal) -> Result<Literal, bool>) -> Theory {
        let mut vars = self.vars.clone();
        vars.remove(&v);
        if self.unsat {
            return Theory::new(self.table.clone(), vars, vec![Clause::new(vec![])]);
        }
        let mut clauses = Vec::with_capacity(self.clauses.len());
        for clause in &self.clauses {
            if !clause.mentions(v) {
                clauses.push(clause.clone());
                continue;
            }
            match clause.simplify(&mut f) {
                Ok(c) => clauses.push(c),
                Err(true) => {}
                Err(false) => return Theory::new(self.table.clone(), vars, vec![Clause::new(vec![])]),
            }
        }
        Theory::new(self.table.clone(), vars, clauses)
    }

    /// Clauses whose variables all lie in `keep`, over `keep ∩ vars`.
    pub fn restrict(&self, keep: &BTreeSet<VarId>) -> Theory {
        let vars: BTreeSet<VarId> = self.vars.intersection(keep).copied().collect();
        if self.unsat {
            return Theory::new(self.table.clone(), vars, vec![Clause::new(vec![])]);
        }
        let clauses = self
            .clauses
            .iter()
            .filter(|c| c.vars().is_subset(keep))
            .cloned()
            .collect();
        Theory::new(self.table.clone(), vars, clauses)
    }

    pub fn with_clauses(&self, extra: impl IntoIterator<Item = Clause>) -> Theory {
        let mut clauses = self.clauses.clone();
        if self.unsat {
            clauses.push(Clause::new(vec![]));
        }
        clauses.extend(extra);
        Theory::new(self.table.clone(), self.vars.clone(), clauses)
    }

    /// Same clauses over a table that extends this theory's table.
    pub fn rebase(&self, table: Arc<VarTable>, extra_vars: impl IntoIterator<Item = VarId>) -> Theory {
        let mut vars = self.vars.clone();
        vars.extend(extra_vars);
        let mut clauses = self.clauses.clone();
        if self.unsat {
            clauses.push(Clause::new(vec![]));
        }
        Theory::new(table, vars, clauses)
    }

    /// Exact evaluation of the CNF at a full assignment.
    pub fn holds_at(&self, real: impl Fn(VarId) -> Rational, boolean: impl Fn(VarId) -> bool) -> bool {
        !self.unsat
            && self.clauses.iter().all(|c| {
                c.literals().iter().any(|l| match l {
                    Literal::Linear(a) => a.holds(&real),
                    Literal::Bool { var, positive } => boolean(*var) == *positive,
                })
            })
    }

    pub fn display_literal<'a>(&'a self, lit: &'a Literal) -> impl fmt::Display + 'a {
        LiteralDisplay { table: &self.table, lit }
    }
}

struct LiteralDisplay<'a> {
    table: &'a VarTable,
    lit: &'a Literal,
}

impl fmt::Display for LiteralDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lit {
            Literal::Bool { var, positive: true } => write!(f, "{}", self.table.name(*var)),
            Literal::Bool { var, positive: false } => write!(f, "¬{}", self.table.name(*var)),
            Literal::Linear(a) => {
                for (i, (v, c)) in a.terms().iter().enumerate() {
                    let name = self.table.name(*v);
                    if i > 0 {
                        write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
                    } else if c.is_negative() {
                        write!(f, "-")?;
                    }
                    let mag = c.abs();
                    if mag == Rational::from_integer(1.into()) {
                        write!(f, "{name}")?;
                    } else {
                        write!(f, "{}·{name}", format_compact(&mag))?;
                    }
                }
                write!(f, " ≤ {}", format_compact(&-a.constant()))
            }
        }
    }
}

/// One conjunct of a weight guard; the guard holds when every literal does.
pub type Guard = Vec<Literal>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub coeff: Rational,
    pub powers: Vec<(VarId, u32)>,
}

impl Monomial {
    pub fn constant(coeff: Rational) -> Self {
        Monomial {
            coeff,
            powers: Vec::new(),
        }
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|(_, p)| p).sum()
    }

    pub fn eval(&self, value: impl Fn(VarId) -> Rational) -> Rational {
        self.powers.iter().fold(self.coeff.clone(), |acc, (v, p)| {
            let x = value(*v);
            (0..*p).fold(acc, |a, _| a * &x)
        })
    }
}

/// Polynomial weight as written: terms are not merged.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightPoly {
    pub terms: Vec<Monomial>,
}

impl WeightPoly {
    pub fn eval(&self, value: impl Fn(VarId) -> Rational) -> Rational {
        self.terms
            .iter()
            .fold(Rational::zero(), |acc, m| acc + m.eval(&value))
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.terms
            .iter()
            .flat_map(|m| m.powers.iter().map(|(v, _)| *v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightEntry {
    pub guard: Guard,
    pub poly: WeightPoly,
}

impl WeightEntry {
    pub fn guard_vars(&self) -> BTreeSet<VarId> {
        self.guard.iter().flat_map(Literal::vars).collect()
    }
}

/// Per-literal weights: a world's weight is the product of the polynomials
/// of all guards it satisfies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct WeightSpec {
    pub entries: Vec<WeightEntry>,
}

impl WeightSpec {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub theory: Theory,
    pub weights: WeightSpec,
}

impl Problem {
    pub fn unweighted(theory: Theory) -> Problem {
        Problem {
            theory,
            weights: WeightSpec::default(),
        }
    }

    pub fn table(&self) -> &Arc<VarTable> {
        self.theory.table()
    }
}

/// Unary bound clauses `lo ≤ v` and `v ≤ hi`.
pub fn domain_clauses(v: VarId, lo: &Rational, hi: &Rational) -> [Clause; 2] {
    let lower = LinearAtom::normalize([(v, Rational::from_integer((-1).into()))], lo.clone());
    let upper = LinearAtom::normalize([(v, Rational::from_integer(1.into()))], -hi);
    let unit = |n: Normalized| match n {
        Normalized::Atom(a) => Clause::new(vec![Literal::Linear(a)]),
        Normalized::Ground(_) => unreachable!("single-variable atom"),
    };
    [unit(lower), unit(upper)]
}
