//! Reader for the s-expression problem format:
//!
//! ```text
//! (declare-real price 0 3000)
//! (declare-bool b)
//! (assert (or (< price (+ (* 10 sqft) 1000)) (< price (+ (* 20 sqft) 100))))
//! (weight (< 0 price 3000) (* 1 (^ price 2)))
//! ```
//!
//! Asserted formulas may nest `and`/`or`/`not`/`=>` freely; they are pushed
//! to negation normal form and distributed into CNF.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use super::{
    domain_clauses, Clause, DeclareError, Guard, LinearAtom, Literal, Monomial, Normalized, Problem,
    Theory, VarId, VarTable, WeightEntry, WeightPoly, WeightSpec, RESERVED_PREFIX,
};
use crate::exact::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("real variable `{0}` needs explicit bounds: (declare-real {0} <lo> <hi>)")]
    UnboundedReal(String),
    #[error("equality atoms are not supported (they have measure zero)")]
    Equality,
    #[error(transparent)]
    Declare(#[from] DeclareError),
    #[error("names starting with `__` are reserved: `{0}`")]
    ReservedName(String),
    #[error("asserted clause is empty (trivially unsatisfiable)")]
    EmptyClause,
    #[error("non-linear term")]
    NonLinear,
    #[error("`{name}` is not a {expected} variable")]
    WrongKind { name: String, expected: &'static str },
    #[error("weight guard must be a conjunction of literals over at most one variable")]
    BadGuard,
    #[error("declarations are not allowed in a query")]
    DeclarationInQuery,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn error(self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            kind,
        }
    }

    fn syntax(self, msg: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax(msg.into()))
    }
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s, _) => write!(f, "{s}"),
            Sexp::List(items, _) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

fn read_sexps(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
                continue;
            }
            ';' => {
                while chars.peek().is_some_and(|c| *c != '\n') {
                    chars.next();
                }
                continue;
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' => {
                chars.next();
                stack.push((Vec::new(), pos));
            }
            ')' => {
                chars.next();
                let (items, start) = stack.pop().ok_or_else(|| pos.syntax("unbalanced `)`"))?;
                let list = Sexp::List(items, start);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                    column += 1;
                }
                let sexp = Sexp::Atom(atom, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(sexp),
                    None => top.push(sexp),
                }
                continue;
            }
        }
        column += 1;
    }
    if let Some((_, start)) = stack.pop() {
        return Err(start.syntax("unclosed `(`"));
    }
    Ok(top)
}

#[derive(Debug, Clone)]
enum Formula {
    True,
    False,
    Lit(Literal),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    fn negate(self) -> Formula {
        match self {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Lit(l) => Formula::Lit(l.negate()),
            Formula::And(fs) => Formula::Or(fs.into_iter().map(Formula::negate).collect()),
            Formula::Or(fs) => Formula::And(fs.into_iter().map(Formula::negate).collect()),
        }
    }

    /// Clauses as literal lists; an empty inner list is the false clause.
    fn cnf(self) -> Vec<Vec<Literal>> {
        match self {
            Formula::True => Vec::new(),
            Formula::False => vec![Vec::new()],
            Formula::Lit(l) => vec![vec![l]],
            Formula::And(fs) => fs.into_iter().flat_map(Formula::cnf).collect(),
            Formula::Or(fs) => {
                let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
                for f in fs {
                    let part = f.cnf();
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    for a in &acc {
                        for b in &part {
                            let mut c = a.clone();
                            c.extend(b.iter().cloned());
                            next.push(c);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }

    fn conjuncts(self) -> Option<Vec<Literal>> {
        match self {
            Formula::True => Some(Vec::new()),
            Formula::Lit(l) => Some(vec![l]),
            Formula::And(fs) => {
                let mut out = Vec::new();
                for f in fs {
                    out.extend(f.conjuncts()?);
                }
                Some(out)
            }
            Formula::False | Formula::Or(_) => None,
        }
    }
}

struct LinExpr {
    terms: BTreeMap<VarId, Rational>,
    constant: Rational,
}

impl LinExpr {
    fn constant(c: Rational) -> Self {
        LinExpr {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    fn scaled(mut self, k: &Rational) -> Self {
        for c in self.terms.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self
    }

    fn add(mut self, other: LinExpr) -> Self {
        for (v, c) in other.terms {
            *self.terms.entry(v).or_insert_with(Rational::zero) += c;
        }
        self.constant += other.constant;
        self
    }

    fn as_constant(&self) -> Option<&Rational> {
        self.terms.values().all(Zero::is_zero).then_some(&self.constant)
    }
}

struct Reader {
    table: VarTable,
    clauses: Vec<Clause>,
    weights: Vec<WeightEntry>,
    allow_declarations: bool,
}

fn expect_atom(s: &Sexp) -> Result<&str, ParseError> {
    match s {
        Sexp::Atom(a, _) => Ok(a),
        Sexp::List(_, p) => Err(p.syntax("expected a name or number")),
    }
}

fn looks_numeric(s: &str) -> bool {
    s.chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '.' || ((c == '-' || c == '+') && s.len() > 1))
}

fn number(s: &Sexp) -> Result<Rational, ParseError> {
    let text = expect_atom(s)?;
    parse_rational(text).map_err(|e| s.pos().syntax(e.to_string()))
}

impl Reader {
    fn command(&mut self, sexp: &Sexp) -> Result<(), ParseError> {
        let Sexp::List(items, pos) = sexp else {
            return Err(sexp.pos().syntax("expected a command such as (assert ...)"));
        };
        let head = items.first().ok_or_else(|| pos.syntax("empty command"))?;
        let head = expect_atom(head)?;
        match head {
            "declare-real" | "declare-bool" if !self.allow_declarations => {
                Err(pos.error(ParseErrorKind::DeclarationInQuery))
            }
            "declare-real" => {
                let name = items.get(1).ok_or_else(|| pos.syntax("declare-real needs a name"))?;
                let name = self.fresh_name(name)?;
                if items.len() < 4 {
                    return Err(pos.error(ParseErrorKind::UnboundedReal(name)));
                }
                if items.len() > 4 {
                    return Err(pos.syntax("declare-real takes a name and two bounds"));
                }
                let lo = number(&items[2])?;
                let hi = number(&items[3])?;
                let v = self
                    .table
                    .declare_real(&name, lo.clone(), hi.clone())
                    .map_err(|e| pos.error(e.into()))?;
                self.clauses.extend(domain_clauses(v, &lo, &hi));
                Ok(())
            }
            "declare-bool" => {
                if items.len() != 2 {
                    return Err(pos.syntax("declare-bool takes exactly one name"));
                }
                let name = self.fresh_name(&items[1])?;
                self.table.declare_bool(&name).map_err(|e| pos.error(e.into()))?;
                Ok(())
            }
            "assert" => {
                if items.len() != 2 {
                    return Err(pos.syntax("assert takes exactly one formula"));
                }
                for lits in self.formula(&items[1])?.cnf() {
                    if lits.is_empty() {
                        return Err(pos.error(ParseErrorKind::EmptyClause));
                    }
                    self.clauses.push(Clause::new(lits));
                }
                Ok(())
            }
            "weight" => {
                if items.len() != 3 {
                    return Err(pos.syntax("weight takes a literal and a polynomial"));
                }
                let guard = self.guard(&items[1])?;
                let poly = self.poly(&items[2])?;
                self.weights.push(WeightEntry { guard, poly });
                Ok(())
            }
            other => Err(pos.syntax(format!("unknown command `{other}`"))),
        }
    }

    fn fresh_name(&self, s: &Sexp) -> Result<String, ParseError> {
        let name = expect_atom(s)?;
        if looks_numeric(name) {
            return Err(s.pos().syntax(format!("`{name}` is not a valid name")));
        }
        if name.starts_with(RESERVED_PREFIX) {
            return Err(s.pos().error(ParseErrorKind::ReservedName(name.to_string())));
        }
        Ok(name.to_string())
    }

    fn var(&self, s: &Sexp, name: &str) -> Result<VarId, ParseError> {
        self.table
            .lookup(name)
            .ok_or_else(|| s.pos().error(ParseErrorKind::UnknownVariable(name.to_string())))
    }

    fn real_var(&self, s: &Sexp, name: &str) -> Result<VarId, ParseError> {
        let v = self.var(s, name)?;
        if !self.table.is_real(v) {
            return Err(s.pos().error(ParseErrorKind::WrongKind {
                name: name.to_string(),
                expected: "real",
            }));
        }
        Ok(v)
    }

    fn formula(&self, s: &Sexp) -> Result<Formula, ParseError> {
        match s {
            Sexp::Atom(a, _) => match a.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                name => {
                    let v = self.var(s, name)?;
                    if self.table.is_real(v) {
                        return Err(s.pos().error(ParseErrorKind::WrongKind {
                            name: name.to_string(),
                            expected: "Boolean",
                        }));
                    }
                    Ok(Formula::Lit(Literal::Bool { var: v, positive: true }))
                }
            },
            Sexp::List(items, pos) => {
                let head = expect_atom(items.first().ok_or_else(|| pos.syntax("empty formula"))?)?;
                let args = &items[1..];
                match head {
                    "or" => Ok(Formula::Or(args.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?)),
                    "and" => Ok(Formula::And(args.iter().map(|a| self.formula(a)).collect::<Result<_, _>>()?)),
                    "not" => match args {
                        [inner] => Ok(self.formula(inner)?.negate()),
                        _ => Err(pos.syntax("not takes one argument")),
                    },
                    "=>" => match args {
                        [premise, conclusion] => Ok(Formula::Or(vec![
                            self.formula(premise)?.negate(),
                            self.formula(conclusion)?,
                        ])),
                        _ => Err(pos.syntax("=> takes two arguments")),
                    },
                    "<=" | "<" | ">=" | ">" => {
                        if args.len() < 2 {
                            return Err(pos.syntax(format!("{head} needs at least two arguments")));
                        }
                        let exprs = args.iter().map(|a| self.lexpr(a)).collect::<Result<Vec<_>, _>>()?;
                        let flip = head.starts_with('>');
                        let mut parts = Vec::new();
                        let mut exprs = exprs.into_iter();
                        let mut prev = exprs.next().expect("two arguments");
                        for next in exprs {
                            let keep = LinExpr {
                                terms: next.terms.clone(),
                                constant: next.constant.clone(),
                            };
                            // a ≤ b  ⇔  a - b ≤ 0
                            let diff = if flip {
                                next.add(prev.scaled(&-Rational::one()))
                            } else {
                                prev.add(next.scaled(&-Rational::one()))
                            };
                            parts.push(match LinearAtom::normalize(diff.terms, diff.constant) {
                                Normalized::Atom(a) => Formula::Lit(Literal::Linear(a)),
                                Normalized::Ground(true) => Formula::True,
                                Normalized::Ground(false) => Formula::False,
                            });
                            prev = keep;
                        }
                        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
                    }
                    "=" => Err(pos.error(ParseErrorKind::Equality)),
                    other => Err(pos.syntax(format!("unknown connective `{other}`"))),
                }
            }
        }
    }

    fn lexpr(&self, s: &Sexp) -> Result<LinExpr, ParseError> {
        match s {
            Sexp::Atom(a, _) => {
                if looks_numeric(a) {
                    return Ok(LinExpr::constant(number(s)?));
                }
                let v = self.real_var(s, a)?;
                Ok(LinExpr {
                    terms: BTreeMap::from([(v, Rational::one())]),
                    constant: Rational::zero(),
                })
            }
            Sexp::List(items, pos) => {
                let head = expect_atom(items.first().ok_or_else(|| pos.syntax("empty expression"))?)?;
                let args = items[1..].iter().map(|a| self.lexpr(a)).collect::<Result<Vec<_>, _>>()?;
                match head {
                    "+" if !args.is_empty() => Ok(args
                        .into_iter()
                        .fold(LinExpr::constant(Rational::zero()), LinExpr::add)),
                    "-" if args.len() == 1 => Ok(args.into_iter().next().unwrap().scaled(&-Rational::one())),
                    "-" if args.len() >= 2 => {
                        let mut it = args.into_iter();
                        let first = it.next().unwrap();
                        Ok(it.fold(first, |acc, e| acc.add(e.scaled(&-Rational::one()))))
                    }
                    "*" if !args.is_empty() => {
                        let mut factor = Rational::one();
                        let mut variable: Option<LinExpr> = None;
                        for e in args {
                            match e.as_constant() {
                                Some(c) => factor *= c,
                                None if variable.is_none() => variable = Some(e),
                                None => return Err(pos.error(ParseErrorKind::NonLinear)),
                            }
                        }
                        Ok(variable.unwrap_or_else(|| LinExpr::constant(Rational::one())).scaled(&factor))
                    }
                    "/" if args.len() == 2 => {
                        let divisor = args[1].as_constant().ok_or_else(|| pos.error(ParseErrorKind::NonLinear))?;
                        if divisor.is_zero() {
                            return Err(pos.syntax("division by zero"));
                        }
                        let inv = divisor.recip();
                        Ok(args.into_iter().next().unwrap().scaled(&inv))
                    }
                    other => Err(pos.syntax(format!("bad linear expression head `{other}`"))),
                }
            }
        }
    }

    fn guard(&self, s: &Sexp) -> Result<Guard, ParseError> {
        let lits = self
            .formula(s)?
            .conjuncts()
            .ok_or_else(|| s.pos().error(ParseErrorKind::BadGuard))?;
        let mut vars: Vec<VarId> = lits.iter().flat_map(Literal::vars).collect();
        vars.sort();
        vars.dedup();
        if vars.len() > 1 {
            return Err(s.pos().error(ParseErrorKind::BadGuard));
        }
        Ok(lits)
    }

    fn poly(&self, s: &Sexp) -> Result<WeightPoly, ParseError> {
        if let Sexp::List(items, _) = s {
            if let Some(Sexp::Atom(head, _)) = items.first() {
                if head == "+" {
                    let terms = items[1..].iter().map(|m| self.monomial(m)).collect::<Result<_, _>>()?;
                    return Ok(WeightPoly { terms });
                }
            }
        }
        Ok(WeightPoly {
            terms: vec![self.monomial(s)?],
        })
    }

    fn monomial(&self, s: &Sexp) -> Result<Monomial, ParseError> {
        let mut mono = Monomial::constant(Rational::one());
        match s {
            Sexp::List(items, _) if matches!(items.first(), Some(Sexp::Atom(h, _)) if h == "*") => {
                for f in &items[1..] {
                    self.factor(f, &mut mono)?;
                }
            }
            other => self.factor(other, &mut mono)?,
        }
        mono.powers.sort();
        let mut merged: Vec<(VarId, u32)> = Vec::new();
        for (v, p) in mono.powers.drain(..) {
            match merged.last_mut() {
                Some((u, q)) if *u == v => *q += p,
                _ => merged.push((v, p)),
            }
        }
        mono.powers = merged;
        Ok(mono)
    }

    fn factor(&self, s: &Sexp, mono: &mut Monomial) -> Result<(), ParseError> {
        match s {
            Sexp::Atom(a, _) if looks_numeric(a) => {
                mono.coeff *= number(s)?;
            }
            Sexp::Atom(a, _) => {
                let v = self.real_var(s, a)?;
                mono.powers.push((v, 1));
            }
            Sexp::List(items, pos) => match items.as_slice() {
                [Sexp::Atom(h, _), base, exp] if h == "^" => {
                    let v = self.real_var(base, expect_atom(base)?)?;
                    let e: u32 = expect_atom(exp)?
                        .parse()
                        .map_err(|_| exp.pos().syntax("exponent must be a natural number"))?;
                    if e > 0 {
                        mono.powers.push((v, e));
                    }
                }
                _ => return Err(pos.syntax(format!("bad monomial factor `{s}`"))),
            },
        }
        Ok(())
    }
}

pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let mut reader = Reader {
        table: VarTable::new(),
        clauses: Vec::new(),
        weights: Vec::new(),
        allow_declarations: true,
    };
    for sexp in read_sexps(text)? {
        reader.command(&sexp)?;
    }
    let vars = reader.table.ids().collect();
    let theory = Theory::new(Arc::new(reader.table), vars, reader.clauses);
    Ok(Problem {
        theory,
        weights: WeightSpec {
            entries: reader.weights,
        },
    })
}

/// Reads extra asserted clauses against an existing problem's variables.
pub fn parse_query(text: &str, problem: &Problem) -> Result<Vec<Clause>, ParseError> {
    let mut reader = Reader {
        table: (**problem.table()).clone(),
        clauses: Vec::new(),
        weights: Vec::new(),
        allow_declarations: false,
    };
    for sexp in read_sexps(text)? {
        if let Sexp::List(items, pos) = &sexp {
            if matches!(items.first(), Some(Sexp::Atom(h, _)) if h == "weight") {
                return Err(pos.syntax("weights are not allowed in a query"));
            }
        }
        reader.command(&sexp)?;
    }
    Ok(reader.clauses)
}
