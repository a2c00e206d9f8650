use std::fmt::Write;

use super::{domain_clauses, Literal, Monomial, Problem, VarKind, VarTable};
use crate::exact::format_compact;

fn literal(table: &VarTable, lit: &Literal) -> String {
    match lit {
        Literal::Bool { var, positive: true } => table.name(*var).to_string(),
        Literal::Bool { var, positive: false } => format!("(not {})", table.name(*var)),
        Literal::Linear(a) => {
            let terms: Vec<String> = a
                .terms()
                .iter()
                .map(|(v, c)| format!("(* {} {})", format_compact(c), table.name(*v)))
                .collect();
            let lhs = if terms.len() == 1 {
                terms.into_iter().next().unwrap()
            } else {
                format!("(+ {})", terms.join(" "))
            };
            format!("(<= {lhs} {})", format_compact(&-a.constant()))
        }
    }
}

fn monomial(table: &VarTable, m: &Monomial) -> String {
    let mut out = format!("(* {}", format_compact(&m.coeff));
    for (v, p) in &m.powers {
        write!(out, " (^ {} {p})", table.name(*v)).unwrap();
    }
    out.push(')');
    out
}

/// Serializes a problem in the format read by `parse_problem`.
pub fn write_problem(problem: &Problem) -> String {
    let table = problem.table();
    let theory = &problem.theory;
    let mut out = String::new();
    let mut implied = Vec::new();
    for v in theory.vars() {
        match &table.info(*v).kind {
            VarKind::Real { lo, hi } => {
                writeln!(out, "(declare-real {} {} {})", table.name(*v), format_compact(lo), format_compact(hi)).unwrap();
                implied.extend(domain_clauses(*v, lo, hi));
            }
            VarKind::Bool => writeln!(out, "(declare-bool {})", table.name(*v)).unwrap(),
        }
    }
    if theory.is_unsat() {
        writeln!(out, "(assert false)").unwrap();
    }
    for clause in theory.clauses().iter().filter(|c| !implied.contains(c)) {
        let lits: Vec<String> = clause.literals().iter().map(|l| literal(table, l)).collect();
        if lits.len() == 1 {
            writeln!(out, "(assert {})", lits[0]).unwrap();
        } else {
            writeln!(out, "(assert (or {}))", lits.join(" ")).unwrap();
        }
    }
    for entry in &problem.weights.entries {
        let guard = match entry.guard.as_slice() {
            [] => "true".to_string(),
            [l] => literal(table, l),
            lits => format!("(and {})", lits.iter().map(|l| literal(table, l)).collect::<Vec<_>>().join(" ")),
        };
        let terms: Vec<String> = entry.poly.terms.iter().map(|m| monomial(table, m)).collect();
        writeln!(out, "(weight {guard} (+ {}))", terms.join(" ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::parse_problem;

    #[test]
    fn round_trip() {
        let text = "
            (declare-real y -1 1)
            (declare-real x -1/2 1/2)
            (declare-bool b)
            (assert (or (<= (+ x 1) y) (<= y (- x 1)) b))
            (assert (=> b (< (* 3 x) 1/4)))
            (weight b 3/2)
            (weight (< 0 x 1/4) (+ (* 2 (^ x 2) y) 1))
        ";
        let p = parse_problem(text).unwrap();
        let written = write_problem(&p);
        let q = parse_problem(&written).unwrap();
        assert_eq!(p.theory, q.theory);
        assert_eq!(p.weights, q.weights);
        assert_eq!(**p.table(), **q.table());
    }
}
