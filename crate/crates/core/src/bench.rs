//! Benchmark problem families and a timing harness.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{solve, EngineError, SolveOptions};
use crate::exact::{format_compact, int, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Star,
    Kary3,
    Path,
    House,
    Independent,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Star, Family::Kary3, Family::Path, Family::House, Family::Independent];

    pub fn name(self) -> &'static str {
        match self {
            Family::Star => "star",
            Family::Kary3 => "kary3",
            Family::Path => "path",
            Family::House => "house",
            Family::Independent => "independent",
        }
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family `{s}` (expected star, kary3, path, house or independent)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSpec {
    pub family: Family,
    pub n: usize,
    /// Neighbouring square-footage slack, house family only.
    pub offset: Rational,
}

impl BenchSpec {
    pub fn new(family: Family, n: usize) -> Self {
        BenchSpec {
            family,
            n,
            offset: int(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerateError {
    #[error("n must be at least 1")]
    EmptyFamily,
    #[error("offset must be positive")]
    NonPositiveOffset,
}

fn edge_clause(out: &mut String, a: &str, b: &str) {
    writeln!(out, "(assert (or (<= (+ {a} 1) {b}) (<= {b} (- {a} 1))))").unwrap();
}

fn tree_family(n: usize, parent: impl Fn(usize) -> usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        writeln!(out, "(declare-real x{i} -1 1)").unwrap();
    }
    for i in 1..n {
        edge_clause(&mut out, &format!("x{}", parent(i)), &format!("x{i}"));
    }
    out
}

fn house(out: &mut String, i: usize) {
    writeln!(out, "(declare-real price{i} 0 3000)").unwrap();
    writeln!(out, "(declare-real sqft{i} 0 200)").unwrap();
    writeln!(
        out,
        "(assert (or (< price{i} (+ (* 10 sqft{i}) 1000)) (< price{i} (+ (* 20 sqft{i}) 100))))"
    )
    .unwrap();
    writeln!(out, "(assert (< 0 price{i} 3000))").unwrap();
    writeln!(out, "(assert (< 0 sqft{i} 200))").unwrap();
}

/// Problem text for one benchmark instance.
pub fn generate(spec: &BenchSpec) -> Result<String, GenerateError> {
    let n = spec.n;
    if n == 0 {
        return Err(GenerateError::EmptyFamily);
    }
    Ok(match spec.family {
        Family::Star => tree_family(n, |_| 0),
        Family::Kary3 => tree_family(n, |i| (i - 1) / 3),
        Family::Path => tree_family(n, |i| i - 1),
        Family::Independent => {
            let mut out = String::new();
            for i in 1..=n {
                house(&mut out, i);
            }
            out
        }
        Family::House => {
            if spec.offset <= int(0) {
                return Err(GenerateError::NonPositiveOffset);
            }
            let mut out = String::from("(declare-bool b)\n(assert (or b (not b)))\n");
            for i in 1..=n {
                house(&mut out, i);
            }
            for i in 1..n {
                writeln!(out, "(assert (<= sqft{i} (+ sqft{} {})))", i + 1, format_compact(&spec.offset)).unwrap();
            }
            writeln!(out, "(weight b 1.5)").unwrap();
            for i in 1..=n {
                writeln!(out, "(weight (< 0 price{i} 3000) (^ price{i} 2))").unwrap();
            }
            out
        }
    })
}

/// The star-shaped family with leaves on `[-1/2, 1/2]` around a hub on
/// `[-1, 1]`; its volume is `(1/2)ⁿ/(n+1)`.
pub fn theta_n(n: usize) -> String {
    let mut out = String::from("(declare-real y -1 1)\n");
    for i in 1..=n {
        writeln!(out, "(declare-real x{i} -1/2 1/2)").unwrap();
        edge_clause(&mut out, &format!("x{i}"), "y");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub family: Family,
    pub n: usize,
    pub wallclock_ms: f64,
    pub nodes_expanded: u64,
    pub value: Rational,
}

impl BenchRow {
    pub const HEADER: [&'static str; 5] = ["family", "n", "wallclock_ms", "nodes_expanded", "value"];

    pub fn record(&self) -> [String; 5] {
        [
            self.family.name().to_string(),
            self.n.to_string(),
            format!("{:.3}", self.wallclock_ms),
            self.nodes_expanded.to_string(),
            format_compact(&self.value),
        ]
    }
}

/// Solves each size once untimed, then `repeats` timed runs; the reported
/// time is the mean.
pub fn run_bench(family: Family, ns: &[usize], repeats: usize, options: &SolveOptions) -> Result<Vec<BenchRow>, EngineError> {
    let mut rows = Vec::new();
    for &n in ns {
        let text = generate(&BenchSpec::new(family, n)).expect("valid spec");
        let problem = crate::theory::parse_problem(&text).expect("generated text parses");
        let warm = solve(&problem, options)?;
        let mut total_ms = 0.0;
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            let sol = solve(&problem, options)?;
            total_ms += start.elapsed().as_secs_f64() * 1e3;
            debug_assert_eq!(sol.value, warm.value);
        }
        rows.push(BenchRow {
            family,
            n,
            wallclock_ms: total_ms / repeats.max(1) as f64,
            nodes_expanded: warm.stats.nodes_expanded,
            value: warm.value,
        });
    }
    Ok(rows)
}

fn rational_text(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> (i64, String) {
    let num = rng.gen_range(lo * den..=hi * den);
    let g = num_integer::gcd(num, den);
    let (p, q) = (num / g, den / g);
    let text = if q == 1 { p.to_string() } else { format!("{p}/{q}") };
    (num, text)
}

/// A small random problem with a tree primal graph: up to four reals, two
/// Booleans and two monomial weights of degree at most two, each weight on
/// a guard under which its base is nonnegative.
pub fn random_tree_problem(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reals = rng.gen_range(1..=4usize);
    let bools = rng.gen_range(0..=2usize);
    let mut out = String::new();
    let mut domains = Vec::new();
    for i in 0..reals {
        let lo = rng.gen_range(-2..=0i64);
        let hi = lo + rng.gen_range(1..=3i64);
        writeln!(out, "(declare-real r{i} {lo} {hi})").unwrap();
        domains.push((lo, hi));
    }
    for j in 0..bools {
        writeln!(out, "(declare-bool b{j})").unwrap();
    }
    let atom = |rng: &mut ChaCha8Rng, vars: &[usize]| {
        let terms: Vec<String> = vars
            .iter()
            .map(|v| {
                let c = *[-2i64, -1, 1, 2].choose(rng).unwrap();
                format!("(* {c} r{v})")
            })
            .collect();
        let (_, k) = rational_text(rng, -2, 2, 2);
        let op = if rng.gen_bool(0.5) { "<=" } else { "<" };
        format!("({op} (+ {}) {k})", terms.join(" "))
    };
    for i in 1..reals {
        let parent = rng.gen_range(0..i);
        let lits: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| atom(&mut rng, &[parent, i])).collect();
        writeln!(out, "(assert (or {}))", lits.join(" ")).unwrap();
    }
    for j in 0..bools {
        let r = rng.gen_range(0..reals);
        let neg = if rng.gen_bool(0.5) { format!("(not b{j})") } else { format!("b{j}") };
        writeln!(out, "(assert (or {neg} {}))", atom(&mut rng, &[r])).unwrap();
    }
    for _ in 0..rng.gen_range(0..=2) {
        if bools > 0 && rng.gen_bool(0.3) {
            let j = rng.gen_range(0..bools);
            let (_, c) = rational_text(&mut rng, 0, 3, 4);
            let c = if c == "0" { "1/4".to_string() } else { c };
            let lit = if rng.gen_bool(0.5) { format!("b{j}") } else { format!("(not b{j})") };
            writeln!(out, "(weight {lit} {c})").unwrap();
        } else {
            let v = rng.gen_range(0..reals);
            let (lo, hi) = domains[v];
            if hi <= 0 {
                continue;
            }
            let a = rng.gen_range(lo.max(0)..hi);
            let deg = rng.gen_range(1..=2);
            let (_, c) = rational_text(&mut rng, 1, 2, 2);
            writeln!(out, "(weight (< {a} r{v} {hi}) (* {c} (^ r{v} {deg})))").unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;
    use crate::theory::{is_tree, parse_problem, primal_graph, write_problem};

    fn solve_text(text: &str) -> Rational {
        solve(&parse_problem(text).unwrap(), &SolveOptions::default()).unwrap().value
    }

    #[test]
    fn star_structure() {
        let p = parse_problem(&generate(&BenchSpec::new(Family::Star, 3)).unwrap()).unwrap();
        assert_eq!(p.theory.vars().len(), 3);
        let edges = p.theory.clauses().iter().filter(|c| c.vars().len() == 2).count();
        assert_eq!(edges, 2);
        let p4 = parse_problem(&generate(&BenchSpec::new(Family::Star, 4)).unwrap()).unwrap();
        assert_eq!(p4.theory.clauses().iter().filter(|c| c.vars().len() == 2).count(), 3);
    }

    #[test]
    fn small_values() {
        assert_eq!(solve_text(&generate(&BenchSpec::new(Family::Star, 1)).unwrap()), int(2));
        assert_eq!(solve_text(&generate(&BenchSpec::new(Family::Path, 2)).unwrap()), int(1));
        assert_eq!(
            solve_text(&generate(&BenchSpec::new(Family::Independent, 2)).unwrap()),
            int(430250) * int(430250)
        );
        assert_eq!(solve_text(&theta_n(2)), ratio(1, 12));
    }

    #[test]
    fn house_one_matches_hand_integral() {
        // 2.5 · ∫∫ price² over the one-house region
        let expected = ratio(6588503125000, 3);
        assert_eq!(solve_text(&generate(&BenchSpec::new(Family::House, 1)).unwrap()), expected);
    }

    #[test]
    fn generated_problems_round_trip() {
        for family in Family::ALL {
            if family == Family::House {
                continue;
            }
            let text = generate(&BenchSpec::new(family, 7)).unwrap();
            let p = parse_problem(&text).unwrap();
            let q = parse_problem(&write_problem(&p)).unwrap();
            assert_eq!(p.theory, q.theory);
            assert_eq!(p.weights, q.weights);
        }
    }

    #[test]
    fn invalid_specs() {
        assert_eq!(generate(&BenchSpec::new(Family::Path, 0)), Err(GenerateError::EmptyFamily));
        let spec = BenchSpec {
            offset: int(0),
            ..BenchSpec::new(Family::House, 2)
        };
        assert_eq!(generate(&spec), Err(GenerateError::NonPositiveOffset));
    }

    #[test]
    fn random_problems_are_trees() {
        for seed in 0..100 {
            let text = random_tree_problem(seed);
            let p = parse_problem(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{text}"));
            assert!(is_tree(&primal_graph(&p.theory)), "seed {seed}");
            assert!(p.weights.entries.len() <= 2);
            assert!(p.theory.real_vars().count() <= 4);
        }
    }

    #[test]
    fn bench_rows_match_direct_solves() {
        let rows = run_bench(Family::Star, &[2, 3], 1, &SolveOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let direct = solve_text(&generate(&BenchSpec::new(Family::Star, row.n)).unwrap());
            assert_eq!(row.value, direct);
            assert!(row.value > int(0));
        }
        assert_eq!(rows[0].record()[0], "star");
    }
}
