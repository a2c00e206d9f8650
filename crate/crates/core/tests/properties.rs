use std::collections::BTreeSet;

use proptest::prelude::*;
use smi_core::bench::{generate, random_tree_problem, BenchSpec, Family};
use smi_core::engine::{interpolation_nodes, pseudo_tree_for, smi, solve, NodeRule, SolveOptions};
use smi_core::exact::{int, interpolate, ratio, Rational};
use smi_core::oracle::{has_positive_measure, mc_wmi};
use smi_core::pieces::pe_node;
use smi_core::reduce::{eliminate_booleans, full_reduce, reduce_weights, WeightStrategy};
use smi_core::theory::{
    build_pseudo_tree, is_tree, parse_problem, partition, primal_graph, unary_feasible_intervals, write_problem, Literal,
    Problem, PseudoTreeStrategy, Theory, VarId,
};

fn random_problem(seed: u64) -> Problem {
    parse_problem(&random_tree_problem(seed)).unwrap()
}

/// The unweighted real-only theories a random problem reduces to.
fn reduced(seed: u64) -> Vec<Theory> {
    let (summands, _) = full_reduce(&random_problem(seed), WeightStrategy::Expand).unwrap();
    summands.into_iter().map(|s| s.problem.theory).collect()
}

fn tree_family() -> impl Strategy<Value = Problem> {
    (prop_oneof![Just(Family::Star), Just(Family::Kary3), Just(Family::Path)], 1usize..12)
        .prop_map(|(f, n)| parse_problem(&generate(&BenchSpec::new(f, n)).unwrap()).unwrap())
}

fn interior(lo: &Rational, hi: &Rational, t: u32) -> Rational {
    lo + (hi - lo) * ratio(i64::from(t) + 1, 1 << 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn substitution_never_adds_edges(seed in 0u64..5000, pick in 0usize..8, t in 0u32..65534) {
        for theory in reduced(seed) {
            let vars: Vec<VarId> = theory.real_vars().collect();
            let v = vars[pick % vars.len()];
            let (lo, hi) = theory.table().domain(v).unwrap();
            let value = interior(lo, hi, t);
            let after = theory.substitute(v, &value);
            let before = primal_graph(&theory);
            for (a, b) in primal_graph(&after).edges() {
                prop_assert!(before.has_edge(a, b));
            }
            for clause in after.clauses() {
                prop_assert!(!clause.vars().contains(&v));
            }
        }
    }

    #[test]
    fn pseudo_trees_satisfy_the_ancestor_condition(p in tree_family(), balanced in any::<bool>()) {
        let strategy = if balanced { PseudoTreeStrategy::Balanced } else { PseudoTreeStrategy::Rooted };
        let graph = primal_graph(&p.theory);
        let tree = build_pseudo_tree(&graph, p.table(), strategy).unwrap();
        prop_assert!(tree.satisfies_ancestor_condition(&graph));
        for (a, b) in graph.edges() {
            prop_assert!(tree.is_ancestor(a, b) || tree.is_ancestor(b, a));
        }
    }

    #[test]
    fn partition_covers_every_clause(seed in 0u64..5000) {
        for theory in reduced(seed) {
            for comp in primal_graph(&theory).components() {
                let part_theory = theory.restrict(&comp);
                let root = *comp.iter().next().unwrap();
                let part = partition(&part_theory, root);
                let mut seen: BTreeSet<_> = part.root_clauses.iter().cloned().collect();
                for child in &part.children {
                    for c in child.edge.clauses().iter().chain(child.subtree.clauses()) {
                        seen.insert(c.clone());
                    }
                    for c in child.edge.clauses() {
                        prop_assert!(c.vars().is_subset(&BTreeSet::from([root, child.child])));
                    }
                }
                let all: BTreeSet<_> = part_theory.clauses().iter().cloned().collect();
                prop_assert_eq!(seen, all);
            }
        }
    }

    #[test]
    fn boolean_elimination_keeps_the_graph(seed in 0u64..5000) {
        let p = random_problem(seed);
        let (real, trace) = eliminate_booleans(&p);
        prop_assert_eq!(primal_graph(&real.theory).edges(), primal_graph(&p.theory).edges());
        prop_assert_eq!(real.theory.bool_vars().count(), 0);
        let (summands, weights) = reduce_weights(&real, WeightStrategy::Expand).unwrap();
        for s in &summands {
            prop_assert!(is_tree(&primal_graph(&s.problem.theory)));
        }
        let mut names = BTreeSet::new();
        for (name, _) in trace.introduced.iter().chain(&weights.introduced) {
            prop_assert!(names.insert(name.clone()), "{} introduced twice", name);
        }
        for s in &summands {
            for v in s.problem.theory.vars() {
                let name = s.problem.theory.name(*v);
                prop_assert!(p.table().lookup(name).is_some() || names.contains(name), "{} has no origin", name);
            }
        }
    }

    #[test]
    fn engine_options_do_not_change_values(seed in 0u64..5000) {
        let p = random_problem(seed);
        let value = solve(&p, &SolveOptions::default()).unwrap().value;
        let variants = [
            SolveOptions { cache: false, ..SolveOptions::default() },
            SolveOptions { threads: 3, ..SolveOptions::default() },
            SolveOptions { node_rule: NodeRule::Chebyshev, ..SolveOptions::default() },
            SolveOptions { pseudo_tree: PseudoTreeStrategy::Balanced, ..SolveOptions::default() },
        ];
        for options in &variants {
            let again = solve(&p, options).unwrap();
            prop_assert_eq!(&again.value, &value, "{:?}", options);
        }
        prop_assert!(value >= int(0));
    }

    #[test]
    fn zero_value_means_zero_volume(seed in 0u64..5000) {
        for theory in reduced(seed) {
            let value = smi(&theory, &SolveOptions::default()).unwrap().value;
            prop_assert_eq!(value == int(0), !has_positive_measure(&theory));
        }
    }

    #[test]
    fn pieces_are_sorted_and_feasible(seed in 0u64..5000, t in 0u32..65534) {
        for theory in reduced(seed) {
            let tree = pseudo_tree_for(&theory, PseudoTreeStrategy::Rooted, "").unwrap();
            for root in tree.roots() {
                let comp = primal_graph(&theory).components().into_iter().find(|c| c.contains(root)).unwrap();
                let component = theory.restrict(&comp);
                let pieces = pe_node(&component, *root);
                let unary: Vec<_> = component.clauses().iter().filter(|c| c.vars() == BTreeSet::from([*root])).cloned().collect();
                let (lo, hi) = theory.table().domain(*root).unwrap();
                let allowed = unary_feasible_intervals(&unary, *root, lo, hi);
                for w in pieces.pieces().windows(2) {
                    prop_assert!(w[0].hi <= w[1].lo);
                }
                for piece in pieces.pieces() {
                    prop_assert!(piece.lo < piece.hi);
                    prop_assert!(allowed.iter().any(|(l, h)| *l <= piece.lo && piece.hi <= *h));
                    // the polynomial through degree+1 nodes also explains two more
                    let sample = |y: &Rational| (y.clone(), smi(&component.substitute(*root, y), &SolveOptions::default()).unwrap().value);
                    let tight: Vec<_> = interpolation_nodes(piece, piece.degree + 1, NodeRule::EqualSpaced).iter().map(sample).collect();
                    let loose: Vec<_> = interpolation_nodes(piece, piece.degree + 3, NodeRule::Chebyshev).iter().map(sample).collect();
                    let p = interpolate(&tight).unwrap();
                    prop_assert_eq!(&p, &interpolate(&loose).unwrap());
                    let alpha = interior(&piece.lo, &piece.hi, t);
                    prop_assert_eq!(p.eval(&alpha), sample(&alpha).1);
                }
            }
        }
    }

    #[test]
    fn forests_factor(a in 0u64..5000, b in 0u64..5000) {
        let left = random_problem(a);
        let right = random_problem(b);
        let text = format!("{}{}", random_tree_problem(a), rename(&random_tree_problem(b)));
        let joint = parse_problem(&text).unwrap();
        let options = SolveOptions::default();
        let product = solve(&left, &options).unwrap().value * solve(&right, &options).unwrap().value;
        prop_assert_eq!(solve(&joint, &options).unwrap().value, product);
    }

    #[test]
    fn oracle_is_seeded(seed in 0u64..5000, mc_seed in any::<u64>()) {
        let p = random_problem(seed);
        prop_assert_eq!(mc_wmi(&p, 5000, mc_seed).unwrap(), mc_wmi(&p, 5000, mc_seed).unwrap());
    }

    #[test]
    fn generated_problems_round_trip(p in tree_family(), seed in 0u64..5000) {
        for problem in [p, random_problem(seed)] {
            let text = write_problem(&problem);
            let again = parse_problem(&text).unwrap();
            prop_assert_eq!(write_problem(&again), text);
            prop_assert_eq!(again.theory.clauses(), problem.theory.clauses());
        }
    }
}

/// Prefixes the `r*`/`b*` identifiers of a random problem so two of them can
/// share a file.
fn rename(text: &str) -> String {
    let mut out = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        out.push(c);
        if matches!(c, '(' | ' ' | '\n') && matches!(chars.peek(), Some('r' | 'b')) {
            out.push_str("q_");
        }
    }
    out
}

#[test]
fn selector_matches_expand_when_it_stays_a_tree() {
    let weights = [
        "(weight (< 1 x 2) (+ 2 3))",
        "(weight (<= y 1/2) (+ 1/2 (* 3 1/4) 2))",
        "(weight (< 1 x 2) (+ (* 2 x) 3))",
        "(weight (<= y 1/3) (+ (* y y) 1))",
    ];
    let selector = SolveOptions {
        strategy: WeightStrategy::Selector,
        ..SolveOptions::default()
    };
    let mut compared = 0;
    for w in weights {
        let p = parse_problem(&format!("(declare-real x 0 2) (declare-real y 0 1) (assert (<= y x)) {w}")).unwrap();
        let expand = solve(&p, &SolveOptions::default()).unwrap().value;
        match solve(&p, &selector) {
            Ok(s) => {
                assert_eq!(s.value, expand, "{w}");
                compared += 1;
            }
            Err(e) => assert!(matches!(e, smi_core::engine::EngineError::NotATree { .. }), "{w}: {e}"),
        }
    }
    assert!(compared >= 2);
}

#[test]
fn literal_kinds_survive_elimination() {
    let p = parse_problem("(declare-bool b) (declare-real x 0 1) (assert (or b (<= x 1/2)))").unwrap();
    let (real, _) = eliminate_booleans(&p);
    assert!(real
        .theory
        .clauses()
        .iter()
        .all(|c| c.literals().iter().all(|l| matches!(l, Literal::Linear(_)))));
}
