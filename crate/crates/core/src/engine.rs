//! Search-based model integration.
//!
//! A connected tree-shaped theory is integrated by instantiating its root at
//! a few interior points of every piece, integrating the residual (a forest
//! of smaller trees) recursively, interpolating the piece polynomial and
//! integrating it exactly.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::exact::{format_compact, interpolate, Rational, UniPoly};
use crate::pieces::{pe_node_in, Piece, PieceCache, PieceContext, PieceEvent, PieceSet};
use crate::reduce::{full_reduce, ReduceError, WeightStrategy};
use crate::theory::{
    build_pseudo_tree, primal_graph, rooted_height, unary_feasible_intervals, Clause, NotATree, Problem,
    PseudoTree, PseudoTreeStrategy, Theory, VarId,
};

/// Placement of interpolation nodes inside a piece.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NodeRule {
    /// `l + (u-l)·(i+1)/(N+1)`.
    #[default]
    EqualSpaced,
    /// Rational roundings of Chebyshev nodes.
    Chebyshev,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOptions {
    pub pseudo_tree: PseudoTreeStrategy,
    pub cache: bool,
    pub threads: usize,
    /// Interpolation nodes beyond `degree + 1` per piece.
    pub extra_nodes: usize,
    pub node_rule: NodeRule,
    pub strategy: WeightStrategy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            pseudo_tree: PseudoTreeStrategy::Rooted,
            cache: true,
            threads: 1,
            extra_nodes: 0,
            node_rule: NodeRule::EqualSpaced,
            strategy: WeightStrategy::Expand,
        }
    }
}

/// Search counters plus the shape parameters of the search-space bound.
/// Over several summands, counters add up and shape parameters take the
/// maximum.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    pub instantiations: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Real variables.
    pub n: usize,
    /// Distinct linear atoms up to complement.
    pub m: usize,
    /// Primal tree height from the pseudo tree root.
    pub h_p: usize,
    /// Pseudo tree height.
    pub h_t: usize,
    /// Pseudo tree leaves.
    pub leaves: usize,
    pub summands: usize,
}

impl SearchStats {
    fn absorb(&mut self, other: &SearchStats) {
        self.nodes_expanded += other.nodes_expanded;
        self.instantiations += other.instantiations;
        self.cache_hits += other.cache_hits;
        self.cache_misses += other.cache_misses;
        self.n = self.n.max(other.n);
        self.m = self.m.max(other.m);
        self.h_p = self.h_p.max(other.h_p);
        self.h_t = self.h_t.max(other.h_t);
        self.leaves = self.leaves.max(other.leaves);
        self.summands += other.summands;
    }

    /// `c · l · (n³ · m^h_p)^h_t`
    pub fn search_bound(&self, c: u64) -> BigUint {
        let n = BigUint::from(self.n);
        let inner = &n * &n * &n * BigUint::from(self.m).pow(self.h_p as u32);
        BigUint::from(c) * BigUint::from(self.leaves) * inner.pow(self.h_t as u32)
    }
}

pub const SEARCH_BOUND_CONSTANT: u64 = 64;

/// Whether the expanded node count stays within the search-space bound.
pub fn check_search_bound(stats: &SearchStats, c: u64) -> bool {
    BigUint::from(stats.nodes_expanded) <= stats.search_bound(c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub value: Rational,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error("{source}{hint}")]
    NotATree { source: NotATree, hint: &'static str },
    #[error("the model has zero weighted volume, so conditional probabilities are undefined")]
    ZeroDenominator,
    #[error("could not start worker threads: {0}")]
    Threads(String),
}

type PolyCache = Mutex<HashMap<(Theory, VarId), Arc<Vec<(Piece, UniPoly)>>>>;

#[derive(Default)]
struct Counters {
    nodes: AtomicU64,
    instantiations: AtomicU64,
    hits: AtomicU64,
    misses: AtomicU64,
}

struct Search<'a> {
    tree: &'a PseudoTree,
    options: &'a SolveOptions,
    observer: Option<&'a (dyn Fn(&PieceEvent<'_>) + Sync)>,
    counters: Counters,
    values: Mutex<HashMap<Theory, Rational>>,
    polys: PolyCache,
    pieces: PieceCache,
}

impl Search<'_> {
    fn piece_context(&self) -> PieceContext<'_> {
        PieceContext {
            cache: self.options.cache.then_some(&self.pieces),
            observer: self.observer,
        }
    }

    fn parallel(&self) -> bool {
        self.options.threads > 1
    }

    fn mi(&self, theory: &Theory) -> Rational {
        if theory.is_unsat() {
            return Rational::zero();
        }
        if theory.vars().is_empty() {
            return Rational::one();
        }
        let components = primal_graph(theory).components();
        if components.len() == 1 {
            return self.component(theory);
        }
        let mut product = Rational::one();
        for comp in components {
            product *= self.mi(&theory.restrict(&comp));
            if product.is_zero() {
                break;
            }
        }
        product
    }

    fn root_of(&self, theory: &Theory) -> VarId {
        let table = theory.table();
        theory
            .vars()
            .iter()
            .copied()
            .min_by(|a, b| {
                let da = self.tree.depth(*a).unwrap_or(usize::MAX);
                let db = self.tree.depth(*b).unwrap_or(usize::MAX);
                da.cmp(&db).then_with(|| table.name(*a).cmp(table.name(*b)))
            })
            .expect("nonempty component")
    }

    fn component(&self, theory: &Theory) -> Rational {
        if self.options.cache {
            if let Some(v) = self.values.lock().unwrap().get(theory) {
                self.counters.hits.fetch_add(1, Ordering::Relaxed);
                return v.clone();
            }
            self.counters.misses.fetch_add(1, Ordering::Relaxed);
        }
        self.counters.nodes.fetch_add(1, Ordering::Relaxed);
        let root = self.root_of(theory);
        let value = if self.options.cache {
            self.through_marginal(theory, root)
        } else {
            let pieces = pe_node_in(theory, root, self.piece_context());
            self.sum_pieces(theory, root, &pieces)
        };
        if self.options.cache {
            self.values.lock().unwrap().insert(theory.clone(), value.clone());
        }
        value
    }

    fn sum_pieces(&self, theory: &Theory, root: VarId, pieces: &PieceSet) -> Rational {
        let integral = |p: &Piece| {
            self.piece_poly(theory, root, p)
                .definite_integral(&p.lo, &p.hi)
                .expect("pieces are ordered")
        };
        if self.parallel() {
            let parts: Vec<Rational> = pieces.pieces().par_iter().map(integral).collect();
            parts.into_iter().sum()
        } else {
            pieces.pieces().iter().map(integral).sum()
        }
    }

    /// The polynomial of one piece, recovered from instantiations.
    fn piece_poly(&self, theory: &Theory, root: VarId, piece: &Piece) -> UniPoly {
        let nodes = interpolation_nodes(piece, piece.degree + 1 + self.options.extra_nodes, self.options.node_rule);
        self.counters
            .instantiations
            .fetch_add(nodes.len() as u64, Ordering::Relaxed);
        let sample = |a: &Rational| (a.clone(), self.mi(&theory.substitute(root, a)));
        let points: Vec<(Rational, Rational)> = if self.parallel() {
            nodes.par_iter().map(sample).collect()
        } else {
            nodes.iter().map(sample).collect()
        };
        interpolate(&points).expect("interpolation nodes are distinct")
    }

    /// Integrates the cached marginal of everything but the root's unary
    /// clauses over the set those clauses allow. Residual theories that
    /// differ only in bounds on their root share the marginal.
    fn through_marginal(&self, theory: &Theory, root: VarId) -> Rational {
        let (unary, rest): (Vec<Clause>, Vec<Clause>) = theory
            .clauses()
            .iter()
            .cloned()
            .partition(|c| c.vars() == BTreeSet::from([root]));
        let rest = Theory::new(theory.table().clone(), theory.vars().clone(), rest);
        let (lo, hi) = theory.table().domain(root).expect("real root");
        let feasible = unary_feasible_intervals(&unary, root, lo, hi);
        if feasible.is_empty() {
            return Rational::zero();
        }
        if rest.vars().len() == 1 {
            return feasible.iter().map(|(l, h)| h - l).sum();
        }
        let key = (rest, root);
        let cached = self.polys.lock().unwrap().get(&key).cloned();
        let marginal = match cached {
            Some(m) => {
                self.counters.hits.fetch_add(1, Ordering::Relaxed);
                m
            }
            None => {
                self.counters.misses.fetch_add(1, Ordering::Relaxed);
                let (rest, _) = &key;
                let pieces = pe_node_in(rest, root, self.piece_context());
                let polys: Vec<(Piece, UniPoly)> = pieces
                    .pieces()
                    .iter()
                    .map(|p| (p.clone(), self.piece_poly(rest, root, p)))
                    .collect();
                let polys = Arc::new(polys);
                self.polys.lock().unwrap().insert(key.clone(), polys.clone());
                polys
            }
        };
        let mut total = Rational::zero();
        for (piece, poly) in marginal.iter() {
            for (l, h) in &feasible {
                let a = l.max(&piece.lo);
                let b = h.min(&piece.hi);
                if a < b {
                    total += poly.definite_integral(a, b).expect("ordered");
                }
            }
        }
        total
    }

    fn stats(&self) -> SearchStats {
        SearchStats {
            nodes_expanded: self.counters.nodes.load(Ordering::Relaxed),
            instantiations: self.counters.instantiations.load(Ordering::Relaxed),
            cache_hits: self.counters.hits.load(Ordering::Relaxed),
            cache_misses: self.counters.misses.load(Ordering::Relaxed),
            ..SearchStats::default()
        }
    }
}

/// `count` distinct rationals strictly inside the piece.
pub fn interpolation_nodes(piece: &Piece, count: usize, rule: NodeRule) -> Vec<Rational> {
    let width = &piece.hi - &piece.lo;
    let at = |t: Rational| &piece.lo + &width * t;
    match rule {
        NodeRule::EqualSpaced => {
            let denom = Rational::from_integer((count + 1).into());
            (0..count)
                .map(|i| at(Rational::from_integer((i + 1).into()) / &denom))
                .collect()
        }
        NodeRule::Chebyshev => {
            const GRID: i64 = 1 << 20;
            let mut ticks: Vec<i64> = (0..count)
                .map(|i| {
                    let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * count) as f64;
                    let t = (1.0 - theta.cos()) / 2.0;
                    ((t * GRID as f64).round() as i64).clamp(1, GRID - 1)
                })
                .collect();
            ticks.sort_unstable();
            for i in 1..ticks.len() {
                if ticks[i] <= ticks[i - 1] {
                    ticks[i] = ticks[i - 1] + 1;
                }
            }
            assert!(ticks.last().is_none_or(|t| *t < GRID), "too many nodes for the grid");
            ticks
                .into_iter()
                .map(|k| at(Rational::new(k.into(), GRID.into())))
                .collect()
        }
    }
}

fn shape(theory: &Theory, tree: &PseudoTree) -> SearchStats {
    let graph = primal_graph(theory);
    SearchStats {
        n: theory.real_vars().count(),
        m: theory.lra_atom_count(),
        h_p: tree.roots().iter().map(|r| rooted_height(&graph, *r)).max().unwrap_or(0),
        h_t: tree.height(),
        leaves: tree.leaf_count(),
        summands: 1,
        ..SearchStats::default()
    }
}

pub fn pseudo_tree_for(theory: &Theory, strategy: PseudoTreeStrategy, hint: &'static str) -> Result<PseudoTree, EngineError> {
    build_pseudo_tree(&primal_graph(theory), theory.table(), strategy).map_err(|source| EngineError::NotATree { source, hint })
}

/// Model integration of an unweighted, real-only theory along a given
/// pseudo tree, reporting piece enumeration to `observer`.
pub fn smi_with(
    theory: &Theory,
    tree: &PseudoTree,
    options: &SolveOptions,
    observer: Option<&(dyn Fn(&PieceEvent<'_>) + Sync)>,
) -> Solution {
    let search = || Search {
        tree,
        options,
        observer,
        counters: Counters::default(),
        values: Mutex::default(),
        polys: Mutex::default(),
        pieces: Mutex::default(),
    };
    let mut stats = shape(theory, tree);
    let components = primal_graph(theory).components();
    let value = if theory.is_unsat() || components.len() < 2 {
        let s = search();
        let value = s.mi(theory);
        stats.absorb(&s.stats());
        value
    } else {
        // Top-level components share no variables, hence no cache entries.
        let mut value = Rational::one();
        for comp in components {
            let s = search();
            value *= s.mi(&theory.restrict(&comp));
            stats.absorb(&s.stats());
            if value.is_zero() {
                break;
            }
        }
        value
    };
    stats.summands = 1;
    Solution { value, stats }
}

/// Model integration of an unweighted, real-only theory.
pub fn smi(theory: &Theory, options: &SolveOptions) -> Result<Solution, EngineError> {
    let tree = pseudo_tree_for(theory, options.pseudo_tree, "")?;
    in_pool(options, || Ok(smi_with(theory, &tree, options, None)))
}

fn in_pool<T: Send>(options: &SolveOptions, f: impl FnOnce() -> Result<T, EngineError> + Send) -> Result<T, EngineError> {
    if options.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| EngineError::Threads(e.to_string()))?;
        pool.install(f)
    } else {
        f()
    }
}

const SELECTOR_HINT: &str = " (the selector weight encoding can break tree structure; try the expand strategy)";

/// Weighted model integration: reduce, then integrate every summand.
pub fn solve(problem: &Problem, options: &SolveOptions) -> Result<Solution, EngineError> {
    let (summands, _) = full_reduce(problem, options.strategy)?;
    let hint = match options.strategy {
        WeightStrategy::Selector => SELECTOR_HINT,
        WeightStrategy::Expand => "",
    };
    let trees = summands
        .iter()
        .map(|s| pseudo_tree_for(&s.problem.theory, options.pseudo_tree, hint))
        .collect::<Result<Vec<_>, _>>()?;
    in_pool(options, || {
        let mut value = Rational::zero();
        let mut stats = SearchStats::default();
        for (s, tree) in summands.iter().zip(&trees) {
            let part = smi_with(&s.problem.theory, tree, options, None);
            value += &s.coeff * part.value;
            stats.absorb(&part.stats);
        }
        Ok(Solution { value, stats })
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilityResult {
    pub value: Rational,
    pub numerator: Solution,
    pub denominator: Solution,
}

/// `WMI(problem ∧ query) / WMI(problem)`.
pub fn probability(problem: &Problem, query: &[Clause], options: &SolveOptions) -> Result<ProbabilityResult, EngineError> {
    let denominator = solve(problem, options)?;
    if denominator.value.is_zero() {
        return Err(EngineError::ZeroDenominator);
    }
    let conditioned = Problem {
        theory: problem.theory.with_clauses(query.iter().cloned()),
        weights: problem.weights.clone(),
    };
    let numerator = solve(&conditioned, options)?;
    Ok(ProbabilityResult {
        value: &numerator.value / &denominator.value,
        numerator,
        denominator,
    })
}

/// One line per primal-tree node of every summand: `var [lo,hi]:deg ...`.
pub fn dump_pieces(problem: &Problem, options: &SolveOptions) -> Result<String, EngineError> {
    let (summands, _) = full_reduce(problem, options.strategy)?;
    let mut out = String::new();
    for (i, s) in summands.iter().enumerate() {
        let theory = &s.problem.theory;
        let tree = pseudo_tree_for(theory, options.pseudo_tree, SELECTOR_HINT)?;
        if summands.len() > 1 {
            writeln!(out, "# summand {i} coefficient {}", format_compact(&s.coeff)).unwrap();
        }
        let lines = Mutex::new(Vec::new());
        let observe = |e: &PieceEvent<'_>| {
            if let PieceEvent::Node { theory, root, pieces } = e {
                lines.lock().unwrap().push(format!("{} {}", theory.name(*root), pieces));
            }
        };
        for root in tree.roots() {
            let comp = primal_graph(theory)
                .components()
                .into_iter()
                .find(|c| c.contains(root))
                .expect("root belongs to a component");
            let ctx = PieceContext {
                cache: None,
                observer: Some(&observe),
            };
            pe_node_in(&theory.restrict(&comp), *root, ctx);
        }
        for line in lines.into_inner().unwrap() {
            writeln!(out, "{line}").unwrap();
        }
    }
    Ok(out)
}
