//! Piece enumeration: the intervals of a root variable on which the marginal
//! volume of the rest of a tree-shaped theory is a single polynomial, with a
//! bound on that polynomial's degree.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Mutex;

use num_traits::{Signed, Zero};

use crate::exact::{format_compact, midpoint, Rational};
use crate::theory::{
    partition, unary_feasible_intervals, Endpoint, LinearAtom, Literal, Span, SpanSet, Theory, VarId,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Piece {
    pub lo: Rational,
    pub hi: Rational,
    pub degree: usize,
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]:{}", format_compact(&self.lo), format_compact(&self.hi), self.degree)
    }
}

/// Sorted pieces with pairwise disjoint interiors.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct PieceSet {
    pieces: Vec<Piece>,
}

impl PieceSet {
    /// # Panics
    /// If the pieces are unsorted, overlap, or have zero width.
    pub fn new(pieces: Vec<Piece>) -> Self {
        for p in &pieces {
            assert!(p.lo < p.hi, "piece of zero width");
        }
        for w in pieces.windows(2) {
            assert!(w[0].hi <= w[1].lo, "pieces overlap or are unsorted");
        }
        PieceSet { pieces }
    }

    pub fn empty() -> Self {
        PieceSet::default()
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// The piece whose open interior contains `x`.
    pub fn covering(&self, x: &Rational) -> Option<&Piece> {
        let i = self.pieces.partition_point(|p| &p.hi <= x);
        self.pieces.get(i).filter(|p| &p.lo < x)
    }

    fn spans(&self) -> SpanSet<SymbolicBound> {
        SpanSet::union_of(self.pieces.iter().enumerate().map(|(i, p)| {
            Span::closed(
                p.lo.clone(),
                SymbolicBound::constant(p.lo.clone(), Side::Lower, BoundOrigin::ChildPiece(i)),
                p.hi.clone(),
                SymbolicBound::constant(p.hi.clone(), Side::Upper, BoundOrigin::ChildPiece(i)),
            )
        }))
    }
}

impl fmt::Display for PieceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.pieces.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundOrigin {
    Atom(LinearAtom),
    ChildPiece(usize),
}

/// A bound on the child variable that is linear in the root:
/// `x ≤ slope·y + intercept` (upper) or `x ≥ …` (lower).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicBound {
    pub slope: Rational,
    pub intercept: Rational,
    pub side: Side,
    pub origin: BoundOrigin,
}

impl SymbolicBound {
    fn constant(value: Rational, side: Side, origin: BoundOrigin) -> Self {
        SymbolicBound {
            slope: Rational::zero(),
            intercept: value,
            side,
            origin,
        }
    }

    pub fn at(&self, y: &Rational) -> Rational {
        &self.slope * y + &self.intercept
    }

    pub fn depends_on_root(&self) -> bool {
        !self.slope.is_zero()
    }

    fn ray(&self, y: &Rational) -> Span<SymbolicBound> {
        match self.side {
            Side::Upper => Span::at_most(self.at(y), self.clone()),
            Side::Lower => Span::at_least(self.at(y), self.clone()),
        }
    }
}

/// Feasible child-variable intervals at one root value, each endpoint tagged
/// with the bound that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundConfig {
    pub intervals: Vec<Span<SymbolicBound>>,
}

impl BoundConfig {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// The endpoint tags, which stay fixed between consecutive critical points.
    pub fn tags(&self) -> Vec<(SymbolicBound, SymbolicBound)> {
        self.intervals
            .iter()
            .map(|s| {
                let tag = |e: &Option<Endpoint<SymbolicBound>>| e.as_ref().expect("bounded").tag.clone();
                (tag(&s.lo), tag(&s.hi))
            })
            .collect()
    }
}

enum LitBound {
    OnChild(SymbolicBound),
    OnRoot(LinearAtom),
}

/// The clauses of a theory over `{root, child}` read as bounds on `child`.
struct EdgeBounds {
    unsat: bool,
    clauses: Vec<Vec<LitBound>>,
}

impl EdgeBounds {
    fn new(edge: &Theory, root: VarId, child: VarId) -> Self {
        let clauses = edge
            .clauses()
            .iter()
            .map(|c| {
                c.literals()
                    .iter()
                    .map(|lit| {
                        let Literal::Linear(a) = lit else {
                            panic!("piece enumeration needs a real-only theory");
                        };
                        match a.coefficient(child) {
                            None => LitBound::OnRoot(a.clone()),
                            Some(cx) => {
                                let cy = a.coefficient(root).cloned().unwrap_or_else(Rational::zero);
                                debug_assert!(a.terms().len() <= 2);
                                LitBound::OnChild(SymbolicBound {
                                    slope: -&cy / cx,
                                    intercept: -a.constant() / cx,
                                    side: if cx.is_positive() { Side::Upper } else { Side::Lower },
                                    origin: BoundOrigin::Atom(a.clone()),
                                })
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        EdgeBounds {
            unsat: edge.is_unsat(),
            clauses,
        }
    }

    fn config(&self, y: &Rational, child_spans: &SpanSet<SymbolicBound>) -> BoundConfig {
        if self.unsat {
            return BoundConfig { intervals: Vec::new() };
        }
        let mut feasible = child_spans.clone();
        for clause in &self.clauses {
            let mut rays = Vec::new();
            let mut satisfied = false;
            for lit in clause {
                match lit {
                    LitBound::OnRoot(a) => {
                        if a.holds(|_| y.clone()) {
                            satisfied = true;
                            break;
                        }
                    }
                    LitBound::OnChild(b) => rays.push(b.ray(y)),
                }
            }
            if satisfied {
                continue;
            }
            feasible = feasible.intersect(&SpanSet::union_of(rays));
            if feasible.is_empty() {
                break;
            }
        }
        BoundConfig {
            intervals: feasible.spans().to_vec(),
        }
    }
}

/// Child intervals feasible at `root = y`, intersected with the child pieces.
pub fn x_interval_set(edge: &Theory, root: VarId, child: VarId, y: &Rational, child_pieces: &PieceSet) -> BoundConfig {
    EdgeBounds::new(edge, root, child).config(y, &child_pieces.spans())
}

fn root_domain(theory: &Theory, root: VarId) -> (Rational, Rational) {
    let (lo, hi) = theory.table().domain(root).expect("root is a real variable");
    (lo.clone(), hi.clone())
}

/// Root values where two child bounds meet, plus the constants of root-only
/// atoms and the root's domain, restricted to that domain.
pub fn critical_points(edge: &Theory, root: VarId, child: VarId, child_pieces: &PieceSet) -> Vec<Rational> {
    critical_points_of(&EdgeBounds::new(edge, root, child), root_domain(edge, root), child_pieces)
}

fn critical_points_of(bounds: &EdgeBounds, (lo, hi): (Rational, Rational), child_pieces: &PieceSet) -> Vec<Rational> {
    let mut lines: BTreeSet<(Rational, Rational)> = BTreeSet::new();
    let mut points: BTreeSet<Rational> = BTreeSet::new();
    for lit in bounds.clauses.iter().flatten() {
        match lit {
            LitBound::OnChild(b) => {
                lines.insert((b.slope.clone(), b.intercept.clone()));
            }
            LitBound::OnRoot(a) => {
                let (_, c) = &a.terms()[0];
                points.insert(-a.constant() / c);
            }
        }
    }
    for p in child_pieces.pieces() {
        lines.insert((Rational::zero(), p.lo.clone()));
        lines.insert((Rational::zero(), p.hi.clone()));
    }
    let lines: Vec<_> = lines.into_iter().collect();
    for (i, (s1, i1)) in lines.iter().enumerate() {
        for (s2, i2) in &lines[i + 1..] {
            if s1 != s2 {
                points.insert((i2 - i1) / (s1 - s2));
            }
        }
    }
    points.insert(lo.clone());
    points.insert(hi.clone());
    points.into_iter().filter(|p| &lo <= p && p <= &hi).collect()
}

fn config_degree(config: &BoundConfig, child_pieces: &PieceSet) -> usize {
    let fallback = child_pieces.pieces().iter().map(|p| p.degree).max().unwrap_or(0) + 1;
    let endpoint_degree = |e: &Option<Endpoint<SymbolicBound>>| {
        let e = e.as_ref().expect("child pieces are bounded");
        if !e.tag.depends_on_root() {
            return 0;
        }
        child_pieces.covering(&e.value).map_or(fallback, |p| p.degree + 1)
    };
    config
        .intervals
        .iter()
        .map(|s| endpoint_degree(&s.lo).max(endpoint_degree(&s.hi)))
        .max()
        .unwrap_or(0)
}

/// A candidate interval examined during enumeration, reported to observers.
#[derive(Debug)]
pub enum PieceEvent<'a> {
    /// Between consecutive critical points of one edge. `context` is the
    /// edge theory conjoined with the child's subtree.
    Edge {
        edge: &'a Theory,
        context: &'a Theory,
        root: VarId,
        child: VarId,
        child_pieces: &'a PieceSet,
        lo: &'a Rational,
        hi: &'a Rational,
        degree: Option<usize>,
    },
    /// A sub-interval of the overlay of all children at a node.
    Shatter {
        theory: &'a Theory,
        root: VarId,
        lo: &'a Rational,
        hi: &'a Rational,
        degree: Option<usize>,
    },
    /// Final pieces of a node.
    Node {
        theory: &'a Theory,
        root: VarId,
        pieces: &'a PieceSet,
    },
}

pub type PieceCache = Mutex<HashMap<(Theory, VarId), PieceSet>>;

#[derive(Default, Clone, Copy)]
pub struct PieceContext<'a> {
    pub cache: Option<&'a PieceCache>,
    pub observer: Option<&'a (dyn Fn(&PieceEvent<'_>) + Sync)>,
}

impl PieceContext<'_> {
    fn emit(&self, event: PieceEvent<'_>) {
        if let Some(observe) = self.observer {
            observe(&event);
        }
    }
}

/// Pieces of the root for a theory over `{root, child}`, given the child's
/// own pieces.
pub fn pe_edge(edge: &Theory, root: VarId, child: VarId, child_pieces: &PieceSet) -> PieceSet {
    pe_edge_in(edge, edge, root, child, child_pieces, PieceContext::default())
}

fn pe_edge_in(
    edge: &Theory,
    context: &Theory,
    root: VarId,
    child: VarId,
    child_pieces: &PieceSet,
    ctx: PieceContext<'_>,
) -> PieceSet {
    let bounds = EdgeBounds::new(edge, root, child);
    let spans = child_pieces.spans();
    let points = critical_points_of(&bounds, root_domain(edge, root), child_pieces);
    let mut pieces = Vec::new();
    for w in points.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        let config = bounds.config(&midpoint(lo, hi), &spans);
        let degree = (!config.is_empty()).then(|| config_degree(&config, child_pieces));
        ctx.emit(PieceEvent::Edge {
            edge,
            context,
            root,
            child,
            child_pieces,
            lo,
            hi,
            degree,
        });
        if let Some(degree) = degree {
            pieces.push(Piece {
                lo: lo.clone(),
                hi: hi.clone(),
                degree,
            });
        }
    }
    PieceSet::new(pieces)
}

/// Common refinement of per-child pieces inside the root's own feasible set;
/// degrees add because the children's factors multiply.
pub fn shatter(per_child: &[PieceSet], root_feasible: &[(Rational, Rational)]) -> PieceSet {
    shatter_in(per_child, root_feasible, None, PieceContext::default())
}

fn shatter_in(
    per_child: &[PieceSet],
    root_feasible: &[(Rational, Rational)],
    node: Option<(&Theory, VarId)>,
    ctx: PieceContext<'_>,
) -> PieceSet {
    let mut cuts: BTreeSet<&Rational> = root_feasible.iter().flat_map(|(l, h)| [l, h]).collect();
    for set in per_child {
        cuts.extend(set.pieces().iter().flat_map(|p| [&p.lo, &p.hi]));
    }
    let cuts: Vec<&Rational> = cuts.into_iter().collect();
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = midpoint(lo, hi);
        let degree = if root_feasible.iter().any(|(l, h)| l < &mid && &mid < h) {
            per_child
                .iter()
                .map(|set| set.covering(&mid).map(|p| p.degree))
                .sum::<Option<usize>>()
        } else {
            None
        };
        if let Some((theory, root)) = node {
            ctx.emit(PieceEvent::Shatter {
                theory,
                root,
                lo,
                hi,
                degree,
            });
        }
        if let Some(degree) = degree {
            pieces.push(Piece {
                lo: lo.clone(),
                hi: hi.clone(),
                degree,
            });
        }
    }
    PieceSet::new(pieces)
}

/// Pieces of `root` for a theory whose primal graph is a tree containing it.
pub fn pe_node(theory: &Theory, root: VarId) -> PieceSet {
    pe_node_in(theory, root, PieceContext::default())
}

pub fn pe_node_in(theory: &Theory, root: VarId, ctx: PieceContext<'_>) -> PieceSet {
    if let Some(cache) = ctx.cache {
        let key = (theory.clone(), root);
        if let Some(hit) = cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let pieces = enumerate(theory, root, ctx);
        cache.lock().unwrap().insert(key, pieces.clone());
        return pieces;
    }
    enumerate(theory, root, ctx)
}

fn enumerate(theory: &Theory, root: VarId, ctx: PieceContext<'_>) -> PieceSet {
    if theory.is_unsat() {
        return PieceSet::empty();
    }
    let part = partition(theory, root);
    let (lo, hi) = root_domain(theory, root);
    let feasible = unary_feasible_intervals(&part.root_clauses, root, &lo, &hi);
    let mut per_child = Vec::with_capacity(part.children.len());
    for child in &part.children {
        let below = pe_node_in(&child.subtree, child.child, ctx);
        let pieces = if ctx.observer.is_some() {
            let context = child.edge.with_clauses(child.subtree.clauses().iter().cloned());
            let context = Theory::new(
                context.table().clone(),
                child.edge.vars().union(child.subtree.vars()).copied().collect(),
                context.clauses().to_vec(),
            );
            pe_edge_in(&child.edge, &context, root, child.child, &below, ctx)
        } else {
            pe_edge_in(&child.edge, &child.edge, root, child.child, &below, ctx)
        };
        if pieces.is_empty() {
            per_child.clear();
            per_child.push(pieces);
            break;
        }
        per_child.push(pieces);
    }
    let pieces = shatter_in(&per_child, &feasible, Some((theory, root)), ctx);
    ctx.emit(PieceEvent::Node {
        theory,
        root,
        pieces: &pieces,
    });
    pieces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio};
    use crate::theory::parse_problem;

    const THETA_2: &str = "
        (declare-real y -1 1)
        (declare-real x1 -1/2 1/2)
        (declare-real x2 -1/2 1/2)
        (assert (or (<= (+ x1 1) y) (<= y (- x1 1))))
        (assert (or (<= (+ x2 1) y) (<= y (- x2 1))))
    ";

    const GAMMA: &str = "
        (declare-real price 0 3000)
        (declare-real sqft 0 200)
        (assert (or (< price (+ (* 10 sqft) 1000)) (< price (+ (* 20 sqft) 100))))
    ";

    fn piece(lo: Rational, hi: Rational, degree: usize) -> Piece {
        Piece { lo, hi, degree }
    }

    fn set(pieces: Vec<Piece>) -> PieceSet {
        PieceSet::new(pieces)
    }

    fn edge_of(text: &str, root: &str, child: &str) -> (Theory, VarId, VarId, PieceSet) {
        let p = parse_problem(text).unwrap();
        let t = p.theory;
        let r = t.table().lookup(root).unwrap();
        let c = t.table().lookup(child).unwrap();
        let part = partition(&t, r);
        let cp = part.children.iter().find(|cp| cp.child == c).unwrap();
        let below = pe_node(&cp.subtree, c);
        (cp.edge.clone(), r, c, below)
    }

    #[test]
    fn theta_edge_config() {
        let (edge, y, x, below) = edge_of(THETA_2, "y", "x1");
        assert_eq!(below, set(vec![piece(ratio(-1, 2), ratio(1, 2), 0)]));
        let config = x_interval_set(&edge, y, x, &ratio(3, 4), &below);
        assert_eq!(config.intervals.len(), 1);
        let span = &config.intervals[0];
        assert_eq!(span.finite(), Some((&ratio(-1, 2), &ratio(-1, 4))));
        let upper = &span.hi.as_ref().unwrap().tag;
        // x ≤ y - 1
        assert_eq!((upper.slope.clone(), upper.intercept.clone()), (int(1), int(-1)));
        assert!(x_interval_set(&edge, y, x, &int(0), &below).is_empty());
    }

    #[test]
    fn theta_edge_critical_points_and_pieces() {
        let (edge, y, x, below) = edge_of(THETA_2, "y", "x1");
        assert_eq!(critical_points(&edge, y, x, &below), vec![int(-1), ratio(-1, 2), ratio(1, 2), int(1)]);
        assert_eq!(
            pe_edge(&edge, y, x, &below),
            set(vec![piece(int(-1), ratio(-1, 2), 1), piece(ratio(1, 2), int(1), 1)])
        );
    }

    #[test]
    fn gamma_edge() {
        let (edge, sqft, price, below) = edge_of(GAMMA, "sqft", "price");
        assert_eq!(critical_points(&edge, sqft, price, &below), vec![int(0), int(90), int(145), int(200)]);
        assert_eq!(
            pe_edge(&edge, sqft, price, &below),
            // above 145 the price cap 3000 no longer depends on sqft
            set(vec![piece(int(0), int(90), 1), piece(int(90), int(145), 1), piece(int(145), int(200), 0)])
        );
    }

    #[test]
    fn edge_without_coupling_is_verbatim() {
        let (edge, y, x, below) = edge_of("(declare-real y 0 1) (declare-real x 0 2) (assert (or (<= x 1) (<= y 1/2)))", "y", "x");
        let at = x_interval_set(&edge, y, x, &ratio(1, 4), &below);
        assert_eq!(at.intervals.len(), 1);
        assert_eq!(at.intervals[0].finite(), Some((&int(0), &int(2))));
    }

    #[test]
    fn unsat_edge_gives_no_pieces() {
        let (edge, y, x, below) = edge_of("(declare-real y 0 1) (declare-real x 0 1) (assert (<= (+ x 2) y))", "y", "x");
        assert!(pe_edge(&edge, y, x, &below).is_empty());
    }

    #[test]
    fn shatter_examples() {
        let lobes = set(vec![piece(int(-1), ratio(-1, 2), 1), piece(ratio(1, 2), int(1), 1)]);
        let both = shatter(&[lobes.clone(), lobes.clone()], &[(int(-1), int(1))]);
        assert_eq!(both, set(vec![piece(int(-1), ratio(-1, 2), 2), piece(ratio(1, 2), int(1), 2)]));
        assert_eq!(shatter(std::slice::from_ref(&lobes), &[(int(-1), int(1))]), lobes);
        let a = set(vec![piece(int(0), int(1), 1), piece(int(1), int(2), 2)]);
        let b = set(vec![piece(int(0), ratio(3, 2), 0)]);
        assert_eq!(
            shatter(&[a, b], &[(int(0), int(2))]),
            set(vec![piece(int(0), int(1), 1), piece(int(1), ratio(3, 2), 2)])
        );
    }

    #[test]
    fn node_examples() {
        let p = parse_problem(THETA_2).unwrap();
        let y = p.table().lookup("y").unwrap();
        assert_eq!(
            pe_node(&p.theory, y),
            set(vec![piece(int(-1), ratio(-1, 2), 2), piece(ratio(1, 2), int(1), 2)])
        );
        let g = parse_problem(GAMMA).unwrap();
        let sqft = g.table().lookup("sqft").unwrap();
        assert_eq!(pe_node(&g.theory, sqft).len(), 3);
        let single = parse_problem("(declare-real x 0 5/2)").unwrap();
        assert_eq!(pe_node(&single.theory, VarId(0)), set(vec![piece(int(0), ratio(5, 2), 0)]));
    }

    #[test]
    fn constant_endpoints_add_no_degree() {
        // x ∈ [0, 1] regardless of y: the edge factor is constant in y
        let (edge, y, x, below) = edge_of("(declare-real y 0 1) (declare-real x 0 1) (assert (or (<= x 2) (<= y x)))", "y", "x");
        assert_eq!(pe_edge(&edge, y, x, &below), set(vec![piece(int(0), int(1), 0)]));
    }

    #[test]
    fn observer_sees_dropped_candidates() {
        let p = parse_problem(THETA_2).unwrap();
        let y = p.table().lookup("y").unwrap();
        let dropped = Mutex::new(0);
        let observe = |e: &PieceEvent<'_>| {
            if let PieceEvent::Edge { degree: None, .. } = e {
                *dropped.lock().unwrap() += 1;
            }
        };
        let ctx = PieceContext {
            cache: None,
            observer: Some(&observe),
        };
        pe_node_in(&p.theory, y, ctx);
        assert_eq!(*dropped.lock().unwrap(), 2);
    }
}
