use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Theory, VarId, VarTable};

/// Variables as vertices, an edge between every two variables sharing a clause.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrimalGraph {
    adjacency: BTreeMap<VarId, BTreeSet<VarId>>,
}

pub fn primal_graph(theory: &Theory) -> PrimalGraph {
    let mut adjacency: BTreeMap<VarId, BTreeSet<VarId>> =
        theory.vars().iter().map(|v| (*v, BTreeSet::new())).collect();
    for clause in theory.clauses() {
        let vars: Vec<VarId> = clause.vars().into_iter().collect();
        for (i, a) in vars.iter().enumerate() {
            adjacency.entry(*a).or_default();
            for b in &vars[i + 1..] {
                adjacency.entry(*a).or_default().insert(*b);
                adjacency.entry(*b).or_default().insert(*a);
            }
        }
    }
    PrimalGraph { adjacency }
}

impl PrimalGraph {
    pub fn from_edges(vertices: impl IntoIterator<Item = VarId>, edges: &[(VarId, VarId)]) -> Self {
        let mut adjacency: BTreeMap<VarId, BTreeSet<VarId>> =
            vertices.into_iter().map(|v| (v, BTreeSet::new())).collect();
        for (a, b) in edges {
            if a != b {
                adjacency.entry(*a).or_default().insert(*b);
                adjacency.entry(*b).or_default().insert(*a);
            }
        }
        PrimalGraph { adjacency }
    }

    pub fn vertices(&self) -> impl Iterator<Item = VarId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: VarId) -> impl Iterator<Item = VarId> + '_ {
        self.adjacency.get(&v).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.adjacency.get(&a).is_some_and(|n| n.contains(&b))
    }

    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        self.adjacency
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (*a, *b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<BTreeSet<VarId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for start in self.vertices() {
            if seen.contains(&start) {
                continue;
            }
            let mut component = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(v) = queue.pop_front() {
                component.insert(v);
                for n in self.neighbors(v) {
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            out.push(component);
        }
        out
    }

    /// Some cycle as a vertex sequence, if the graph has one.
    pub fn find_cycle(&self) -> Option<Vec<VarId>> {
        let mut parent: BTreeMap<VarId, Option<VarId>> = BTreeMap::new();
        for start in self.vertices() {
            if parent.contains_key(&start) {
                continue;
            }
            parent.insert(start, None);
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for n in self.neighbors(v) {
                    if parent[&v] == Some(n) {
                        continue;
                    }
                    if parent.contains_key(&n) {
                        return Some(cycle_through(&parent, v, n));
                    }
                    parent.insert(n, Some(v));
                    stack.push(n);
                }
            }
        }
        None
    }

    /// Vertices of the subtree below `child` when the tree is rooted so
    /// that `parent` is above it.
    pub fn subtree(&self, child: VarId, parent: VarId) -> BTreeSet<VarId> {
        let mut out = BTreeSet::from([child]);
        let mut stack = vec![child];
        while let Some(v) = stack.pop() {
            for n in self.neighbors(v) {
                if n != parent && out.insert(n) {
                    stack.push(n);
                }
            }
        }
        out
    }

    fn eccentricity(&self, v: VarId) -> usize {
        let mut dist = BTreeMap::from([(v, 0usize)]);
        let mut queue = VecDeque::from([v]);
        let mut far = 0;
        while let Some(u) = queue.pop_front() {
            let d = dist[&u];
            far = far.max(d);
            for n in self.neighbors(u) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(n) {
                    e.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
        far
    }
}

fn cycle_through(parent: &BTreeMap<VarId, Option<VarId>>, a: VarId, b: VarId) -> Vec<VarId> {
    let path_to_root = |mut v: VarId| {
        let mut path = vec![v];
        while let Some(Some(p)) = parent.get(&v) {
            path.push(*p);
            v = *p;
        }
        path
    };
    let pa = path_to_root(a);
    let pb = path_to_root(b);
    let common = pa.iter().find(|v| pb.contains(v)).copied().expect("same component");
    let mut cycle: Vec<VarId> = pa.iter().take_while(|v| **v != common).copied().collect();
    cycle.push(common);
    let back: Vec<VarId> = pb.iter().take_while(|v| **v != common).copied().collect();
    cycle.extend(back.into_iter().rev());
    cycle
}

/// True iff every connected component is acyclic.
pub fn is_tree(graph: &PrimalGraph) -> bool {
    graph.find_cycle().is_none()
}

/// Height of the component containing `root` when rooted there.
pub fn rooted_height(graph: &PrimalGraph, root: VarId) -> usize {
    graph.eccentricity(root)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PseudoTreeStrategy {
    /// The primal tree itself, rooted at a vertex of minimum height.
    #[default]
    Rooted,
    /// Centroid decomposition of the primal tree.
    Balanced,
}

/// Rooted forest over the primal graph's vertices in which every primal
/// edge joins a vertex to one of its ancestors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoTree {
    roots: Vec<VarId>,
    parent: BTreeMap<VarId, Option<VarId>>,
    children: BTreeMap<VarId, Vec<VarId>>,
    depth: BTreeMap<VarId, usize>,
}

impl PseudoTree {
    fn from_parents(roots: Vec<VarId>, parent: BTreeMap<VarId, Option<VarId>>) -> Self {
        let mut children: BTreeMap<VarId, Vec<VarId>> = parent.keys().map(|v| (*v, Vec::new())).collect();
        for (v, p) in &parent {
            if let Some(p) = p {
                children.entry(*p).or_default().push(*v);
            }
        }
        let mut depth = BTreeMap::new();
        let mut queue: VecDeque<(VarId, usize)> = roots.iter().map(|r| (*r, 0)).collect();
        while let Some((v, d)) = queue.pop_front() {
            depth.insert(v, d);
            for c in &children[&v] {
                queue.push_back((*c, d + 1));
            }
        }
        PseudoTree {
            roots,
            parent,
            children,
            depth,
        }
    }

    pub fn roots(&self) -> &[VarId] {
        &self.roots
    }

    pub fn parent(&self, v: VarId) -> Option<VarId> {
        self.parent.get(&v).copied().flatten()
    }

    pub fn children(&self, v: VarId) -> &[VarId] {
        self.children.get(&v).map_or(&[], Vec::as_slice)
    }

    pub fn depth(&self, v: VarId) -> Option<usize> {
        self.depth.get(&v).copied()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VarId> + '_ {
        self.parent.keys().copied()
    }

    /// Longest root-to-leaf edge count over all trees of the forest.
    pub fn height(&self) -> usize {
        self.depth.values().copied().max().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.children.values().filter(|c| c.is_empty()).count()
    }

    pub fn is_ancestor(&self, ancestor: VarId, mut v: VarId) -> bool {
        while let Some(p) = self.parent(v) {
            if p == ancestor {
                return true;
            }
            v = p;
        }
        false
    }

    /// Checks that every graph edge joins a vertex to one of its ancestors.
    pub fn satisfies_ancestor_condition(&self, graph: &PrimalGraph) -> bool {
        graph
            .vertices()
            .all(|v| self.parent.contains_key(&v))
            && graph
                .edges()
                .into_iter()
                .all(|(a, b)| self.is_ancestor(a, b) || self.is_ancestor(b, a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("primal graph is not a tree; cycle through {}", cycle.join(" - "))]
pub struct NotATree {
    pub cycle: Vec<String>,
}

/// Builds a pseudo tree (one tree per connected component). Ties are broken
/// by variable name.
pub fn build_pseudo_tree(
    graph: &PrimalGraph,
    table: &VarTable,
    strategy: PseudoTreeStrategy,
) -> Result<PseudoTree, NotATree> {
    if let Some(cycle) = graph.find_cycle() {
        return Err(NotATree {
            cycle: cycle.iter().map(|v| table.name(*v).to_string()).collect(),
        });
    }
    let by_name = |vs: &mut Vec<VarId>| vs.sort_by(|a, b| table.name(*a).cmp(table.name(*b)));
    let mut roots = Vec::new();
    let mut parent = BTreeMap::new();
    for component in graph.components() {
        match strategy {
            PseudoTreeStrategy::Rooted => {
                let mut candidates: Vec<VarId> = component.iter().copied().collect();
                by_name(&mut candidates);
                let root = candidates
                    .iter()
                    .copied()
                    .min_by_key(|v| graph.eccentricity(*v))
                    .expect("nonempty component");
                roots.push(root);
                parent.insert(root, None);
                let mut stack = vec![root];
                while let Some(v) = stack.pop() {
                    for n in graph.neighbors(v) {
                        if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(n) {
                            e.insert(Some(v));
                            stack.push(n);
                        }
                    }
                }
            }
            PseudoTreeStrategy::Balanced => {
                let root = centroid_split(graph, table, component, None, &mut parent);
                roots.push(root);
            }
        }
    }
    by_name(&mut roots);
    Ok(PseudoTree::from_parents(roots, parent))
}

/// Picks the centroid of `part` (a subtree of the primal tree), hangs it
/// under `above`, and recurses into the pieces left after removing it.
fn centroid_split(
    graph: &PrimalGraph,
    table: &VarTable,
    part: BTreeSet<VarId>,
    above: Option<VarId>,
    parent: &mut BTreeMap<VarId, Option<VarId>>,
) -> VarId {
    let largest_piece = |v: VarId| {
        graph
            .neighbors(v)
            .filter(|n| part.contains(n))
            .map(|n| graph.subtree(n, v).intersection(&part).count())
            .max()
            .unwrap_or(0)
    };
    let mut candidates: Vec<VarId> = part.iter().copied().collect();
    candidates.sort_by(|a, b| table.name(*a).cmp(table.name(*b)));
    let centroid = candidates
        .into_iter()
        .min_by_key(|v| largest_piece(*v))
        .expect("nonempty part");
    parent.insert(centroid, above);
    let neighbors: Vec<VarId> = graph.neighbors(centroid).filter(|n| part.contains(n)).collect();
    for n in neighbors {
        let piece: BTreeSet<VarId> = graph.subtree(n, centroid).intersection(&part).copied().collect();
        centroid_split(graph, table, piece, Some(centroid), parent);
    }
    centroid
}
