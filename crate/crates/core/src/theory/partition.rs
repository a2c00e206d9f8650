use std::collections::BTreeSet;

use super::{primal_graph, Clause, Theory, VarId};

/// The clauses shared by the root and one child, and those strictly inside
/// that child's subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildPart {
    pub child: VarId,
    /// Clauses over `{root}` or `{root, child}`; root-only clauses are
    /// replicated into every child.
    pub edge: Theory,
    /// Clauses over variables of the child's subtree.
    pub subtree: Theory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub root: VarId,
    pub root_clauses: Vec<Clause>,
    /// Ordered by child name.
    pub children: Vec<ChildPart>,
}

/// Splits a theory whose primal graph is a tree rooted at `root`.
///
/// # Panics
/// If a clause spans two child subtrees, which a tree primal graph rules out.
pub fn partition(theory: &Theory, root: VarId) -> Partition {
    let graph = primal_graph(theory);
    let mut children: Vec<VarId> = graph.neighbors(root).collect();
    children.sort_by(|a, b| theory.name(*a).cmp(theory.name(*b)));
    let subtrees: Vec<BTreeSet<VarId>> = children.iter().map(|c| graph.subtree(*c, root)).collect();

    let mut root_clauses = Vec::new();
    let mut edge_clauses: Vec<Vec<Clause>> = vec![Vec::new(); children.len()];
    let mut inner_clauses: Vec<Vec<Clause>> = vec![Vec::new(); children.len()];
    for clause in theory.clauses() {
        let vars = clause.vars();
        if vars.len() == 1 && vars.contains(&root) {
            root_clauses.push(clause.clone());
            continue;
        }
        let owner = subtrees
            .iter()
            .position(|s| vars.iter().any(|v| s.contains(v)))
            .unwrap_or_else(|| panic!("clause outside the tree rooted at {}", theory.name(root)));
        if vars.contains(&root) {
            assert!(
                vars.len() == 2 && vars.contains(&children[owner]),
                "clause spans more than one edge at {}",
                theory.name(root)
            );
            edge_clauses[owner].push(clause.clone());
        } else {
            assert!(vars.is_subset(&subtrees[owner]), "clause spans two child subtrees");
            inner_clauses[owner].push(clause.clone());
        }
    }

    let table = theory.table().clone();
    let children = children
        .into_iter()
        .zip(subtrees)
        .zip(edge_clauses.into_iter().zip(inner_clauses))
        .map(|((child, subtree_vars), (edge, inner))| {
            let mut edge_all = root_clauses.clone();
            edge_all.extend(edge);
            ChildPart {
                child,
                edge: Theory::new(table.clone(), [root, child].into(), edge_all),
                subtree: Theory::new(table.clone(), subtree_vars, inner),
            }
        })
        .collect();
    Partition {
        root,
        root_clauses,
        children,
    }
}
