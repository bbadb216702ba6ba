//! Rooted trees, tree functions and tree homomorphism densities.
//!
//! Trees are stored in canonical form (children sorted), so structural
//! equality is rooted-tree isomorphism. Free trees are represented by their
//! centroid rooting. The text form is balanced parentheses: a leaf is `()`
//! and a node wraps the concatenation of its children, e.g. `(())` is a
//! single edge rooted at one end.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{apply_operator, FiniteGraph, Ratio, StepKernel};
use crate::signatures::IdmSignature;

/// Default cap on the number of trees an enumeration may produce.
pub const DEFAULT_TREE_BUDGET: usize = 250_000;

/// Largest pattern tree accepted by [`hom_count_oracle`].
pub const ORACLE_MAX_PATTERN: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RootedTree {
    children: Vec<RootedTree>,
    height: usize,
    size: usize,
}

impl RootedTree {
    pub fn leaf() -> Self {
        RootedTree {
            children: Vec::new(),
            height: 0,
            size: 1,
        }
    }

    pub fn from_children(mut children: Vec<RootedTree>) -> Self {
        children.sort();
        let height = children.iter().map(|c| c.height + 1).max().unwrap_or(0);
        let size = 1 + children.iter().map(|c| c.size).sum::<usize>();
        RootedTree {
            children,
            height,
            size,
        }
    }

    /// A path with `edges` edges rooted at one end.
    pub fn rooted_path(edges: usize) -> Self {
        (0..edges).fold(RootedTree::leaf(), |t, _| RootedTree::from_children(vec![t]))
    }

    /// A star with `leaves` leaves rooted at its center.
    pub fn rooted_star(leaves: usize) -> Self {
        RootedTree::from_children(vec![RootedTree::leaf(); leaves])
    }

    pub fn children(&self) -> &[RootedTree] {
        &self.children
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn edge_count(&self) -> usize {
        self.size - 1
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn to_parens(&self) -> String {
        let mut out = String::with_capacity(2 * self.size);
        self.write_parens(&mut out);
        out
    }

    fn write_parens(&self, out: &mut String) {
        out.push('(');
        for child in &self.children {
            child.write_parens(out);
        }
        out.push(')');
    }

    /// The underlying graph with vertices in preorder; the root is vertex 0.
    pub fn to_graph(&self) -> FiniteGraph {
        let mut edges = Vec::with_capacity(self.size - 1);
        let mut next = 1;
        self.collect_edges(0, &mut next, &mut edges);
        FiniteGraph::new(self.size, edges).expect("tree edges are valid")
    }

    fn collect_edges(&self, me: usize, next: &mut usize, edges: &mut Vec<(usize, usize)>) {
        for child in &self.children {
            let id = *next;
            *next += 1;
            edges.push((me, id));
            child.collect_edges(id, next, edges);
        }
    }

    /// Canonical rooted tree of `graph` rooted at `root`.
    pub fn from_graph(graph: &FiniteGraph, root: usize) -> Result<Self> {
        if !graph.is_tree() {
            return Err(Error::NotATree);
        }
        if root >= graph.vertex_count() {
            return Err(Error::VertexOutOfRange {
                vertex: root,
                n: graph.vertex_count(),
            });
        }
        Ok(Self::rooted_at(&graph.neighbors(), root, usize::MAX))
    }

    fn rooted_at(neighbors: &[Vec<usize>], vertex: usize, parent: usize) -> Self {
        RootedTree::from_children(
            neighbors[vertex]
                .iter()
                .filter(|&&v| v != parent)
                .map(|&v| Self::rooted_at(neighbors, v, vertex))
                .collect(),
        )
    }

    /// The tree rooted at each of its vertices, in preorder of `self`.
    pub fn rerootings(&self) -> Vec<RootedTree> {
        let graph = self.to_graph();
        let neighbors = graph.neighbors();
        (0..self.size)
            .map(|v| Self::rooted_at(&neighbors, v, usize::MAX))
            .collect()
    }

    /// Vertices (preorder numbering) whose removal leaves components of size
    /// at most half the tree.
    pub fn centroids(&self) -> Vec<usize> {
        let graph = self.to_graph();
        let neighbors = graph.neighbors();
        let n = self.size;
        // Preorder numbering puts every parent before its children.
        let mut parent = vec![usize::MAX; n];
        for (u, vs) in neighbors.iter().enumerate() {
            for &v in vs {
                if v > u {
                    parent[v] = u;
                }
            }
        }
        let mut subtree = vec![1usize; n];
        for v in (1..n).rev() {
            subtree[parent[v]] += subtree[v];
        }
        (0..n)
            .filter(|&v| {
                let below = neighbors[v]
                    .iter()
                    .filter(|&&c| c > v)
                    .map(|&c| subtree[c])
                    .max()
                    .unwrap_or(0);
                let above = n - subtree[v];
                2 * below.max(above) <= n
            })
            .collect()
    }

    /// The canonical representative of this tree's free isomorphism class:
    /// rooted at a centroid, the smaller rooting when there are two.
    pub fn free_canonical(&self) -> RootedTree {
        let graph = self.to_graph();
        let neighbors = graph.neighbors();
        self.centroids()
            .into_iter()
            .map(|c| Self::rooted_at(&neighbors, c, usize::MAX))
            .min()
            .expect("every tree has a centroid")
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_parens())
    }
}

impl FromStr for RootedTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes: Vec<u8> = s.bytes().filter(|b| !b.is_ascii_whitespace()).collect();
        let mut stack: Vec<Vec<RootedTree>> = Vec::new();
        let mut done: Option<RootedTree> = None;
        for (pos, b) in bytes.iter().enumerate() {
            if done.is_some() {
                return Err(Error::Parse(format!("trailing input at position {pos} in tree {s:?}")));
            }
            match b {
                b'(' => stack.push(Vec::new()),
                b')' => {
                    let children = stack
                        .pop()
                        .ok_or_else(|| Error::Parse(format!("unbalanced ')' in tree {s:?}")))?;
                    let node = RootedTree::from_children(children);
                    match stack.last_mut() {
                        Some(parent) => parent.push(node),
                        None => done = Some(node),
                    }
                }
                other => {
                    return Err(Error::Parse(format!(
                        "unexpected character {:?} in tree {s:?}",
                        *other as char
                    )))
                }
            }
        }
        done.ok_or_else(|| Error::Parse(format!("incomplete tree {s:?}")))
    }
}

/// All rooted trees with at most `max_vertices` vertices, one per
/// isomorphism class, ordered by size then canonical order.
pub fn enumerate_rooted_trees(max_vertices: usize) -> Result<Vec<RootedTree>> {
    enumerate_rooted_trees_with_budget(max_vertices, DEFAULT_TREE_BUDGET)
}

pub fn enumerate_rooted_trees_with_budget(max_vertices: usize, budget: usize) -> Result<Vec<RootedTree>> {
    if max_vertices == 0 {
        return Err(Error::InvalidArgument("trees need at least one vertex".into()));
    }
    let mut all: Vec<RootedTree> = Vec::new();
    for size in 1..=max_vertices {
        let mut of_size = Vec::new();
        let mut forest = Vec::new();
        forests(&all, size - 1, 0, &mut forest, &mut of_size, budget.saturating_sub(all.len()))
            .map_err(|_| Error::BudgetExceeded { limit: budget })?;
        of_size.sort();
        all.extend(of_size);
    }
    Ok(all)
}

/// Pushes every tree whose root children form a multiset of trees from
/// `pool[start..]` with sizes summing to `remaining`.
fn forests(
    pool: &[RootedTree],
    remaining: usize,
    start: usize,
    forest: &mut Vec<usize>,
    out: &mut Vec<RootedTree>,
    budget: usize,
) -> Result<()> {
    if remaining == 0 {
        if out.len() >= budget {
            return Err(Error::BudgetExceeded {
                limit: budget,
            });
        }
        out.push(RootedTree::from_children(
            forest.iter().map(|&i| pool[i].clone()).collect(),
        ));
        return Ok(());
    }
    for index in start..pool.len() {
        let size = pool[index].size;
        if size > remaining {
            // Pool is sorted by size.
            break;
        }
        forest.push(index);
        forests(pool, remaining - size, index, forest, out, budget)?;
        forest.pop();
    }
    Ok(())
}

/// One centroid-rooted representative per free tree with at most
/// `max_vertices` vertices, ordered by size then canonical order.
pub fn enumerate_free_trees(max_vertices: usize) -> Result<Vec<RootedTree>> {
    enumerate_free_trees_with_budget(max_vertices, DEFAULT_TREE_BUDGET)
}

pub fn enumerate_free_trees_with_budget(max_vertices: usize, budget: usize) -> Result<Vec<RootedTree>> {
    let free: Vec<RootedTree> = enumerate_rooted_trees_with_budget(max_vertices, budget)?
        .into_iter()
        .filter(|t| *t == t.free_canonical())
        .collect();
    Ok(free)
}

/// `f^W_T` per class: the all-ones vector for a leaf, otherwise the product
/// over root children `c` of `T_W f^W_c`.
pub fn tree_function(kernel: &StepKernel, tree: &RootedTree) -> Vec<Ratio> {
    let k = kernel.class_count();
    let mut acc = vec![Ratio::one(); k];
    let mut cached: Option<(&RootedTree, Vec<Ratio>)> = None;
    for child in &tree.children {
        let factor = match &cached {
            Some((previous, factor)) if *previous == child => factor.clone(),
            _ => {
                let inner = tree_function(kernel, child);
                let factor = apply_operator(kernel, &inner).expect("vector sized for kernel");
                cached = Some((child, factor.clone()));
                factor
            }
        };
        for (a, f) in acc.iter_mut().zip(factor) {
            *a *= f;
        }
    }
    acc
}

/// `t(T, W) = Σ_i μ(i)·f^W_T(i)` for a graphon `W`.
pub fn tree_density(kernel: &StepKernel, tree: &RootedTree) -> Result<Ratio> {
    if !kernel.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    Ok(tree_function(kernel, tree)
        .iter()
        .zip(kernel.masses())
        .map(|(f, m)| f * m)
        .sum())
}

/// `|Hom(T, G)| / |V(G)|^{|V(T)|}` by enumerating every vertex map.
pub fn hom_count_oracle(pattern: &FiniteGraph, host: &FiniteGraph) -> Result<Ratio> {
    if !pattern.is_tree() {
        return Err(Error::NotATree);
    }
    let t = pattern.vertex_count();
    if t > ORACLE_MAX_PATTERN {
        return Err(Error::TooLarge(format!(
            "pattern has {t} vertices, oracle limit is {ORACLE_MAX_PATTERN}"
        )));
    }
    let n = host.vertex_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let adjacency = host.adjacency();
    let edges: Vec<(usize, usize)> = pattern.edges().collect();
    let mut map = vec![0usize; t];
    let mut count: u64 = 0;
    loop {
        if edges.iter().all(|&(a, b)| adjacency[map[a]][map[b]]) {
            count += 1;
        }
        let mut position = 0;
        loop {
            if position == t {
                let total = BigInt::from(n).pow(t as u32);
                return Ok(Ratio::new(BigInt::from(count), total));
            }
            map[position] += 1;
            if map[position] < n {
                break;
            }
            map[position] = 0;
            position += 1;
        }
    }
}

/// Free tree lists shared by repeated witness searches.
fn cached_free_trees(max_vertices: usize) -> Result<Arc<Vec<RootedTree>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<RootedTree>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(trees) = cache.lock().expect("tree cache poisoned").get(&max_vertices) {
        return Ok(Arc::clone(trees));
    }
    let trees = Arc::new(enumerate_free_trees(max_vertices)?);
    cache
        .lock()
        .expect("tree cache poisoned")
        .insert(max_vertices, Arc::clone(&trees));
    Ok(trees)
}

/// Scans free trees by size and returns the first whose densities in `w` and
/// `u` differ. `None` only means no witness exists up to `max_vertices`.
pub fn find_witness_tree(w: &StepKernel, u: &StepKernel, max_vertices: usize) -> Result<Option<RootedTree>> {
    if !w.is_symmetric() || !u.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    for tree in cached_free_trees(max_vertices)?.iter() {
        if tree_density(w, tree)? != tree_density(u, tree)? {
            return Ok(Some(tree.clone()));
        }
    }
    Ok(None)
}

/// Expressions generating the tree-function algebra on signatures.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TreeCombinator {
    /// The constant one.
    Unit,
    /// `F(f, n)`: integrate `f` (factoring through level `n`) against the
    /// level `n + 1` measure of the point.
    Extend(Box<TreeCombinator>, usize),
    /// `G(f_1, …, f_k)`: pointwise product.
    Glue(Vec<TreeCombinator>),
}

impl TreeCombinator {
    pub fn extend(inner: TreeCombinator, level: usize) -> Self {
        TreeCombinator::Extend(Box::new(inner), level)
    }

    /// Least level the expression factors through.
    pub fn factor_level(&self) -> usize {
        match self {
            TreeCombinator::Unit => 0,
            TreeCombinator::Extend(_, level) => level + 1,
            TreeCombinator::Glue(parts) => parts.iter().map(Self::factor_level).max().unwrap_or(0),
        }
    }

    /// Checks that every `Extend` level admits its argument.
    pub fn validate(&self) -> Result<()> {
        match self {
            TreeCombinator::Unit => Ok(()),
            TreeCombinator::Extend(inner, level) => {
                inner.validate()?;
                if inner.factor_level() > *level {
                    return Err(Error::MalformedExpression(format!(
                        "argument factors through level {} but F is applied at level {level}",
                        inner.factor_level()
                    )));
                }
                Ok(())
            }
            TreeCombinator::Glue(parts) => parts.iter().try_for_each(Self::validate),
        }
    }

    /// Evaluates the expression at a point represented by its signature.
    pub fn evaluate(&self, signature: &IdmSignature) -> Result<Ratio> {
        self.validate()?;
        if signature.level() < self.factor_level() {
            return Err(Error::InvalidArgument(format!(
                "expression needs a level {} signature, got level {}",
                self.factor_level(),
                signature.level()
            )));
        }
        Ok(self.evaluate_unchecked(signature))
    }

    fn evaluate_unchecked(&self, signature: &IdmSignature) -> Ratio {
        match self {
            TreeCombinator::Unit => Ratio::one(),
            TreeCombinator::Extend(inner, level) => {
                let marginal = signature.project(level + 1).expect("level checked");
                marginal
                    .parts()
                    .into_iter()
                    .map(|(cell, mass)| mass * inner.evaluate_unchecked(&cell))
                    .fold(Ratio::zero(), |acc, x| acc + x)
            }
            TreeCombinator::Glue(parts) => parts
                .iter()
                .map(|p| p.evaluate_unchecked(signature))
                .fold(Ratio::one(), |acc, x| acc * x),
        }
    }
}

/// The rooted tree whose tree function the expression computes: `Unit` is a
/// leaf, `Extend` adds a new root above the old one, and `Glue` merges roots.
pub fn combinator_to_tree(expression: &TreeCombinator) -> Result<RootedTree> {
    expression.validate()?;
    Ok(to_tree_unchecked(expression))
}

fn to_tree_unchecked(expression: &TreeCombinator) -> RootedTree {
    match expression {
        TreeCombinator::Unit => RootedTree::leaf(),
        TreeCombinator::Extend(inner, _) => RootedTree::from_children(vec![to_tree_unchecked(inner)]),
        TreeCombinator::Glue(parts) => RootedTree::from_children(
            parts
                .iter()
                .flat_map(|p| to_tree_unchecked(p).children)
                .collect(),
        ),
    }
}
