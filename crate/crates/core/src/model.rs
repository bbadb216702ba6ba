//! Exact scalars, step kernels, finite graphs and colorings of kernel classes.
//!
//! A [`StepKernel`] is a kernel that is constant on the blocks of a finite
//! partition of a probability space: `masses[i]` is the measure of class `i`
//! and `values[i][j]` the kernel value on block `(i, j)`. Symmetric step
//! kernels are step graphons.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational scalar, always kept in lowest terms with a positive denominator.
pub type Ratio = num_rational::BigRational;

/// `numer / denom` as a [`Ratio`]. Panics if `denom == 0`.
pub fn ratio(numer: i64, denom: i64) -> Ratio {
    Ratio::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Ratio {
    Ratio::from_integer(BigInt::from(value))
}

/// Lossy conversion for reporting and float-mode utilities.
pub fn to_f64(value: &Ratio) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Unvalidated kernel description, as parsed from a file or built in code.
#[derive(Debug, Clone, PartialEq)]
pub struct RawKernel {
    pub masses: Vec<Ratio>,
    pub values: Vec<Vec<Ratio>>,
    pub symmetric: bool,
}

/// A validated step kernel.
///
/// Every mass is positive, masses sum to one, every value lies in `[0, 1]`,
/// and `symmetric` is true exactly when the value matrix equals its transpose.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepKernel {
    masses: Vec<Ratio>,
    values: Vec<Vec<Ratio>>,
    symmetric: bool,
    /// `W(i,j)·μ(j)`, the entries every degree and operator sum uses.
    weighted: Vec<Vec<Ratio>>,
}

fn assemble(masses: Vec<Ratio>, values: Vec<Vec<Ratio>>, symmetric: bool) -> StepKernel {
    let weighted = values
        .iter()
        .map(|row| row.iter().zip(&masses).map(|(w, m)| w * m).collect())
        .collect();
    StepKernel {
        masses,
        values,
        symmetric,
        weighted,
    }
}

/// Validates a raw kernel description.
///
/// A kernel declared asymmetric whose matrix happens to be symmetric is
/// normalized to `symmetric = true`.
pub fn validate_kernel(raw: RawKernel) -> Result<StepKernel> {
    let RawKernel {
        masses,
        values,
        symmetric,
    } = raw;
    let k = masses.len();
    if values.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: values.len(),
        });
    }
    for row in &values {
        if row.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: row.len(),
            });
        }
    }
    for (class, mass) in masses.iter().enumerate() {
        if !mass.is_positive() {
            return Err(Error::NonPositiveMass {
                class,
                mass: mass.to_string(),
            });
        }
    }
    let sum: Ratio = masses.iter().sum();
    if !sum.is_one() {
        return Err(Error::MassesNotOne {
            sum: sum.to_string(),
        });
    }
    let unit = Ratio::one();
    for (row, entries) in values.iter().enumerate() {
        for (col, value) in entries.iter().enumerate() {
            if value.is_negative() || *value > unit {
                return Err(Error::ValueOutOfRange {
                    row,
                    col,
                    value: value.to_string(),
                });
            }
        }
    }
    let asymmetry = first_asymmetry(&values);
    if symmetric {
        if let Some((row, col)) = asymmetry {
            return Err(Error::AsymmetricDeclaredSymmetric { row, col });
        }
    }
    Ok(assemble(masses, values, asymmetry.is_none()))
}

fn first_asymmetry(values: &[Vec<Ratio>]) -> Option<(usize, usize)> {
    let k = values.len();
    (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .find(|&(i, j)| values[i][j] != values[j][i])
}

impl StepKernel {
    pub fn new(masses: Vec<Ratio>, values: Vec<Vec<Ratio>>, symmetric: bool) -> Result<Self> {
        validate_kernel(RawKernel {
            masses,
            values,
            symmetric,
        })
    }

    /// The constant kernel `q` on `k` classes of equal mass.
    pub fn constant(q: Ratio, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("a kernel needs at least one class".into()));
        }
        let mass = Ratio::new(BigInt::one(), BigInt::from(k));
        Self::new(vec![mass; k], vec![vec![q; k]; k], true)
    }

    pub fn class_count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[Ratio] {
        &self.masses
    }

    pub fn values(&self) -> &[Vec<Ratio>] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> &Ratio {
        &self.values[i][j]
    }

    pub fn mass(&self, i: usize) -> &Ratio {
        &self.masses[i]
    }

    /// `W(i,j)·μ(j)`.
    pub fn weighted(&self, i: usize, j: usize) -> &Ratio {
        &self.weighted[i][j]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn to_raw(&self) -> RawKernel {
        RawKernel {
            masses: self.masses.clone(),
            values: self.values.clone(),
            symmetric: self.symmetric,
        }
    }

    /// The transposed kernel on the same classes.
    pub fn transpose(&self) -> StepKernel {
        let k = self.class_count();
        let values = (0..k)
            .map(|i| (0..k).map(|j| self.values[j][i].clone()).collect())
            .collect();
        assemble(self.masses.clone(), values, self.symmetric)
    }

    /// Relabels classes: class `i` of the result is class `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<StepKernel> {
        let k = self.class_count();
        if order.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: order.len(),
            });
        }
        let seen: BTreeSet<usize> = order.iter().copied().collect();
        if seen.len() != k || seen.iter().any(|&c| c >= k) {
            return Err(Error::InvalidArgument("order is not a permutation".into()));
        }
        let masses = order.iter().map(|&i| self.masses[i].clone()).collect();
        let values = order
            .iter()
            .map(|&i| order.iter().map(|&j| self.values[i][j].clone()).collect())
            .collect();
        Ok(assemble(masses, values, self.symmetric))
    }

    /// Degree of class `i` toward the set `cell`: `Σ_{j ∈ cell} W(i,j)·μ(j)`.
    pub fn degree_toward<'a>(&self, i: usize, cell: impl IntoIterator<Item = &'a usize>) -> Ratio {
        let row = &self.weighted[i];
        let mut total = Ratio::zero();
        for &j in cell {
            total += &row[j];
        }
        total
    }
}

/// `T_W f`: `(T_W f)(i) = Σ_j W(i,j)·μ(j)·f(j)`.
pub fn apply_operator(kernel: &StepKernel, f: &[Ratio]) -> Result<Vec<Ratio>> {
    let k = kernel.class_count();
    if f.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: f.len(),
        });
    }
    Ok(kernel
        .weighted
        .iter()
        .map(|row| {
            let mut total = Ratio::zero();
            for (w, x) in row.iter().zip(f) {
                if !x.is_zero() && !w.is_zero() {
                    total += w * x;
                }
            }
            total
        })
        .collect())
}

/// `⟨f, g⟩_μ = Σ_i μ(i)·f(i)·g(i)`.
pub fn inner_product(masses: &[Ratio], f: &[Ratio], g: &[Ratio]) -> Ratio {
    masses
        .iter()
        .zip(f.iter().zip(g))
        .map(|(m, (a, b))| m * a * b)
        .sum()
}

/// A simple undirected graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl FiniteGraph {
    /// Edges are unordered; each is stored as `(min, max)`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            for vertex in [u, v] {
                if vertex >= n {
                    return Err(Error::VertexOutOfRange { vertex, n });
                }
            }
            if u == v {
                return Err(Error::LoopEdge(u));
            }
            let edge = (u.min(v), u.max(v));
            if !set.insert(edge) {
                return Err(Error::DuplicateEdge(edge.0, edge.1));
            }
        }
        Ok(FiniteGraph { n, edges: set })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.n]; self.n];
        for &(u, v) in &self.edges {
            adj[u][v] = true;
            adj[v][u] = true;
        }
        adj
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            out[u].push(v);
            out[v].push(u);
        }
        out
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors().iter().map(Vec::len).collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let neighbors = self.neighbors();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_tree(&self) -> bool {
        self.n >= 1 && self.edges.len() == self.n - 1 && self.is_connected()
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i))).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycles need at least three vertices");
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n))).expect("cycle edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
            .expect("complete graph edges are valid")
    }

    /// Star with center `0` and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|i| (0, i))).expect("star edges are valid")
    }

    /// Disjoint union, with `other`'s vertices shifted past `self`'s.
    pub fn disjoint_union(&self, other: &FiniteGraph) -> Self {
        let shift = self.n;
        Self::new(
            self.n + other.n,
            self.edges()
                .chain(other.edges().map(|(u, v)| (u + shift, v + shift))),
        )
        .expect("disjoint union of valid graphs is valid")
    }
}

/// The graphon `W_G`: `n` classes of mass `1/n` and the adjacency matrix as values.
pub fn graph_to_graphon(graph: &FiniteGraph) -> Result<StepKernel> {
    let n = graph.vertex_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mass = Ratio::new(BigInt::one(), BigInt::from(n));
    let values = graph
        .adjacency()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|adjacent| if adjacent { Ratio::one() } else { Ratio::zero() })
                .collect()
        })
        .collect();
    StepKernel::new(vec![mass; n], values, true)
}

/// A partition of a kernel's classes into colors `0..color_count`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coloring {
    color_of: Vec<usize>,
    color_count: usize,
}

impl Coloring {
    /// Accepts any color assignment using contiguous ids `0..c` with every id in use.
    pub fn new(color_of: Vec<usize>) -> Result<Self> {
        let color_count = color_of.iter().max().map_or(0, |&m| m + 1);
        let mut used = vec![false; color_count];
        for &c in &color_of {
            used[c] = true;
        }
        if let Some(missing) = used.iter().position(|&u| !u) {
            return Err(Error::InvalidColoring(format!("color {missing} is empty")));
        }
        Ok(Coloring {
            color_of,
            color_count,
        })
    }

    /// Colors by label equality, numbering colors by first occurrence.
    pub fn from_labels<T: Eq + Hash>(labels: &[T]) -> Self {
        let mut ids: HashMap<&T, usize> = HashMap::new();
        let color_of = labels
            .iter()
            .map(|label| {
                let next = ids.len();
                *ids.entry(label).or_insert(next)
            })
            .collect();
        Coloring {
            color_of,
            color_count: ids.len(),
        }
    }

    /// One color holding every class.
    pub fn trivial(k: usize) -> Self {
        Coloring {
            color_of: vec![0; k],
            color_count: usize::from(k > 0),
        }
    }

    /// Every class its own color.
    pub fn discrete(k: usize) -> Self {
        Coloring {
            color_of: (0..k).collect(),
            color_count: k,
        }
    }

    pub fn class_count(&self) -> usize {
        self.color_of.len()
    }

    pub fn color_count(&self) -> usize {
        self.color_count
    }

    pub fn color_of(&self, class: usize) -> usize {
        self.color_of[class]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.color_of
    }

    /// Classes of each color, in increasing class order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.color_count];
        for (class, &color) in self.color_of.iter().enumerate() {
            cells[color].push(class);
        }
        cells
    }

    /// Renumbers colors by first occurrence.
    pub fn normalized(&self) -> Coloring {
        Coloring::from_labels(&self.color_of)
    }

    /// True when both colorings induce the same partition.
    pub fn same_partition(&self, other: &Coloring) -> bool {
        self.class_count() == other.class_count() && self.normalized() == other.normalized()
    }

    /// True when every color of `self` lies inside a single color of `coarser`.
    pub fn refines(&self, coarser: &Coloring) -> bool {
        if self.class_count() != coarser.class_count() {
            return false;
        }
        let mut image = vec![None; self.color_count];
        self.color_of
            .iter()
            .zip(&coarser.color_of)
            .all(|(&fine, &coarse)| *image[fine].get_or_insert(coarse) == coarse)
    }

    /// Total kernel mass of each color.
    pub fn color_masses(&self, masses: &[Ratio]) -> Vec<Ratio> {
        let mut out = vec![Ratio::zero(); self.color_count];
        for (class, &color) in self.color_of.iter().enumerate() {
            out[color] += &masses[class];
        }
        out
    }
}

impl fmt::Display for Coloring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.color_of.iter().map(usize::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}
