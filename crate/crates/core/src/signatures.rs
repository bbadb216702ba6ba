//! Iterated degree measures of step kernels as finite canonical keys.
//!
//! The level-0 signature of every class is the single atom `★`. The level
//! `n + 1` signature of class `i` is the finite measure that sends each
//! level-`n` signature cell `S` to the degree `Σ_{j ∈ S} W(i,j)·μ(j)`, stored as
//! a sorted list of `(level-n signature, mass)` pairs with zero masses dropped.
//! The distribution of signatures under `μ` is the [`Didm`] of the kernel.
//!
//! Signatures are hash-consed in a process-wide table: structurally equal
//! signatures share one id, so equality is exact and constant time even across
//! kernels, and the structural order is memoized per pair of ids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, OnceLock};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{Coloring, Ratio, StepKernel};
use crate::refinement::refinement_fixpoint;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Node {
    level: usize,
    parts: Vec<(u32, Ratio)>,
}

#[derive(Default)]
struct Table {
    nodes: Vec<Node>,
    ids: HashMap<Node, u32>,
    order: HashMap<(u32, u32), Ordering>,
}

impl Table {
    fn cmp(&mut self, a: u32, b: u32) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        if let Some(&known) = self.order.get(&(a, b)) {
            return known;
        }
        let (left, right) = (a as usize, b as usize);
        let mut result = self.nodes[left].level.cmp(&self.nodes[right].level);
        if result == Ordering::Equal {
            let shared = self.nodes[left].parts.len().min(self.nodes[right].parts.len());
            for index in 0..shared {
                let (ca, cb) = (self.nodes[left].parts[index].0, self.nodes[right].parts[index].0);
                result = self.cmp(ca, cb).then_with(|| {
                    self.nodes[left].parts[index].1.cmp(&self.nodes[right].parts[index].1)
                });
                if result != Ordering::Equal {
                    break;
                }
            }
            if result == Ordering::Equal {
                result = self.nodes[left].parts.len().cmp(&self.nodes[right].parts.len());
            }
        }
        self.order.insert((a, b), result);
        self.order.insert((b, a), result.reverse());
        result
    }

    fn intern(&mut self, level: usize, mut parts: Vec<(u32, Ratio)>) -> u32 {
        parts.sort_by(|x, y| self.cmp(x.0, y.0));
        let mut merged: Vec<(u32, Ratio)> = Vec::with_capacity(parts.len());
        for (child, mass) in parts {
            match merged.last_mut() {
                Some((last, total)) if *last == child => *total += mass,
                _ => merged.push((child, mass)),
            }
        }
        merged.retain(|(_, mass)| !mass.is_zero());
        let node = Node {
            level,
            parts: merged,
        };
        if let Some(&id) = self.ids.get(&node) {
            return id;
        }
        let id = u32::try_from(self.nodes.len()).expect("signature table overflow");
        self.nodes.push(node.clone());
        self.ids.insert(node, id);
        id
    }
}

fn table() -> std::sync::MutexGuard<'static, Table> {
    static TABLE: OnceLock<Mutex<Table>> = OnceLock::new();
    TABLE
        .get_or_init(|| Mutex::new(Table::default()))
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// A level-`n` iterated degree measure, canonical across kernels.
#[derive(Clone, Copy)]
pub struct IdmSignature {
    level: usize,
    id: u32,
}

impl IdmSignature {
    /// The unique level-0 signature `★`.
    pub fn atom() -> Self {
        IdmSignature {
            level: 0,
            id: table().intern(0, Vec::new()),
        }
    }

    /// The level `child_level + 1` signature with the given masses on
    /// level-`child_level` signatures. Repeated children are merged and zero
    /// masses dropped.
    pub fn measure(child_level: usize, parts: impl IntoIterator<Item = (IdmSignature, Ratio)>) -> Result<Self> {
        let mut raw = Vec::new();
        for (child, mass) in parts {
            if child.level != child_level {
                return Err(Error::InvalidArgument(format!(
                    "child signature at level {} inside a level {} measure",
                    child.level,
                    child_level + 1
                )));
            }
            if mass < Ratio::zero() {
                return Err(Error::InvalidArgument("negative signature mass".into()));
            }
            raw.push((child.id, mass));
        }
        let level = child_level + 1;
        Ok(IdmSignature {
            level,
            id: table().intern(level, raw),
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// The `(child, mass)` pairs in canonical order; empty at level 0.
    pub fn parts(&self) -> Vec<(IdmSignature, Ratio)> {
        let t = table();
        let node = &t.nodes[self.id as usize];
        let child_level = self.level.saturating_sub(1);
        node.parts
            .iter()
            .map(|(id, mass)| {
                (
                    IdmSignature {
                        level: child_level,
                        id: *id,
                    },
                    mass.clone(),
                )
            })
            .collect()
    }

    /// Total mass, i.e. the degree of any class carrying this signature.
    pub fn total_mass(&self) -> Ratio {
        self.parts().into_iter().map(|(_, m)| m).sum()
    }

    /// The marginal at a lower level: children are projected one level down
    /// and masses of children that coincide are added.
    pub fn project(&self, level: usize) -> Result<IdmSignature> {
        if level > self.level {
            return Err(Error::InvalidArgument(format!(
                "cannot project a level {} signature up to level {level}",
                self.level
            )));
        }
        if level == self.level {
            return Ok(*self);
        }
        if level == 0 {
            return Ok(IdmSignature::atom());
        }
        let parts = self
            .parts()
            .into_iter()
            .map(|(child, mass)| Ok((child.project(level - 1)?, mass)))
            .collect::<Result<Vec<_>>>()?;
        IdmSignature::measure(level - 1, parts)
    }

    /// Nested-list text form: `*` for the atom, otherwise
    /// `[(child, p/q), ...]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_text(&mut out);
        out
    }

    fn write_text(&self, out: &mut String) {
        if self.level == 0 {
            out.push('*');
            return;
        }
        out.push('[');
        for (index, (child, mass)) in self.parts().into_iter().enumerate() {
            if index > 0 {
                out.push_str(", ");
            }
            out.push('(');
            child.write_text(out);
            out.push_str(", ");
            out.push_str(&mass.to_string());
            out.push(')');
        }
        out.push(']');
    }
}

impl PartialEq for IdmSignature {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for IdmSignature {}

impl Hash for IdmSignature {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl Ord for IdmSignature {
    fn cmp(&self, other: &Self) -> Ordering {
        table().cmp(self.id, other.id)
    }
}

impl PartialOrd for IdmSignature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for IdmSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IdmSignature(level {}: {})", self.level, self.to_text())
    }
}

impl fmt::Display for IdmSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Per-class signatures for every level `0..=max_level`.
pub fn signature_tower(kernel: &StepKernel, max_level: usize) -> Vec<Vec<IdmSignature>> {
    let k = kernel.class_count();
    let mut tower = vec![vec![IdmSignature::atom(); k]];
    for level in 0..max_level {
        let current = &tower[level];
        let cells = Coloring::from_labels(current).cells();
        let next = (0..k)
            .map(|i| {
                let parts = cells
                    .iter()
                    .map(|cell| (current[cell[0]], kernel.degree_toward(i, cell)));
                IdmSignature::measure(level, parts).expect("children share one level")
            })
            .collect();
        tower.push(next);
    }
    tower
}

/// Per-class level-`n` signatures.
pub fn signatures_at(kernel: &StepKernel, n: usize) -> Vec<IdmSignature> {
    signature_tower(kernel, n).pop().expect("tower has level 0")
}

/// Distribution of level-`n` signatures under the class masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Didm {
    pub level: usize,
    pub atoms: BTreeMap<IdmSignature, Ratio>,
}

impl Didm {
    pub fn from_signatures(kernel: &StepKernel, level: usize, signatures: &[IdmSignature]) -> Didm {
        let mut atoms: BTreeMap<IdmSignature, Ratio> = BTreeMap::new();
        for (class, signature) in signatures.iter().enumerate() {
            *atoms.entry(*signature).or_insert_with(Ratio::zero) += kernel.mass(class);
        }
        Didm { level, atoms }
    }

    /// `[(signature, mass), ...]` in canonical signature order.
    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|(signature, mass)| format!("({}, {})", signature.to_text(), mass))
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

pub fn didm(kernel: &StepKernel, n: usize) -> Didm {
    Didm::from_signatures(kernel, n, &signatures_at(kernel, n))
}

/// Outcome of comparing two distributions level by level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidmComparison {
    pub equal: bool,
    /// Least level at which the distributions differ.
    pub distinguishing_level: Option<usize>,
    /// Deepest level compared.
    pub levels_compared: usize,
}

/// Compares `didm(W, n)` and `didm(U, n)` for `n = 0, 1, …` up to one level
/// past the later of the two refinement stabilizations.
///
/// Past that level the signature cells of both kernels are in bijection with
/// their fixpoint colors, so deeper levels cannot separate them.
pub fn didm_equal(w: &StepKernel, u: &StepKernel) -> DidmComparison {
    let depth = comparison_depth(w, u);
    didm_equal_to_depth(w, u, depth)
}

/// The level [`didm_equal`] compares up to.
pub fn comparison_depth(w: &StepKernel, u: &StepKernel) -> usize {
    refinement_fixpoint(w)
        .stabilized_at
        .max(refinement_fixpoint(u).stabilized_at)
        + 1
}

/// Compares levels `0..=depth` without any stabilization shortcut.
pub fn didm_equal_to_depth(w: &StepKernel, u: &StepKernel, depth: usize) -> DidmComparison {
    let tower_w = signature_tower(w, depth);
    let tower_u = signature_tower(u, depth);
    let distinguishing_level = (0..=depth).find(|&level| {
        Didm::from_signatures(w, level, &tower_w[level]) != Didm::from_signatures(u, level, &tower_u[level])
    });
    DidmComparison {
        equal: distinguishing_level.is_none(),
        distinguishing_level,
        levels_compared: depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{graph_to_graphon, int, ratio, FiniteGraph};

    fn graphon(g: &FiniteGraph) -> StepKernel {
        graph_to_graphon(g).unwrap()
    }

    fn degree_signature(degree: Ratio) -> IdmSignature {
        IdmSignature::measure(0, [(IdmSignature::atom(), degree)]).unwrap()
    }

    #[test]
    fn constant_kernel_signatures() {
        let w = StepKernel::constant(ratio(3, 5), 3).unwrap();
        let sigs = signatures_at(&w, 1);
        assert!(sigs.iter().all(|s| *s == degree_signature(ratio(3, 5))));
        let d = didm(&StepKernel::constant(ratio(1, 2), 2).unwrap(), 1);
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms.values().next().unwrap(), &int(1));
    }

    #[test]
    fn star_signatures_and_didm() {
        let w = graphon(&FiniteGraph::star(3));
        let sigs = signatures_at(&w, 1);
        assert_eq!(sigs[0], degree_signature(ratio(3, 4)));
        for leaf in 1..4 {
            assert_eq!(sigs[leaf], degree_signature(ratio(1, 4)));
        }
        let d = didm(&w, 1);
        assert_eq!(d.atoms[&degree_signature(ratio(3, 4))], ratio(1, 4));
        assert_eq!(d.atoms[&degree_signature(ratio(1, 4))], ratio(3, 4));
    }

    #[test]
    fn cycles_differ_at_level_one() {
        let c5 = graphon(&FiniteGraph::cycle(5));
        let c6 = graphon(&FiniteGraph::cycle(6));
        let d5 = didm(&c5, 1);
        let d6 = didm(&c6, 1);
        assert_eq!(d5.atoms.get(&degree_signature(ratio(2, 5))), Some(&int(1)));
        assert_eq!(d6.atoms.get(&degree_signature(ratio(1, 3))), Some(&int(1)));
        assert_ne!(d5, d6);
        let cmp = didm_equal(&c6, &c5);
        assert!(!cmp.equal);
        assert_eq!(cmp.distinguishing_level, Some(1));
    }

    #[test]
    fn two_triangles_match_hexagon() {
        let c6 = graphon(&FiniteGraph::cycle(6));
        let two_k3 = graphon(&FiniteGraph::complete(3).disjoint_union(&FiniteGraph::complete(3)));
        for n in 0..5 {
            assert_eq!(signatures_at(&c6, n), signatures_at(&two_k3, n));
        }
        let cmp = didm_equal(&c6, &two_k3);
        assert!(cmp.equal);
        assert_eq!(cmp.distinguishing_level, None);
        assert!(didm_equal(&c6, &c6).equal);
    }

    #[test]
    fn projection_recovers_lower_levels() {
        let w = graphon(&FiniteGraph::path(6));
        let tower = signature_tower(&w, 4);
        for level in 0..=4 {
            for low in 0..=level {
                for class in 0..6 {
                    assert_eq!(tower[level][class].project(low).unwrap(), tower[low][class]);
                }
            }
        }
        assert!(tower[1][0].project(2).is_err());
    }

    #[test]
    fn zero_masses_are_dropped() {
        let a = IdmSignature::measure(0, [(IdmSignature::atom(), int(0))]).unwrap();
        let b = IdmSignature::measure(0, std::iter::empty()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), "[]");
        assert_eq!(degree_signature(ratio(1, 3)).to_text(), "[(*, 1/3)]");
    }

    #[test]
    fn structural_order_is_by_level_then_parts() {
        let low = degree_signature(ratio(1, 4));
        let high = degree_signature(ratio(3, 4));
        assert!(low < high);
        assert!(IdmSignature::atom() < low);
        let mixed = IdmSignature::measure(1, [(low, ratio(1, 8)), (high, ratio(1, 8))]).unwrap();
        let only_high = IdmSignature::measure(1, [(high, ratio(1, 8))]).unwrap();
        assert!(mixed < only_high);
        assert!(IdmSignature::measure(0, [(low, int(1))]).is_err());
    }
}
