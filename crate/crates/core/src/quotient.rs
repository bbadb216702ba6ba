//! Conditional expectations, quotient kernels and the kernel rebuilt from a
//! signature distribution.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{Coloring, Ratio, StepKernel};
use crate::refinement::{is_invariant, refinement_fixpoint, RefinementTrace};
use crate::signatures::{signature_tower, Didm, IdmSignature};

/// A quotient kernel on the colors of an invariant coloring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientResult {
    /// Kernel on colors, ordered canonically by signature label.
    pub quotient: StepKernel,
    /// Quotient class of each original class.
    pub lift_map: Vec<usize>,
    /// Signature carried by each quotient class.
    pub signature_labels: Vec<IdmSignature>,
    /// Level of `signature_labels`.
    pub label_level: usize,
    /// Quotient class of each color of the input coloring.
    pub position_of_color: Vec<usize>,
}

fn require_invariant(kernel: &StepKernel, coloring: &Coloring) -> Result<()> {
    if coloring.class_count() != kernel.class_count() {
        return Err(Error::DimensionMismatch {
            expected: kernel.class_count(),
            found: coloring.class_count(),
        });
    }
    if !is_invariant(kernel, coloring) {
        return Err(Error::NotInvariant);
    }
    Ok(())
}

/// Mass-weighted block averages of `kernel` over pairs of colors.
fn block_averages(kernel: &StepKernel, coloring: &Coloring) -> (Vec<Ratio>, Vec<Vec<Ratio>>) {
    let colors = coloring.color_count();
    let color_masses = coloring.color_masses(kernel.masses());
    let mut sums = vec![vec![Ratio::zero(); colors]; colors];
    for i in 0..kernel.class_count() {
        for j in 0..kernel.class_count() {
            let weighted = kernel.weighted(i, j);
            if !weighted.is_zero() {
                sums[coloring.color_of(i)][coloring.color_of(j)] += kernel.mass(i) * weighted;
            }
        }
    }
    for (a, row) in sums.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            *entry /= &color_masses[a] * &color_masses[b];
        }
    }
    (color_masses, sums)
}

/// `W_C`: the kernel on the original classes whose value on block `(i, j)` is
/// the average of `W` over `color(i) × color(j)`.
///
/// Refuses colorings that are not invariant.
pub fn conditional_expectation(kernel: &StepKernel, coloring: &Coloring) -> Result<StepKernel> {
    require_invariant(kernel, coloring)?;
    let (_, averages) = block_averages(kernel, coloring);
    let k = kernel.class_count();
    let values = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| averages[coloring.color_of(i)][coloring.color_of(j)].clone())
                .collect()
        })
        .collect();
    StepKernel::new(kernel.masses().to_vec(), values, kernel.is_symmetric())
}

/// `W/C` with quotient classes labeled by the signatures one level past the
/// refinement stabilization of `kernel`, the level the distribution
/// comparison and [`kernel_from_didm`] work at, so all three agree on order.
pub fn quotient_kernel(kernel: &StepKernel, coloring: &Coloring) -> Result<QuotientResult> {
    let level = refinement_fixpoint(kernel).stabilized_at + 1;
    quotient_kernel_labeled(kernel, coloring, level)
}

/// `W/C` with quotient classes labeled by level-`label_level` signatures.
///
/// Colors are sorted by label, ties broken by their first class, so the
/// fixpoint quotient of a kernel has a canonical class order whenever the
/// label level is at least the stabilization level.
pub fn quotient_kernel_labeled(kernel: &StepKernel, coloring: &Coloring, label_level: usize) -> Result<QuotientResult> {
    require_invariant(kernel, coloring)?;
    let (color_masses, averages) = block_averages(kernel, coloring);
    let signatures = signature_tower(kernel, label_level).pop().expect("tower has level 0");
    let cells = coloring.cells();
    let labels: Vec<IdmSignature> = cells.iter().map(|cell| signatures[cell[0]]).collect();
    for (cell, label) in cells.iter().zip(&labels) {
        if cell.iter().any(|&c| signatures[c] != *label) {
            // Invariant colorings refine the fixpoint coloring, so this only
            // happens when the label level is below stabilization.
            return Err(Error::InvalidArgument(format!(
                "signature level {label_level} does not separate the coloring's classes consistently"
            )));
        }
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]).then(cells[a][0].cmp(&cells[b][0])));
    let mut position_of_color = vec![0; order.len()];
    for (position, &color) in order.iter().enumerate() {
        position_of_color[color] = position;
    }
    let masses = order.iter().map(|&c| color_masses[c].clone()).collect();
    let values = order
        .iter()
        .map(|&a| order.iter().map(|&b| averages[a][b].clone()).collect())
        .collect();
    let quotient = StepKernel::new(masses, values, kernel.is_symmetric())?;
    let lift_map = (0..kernel.class_count())
        .map(|i| position_of_color[coloring.color_of(i)])
        .collect();
    Ok(QuotientResult {
        quotient,
        lift_map,
        signature_labels: order.iter().map(|&c| labels[c]).collect(),
        label_level,
        position_of_color,
    })
}

impl QuotientResult {
    /// Lifts the quotient back to the original classes; equals the
    /// conditional expectation of the source kernel.
    pub fn lift(&self, original_masses: &[Ratio]) -> Result<StepKernel> {
        let values = self
            .lift_map
            .iter()
            .map(|&a| self.lift_map.iter().map(|&b| self.quotient.value(a, b).clone()).collect())
            .collect();
        StepKernel::new(original_masses.to_vec(), values, self.quotient.is_symmetric())
    }
}

/// The quotient of `kernel` by its refinement fixpoint, labeled at `label_level`.
pub fn fixpoint_quotient(kernel: &StepKernel, label_level: usize) -> Result<QuotientResult> {
    fixpoint_quotient_of(kernel, &refinement_fixpoint(kernel), label_level)
}

fn fixpoint_quotient_of(kernel: &StepKernel, trace: &RefinementTrace, label_level: usize) -> Result<QuotientResult> {
    quotient_kernel_labeled(kernel, trace.fixpoint(), label_level.max(trace.stabilized_at))
}

/// Builds the kernel on the atoms of a signature distribution: the value on
/// `(α, β)` is the mass `α` assigns to `β`'s cell divided by the mass of `β`.
///
/// Atoms are ordered by signature. The distribution must be `didm(kernel, n)`
/// for some `n` past the refinement stabilization of `kernel`, so that every
/// atom's projection one level down is distinct.
pub fn kernel_from_didm(distribution: &Didm, kernel: &StepKernel) -> Result<StepKernel> {
    let level = distribution.level;
    if level == 0 {
        return Err(Error::InconsistentDidm("level 0 carries no degree information".into()));
    }
    let expected = Didm::from_signatures(kernel, level, &signature_tower(kernel, level)[level]);
    if expected != *distribution {
        return Err(Error::InconsistentDidm(format!(
            "atoms differ from the kernel's level {level} signatures"
        )));
    }
    let atoms: Vec<(&IdmSignature, &Ratio)> = distribution.atoms.iter().collect();
    let mut cell_of_projection: BTreeMap<IdmSignature, usize> = BTreeMap::new();
    for (index, (atom, _)) in atoms.iter().enumerate() {
        if cell_of_projection.insert(atom.project(level - 1)?, index).is_some() {
            return Err(Error::InconsistentDidm(format!(
                "level {level} is not past stabilization: two atoms share a level {} marginal",
                level - 1
            )));
        }
    }
    let masses: Vec<Ratio> = atoms.iter().map(|(_, m)| (*m).clone()).collect();
    let mut values = vec![vec![Ratio::zero(); atoms.len()]; atoms.len()];
    for (row, (atom, _)) in atoms.iter().enumerate() {
        for (cell, degree) in atom.parts() {
            let col = *cell_of_projection.get(&cell).ok_or_else(|| {
                Error::InconsistentDidm("an atom sends mass outside the support".into())
            })?;
            values[row][col] = degree / &masses[col];
        }
    }
    StepKernel::new(masses, values, kernel.is_symmetric())
}

/// Outcome of matching two fixpoint quotients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientMatch {
    pub isomorphic: bool,
    /// `matching[a] = b` sends quotient class `a` of the first kernel to class
    /// `b` of the second.
    pub matching: Option<Vec<usize>>,
    pub first: QuotientResult,
    pub second: QuotientResult,
}

/// Decides whether the fixpoint quotients of two graphons are isomorphic.
///
/// Fixpoint quotient classes carry pairwise distinct signatures, so the only
/// candidate isomorphism pairs classes with equal signatures; the candidate is
/// then checked on masses and values exactly.
pub fn quotients_isomorphic(w: &StepKernel, u: &StepKernel) -> Result<QuotientMatch> {
    if !w.is_symmetric() || !u.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    let (trace_w, trace_u) = (refinement_fixpoint(w), refinement_fixpoint(u));
    let level = trace_w.stabilized_at.max(trace_u.stabilized_at) + 1;
    let first = fixpoint_quotient_of(w, &trace_w, level)?;
    let second = fixpoint_quotient_of(u, &trace_u, level)?;
    for labels in [&first.signature_labels, &second.signature_labels] {
        if labels.windows(2).any(|pair| pair[0] == pair[1]) {
            return Err(Error::Defect(
                "fixpoint quotient classes share a signature".into(),
            ));
        }
    }
    let matching = matching_by_labels(&first, &second);
    let isomorphic = matching.as_ref().is_some_and(|sigma| {
        let (a, b) = (&first.quotient, &second.quotient);
        (0..a.class_count()).all(|x| {
            a.mass(x) == b.mass(sigma[x])
                && (0..a.class_count()).all(|y| a.value(x, y) == b.value(sigma[x], sigma[y]))
        })
    });
    Ok(QuotientMatch {
        isomorphic,
        matching: if isomorphic { matching } else { None },
        first,
        second,
    })
}

fn matching_by_labels(first: &QuotientResult, second: &QuotientResult) -> Option<Vec<usize>> {
    if first.signature_labels.len() != second.signature_labels.len() {
        return None;
    }
    first
        .signature_labels
        .iter()
        .map(|label| second.signature_labels.iter().position(|other| other == label))
        .collect()
}
