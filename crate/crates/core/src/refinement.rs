//! Measure-weighted color refinement on the classes of a step kernel.
//!
//! Starting from the trivial coloring, each round splits classes whose
//! mass-weighted degree toward some current color differs. The fixpoint is the
//! coarsest invariant coloring, i.e. the minimum invariant algebra `C(W)`
//! restricted to the step partition.

use crate::error::{Error, Result};
use crate::model::{Coloring, Ratio, StepKernel};

/// Which degrees enter the refinement key.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefineOptions {
    /// Also split by in-degrees `Σ_j W(j,i)·μ(j)` toward each color. Only
    /// changes anything for asymmetric kernels.
    pub in_degrees: bool,
}

/// The canonical sequence of colorings up to stabilization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementTrace {
    /// `levels[0]` is the trivial coloring; the last two entries are equal.
    pub levels: Vec<Coloring>,
    /// Least `n` with `levels[n + 1] == levels[n]`.
    pub stabilized_at: usize,
    /// Set when the kernel was asymmetric.
    pub asymmetric: bool,
}

impl RefinementTrace {
    pub fn fixpoint(&self) -> &Coloring {
        &self.levels[self.stabilized_at]
    }

    /// The level-`n` coloring; levels past stabilization repeat the fixpoint.
    pub fn level(&self, n: usize) -> &Coloring {
        &self.levels[n.min(self.stabilized_at)]
    }
}

type DegreeKey = (usize, Vec<(usize, Ratio)>, Vec<(usize, Ratio)>);

fn degree_vector(kernel: &StepKernel, coloring: &Coloring, class: usize, incoming: bool) -> Vec<(usize, Ratio)> {
    let mut acc: Vec<Ratio> = vec![Ratio::default(); coloring.color_count()];
    for j in 0..kernel.class_count() {
        if incoming {
            acc[coloring.color_of(j)] += kernel.value(j, class) * kernel.mass(j);
        } else {
            acc[coloring.color_of(j)] += kernel.weighted(class, j);
        }
    }
    acc.into_iter().enumerate().collect()
}

fn check_dimensions(kernel: &StepKernel, coloring: &Coloring) -> Result<()> {
    if coloring.class_count() != kernel.class_count() {
        return Err(Error::DimensionMismatch {
            expected: kernel.class_count(),
            found: coloring.class_count(),
        });
    }
    Ok(())
}

/// One round of refinement using out-degrees only.
pub fn refine_once(kernel: &StepKernel, coloring: &Coloring) -> Result<Coloring> {
    refine_once_with(kernel, coloring, RefineOptions::default())
}

pub fn refine_once_with(kernel: &StepKernel, coloring: &Coloring, options: RefineOptions) -> Result<Coloring> {
    check_dimensions(kernel, coloring)?;
    let keys: Vec<DegreeKey> = (0..kernel.class_count())
        .map(|i| {
            let incoming = if options.in_degrees {
                degree_vector(kernel, coloring, i, true)
            } else {
                Vec::new()
            };
            (coloring.color_of(i), degree_vector(kernel, coloring, i, false), incoming)
        })
        .collect();
    Ok(Coloring::from_labels(&keys))
}

/// Iterates [`refine_once`] from the trivial coloring until it stabilizes.
pub fn refinement_fixpoint(kernel: &StepKernel) -> RefinementTrace {
    refinement_fixpoint_with(kernel, RefineOptions::default())
}

pub fn refinement_fixpoint_with(kernel: &StepKernel, options: RefineOptions) -> RefinementTrace {
    let mut levels = vec![Coloring::trivial(kernel.class_count())];
    loop {
        let current = levels.last().expect("trace is never empty");
        let next = refine_once_with(kernel, current, options).expect("coloring built for this kernel");
        let stable = next.color_count() == current.color_count();
        levels.push(next);
        if stable {
            let stabilized_at = levels.len() - 2;
            return RefinementTrace {
                levels,
                stabilized_at,
                asymmetric: !kernel.is_symmetric(),
            };
        }
    }
}

/// True iff one refinement round leaves `coloring` unchanged as a partition.
/// A coloring of the wrong size is never invariant.
pub fn is_invariant(kernel: &StepKernel, coloring: &Coloring) -> bool {
    match refine_once(kernel, coloring) {
        Ok(next) => next.color_count() == coloring.color_count(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{graph_to_graphon, ratio, FiniteGraph};

    fn graphon(g: &FiniteGraph) -> StepKernel {
        graph_to_graphon(g).unwrap()
    }

    #[test]
    fn constant_kernel_is_stable_immediately() {
        let w = StepKernel::constant(ratio(1, 2), 4).unwrap();
        let trivial = Coloring::trivial(4);
        assert_eq!(refine_once(&w, &trivial).unwrap(), trivial);
        let trace = refinement_fixpoint(&w);
        assert_eq!(trace.stabilized_at, 0);
        assert_eq!(trace.fixpoint().color_count(), 1);
    }

    #[test]
    fn star_splits_center_from_leaves() {
        let w = graphon(&FiniteGraph::star(3));
        let once = refine_once(&w, &Coloring::trivial(4)).unwrap();
        assert_eq!(once.as_slice(), &[0, 1, 1, 1]);
        let trace = refinement_fixpoint(&w);
        assert_eq!(trace.stabilized_at, 1);
        assert_eq!(trace.fixpoint().color_masses(w.masses()), vec![ratio(1, 4), ratio(3, 4)]);
        assert!(!is_invariant(&w, &Coloring::trivial(4)));
    }

    #[test]
    fn regular_graphs_keep_one_color() {
        let c6 = graphon(&FiniteGraph::cycle(6));
        let trivial = Coloring::trivial(6);
        assert_eq!(refine_once(&c6, &trivial).unwrap(), trivial);
        let two_k3 = graphon(&FiniteGraph::complete(3).disjoint_union(&FiniteGraph::complete(3)));
        let trace = refinement_fixpoint(&two_k3);
        assert_eq!(trace.fixpoint().color_count(), 1);
    }

    #[test]
    fn discrete_coloring_is_invariant() {
        for g in [FiniteGraph::path(5), FiniteGraph::star(4), FiniteGraph::cycle(5)] {
            let w = graphon(&g);
            assert!(is_invariant(&w, &Coloring::discrete(w.class_count())));
            let trace = refinement_fixpoint(&w);
            assert!(is_invariant(&w, trace.fixpoint()));
        }
    }

    #[test]
    fn path_refines_monotonically() {
        let w = graphon(&FiniteGraph::path(7));
        let trace = refinement_fixpoint(&w);
        for pair in trace.levels.windows(2) {
            assert!(pair[1].refines(&pair[0]));
        }
        assert!(trace.stabilized_at < w.class_count());
        // P7 folds onto its four distances from the center.
        assert_eq!(trace.fixpoint().color_count(), 4);
        let last = trace.levels.len() - 1;
        assert_eq!(trace.levels[last], trace.levels[last - 1]);
    }

    #[test]
    fn in_degree_option_on_asymmetric_kernel() {
        // Class 0 points to class 1; both out-degrees toward the whole space
        // differ, so out-degree refinement already splits them. Class 2 and 3
        // have equal out-degrees but different in-degrees.
        let w = StepKernel::new(
            vec![ratio(1, 4); 4],
            vec![
                vec![ratio(0, 1), ratio(1, 1), ratio(0, 1), ratio(0, 1)],
                vec![ratio(0, 1), ratio(0, 1), ratio(1, 1), ratio(0, 1)],
                vec![ratio(0, 1), ratio(0, 1), ratio(0, 1), ratio(0, 1)],
                vec![ratio(0, 1), ratio(0, 1), ratio(0, 1), ratio(0, 1)],
            ],
            false,
        )
        .unwrap();
        let out_only = refinement_fixpoint(&w);
        assert!(out_only.asymmetric);
        let both = refinement_fixpoint_with(&w, RefineOptions { in_degrees: true });
        assert!(both.fixpoint().refines(out_only.fixpoint()));
        assert!(both.fixpoint().color_count() > out_only.fixpoint().color_count());
    }

    #[test]
    fn dimension_mismatch() {
        let w = StepKernel::constant(ratio(1, 2), 2).unwrap();
        assert!(refine_once(&w, &Coloring::trivial(3)).is_err());
        assert!(!is_invariant(&w, &Coloring::trivial(3)));
    }
}
