//! Markov kernels between step spaces and the intertwiner built from matched
//! fixpoint quotients.
//!
//! A [`MarkovKernel`] from a source space with masses `μ_s` to a target space
//! with masses `μ_t` acts on source functions by
//! `(Sf)(i) = Σ_j s(i,j)·μ_s(j)·f(j)`. It is Markov when it is nonnegative,
//! fixes constants (`Σ_j s(i,j)·μ_s(j) = 1`) and so does its adjoint
//! (`Σ_i μ_t(i)·s(i,j) = 1`).

use num_traits::{One, Signed, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{int, to_f64, Coloring, Ratio, StepKernel};
use crate::quotient::quotients_isomorphic;
use crate::refinement::refinement_fixpoint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovKernel {
    source: Vec<Ratio>,
    target: Vec<Ratio>,
    matrix: Vec<Vec<Ratio>>,
}

impl MarkovKernel {
    /// `matrix` is `target.len() × source.len()`. Only shapes are checked
    /// here; see [`verify_markov`] for the Markov conditions.
    pub fn new(source: Vec<Ratio>, target: Vec<Ratio>, matrix: Vec<Vec<Ratio>>) -> Result<Self> {
        if matrix.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: target.len(),
                found: matrix.len(),
            });
        }
        if let Some(row) = matrix.iter().find(|row| row.len() != source.len()) {
            return Err(Error::DimensionMismatch {
                expected: source.len(),
                found: row.len(),
            });
        }
        Ok(MarkovKernel {
            source,
            target,
            matrix,
        })
    }

    /// The identity on a step space: `s(i,j) = δ_ij / μ(j)`.
    pub fn identity(masses: &[Ratio]) -> Self {
        let k = masses.len();
        let matrix = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if i == j { masses[j].recip() } else { Ratio::zero() })
                    .collect()
            })
            .collect();
        MarkovKernel {
            source: masses.to_vec(),
            target: masses.to_vec(),
            matrix,
        }
    }

    /// Averaging onto the colors of `coloring`: target classes are colors,
    /// `s(γ,j) = 1_{j∈γ} / m_γ`.
    pub fn averaging(masses: &[Ratio], coloring: &Coloring) -> Result<Self> {
        if coloring.class_count() != masses.len() {
            return Err(Error::DimensionMismatch {
                expected: masses.len(),
                found: coloring.class_count(),
            });
        }
        let color_masses = coloring.color_masses(masses);
        let matrix = (0..coloring.color_count())
            .map(|gamma| {
                (0..masses.len())
                    .map(|j| {
                        if coloring.color_of(j) == gamma {
                            color_masses[gamma].recip()
                        } else {
                            Ratio::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        MarkovKernel::new(masses.to_vec(), color_masses, matrix)
    }

    /// Conditional expectation onto a coloring, as an operator on the same
    /// space: `s(i,j) = 1_{color(i)=color(j)} / m_{color(j)}`.
    pub fn conditional_expectation(masses: &[Ratio], coloring: &Coloring) -> Result<Self> {
        let averaging = Self::averaging(masses, coloring)?;
        averaging.adjoint().compose(&averaging)
    }

    pub fn source_masses(&self) -> &[Ratio] {
        &self.source
    }

    pub fn target_masses(&self) -> &[Ratio] {
        &self.target
    }

    pub fn matrix(&self) -> &[Vec<Ratio>] {
        &self.matrix
    }

    pub fn apply(&self, f: &[Ratio]) -> Result<Vec<Ratio>> {
        if f.len() != self.source.len() {
            return Err(Error::DimensionMismatch {
                expected: self.source.len(),
                found: f.len(),
            });
        }
        let weighted: Vec<Ratio> = f.iter().zip(&self.source).map(|(x, m)| x * m).collect();
        Ok(self.matrix.iter().map(|row| sparse_dot(row, &weighted)).collect())
    }

    /// The adjoint, from target to source: `s*(j,i) = s(i,j)`.
    pub fn adjoint(&self) -> MarkovKernel {
        let matrix = (0..self.source.len())
            .map(|j| self.matrix.iter().map(|row| row[j].clone()).collect())
            .collect();
        MarkovKernel {
            source: self.target.clone(),
            target: self.source.clone(),
            matrix,
        }
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &MarkovKernel) -> Result<MarkovKernel> {
        if self.source != inner.target {
            return Err(Error::DimensionMismatch {
                expected: self.source.len(),
                found: inner.target.len(),
            });
        }
        let matrix = self
            .matrix
            .iter()
            .map(|row| {
                let mut out = vec![Ratio::zero(); inner.source.len()];
                for ((s, m), inner_row) in row.iter().zip(&self.source).zip(&inner.matrix) {
                    if s.is_zero() {
                        continue;
                    }
                    let weight = s * m;
                    for (acc, t) in out.iter_mut().zip(inner_row) {
                        if !t.is_zero() {
                            *acc += &weight * t;
                        }
                    }
                }
                out
            })
            .collect();
        Ok(MarkovKernel {
            source: inner.source.clone(),
            target: self.target.clone(),
            matrix,
        })
    }

    /// The plain matrix `M` with `Sf = M f`: `M(i,j) = s(i,j)·μ_s(j)`.
    pub fn operator_matrix(&self) -> Vec<Vec<Ratio>> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(&self.source).map(|(s, m)| s * m).collect())
            .collect()
    }

    /// For two uniform spaces of equal size `n`, the `n × n` doubly
    /// stochastic matrix `s(i,j) / n`.
    pub fn to_doubly_stochastic(&self) -> Option<Vec<Vec<Ratio>>> {
        let n = self.source.len();
        let uniform = Ratio::new(1.into(), n.into());
        let is_uniform = |masses: &[Ratio]| masses.len() == n && masses.iter().all(|m| *m == uniform);
        if n == 0 || !is_uniform(&self.source) || !is_uniform(&self.target) {
            return None;
        }
        Some(self.operator_matrix())
    }
}

fn sparse_dot(row: &[Ratio], x: &[Ratio]) -> Ratio {
    let mut total = Ratio::zero();
    for (a, b) in row.iter().zip(x) {
        if !a.is_zero() && !b.is_zero() {
            total += a * b;
        }
    }
    total
}

/// Samples used by the contraction smoke test in [`verify_markov`].
const CONTRACTION_SAMPLES: usize = 16;
const CONTRACTION_SEED: u64 = 0x6d61_726b_6f76;

/// Checks nonnegativity and both Markov conditions exactly, then checks
/// `‖Sf‖ ≤ ‖f‖` in `L²` on seeded random rational vectors in float mode.
pub fn verify_markov(kernel: &MarkovKernel) -> bool {
    if kernel.matrix.iter().flatten().any(Signed::is_negative) {
        return false;
    }
    let rows_fix_constants = kernel
        .matrix
        .iter()
        .all(|row| row.iter().zip(&kernel.source).map(|(s, m)| s * m).sum::<Ratio>().is_one());
    let adjoint_fixes_constants = (0..kernel.source.len()).all(|j| {
        kernel
            .matrix
            .iter()
            .zip(&kernel.target)
            .map(|(row, m)| &row[j] * m)
            .sum::<Ratio>()
            .is_one()
    });
    rows_fix_constants && adjoint_fixes_constants && contracts(kernel)
}

fn l2_norm(masses: &[Ratio], f: &[Ratio]) -> f64 {
    masses
        .iter()
        .zip(f)
        .map(|(m, x)| to_f64(m) * to_f64(x).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn contracts(kernel: &MarkovKernel) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(CONTRACTION_SEED);
    (0..CONTRACTION_SAMPLES).all(|_| {
        let f: Vec<Ratio> = kernel
            .source
            .iter()
            .map(|_| Ratio::new((rng.next_u32() % 201).into(), 100.into()) - int(1))
            .collect();
        let image = kernel.apply(&f).expect("sized for the source space");
        l2_norm(&kernel.target, &image) <= l2_norm(&kernel.source, &f) * (1.0 + 1e-12) + 1e-12
    })
}

/// Checks `T_W ∘ S = S ∘ T_U` exactly, where `S` maps functions on `U`'s
/// classes to functions on `W`'s classes. Kernels that are not Markov never
/// verify.
pub fn verify_intertwiner(kernel: &MarkovKernel, w: &StepKernel, u: &StepKernel) -> Result<bool> {
    if kernel.target.as_slice() != w.masses() {
        return Err(Error::DimensionMismatch {
            expected: w.class_count(),
            found: kernel.target.len(),
        });
    }
    if kernel.source.as_slice() != u.masses() {
        return Err(Error::DimensionMismatch {
            expected: u.class_count(),
            found: kernel.source.len(),
        });
    }
    if !verify_markov(kernel) {
        return Ok(false);
    }
    let tw = MarkovKernel::new(w.masses().to_vec(), w.masses().to_vec(), w.values().to_vec())?;
    let tu = MarkovKernel::new(u.masses().to_vec(), u.masses().to_vec(), u.values().to_vec())?;
    Ok(tw.compose(kernel)? == kernel.compose(&tu)?)
}

/// The intertwiner obtained by averaging over `U`'s fixpoint colors,
/// transporting along the quotient matching and pulling back to `W`'s classes:
/// `s(x, y) = 1_{σ(color_W(x)) = color_U(y)} / m_{color_U(y)}`.
///
/// Returns `None` when the fixpoint quotients are not isomorphic.
pub fn build_intertwiner(w: &StepKernel, u: &StepKernel) -> Result<Option<MarkovKernel>> {
    if !w.is_symmetric() || !u.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    let matched = quotients_isomorphic(w, u)?;
    let Some(sigma) = matched.matching else {
        return Ok(None);
    };
    let color_w = &matched.first.lift_map;
    let color_u = &matched.second.lift_map;
    let masses_u = matched.second.quotient.masses();
    let matrix = (0..w.class_count())
        .map(|x| {
            (0..u.class_count())
                .map(|y| {
                    if sigma[color_w[x]] == color_u[y] {
                        masses_u[color_u[y]].recip()
                    } else {
                        Ratio::zero()
                    }
                })
                .collect()
        })
        .collect();
    let kernel = MarkovKernel::new(u.masses().to_vec(), w.masses().to_vec(), matrix)?;
    if !verify_intertwiner(&kernel, w, u)? {
        return Err(Error::Defect(
            "intertwiner built from matched quotients fails verification".into(),
        ));
    }
    Ok(Some(kernel))
}

/// Float-mode Cesàro average `(1/n)·Σ_{k=1..n} (S∘S*)^k` as a plain matrix,
/// with residuals describing how close it is to a Markov projection.
#[derive(Debug, Clone, PartialEq)]
pub struct CesaroResult {
    pub matrix: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Largest `|row sum − 1|`.
    pub row_sum_residual: f64,
    /// Largest entry of `|P·P − P|`.
    pub idempotence_residual: f64,
}

/// Averages the powers of `S∘S*`, an operator on the target space of `S`.
pub fn cesaro_projection(kernel: &MarkovKernel, iterations: usize) -> Result<CesaroResult> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let square = kernel.compose(&kernel.adjoint())?;
    let step: Vec<Vec<f64>> = square
        .operator_matrix()
        .iter()
        .map(|row| row.iter().map(to_f64).collect())
        .collect();
    let n = step.len();
    let mut power = step.clone();
    let mut sum = step.clone();
    for _ in 1..iterations {
        power = multiply(&power, &step);
        for (acc, row) in sum.iter_mut().zip(&power) {
            for (a, p) in acc.iter_mut().zip(row) {
                *a += p;
            }
        }
    }
    let scale = iterations as f64;
    let matrix: Vec<Vec<f64>> = sum
        .into_iter()
        .map(|row| row.into_iter().map(|x| x / scale).collect())
        .collect();
    let row_sum_residual = matrix
        .iter()
        .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let squared = multiply(&matrix, &matrix);
    let idempotence_residual = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (squared[i][j] - matrix[i][j]).abs())
        .fold(0.0, f64::max);
    Ok(CesaroResult {
        matrix,
        iterations,
        row_sum_residual,
        idempotence_residual,
    })
}

fn multiply(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Block-averaging onto the refinement fixpoint, as an operator on the
/// kernel's own space.
pub fn fixpoint_projection(kernel: &StepKernel) -> MarkovKernel {
    let trace = refinement_fixpoint(kernel);
    MarkovKernel::conditional_expectation(kernel.masses(), trace.fixpoint())
        .expect("fixpoint coloring matches the kernel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{graph_to_graphon, ratio, FiniteGraph};

    fn graphon(g: &FiniteGraph) -> StepKernel {
        graph_to_graphon(g).unwrap()
    }

    #[test]
    fn identity_and_averaging_are_markov() {
        let masses = vec![ratio(1, 6), ratio(1, 3), ratio(1, 2)];
        assert!(verify_markov(&MarkovKernel::identity(&masses)));
        let coloring = Coloring::new(vec![0, 1, 0]).unwrap();
        let avg = MarkovKernel::averaging(&masses, &coloring).unwrap();
        assert!(verify_markov(&avg));
        assert!(verify_markov(&avg.adjoint()));
        assert!(verify_markov(
            &MarkovKernel::conditional_expectation(&masses, &coloring).unwrap()
        ));
    }

    #[test]
    fn negative_or_unbalanced_entries_fail() {
        let masses = vec![ratio(1, 2), ratio(1, 2)];
        let negative = MarkovKernel::new(
            masses.clone(),
            masses.clone(),
            vec![vec![int(3), int(-1)], vec![int(-1), int(3)]],
        )
        .unwrap();
        assert!(!verify_markov(&negative));
        let unbalanced = MarkovKernel::new(
            masses.clone(),
            masses.clone(),
            vec![vec![int(2), int(0)], vec![int(2), int(0)]],
        )
        .unwrap();
        assert!(!verify_markov(&unbalanced));
        assert!(MarkovKernel::new(masses.clone(), masses, vec![vec![int(1)]]).is_err());
    }

    #[test]
    fn intertwiner_examples() {
        let c6 = graphon(&FiniteGraph::cycle(6));
        let id = MarkovKernel::identity(c6.masses());
        assert!(verify_intertwiner(&id, &c6, &c6).unwrap());

        let k2 = graphon(&FiniteGraph::complete(2));
        let half = StepKernel::constant(ratio(1, 2), 1).unwrap();
        let pullback = MarkovKernel::new(
            half.masses().to_vec(),
            k2.masses().to_vec(),
            vec![vec![int(1)], vec![int(1)]],
        )
        .unwrap();
        assert!(verify_intertwiner(&pullback, &k2, &half).unwrap());

        let c5 = graphon(&FiniteGraph::cycle(5));
        let flat = MarkovKernel::new(
            c5.masses().to_vec(),
            c6.masses().to_vec(),
            vec![vec![int(1); 5]; 6],
        )
        .unwrap();
        assert!(verify_markov(&flat));
        assert!(!verify_intertwiner(&flat, &c6, &c5).unwrap());
        assert!(build_intertwiner(&c6, &c5).unwrap().is_none());
    }

    #[test]
    fn built_intertwiners() {
        let c6 = graphon(&FiniteGraph::cycle(6));
        let two_k3 = graphon(&FiniteGraph::complete(3).disjoint_union(&FiniteGraph::complete(3)));
        let s = build_intertwiner(&c6, &two_k3).unwrap().unwrap();
        assert!(s.matrix().iter().flatten().all(|x| *x == int(1)));

        let star = graphon(&FiniteGraph::star(3));
        let s = build_intertwiner(&star, &star).unwrap().unwrap();
        assert_eq!(s, fixpoint_projection(&star));
        assert!(verify_intertwiner(&s, &star, &star).unwrap());
    }

    #[test]
    fn composition_and_adjoint_stay_markov() {
        let masses = vec![ratio(1, 4); 4];
        let a = MarkovKernel::averaging(&masses, &Coloring::new(vec![0, 0, 1, 1]).unwrap()).unwrap();
        let b = MarkovKernel::averaging(&masses, &Coloring::new(vec![0, 1, 1, 2]).unwrap()).unwrap();
        let composite = a.compose(&b.adjoint()).unwrap();
        assert!(verify_markov(&composite));
        assert!(a.compose(&a).is_err());
    }

    #[test]
    fn cesaro_examples() {
        let masses = vec![ratio(1, 3), ratio(2, 3)];
        let id = MarkovKernel::identity(&masses);
        for n in [1, 5] {
            let result = cesaro_projection(&id, n).unwrap();
            assert!((result.matrix[0][0] - 1.0).abs() < 1e-12);
            assert!(result.matrix[0][1].abs() < 1e-12);
        }
        let masses = vec![ratio(1, 4); 4];
        let e = MarkovKernel::conditional_expectation(&masses, &Coloring::new(vec![0, 0, 1, 1]).unwrap()).unwrap();
        let result = cesaro_projection(&e, 1).unwrap();
        let expected = e.operator_matrix();
        for i in 0..4 {
            for j in 0..4 {
                assert!((result.matrix[i][j] - to_f64(&expected[i][j])).abs() < 1e-12);
            }
        }
        assert!(cesaro_projection(&e, 0).is_err());
    }

    #[test]
    fn cesaro_on_regular_pair_is_rank_one_average() {
        let c6 = graphon(&FiniteGraph::cycle(6));
        let two_k3 = graphon(&FiniteGraph::complete(3).disjoint_union(&FiniteGraph::complete(3)));
        let s = build_intertwiner(&c6, &two_k3).unwrap().unwrap();
        let result = cesaro_projection(&s, 64).unwrap();
        for row in &result.matrix {
            for x in row {
                assert!((x - 1.0 / 6.0).abs() < 1e-9);
            }
        }
        assert!(result.idempotence_residual < 1e-8);
    }

    #[test]
    fn doubly_stochastic_bridge() {
        let c6 = FiniteGraph::cycle(6);
        let two_k3 = FiniteGraph::complete(3).disjoint_union(&FiniteGraph::complete(3));
        let s = build_intertwiner(&graphon(&c6), &graphon(&two_k3)).unwrap().unwrap();
        let d = s.to_doubly_stochastic().unwrap();
        for row in &d {
            assert_eq!(row.iter().sum::<Ratio>(), int(1));
        }
        let star = graphon(&FiniteGraph::star(3));
        let half = StepKernel::constant(ratio(1, 2), 1).unwrap();
        assert!(MarkovKernel::identity(half.masses()).to_doubly_stochastic().is_some());
        assert!(fixpoint_projection(&star).to_doubly_stochastic().is_some());
        assert!(MarkovKernel::averaging(star.masses(), &Coloring::trivial(4))
            .unwrap()
            .to_doubly_stochastic()
            .is_none());
    }
}
