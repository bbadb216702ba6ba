//! Exact fractional isomorphism for step graphons and finite graphs.
//!
//! Two kernels are fractionally isomorphic when any (hence all) of the
//! following agree: their iterated degree measure distributions, their color
//! refinement quotients, their tree densities, or there is a Markov kernel
//! intertwining their operators. All arithmetic is over exact rationals.

pub mod blowup;
pub mod error;
pub mod io;
pub mod markov;
pub mod model;
pub mod quotient;
pub mod refinement;
pub mod report;
pub mod signatures;
pub mod trees;

pub use error::{Error, Result};
pub use model::{graph_to_graphon, Coloring, FiniteGraph, Ratio, StepKernel};
pub use refinement::{refinement_fixpoint, RefinementTrace};
pub use signatures::{didm, didm_equal, Didm, IdmSignature};
pub use trees::RootedTree;
