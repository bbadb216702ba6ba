//! The `fiso` decision pipeline: an authoritative distribution comparison
//! cross-checked by independent characterizations.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::format_ratio;
use crate::markov::{build_intertwiner, verify_intertwiner};
use crate::model::{Ratio, StepKernel};
use crate::quotient::{quotients_isomorphic, QuotientResult};
use crate::refinement::{refinement_fixpoint, RefinementTrace};
use crate::signatures::{didm, didm_equal};
use crate::trees::{find_witness_tree, tree_density};

pub const DEFAULT_WITNESS_BOUND: usize = 8;

/// Characterizations that may be skipped. The distribution comparison is
/// authoritative and always runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Oracle {
    Quotient,
    Intertwiner,
    Witness,
}

impl FromStr for Oracle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quotient" => Ok(Oracle::Quotient),
            "intertwiner" => Ok(Oracle::Intertwiner),
            "witness" => Ok(Oracle::Witness),
            "didm" => Err(Error::InvalidArgument(
                "the distribution comparison decides the verdict and cannot be skipped".into(),
            )),
            other => Err(Error::InvalidArgument(format!(
                "unknown check {other:?} (expected quotient, intertwiner or witness)"
            ))),
        }
    }
}

impl fmt::Display for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Oracle::Quotient => "quotient",
            Oracle::Intertwiner => "intertwiner",
            Oracle::Witness => "witness",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FisoOptions {
    pub witness_bound: usize,
    pub skip: Vec<Oracle>,
    /// Run the cross-checks on separate threads.
    pub parallel: bool,
}

impl Default for FisoOptions {
    fn default() -> Self {
        FisoOptions {
            witness_bound: DEFAULT_WITNESS_BOUND,
            skip: Vec::new(),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KernelJson {
    pub masses: Vec<String>,
    pub matrix: Vec<Vec<String>>,
    pub symmetric: bool,
}

impl KernelJson {
    pub fn from_kernel(kernel: &StepKernel) -> Self {
        KernelJson {
            masses: kernel.masses().iter().map(format_ratio).collect(),
            matrix: kernel
                .values()
                .iter()
                .map(|row| row.iter().map(format_ratio).collect())
                .collect(),
            symmetric: kernel.is_symmetric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientJson {
    pub kernel: KernelJson,
    pub signature_labels: Vec<String>,
    pub label_level: usize,
    pub lift_map: Vec<usize>,
}

impl QuotientJson {
    pub fn from_result(result: &QuotientResult) -> Self {
        QuotientJson {
            kernel: KernelJson::from_kernel(&result.quotient),
            signature_labels: result.signature_labels.iter().map(|s| s.to_text()).collect(),
            label_level: result.label_level,
            lift_map: result.lift_map.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceJson {
    /// Color of every class at each level, starting from the trivial coloring.
    pub levels: Vec<Vec<usize>>,
    pub stabilized_at: usize,
    pub fixpoint_colors: usize,
}

impl TraceJson {
    pub fn from_trace(trace: &RefinementTrace) -> Self {
        TraceJson {
            levels: trace.levels.iter().map(|c| c.as_slice().to_vec()).collect(),
            stabilized_at: trace.stabilized_at,
            fixpoint_colors: trace.fixpoint().color_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DidmSection {
    pub equal: bool,
    pub levels_compared: usize,
    pub distinguishing_level: Option<usize>,
    /// Both distributions at the distinguishing level, or at the deepest
    /// compared level when they agree.
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotientSection {
    pub isomorphic: bool,
    pub matching: Option<Vec<usize>>,
    pub first: QuotientJson,
    pub second: QuotientJson,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntertwinerSection {
    pub found: bool,
    pub verified: bool,
    /// Rows indexed by the first kernel's classes, columns by the second's.
    pub matrix: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessSection {
    pub bound: usize,
    /// `None` either because the kernels are equivalent or because the
    /// search abstained below the bound.
    pub tree: Option<String>,
    pub first_density: Option<String>,
    pub second_density: Option<String>,
    pub abstained: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FisoReport {
    pub fractionally_isomorphic: bool,
    pub didm: DidmSection,
    pub quotient: Option<QuotientSection>,
    pub intertwiner: Option<IntertwinerSection>,
    pub witness: Option<WitnessSection>,
    pub refinement: [TraceJson; 2],
    pub skipped: Vec<String>,
}

impl FisoReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn disagreement(check: Oracle, verdict: bool, claim: bool) -> Error {
    Error::OracleDisagreement(format!(
        "{check} check says {} but the distribution comparison says {}",
        if claim { "equivalent" } else { "not equivalent" },
        if verdict { "equivalent" } else { "not equivalent" },
    ))
}

fn quotient_check(w: &StepKernel, u: &StepKernel, verdict: bool) -> Result<QuotientSection> {
    let matched = quotients_isomorphic(w, u)?;
    if matched.isomorphic != verdict {
        return Err(disagreement(Oracle::Quotient, verdict, matched.isomorphic));
    }
    Ok(QuotientSection {
        isomorphic: matched.isomorphic,
        matching: matched.matching.clone(),
        first: QuotientJson::from_result(&matched.first),
        second: QuotientJson::from_result(&matched.second),
    })
}

fn intertwiner_check(w: &StepKernel, u: &StepKernel, verdict: bool) -> Result<IntertwinerSection> {
    let kernel = build_intertwiner(w, u)?;
    if kernel.is_some() != verdict {
        return Err(disagreement(Oracle::Intertwiner, verdict, kernel.is_some()));
    }
    let verified = match &kernel {
        Some(k) => verify_intertwiner(k, w, u)?,
        None => false,
    };
    Ok(IntertwinerSection {
        found: kernel.is_some(),
        verified,
        matrix: kernel.map(|k| {
            k.matrix()
                .iter()
                .map(|row| row.iter().map(format_ratio).collect())
                .collect()
        }),
    })
}

fn witness_check(w: &StepKernel, u: &StepKernel, verdict: bool, bound: usize) -> Result<WitnessSection> {
    let tree = find_witness_tree(w, u, bound)?;
    if verdict && tree.is_some() {
        return Err(disagreement(Oracle::Witness, verdict, false));
    }
    let densities = |t| -> Result<(Ratio, Ratio)> { Ok((tree_density(w, t)?, tree_density(u, t)?)) };
    let (first_density, second_density) = match &tree {
        Some(t) => {
            let (a, b) = densities(t)?;
            (Some(format_ratio(&a)), Some(format_ratio(&b)))
        }
        None => (None, None),
    };
    Ok(WitnessSection {
        bound,
        abstained: !verdict && tree.is_none(),
        tree: tree.map(|t| t.to_parens()),
        first_density,
        second_density,
    })
}

fn join<T>(handle: std::thread::ScopedJoinHandle<'_, Result<T>>) -> Result<T> {
    handle
        .join()
        .unwrap_or_else(|_| Err(Error::Defect("cross-check thread panicked".into())))
}

/// Decides fractional isomorphism of two symmetric kernels and cross-checks
/// the verdict. Any cross-check contradicting the verdict is an error.
pub fn run_fiso(w: &StepKernel, u: &StepKernel, options: &FisoOptions) -> Result<FisoReport> {
    if !w.is_symmetric() || !u.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    let comparison = didm_equal(w, u);
    let verdict = comparison.equal;
    let shown_level = comparison
        .distinguishing_level
        .unwrap_or(comparison.levels_compared);
    let didm_section = DidmSection {
        equal: verdict,
        levels_compared: comparison.levels_compared,
        distinguishing_level: comparison.distinguishing_level,
        first: didm(w, shown_level).to_text(),
        second: didm(u, shown_level).to_text(),
    };

    let runs = |oracle: Oracle| !options.skip.contains(&oracle);
    let quotient = || runs(Oracle::Quotient).then(|| quotient_check(w, u, verdict)).transpose();
    let intertwiner = || {
        runs(Oracle::Intertwiner)
            .then(|| intertwiner_check(w, u, verdict))
            .transpose()
    };
    let witness = || {
        runs(Oracle::Witness)
            .then(|| witness_check(w, u, verdict, options.witness_bound))
            .transpose()
    };

    let (quotient, intertwiner, witness) = if options.parallel {
        std::thread::scope(|scope| {
            let q = scope.spawn(quotient);
            let i = scope.spawn(intertwiner);
            let t = scope.spawn(witness);
            (join(q), join(i), join(t))
        })
    } else {
        (quotient(), intertwiner(), witness())
    };

    let mut skipped: Vec<String> = options.skip.iter().map(Oracle::to_string).collect();
    skipped.sort();
    skipped.dedup();
    Ok(FisoReport {
        fractionally_isomorphic: verdict,
        didm: didm_section,
        quotient: quotient?,
        intertwiner: intertwiner?,
        witness: witness?,
        refinement: [
            TraceJson::from_trace(&refinement_fixpoint(w)),
            TraceJson::from_trace(&refinement_fixpoint(u)),
        ],
        skipped,
    })
}
