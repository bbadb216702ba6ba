//! Biregular blowups of a base graphon.
//!
//! Each base class `i` is split into `m_i` sub-classes of equal mass, and the
//! block between base classes `i` and `j` is filled with a matrix whose every
//! row mean and column mean equals `V(i, j)`. Any two such blowups of the same
//! base are fractionally isomorphic, which makes them a source of certified
//! positive pairs.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with `seed_from_u64`
//! on the per-block seed. A permutation is drawn by Fisher–Yates, swapping
//! position `i` (from the top down) with `next_u64() % (i + 1)`; convex weights
//! are `1 + next_u32() % 4`, normalized. Output is therefore a pure function
//! of the plan.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Coloring, Ratio, StepKernel};

/// Permutation matrices mixed into each square block by default.
pub const DEFAULT_PERMUTATIONS: usize = 3;

/// A matrix whose row and column means all equal `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiregularBlock {
    pub q: Ratio,
    pub entries: Vec<Vec<Ratio>>,
}

impl BiregularBlock {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries.first().map_or(0, Vec::len)
    }

    /// Exact check of the biregularity contract: entries in `[0, 1]` and every
    /// row and column mean equal to `q`.
    pub fn check_means(&self) -> bool {
        let (rows, cols) = (self.rows(), self.cols());
        if rows == 0 || cols == 0 || self.entries.iter().any(|r| r.len() != cols) {
            return false;
        }
        let unit = Ratio::one();
        if self.entries.iter().flatten().any(|x| x.is_negative() || *x > unit) {
            return false;
        }
        let row_target = &self.q * Ratio::from_integer(BigInt::from(cols));
        let col_target = &self.q * Ratio::from_integer(BigInt::from(rows));
        self.entries.iter().all(|r| r.iter().sum::<Ratio>() == row_target)
            && (0..cols).all(|c| self.entries.iter().map(|r| &r[c]).sum::<Ratio>() == col_target)
    }

    pub fn is_constant(&self) -> bool {
        self.entries.iter().flatten().all(|x| *x == self.q)
    }

    pub fn transpose(&self) -> BiregularBlock {
        let entries = (0..self.cols())
            .map(|c| self.entries.iter().map(|r| r[c].clone()).collect())
            .collect();
        BiregularBlock {
            q: self.q.clone(),
            entries,
        }
    }
}

fn random_permutation(rng: &mut ChaCha8Rng, m: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    perm
}

/// Draws a biregular block with [`DEFAULT_PERMUTATIONS`] permutations.
pub fn random_biregular_block(q: &Ratio, rows: usize, cols: usize, seed: u64, symmetric: bool) -> Result<BiregularBlock> {
    random_biregular_block_with(q, rows, cols, seed, symmetric, DEFAULT_PERMUTATIONS)
}

/// Square blocks are `q·m·D` for a random convex combination `D` of
/// permutation matrices (symmetrized as `(P + Pᵀ)/2` when `symmetric`), kept
/// only if every entry stays at most 1. Otherwise, and for rectangular
/// blocks, the block is the constant `q`.
pub fn random_biregular_block_with(
    q: &Ratio,
    rows: usize,
    cols: usize,
    seed: u64,
    symmetric: bool,
    permutations: usize,
) -> Result<BiregularBlock> {
    if q.is_negative() || *q > Ratio::one() {
        return Err(Error::QOutOfRange(q.to_string()));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("blocks need at least one row and column".into()));
    }
    if symmetric && rows != cols {
        return Err(Error::InvalidArgument("symmetric blocks must be square".into()));
    }
    let constant = BiregularBlock {
        q: q.clone(),
        entries: vec![vec![q.clone(); cols]; rows],
    };
    if rows != cols || permutations == 0 {
        return Ok(constant);
    }
    let m = rows;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perms: Vec<Vec<usize>> = (0..permutations).map(|_| random_permutation(&mut rng, m)).collect();
    let weights: Vec<u32> = (0..permutations).map(|_| 1 + rng.next_u32() % 4).collect();
    let total: u32 = weights.iter().sum();
    let mut mix = vec![vec![Ratio::zero(); m]; m];
    for (perm, &weight) in perms.iter().zip(&weights) {
        let lambda = Ratio::new(BigInt::from(weight), BigInt::from(total));
        for (r, &c) in perm.iter().enumerate() {
            if symmetric {
                let half = &lambda / Ratio::from_integer(BigInt::from(2));
                mix[r][c] += &half;
                mix[c][r] += &half;
            } else {
                mix[r][c] += &lambda;
            }
        }
    }
    let scale = q * Ratio::from_integer(BigInt::from(m));
    let entries: Vec<Vec<Ratio>> = mix
        .into_iter()
        .map(|row| row.into_iter().map(|d| &scale * d).collect())
        .collect();
    let unit = Ratio::one();
    if entries.iter().flatten().any(|x| *x > unit) {
        return Ok(constant);
    }
    let block = BiregularBlock {
        q: q.clone(),
        entries,
    };
    if !block.check_means() {
        return Err(Error::Defect("generated block is not biregular".into()));
    }
    Ok(block)
}

/// How to blow up a base graphon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlowupPlan {
    pub base: StepKernel,
    /// Sub-class count of each base class.
    pub splits: Vec<usize>,
    /// Symmetric table of per-block seeds.
    pub block_seeds: Vec<Vec<u64>>,
    /// Permutations mixed into each square block.
    pub permutations: usize,
}

impl BlowupPlan {
    pub fn new(base: StepKernel, splits: Vec<usize>, block_seeds: Vec<Vec<u64>>) -> Result<Self> {
        let plan = BlowupPlan {
            base,
            splits,
            block_seeds,
            permutations: DEFAULT_PERMUTATIONS,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// A plan whose seed table is derived from one master seed.
    pub fn seeded(base: StepKernel, splits: Vec<usize>, master_seed: u64) -> Result<Self> {
        let k = base.class_count();
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        let mut seeds = vec![vec![0u64; k]; k];
        for i in 0..k {
            for j in i..k {
                let seed = rng.next_u64();
                seeds[i][j] = seed;
                seeds[j][i] = seed;
            }
        }
        Self::new(base, splits, seeds)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.base.class_count();
        if !self.base.is_symmetric() {
            return Err(Error::AsymmetricKernel);
        }
        if self.splits.len() != k {
            return Err(Error::InvalidPlan(format!(
                "{} splits for {k} base classes",
                self.splits.len()
            )));
        }
        if self.splits.contains(&0) {
            return Err(Error::InvalidPlan("every split must be at least 1".into()));
        }
        if self.block_seeds.len() != k || self.block_seeds.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidPlan(format!("seed table must be {k}x{k}")));
        }
        for i in 0..k {
            for j in 0..i {
                if self.block_seeds[i][j] != self.block_seeds[j][i] {
                    return Err(Error::InvalidPlan(format!("seed table is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    /// Base class of every blown-up class.
    pub fn base_coloring(&self) -> Coloring {
        Coloring::new(
            self.splits
                .iter()
                .enumerate()
                .flat_map(|(i, &m)| std::iter::repeat_n(i, m))
                .collect(),
        )
        .expect("every base class has at least one sub-class")
    }

    /// The block between every pair of base classes.
    pub fn blocks(&self) -> Result<Vec<Vec<BiregularBlock>>> {
        self.validate()?;
        let k = self.base.class_count();
        let mut blocks: Vec<Vec<Option<BiregularBlock>>> = vec![vec![None; k]; k];
        for i in 0..k {
            for j in i..k {
                let block = random_biregular_block_with(
                    self.base.value(i, j),
                    self.splits[i],
                    self.splits[j],
                    self.block_seeds[i][j],
                    i == j,
                    self.permutations,
                )?;
                if i != j {
                    blocks[j][i] = Some(block.transpose());
                }
                blocks[i][j] = Some(block);
            }
        }
        Ok(blocks
            .into_iter()
            .map(|row| row.into_iter().map(|b| b.expect("filled above")).collect())
            .collect())
    }
}

/// Assembles the blown-up kernel.
pub fn blowup(plan: &BlowupPlan) -> Result<StepKernel> {
    let blocks = plan.blocks()?;
    let coloring = plan.base_coloring();
    let mut offset = Vec::with_capacity(plan.splits.len());
    let mut next = 0;
    for &m in &plan.splits {
        offset.push(next);
        next += m;
    }
    let masses: Vec<Ratio> = coloring
        .as_slice()
        .iter()
        .map(|&i| plan.base.mass(i) / Ratio::from_integer(BigInt::from(plan.splits[i])))
        .collect();
    let values: Vec<Vec<Ratio>> = (0..next)
        .map(|x| {
            let i = coloring.color_of(x);
            (0..next)
                .map(|y| {
                    let j = coloring.color_of(y);
                    blocks[i][j].entries[x - offset[i]][y - offset[j]].clone()
                })
                .collect()
        })
        .collect();
    StepKernel::new(masses, values, true)
}

/// Two blowups of the same base, fractionally isomorphic by construction.
pub fn fiso_pair(first: &BlowupPlan, second: &BlowupPlan) -> Result<(StepKernel, StepKernel)> {
    if first.base != second.base {
        return Err(Error::InvalidPlan("plans blow up different bases".into()));
    }
    Ok((blowup(first)?, blowup(second)?))
}
