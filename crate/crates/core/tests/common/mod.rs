#![allow(dead_code)]

use std::collections::BTreeSet;

use fractiso::blowup::BlowupPlan;
use fractiso::model::{int, ratio};
use fractiso::{FiniteGraph, Ratio, StepKernel};
use proptest::prelude::*;

/// All connected graphs on exactly `n` vertices, one per isomorphism class,
/// found by brute force over edge subsets and vertex permutations.
pub fn connected_graphs(n: usize) -> Vec<FiniteGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let perms = permutations(n);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = FiniteGraph::new(n, edges.clone()).unwrap();
        if !g.is_connected() {
            continue;
        }
        let canonical = perms
            .iter()
            .map(|p| {
                let mut relabeled: Vec<(usize, usize)> = edges
                    .iter()
                    .map(|&(u, v)| (p[u].min(p[v]), p[u].max(p[v])))
                    .collect();
                relabeled.sort();
                relabeled
            })
            .min()
            .unwrap();
        if seen.insert(canonical) {
            out.push(g);
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for slot in 0..n {
            let mut q = p.clone();
            q.insert(slot, n - 1);
            out.push(q);
        }
    }
    out
}

/// All set partitions of `0..k` as color vectors.
pub fn set_partitions(k: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, k: usize, current: &mut Vec<usize>, colors: usize, out: &mut Vec<Vec<usize>>) {
        if i == k {
            out.push(current.clone());
            return;
        }
        for c in 0..=colors {
            current.push(c);
            go(i + 1, k, current, colors.max(c + 1), out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    go(0, k, &mut Vec::new(), 0, &mut out);
    out
}

fn normalize(weights: &[u32]) -> Vec<Ratio> {
    let total: u32 = weights.iter().sum();
    weights.iter().map(|&w| ratio(w as i64, total as i64)).collect()
}

/// Symmetric step kernels with 1..=`max_classes` classes and small-denominator values.
pub fn symmetric_kernel(max_classes: usize) -> impl Strategy<Value = StepKernel> {
    (1..=max_classes, 1u32..=4).prop_flat_map(|(k, denom)| {
        (
            prop::collection::vec(1u32..=4, k),
            prop::collection::vec(0..=denom, k * (k + 1) / 2),
        )
            .prop_map(move |(weights, upper)| {
                let mut values = vec![vec![int(0); k]; k];
                let mut next = upper.into_iter();
                for i in 0..k {
                    for j in i..k {
                        let v = ratio(next.next().unwrap() as i64, denom as i64);
                        values[i][j] = v.clone();
                        values[j][i] = v;
                    }
                }
                StepKernel::new(normalize(&weights), values, true).unwrap()
            })
    })
}

/// Possibly asymmetric kernels.
pub fn any_kernel(max_classes: usize) -> impl Strategy<Value = StepKernel> {
    (1..=max_classes, 1u32..=3).prop_flat_map(|(k, denom)| {
        (prop::collection::vec(1u32..=4, k), prop::collection::vec(0..=denom, k * k)).prop_map(
            move |(weights, entries)| {
                let values = entries
                    .chunks(k)
                    .map(|row| row.iter().map(|&v| ratio(v as i64, denom as i64)).collect())
                    .collect();
                StepKernel::new(normalize(&weights), values, false).unwrap()
            },
        )
    })
}

/// Seeded blowup plan of a random base.
pub fn plan(max_base: usize, max_split: usize) -> impl Strategy<Value = BlowupPlan> {
    symmetric_kernel(max_base).prop_flat_map(move |base| {
        let k = base.class_count();
        (prop::collection::vec(1..=max_split, k), any::<u64>())
            .prop_map(move |(splits, seed)| BlowupPlan::seeded(base.clone(), splits, seed).unwrap())
    })
}

/// Test functions with small rational values.
pub fn function(len: usize) -> impl Strategy<Value = Vec<Ratio>> {
    prop::collection::vec((-4i64..=4, 1i64..=3), len)
        .prop_map(|v| v.into_iter().map(|(n, d)| ratio(n, d)).collect())
}

pub fn graphon(g: &FiniteGraph) -> StepKernel {
    fractiso::graph_to_graphon(g).unwrap()
}
