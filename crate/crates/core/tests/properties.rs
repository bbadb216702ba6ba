mod common;

use common::{any_kernel, function, plan, symmetric_kernel};
use fractiso::blowup::{blowup, fiso_pair, BlowupPlan};
use fractiso::io::{kernel_to_json, parse_kernel};
use fractiso::markov::{build_intertwiner, verify_markov};
use fractiso::model::{apply_operator, inner_product, int, ratio};
use fractiso::quotient::{conditional_expectation, fixpoint_quotient};
use fractiso::refinement::{is_invariant, refinement_fixpoint};
use fractiso::signatures::{didm_equal, signature_tower};
use fractiso::trees::{combinator_to_tree, enumerate_free_trees, tree_density, tree_function, TreeCombinator};
use fractiso::{Ratio, StepKernel};
use proptest::prelude::*;

fn kernel_and_functions(max: usize) -> impl Strategy<Value = (StepKernel, Vec<Ratio>, Vec<Ratio>)> {
    symmetric_kernel(max).prop_flat_map(|w| {
        let k = w.class_count();
        (Just(w), function(k), function(k))
    })
}

fn same_base_plans() -> impl Strategy<Value = (BlowupPlan, BlowupPlan)> {
    plan(3, 3).prop_flat_map(|first| {
        let k = first.base.class_count();
        let base = first.base.clone();
        (Just(first), prop::collection::vec(1usize..=3, k), any::<u64>())
            .prop_map(move |(first, splits, seed)| {
                (first, BlowupPlan::seeded(base.clone(), splits, seed).unwrap())
            })
    })
}

/// A combinator whose `Extend` levels sit at or above what their argument needs.
fn combinator() -> impl Strategy<Value = TreeCombinator> {
    let leaf = Just(TreeCombinator::Unit);
    leaf.prop_recursive(4, 12, 3, |inner| {
        prop_oneof![
            (inner.clone(), 0usize..2).prop_map(|(f, slack)| {
                let level = f.factor_level() + slack;
                TreeCombinator::extend(f, level)
            }),
            prop::collection::vec(inner, 1..3).prop_map(TreeCombinator::Glue),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_self_adjoint((w, f, g) in kernel_and_functions(5)) {
        let tf = apply_operator(&w, &f).unwrap();
        let tg = apply_operator(&w, &g).unwrap();
        prop_assert_eq!(inner_product(w.masses(), &tf, &g), inner_product(w.masses(), &f, &tg));
    }

    #[test]
    fn operator_is_linear((w, f, g) in kernel_and_functions(5), a in -3i64..=3, b in 1i64..=3) {
        let (a, b) = (int(a), ratio(1, b));
        let mix: Vec<Ratio> = f.iter().zip(&g).map(|(x, y)| &a * x + &b * y).collect();
        let tf = apply_operator(&w, &f).unwrap();
        let tg = apply_operator(&w, &g).unwrap();
        let expected: Vec<Ratio> = tf.iter().zip(&tg).map(|(x, y)| &a * x + &b * y).collect();
        prop_assert_eq!(apply_operator(&w, &mix).unwrap(), expected);
    }

    #[test]
    fn intertwiner_intertwines((p, q) in same_base_plans(), seed in 0u64..1000) {
        let (w, u) = fiso_pair(&p, &q).unwrap();
        let s = build_intertwiner(&w, &u).unwrap().expect("blowups of one base are equivalent");
        prop_assert!(verify_markov(&s));
        // Check T_W ∘ S = S ∘ T_U and the adjoint relation on concrete vectors,
        // independently of the library's own verifier.
        let f: Vec<Ratio> = (0..u.class_count()).map(|i| ratio(((seed + 3 * i as u64) % 7) as i64 - 3, 2)).collect();
        let lhs = apply_operator(&w, &s.apply(&f).unwrap()).unwrap();
        let rhs = s.apply(&apply_operator(&u, &f).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        let g: Vec<Ratio> = (0..w.class_count()).map(|i| ratio(((seed + 5 * i as u64) % 5) as i64, 3)).collect();
        let adjoint = s.adjoint();
        let lhs = apply_operator(&u, &adjoint.apply(&g).unwrap()).unwrap();
        let rhs = adjoint.apply(&apply_operator(&w, &g).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        // S preserves constants and the pairing ⟨Sf, g⟩ = ⟨f, S*g⟩.
        prop_assert_eq!(
            inner_product(w.masses(), &s.apply(&f).unwrap(), &g),
            inner_product(u.masses(), &f, &adjoint.apply(&g).unwrap())
        );
    }

    #[test]
    fn quotient_is_idempotent(w in symmetric_kernel(5)) {
        let trace = refinement_fixpoint(&w);
        let q = fixpoint_quotient(&w, 0).unwrap();
        let qq = fixpoint_quotient(&q.quotient, 0).unwrap();
        prop_assert_eq!(&qq.quotient, &q.quotient);
        let e = conditional_expectation(&w, trace.fixpoint()).unwrap();
        prop_assert_eq!(&conditional_expectation(&e, trace.fixpoint()).unwrap(), &e);
        prop_assert_eq!(q.lift(w.masses()).unwrap(), e);
    }

    #[test]
    fn fixpoint_is_invariant_and_levels_refine(w in any_kernel(5)) {
        let trace = refinement_fixpoint(&w);
        prop_assert!(is_invariant(&w, trace.fixpoint()));
        for pair in trace.levels.windows(2) {
            prop_assert!(pair[1].refines(&pair[0]));
        }
    }

    #[test]
    fn kernel_json_round_trips(w in any_kernel(4)) {
        let text = kernel_to_json(&w);
        let parsed = parse_kernel(&text).unwrap();
        prop_assert_eq!(&parsed, &w);
        prop_assert_eq!(kernel_to_json(&parsed), text);
    }

    #[test]
    fn non_canonical_json_canonicalizes(w in symmetric_kernel(3), scale in 2i64..5) {
        // Unreduced fractions parse to the same kernel.
        let unreduced = |r: &Ratio| format!("\"{}/{}\"", r.numer() * scale, r.denom() * scale);
        let row = |v: &[Ratio]| format!("[{}]", v.iter().map(unreduced).collect::<Vec<_>>().join(","));
        let text = format!(
            "{{\"symmetric\":true,\"matrix\":[{}],\"masses\":{}}}",
            w.values().iter().map(|r| row(r)).collect::<Vec<_>>().join(","),
            row(w.masses())
        );
        let parsed = parse_kernel(&text).unwrap();
        prop_assert_eq!(kernel_to_json(&parsed), kernel_to_json(&w));
    }

    #[test]
    fn combinators_compute_tree_functions(w in symmetric_kernel(4), expr in combinator(), slack in 0usize..2) {
        let tree = combinator_to_tree(&expr).unwrap();
        let level = expr.factor_level() + slack;
        let signatures = signature_tower(&w, level).pop().unwrap();
        let values = tree_function(&w, &tree);
        for (class, signature) in signatures.iter().enumerate() {
            prop_assert_eq!(&expr.evaluate(signature).unwrap(), &values[class]);
        }
    }

    #[test]
    fn blowups_preserve_tree_densities(p in plan(3, 3)) {
        let w = blowup(&p).unwrap();
        prop_assert!(didm_equal(&w, &p.base).equal);
        for tree in enumerate_free_trees(5).unwrap() {
            prop_assert_eq!(tree_density(&w, &tree).unwrap(), tree_density(&p.base, &tree).unwrap());
        }
    }

    #[test]
    fn class_order_is_irrelevant(w in symmetric_kernel(5), seed in any::<u64>()) {
        let k = w.class_count();
        let mut order: Vec<usize> = (0..k).collect();
        // Rotate and swap deterministically from the seed.
        order.rotate_left((seed % k as u64) as usize);
        if k > 1 {
            order.swap(0, (seed / 7 % k as u64) as usize);
        }
        let shuffled = w.permuted(&order).unwrap();
        prop_assert!(didm_equal(&w, &shuffled).equal);
        prop_assert_eq!(
            fixpoint_quotient(&w, 0).unwrap().quotient,
            fixpoint_quotient(&shuffled, 0).unwrap().quotient
        );
    }
}
