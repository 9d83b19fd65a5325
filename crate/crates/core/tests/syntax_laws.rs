//! Renamings preserve contexthood, words of renamed terms, and printing round trips.

use std::collections::HashMap;

use proptest::prelude::*;
use ualg_core::context::{holds, terminal_context, ContextStructure, Letter};
use ualg_core::syntax::*;
use ualg_core::Sym;

const SIG: &str = "theory Two\nstructure cartesian\nsort M\nop f : M M -> M\nop g : M -> M\nop k : -> M\n";

fn letters() -> Vec<Letter> {
    ["x", "y", "z"].iter().map(|n| Letter::new(n, "M")).collect()
}

fn term() -> impl Strategy<Value = Term> {
    let m = Sym::new("M");
    let leaf = prop_oneof![
        4 => (0usize..3).prop_map(|i| Term::var(letters()[i])),
        1 => Just(Term::constant(Sym::new("k"), Sym::new("M"))),
    ];
    leaf.prop_recursive(2, 8, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(move |a| Term::app(Sym::new("g"), m, vec![a])),
            (inner.clone(), inner).prop_map(move |(a, b)| Term::app(Sym::new("f"), m, vec![a, b])),
        ]
    })
}

fn structure() -> impl Strategy<Value = ContextStructure> {
    prop::sample::select(ContextStructure::modelable().to_vec())
}

/// Images for `x y z` over fresh letters `p q r`, so a renaming never captures.
fn images() -> impl Strategy<Value = Vec<Term>> {
    let fresh: Vec<Letter> = ["p", "q", "r"].iter().map(|n| Letter::new(n, "M")).collect();
    prop::collection::vec(term(), 3).prop_map(move |ts| ts.iter().map(|t| t.rename(&letters(), &fresh)).collect())
}

proptest! {
    #[test]
    fn renamed_words_concatenate(t in term(), imgs in images()) {
        let s: HashMap<Letter, Term> = letters().into_iter().zip(imgs.iter().cloned()).collect();
        let renamed = apply_renaming(&s, &t).unwrap();
        let expected: Vec<Letter> = t.tau().iter().flat_map(|l| s[l].tau()).collect();
        prop_assert_eq!(tau(&renamed), expected);
    }

    #[test]
    fn renamings_preserve_contexts(r in structure(), t in term(), imgs in images(), sample in prop::sample::subsequence(vec!["p", "q", "r"], 0..=3)) {
        let Some(v) = terminal_context(&r, &t.tau()) else { return Ok(()) };
        let s: HashMap<Letter, Term> = letters().into_iter().zip(imgs).filter(|(l, _)| v.contains(l)).collect();
        let Some(ws) = v.iter().map(|l| terminal_context(&r, &s[l].tau())).collect::<Option<Vec<_>>>() else { return Ok(()) };
        let sampled: Vec<Letter> = sample.iter().map(|n| Letter::new(n, "M")).collect();
        let candidates = terminal_context(&r, &ws.concat()).into_iter().chain([sampled]);
        for w in candidates {
            if is_r_renaming(&r, &s, &v, &w, &ws).unwrap() {
                prop_assert!(is_r_context(&r, &w, &apply_renaming(&s, &t).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn printing_round_trips(r in structure(), sides in prop::collection::vec((term(), term()), 0..=4)) {
        let base = parse_theory(SIG).unwrap();
        let mut th = base.with_structure(r.clone());
        for (i, (lhs, rhs)) in sides.into_iter().enumerate() {
            let Some(ctx) = terminal_context(&r, &lhs.tau()) else { continue };
            if holds(&r, &ctx, &rhs.tau()).unwrap() {
                th.equations.push(Equation::new(format!("e{i}"), lhs, rhs, ctx));
            }
        }
        let printed = th.to_string();
        prop_assert_eq!(parse_theory(&printed).unwrap(), th);
    }
}
