//! The four context-structure conditions, modelability, terminal contexts and
//! the correspondence with structure categories.

use std::collections::BTreeSet;

use proptest::prelude::*;
use ualg_core::context::*;
use ualg_core::finord::{in_family, FinFn};

const POOL: [&str; 5] = ["a", "b", "c", "d", "e"];

fn letter(i: usize) -> Letter {
    Letter::new(POOL[i], "_")
}

fn word() -> impl Strategy<Value = Vec<Letter>> {
    prop::collection::vec((0..POOL.len()).prop_map(letter), 0..=4)
}

fn context() -> impl Strategy<Value = Vec<Letter>> {
    Just((0..POOL.len()).map(letter).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_flat_map(|all| (0..=4usize).prop_map(move |n| all[..n].to_vec()))
}

fn structure() -> impl Strategy<Value = ContextStructure> {
    prop::sample::select(ContextStructure::modelable().to_vec())
}

/// All words of length at most `len` over `letters`.
fn words(letters: &[Letter], len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..len {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<Letter>| {
                letters.iter().map(move |l| {
                    let mut w = w.clone();
                    w.push(*l);
                    w
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn contexts(letters: &[Letter], len: usize) -> Vec<Vec<Letter>> {
    words(letters, len).into_iter().filter(|w| !has_repeats(w)).collect()
}

proptest! {
    #[test]
    fn reflexive_and_covering(r in structure(), c in context(), v in word()) {
        prop_assert!(holds(&r, &c, &c).unwrap());
        if holds(&r, &c, &v).unwrap() {
            prop_assert!(v.iter().all(|l| c.contains(l)));
        }
    }

    #[test]
    fn vertical_composition(r in structure(), c in context(), vs in prop::collection::vec(context(), 0..=3), picks in prop::collection::vec(prop::collection::vec(0usize..4, 0..=3), 3)) {
        let vs: Vec<Vec<Letter>> = vs.into_iter().map(|v| v[..v.len().min(2)].to_vec()).collect();
        // wᵢ is read off vᵢ so that vᵢ R wᵢ has a fair chance of holding.
        let ws: Vec<Vec<Letter>> = vs
            .iter()
            .zip(&picks)
            .map(|(v, p)| if v.is_empty() { Vec::new() } else { p.iter().map(|&i| v[i % v.len()]).collect() })
            .collect();
        let premise = holds(&r, &c, &vs.concat()).unwrap()
            && vs.iter().zip(&ws).all(|(v, w)| holds(&r, v, w).unwrap());
        if premise {
            prop_assert!(holds(&r, &c, &ws.concat()).unwrap());
        }
    }

    #[test]
    fn renaming_stability(r in structure(), c in context(), picks in prop::collection::vec(0usize..4, 0..=4), images in prop::collection::vec(word(), 4), d in context()) {
        let v: Vec<Letter> = if c.is_empty() { Vec::new() } else { picks.iter().map(|&i| c[i % c.len()]).collect() };
        let images: Vec<Vec<Letter>> = images.into_iter().map(|w| w[..w.len().min(2)].to_vec()).collect();
        let s = |w: &[Letter]| -> Vec<Letter> {
            w.iter().flat_map(|l| images[c.iter().position(|x| x == l).unwrap()].clone()).collect()
        };
        let sc = s(&c);
        // Try the terminal context of s(c) as well as the sampled one.
        let mut ds = vec![d];
        ds.extend(terminal_context(&r, &sc));
        for d in ds {
            if holds(&r, &c, &v).unwrap() && holds(&r, &d, &sc).unwrap() {
                prop_assert!(holds(&r, &d, &s(&v)).unwrap(), "{} R {}", show_word(&d), show_word(&s(&v)));
            }
        }
    }

    #[test]
    fn decompositions_factor(r in structure(), c in context(), picks in prop::collection::vec(0usize..4, 0..=5), cuts in prop::collection::vec(0usize..=5, 0..=2)) {
        let v: Vec<Letter> = if c.is_empty() { Vec::new() } else { picks.iter().map(|&i| c[i % c.len()]).collect() };
        let mut cuts: Vec<usize> = cuts.into_iter().map(|k| k.min(v.len())).collect();
        cuts.sort_unstable();
        let mut pieces = Vec::new();
        let mut start = 0;
        for k in cuts.into_iter().chain([v.len()]) {
            pieces.push(v[start..k].to_vec());
            start = k;
        }
        if holds(&r, &c, &v).unwrap() {
            let cs = modelable_decompose(&r, &c, &pieces).unwrap();
            prop_assert!(holds(&r, &c, &cs.concat()).unwrap());
            for (ci, vi) in cs.iter().zip(&pieces) {
                prop_assert!(holds(&r, ci, vi).unwrap());
            }
        } else {
            prop_assert!(modelable_decompose(&r, &c, &pieces).is_err());
        }
    }

    /// For surjective θ in the structure category, `v¹⋯vⁿ` and `v^θ(1)⋯v^θ(m)`
    /// are governed by the same contexts.
    #[test]
    fn surjective_reindexing_preserves_contexts(r in structure(), raw in prop::collection::vec(0usize..3, 1..=3), n in 1usize..=3, vs in prop::collection::vec(prop::collection::vec(0usize..4, 0..=2), 3)) {
        let theta = FinFn::new(n, raw.iter().map(|i| i % n + 1).collect()).unwrap();
        prop_assume!(theta.is_surjective() && delta_of(&r, &theta).unwrap());
        let vs: Vec<Vec<Letter>> = vs[..n].iter().map(|v| v.iter().map(|&i| letter(i)).collect()).collect();
        let whole = vs.concat();
        let pulled: Vec<Letter> = theta.images().iter().flat_map(|&j| vs[j - 1].clone()).collect();
        for w in contexts(&(0..4).map(letter).collect::<Vec<_>>(), 4) {
            prop_assert_eq!(holds(&r, &w, &whole).unwrap(), holds(&r, &w, &pulled).unwrap(), "context {}", show_word(&w));
        }
    }
}

#[test]
fn structure_categories_match_named_families() {
    for r in ContextStructure::modelable() {
        let family = r.family();
        for theta in FinFn::all_up_to(4) {
            assert_eq!(delta_of(&r, &theta).unwrap(), in_family(&family, &theta).unwrap(), "{r} at {theta}");
        }
    }
}

#[test]
fn terminal_contexts_are_terminal() {
    let letters: Vec<Letter> = (0..3).map(letter).collect();
    let ws = contexts(&letters, 4);
    for r in ContextStructure::modelable() {
        let mut r_words = 0;
        for v in words(&letters, 4) {
            let governed: BTreeSet<Vec<Letter>> = ws.iter().filter(|w| holds(&r, w, &v).unwrap()).cloned().collect();
            if governed.is_empty() {
                assert_eq!(terminal_context(&r, &v), None, "{r}: {} is no R-word", show_word(&v));
                continue;
            }
            r_words += 1;
            let t =
                terminal_context(&r, &v).unwrap_or_else(|| panic!("{r}: no terminal context for {}", show_word(&v)));
            for w in &ws {
                assert_eq!(
                    holds(&r, w, &t).unwrap(),
                    governed.contains(w),
                    "{r}: v = {}, w = {}",
                    show_word(&v),
                    show_word(w)
                );
            }
        }
        assert!(r_words > 0);
    }
}
