//! Context-structure checks: the correspondence with structure categories,
//! the four defining conditions and terminal contexts.

use std::collections::HashMap;

use rand::Rng;

use super::{contexts, rng, words, Tally};
use crate::context::{delta_of, holds, show_word, terminal_context, ContextStructure, Letter};
use crate::finord::{in_family, FinFn};

fn letters(n: usize) -> Vec<Letter> {
    ["x", "y", "z", "u"].iter().take(n).map(|s| Letter::new(s, "_")).collect()
}

fn rel(r: &ContextStructure, c: &[Letter], v: &[Letter]) -> bool {
    holds(r, c, v).expect("named structures decide every word")
}

/// `delta_of` against the paired family for every function with `dom, cod <= max_n`.
pub fn bijection_check(max_n: usize) -> Tally {
    let mut tally = Tally::default();
    for r in ContextStructure::modelable() {
        let family = r.family();
        for theta in FinFn::all_up_to(max_n) {
            let via_words = delta_of(&r, &theta).expect("named structures decide every word");
            let direct = in_family(&family, &theta).expect("named families decide membership");
            tally.check(via_words == direct, || format!("{r} at {theta}: words say {via_words}, family says {direct}"));
        }
    }
    tally
}

/// Conditions 1 to 4 over words and contexts of length at most `len` on three
/// letters. Condition 4 samples `samples` renamings per governed pair.
pub fn axiom_check(len: usize, samples: usize) -> Tally {
    let mut tally = Tally::default();
    let abc = letters(3);
    let cs = contexts(&abc, len);
    let ws = words(&abc, len);
    let mut gen = rng(3);
    for r in ContextStructure::modelable() {
        for c in &cs {
            tally.check(rel(&r, c, c), || format!("{r}: {} does not govern itself", show_word(c)));
            for v in &ws {
                if rel(&r, c, v) {
                    let covered = v.iter().all(|l| c.contains(l));
                    tally.check(covered, || format!("{r}: {} R {} uses a foreign letter", show_word(c), show_word(v)));
                }
            }
        }
        vertical(&r, &cs, &ws, len, &mut tally);
        for c in &cs {
            for v in ws.iter().filter(|v| rel(&r, c, v)) {
                for _ in 0..samples {
                    let images: Vec<Vec<Letter>> = c
                        .iter()
                        .map(|_| (0..gen.gen_range(0..=2)).map(|_| abc[gen.gen_range(0..abc.len())]).collect())
                        .collect();
                    let s = |w: &[Letter]| -> Vec<Letter> {
                        w.iter().flat_map(|l| images[c.iter().position(|x| x == l).unwrap()].clone()).collect()
                    };
                    let (sc, sv) = (s(c), s(v));
                    for d in cs.iter().filter(|d| rel(&r, d, &sc)) {
                        tally.check(rel(&r, d, &sv), || {
                            format!(
                                "{r}: renaming {} R {} along {} R {} fails",
                                show_word(d),
                                show_word(&sv),
                                show_word(c),
                                show_word(v)
                            )
                        });
                    }
                }
            }
        }
    }
    tally
}

/// Condition 3 with up to three blocks, total block length and total
/// replacement length both at most `len`.
fn vertical(r: &ContextStructure, cs: &[Vec<Letter>], ws: &[Vec<Letter>], len: usize, tally: &mut Tally) {
    let mut governed: HashMap<&[Letter], Vec<&Vec<Letter>>> = HashMap::new();
    for v in cs {
        governed.insert(v, ws.iter().filter(|w| rel(r, v, w)).collect());
    }
    let mut blocks: Vec<Vec<&Vec<Letter>>> = Vec::new();
    let mut layer: Vec<Vec<&Vec<Letter>>> = vec![Vec::new()];
    for _ in 0..3 {
        layer = layer
            .iter()
            .flat_map(|b| cs.iter().map(move |v| [b.clone(), vec![v]].concat()))
            .filter(|b| b.iter().map(|v| v.len()).sum::<usize>() <= len)
            .collect();
        blocks.extend(layer.iter().cloned());
    }
    for c in cs {
        for b in &blocks {
            let whole: Vec<Letter> = b.iter().flat_map(|v| v.iter().copied()).collect();
            if !rel(r, c, &whole) {
                continue;
            }
            // Every choice of wᵢ with vᵢ R wᵢ, within the length budget.
            let mut partial: Vec<Vec<Letter>> = vec![Vec::new()];
            for v in b {
                partial = partial
                    .iter()
                    .flat_map(|p| governed[v.as_slice()].iter().map(move |w| [p.clone(), (*w).clone()].concat()))
                    .filter(|p| p.len() <= len)
                    .collect();
            }
            for w in partial {
                tally.check(rel(r, c, &w), || {
                    format!("{r}: {} R {} but not {}", show_word(c), show_word(&whole), show_word(&w))
                });
            }
        }
    }
}

/// The terminal-context law for every `R`-word of length at most `len` over
/// three letters, against every context of length at most `len`.
pub fn terminal_check(len: usize) -> Tally {
    let mut tally = Tally::default();
    let abc = letters(3);
    let cs = contexts(&abc, len);
    for r in ContextStructure::modelable() {
        for v in words(&abc, len) {
            let governing: Vec<&Vec<Letter>> = cs.iter().filter(|w| rel(&r, w, &v)).collect();
            let Some(t) = terminal_context(&r, &v) else {
                tally.check(governing.is_empty(), || {
                    format!("{r}: no terminal context for the R-word {}", show_word(&v))
                });
                continue;
            };
            for w in &cs {
                let expected = governing.contains(&w);
                tally.check(rel(&r, w, &t) == expected, || {
                    format!("{r}: v = {}, terminal {}, w = {}", show_word(&v), show_word(&t), show_word(w))
                });
            }
        }
    }
    tally
}
