//! The action axioms and the canonical-morphism identities in finite sets.
//!
//! Sizes, functions and words range exhaustively over the grid; tables are
//! drawn from a seeded generator, since all tables of arity 3 on 3 elements
//! are out of reach.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{contexts, rng, words, Tally};
use crate::context::{reindexing, show_word, Letter};
use crate::finord::{compose, coproduct, similarity_component, FinFn};
use crate::setmodel::{compose_multi, theta_action, MultiMap};

/// Carrier profiles per grid point: uniform sizes `0..=max`, then random mixes.
const MIXED: usize = 2;

struct Grid {
    max: usize,
    gen: ChaCha8Rng,
}

impl Grid {
    fn profiles(&self) -> impl Iterator<Item = Option<usize>> {
        (0..=self.max).map(Some).chain(std::iter::repeat_n(None, MIXED))
    }

    /// Carriers for `n` positions; codomain positions are never empty.
    fn carriers(&mut self, profile: Option<usize>, n: usize, codomain: bool) -> Vec<usize> {
        let low = usize::from(codomain);
        (0..n)
            .map(|_| match profile {
                Some(k) => k.max(low),
                None => self.gen.gen_range(low..=self.max),
            })
            .collect()
    }

    fn table(&mut self, doms: Vec<usize>, cod: usize) -> MultiMap {
        let gen = &mut self.gen;
        MultiMap::from_fn(doms, cod, |_| gen.gen_range(0..cod as u32))
    }
}

fn at(sizes: &[usize], theta: &FinFn) -> Vec<usize> {
    theta.images().iter().map(|&j| sizes[j - 1]).collect()
}

fn act(f: &MultiMap, theta: &FinFn, target: &[usize]) -> MultiMap {
    theta_action(f, theta, target).expect("shapes agree by construction")
}

fn comp(g: &MultiMap, fs: &[MultiMap]) -> MultiMap {
    compose_multi(g, fs).expect("shapes agree by construction")
}

/// Tuples of functions with total domain and total codomain at most `max`.
fn function_tuples(max: usize) -> Vec<Vec<FinFn>> {
    let fns: Vec<FinFn> = FinFn::all_up_to(max).collect();
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<FinFn>> = vec![Vec::new()];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|t| fns.iter().map(move |f| [t.clone(), vec![f.clone()]].concat()))
            .filter(|t| {
                t.iter().map(FinFn::dom).sum::<usize>() <= max && t.iter().map(FinFn::cod).sum::<usize>() <= max
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Axioms 1 to 4 of a structure-category action, for all functions (finite
/// sets form a cartesian multicategory).
pub fn action_axioms(max: usize) -> Tally {
    let mut tally = Tally::default();
    let mut g = Grid { max, gen: rng(5) };
    let fns: Vec<FinFn> = FinFn::all_up_to(max).collect();
    for n in 0..=max {
        for p in g.profiles().collect::<Vec<_>>() {
            let a = g.carriers(p, n, false);
            let cod = g.carriers(p, 1, true)[0];
            let f = g.table(a.clone(), cod);
            tally.check(act(&f, &FinFn::identity(n), &a) == f, || format!("identity action on {a:?}"));
        }
    }
    for sigma in &fns {
        for tau in fns.iter().filter(|t| t.dom() == sigma.cod()) {
            for p in g.profiles().collect::<Vec<_>>() {
                let a = g.carriers(p, tau.cod(), false);
                let b = g.carriers(p, 1, true)[0];
                let ts = compose(tau, sigma).expect("composable");
                let f = g.table(at(&a, &ts), b);
                let stepwise = act(&act(&f, sigma, &at(&a, tau)), tau, &a);
                tally.check(act(&f, &ts, &a) == stepwise, || format!("action of {tau} after {sigma} on {a:?}"));
            }
        }
    }
    for sigmas in function_tuples(max) {
        for p in g.profiles().collect::<Vec<_>>() {
            let a: Vec<Vec<usize>> = sigmas.iter().map(|s| g.carriers(p, s.cod(), false)).collect();
            let b = g.carriers(p, sigmas.len(), true);
            let c = g.carriers(p, 1, true)[0];
            let gm = g.table(b.clone(), c);
            let fs: Vec<MultiMap> =
                sigmas.iter().zip(&a).zip(&b).map(|((s, ai), &bi)| g.table(at(ai, s), bi)).collect();
            let acted: Vec<MultiMap> = sigmas.iter().zip(&fs).zip(&a).map(|((s, f), ai)| act(f, s, ai)).collect();
            let lhs = comp(&gm, &acted);
            let rhs = act(&comp(&gm, &fs), &coproduct(&sigmas), &a.concat());
            tally.check(lhs == rhs, || format!("coproduct action for {}", show_fns(&sigmas)));
        }
    }
    for tau in &fns {
        for ks in bounded_vectors(tau.cod(), max) {
            if tau.images().iter().map(|&j| ks[j - 1]).sum::<usize>() > max {
                continue;
            }
            for p in g.profiles().collect::<Vec<_>>() {
                let a: Vec<Vec<usize>> = ks.iter().map(|&k| g.carriers(p, k, false)).collect();
                let b = g.carriers(p, tau.cod(), true);
                let c = g.carriers(p, 1, true)[0];
                let gm = g.table(at(&b, tau), c);
                let fs: Vec<MultiMap> = a.iter().zip(&b).map(|(ai, &bi)| g.table(ai.clone(), bi)).collect();
                let picked: Vec<MultiMap> = tau.images().iter().map(|&j| fs[j - 1].clone()).collect();
                let lhs = comp(&act(&gm, tau, &b), &fs);
                let shifted = similarity_component(tau, &ks).expect("ks sized to the codomain");
                let rhs = act(&comp(&gm, &picked), &shifted, &a.concat());
                tally.check(lhs == rhs, || format!("similarity action for {tau} with blocks {ks:?}"));
            }
        }
    }
    tally
}

fn show_blocks<W: AsRef<[Letter]>>(ws: &[W]) -> String {
    ws.iter().map(|w| format!("[{}]", show_word(w.as_ref()))).collect::<Vec<_>>().join(" ")
}

fn show_fns(fs: &[FinFn]) -> String {
    fs.iter().map(|f| format!("({f})")).collect::<Vec<_>>().join(" + ")
}

/// Vectors of length `n` with entry sum at most `max`.
fn bounded_vectors(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .iter()
            .flat_map(|v: &Vec<usize>| {
                let used: usize = v.iter().sum();
                (0..=max - used).map(move |k| [v.clone(), vec![k]].concat())
            })
            .collect();
    }
    out
}

/// `f * m_{v,w}`: the action of the reindexing that reads `w` off the context `v`.
fn canonical(f: &MultiMap, v: &[Letter], w: &[Letter], size: &impl Fn(&Letter) -> usize) -> MultiMap {
    let theta = reindexing(v, w).expect("w is read off v");
    act(f, &theta, &v.iter().map(size).collect::<Vec<_>>())
}

fn covers(c: &[Letter], w: &[Letter]) -> bool {
    w.iter().all(|l| c.contains(l))
}

/// The four canonical-morphism identities under the cartesian structure,
/// over contexts and words of length at most `max` on three letters.
pub fn canonical_morphisms(max: usize) -> Tally {
    let mut tally = Tally::default();
    let mut g = Grid { max, gen: rng(7) };
    let xyz: Vec<Letter> = [("x", "X"), ("y", "Y"), ("z", "Z")].iter().map(|(n, s)| Letter::new(n, s)).collect();
    let pqr: Vec<Letter> = [("p", "P"), ("q", "Q"), ("r", "R")].iter().map(|(n, s)| Letter::new(n, s)).collect();
    let cs = contexts(&xyz, max);
    let ws = words(&xyz, max);
    for p in g.profiles().collect::<Vec<_>>() {
        let sizes = g.carriers(p, 6, false);
        let targets = g.carriers(p, 3, true);
        let size = |l: &Letter| {
            let i = xyz.iter().chain(&pqr).position(|x| x == l).expect("pool letter");
            sizes[i]
        };
        let sizes_of = |w: &[Letter]| w.iter().map(size).collect::<Vec<_>>();
        for v in &cs {
            let f = g.table(sizes_of(v), targets[0]);
            tally.check(canonical(&f, v, v, &size) == f, || format!("m_{{v,v}} at {}", show_word(v)));
        }
        for c in &cs {
            for v in cs.iter().filter(|v| covers(c, v)) {
                for w in ws.iter().filter(|w| covers(v, w)) {
                    let f = g.table(sizes_of(w), targets[0]);
                    let stepwise = canonical(&canonical(&f, v, w, &size), c, v, &size);
                    tally.check(stepwise == canonical(&f, c, w, &size), || {
                        format!("m_{{c,v}} m_{{v,w}} at {} ; {} ; {}", show_word(c), show_word(v), show_word(w))
                    });
                }
            }
        }
        let blocks = context_blocks(&cs, max);
        for c in &cs {
            for vs in blocks.iter().filter(|vs| vs.iter().all(|v| covers(c, v))) {
                let mut choices: Vec<Vec<&Vec<Letter>>> = vec![Vec::new()];
                for v in vs {
                    choices = choices
                        .iter()
                        .flat_map(|ch| ws.iter().filter(|w| covers(v, w)).map(move |w| [ch.clone(), vec![w]].concat()))
                        .filter(|ch| ch.iter().map(|w| w.len()).sum::<usize>() <= max)
                        .collect();
                }
                for wsel in choices {
                    let fs: Vec<MultiMap> = wsel.iter().zip(&targets).map(|(w, &t)| g.table(sizes_of(w), t)).collect();
                    let gm = g.table(targets[..vs.len()].to_vec(), targets[0]);
                    let inner: Vec<MultiMap> =
                        fs.iter().zip(vs).zip(&wsel).map(|((f, v), w)| canonical(f, v, w, &size)).collect();
                    let vcat: Vec<Letter> = vs.concat();
                    let wcat: Vec<Letter> = wsel.iter().flat_map(|w| w.iter().copied()).collect();
                    let lhs = canonical(&comp(&gm, &inner), c, &vcat, &size);
                    let rhs = canonical(&comp(&gm, &fs), c, &wcat, &size);
                    tally.check(lhs == rhs, || {
                        format!(
                            "blockwise canonical morphisms at {} ; {} ; {}",
                            show_word(c),
                            show_blocks(vs),
                            show_blocks(&wsel)
                        )
                    });
                }
            }
        }
        property_four(&mut g, max, &xyz, &pqr, &size, &mut tally);
    }
    tally
}

/// Sequences of at most three contexts with total length at most `max`.
fn context_blocks(cs: &[Vec<Letter>], max: usize) -> Vec<Vec<Vec<Letter>>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Vec<Letter>>> = vec![Vec::new()];
    for _ in 0..3 {
        layer = layer
            .iter()
            .flat_map(|b| cs.iter().map(move |v| [b.clone(), vec![v.clone()]].concat()))
            .filter(|b| b.iter().map(Vec::len).sum::<usize>() <= max)
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// `(g ∘ (f_θ(1), …)) * m_{c, v^θ(1)⋯}` against `((g * m_{v,w}) ∘ (f₁, …)) * m_{c, v¹⋯vⁿ}`.
fn property_four(
    g: &mut Grid,
    max: usize,
    xyz: &[Letter],
    pqr: &[Letter],
    size: &impl Fn(&Letter) -> usize,
    tally: &mut Tally,
) {
    let sizes_of = |w: &[Letter]| w.iter().map(size).collect::<Vec<_>>();
    let short = words(xyz, 2);
    // An empty carrier at a letter of v admits no map into it.
    for v in contexts(pqr, max).into_iter().filter(|v| v.iter().all(|l| size(l) > 0)) {
        for w in words(&v, max) {
            let theta = reindexing(&v, &w).expect("w is read off v");
            // Words vⁱ, one per letter of v, with both concatenations short enough.
            let mut choices: Vec<Vec<Vec<Letter>>> = vec![Vec::new()];
            for _ in 0..v.len() {
                choices = choices
                    .iter()
                    .flat_map(|ch| short.iter().map(move |u| [ch.clone(), vec![u.clone()]].concat()))
                    .filter(|ch| ch.iter().map(Vec::len).sum::<usize>() <= max)
                    .collect();
            }
            for vis in choices {
                let pulled: Vec<Letter> = theta.images().iter().flat_map(|&j| vis[j - 1].clone()).collect();
                if pulled.len() > max {
                    continue;
                }
                let all: Vec<Letter> = vis.concat();
                let c: Vec<Letter> = xyz.iter().filter(|l| all.contains(l)).copied().collect();
                let target = g.gen.gen_range(1..=max);
                let gm = g.table(sizes_of(&w), target);
                let fs: Vec<MultiMap> = vis.iter().zip(&v).map(|(u, l)| g.table(sizes_of(u), size(l))).collect();
                let picked: Vec<MultiMap> = theta.images().iter().map(|&j| fs[j - 1].clone()).collect();
                let lhs = canonical(&comp(&gm, &picked), &c, &pulled, size);
                let rhs = canonical(&comp(&canonical(&gm, &v, &w, size), &fs), &c, &all, size);
                tally.check(lhs == rhs, || {
                    format!(
                        "reindexed composite at v = {}, w = {}, blocks {}",
                        show_word(&v),
                        show_word(&w),
                        show_blocks(&vis)
                    )
                });
            }
        }
    }
}
