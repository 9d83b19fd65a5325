//! Action and composition laws of finite sets, and the interpretation lemmas
//! relating term tables across contexts, substitutions and morphisms.

use proptest::prelude::*;
use ualg_core::context::{reindexing, terminal_context, ContextStructure, Letter};
use ualg_core::finord::{compose, coproduct, similarity_component, FinFn};
use ualg_core::setmodel::*;
use ualg_core::syntax::{parse_theory, Term, Theory};
use ualg_core::Sym;

/// Builds a table from raw entropy, reducing each value into the codomain.
fn table(doms: Vec<usize>, cod: usize, raw: &[u32]) -> MultiMap {
    let mut i = 0;
    MultiMap::from_fn(doms, cod, |_| {
        i += 1;
        raw[(i - 1) % raw.len()] % cod as u32
    })
}

fn finfn(raw: &[usize], m: usize, n: usize) -> FinFn {
    FinFn::new(n, raw[..m].iter().map(|r| r % n + 1).collect()).unwrap()
}

fn sizes_at(sizes: &[usize], theta: &FinFn) -> Vec<usize> {
    theta.images().iter().map(|&j| sizes[j - 1]).collect()
}

fn raw_fn() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..64, 3)
}

fn raw_table() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(any::<u32>(), 1..32)
}

proptest! {
    #[test]
    fn identity_acts_trivially(n in 0usize..=3, sizes in prop::collection::vec(0usize..=3, 3), cod in 1usize..=3, raw in raw_table()) {
        let f = table(sizes[..n].to_vec(), cod, &raw);
        prop_assert_eq!(theta_action(&f, &FinFn::identity(n), &sizes[..n]).unwrap(), f);
    }

    #[test]
    fn action_is_functorial(
        m in 0usize..=3, n in 1usize..=3, p in 1usize..=3,
        rt in raw_fn(), rp in raw_fn(),
        cp in prop::collection::vec(0usize..=3, 3), cod in 1usize..=3, raw in raw_table(),
    ) {
        let (theta, psi) = (finfn(&rt, m, n), finfn(&rp, n, p));
        let cp = &cp[..p];
        let cn = sizes_at(cp, &psi);
        let f = table(sizes_at(&cn, &theta), cod, &raw);
        let stepwise = theta_action(&theta_action(&f, &theta, &cn).unwrap(), &psi, cp).unwrap();
        let direct = theta_action(&f, &compose(&psi, &theta).unwrap(), cp).unwrap();
        prop_assert_eq!(stepwise, direct);
    }

    #[test]
    fn action_commutes_with_composition_outside(
        m in 0usize..=3, n in 1usize..=3, rt in raw_fn(),
        cn in prop::collection::vec(1usize..=3, 3), ks in prop::collection::vec(0usize..=2, 3),
        inner in prop::collection::vec(0usize..=2, 6), cod in 1usize..=3, raws in prop::collection::vec(raw_table(), 4),
    ) {
        let theta = finfn(&rt, m, n);
        let cn = &cn[..n];
        let g = table(sizes_at(cn, &theta), cod, &raws[0]);
        let fs: Vec<MultiMap> = (0..n)
            .map(|j| table(inner[2 * j..2 * j + ks[j]].to_vec(), cn[j], &raws[j + 1]))
            .collect();
        let lhs = compose_multi(&theta_action(&g, &theta, cn).unwrap(), &fs).unwrap();
        let picked: Vec<MultiMap> = theta.images().iter().map(|&j| fs[j - 1].clone()).collect();
        let shifted = similarity_component(&theta, &ks[..n]).unwrap();
        let target: Vec<usize> = fs.iter().flat_map(|f| f.doms().to_vec()).collect();
        let rhs = theta_action(&compose_multi(&g, &picked).unwrap(), &shifted, &target).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn action_commutes_with_composition_inside(
        n in 0usize..=3, c in prop::collection::vec(1usize..=3, 3), cod in 1usize..=3,
        ms in prop::collection::vec(0usize..=2, 3), ls in prop::collection::vec(1usize..=2, 3),
        rts in prop::collection::vec(raw_fn(), 3), targets in prop::collection::vec(0usize..=2, 6),
        raws in prop::collection::vec(raw_table(), 4),
    ) {
        let g = table(c[..n].to_vec(), cod, &raws[0]);
        let thetas: Vec<FinFn> = (0..n).map(|j| finfn(&rts[j], ms[j], ls[j])).collect();
        let tgts: Vec<Vec<usize>> = (0..n).map(|j| targets[2 * j..2 * j + ls[j]].to_vec()).collect();
        let fs: Vec<MultiMap> = (0..n).map(|j| table(sizes_at(&tgts[j], &thetas[j]), c[j], &raws[j + 1])).collect();
        let acted: Vec<MultiMap> = (0..n).map(|j| theta_action(&fs[j], &thetas[j], &tgts[j]).unwrap()).collect();
        let lhs = compose_multi(&g, &acted).unwrap();
        let target: Vec<usize> = tgts.concat();
        let rhs = theta_action(&compose_multi(&g, &fs).unwrap(), &coproduct(&thetas), &target).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

const SIG: &str = "theory Small\nstructure cartesian\nsort M\nop f : M M -> M\nop g : M -> M\nop c : -> M\n";

fn small() -> Theory {
    parse_theory(SIG).unwrap()
}

fn letters() -> Vec<Letter> {
    ["x", "y", "z"].iter().map(|n| Letter::new(n, "M")).collect()
}

/// Terms of depth at most 2 over `x y z`.
fn term() -> impl Strategy<Value = Term> {
    let m = Sym::new("M");
    let leaf = prop_oneof![
        (0usize..3).prop_map(|i| Term::var(letters()[i])),
        Just(Term::constant(Sym::new("c"), Sym::new("M"))),
    ];
    leaf.prop_recursive(2, 8, 2, move |inner| {
        prop_oneof![
            inner.clone().prop_map(move |a| Term::app(Sym::new("g"), m, vec![a])),
            (inner.clone(), inner).prop_map(move |(a, b)| Term::app(Sym::new("f"), m, vec![a, b])),
        ]
    })
}

fn model(k: usize, raw: &[u32]) -> FinSetModel {
    let text = format!(
        "carrier M = {k}\ntable f : {}\ntable g : {}\ntable c : {}\n",
        (0..k * k).map(|i| (raw[i % raw.len()] % k as u32).to_string()).collect::<Vec<_>>().join(" "),
        (0..k).map(|i| (raw[(i + 7) % raw.len()] % k as u32).to_string()).collect::<Vec<_>>().join(" "),
        raw[3 % raw.len()] % k as u32,
    );
    parse_model(&small().signature, &text).unwrap()
}

fn sizes(m: &FinSetModel, ctx: &[Letter]) -> Vec<usize> {
    ctx.iter().map(|l| m.carrier(l.sort).unwrap()).collect()
}

proptest! {
    #[test]
    fn tables_transport_along_context_inclusion(t in term(), k in 1usize..=2, raw in raw_table(), rot in 0usize..3) {
        let r = ContextStructure::Cartesian;
        let m = model(k, &raw);
        let w = terminal_context(&r, &t.tau()).unwrap();
        let mut v = letters();
        let n = v.len();
        v.rotate_left(rot);
        let direct = eval_term(&m, &r, &v, &t).unwrap();
        let via_w = theta_action(&eval_term(&m, &r, &w, &t).unwrap(), &reindexing(&v, &w).unwrap(), &sizes(&m, &v)).unwrap();
        prop_assert_eq!(direct, via_w);
        let same = eval_term(&m, &r, &v, &t).unwrap();
        prop_assert_eq!(theta_action(&same, &FinFn::identity(n), &sizes(&m, &v)).unwrap(), same);
    }

    #[test]
    fn substitution_is_composition(t in term(), images in prop::collection::vec(term(), 3), k in 1usize..=2, raw in raw_table()) {
        let r = ContextStructure::Cartesian;
        let m = model(k, &raw);
        let v = letters();
        let substituted = t.substitute(&v, &images);
        let w = letters();
        let ws: Vec<Vec<Letter>> = images.iter().map(|s| terminal_context(&r, &s.tau()).unwrap()).collect();
        let parts: Vec<MultiMap> = images.iter().zip(&ws).map(|(s, wi)| eval_term(&m, &r, wi, s).unwrap()).collect();
        let composite = compose_multi(&eval_term(&m, &r, &v, &t).unwrap(), &parts).unwrap();
        let expected = theta_action(&composite, &reindexing(&w, &ws.concat()).unwrap(), &sizes(&m, &w)).unwrap();
        prop_assert_eq!(eval_term(&m, &r, &w, &substituted).unwrap(), expected);
    }
}

/// Every per-sort map between two models, checked as a morphism, satisfies
/// naturality for sampled terms.
#[test]
fn morphisms_are_natural_on_terms() {
    let theory = small();
    let r = ContextStructure::Cartesian;
    let v = letters();
    let terms: Vec<Term> = ["f(x, g(y))", "g(f(z, x))", "f(c, c)", "f(x, x)", "g(c)"]
        .iter()
        .map(|s| theory.parse_goal(&format!("{s} ~ x ctx [ x:M y:M z:M ]")).unwrap().lhs)
        .collect();
    let empty = Theory { equations: Vec::new(), ..theory.clone() };
    let s = Sym::new("M");
    let two = models_with_carriers(&empty, &[(s, 2)].into_iter().collect());
    let sample: Vec<&FinSetModel> = two.iter().step_by(7).collect();
    let mut checked = 0;
    for m in &sample {
        for n in &sample {
            for map in FinFn::all(2, 2) {
                let images: Vec<u32> = map.images().iter().map(|&i| i as u32 - 1).collect();
                let hom = ModelMorphism { maps: [(s, images.clone())].into_iter().collect() };
                if !check_morphism(&theory.signature, &hom, m, n).unwrap() {
                    continue;
                }
                checked += 1;
                for t in &terms {
                    let (mt, nt) = (eval_term(m, &r, &v, t).unwrap(), eval_term(n, &r, &v, t).unwrap());
                    for (i, &out) in mt.table().iter().enumerate() {
                        let x = [i / 4, (i / 2) % 2, i % 2];
                        let fx: Vec<usize> = x.iter().map(|&a| images[a] as usize).collect();
                        assert_eq!(images[out as usize], nt.apply(&fx), "naturality of {t}");
                    }
                }
            }
        }
    }
    assert!(checked > sample.len(), "identity maps alone would give {}", sample.len());
}

/// Frozen oracle: direct table checks of the monoid laws over all tables.
#[test]
fn monoid_models_match_brute_force() {
    let theory = parse_theory(include_str!("../../../theories/monoid.ua")).unwrap();
    let s = Sym::new("M");
    for k in 0..=3usize {
        let found = models_with_carriers(&theory, &[(s, k)].into_iter().collect());
        let mut expected = 0;
        for e in 0..k {
            'tables: for code in 0..k.pow((k * k) as u32) {
                let mul: Vec<usize> = (0..k * k).rev().map(|i| code / k.pow(i as u32) % k).collect();
                let at = |a: usize, b: usize| mul[a * k + b];
                for a in 0..k {
                    if at(e, a) != a || at(a, e) != a {
                        continue 'tables;
                    }
                    for b in 0..k {
                        for c in 0..k {
                            if at(at(a, b), c) != at(a, at(b, c)) {
                                continue 'tables;
                            }
                        }
                    }
                }
                expected += 1;
            }
        }
        assert_eq!(found.len(), expected, "monoids on {k} elements");
        for m in &found {
            assert!(satisfies_all(m, &theory).unwrap());
        }
    }
}
