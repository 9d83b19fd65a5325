//! The bounded universal model against deduction, against finite-set models,
//! and against itself under reordered processing.

use std::collections::HashMap;

use proptest::prelude::*;
use ualg_core::context::ContextStructure;
use ualg_core::deduction::{saturate, Bounds};
use ualg_core::setmodel::{models_with_carriers, parse_model, FinSetModel, MultiMap};
use ualg_core::syntax::{parse_theory, Equation, Theory};
use ualg_core::universal::*;
use ualg_core::Sym;

fn theory(name: &str) -> Theory {
    let text = match name {
        "monoid" => include_str!("../../../theories/monoid.ua"),
        "eh" => include_str!("../../../theories/eckmann_hilton.ua"),
        _ => include_str!("../../../theories/projection.ua"),
    };
    parse_theory(text).unwrap()
}

fn bounds() -> Bounds {
    Bounds::new(3, 4, 8).unwrap()
}

/// Every pair of saturated terms in contexts of length at most `ctx_len` is
/// merged in the universal model exactly when deduction proves it.
fn agreement(t: &Theory, ctx_len: usize) -> (usize, Vec<String>) {
    let sat = saturate(t, bounds());
    let um = UniversalModel::build(t, bounds()).unwrap();
    let (mut checked, mut mismatches) = (0, Vec::new());
    for (ctx, classes) in sat.classes() {
        if ctx.len() > ctx_len {
            continue;
        }
        let all: Vec<_> = classes.iter().flatten().cloned().collect();
        let internal: Vec<SigmaTerm> = all.iter().map(|a| internalize_term(&t.structure, &ctx, a).unwrap()).collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate().skip(i + 1) {
                let proved = sat.proves(&Equation::new("pair", a.clone(), b.clone(), ctx.clone()));
                checked += 1;
                if proved != um.merged(&internal[i], &internal[j]).unwrap() {
                    mismatches.push(format!("{a} ~ {b} (proved: {proved})"));
                }
            }
        }
    }
    (checked, mismatches)
}

#[test]
fn closure_agrees_with_deduction() {
    let cases = [
        ("monoid", None, 2),
        ("eh", None, 1),
        ("projection", None, 2),
        ("projection", Some(ContextStructure::Injective), 2),
    ];
    for (name, r, len) in cases {
        let mut t = theory(name);
        if let Some(r) = r {
            t = t.with_structure(r);
        }
        let (checked, mismatches) = agreement(&t, len);
        assert!(checked > 0, "{name}: nothing compared");
        assert!(mismatches.is_empty(), "{name} under {}: {mismatches:?}", t.structure);
    }
}

#[test]
fn axioms_outside_the_structure_are_rejected() {
    let t = theory("projection").with_structure(ContextStructure::Surjective);
    assert!(matches!(UniversalModel::build(&t, bounds()), Err(UniversalError::Context(_))));
}

#[test]
fn partition_is_independent_of_processing_order() {
    let hom: HomSort = "M M -> M".parse().unwrap();
    for name in ["monoid", "eh", "projection"] {
        let t = theory(name);
        let reference = UniversalModel::build(&t, bounds()).unwrap().hom(&hom, 2, &[]).unwrap();
        for salt in [1, 7, 9001] {
            let shuffled = UniversalModel::build_shuffled(&t, bounds(), salt).unwrap();
            assert_eq!(shuffled.hom(&hom, 2, &[]).unwrap(), reference, "{name} with salt {salt}");
        }
    }
}

/// Interpretation into any finite model is constant on each class.
#[test]
fn classes_transport_into_finite_models() {
    let m = Sym::new("M");
    for (name, max) in [("monoid", 3), ("eh", 2), ("projection", 3)] {
        let t = theory(name);
        let um = UniversalModel::build(&t, bounds()).unwrap();
        let models: Vec<FinSetModel> =
            (1..=max).flat_map(|k| models_with_carriers(&t, &[(m, k)].into_iter().collect())).collect();
        assert!(!models.is_empty(), "{name} has models");
        for hom in ["M -> M", "M M -> M"] {
            let part = um.hom(&hom.parse().unwrap(), 2, &[]).unwrap();
            for model in &models {
                for class in &part.classes {
                    let tables: Vec<MultiMap> =
                        class.iter().map(|s| s.interpret(model, &HashMap::new()).unwrap()).collect();
                    assert!(
                        tables.windows(2).all(|w| w[0] == w[1]),
                        "{name}: class of {} splits in\n{model}",
                        class[0]
                    );
                }
            }
        }
    }
}

const MAGMA: &str = "theory Pointed\nstructure cartesian\nsort M\nop f : M M -> M\nop c : -> M\n";

fn magma_model(k: usize, raw: &[u32]) -> FinSetModel {
    let cell = |i: usize| (raw[i % raw.len()] % k as u32).to_string();
    let text = format!(
        "carrier M = {k}\ntable f : {}\ntable c : {}\n",
        (0..k * k).map(cell).collect::<Vec<_>>().join(" "),
        cell(k * k),
    );
    parse_model(&parse_theory(MAGMA).unwrap().signature, &text).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every finite-set model is a model of the categorization schemas, for
    /// every choice of tables for the schema variables.
    #[test]
    fn categorization_holds_in_finite_sets(k in 1usize..=2, raw in prop::collection::vec(any::<u32>(), 1..16), seed in any::<u32>()) {
        let base = parse_theory(MAGMA).unwrap().signature;
        let model = magma_model(k, &raw);
        for r in [ContextStructure::Cartesian, ContextStructure::Injective, ContextStructure::Surjective] {
            let sigma = build_sigma(&base, &r, 2, 2);
            for ax in categorization_axioms(&sigma) {
                let vars: HashMap<Sym, MultiMap> = ax
                    .ctx
                    .iter()
                    .enumerate()
                    .map(|(i, (v, h))| {
                        let doms = vec![k; h.args.len()];
                        let mut n = seed.wrapping_mul(2654435761).wrapping_add(i as u32);
                        let table = MultiMap::from_fn(doms, k, |_| {
                            n = n.wrapping_mul(1103515245).wrapping_add(12345);
                            (n >> 16) % k as u32
                        });
                        (*v, table)
                    })
                    .collect();
                let lhs = ax.lhs.interpret(&model, &vars).unwrap();
                let rhs = ax.rhs.interpret(&model, &vars).unwrap();
                prop_assert_eq!(lhs, rhs, "{} under {}", ax.name, r);
            }
        }
    }
}
