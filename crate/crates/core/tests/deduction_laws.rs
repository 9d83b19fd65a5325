//! Proof replay, monotonicity in the bounds, renaming invariance, agreement of
//! the two deciders, and inclusion along the structure ordering.

use ualg_core::context::{ContextStructure, Letter};
use ualg_core::deduction::*;
use ualg_core::syntax::{canonical_context, parse_theory, Equation, Theory};

fn theory(name: &str) -> Theory {
    let text = match name {
        "monoid" => include_str!("../../../theories/monoid.ua"),
        "eh" => include_str!("../../../theories/eckmann_hilton.ua"),
        _ => include_str!("../../../theories/projection.ua"),
    };
    parse_theory(text).unwrap()
}

fn b(depth: usize, ctx: usize, rounds: usize) -> Bounds {
    Bounds::new(depth, ctx, rounds).unwrap()
}

#[test]
fn every_output_replays() {
    for (name, r, bounds) in [
        ("monoid", ContextStructure::Bijective, b(3, 3, 4)),
        ("eh", ContextStructure::Bijective, b(3, 2, 4)),
        ("projection", ContextStructure::Cartesian, b(2, 3, 4)),
        ("projection", ContextStructure::Injective, b(3, 3, 4)),
    ] {
        let th = theory(name).with_structure(r);
        let sat = saturate(&th, bounds);
        let eqs = sat.equations();
        assert!(!eqs.is_empty(), "{name}: nothing derived");
        for eq in eqs {
            let proof = sat.proof_of(&eq).unwrap_or_else(|| panic!("{name}: no proof stored for {eq:?}"));
            let concluded = check_proof(&th, &proof).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            assert!(concluded.same_up_to_renaming(&eq), "{name}: proof concludes {concluded:?}");
        }
    }
}

#[test]
fn larger_bounds_keep_every_equation() {
    let steps = [b(2, 2, 2), b(2, 2, 4), b(2, 3, 4), b(3, 3, 4)];
    for name in ["monoid", "projection"] {
        let th = theory(name);
        let sats: Vec<Saturation> = steps.iter().map(|&s| saturate(&th, s)).collect();
        for pair in sats.windows(2) {
            for eq in pair[0].equations() {
                assert!(
                    pair[1].proves(&eq),
                    "{name}: {eq:?} lost from {:?} to {:?}",
                    pair[0].bounds(),
                    pair[1].bounds()
                );
            }
        }
    }
}

/// Renames context letters by a reversal, which is a bijective renaming.
fn reversed_names(eq: &Equation) -> Equation {
    let fresh: Vec<Letter> = eq
        .ctx
        .iter()
        .enumerate()
        .map(|(i, l)| Letter::new(&format!("r{}", eq.ctx.len() - i), l.sort.as_str()))
        .collect();
    Equation::new(eq.name.clone(), eq.lhs.rename(&eq.ctx, &fresh), eq.rhs.rename(&eq.ctx, &fresh), fresh)
}

#[test]
fn stored_equations_are_identified_up_to_renaming() {
    let th = theory("monoid");
    let sat = saturate(&th, b(3, 3, 4));
    for eq in sat.equations() {
        let renamed = reversed_names(&eq);
        assert_eq!(renamed.canonical(), eq.canonical());
        assert!(sat.proves(&renamed));
        let proof = sat.proof_of(&renamed).unwrap();
        assert!(check_proof(&th, &proof).unwrap().same_up_to_renaming(&renamed));
        assert_eq!(canonical_context(&renamed.ctx), canonical_context(&eq.ctx));
    }
}

#[test]
fn prove_and_refute_never_both_succeed() {
    let cart = saturate(&theory("projection"), b(3, 3, 4));
    let mut refuted = 0;
    for r in [ContextStructure::Injective, ContextStructure::StrictlyIncreasing] {
        let th = theory("projection").with_structure(r);
        let sat = saturate(&th, b(3, 3, 4));
        for (ctx, classes) in cart.classes() {
            let all: Vec<_> = classes.into_iter().flatten().collect();
            for lhs in &all {
                for rhs in &all {
                    let goal = Equation::new("goal", lhs.clone(), rhs.clone(), ctx.clone());
                    if th.check_equation(&goal).is_err() {
                        continue;
                    }
                    let no = refute_by_invariant(&th, &goal).unwrap();
                    refuted += no as usize;
                    assert!(!(no && sat.proves(&goal)), "{goal:?} both proved and refuted");
                }
            }
        }
    }
    assert!(refuted > 0);
}

fn included(th: &Theory, smaller: ContextStructure, larger: ContextStructure, bounds: Bounds) {
    let lo = saturate(&th.with_structure(smaller.clone()), bounds);
    let hi = saturate(&th.with_structure(larger.clone()), bounds);
    for eq in lo.equations() {
        assert!(hi.proves(&eq), "{} derives {eq:?} but {} does not", smaller, larger);
    }
}

/// A larger relation derives at least as much. The monoid axioms are
/// equations under every structure; the projection axiom only under those
/// that admit the unused letter.
#[test]
fn deduction_grows_with_the_structure() {
    use ContextStructure::*;
    let monoid = theory("monoid");
    for pair in [Trivial, Bijective, Surjective, Cartesian].windows(2) {
        included(&monoid, pair[0].clone(), pair[1].clone(), b(2, 3, 4));
    }
    let projection = theory("projection");
    for pair in [StrictlyIncreasing, Injective, Cartesian].windows(2) {
        included(&projection, pair[0].clone(), pair[1].clone(), b(2, 3, 4));
    }
}
