//! Category laws of finite ordinals and the closure properties of the named families.

use proptest::prelude::*;
use ualg_core::finord::*;

/// A function `[m] -> [n]`; with `n = 0` only the empty function exists.
fn finfn(m: usize, n: usize) -> BoxedStrategy<FinFn> {
    if n == 0 {
        return Just(FinFn::empty(0)).boxed();
    }
    prop::collection::vec(1..=n, m).prop_map(move |images| FinFn::new(n, images).unwrap()).boxed()
}

/// A composable chain `[a] -> [b] -> [c] -> [d]`, each size at most `max`.
fn chain(max: usize) -> impl Strategy<Value = (FinFn, FinFn, FinFn)> {
    (1..=max, 1..=max, 1..=max, 0..=max).prop_flat_map(|(b, c, d, a)| (finfn(a, b), finfn(b, c), finfn(c, d)))
}

proptest! {
    #[test]
    fn composition_is_associative((f, g, h) in chain(4)) {
        let left = compose(&h, &compose(&g, &f).unwrap()).unwrap();
        let right = compose(&compose(&h, &g).unwrap(), &f).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn identities_are_units(f in (0usize..=4, 1usize..=4).prop_flat_map(|(m, n)| finfn(m, n))) {
        prop_assert_eq!(compose(&FinFn::identity(f.cod()), &f).unwrap(), f.clone());
        prop_assert_eq!(compose(&f, &FinFn::identity(f.dom())).unwrap(), f);
    }

    #[test]
    fn similarity_of_identity_is_identity(ks in prop::collection::vec(0usize..=3, 0..=4)) {
        let n = ks.len();
        prop_assert_eq!(similarity_component(&FinFn::identity(n), &ks).unwrap(), FinFn::identity(ks.iter().sum()));
    }

    #[test]
    fn similarity_is_functorial(
        (sigma, tau) in (0usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(m, n, p)| (finfn(m, n), finfn(n, p))),
        raw in prop::collection::vec(0usize..=2, 3),
    ) {
        let ks = &raw[..tau.cod()];
        let pulled: Vec<usize> = tau.images().iter().map(|&j| ks[j - 1]).collect();
        let direct = similarity_component(&compose(&tau, &sigma).unwrap(), ks).unwrap();
        let stepwise = compose(
            &similarity_component(&tau, ks).unwrap(),
            &similarity_component(&sigma, &pulled).unwrap(),
        )
        .unwrap();
        prop_assert_eq!(direct, stepwise);
    }

    #[test]
    fn coproduct_merges_fibers(
        (f, g) in (0usize..=4, 1usize..=3, 0usize..=4, 1usize..=3).prop_flat_map(|(a, b, c, d)| (finfn(a, b), finfn(c, d))),
    ) {
        let sum = coproduct(&[f.clone(), g.clone()]);
        prop_assert_eq!((sum.dom(), sum.cod()), (f.dom() + g.dom(), f.cod() + g.cod()));
        let mut expected = fiber_sizes(&f);
        expected.extend(fiber_sizes(&g));
        let (mut got, mut expected) = (fiber_sizes(&sum), expected);
        got.sort_unstable();
        expected.sort_unstable();
        prop_assert_eq!(got, expected);
    }
}

/// Fiber sizes allowed in each named family.
fn allowed(d: &DeltaFamily, k: usize) -> bool {
    match d {
        DeltaFamily::Identities | DeltaFamily::Bijections => k == 1,
        DeltaFamily::StrictlyIncreasing | DeltaFamily::Injections => k <= 1,
        DeltaFamily::Surjections | DeltaFamily::LeftSurjections | DeltaFamily::RightSurjections => k >= 1,
        _ => true,
    }
}

#[test]
fn member_fibers_lie_in_the_family_monoid() {
    for d in DeltaFamily::named() {
        for f in FinFn::all_up_to(4).filter(|f| in_family(&d, f).unwrap()) {
            assert!(fiber_sizes(&f).iter().all(|&k| allowed(&d, k)), "{d} contains {f}");
        }
    }
}

#[test]
fn named_families_are_structure_categories() {
    for d in DeltaFamily::named() {
        let report = verify_structure_category(&d, 3);
        assert!(report.passed(), "{report}");
        assert!(report.members > 0);
    }
}

#[test]
fn monoid_families_are_structure_categories() {
    for token in ["delta-upper:0,2", "delta-upper:2,3", "psi-lower:2", "psi-upper:1,3"] {
        let d: DeltaFamily = token.parse().unwrap();
        let report = verify_structure_category(&d, 3);
        assert!(report.passed(), "{report}");
    }
}

#[test]
fn monotone_functions_fail_similarity() {
    let report = verify_structure_category(&DeltaFamily::Increasing, 3);
    match report.violation {
        Some(Violation::Similarity { theta, ks, result }) => {
            assert!(in_family(&DeltaFamily::Increasing, &theta).unwrap());
            assert!(!result.is_monotone());
            assert_eq!(similarity_component(&theta, &ks).unwrap(), result);
        }
        other => panic!("expected a similarity counterexample, got {other:?}"),
    }
}
