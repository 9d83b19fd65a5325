//! The acceptance suite: eleven criteria with a deterministic text report.
//!
//! Reports contain counts and verdicts only, never timings, so two runs with
//! the same inputs print the same bytes whatever the worker count.

mod actions;
mod contexts;

use std::fmt;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context::{ContextStructure, Letter};
use crate::deduction::{check_proof, prove, refute_by_invariant, saturate, Bounds};
use crate::finord::{verify_structure_category, DeltaFamily, Violation};
use crate::setmodel::{find_model, models_with_carriers, satisfies};
use crate::syntax::{parse_theory, Equation, Theory};
use crate::universal::{internalize_term, universal_hom, HomSort};

pub const MONOID: &str = include_str!("../../../../theories/monoid.ua");
pub const ECKMANN_HILTON: &str = include_str!("../../../../theories/eckmann_hilton.ua");
pub const PROJECTION: &str = include_str!("../../../../theories/projection.ua");
const FREE_MAGMA: &str = "theory FreeMagma\nstructure cartesian\nsort M\nop f : M M -> M\n";

pub const TITLES: [&str; 11] = [
    "structure-category axioms",
    "structure categories of the context structures",
    "context-structure conditions",
    "terminal contexts",
    "action and canonical-morphism identities",
    "soundness in finite models",
    "interchange derivation",
    "weakening counterexample",
    "set completeness without axioms",
    "universal-model completeness",
    "determinism across worker counts",
];

/// Worker counts compared by the determinism criterion.
pub const DETERMINISM_WORKERS: [usize; 2] = [1, 4];

/// Counts checks and remembers the first failure.
#[derive(Debug, Default, Clone)]
pub struct Tally {
    pub checked: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failed += 1;
            self.first_failure.get_or_insert_with(describe);
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.checked += other.checked;
        self.failed += other.failed;
        self.first_failure = self.first_failure.or(other.first_failure);
        self
    }

    fn outcome(self, id: usize, what: &str) -> Outcome {
        let detail = match &self.first_failure {
            None => format!("{} {what}, 0 violations", self.checked),
            Some(f) => format!("{} {what}, {} violations; first: {f}", self.checked, self.failed),
        };
        Outcome::new(id, self.failed == 0, detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(id: usize, passed: bool, detail: String) -> Outcome {
        Outcome { id, title: TITLES[id - 1], passed, detail }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "pass" } else { "FAIL" };
        write!(f, "{verdict} {:>2} {}: {}", self.id, self.title, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub outcomes: Vec<Outcome>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{o}")?;
        }
        let passed = self.outcomes.iter().filter(|o| o.passed).count();
        writeln!(f, "{passed}/{} criteria passed", self.outcomes.len())
    }
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All words of length at most `len` over `letters`, shortest first.
pub(crate) fn words(letters: &[Letter], len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for _ in 0..len {
        layer = layer.iter().flat_map(|w| letters.iter().map(move |l| [w.clone(), vec![*l]].concat())).collect();
        out.extend(layer.iter().cloned());
    }
    out
}

pub(crate) fn contexts(letters: &[Letter], len: usize) -> Vec<Vec<Letter>> {
    words(letters, len).into_iter().filter(|w| !crate::context::has_repeats(w)).collect()
}

fn theory(text: &str) -> Theory {
    parse_theory(text).expect("bundled theories parse")
}

fn bounds(depth: usize, ctx: usize, rounds: usize) -> Bounds {
    Bounds::new(depth, ctx, rounds).expect("positive bounds")
}

/// Runs one of criteria 1 to 10.
pub fn run_criterion(id: usize) -> Option<Outcome> {
    Some(match id {
        1 => structure_categories(),
        2 => contexts::bijection_check(4).outcome(2, "function and structure pairs agree"),
        3 => contexts::axiom_check(4, 4).outcome(3, "instances of conditions 1 to 4"),
        4 => contexts::terminal_check(4).outcome(4, "word and context pairs"),
        5 => actions::action_axioms(3).merge(actions::canonical_morphisms(3)).outcome(5, "table identities"),
        6 => soundness(),
        7 => interchange(),
        8 => weakening(),
        9 => set_completeness(),
        10 => universal_completeness(),
        _ => return None,
    })
}

/// Runs the requested criteria in order. Criterion 11 reruns criteria 1 to 10
/// on one and on four workers and compares the two reports byte for byte.
pub fn run(ids: &[usize]) -> Report {
    let mut outcomes: Vec<Outcome> = ids.iter().filter_map(|&id| run_criterion(id)).collect();
    if ids.contains(&11) {
        outcomes.push(determinism());
    }
    Report { outcomes }
}

pub fn run_all() -> Report {
    run(&(1..=11).collect::<Vec<_>>())
}

fn structure_categories() -> Outcome {
    let reports: Vec<_> = DeltaFamily::named().iter().map(|d| verify_structure_category(d, 4)).collect();
    let closed = reports.iter().filter(|r| r.passed()).count();
    let members: usize = reports.iter().map(|r| r.members).sum();
    let control = verify_structure_category(&DeltaFamily::Increasing, 3);
    let refuted = matches!(control.violation, Some(Violation::Similarity { .. }));
    let mut detail = format!("{closed}/8 families closed at max 4 ({members} members)");
    if let Some(r) = reports.iter().find(|r| !r.passed()) {
        detail += &format!("; {r}");
    }
    match &control.violation {
        Some(v) => detail += &format!("; increasing fails with {v}"),
        None => detail += "; increasing passed but should fail",
    }
    Outcome::new(1, closed == 8 && refuted, detail)
}

fn soundness() -> Outcome {
    let mut tally = Tally::default();
    let mut parts = Vec::new();
    let mut enough = true;
    for (name, text) in [("monoid", MONOID), ("eckmann-hilton", ECKMANN_HILTON)] {
        let th = theory(text);
        let eqs = saturate(&th, bounds(3, 4, 8)).equations();
        let models: Vec<_> = (1..=3)
            .flat_map(|k| {
                let carriers: IndexMap<_, _> = th.signature.sorts().iter().map(|s| (*s, k)).collect();
                models_with_carriers(&th, &carriers)
            })
            .collect();
        let witness = find_model(&th, 3, None);
        tally.check(witness.as_ref().is_some_and(|w| models.contains(w)), || {
            format!("{name}: find_model witness is not enumerated")
        });
        enough &= models.len() >= 3;
        for eq in &eqs {
            for m in &models {
                let holds = satisfies(m, &th.structure, eq).unwrap_or(false);
                tally.check(holds, || format!("{name}: {} fails in\n{m}", eq.body()));
            }
        }
        parts.push(format!("{name} {} equations x {} models", eqs.len(), models.len()));
    }
    let passed = tally.failed == 0 && enough;
    let mut detail = format!("{}; {} checks, {} violations", parts.join(", "), tally.checked, tally.failed);
    if let Some(f) = tally.first_failure {
        detail += &format!("; first: {f}");
    }
    Outcome::new(6, passed, detail)
}

fn interchange() -> Outcome {
    let th = theory(ECKMANN_HILTON);
    let b = bounds(3, 4, 8);
    let mut passed = true;
    let mut parts = Vec::new();
    for goal in ["m(x, y) ~ m(y, x) ctx [ x:M y:M ]", "m(x, y) ~ p(x, y) ctx [ x:M y:M ]"] {
        let goal = th.parse_goal(goal).expect("goal parses");
        let outcome = prove(&th, &goal, b).expect("valid goal");
        match outcome.proof() {
            Some(p) => {
                let replayed = check_proof(&th, p).is_ok_and(|c| c.same_up_to_renaming(&goal));
                passed &= replayed;
                parts.push(format!(
                    "{} proved (proof size {}, height {}, replay {})",
                    goal.body(),
                    p.size(),
                    p.height(),
                    if replayed { "ok" } else { "failed" }
                ));
            }
            None => {
                passed = false;
                parts.push(format!("{} not proved", goal.body()));
            }
        }
    }
    Outcome::new(7, passed, format!("{} under {}; {}", b, th.structure, parts.join("; ")))
}

fn weakening() -> Outcome {
    let cart = theory(PROJECTION);
    let goal = cart.parse_goal("f(x, y) ~ x ctx [ x:M y:M ]").expect("goal parses");
    let proved = prove(&cart, &goal, bounds(2, 3, 4)).expect("valid goal").is_proved();
    let mut parts = vec![format!("cartesian proves {}: {proved}", goal.body())];
    let mut passed = proved;
    for r in [ContextStructure::Injective, ContextStructure::StrictlyIncreasing] {
        let th = cart.with_structure(r.clone());
        let refuted = refute_by_invariant(&th, &goal).unwrap_or(false);
        let derived: Vec<usize> = (1..=4).filter(|&d| saturate(&th, bounds(d, 3, 4)).proves(&goal)).collect();
        passed &= refuted && derived.is_empty();
        parts.push(format!("{r}: refuted {refuted}, derived at depths {derived:?} of 1..=4"));
    }
    Outcome::new(8, passed, parts.join("; "))
}

fn set_completeness() -> Outcome {
    let th = theory(FREE_MAGMA);
    let goal = th.parse_goal("f(x, y) ~ f(y, x) ctx [ x:M y:M ]").expect("goal parses");
    let model = find_model(&th, 2, Some(&goal));
    let refutes = model.as_ref().is_some_and(|m| satisfies(m, &th.structure, &goal) == Ok(false));
    let proved: Vec<usize> = (1..=3).filter(|&d| saturate(&th, bounds(d, 3, 4)).proves(&goal)).collect();
    let shown = match &model {
        Some(m) => m.to_string().trim_end().replace('\n', " ; "),
        None => "none".into(),
    };
    Outcome::new(
        9,
        refutes && proved.is_empty(),
        format!("countermodel at size 2: {shown}; cartesian proofs at depths {proved:?} of 1..=3"),
    )
}

/// The fixed goal list: theory, structure override, goal.
pub const UNIVERSAL_GOALS: [(&str, Option<ContextStructure>, &str); 6] = [
    (MONOID, None, "mul(x, mul(e, y)) ~ mul(x, y) ctx [ x:M y:M ]"),
    (MONOID, None, "mul(x, y) ~ mul(y, x) ctx [ x:M y:M ]"),
    (ECKMANN_HILTON, None, "m(x, y) ~ m(y, x) ctx [ x:M y:M ]"),
    (ECKMANN_HILTON, None, "m(x, y) ~ p(x, y) ctx [ x:M y:M ]"),
    (PROJECTION, None, "f(x, y) ~ x ctx [ x:M y:M ]"),
    (PROJECTION, Some(ContextStructure::Injective), "f(x, y) ~ x ctx [ x:M y:M ]"),
];

fn universal_completeness() -> Outcome {
    let b = bounds(3, 4, 8);
    let mut agree = 0;
    let mut parts = Vec::new();
    for (text, r, goal) in &UNIVERSAL_GOALS {
        let mut th = theory(text);
        if let Some(r) = r {
            th = th.with_structure(r.clone());
        }
        let goal: Equation = th.parse_goal(goal).expect("goal parses");
        let proved = prove(&th, &goal, b).expect("valid goal").is_proved();
        let hom = HomSort::new(goal.ctx.iter().map(|l| l.sort).collect(), goal.lhs.sort());
        let sides = [&goal.lhs, &goal.rhs].map(|t| internalize_term(&th.structure, &goal.ctx, t).expect("valid side"));
        let merged = match universal_hom(&th, &hom, b, 2, &sides) {
            Ok(part) => part.same_class(&sides[0], &sides[1]).to_string(),
            Err(e) => format!("error ({e})"),
        };
        agree += usize::from(merged == proved.to_string());
        parts.push(format!("{} under {} [{}] proved {proved} merged {merged}", th.name, th.structure, goal.body()));
    }
    Outcome::new(10, agree == UNIVERSAL_GOALS.len(), format!("{agree}/6 agree at {b}; {}", parts.join("; ")))
}

fn determinism() -> Outcome {
    let ids: Vec<usize> = (1..=10).collect();
    let texts: Vec<String> = DETERMINISM_WORKERS
        .iter()
        .map(|&n| match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&ids).to_string()),
            Err(e) => format!("no pool of {n} workers: {e}"),
        })
        .collect();
    let same = texts.windows(2).all(|w| w[0] == w[1]);
    let detail = format!(
        "criteria 1 to 10 on {:?} workers: {}",
        DETERMINISM_WORKERS,
        if same { format!("identical reports ({} bytes)", texts[0].len()) } else { "reports differ".into() }
    );
    Outcome::new(11, same, detail)
}
