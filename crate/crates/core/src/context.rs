//! Context structures: which words of variables a context may govern.
//!
//! A context is a repetition-free word. For a structure `R`, `c R v` states
//! that the context `c` governs the word `v`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::finord::{DeltaFamily, FinFn, FinOrdError, StructureMonoid};
use crate::symbol::Sym;

/// A typed variable. Identity is the pair `(sort, name)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub sort: Sym,
    pub name: Sym,
}

/// Prefix reserved for engine-generated letters.
pub const FRESH_PREFIX: &str = "_v";

impl Letter {
    pub fn new(name: &str, sort: &str) -> Letter {
        Letter { sort: Sym::new(sort), name: Sym::new(name) }
    }

    /// The `i`-th engine letter of `sort`, named `_v{i}`.
    pub fn fresh(sort: Sym, i: usize) -> Letter {
        Letter { sort, name: Sym::new(&format!("{FRESH_PREFIX}{i}")) }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Renders a word as space-separated letter names; the empty word as `()`.
pub fn show_word(word: &[Letter]) -> String {
    if word.is_empty() {
        return "()".to_string();
    }
    word.iter().map(|l| l.name.as_str()).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContextError {
    #[error("context repeats letter `{0}`")]
    RepeatedLetter(Letter),
    #[error(transparent)]
    Monoid(#[from] FinOrdError),
    #[error("decomposition precondition fails: the context does not govern the concatenated words")]
    NotGoverned,
    #[error("`{0}` has no terminal contexts")]
    NotModelable(ContextStructure),
    #[error("unknown context structure `{0}`")]
    UnknownStructure(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ContextStructure {
    Trivial,
    Bijective,
    StrictlyIncreasing,
    Injective,
    Surjective,
    LeftSurjective,
    RightSurjective,
    Cartesian,
    /// Every letter of `c` used with a multiplicity in the monoid. Relation checks only.
    RUpper(StructureMonoid),
}

impl ContextStructure {
    pub fn modelable() -> [ContextStructure; 8] {
        use ContextStructure::*;
        [Trivial, Bijective, StrictlyIncreasing, Injective, Surjective, LeftSurjective, RightSurjective, Cartesian]
    }

    pub fn is_modelable(&self) -> bool {
        !matches!(self, ContextStructure::RUpper(_))
    }

    /// Balanced structures force `Var(c) = Var(v)` whenever `c R v`.
    pub fn is_balanced(&self) -> bool {
        use ContextStructure::*;
        matches!(self, Trivial | Bijective | Surjective | LeftSurjective | RightSurjective)
    }

    /// The structure category paired with this structure.
    pub fn family(&self) -> DeltaFamily {
        use ContextStructure::*;
        match self {
            Trivial => DeltaFamily::Identities,
            Bijective => DeltaFamily::Bijections,
            StrictlyIncreasing => DeltaFamily::StrictlyIncreasing,
            Injective => DeltaFamily::Injections,
            Surjective => DeltaFamily::Surjections,
            LeftSurjective => DeltaFamily::LeftSurjections,
            RightSurjective => DeltaFamily::RightSurjections,
            Cartesian => DeltaFamily::All,
            RUpper(m) => DeltaFamily::DeltaUpper(m.clone()),
        }
    }
}

impl fmt::Display for ContextStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ContextStructure::*;
        let name = match self {
            Trivial => "trivial",
            Bijective => "bijective",
            StrictlyIncreasing => "strict-increasing",
            Injective => "injective",
            Surjective => "surjective",
            LeftSurjective => "left-surjective",
            RightSurjective => "right-surjective",
            Cartesian => "cartesian",
            RUpper(m) => {
                let gens: Vec<String> = m.generators().iter().map(|g| g.to_string()).collect();
                return write!(f, "r-upper:{}", gens.join(","));
            }
        };
        f.write_str(name)
    }
}

impl FromStr for ContextStructure {
    type Err = ContextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use ContextStructure::*;
        Ok(match s {
            "trivial" => Trivial,
            "bijective" => Bijective,
            "strict-increasing" => StrictlyIncreasing,
            "injective" => Injective,
            "surjective" => Surjective,
            "left-surjective" => LeftSurjective,
            "right-surjective" => RightSurjective,
            "cartesian" => Cartesian,
            _ => match s.strip_prefix("r-upper:") {
                Some(gens) => match format!("delta-upper:{gens}").parse::<DeltaFamily>() {
                    Ok(DeltaFamily::DeltaUpper(m)) => RUpper(m),
                    _ => return Err(ContextError::UnknownStructure(s.to_string())),
                },
                None => return Err(ContextError::UnknownStructure(s.to_string())),
            },
        })
    }
}

pub fn has_repeats(word: &[Letter]) -> bool {
    word.iter().enumerate().any(|(i, l)| word[..i].contains(l))
}

fn check_context(c: &[Letter]) -> Result<(), ContextError> {
    for (i, l) in c.iter().enumerate() {
        if c[..i].contains(l) {
            return Err(ContextError::RepeatedLetter(*l));
        }
    }
    Ok(())
}

/// Decides `c R v`. Errors when `c` repeats a letter or a parametric monoid
/// cannot decide a multiplicity.
pub fn holds(r: &ContextStructure, c: &[Letter], v: &[Letter]) -> Result<bool, ContextError> {
    check_context(c)?;
    let index: HashMap<Letter, usize> = c.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut positions = Vec::with_capacity(v.len());
    for l in v {
        match index.get(l) {
            Some(&p) => positions.push(p),
            None => return Ok(false),
        }
    }
    Ok(holds_positions(r, c.len(), &positions)?)
}

/// `c R v` with `v` given as the 0-based positions of its letters in `c`.
pub(crate) fn holds_positions(r: &ContextStructure, n: usize, positions: &[usize]) -> Result<bool, FinOrdError> {
    use ContextStructure::*;
    let mut counts = vec![0usize; n];
    for &p in positions {
        counts[p] += 1;
    }
    let distinct = counts.iter().all(|&k| k <= 1);
    let covering = counts.iter().all(|&k| k >= 1);
    Ok(match r {
        Trivial => positions.len() == n && positions.iter().enumerate().all(|(i, &p)| i == p),
        Bijective => positions.len() == n && distinct,
        StrictlyIncreasing => positions.windows(2).all(|w| w[0] < w[1]),
        Injective => distinct,
        Surjective => covering,
        LeftSurjective => covering && occurrence_order(n, positions, false),
        RightSurjective => covering && occurrence_order(n, positions, true),
        Cartesian => true,
        RUpper(m) => {
            for k in counts {
                if !m.contains(k)? {
                    return Ok(false);
                }
            }
            true
        }
    })
}

/// Whether the first (or last) occurrences of the positions appear in increasing order.
fn occurrence_order(n: usize, positions: &[usize], last: bool) -> bool {
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut push = |p: usize| {
        if !std::mem::replace(&mut seen[p], true) {
            order.push(p);
        }
    };
    if last {
        positions.iter().rev().for_each(|&p| push(p));
        order.reverse();
    } else {
        positions.iter().for_each(|&p| push(p));
    }
    order.windows(2).all(|w| w[0] < w[1])
}

/// Keeps the first occurrence of each letter.
pub fn dedup_first(v: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(v.len());
    for l in v {
        if !out.contains(l) {
            out.push(*l);
        }
    }
    out
}

/// Keeps the last occurrence of each letter.
pub fn dedup_last(v: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(v.len());
    for (i, l) in v.iter().enumerate() {
        if !v[i + 1..].contains(l) {
            out.push(*l);
        }
    }
    out
}

/// The canonical terminal context of `v`, or `None` when `v` is not an `R`-word.
pub fn terminal_context(r: &ContextStructure, v: &[Letter]) -> Option<Vec<Letter>> {
    use ContextStructure::*;
    match r {
        Trivial | Bijective | StrictlyIncreasing | Injective => (!has_repeats(v)).then(|| v.to_vec()),
        Surjective | LeftSurjective | Cartesian => Some(dedup_first(v)),
        RightSurjective => Some(dedup_last(v)),
        RUpper(_) => None,
    }
}

/// Splits `c R v¹⋯vⁿ` into contexts `cᵢ R vᵢ` with `c R c¹⋯cⁿ`.
pub fn modelable_decompose(
    r: &ContextStructure,
    c: &[Letter],
    vs: &[Vec<Letter>],
) -> Result<Vec<Vec<Letter>>, ContextError> {
    if !r.is_modelable() {
        return Err(ContextError::NotModelable(r.clone()));
    }
    let whole: Vec<Letter> = vs.concat();
    if !holds(r, c, &whole)? {
        return Err(ContextError::NotGoverned);
    }
    vs.iter().map(|v| terminal_context(r, v).ok_or(ContextError::NotGoverned)).collect()
}

/// Letter `_c{i}` of the placeholder sort, used to read a function as a word.
fn placeholder(i: usize) -> Letter {
    Letter { sort: Sym::new("_"), name: Sym::new(&format!("_c{i}")) }
}

/// Whether `θ` lies in the structure category of `R`: `c₁⋯cₙ R c_θ(1)⋯c_θ(m)`.
pub fn delta_of(r: &ContextStructure, theta: &FinFn) -> Result<bool, ContextError> {
    let c: Vec<Letter> = (1..=theta.cod()).map(placeholder).collect();
    let v: Vec<Letter> = theta.images().iter().map(|&i| placeholder(i)).collect();
    holds(r, &c, &v)
}

/// The unique `θ` with `w = v_θ(1)⋯v_θ(m)`, when every letter of `w` occurs in the context `v`.
pub fn reindexing(v: &[Letter], w: &[Letter]) -> Option<FinFn> {
    let images = w.iter().map(|l| v.iter().position(|x| x == l).map(|p| p + 1)).collect::<Option<Vec<_>>>()?;
    Some(FinFn::new(v.len(), images).expect("positions lie in the context"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ContextStructure::*;

    fn word(s: &str) -> Vec<Letter> {
        s.split_whitespace().map(|n| Letter::new(n, "_")).collect()
    }

    #[test]
    fn relation_examples() {
        assert!(holds(&Injective, &word("x y z"), &word("x z")).unwrap());
        assert!(holds(&Cartesian, &word("x y z"), &word("y x y x x")).unwrap());
        assert!(holds(&LeftSurjective, &word("x y"), &word("x x y y y x")).unwrap());
        assert!(!holds(&LeftSurjective, &word("x y"), &word("y x")).unwrap());
        assert!(holds(&RightSurjective, &word("x y"), &word("y x y")).unwrap());
        assert!(holds(&Bijective, &word("x y z"), &word("y z x")).unwrap());
        assert!(!holds(&StrictlyIncreasing, &word("x y z"), &word("z x")).unwrap());
        assert!(matches!(holds(&Cartesian, &word("x x"), &word("x")), Err(ContextError::RepeatedLetter(_))));
        let at_least_one = RUpper(StructureMonoid::new([2], 16));
        assert!(holds(&at_least_one, &word("x y z"), &word("x y y z x")).unwrap());
        assert!(!holds(&at_least_one, &word("x y z"), &word("x y")).unwrap());
    }

    #[test]
    fn terminal_examples() {
        assert_eq!(terminal_context(&LeftSurjective, &word("x y x")), Some(word("x y")));
        assert_eq!(terminal_context(&RightSurjective, &word("x y x")), Some(word("y x")));
        assert_eq!(terminal_context(&Injective, &word("x x")), None);
        assert_eq!(terminal_context(&Cartesian, &word("y x y x x")), Some(word("y x")));
    }

    #[test]
    fn decompose_examples() {
        let parts = modelable_decompose(&Cartesian, &word("x y"), &[word("x x"), word("y")]).unwrap();
        assert_eq!(parts, vec![word("x"), word("y")]);
        let parts = modelable_decompose(&Bijective, &word("x y"), &[word("y"), word("x")]).unwrap();
        assert_eq!(parts, vec![word("y"), word("x")]);
        let parts = modelable_decompose(&Surjective, &word("x"), &[word("x x")]).unwrap();
        assert_eq!(parts, vec![word("x")]);
        assert_eq!(modelable_decompose(&Bijective, &word("x"), &[word("x x")]), Err(ContextError::NotGoverned));
    }

    #[test]
    fn delta_examples() {
        let swap = FinFn::new(2, vec![2, 1]).unwrap();
        assert!(delta_of(&Bijective, &swap).unwrap());
        assert!(!delta_of(&StrictlyIncreasing, &FinFn::new(1, vec![1, 1]).unwrap()).unwrap());
        assert!(delta_of(&LeftSurjective, &FinFn::new(2, vec![1, 1, 2]).unwrap()).unwrap());
    }

    #[test]
    fn structure_tokens_round_trip() {
        for r in ContextStructure::modelable() {
            assert_eq!(r.to_string().parse::<ContextStructure>().unwrap(), r);
        }
        assert!("linear".parse::<ContextStructure>().is_err());
    }
}
