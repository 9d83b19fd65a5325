//! Functions between finite ordinals and the structure categories they form.
//!
//! Ordinals are 1-indexed at every public boundary: `[n] = {1, ..., n}`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FinOrdError {
    #[error("domain mismatch: cannot compose g with dom {g_dom} after f with cod {f_cod}")]
    DomainMismatch { f_cod: usize, g_dom: usize },
    #[error("arity mismatch: expected {expected} block sizes, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("image {image} at position {position} is outside [1, {cod}]")]
    ImageOutOfRange { position: usize, image: usize, cod: usize },
    #[error("monoid query {n} exceeds closure bound {bound}")]
    OutOfBound { n: usize, bound: usize },
    #[error("psi families require 0 outside the structure monoid")]
    ZeroInPsiMonoid,
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("malformed generator list `{0}`")]
    BadGenerators(String),
}

/// A function `[dom] -> [cod]`, stored as its 1-based image sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FinFn {
    cod: usize,
    images: Vec<usize>,
}

impl FinFn {
    pub fn new(cod: usize, images: Vec<usize>) -> Result<Self, FinOrdError> {
        for (i, &e) in images.iter().enumerate() {
            if e == 0 || e > cod {
                return Err(FinOrdError::ImageOutOfRange { position: i + 1, image: e, cod });
            }
        }
        Ok(FinFn { cod, images })
    }

    pub fn identity(n: usize) -> Self {
        FinFn { cod: n, images: (1..=n).collect() }
    }

    /// The unique function `[0] -> [n]`.
    pub fn empty(n: usize) -> Self {
        FinFn { cod: n, images: Vec::new() }
    }

    pub fn dom(&self) -> usize {
        self.images.len()
    }

    pub fn cod(&self) -> usize {
        self.cod
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// Value at the 1-based point `i`.
    pub fn at(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    pub fn is_identity(&self) -> bool {
        self.dom() == self.cod && self.images.iter().enumerate().all(|(i, &e)| e == i + 1)
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.cod + 1];
        self.images.iter().all(|&e| !std::mem::replace(&mut seen[e], true))
    }

    pub fn is_surjective(&self) -> bool {
        fiber_sizes(self).iter().all(|&k| k > 0)
    }

    pub fn is_bijective(&self) -> bool {
        self.dom() == self.cod && self.is_injective()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.images.windows(2).all(|w| w[0] < w[1])
    }

    pub fn is_monotone(&self) -> bool {
        self.images.windows(2).all(|w| w[0] <= w[1])
    }

    /// Enumerates every function `[m] -> [n]` in lexicographic order of images.
    pub fn all(m: usize, n: usize) -> impl Iterator<Item = FinFn> {
        let total = if m == 0 { 1 } else { n.checked_pow(m as u32).unwrap_or(0) };
        (0..total).map(move |mut code| {
            let mut images = vec![0; m];
            for slot in images.iter_mut().rev() {
                *slot = code % n + 1;
                code /= n;
            }
            FinFn { cod: n, images }
        })
    }

    /// Every function with `dom, cod <= max`, ordered by `(cod, dom, images)`.
    pub fn all_up_to(max: usize) -> impl Iterator<Item = FinFn> {
        (0..=max).flat_map(move |n| (0..=max).flat_map(move |m| FinFn::all(m, n)))
    }
}

impl fmt::Display for FinFn {
    /// Serialized as `m n : i1 ... im`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} :", self.dom(), self.cod)?;
        for e in &self.images {
            write!(f, " {e}")?;
        }
        Ok(())
    }
}

/// `g ∘ f`, defined when `f.cod = g.dom`.
pub fn compose(g: &FinFn, f: &FinFn) -> Result<FinFn, FinOrdError> {
    if f.cod != g.dom() {
        return Err(FinOrdError::DomainMismatch { f_cod: f.cod, g_dom: g.dom() });
    }
    Ok(FinFn { cod: g.cod, images: f.images.iter().map(|&i| g.at(i)).collect() })
}

/// `f_1 + ... + f_k`: block `i` of the domain maps into block `i` of the codomain.
pub fn coproduct(fs: &[FinFn]) -> FinFn {
    let mut images = Vec::with_capacity(fs.iter().map(FinFn::dom).sum());
    let mut offset = 0;
    for f in fs {
        images.extend(f.images.iter().map(|&e| e + offset));
        offset += f.cod;
    }
    FinFn { cod: offset, images }
}

/// The component `θ'_{k_1..k_n} : [L_m] -> [K_n]` of the similarity of `θ`.
pub fn similarity_component(theta: &FinFn, ks: &[usize]) -> Result<FinFn, FinOrdError> {
    if ks.len() != theta.cod {
        return Err(FinOrdError::ArityMismatch { expected: theta.cod, got: ks.len() });
    }
    // block_start[j] = K_{j-1}
    let mut block_start = Vec::with_capacity(ks.len());
    let mut acc = 0;
    for &k in ks {
        block_start.push(acc);
        acc += k;
    }
    let mut images = Vec::new();
    for &j in &theta.images {
        let start = block_start[j - 1];
        images.extend((1..=ks[j - 1]).map(|x| start + x));
    }
    Ok(FinFn { cod: acc, images })
}

/// Entry `j` is `|f^{-1}{j+1}|`.
pub fn fiber_sizes(f: &FinFn) -> Vec<usize> {
    let mut sizes = vec![0; f.cod];
    for &e in &f.images {
        sizes[e - 1] += 1;
    }
    sizes
}

/// A structure monoid given by generators, saturated up to `bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StructureMonoid {
    generators: BTreeSet<usize>,
    bound: usize,
    members: Vec<bool>,
}

impl StructureMonoid {
    pub fn new(generators: impl IntoIterator<Item = usize>, bound: usize) -> Self {
        let generators: BTreeSet<usize> = generators.into_iter().collect();
        let mut members = vec![false; bound + 1];
        if bound >= 1 {
            members[1] = true;
        }
        for &g in &generators {
            if g <= bound {
                members[g] = true;
            }
        }
        // Fixpoint of: k, a_1..a_k in I  =>  a_1 + ... + a_k in I.
        loop {
            let current: Vec<usize> = (0..=bound).filter(|&n| members[n]).collect();
            let mut next = members.clone();
            // sums[j] = reachable totals using exactly j summands
            let mut sums = vec![false; bound + 1];
            sums[0] = true;
            let max_k = *current.last().unwrap_or(&0);
            for &member in members.iter().take(max_k.min(bound) + 1) {
                if member {
                    for n in 0..=bound {
                        next[n] |= sums[n];
                    }
                }
                let mut grown = vec![false; bound + 1];
                for n in (0..=bound).filter(|&n| sums[n]) {
                    for &a in &current {
                        if n + a <= bound {
                            grown[n + a] = true;
                        }
                    }
                }
                sums = grown;
            }
            if next == members {
                break;
            }
            members = next;
        }
        StructureMonoid { generators, bound, members }
    }

    pub fn generators(&self) -> &BTreeSet<usize> {
        &self.generators
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn contains(&self, n: usize) -> Result<bool, FinOrdError> {
        self.members.get(n).copied().ok_or(FinOrdError::OutOfBound { n, bound: self.bound })
    }

    fn token(&self) -> String {
        self.generators.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub fn monoid_contains(monoid: &StructureMonoid, n: usize) -> Result<bool, FinOrdError> {
    monoid.contains(n)
}

/// Closure horizon used when a family is parsed from its CLI token.
pub const DEFAULT_MONOID_BOUND: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DeltaFamily {
    Identities,
    Bijections,
    StrictlyIncreasing,
    Injections,
    Surjections,
    LeftSurjections,
    RightSurjections,
    All,
    DeltaUpper(StructureMonoid),
    PsiLower(StructureMonoid),
    PsiUpper(StructureMonoid),
    /// Monotone functions. Not a structure category; kept as a negative control.
    Increasing,
}

impl DeltaFamily {
    pub fn psi_lower(monoid: StructureMonoid) -> Result<Self, FinOrdError> {
        if monoid.contains(0)? {
            return Err(FinOrdError::ZeroInPsiMonoid);
        }
        Ok(DeltaFamily::PsiLower(monoid))
    }

    pub fn psi_upper(monoid: StructureMonoid) -> Result<Self, FinOrdError> {
        if monoid.contains(0)? {
            return Err(FinOrdError::ZeroInPsiMonoid);
        }
        Ok(DeltaFamily::PsiUpper(monoid))
    }

    /// The eight families that correspond to modelable context structures.
    pub fn named() -> [DeltaFamily; 8] {
        use DeltaFamily::*;
        [Identities, Bijections, StrictlyIncreasing, Injections, Surjections, LeftSurjections, RightSurjections, All]
    }
}

impl fmt::Display for DeltaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaFamily::Identities => f.write_str("identities"),
            DeltaFamily::Bijections => f.write_str("bijections"),
            DeltaFamily::StrictlyIncreasing => f.write_str("strict-increasing"),
            DeltaFamily::Injections => f.write_str("injections"),
            DeltaFamily::Surjections => f.write_str("surjections"),
            DeltaFamily::LeftSurjections => f.write_str("left-surjections"),
            DeltaFamily::RightSurjections => f.write_str("right-surjections"),
            DeltaFamily::All => f.write_str("all"),
            DeltaFamily::DeltaUpper(m) => write!(f, "delta-upper:{}", m.token()),
            DeltaFamily::PsiLower(m) => write!(f, "psi-lower:{}", m.token()),
            DeltaFamily::PsiUpper(m) => write!(f, "psi-upper:{}", m.token()),
            DeltaFamily::Increasing => f.write_str("increasing"),
        }
    }
}

impl FromStr for DeltaFamily {
    type Err = FinOrdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_monoid = |gens: &str| -> Result<StructureMonoid, FinOrdError> {
            let gens = gens
                .split(',')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(|g| g.parse::<usize>().map_err(|_| FinOrdError::BadGenerators(gens.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(StructureMonoid::new(gens, DEFAULT_MONOID_BOUND))
        };
        Ok(match s {
            "identities" => DeltaFamily::Identities,
            "bijections" => DeltaFamily::Bijections,
            "strict-increasing" => DeltaFamily::StrictlyIncreasing,
            "injections" => DeltaFamily::Injections,
            "surjections" => DeltaFamily::Surjections,
            "left-surjections" => DeltaFamily::LeftSurjections,
            "right-surjections" => DeltaFamily::RightSurjections,
            "all" => DeltaFamily::All,
            "increasing" => DeltaFamily::Increasing,
            _ => match s.split_once(':') {
                Some(("delta-upper", gens)) => DeltaFamily::DeltaUpper(parse_monoid(gens)?),
                Some(("psi-lower", gens)) => DeltaFamily::psi_lower(parse_monoid(gens)?)?,
                Some(("psi-upper", gens)) => DeltaFamily::psi_upper(parse_monoid(gens)?)?,
                _ => return Err(FinOrdError::UnknownFamily(s.to_string())),
            },
        })
    }
}

/// Position of the first (or last) element of each fiber; `None` for empty fibers.
fn fiber_extremes(f: &FinFn, last: bool) -> Vec<Option<usize>> {
    let mut out = vec![None; f.cod];
    for (i, &e) in f.images.iter().enumerate() {
        let slot = &mut out[e - 1];
        if last || slot.is_none() {
            *slot = Some(i);
        }
    }
    out
}

fn extremes_monotone(f: &FinFn, last: bool) -> bool {
    let ext = fiber_extremes(f, last);
    ext.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => a <= b,
        _ => false,
    }) && ext.iter().all(Option::is_some)
}

fn fibers_in(f: &FinFn, monoid: &StructureMonoid) -> Result<bool, FinOrdError> {
    for k in fiber_sizes(f) {
        if !monoid.contains(k)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Membership by direct characterization. Errors only when a fiber size
/// exceeds the closure bound of a parametric family's monoid.
pub fn in_family(d: &DeltaFamily, f: &FinFn) -> Result<bool, FinOrdError> {
    Ok(match d {
        DeltaFamily::Identities => f.is_identity(),
        DeltaFamily::Bijections => f.is_bijective(),
        DeltaFamily::StrictlyIncreasing => f.is_strictly_increasing(),
        DeltaFamily::Injections => f.is_injective(),
        DeltaFamily::Surjections => f.is_surjective(),
        DeltaFamily::LeftSurjections => extremes_monotone(f, false),
        DeltaFamily::RightSurjections => extremes_monotone(f, true),
        DeltaFamily::All => true,
        DeltaFamily::DeltaUpper(m) => fibers_in(f, m)?,
        DeltaFamily::PsiLower(m) => fibers_in(f, m)? && extremes_monotone(f, false),
        DeltaFamily::PsiUpper(m) => fibers_in(f, m)? && extremes_monotone(f, true),
        DeltaFamily::Increasing => f.is_monotone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingIdentity {
        n: usize,
    },
    Composition {
        g: FinFn,
        f: FinFn,
        result: FinFn,
    },
    Coproduct {
        f: FinFn,
        g: FinFn,
        result: FinFn,
    },
    Similarity {
        theta: FinFn,
        ks: Vec<usize>,
        result: FinFn,
    },
    /// A parametric monoid could not decide membership of some fiber size.
    Undecided {
        function: FinFn,
        error: FinOrdError,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingIdentity { n } => write!(f, "identity: id[{n}] missing"),
            Violation::Composition { g, f: h, result } => {
                write!(f, "composition: g = {g} ; f = {h} ; g.f = {result}")
            }
            Violation::Coproduct { f: a, g, result } => {
                write!(f, "coproduct: f = {a} ; g = {g} ; f+g = {result}")
            }
            Violation::Similarity { theta, ks, result } => {
                let ks: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                write!(f, "similarity: theta = {theta} ; ks = ({}) ; component = {result}", ks.join(" "))
            }
            Violation::Undecided { function, error } => write!(f, "undecided: {function} ; {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryReport {
    pub family: String,
    pub max_n: usize,
    pub members: usize,
    pub violation: Option<Violation>,
}

impl CategoryReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

impl fmt::Display for CategoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.violation {
            None => write!(f, "pass {} max={} members={}", self.family, self.max_n, self.members),
            Some(v) => write!(f, "fail {} max={} members={} : {v}", self.family, self.max_n, self.members),
        }
    }
}

/// Exhaustive closure check over the members with `dom, cod <= max_n`.
///
/// Checks run in the order identities, composition, coproduct, similarity;
/// the first violation in enumeration order is reported.
pub fn verify_structure_category(d: &DeltaFamily, max_n: usize) -> CategoryReport {
    let mut report = CategoryReport { family: d.to_string(), max_n, members: 0, violation: None };
    let member = |f: &FinFn| in_family(d, f).map_err(|error| Violation::Undecided { function: f.clone(), error });
    let run = || -> Result<usize, Violation> {
        let mut members = Vec::new();
        for f in FinFn::all_up_to(max_n) {
            if member(&f)? {
                members.push(f);
            }
        }
        for n in 0..=max_n {
            if !member(&FinFn::identity(n))? {
                return Err(Violation::MissingIdentity { n });
            }
        }
        for f in &members {
            for g in members.iter().filter(|g| g.dom() == f.cod()) {
                let result = compose(g, f).expect("composable by construction");
                if !member(&result)? {
                    return Err(Violation::Composition { g: g.clone(), f: f.clone(), result });
                }
            }
        }
        for f in &members {
            for g in &members {
                let result = coproduct(&[f.clone(), g.clone()]);
                if !member(&result)? {
                    return Err(Violation::Coproduct { f: f.clone(), g: g.clone(), result });
                }
            }
        }
        for theta in &members {
            let n = theta.cod();
            let radix = max_n + 1;
            let total = radix.pow(n as u32);
            for mut code in 0..total {
                let mut ks = vec![0; n];
                for slot in ks.iter_mut().rev() {
                    *slot = code % radix;
                    code /= radix;
                }
                let result = similarity_component(theta, &ks).expect("ks sized to cod");
                if !member(&result)? {
                    return Err(Violation::Similarity { theta: theta.clone(), ks, result });
                }
            }
        }
        Ok(members.len())
    };
    match run() {
        Ok(count) => report.members = count,
        Err(v) => {
            report.members = FinFn::all_up_to(max_n).filter(|f| in_family(d, f).unwrap_or(false)).count();
            report.violation = Some(v);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ff(cod: usize, images: &[usize]) -> FinFn {
        FinFn::new(cod, images.to_vec()).unwrap()
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose(&FinFn::identity(3), &ff(3, &[2, 1])).unwrap(), ff(3, &[2, 1]));
        assert_eq!(compose(&ff(2, &[2]), &ff(1, &[1, 1])).unwrap(), ff(2, &[2, 2]));
        assert_eq!(compose(&ff(2, &[2, 1]), &ff(2, &[2, 1])).unwrap(), FinFn::identity(2));
        assert!(matches!(
            compose(&ff(2, &[1, 2]), &ff(3, &[1])),
            Err(FinOrdError::DomainMismatch { f_cod: 3, g_dom: 2 })
        ));
    }

    #[test]
    fn coproduct_examples() {
        assert_eq!(coproduct(&[FinFn::identity(1), FinFn::identity(1)]), FinFn::identity(2));
        assert_eq!(coproduct(&[ff(1, &[1, 1]), ff(1, &[1])]), ff(2, &[1, 1, 2]));
        assert_eq!(coproduct(&[]), FinFn::identity(0));
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity_component(&ff(2, &[2, 1]), &[1, 2]).unwrap(), ff(3, &[2, 3, 1]));
        assert_eq!(similarity_component(&ff(1, &[1, 1]), &[2]).unwrap(), ff(2, &[1, 2, 1, 2]));
        for theta in FinFn::all_up_to(3) {
            let ones = vec![1; theta.cod()];
            assert_eq!(similarity_component(&theta, &ones).unwrap(), theta);
        }
        assert!(matches!(
            similarity_component(&ff(2, &[1]), &[1]),
            Err(FinOrdError::ArityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn fiber_examples() {
        assert_eq!(fiber_sizes(&FinFn::identity(3)), vec![1, 1, 1]);
        assert_eq!(fiber_sizes(&ff(1, &[1, 1])), vec![2]);
        assert_eq!(fiber_sizes(&ff(3, &[2, 2, 1])), vec![1, 2, 0]);
    }

    #[test]
    fn monoid_examples() {
        let trivial = StructureMonoid::new([], 10);
        assert!(trivial.contains(1).unwrap());
        assert!(!trivial.contains(0).unwrap());
        assert!(!trivial.contains(2).unwrap());

        let two = StructureMonoid::new([2], 10);
        assert!(!two.contains(0).unwrap());
        assert!((1..=10).all(|n| two.contains(n).unwrap()));

        // Three summands 1 + 1 + 0 give 2, so {0,3} generates all of N.
        let zero_three = StructureMonoid::new([0, 3], 10);
        assert!((0..=10).all(|n| zero_three.contains(n).unwrap()));

        let zero = StructureMonoid::new([0], 10);
        assert_eq!((0..=10).filter(|&n| zero.contains(n).unwrap()).collect::<Vec<_>>(), vec![0, 1]);

        assert_eq!(two.contains(11), Err(FinOrdError::OutOfBound { n: 11, bound: 10 }));
    }

    #[test]
    fn family_examples() {
        let swap = ff(2, &[2, 1]);
        assert!(in_family(&DeltaFamily::Bijections, &swap).unwrap());
        assert!(!in_family(&DeltaFamily::StrictlyIncreasing, &swap).unwrap());
        assert!(in_family(&DeltaFamily::LeftSurjections, &ff(2, &[1, 1, 2])).unwrap());
        assert!(!in_family(&DeltaFamily::LeftSurjections, &ff(2, &[2, 1, 1])).unwrap());
        let upper = DeltaFamily::DeltaUpper(StructureMonoid::new([0, 1], 10));
        assert!(in_family(&upper, &ff(3, &[1, 3])).unwrap());
        assert!(DeltaFamily::psi_lower(StructureMonoid::new([0], 10)).is_err());
    }

    #[test]
    fn family_tokens_round_trip() {
        for token in [
            "identities",
            "bijections",
            "strict-increasing",
            "injections",
            "surjections",
            "left-surjections",
            "right-surjections",
            "all",
            "increasing",
            "delta-upper:0,1",
            "psi-lower:2",
            "psi-upper:3",
        ] {
            assert_eq!(token.parse::<DeltaFamily>().unwrap().to_string(), token);
        }
        assert!("psi-lower:0".parse::<DeltaFamily>().is_err());
        assert!("nonsense".parse::<DeltaFamily>().is_err());
    }

    #[test]
    fn display_format() {
        assert_eq!(ff(3, &[2, 3, 1]).to_string(), "3 3 : 2 3 1");
        assert_eq!(FinFn::empty(2).to_string(), "0 2 :");
    }
}
