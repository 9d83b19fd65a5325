//! Bounded forward saturation of the deduction closure, with replayable
//! proof objects and the invariant-based refuter for the two structures
//! whose deduction is not complete for set models.
//!
//! For every canonical context `w` (letters `_v1.._vn`, `n <= max_ctx_len`)
//! the universe `U_w` holds all terms of depth `<= max_term_depth` that `w`
//! governs. Provable equality in `w` is a union-find over `U_w`, closed under
//!
//! * axiom instances `s(l) ~ s(r)` guarded by an `R`-renaming into `w`, and
//! * congruence `f(a..) ~ f(b..)` when for some side contexts `ws` with
//!   `w R ws₁⋯wsₖ` every pair `aⱼ ~ bⱼ` is already equal in `wsⱼ`.
//!
//! Both are instances of the substitution rule; reflexivity, symmetry and
//! transitivity are implicit in the union-find.

use std::cell::Cell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

use crate::congruence::CongruenceState;
use crate::context::{self, holds_positions, terminal_context, ContextStructure, Letter};
use crate::symbol::Sym;
use crate::syntax::{context_for_sorts, is_r_context, r_renaming_guard, Equation, SyntaxError, Term, TermKind, Theory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeductionError {
    #[error("bounds must be at least 1 (got depth {0}, ctx {1}, rounds {2})")]
    InvalidBounds(usize, usize, usize),
    #[error("invalid goal: {0}")]
    InvalidGoal(#[from] SyntaxError),
    #[error("the invariant refuter needs an injective or strict-increasing theory, not {0}")]
    UnsupportedStructure(ContextStructure),
    #[error("axiom `{0}` lies outside the invariant family, so the invariant proves nothing")]
    AxiomOutsideInvariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub max_term_depth: usize,
    pub max_ctx_len: usize,
    pub max_rounds: usize,
}

impl Bounds {
    pub fn new(max_term_depth: usize, max_ctx_len: usize, max_rounds: usize) -> Result<Bounds, DeductionError> {
        if max_term_depth == 0 || max_ctx_len == 0 || max_rounds == 0 {
            return Err(DeductionError::InvalidBounds(max_term_depth, max_ctx_len, max_rounds));
        }
        Ok(Bounds { max_term_depth, max_ctx_len, max_rounds })
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "depth {} ctx {} rounds {}", self.max_term_depth, self.max_ctx_len, self.max_rounds)
    }
}

/// The bound that cut a saturation short. Ordered as reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Truncation {
    Rounds,
    Depth,
    Ctx,
}

impl fmt::Display for Truncation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truncation::Rounds => "rounds",
            Truncation::Depth => "depth",
            Truncation::Ctx => "ctx",
        })
    }
}

/// A derivation tree. `Subst` substitutions are positional over the
/// premise's context: `s1[i]` and `s2[i]` replace its `i`-th letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proof {
    Axiom {
        name: String,
        eq: Equation,
    },
    Refl {
        term: Term,
        ctx: Vec<Letter>,
    },
    Sym(Arc<Proof>),
    Trans(Arc<Proof>, Arc<Proof>),
    Subst {
        s1: Vec<Term>,
        s2: Vec<Term>,
        w: Vec<Letter>,
        ws: Vec<Vec<Letter>>,
        premise: Arc<Proof>,
        sides: Vec<Arc<Proof>>,
    },
}

impl Proof {
    /// The equation this tree claims, computed without checking any rule.
    pub fn conclusion(&self) -> Equation {
        match self {
            Proof::Axiom { eq, .. } => eq.clone(),
            Proof::Refl { term, ctx } => Equation::new("refl", term.clone(), term.clone(), ctx.clone()),
            Proof::Sym(p) => p.conclusion().flipped(),
            Proof::Trans(p, q) => {
                let (a, b) = (p.conclusion(), q.conclusion());
                Equation::new("trans", a.lhs, b.rhs, a.ctx)
            }
            Proof::Subst { s1, s2, w, premise, .. } => {
                let e = premise.conclusion();
                Equation::new("subst", e.lhs.substitute(&e.ctx, s1), e.rhs.substitute(&e.ctx, s2), w.clone())
            }
        }
    }

    /// Number of rule applications.
    pub fn size(&self) -> usize {
        match self {
            Proof::Axiom { .. } | Proof::Refl { .. } => 1,
            Proof::Sym(p) => 1 + p.size(),
            Proof::Trans(p, q) => 1 + p.size() + q.size(),
            Proof::Subst { premise, sides, .. } => 1 + premise.size() + sides.iter().map(|s| s.size()).sum::<usize>(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Proof::Axiom { .. } | Proof::Refl { .. } => 1,
            Proof::Sym(p) => 1 + p.height(),
            Proof::Trans(p, q) => 1 + p.height().max(q.height()),
            Proof::Subst { premise, sides, .. } => {
                1 + sides.iter().map(|s| s.height()).max().unwrap_or(0).max(premise.height())
            }
        }
    }

    fn render_into(&self, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        let concl = self.conclusion();
        let (rule, children): (String, Vec<&Arc<Proof>>) = match self {
            Proof::Axiom { name, .. } => (format!("axiom {name}"), vec![]),
            Proof::Refl { .. } => ("refl".into(), vec![]),
            Proof::Sym(p) => ("sym".into(), vec![p]),
            Proof::Trans(p, q) => ("trans".into(), vec![p, q]),
            Proof::Subst { ws, premise, sides, .. } => {
                let ws: Vec<String> = ws.iter().map(|w| format!("[{}]", context::show_word(w))).collect();
                (format!("subst ws=({})", ws.join(" ")), std::iter::once(premise).chain(sides).collect())
            }
        };
        out.push_str(&format!("{pad}{rule} : {concl}\n"));
        for c in children {
            c.render_into(indent + 1, out);
        }
    }

    /// Indented rule tree, one rule per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(0, &mut out);
        out
    }
}

impl fmt::Display for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("proof rejected at {path}: {msg}")]
pub struct ProofError {
    pub path: String,
    pub msg: String,
}

/// Replays every rule of `p` against `theory` and returns the proven equation.
pub fn check_proof(theory: &Theory, p: &Proof) -> Result<Equation, ProofError> {
    check_at(theory, p, "root")
}

fn check_at(theory: &Theory, p: &Proof, path: &str) -> Result<Equation, ProofError> {
    let fail = |msg: String| Err(ProofError { path: path.to_string(), msg });
    let r = &theory.structure;
    match p {
        Proof::Axiom { name, eq } => {
            let Some(ax) = theory.axiom(name) else {
                return fail(format!("no axiom named `{name}`"));
            };
            if !ax.same_up_to_renaming(eq) {
                return fail(format!("`{eq}` is not a renaming of axiom `{name}`"));
            }
            Ok(eq.clone())
        }
        Proof::Refl { term, ctx } => {
            if !theory.signature.well_typed(term) {
                return fail(format!("`{term}` is ill-typed"));
            }
            match is_r_context(r, ctx, term) {
                Ok(true) => Ok(Equation::new("refl", term.clone(), term.clone(), ctx.clone())),
                Ok(false) => fail(format!("[{}] is not an {r} context for `{term}`", context::show_word(ctx))),
                Err(e) => fail(e.to_string()),
            }
        }
        Proof::Sym(q) => Ok(check_at(theory, q, &format!("{path}/sym"))?.flipped()),
        Proof::Trans(q1, q2) => {
            let a = check_at(theory, q1, &format!("{path}/trans.0"))?;
            let b = check_at(theory, q2, &format!("{path}/trans.1"))?;
            if a.ctx != b.ctx {
                return fail("premises use different contexts".into());
            }
            if a.rhs != b.lhs {
                return fail(format!("middle terms differ: `{}` vs `{}`", a.rhs, b.lhs));
            }
            Ok(Equation::new("trans", a.lhs, b.rhs, a.ctx))
        }
        Proof::Subst { s1, s2, w, ws, premise, sides } => {
            let e = check_at(theory, premise, &format!("{path}/subst.premise"))?;
            let n = e.ctx.len();
            if [s1.len(), s2.len(), ws.len(), sides.len()].iter().any(|&k| k != n) {
                return fail(format!("substitution shape does not match the {n}-letter premise context"));
            }
            for s in [s1, s2] {
                if let Some(t) = s.iter().find(|t| !theory.signature.well_typed(t)) {
                    return fail(format!("substituted term `{t}` is ill-typed"));
                }
                match r_renaming_guard(r, &e.ctx, s, w, ws) {
                    Ok(true) => {}
                    Ok(false) => return fail(format!("not an {r} renaming into [{}]", context::show_word(w))),
                    Err(err) => return fail(err.to_string()),
                }
            }
            for (i, side) in sides.iter().enumerate() {
                let got = check_at(theory, side, &format!("{path}/subst.side{i}"))?;
                if got.lhs != s1[i] || got.rhs != s2[i] || got.ctx != ws[i] {
                    return fail(format!(
                        "side {i} proves `{got}` but `{} ~ {} ctx {}` is required",
                        s1[i],
                        s2[i],
                        crate::syntax::show_ctx(&ws[i])
                    ));
                }
            }
            Ok(Equation::new("subst", e.lhs.substitute(&e.ctx, s1), e.rhs.substitute(&e.ctx, s2), w.clone()))
        }
    }
}

/// Why two universe members were merged.
#[derive(Debug, Clone)]
enum Just {
    /// `s(l) ~ s(r)` for axiom `axiom`; the edge runs from `s(l)` to `s(r)`.
    Instance { axiom: usize, images: Vec<Term>, ws: Vec<Vec<Letter>> },
    /// Same operator with children equal in the side contexts `ws`.
    Congruence { ws: Vec<Vec<usize>> },
}

/// Precomputed congruence signature of one application in one side-context tuple.
#[derive(Debug, Clone)]
struct CongEntry {
    term: usize,
    op: Sym,
    ws: Vec<Vec<usize>>,
    children: Vec<(usize, usize)>,
}

#[derive(Debug)]
struct Universe {
    sorts: Vec<Sym>,
    ctx: Vec<Letter>,
    terms: Vec<Term>,
    index: HashMap<Term, usize>,
    candidates: Vec<Term>,
    uf: CongruenceState<Just>,
    entries: Vec<CongEntry>,
}

/// Positions in `ctx` of the letters of `t`, left to right.
fn positions(ctx: &[Letter], t: &Term) -> Vec<usize> {
    t.tau().iter().map(|l| ctx.iter().position(|x| x == l).expect("term over context letters")).collect()
}

/// A prefix-closed necessary condition for `c R v`, used to prune enumeration.
fn prefilter(r: &ContextStructure, pos: &[usize]) -> bool {
    use ContextStructure::*;
    let distinct = || pos.iter().enumerate().all(|(i, p)| !pos[..i].contains(p));
    match r {
        Trivial => pos.iter().enumerate().all(|(i, &p)| p == i),
        StrictlyIncreasing => pos.windows(2).all(|w| w[0] < w[1]),
        Bijective | Injective => distinct(),
        _ => true,
    }
}

/// All terms of depth `<= depth` over the letters of `ctx` and the constants,
/// passing the structure's prefilter, in layer order.
fn enumerate_candidates(theory: &Theory, ctx: &[Letter], depth: usize) -> Vec<Term> {
    let r = &theory.structure;
    let mut all: Vec<(Term, Vec<usize>)> = ctx.iter().enumerate().map(|(i, l)| (Term::var(*l), vec![i])).collect();
    all.retain(|(_, p)| prefilter(r, p));
    all.extend(theory.signature.constants().map(|(c, s)| (Term::constant(c, s), vec![])));
    for d in 2..=depth {
        let prev = all.clone();
        for (op, decl) in theory.signature.ops() {
            if decl.arity.is_empty() {
                continue;
            }
            let mut chosen: Vec<usize> = Vec::new();
            let mut stack_pos: Vec<usize> = Vec::new();
            grow(r, &prev, &decl.arity, d - 1, &mut chosen, &mut stack_pos, &mut |kids, pos| {
                let args = kids.iter().map(|&k| prev[k].0.clone()).collect();
                all.push((Term::app(op, decl.result, args), pos.to_vec()));
            });
        }
    }
    all.into_iter().map(|(t, _)| t).collect()
}

/// Extends a partial argument tuple; calls `emit` for complete tuples whose
/// deepest child has exactly depth `top`.
fn grow(
    r: &ContextStructure,
    pool: &[(Term, Vec<usize>)],
    arity: &[Sym],
    top: usize,
    chosen: &mut Vec<usize>,
    pos: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize], &[usize]),
) {
    if chosen.len() == arity.len() {
        if chosen.iter().any(|&k| pool[k].0.depth() == top) {
            emit(chosen, pos);
        }
        return;
    }
    let sort = arity[chosen.len()];
    for (k, (t, p)) in pool.iter().enumerate() {
        if t.sort() != sort {
            continue;
        }
        let mark = pos.len();
        pos.extend_from_slice(p);
        if prefilter(r, pos) {
            chosen.push(k);
            grow(r, pool, arity, top, chosen, pos, emit);
            chosen.pop();
        }
        pos.truncate(mark);
    }
}

/// Candidate side-context tuples (as positions in `w`) for an application
/// whose children have letter positions `taus`.
fn side_tuples(r: &ContextStructure, n: usize, taus: &[Vec<usize>]) -> Vec<Vec<Vec<usize>>> {
    use ContextStructure::*;
    let sorted_distinct = |t: &Vec<usize>| -> Vec<usize> {
        let mut s = t.clone();
        s.sort_unstable();
        s.dedup();
        s
    };
    match r {
        Cartesian => vec![taus.iter().map(|_| (0..n).collect()).collect()],
        Trivial => vec![taus.to_vec()],
        Bijective | Surjective => vec![taus.iter().map(sorted_distinct).collect()],
        LeftSurjective => vec![taus.iter().map(|t| dedup_positions(t, false)).collect()],
        RightSurjective => vec![taus.iter().map(|t| dedup_positions(t, true)).collect()],
        Injective | StrictlyIncreasing => {
            let base: Vec<Vec<usize>> = taus.iter().map(sorted_distinct).collect();
            let used: BTreeSet<usize> = base.iter().flatten().copied().collect();
            let leftover: Vec<usize> = (0..n).filter(|p| !used.contains(p)).collect();
            let k = taus.len();
            let mut out = Vec::new();
            let total = (k + 1).pow(leftover.len() as u32);
            for mut code in 0..total {
                let mut ws = base.clone();
                for &p in &leftover {
                    let slot = code % (k + 1);
                    code /= k + 1;
                    if slot > 0 {
                        ws[slot - 1].push(p);
                    }
                }
                ws.iter_mut().for_each(|w| w.sort_unstable());
                let concat: Vec<usize> = ws.concat();
                let ok = match r {
                    StrictlyIncreasing => concat.windows(2).all(|w| w[0] < w[1]),
                    _ => true,
                };
                if ok {
                    out.push(ws);
                }
            }
            out
        }
        RUpper(_) => Vec::new(),
    }
}

fn dedup_positions(t: &[usize], last: bool) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    if last {
        for (i, p) in t.iter().enumerate() {
            if !t[i + 1..].contains(p) {
                out.push(*p);
            }
        }
    } else {
        for p in t {
            if !out.contains(p) {
                out.push(*p);
            }
        }
    }
    out
}

/// Binds pattern letters (from `ctx`) so that `pat` becomes `t`.
fn match_term(pat: &Term, t: &Term, ctx: &[Letter], binding: &mut [Option<Term>]) -> bool {
    match pat.kind() {
        TermKind::Var(l) => {
            if l.sort != t.sort() {
                return false;
            }
            let i = ctx.iter().position(|x| x == l).expect("axiom sides use context letters");
            match &binding[i] {
                Some(b) => b == t,
                None => {
                    binding[i] = Some(t.clone());
                    true
                }
            }
        }
        TermKind::Const(_) => pat == t,
        TermKind::App(f, ps) => match t.kind() {
            TermKind::App(g, ts) if f == g && ps.len() == ts.len() => {
                ps.iter().zip(ts).all(|(p, s)| match_term(p, s, ctx, binding))
            }
            _ => false,
        },
    }
}

/// Deepest position (root = 1) at which `l` occurs in `t`.
fn occurrence_depth(t: &Term, l: Letter) -> Option<usize> {
    match t.kind() {
        TermKind::Var(x) => (*x == l).then_some(1),
        TermKind::Const(_) => None,
        TermKind::App(_, args) => args.iter().filter_map(|a| occurrence_depth(a, l)).max().map(|d| d + 1),
    }
}

/// Terminal side contexts for `images` when they form an `R`-renaming into `w`.
fn guard(r: &ContextStructure, w: &[Letter], images: &[Term]) -> Option<Vec<Vec<Letter>>> {
    let ws = images.iter().map(|t| terminal_context(r, &t.tau())).collect::<Option<Vec<_>>>()?;
    context::holds(r, w, &ws.concat()).ok()?.then_some(ws)
}

struct Found {
    a: usize,
    b: usize,
    just: Just,
}

impl Universe {
    fn build(theory: &Theory, sorts: Vec<Sym>, bounds: &Bounds) -> Universe {
        let ctx = context_for_sorts(&sorts);
        let candidates = enumerate_candidates(theory, &ctx, bounds.max_term_depth);
        let r = &theory.structure;
        let terms: Vec<Term> = candidates
            .iter()
            .filter(|t| holds_positions(r, ctx.len(), &positions(&ctx, t)).unwrap_or(false))
            .cloned()
            .collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let uf = CongruenceState::new(terms.len());
        Universe { sorts, ctx, terms, index, candidates, uf, entries: Vec::new() }
    }

    /// Axiom instances landing in this universe, plus whether some instance
    /// was dropped for exceeding the depth bound.
    fn instances(&self, theory: &Theory, bounds: &Bounds) -> (Vec<Found>, bool) {
        let r = &theory.structure;
        let mut found = Vec::new();
        let too_deep = Cell::new(false);
        // One representative candidate per (sort, word): letters absent from
        // both sides only matter through their variable word.
        let mut word_reps: Vec<Term> = Vec::new();
        let mut seen: BTreeSet<(Sym, Vec<usize>)> = BTreeSet::new();
        for t in &self.candidates {
            if seen.insert((t.sort(), positions(&self.ctx, t))) {
                word_reps.push(t.clone());
            }
        }
        for (ai, ax) in theory.equations.iter().enumerate() {
            let v = &ax.ctx;
            for (pat, other, forward) in [(&ax.lhs, &ax.rhs, true), (&ax.rhs, &ax.lhs, false)] {
                let pat_vars = pat.vars();
                let free: Vec<usize> = (0..v.len())
                    .filter(|&i| !pat_vars.contains(&v[i]) && occurrence_depth(other, v[i]).is_some())
                    .collect();
                let neither: Vec<usize> =
                    (0..v.len()).filter(|&i| !pat_vars.contains(&v[i]) && !free.contains(&i)).collect();
                let budgets: Vec<usize> = free
                    .iter()
                    .map(|&i| (bounds.max_term_depth + 1).saturating_sub(occurrence_depth(other, v[i]).unwrap()))
                    .collect();
                for (ui, u) in self.terms.iter().enumerate() {
                    let mut binding: Vec<Option<Term>> = vec![None; v.len()];
                    if !match_term(pat, u, v, &mut binding) {
                        continue;
                    }
                    let mut on_full = |images: Vec<Term>, ws: Vec<Vec<Letter>>| {
                        let result = other.substitute(v, &images);
                        if result.depth() > bounds.max_term_depth {
                            too_deep.set(true);
                            return;
                        }
                        let Some(&bi) = self.index.get(&result) else { return };
                        let (a, b) = if forward { (ui, bi) } else { (bi, ui) };
                        if a != b {
                            found.push(Found { a, b, just: Just::Instance { axiom: ai, images, ws } });
                        }
                    };
                    self.assign_free(
                        r,
                        v,
                        &free,
                        &budgets,
                        &neither,
                        &word_reps,
                        &mut binding,
                        0,
                        &too_deep,
                        &mut on_full,
                    );
                }
            }
        }
        (found, too_deep.get())
    }

    #[allow(clippy::too_many_arguments)]
    fn assign_free(
        &self,
        r: &ContextStructure,
        v: &[Letter],
        free: &[usize],
        budgets: &[usize],
        neither: &[usize],
        word_reps: &[Term],
        binding: &mut Vec<Option<Term>>,
        k: usize,
        too_deep: &Cell<bool>,
        on_full: &mut dyn FnMut(Vec<Term>, Vec<Vec<Letter>>),
    ) {
        if k == free.len() {
            if let Some((images, ws)) = self.assign_neither(r, v, neither, word_reps, binding, 0) {
                on_full(images, ws);
            }
            return;
        }
        let i = free[k];
        for t in &self.candidates {
            if t.sort() != v[i].sort {
                continue;
            }
            if t.depth() > budgets[k] {
                too_deep.set(true);
                continue;
            }
            binding[i] = Some(t.clone());
            self.assign_free(r, v, free, budgets, neither, word_reps, binding, k + 1, too_deep, on_full);
        }
        binding[i] = None;
    }

    /// First assignment of the unconstrained letters that makes the renaming legal.
    fn assign_neither(
        &self,
        r: &ContextStructure,
        v: &[Letter],
        neither: &[usize],
        word_reps: &[Term],
        binding: &mut Vec<Option<Term>>,
        k: usize,
    ) -> Option<(Vec<Term>, Vec<Vec<Letter>>)> {
        if k == neither.len() {
            let images: Vec<Term> = binding.iter().map(|b| b.clone().expect("all letters bound")).collect();
            return guard(r, &self.ctx, &images).map(|ws| (images, ws));
        }
        let i = neither[k];
        for t in word_reps.iter().filter(|t| t.sort() == v[i].sort) {
            binding[i] = Some(t.clone());
            if let Some(hit) = self.assign_neither(r, v, neither, word_reps, binding, k + 1) {
                binding[i] = None;
                return Some(hit);
            }
        }
        binding[i] = None;
        None
    }
}

/// The result of a bounded saturation.
pub struct Saturation {
    theory: Theory,
    bounds: Bounds,
    universes: Vec<Universe>,
    by_sorts: HashMap<Vec<Sym>, usize>,
    truncation: BTreeSet<Truncation>,
    rounds: usize,
    memo: Mutex<HashMap<(usize, usize, usize), Arc<Proof>>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProveOutcome {
    Proved(Arc<Proof>),
    /// Not derived. An empty list means the saturation finished within all bounds.
    NotFound {
        truncated: Vec<Truncation>,
    },
}

impl ProveOutcome {
    pub fn is_proved(&self) -> bool {
        matches!(self, ProveOutcome::Proved(_))
    }

    pub fn proof(&self) -> Option<&Arc<Proof>> {
        match self {
            ProveOutcome::Proved(p) => Some(p),
            ProveOutcome::NotFound { .. } => None,
        }
    }
}

fn sort_vectors(sorts: &[Sym], max_len: usize) -> Vec<Vec<Sym>> {
    let mut out = vec![vec![]];
    let mut layer = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for v in &layer {
            for s in sorts {
                let mut w: Vec<Sym> = v.clone();
                w.push(*s);
                next.push(w);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Saturates the theory's deduction closure within `bounds`.
pub fn saturate(theory: &Theory, bounds: Bounds) -> Saturation {
    let vectors = sort_vectors(theory.signature.sorts(), bounds.max_ctx_len);
    let mut universes: Vec<Universe> =
        vectors.into_par_iter().map(|sorts| Universe::build(theory, sorts, &bounds)).collect();
    let by_sorts: HashMap<Vec<Sym>, usize> = universes.iter().enumerate().map(|(i, u)| (u.sorts.clone(), i)).collect();

    let entries: Vec<Vec<CongEntry>> =
        universes.par_iter().map(|u| congruence_entries(&theory.structure, u, &universes, &by_sorts)).collect();
    for (u, e) in universes.iter_mut().zip(entries) {
        u.entries = e;
    }

    let mut truncation = BTreeSet::new();
    if theory.equations.iter().any(|e| e.ctx.len() > bounds.max_ctx_len) {
        truncation.insert(Truncation::Ctx);
    }
    let found: Vec<(Vec<Found>, bool)> = universes.par_iter().map(|u| u.instances(theory, &bounds)).collect();
    let mut merged_round = false;
    for (u, (instances, too_deep)) in universes.iter_mut().zip(found) {
        if too_deep {
            truncation.insert(Truncation::Depth);
        }
        for f in instances {
            merged_round |= u.uf.union(f.a, f.b, f.just);
        }
    }

    let mut rounds = 0;
    loop {
        rounds += 1;
        merged_round |= congruence_round(&mut universes);
        if !merged_round {
            break;
        }
        if rounds == bounds.max_rounds {
            truncation.insert(Truncation::Rounds);
            break;
        }
        merged_round = false;
    }

    Saturation {
        theory: theory.clone(),
        bounds,
        universes,
        by_sorts,
        truncation,
        rounds,
        memo: Mutex::new(HashMap::new()),
    }
}

fn congruence_entries(
    r: &ContextStructure,
    u: &Universe,
    all: &[Universe],
    by_sorts: &HashMap<Vec<Sym>, usize>,
) -> Vec<CongEntry> {
    let mut out = Vec::new();
    for (ti, t) in u.terms.iter().enumerate() {
        let TermKind::App(op, args) = t.kind() else { continue };
        let taus: Vec<Vec<usize>> = args.iter().map(|a| positions(&u.ctx, a)).collect();
        'tuples: for ws in side_tuples(r, u.ctx.len(), &taus) {
            let mut children = Vec::with_capacity(args.len());
            for (a, wj) in args.iter().zip(&ws) {
                let letters: Vec<Letter> = wj.iter().map(|&p| u.ctx[p]).collect();
                let sorts: Vec<Sym> = letters.iter().map(|l| l.sort).collect();
                let Some(&ci) = by_sorts.get(&sorts) else { continue 'tuples };
                let canon = a.rename(&letters, &all[ci].ctx);
                let Some(&idx) = all[ci].index.get(&canon) else { continue 'tuples };
                children.push((ci, idx));
            }
            out.push(CongEntry { term: ti, op: *op, ws, children });
        }
    }
    out
}

/// One pass over all universes in order, each closed to a local fixpoint.
fn congruence_round(universes: &mut [Universe]) -> bool {
    let mut any = false;
    for ui in 0..universes.len() {
        loop {
            let mut merges: Vec<(usize, usize, Vec<Vec<usize>>)> = Vec::new();
            {
                let u = &universes[ui];
                // (operation, context words, child roots) -> first entry seen with that signature
                type Key<'a> = (Sym, &'a Vec<Vec<usize>>, Vec<usize>);
                let mut table: HashMap<Key, usize> = HashMap::new();
                for e in &u.entries {
                    let roots: Vec<usize> = e.children.iter().map(|&(ci, idx)| universes[ci].uf.find(idx)).collect();
                    match table.get(&(e.op, &e.ws, roots.clone())) {
                        Some(&first) if !u.uf.same(first, e.term) => merges.push((first, e.term, e.ws.clone())),
                        Some(_) => {}
                        None => {
                            table.insert((e.op, &e.ws, roots), e.term);
                        }
                    }
                }
            }
            let mut merged = false;
            let u = &mut universes[ui];
            for (a, b, ws) in merges {
                merged |= u.uf.union(a, b, Just::Congruence { ws });
            }
            if !merged {
                break;
            }
            any = true;
        }
    }
    any
}

/// Wraps a proof over the canonical context `_v1.._vn` into one over `target`,
/// a context with the same sorts.
fn rename_proof(p: Arc<Proof>, target: &[Letter]) -> Arc<Proof> {
    let premise_ctx = p.conclusion().ctx;
    if premise_ctx == target {
        return p;
    }
    let vars: Vec<Term> = target.iter().map(|l| Term::var(*l)).collect();
    Arc::new(Proof::Subst {
        s1: vars.clone(),
        s2: vars,
        w: target.to_vec(),
        ws: target.iter().map(|l| vec![*l]).collect(),
        premise: p,
        sides: target.iter().map(|l| Arc::new(Proof::Refl { term: Term::var(*l), ctx: vec![*l] })).collect(),
    })
}

impl Saturation {
    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Bounds that fired, in report order.
    pub fn truncation(&self) -> Vec<Truncation> {
        self.truncation.iter().copied().collect()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Total number of universe members over all contexts.
    pub fn universe_size(&self) -> usize {
        self.universes.iter().map(|u| u.terms.len()).sum()
    }

    /// Canonical contexts in saturation order.
    pub fn contexts(&self) -> Vec<Vec<Letter>> {
        self.universes.iter().map(|u| u.ctx.clone()).collect()
    }

    /// Equivalence classes per context, each listed in enumeration order.
    pub fn classes(&self) -> Vec<(Vec<Letter>, Vec<Vec<Term>>)> {
        self.universes
            .iter()
            .map(|u| {
                let classes =
                    u.uf.classes().into_iter().map(|c| c.into_iter().map(|i| u.terms[i].clone()).collect()).collect();
                (u.ctx.clone(), classes)
            })
            .collect()
    }

    /// A spanning set of the derived equations: every member of a
    /// non-singleton class equated with the class's first member.
    pub fn equations(&self) -> Vec<Equation> {
        let mut out = Vec::new();
        for (ctx, classes) in self.classes() {
            for class in classes {
                for t in &class[1..] {
                    out.push(Equation::new("derived", class[0].clone(), t.clone(), ctx.clone()));
                }
            }
        }
        out
    }

    /// Locates a goal: its universe and the indices of both sides.
    fn locate(&self, goal: &Equation) -> Result<(usize, usize, usize), Truncation> {
        let canon = goal.canonical();
        let sorts: Vec<Sym> = canon.ctx.iter().map(|l| l.sort).collect();
        let ui = *self.by_sorts.get(&sorts).ok_or(Truncation::Ctx)?;
        let u = &self.universes[ui];
        let a = *u.index.get(&canon.lhs).ok_or(Truncation::Depth)?;
        let b = *u.index.get(&canon.rhs).ok_or(Truncation::Depth)?;
        Ok((ui, a, b))
    }

    /// Whether the goal (up to context renaming) was derived.
    pub fn proves(&self, goal: &Equation) -> bool {
        match self.locate(goal) {
            Ok((ui, a, b)) => self.universes[ui].uf.same(a, b),
            Err(_) => goal.lhs == goal.rhs,
        }
    }

    /// A proof of the goal over the goal's own context, if it was derived.
    pub fn proof_of(&self, goal: &Equation) -> Option<Arc<Proof>> {
        let (ui, a, b) = self.locate(goal).ok()?;
        if !self.universes[ui].uf.same(a, b) {
            return None;
        }
        Some(rename_proof(self.explain(ui, a, b), &goal.ctx))
    }

    /// Decides the goal against this saturation.
    pub fn prove(&self, goal: &Equation) -> ProveOutcome {
        if let Some(ax) = self.theory.equations.iter().find(|ax| ax.same_up_to_renaming(goal)) {
            return ProveOutcome::Proved(Arc::new(Proof::Axiom { name: ax.name.clone(), eq: goal.clone() }));
        }
        if goal.lhs == goal.rhs {
            return ProveOutcome::Proved(Arc::new(Proof::Refl { term: goal.lhs.clone(), ctx: goal.ctx.clone() }));
        }
        match self.locate(goal) {
            Ok(_) => match self.proof_of(goal) {
                Some(p) => ProveOutcome::Proved(p),
                None => ProveOutcome::NotFound { truncated: self.truncation() },
            },
            Err(bound) => {
                let mut t = self.truncation.clone();
                t.insert(bound);
                ProveOutcome::NotFound { truncated: t.into_iter().collect() }
            }
        }
    }

    /// Proof of `terms[a] ~ terms[b]` over universe `ui`'s canonical context.
    fn explain(&self, ui: usize, a: usize, b: usize) -> Arc<Proof> {
        let u = &self.universes[ui];
        if a == b {
            return Arc::new(Proof::Refl { term: u.terms[a].clone(), ctx: u.ctx.clone() });
        }
        if let Some(p) = self.memo.lock().expect("memo poisoned").get(&(ui, a, b)) {
            return p.clone();
        }
        let path = u.uf.path(a, b).expect("explained pair is in one class");
        let mut chain: Option<Arc<Proof>> = None;
        for (id, forward) in path {
            let (x, y, why) = u.uf.edge(id);
            let step = self.edge_proof(ui, x, y, why);
            let step = if forward { step } else { Arc::new(Proof::Sym(step)) };
            chain = Some(match chain {
                None => step,
                Some(prev) => Arc::new(Proof::Trans(prev, step)),
            });
        }
        let p = chain.expect("distinct members have a nonempty path");
        self.memo.lock().expect("memo poisoned").insert((ui, a, b), p.clone());
        p
    }

    fn edge_proof(&self, ui: usize, x: usize, y: usize, why: &Just) -> Arc<Proof> {
        let u = &self.universes[ui];
        match why {
            Just::Instance { axiom, images, ws } => {
                let ax = &self.theory.equations[*axiom];
                Arc::new(Proof::Subst {
                    s1: images.clone(),
                    s2: images.clone(),
                    w: u.ctx.clone(),
                    ws: ws.clone(),
                    premise: Arc::new(Proof::Axiom { name: ax.name.clone(), eq: ax.clone() }),
                    sides: images
                        .iter()
                        .zip(ws)
                        .map(|(t, w)| Arc::new(Proof::Refl { term: t.clone(), ctx: w.clone() }))
                        .collect(),
                })
            }
            Just::Congruence { ws } => {
                let (tx, ty) = (&u.terms[x], &u.terms[y]);
                let TermKind::App(op, xs) = tx.kind() else { unreachable!("congruence joins applications") };
                let ys = ty.args();
                let arity = &self.theory.signature.op(*op).expect("declared operation").arity;
                let pattern_ctx = context_for_sorts(arity);
                let pattern = Term::app(*op, tx.sort(), pattern_ctx.iter().map(|l| Term::var(*l)).collect());
                let ws_letters: Vec<Vec<Letter>> = ws.iter().map(|w| w.iter().map(|&p| u.ctx[p]).collect()).collect();
                let sides = xs
                    .iter()
                    .zip(ys)
                    .zip(&ws_letters)
                    .map(|((a, b), wl)| {
                        if a == b {
                            return Arc::new(Proof::Refl { term: a.clone(), ctx: wl.clone() });
                        }
                        let sorts: Vec<Sym> = wl.iter().map(|l| l.sort).collect();
                        let ci = self.by_sorts[&sorts];
                        let cu = &self.universes[ci];
                        let ca = cu.index[&a.rename(wl, &cu.ctx)];
                        let cb = cu.index[&b.rename(wl, &cu.ctx)];
                        rename_proof(self.explain(ci, ca, cb), wl)
                    })
                    .collect();
                Arc::new(Proof::Subst {
                    s1: xs.clone(),
                    s2: ys.to_vec(),
                    w: u.ctx.clone(),
                    ws: ws_letters,
                    premise: Arc::new(Proof::Refl { term: pattern, ctx: pattern_ctx }),
                    sides,
                })
            }
        }
    }
}

/// Saturates and decides a single goal.
pub fn prove(theory: &Theory, goal: &Equation, bounds: Bounds) -> Result<ProveOutcome, DeductionError> {
    theory.check_equation(goal)?;
    Ok(saturate(theory, bounds).prove(goal))
}

/// Membership in the invariant family: if either side uses every context
/// letter, both sides coincide.
fn in_invariant(eq: &Equation) -> bool {
    let full = |t: &Term| {
        let vars = t.vars();
        vars.len() == eq.ctx.len() && eq.ctx.iter().all(|l| vars.contains(l))
    };
    !(full(&eq.lhs) || full(&eq.rhs)) || eq.lhs == eq.rhs
}

/// `true` when the goal is refuted: the invariant family contains every
/// axiom, is closed under deduction, and misses the goal.
pub fn refute_by_invariant(theory: &Theory, goal: &Equation) -> Result<bool, DeductionError> {
    match theory.structure {
        ContextStructure::Injective | ContextStructure::StrictlyIncreasing => {}
        ref other => return Err(DeductionError::UnsupportedStructure(other.clone())),
    }
    if let Some(ax) = theory.equations.iter().find(|ax| !in_invariant(ax)) {
        return Err(DeductionError::AxiomOutsideInvariant(ax.name.clone()));
    }
    Ok(!in_invariant(goal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_theory;

    const PROJECTION: &str = "\
theory Projection
structure cartesian
sort M
op f : M M -> M
eq proj : f(x, y) ~ x ctx [ x:M y:M z:M ]
";

    #[test]
    fn side_tuple_shapes() {
        use ContextStructure::*;
        assert_eq!(side_tuples(&Cartesian, 2, &[vec![0], vec![0]]), vec![vec![vec![0, 1], vec![0, 1]]]);
        assert_eq!(side_tuples(&Bijective, 2, &[vec![1], vec![0]]), vec![vec![vec![1], vec![0]]]);
        assert_eq!(side_tuples(&RightSurjective, 2, &[vec![0, 1, 0], vec![1]]), vec![vec![vec![1, 0], vec![1]]]);
        // One leftover letter, two slots plus "unused".
        assert_eq!(side_tuples(&Injective, 2, &[vec![0], vec![]]).len(), 3);
        assert_eq!(side_tuples(&StrictlyIncreasing, 2, &[vec![1], vec![]]).len(), 2);
    }

    #[test]
    fn projection_derives_weakened_axiom_under_cartesian() {
        let th = parse_theory(PROJECTION).unwrap();
        let goal = th.parse_goal("f(x, y) ~ x ctx [ x:M y:M ]").unwrap();
        let out = prove(&th, &goal, Bounds::new(2, 3, 4).unwrap()).unwrap();
        let proof = out.proof().expect("derivable");
        assert!(check_proof(&th, proof).unwrap().same_up_to_renaming(&goal));
    }

    #[test]
    fn projection_is_refuted_under_injective() {
        let th = parse_theory(PROJECTION).unwrap().with_structure(ContextStructure::Injective);
        let goal = th.parse_goal("f(x, y) ~ x ctx [ x:M y:M ]").unwrap();
        assert!(refute_by_invariant(&th, &goal).unwrap());
        assert!(!prove(&th, &goal, Bounds::new(3, 3, 4).unwrap()).unwrap().is_proved());
        let th = th.with_structure(ContextStructure::Cartesian);
        assert!(matches!(refute_by_invariant(&th, &goal), Err(DeductionError::UnsupportedStructure(_))));
    }

    #[test]
    fn empty_theory_only_reflexivity() {
        let th = parse_theory("structure cartesian\nsort M\nop f : M M -> M\n").unwrap();
        let sat = saturate(&th, Bounds::new(2, 2, 3).unwrap());
        assert!(sat.equations().is_empty());
        assert!(sat.truncation().is_empty());
    }

    #[test]
    fn check_proof_rejects_bad_renaming() {
        let th = parse_theory(PROJECTION).unwrap().with_structure(ContextStructure::Injective);
        let x = Letter::new("x", "M");
        let tx = Term::var(x);
        let ax = th.equations[0].clone();
        // All three letters sent to `x` repeats it, which no injective context governs.
        let bad = Proof::Subst {
            s1: vec![tx.clone(); 3],
            s2: vec![tx.clone(); 3],
            w: vec![x],
            ws: vec![vec![x]; 3],
            premise: Arc::new(Proof::Axiom { name: "proj".into(), eq: ax }),
            sides: (0..3).map(|_| Arc::new(Proof::Refl { term: tx.clone(), ctx: vec![x] })).collect(),
        };
        let err = check_proof(&th, &bad).unwrap_err();
        assert_eq!(err.path, "root");
    }
}
