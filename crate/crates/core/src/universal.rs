//! Term algebras and the bounded universal model.
//!
//! The extended signature Σ has one sort per hom `(a, b)`, composition,
//! identities, Δ-action symbols and the internalized operations. Its
//! categorization theory is modelled by decoding: a closed Σ-term of sort
//! `(a, b)` decodes to a σ-term over the canonical letters `_v1.._vn` of `a`,
//! and two closed Σ-terms are equal under the categorization laws exactly when
//! their decodes coincide. The internalized theory is then closed over a
//! bounded universe of decoded terms.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::congruence::CongruenceState;
use crate::context::{holds_positions, terminal_context, ContextStructure, Letter};
use crate::deduction::{self, Bounds, DeductionError, Saturation, Truncation};
use crate::finord::{compose, coproduct, in_family, similarity_component, FinFn, FinOrdError};
use crate::setmodel::{compose_multi, theta_action, FinSetModel, ModelError, MultiMap};
use crate::symbol::Sym;
use crate::syntax::{context_for_sorts, is_r_context, Equation, Signature, Term, TermKind, Theory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniversalError {
    #[error("{0} exceeds the bounds of the extended signature")]
    Bound(String),
    #[error("structure {0} has no terminal contexts")]
    NotModelable(String),
    #[error("ill-typed Σ-term: {0}")]
    Type(String),
    #[error("{0}")]
    Context(String),
    #[error(transparent)]
    FinOrd(#[from] FinOrdError),
    #[error(transparent)]
    Deduction(#[from] DeductionError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A Σ-sort: multimorphisms from the word `args` to `res`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HomSort {
    pub args: Vec<Sym>,
    pub res: Sym,
}

impl HomSort {
    pub fn new(args: Vec<Sym>, res: Sym) -> HomSort {
        HomSort { args, res }
    }
}

impl fmt::Display for HomSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.args {
            write!(f, "{s} ")?;
        }
        write!(f, "-> {}", self.res)
    }
}

impl std::str::FromStr for HomSort {
    type Err = UniversalError;

    /// `"M M -> M"`; an empty left side is a nullary hom.
    fn from_str(s: &str) -> Result<HomSort, UniversalError> {
        let (args, res) = s.split_once("->").ok_or_else(|| UniversalError::Type(format!("hom `{s}` lacks `->`")))?;
        let res = res.trim();
        if res.is_empty() || res.contains(char::is_whitespace) {
            return Err(UniversalError::Type(format!("hom `{s}` needs one result sort")));
        }
        Ok(HomSort { args: args.split_whitespace().map(Sym::new).collect(), res: Sym::new(res) })
    }
}

/// A Σ-term. `Var` only occurs in schema instances.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigmaTerm {
    Op(Sym),
    Id(Sym),
    /// `θ_{*,target,c}(body)`; the body has sort `(target∘θ, c)`.
    Act {
        theta: FinFn,
        target: Vec<Sym>,
        body: Box<SigmaTerm>,
    },
    Comp(Box<SigmaTerm>, Vec<SigmaTerm>),
    Var(Sym, HomSort),
}

impl fmt::Display for SigmaTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaTerm::Op(op) => write!(f, "op:{op}"),
            SigmaTerm::Id(c) => write!(f, "id[{c}]"),
            SigmaTerm::Act { theta, target, body } => {
                let images: Vec<String> = theta.images().iter().map(|i| i.to_string()).collect();
                let sorts: Vec<&str> = target.iter().map(|s| s.as_str()).collect();
                write!(f, "act[{} -> {}]({body})", images.join(" "), sorts.join(" "))
            }
            SigmaTerm::Comp(h, gs) => {
                write!(f, "comp({h}")?;
                for g in gs {
                    write!(f, ", {g}")?;
                }
                f.write_str(")")
            }
            SigmaTerm::Var(name, _) => write!(f, "{name}"),
        }
    }
}

fn ill_typed(msg: String) -> UniversalError {
    UniversalError::Type(msg)
}

impl SigmaTerm {
    pub fn act(theta: FinFn, target: Vec<Sym>, body: SigmaTerm) -> SigmaTerm {
        SigmaTerm::Act { theta, target, body: Box::new(body) }
    }

    pub fn comp(h: SigmaTerm, gs: Vec<SigmaTerm>) -> SigmaTerm {
        SigmaTerm::Comp(Box::new(h), gs)
    }

    pub fn depth(&self) -> usize {
        match self {
            SigmaTerm::Op(_) | SigmaTerm::Id(_) | SigmaTerm::Var(..) => 1,
            SigmaTerm::Act { body, .. } => body.depth() + 1,
            SigmaTerm::Comp(h, gs) => 1 + gs.iter().map(|g| g.depth()).max().unwrap_or(0).max(h.depth()),
        }
    }

    pub fn sort(&self, sig: &Signature) -> Result<HomSort, UniversalError> {
        match self {
            SigmaTerm::Op(op) => {
                let d = sig.op(*op).ok_or_else(|| ill_typed(format!("unknown operation `{op}`")))?;
                Ok(HomSort::new(d.arity.clone(), d.result))
            }
            SigmaTerm::Id(c) => Ok(HomSort::new(vec![*c], *c)),
            SigmaTerm::Var(_, s) => Ok(s.clone()),
            SigmaTerm::Act { theta, target, body } => {
                let inner = body.sort(sig)?;
                if theta.cod() != target.len() {
                    return Err(ill_typed(format!("{self}: action codomain differs from its target")));
                }
                let pulled: Vec<Sym> = theta.images().iter().map(|&j| target[j - 1]).collect();
                if pulled != inner.args {
                    return Err(ill_typed(format!("{self}: body arguments do not match the action")));
                }
                Ok(HomSort::new(target.clone(), inner.res))
            }
            SigmaTerm::Comp(h, gs) => {
                let outer = h.sort(sig)?;
                if outer.args.len() != gs.len() {
                    return Err(ill_typed(format!(
                        "{self}: {} arguments for a {}-ary head",
                        gs.len(),
                        outer.args.len()
                    )));
                }
                let mut args = Vec::new();
                for (g, want) in gs.iter().zip(&outer.args) {
                    let gs = g.sort(sig)?;
                    if gs.res != *want {
                        return Err(ill_typed(format!("{self}: `{g}` lands in {} not {want}", gs.res)));
                    }
                    args.extend(gs.args);
                }
                Ok(HomSort::new(args, outer.res))
            }
        }
    }

    /// The σ-term over `_v1.._vn` that this closed Σ-term denotes in the free
    /// multicategory. Schema variables decode to opaque applications `h(_v1..)`.
    pub fn decode(&self, sig: &Signature) -> Result<Term, UniversalError> {
        let sort = self.sort(sig)?;
        Ok(self.decode_typed(sig, &sort))
    }

    fn decode_typed(&self, sig: &Signature, sort: &HomSort) -> Term {
        let letters = context_for_sorts(&sort.args);
        let vars: Vec<Term> = letters.iter().map(|l| Term::var(*l)).collect();
        match self {
            SigmaTerm::Op(op) | SigmaTerm::Var(op, _) => Term::app(*op, sort.res, vars),
            SigmaTerm::Id(_) => vars[0].clone(),
            SigmaTerm::Act { theta, body, .. } => {
                let inner = body.sort(sig).expect("typed");
                let images: Vec<Term> = theta.images().iter().map(|&j| vars[j - 1].clone()).collect();
                body.decode_typed(sig, &inner).substitute(&context_for_sorts(&inner.args), &images)
            }
            SigmaTerm::Comp(h, gs) => {
                let outer = h.sort(sig).expect("typed");
                let mut offset = 0;
                let mut images = Vec::with_capacity(gs.len());
                for g in gs {
                    let gsort = g.sort(sig).expect("typed");
                    let n = gsort.args.len();
                    let own = context_for_sorts(&gsort.args);
                    images.push(g.decode_typed(sig, &gsort).rename(&own, &letters[offset..offset + n]));
                    offset += n;
                }
                h.decode_typed(sig, &outer).substitute(&context_for_sorts(&outer.args), &images)
            }
        }
    }

    /// The multimap this Σ-term denotes in a finite-set model, with schema
    /// variables looked up in `vars`.
    pub fn interpret(&self, m: &FinSetModel, vars: &HashMap<Sym, MultiMap>) -> Result<MultiMap, UniversalError> {
        Ok(match self {
            SigmaTerm::Op(op) => m.table(*op)?.clone(),
            SigmaTerm::Id(c) => MultiMap::identity(m.carrier(*c)?),
            SigmaTerm::Var(name, _) => {
                vars.get(name).cloned().ok_or_else(|| UniversalError::Context(format!("no table for `{name}`")))?
            }
            SigmaTerm::Act { theta, target, body } => {
                let sizes = target.iter().map(|s| m.carrier(*s)).collect::<Result<Vec<_>, _>>()?;
                theta_action(&body.interpret(m, vars)?, theta, &sizes)?
            }
            SigmaTerm::Comp(h, gs) => {
                let parts = gs.iter().map(|g| g.interpret(m, vars)).collect::<Result<Vec<_>, _>>()?;
                compose_multi(&h.interpret(m, vars)?, &parts)?
            }
        })
    }
}

/// The bounded extended signature.
#[derive(Debug, Clone)]
pub struct SigmaSignature {
    pub base: Signature,
    pub structure: ContextStructure,
    pub max_arity: usize,
    pub max_theta: usize,
    /// Every hom `(a, b)` with `|a| <= max_arity`, shortest words first.
    pub homs: Vec<HomSort>,
    /// Every `θ` in `Δ_R` with domain and codomain at most `max_theta`.
    pub thetas: Vec<FinFn>,
}

pub(crate) fn sort_words(sorts: &[Sym], max_len: usize) -> Vec<Vec<Sym>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<Sym>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| {
                sorts.iter().map(move |s| {
                    let mut w = w.clone();
                    w.push(*s);
                    w
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

pub fn build_sigma(sig: &Signature, r: &ContextStructure, max_arity: usize, max_theta: usize) -> SigmaSignature {
    let homs = sort_words(sig.sorts(), max_arity)
        .into_iter()
        .flat_map(|a| sig.sorts().iter().map(move |b| HomSort::new(a.clone(), *b)))
        .collect();
    let family = r.family();
    let mut thetas = Vec::new();
    for n in 0..=max_theta {
        for m in 0..=max_theta {
            thetas.extend(FinFn::all(m, n).filter(|t| in_family(&family, t).unwrap_or(false)));
        }
    }
    SigmaSignature { base: sig.clone(), structure: r.clone(), max_arity, max_theta, homs, thetas }
}

impl SigmaSignature {
    fn admits_theta(&self, theta: &FinFn) -> bool {
        theta.dom() <= self.max_theta
            && theta.cod() <= self.max_theta
            && in_family(&self.structure.family(), theta).unwrap_or(false)
    }

    fn admits(&self, t: &SigmaTerm) -> Result<(), String> {
        match t {
            SigmaTerm::Op(_) | SigmaTerm::Id(_) | SigmaTerm::Var(..) => Ok(()),
            SigmaTerm::Act { theta, body, .. } => {
                if !self.admits_theta(theta) {
                    return Err(format!("action {theta}"));
                }
                self.admits(body)
            }
            SigmaTerm::Comp(h, gs) => {
                self.admits(h)?;
                gs.iter().try_for_each(|g| self.admits(g))
            }
        }
        .and_then(|()| match t.sort(&self.base) {
            Ok(s) if s.args.len() <= self.max_arity => Ok(()),
            Ok(s) => Err(format!("hom {s}")),
            Err(e) => Err(e.to_string()),
        })
    }

    /// `(head, arguments)` hom signatures of all composition symbols within bounds.
    pub fn compositions(&self) -> Vec<(HomSort, Vec<HomSort>)> {
        let mut out = Vec::new();
        for h in &self.homs {
            let mut partial: Vec<(Vec<HomSort>, usize)> = vec![(Vec::new(), 0)];
            for c in &h.args {
                partial = partial
                    .into_iter()
                    .flat_map(|(gs, used)| {
                        self.homs.iter().filter(move |g| g.res == *c && used + g.args.len() <= self.max_arity).map(
                            move |g| {
                                let mut gs = gs.clone();
                                gs.push(g.clone());
                                (gs, used + g.args.len())
                            },
                        )
                    })
                    .collect();
            }
            out.extend(partial.into_iter().map(|(gs, _)| (h.clone(), gs)));
        }
        out
    }
}

/// An equation between Σ-terms in a context of Σ-variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmaEquation {
    pub name: String,
    pub lhs: SigmaTerm,
    pub rhs: SigmaTerm,
    pub ctx: Vec<(Sym, HomSort)>,
}

impl fmt::Display for SigmaEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {} ctx [", self.lhs, self.rhs)?;
        for (v, s) in &self.ctx {
            write!(f, " {v}:({s})")?;
        }
        f.write_str(" ]")
    }
}

fn var(name: String, sort: HomSort) -> (SigmaTerm, (Sym, HomSort)) {
    let s = Sym::new(&name);
    (SigmaTerm::Var(s, sort.clone()), (s, sort))
}

/// Words over the sorts with total length at most `budget`, split into `parts` pieces.
fn word_tuples(sorts: &[Sym], parts: usize, budget: usize) -> Vec<Vec<Vec<Sym>>> {
    let words = sort_words(sorts, budget);
    let mut out: Vec<(Vec<Vec<Sym>>, usize)> = vec![(Vec::new(), 0)];
    for _ in 0..parts {
        out = out
            .into_iter()
            .flat_map(|(ws, used)| {
                words.iter().filter(move |w| used + w.len() <= budget).map(move |w| {
                    let mut ws = ws.clone();
                    ws.push(w.clone());
                    (ws, used + w.len())
                })
            })
            .collect();
    }
    out.into_iter().map(|(ws, _)| ws).collect()
}

/// Instances of the seven categorization schemas within the signature's bounds.
pub fn categorization_axioms(sigma: &SigmaSignature) -> Vec<SigmaEquation> {
    let sorts = sigma.base.sorts();
    let k = sigma.max_arity;
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: SigmaTerm, rhs: SigmaTerm, ctx: Vec<(Sym, HomSort)>| {
        let n = out.len();
        out.push(SigmaEquation { name: format!("{name}.{n}"), lhs, rhs, ctx });
    };

    // Associativity: h:(c, d), g_i:(b^i, c_i), f^i_j:(a^ij, b^i_j).
    for hs in sigma.homs.iter() {
        let n = hs.args.len();
        let (h, hv) = var("h".into(), hs.clone());
        for bs in word_tuples(sorts, n, k) {
            let gsorts: Vec<HomSort> = bs.iter().zip(&hs.args).map(|(b, c)| HomSort::new(b.clone(), *c)).collect();
            let flat_b: Vec<Sym> = bs.concat();
            for as_ in word_tuples(sorts, flat_b.len(), k) {
                let mut ctx = vec![hv.clone()];
                let gs: Vec<SigmaTerm> = gsorts
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let (g, gv) = var(format!("g{}", i + 1), s.clone());
                        ctx.push(gv);
                        g
                    })
                    .collect();
                let mut fs: Vec<Vec<SigmaTerm>> = vec![Vec::new(); n];
                let mut j = 0;
                for (i, b) in bs.iter().enumerate() {
                    for (jj, bj) in b.iter().enumerate() {
                        let (f, fv) = var(format!("f{}_{}", i + 1, jj + 1), HomSort::new(as_[j].clone(), *bj));
                        ctx.push(fv);
                        fs[i].push(f);
                        j += 1;
                    }
                }
                let lhs = SigmaTerm::comp(SigmaTerm::comp(h.clone(), gs.clone()), fs.concat());
                let inner = gs.iter().zip(&fs).map(|(g, f)| SigmaTerm::comp(g.clone(), f.clone())).collect();
                push("assoc", lhs, SigmaTerm::comp(h.clone(), inner), ctx);
            }
        }
    }

    for hs in &sigma.homs {
        let (h, hv) = var("h".into(), hs.clone());
        push("lid", SigmaTerm::comp(SigmaTerm::Id(hs.res), vec![h.clone()]), h.clone(), vec![hv.clone()]);
        let ids = hs.args.iter().map(|c| SigmaTerm::Id(*c)).collect();
        push("rid", SigmaTerm::comp(h.clone(), ids), h.clone(), vec![hv.clone()]);
        let n = hs.args.len();
        if n <= sigma.max_theta {
            push("act-id", SigmaTerm::act(FinFn::identity(n), hs.args.clone(), h.clone()), h.clone(), vec![hv]);
        }
    }

    let pull = |target: &[Sym], theta: &FinFn| -> Vec<Sym> { theta.images().iter().map(|&j| target[j - 1]).collect() };

    // Action composition: θ:[m]->[n], ψ:[n]->[p], h':(b∘ψ∘θ, d).
    for theta in &sigma.thetas {
        for psi in sigma.thetas.iter().filter(|p| p.dom() == theta.cod()) {
            let psitheta = compose(psi, theta).expect("composable");
            if !sigma.admits_theta(&psitheta) {
                continue;
            }
            for target in sort_words(sorts, psi.cod()).into_iter().filter(|w| w.len() == psi.cod() && w.len() <= k) {
                let mid = pull(&target, psi);
                let inner_args = pull(&mid, theta);
                if mid.len() > k || inner_args.len() > k {
                    continue;
                }
                for d in sorts {
                    let (h, hv) = var("h'".into(), HomSort::new(inner_args.clone(), *d));
                    let lhs = SigmaTerm::act(psitheta.clone(), target.clone(), h.clone());
                    let rhs =
                        SigmaTerm::act(psi.clone(), target.clone(), SigmaTerm::act(theta.clone(), mid.clone(), h));
                    push("act-comp", lhs, rhs, vec![hv]);
                }
            }
        }
    }

    // Action through composition, outside: θ:[m]->[n], h':(c∘θ, d), g_i:(b^i, c_i).
    for theta in &sigma.thetas {
        let n = theta.cod();
        for cs in sort_words(sorts, n).into_iter().filter(|w| w.len() == n && n <= k) {
            let hargs = pull(&cs, theta);
            if hargs.len() > k {
                continue;
            }
            for bs in word_tuples(sorts, n, k) {
                let ms: Vec<usize> = bs.iter().map(|b| b.len()).collect();
                let shifted = similarity_component(theta, &ms).expect("arities match");
                let picked_len: usize = theta.images().iter().map(|&j| ms[j - 1]).sum();
                if !sigma.admits_theta(&shifted) || picked_len > k {
                    continue;
                }
                for d in sorts {
                    let (h, hv) = var("h'".into(), HomSort::new(hargs.clone(), *d));
                    let mut ctx = vec![hv];
                    let gs: Vec<SigmaTerm> = bs
                        .iter()
                        .zip(&cs)
                        .enumerate()
                        .map(|(i, (b, c))| {
                            let (g, gv) = var(format!("g{}", i + 1), HomSort::new(b.clone(), *c));
                            ctx.push(gv);
                            g
                        })
                        .collect();
                    let lhs = SigmaTerm::comp(SigmaTerm::act(theta.clone(), cs.clone(), h.clone()), gs.clone());
                    let picked = theta.images().iter().map(|&j| gs[j - 1].clone()).collect();
                    let rhs = SigmaTerm::act(shifted.clone(), bs.concat(), SigmaTerm::comp(h, picked));
                    push("act-outer", lhs, rhs, ctx);
                }
            }
        }
    }

    // Action through composition, inside: h:(c, d), θ^i:[k_i]->[m_i], g'_i:(b^i∘θ^i, c_i).
    for hs in &sigma.homs {
        let n = hs.args.len();
        for bs in word_tuples(sorts, n, k) {
            let mut choices: Vec<Vec<FinFn>> = vec![Vec::new()];
            for b in &bs {
                choices = choices
                    .into_iter()
                    .flat_map(|prefix| {
                        sigma.thetas.iter().filter(move |t| t.cod() == b.len()).map(move |t| {
                            let mut p = prefix.clone();
                            p.push(t.clone());
                            p
                        })
                    })
                    .collect();
            }
            for thetas in choices {
                let inner: Vec<Vec<Sym>> = thetas.iter().zip(&bs).map(|(t, b)| pull(b, t)).collect();
                let sum = coproduct(&thetas);
                if inner.iter().map(Vec::len).sum::<usize>() > k || !sigma.admits_theta(&sum) {
                    continue;
                }
                let (h, hv) = var("h".into(), hs.clone());
                let mut ctx = vec![hv];
                let mut acted = Vec::new();
                let mut plain = Vec::new();
                for (i, ((t, b), a)) in thetas.iter().zip(&bs).zip(&inner).enumerate() {
                    let (g, gv) = var(format!("g'{}", i + 1), HomSort::new(a.clone(), hs.args[i]));
                    ctx.push(gv);
                    acted.push(SigmaTerm::act(t.clone(), b.clone(), g.clone()));
                    plain.push(g);
                }
                let lhs = SigmaTerm::comp(h.clone(), acted);
                let rhs = SigmaTerm::act(sum, bs.concat(), SigmaTerm::comp(h, plain));
                push("act-inner", lhs, rhs, ctx);
            }
        }
    }
    out
}

fn delta_theta(r: &ContextStructure, v: &[Letter], w: &[Letter]) -> Result<FinFn, UniversalError> {
    let theta = crate::context::reindexing(v, w).ok_or_else(|| {
        UniversalError::Context(format!("a word of [{}] leaves the context", crate::context::show_word(v)))
    })?;
    if !in_family(&r.family(), &theta)? {
        return Err(UniversalError::Context(format!("{theta} is outside the structure category")));
    }
    Ok(theta)
}

/// `N_v(t)`: the closed Σ-term of sort `(sorts of v, sort of t)` naming `t` in context `v`.
pub fn internalize_term(r: &ContextStructure, v: &[Letter], t: &Term) -> Result<SigmaTerm, UniversalError> {
    let target: Vec<Sym> = v.iter().map(|l| l.sort).collect();
    let wrap = |w: &[Letter], body: SigmaTerm| -> Result<SigmaTerm, UniversalError> {
        Ok(SigmaTerm::act(delta_theta(r, v, w)?, target.clone(), body))
    };
    match t.kind() {
        TermKind::Const(c) => wrap(&[], SigmaTerm::Op(*c)),
        TermKind::Var(l) => wrap(&[*l], SigmaTerm::Id(l.sort)),
        TermKind::App(f, args) => {
            let mut ws = Vec::new();
            let mut parts = Vec::new();
            for a in args {
                let w = terminal_context(r, &a.tau()).ok_or_else(|| UniversalError::NotModelable(r.to_string()))?;
                parts.push(internalize_term(r, &w, a)?);
                ws.extend(w);
            }
            wrap(&ws, SigmaTerm::comp(SigmaTerm::Op(*f), parts))
        }
    }
}

/// The internalized theory: `N_v(t₁) ≈ N_v(t₂)` for each axiom.
pub fn internalize(theory: &Theory, sigma: &SigmaSignature) -> Result<Vec<SigmaEquation>, UniversalError> {
    let r = &theory.structure;
    theory
        .equations
        .iter()
        .map(|eq| {
            let lhs = internalize_term(r, &eq.ctx, &eq.lhs)?;
            let rhs = internalize_term(r, &eq.ctx, &eq.rhs)?;
            for side in [&lhs, &rhs] {
                sigma.admits(side).map_err(|what| UniversalError::Bound(format!("axiom `{}`: {what}", eq.name)))?;
            }
            Ok(SigmaEquation { name: eq.name.clone(), lhs, rhs, ctx: Vec::new() })
        })
        .collect()
}

/// The four term algebras. The quotient kinds carry the saturation that
/// decides their provability relation.
#[derive(Clone, Copy)]
pub enum TermAlgebra<'a> {
    BalancedR,
    PlainR,
    /// Needs a saturation of the theory under its own structure.
    BalancedE(&'a Saturation),
    /// Needs a saturation of the theory under the cartesian structure.
    PlainE(&'a Saturation),
}

/// An element of a term algebra; quotient kinds use representatives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    Plain(Term),
    /// A word of letters paired with a term.
    Balanced(Vec<Letter>, Term),
}

impl Element {
    pub fn term(&self) -> &Term {
        match self {
            Element::Plain(t) | Element::Balanced(_, t) => t,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Plain(t) => write!(f, "{t}"),
            Element::Balanced(w, t) => write!(f, "({}, {t})", crate::context::show_word(w)),
        }
    }
}

impl TermAlgebra<'_> {
    fn balanced(&self) -> bool {
        matches!(self, TermAlgebra::BalancedR | TermAlgebra::BalancedE(_))
    }

    /// `n_v(t)(args)`, computed by the operation-wise recursion.
    pub fn eval(
        &self,
        r: &ContextStructure,
        t: &Term,
        v: &[Letter],
        args: &[Element],
    ) -> Result<Element, UniversalError> {
        if !is_r_context(r, v, t).unwrap_or(false) {
            return Err(UniversalError::Context(format!(
                "[{}] is not a context for `{t}`",
                crate::context::show_word(v)
            )));
        }
        if args.len() != v.len() {
            return Err(UniversalError::Context(format!(
                "{} arguments for a context of length {}",
                args.len(),
                v.len()
            )));
        }
        for (a, l) in args.iter().zip(v) {
            let balanced = matches!(a, Element::Balanced(..));
            if a.term().sort() != l.sort || balanced != self.balanced() {
                return Err(UniversalError::Context(format!("argument {a} does not fit {l}")));
            }
        }
        Ok(self.eval_rec(t, v, args))
    }

    fn eval_rec(&self, t: &Term, v: &[Letter], args: &[Element]) -> Element {
        match t.kind() {
            TermKind::Var(l) => args[v.iter().position(|x| x == l).expect("context letter")].clone(),
            TermKind::Const(_) if self.balanced() => Element::Balanced(Vec::new(), t.clone()),
            TermKind::Const(_) => Element::Plain(t.clone()),
            TermKind::App(f, ts) => {
                let kids: Vec<Element> = ts.iter().map(|s| self.eval_rec(s, v, args)).collect();
                let terms = kids.iter().map(|k| k.term().clone()).collect();
                let applied = Term::app(*f, t.sort(), terms);
                if self.balanced() {
                    let word = kids
                        .iter()
                        .flat_map(|k| match k {
                            Element::Balanced(w, _) => w.clone(),
                            Element::Plain(_) => unreachable!("balanced algebra"),
                        })
                        .collect();
                    Element::Balanced(word, applied)
                } else {
                    Element::Plain(applied)
                }
            }
        }
    }

    /// Equality in the algebra: syntactic for the free kinds, the
    /// provability relation for the quotient kinds.
    pub fn equal(&self, a: &Element, b: &Element) -> bool {
        match (self, a, b) {
            (TermAlgebra::PlainR, Element::Plain(s), Element::Plain(t)) => s == t,
            (TermAlgebra::BalancedR, Element::Balanced(v, s), Element::Balanced(w, t)) => v == w && s == t,
            (TermAlgebra::PlainE(sat), Element::Plain(s), Element::Plain(t)) => cartesian_provable(sat, s, t),
            (TermAlgebra::BalancedE(sat), Element::Balanced(v, s), Element::Balanced(w, t)) => {
                let r = &sat.theory().structure;
                let (Some(tv), Some(tw)) = (terminal_context(r, v), terminal_context(r, w)) else { return false };
                same_contexts(r, &tv, &tw) && provable_in(sat, s, t, &tv)
            }
            _ => false,
        }
    }
}

/// Whether `v` and `w` admit the same contexts, tested through each other's terminal words.
fn same_contexts(r: &ContextStructure, v: &[Letter], w: &[Letter]) -> bool {
    let rel = |c: &[Letter], x: &[Letter]| crate::context::holds(r, c, x).unwrap_or(false);
    rel(v, w) && rel(w, v)
}

fn provable_in(sat: &Saturation, s: &Term, t: &Term, w: &[Letter]) -> bool {
    sat.proves(&Equation::new("goal", s.clone(), t.clone(), w.to_vec()))
}

/// `s ∼² t`: derivable under the cartesian structure in the first-occurrence
/// context of their letters.
fn cartesian_provable(sat: &Saturation, s: &Term, t: &Term) -> bool {
    let mut letters = s.tau();
    letters.extend(t.tau());
    provable_in(sat, s, t, &crate::context::dedup_first(&letters))
}

/// Which quotient term algebra to test satisfaction in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotientKind {
    BalancedE,
    PlainE,
}

/// A satisfaction verdict together with the bounds that limited it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub holds: bool,
    pub truncated: Vec<Truncation>,
}

/// Whether the quotient term algebra of `theory` satisfies `eq`, decided by
/// bounded saturation.
pub fn term_model_satisfies(
    kind: QuotientKind,
    theory: &Theory,
    eq: &Equation,
    bounds: Bounds,
) -> Result<Verdict, UniversalError> {
    // Only typing and letter coverage are required here: an equation whose
    // context is not an R-context simply has no shared terminal context.
    let cartesian = theory.with_structure(ContextStructure::Cartesian);
    cartesian.check_equation(eq).map_err(|e| UniversalError::Context(e.to_string()))?;
    match kind {
        QuotientKind::PlainE => {
            let sat = deduction::saturate(&cartesian, bounds);
            let mut letters = eq.lhs.tau();
            letters.extend(eq.rhs.tau());
            let minimal = crate::context::dedup_first(&letters);
            let holds = [minimal, eq.ctx.clone()].iter().any(|w| provable_in(&sat, &eq.lhs, &eq.rhs, w));
            Ok(Verdict { holds, truncated: sat.truncation() })
        }
        QuotientKind::BalancedE => {
            let r = &theory.structure;
            let terminal =
                |t: &Term| terminal_context(r, &t.tau()).ok_or_else(|| UniversalError::NotModelable(r.to_string()));
            let (w1, w2) = (terminal(&eq.lhs)?, terminal(&eq.rhs)?);
            let shared =
                is_r_context(r, &w1, &eq.rhs).unwrap_or(false) && is_r_context(r, &w2, &eq.lhs).unwrap_or(false);
            if !shared {
                return Ok(Verdict { holds: false, truncated: Vec::new() });
            }
            let sat = deduction::saturate(theory, bounds);
            Ok(Verdict { holds: provable_in(&sat, &eq.lhs, &eq.rhs, &w1), truncated: sat.truncation() })
        }
    }
}

/// All terms of depth `<= depth` over `letters` and the constants, layer by
/// layer. Linear structures never admit a repeated letter, so those are pruned.
fn terms_over(sig: &Signature, letters: &[Letter], depth: usize, linear: bool) -> Vec<Term> {
    let mut all: Vec<(Term, u64)> = letters.iter().enumerate().map(|(i, l)| (Term::var(*l), 1u64 << i)).collect();
    all.extend(sig.constants().map(|(c, s)| (Term::constant(c, s), 0)));
    let mut layer_start = 0;
    for _ in 2..=depth {
        let prev_len = all.len();
        let mut next = Vec::new();
        for (op, decl) in sig.ops().filter(|(_, d)| !d.arity.is_empty()) {
            let mut partial: Vec<(Vec<usize>, u64, bool)> = vec![(Vec::new(), 0, false)];
            for s in &decl.arity {
                let mut grown = Vec::new();
                for (kids, mask, fresh) in &partial {
                    for (k, (t, m)) in all[..prev_len].iter().enumerate() {
                        if t.sort() != *s || (linear && mask & m != 0) {
                            continue;
                        }
                        let mut kids = kids.clone();
                        kids.push(k);
                        grown.push((kids, mask | m, *fresh || k >= layer_start));
                    }
                }
                partial = grown;
            }
            for (kids, mask, _) in partial.into_iter().filter(|p| p.2) {
                let args = kids.iter().map(|&k| all[k].0.clone()).collect();
                next.push((Term::app(op, decl.result, args), mask));
            }
        }
        layer_start = prev_len;
        all.extend(next);
    }
    all.into_iter().map(|(t, _)| t).collect()
}

fn is_linear(r: &ContextStructure) -> bool {
    use ContextStructure::*;
    matches!(r, Trivial | StrictlyIncreasing | Bijective | Injective)
}

/// Distinct-letter words over positions `0..n` that contain every position in `must`.
fn words_containing(n: usize, must: &[usize], max_len: usize) -> Vec<Vec<usize>> {
    let extra: Vec<usize> = (0..n).filter(|p| !must.contains(p)).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << extra.len()) {
        let mut chosen: Vec<usize> = must.to_vec();
        chosen.extend(extra.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, p)| *p));
        if chosen.len() > max_len {
            continue;
        }
        permutations(&mut chosen, 0, &mut out);
    }
    out
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

/// Positions in `ctx` of the distinct letters of `t`, in first-occurrence order.
fn letter_positions(ctx: &[Letter], t: &Term) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for l in t.tau() {
        let p = ctx.iter().position(|x| *x == l).expect("context letter");
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// A congruence signature: the element equals `θ_*(∘(f, children))` where
/// `θ` sends the concatenated child words to the element's word.
type Key = (Sym, Vec<usize>, Vec<usize>);

/// The bounded quotient of closed Σ-terms by the categorization laws and the
/// internalized theory. Elements are decoded terms over canonical letters;
/// every word up to the context bound gets its own hom.
pub struct UniversalModel {
    theory: Theory,
    sigma: SigmaSignature,
    bounds: Bounds,
    words: Vec<Vec<Sym>>,
    word_index: HashMap<Vec<Sym>, usize>,
    elems: Vec<(usize, Term)>,
    index: HashMap<(usize, Term), usize>,
    uf: CongruenceState<()>,
    truncation: std::collections::BTreeSet<Truncation>,
}

/// Where a closed Σ-term lands: a class of the bounded quotient, or, outside
/// the bounds, just its decoded term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClassRef {
    Class(usize),
    Outside(HomSort, Term),
}

impl UniversalModel {
    pub fn build(theory: &Theory, bounds: Bounds) -> Result<UniversalModel, UniversalError> {
        Self::build_salted(theory, bounds, None)
    }

    /// As [`UniversalModel::build`], processing seeds and congruence keys in
    /// an order scrambled by `salt`. The resulting partition must not depend on it.
    pub fn build_shuffled(theory: &Theory, bounds: Bounds, salt: u64) -> Result<UniversalModel, UniversalError> {
        Self::build_salted(theory, bounds, Some(salt))
    }

    fn build_salted(theory: &Theory, bounds: Bounds, salt: Option<u64>) -> Result<UniversalModel, UniversalError> {
        let r = &theory.structure;
        if !r.is_modelable() {
            return Err(UniversalError::NotModelable(r.to_string()));
        }
        for eq in &theory.equations {
            theory.check_equation(eq).map_err(|e| UniversalError::Context(e.to_string()))?;
        }
        let sig = &theory.signature;
        let c = bounds.max_ctx_len;
        let sigma = build_sigma(sig, r, c, c);
        let words = sort_words(sig.sorts(), c);
        let word_index: HashMap<Vec<Sym>, usize> = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut elems = Vec::new();
        for (wi, w) in words.iter().enumerate() {
            let letters = context_for_sorts(w);
            for t in terms_over(sig, &letters, bounds.max_term_depth, is_linear(r)) {
                if is_r_context(r, &letters, &t).unwrap_or(false) {
                    elems.push((wi, t));
                }
            }
        }
        let index = elems.iter().enumerate().map(|(i, (w, t))| ((*w, t.clone()), i)).collect();
        let uf = CongruenceState::new(elems.len());
        let mut model = UniversalModel {
            theory: theory.clone(),
            sigma,
            bounds,
            words,
            word_index,
            elems,
            index,
            uf,
            truncation: Default::default(),
        };
        if theory.equations.iter().any(|e| e.ctx.len() > c) {
            model.truncation.insert(Truncation::Ctx);
        }
        let mut seeds = model.seeds()?;
        if let Some(salt) = salt {
            scramble(&mut seeds, salt);
        }
        for (a, b) in seeds {
            model.uf.union(a, b, ());
        }
        model.close(salt);
        Ok(model)
    }

    fn letters(&self, word: usize) -> Vec<Letter> {
        context_for_sorts(&self.words[word])
    }

    /// Elements whose own word is a terminal context, the building blocks of substitutions.
    fn terminal_elements(&self) -> Vec<usize> {
        let r = &self.theory.structure;
        (0..self.elems.len())
            .filter(|&i| {
                let (w, t) = &self.elems[i];
                terminal_context(r, &t.tau()).as_deref() == Some(&self.letters(*w)[..])
            })
            .collect()
    }

    /// Pairs `θ_*(∘(N_v(t₁), N(g)..))`, `θ_*(∘(N_v(t₂), N(g)..))` for every axiom,
    /// built as Σ-terms and decoded.
    fn seeds(&mut self) -> Result<Vec<(usize, usize)>, UniversalError> {
        let r = self.theory.structure.clone();
        let d = self.bounds.max_term_depth;
        let terminal = self.terminal_elements();
        // One representative per (sort, word) for letters that no side uses.
        let mut reps: Vec<usize> = Vec::new();
        let mut seen = HashSet::new();
        for &i in &terminal {
            let (w, t) = &self.elems[i];
            if seen.insert((t.sort(), *w)) {
                reps.push(i);
            }
        }
        let mut pairs = Vec::new();
        let mut too_deep = false;
        for ax in &self.theory.equations.clone() {
            if ax.ctx.len() > self.bounds.max_ctx_len {
                continue;
            }
            let sides = [internalize_term(&r, &ax.ctx, &ax.lhs)?, internalize_term(&r, &ax.ctx, &ax.rhs)?];
            let occurrence = |l: &Letter| [&ax.lhs, &ax.rhs].iter().filter_map(|t| occurrence_depth(t, *l)).max();
            // Per letter: the pool of images, and whether the sides use it.
            let mut options: Vec<(Vec<usize>, bool)> = Vec::new();
            for l in &ax.ctx {
                let of_sort = |i: &usize| self.elems[*i].1.sort() == l.sort;
                options.push(match occurrence(l) {
                    Some(occ) => {
                        let budget = (d + 1).saturating_sub(occ);
                        let pool: Vec<usize> = terminal.iter().copied().filter(of_sort).collect();
                        too_deep |= pool.iter().any(|&i| self.elems[i].1.depth() > budget);
                        (pool.into_iter().filter(|&i| self.elems[i].1.depth() <= budget).collect(), true)
                    }
                    None => (reps.iter().copied().filter(of_sort).collect(), false),
                });
            }
            if options.iter().any(|(pool, _)| pool.is_empty()) {
                continue;
            }
            let used: Vec<usize> = (0..options.len()).filter(|&i| options[i].1).collect();
            let mut choice = vec![0; used.len()];
            loop {
                let picked: Vec<usize> = used.iter().zip(&choice).map(|(&i, &c)| options[i].0[c]).collect();
                let used_sorts: Vec<Sym> = picked.iter().flat_map(|&g| self.words[self.elems[g].0].clone()).collect();
                for (wi, target) in self.words.iter().enumerate() {
                    for partial in FinFn::all(used_sorts.len(), target.len()) {
                        if partial.images().iter().zip(&used_sorts).any(|(&j, s)| target[j - 1] != *s) {
                            continue;
                        }
                        let Some((gs, theta)) = self.complete(&r, &options, &picked, partial.images(), target)? else {
                            continue;
                        };
                        let parts = gs
                            .iter()
                            .map(|&g| internalize_term(&r, &self.letters(self.elems[g].0), &self.elems[g].1))
                            .collect::<Result<Vec<_>, _>>()?;
                        let mut decoded = Vec::with_capacity(2);
                        for side in &sides {
                            let t = SigmaTerm::act(
                                theta.clone(),
                                target.clone(),
                                SigmaTerm::comp(side.clone(), parts.clone()),
                            );
                            decoded.push(t.decode(&self.sigma.base)?);
                        }
                        if decoded.iter().any(|t| t.depth() > d) {
                            too_deep = true;
                            continue;
                        }
                        let a = self.index.get(&(wi, decoded[0].clone()));
                        let b = self.index.get(&(wi, decoded[1].clone()));
                        if let (Some(&a), Some(&b)) = (a, b) {
                            if a != b {
                                pairs.push((a, b));
                            }
                        }
                    }
                }
                // Odometer over the pools of the used letters.
                let mut k = 0;
                while k < choice.len() {
                    choice[k] += 1;
                    if choice[k] < options[used[k]].0.len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == choice.len() {
                    break;
                }
            }
        }
        if too_deep {
            self.truncation.insert(Truncation::Depth);
        }
        Ok(pairs)
    }

    /// Fills in images for the unused letters so that the whole reindexing
    /// lies in `Δ_R`; the first witness found is returned. Used letters keep
    /// `picked` and the images `partial` of their blocks.
    fn complete(
        &self,
        r: &ContextStructure,
        options: &[(Vec<usize>, bool)],
        picked: &[usize],
        partial: &[usize],
        target: &[Sym],
    ) -> Result<Option<(Vec<usize>, FinFn)>, UniversalError> {
        let mut gs = Vec::with_capacity(options.len());
        let mut blocks: Vec<Vec<usize>> = Vec::with_capacity(options.len());
        let mut free = Vec::new();
        let (mut next, mut offset) = (0, 0);
        for (i, (pool, is_used)) in options.iter().enumerate() {
            if *is_used {
                let g = picked[next];
                let len = self.words[self.elems[g].0].len();
                gs.push(g);
                blocks.push(partial[offset..offset + len].to_vec());
                next += 1;
                offset += len;
            } else {
                gs.push(pool[0]);
                blocks.push(Vec::new());
                free.push(i);
            }
        }
        let family = r.family();
        let found = self.fill(&family, options, &free, &mut gs, &mut blocks, target)?;
        Ok(found.map(|theta| (gs, theta)))
    }

    fn fill(
        &self,
        family: &crate::finord::DeltaFamily,
        options: &[(Vec<usize>, bool)],
        free: &[usize],
        gs: &mut [usize],
        blocks: &mut [Vec<usize>],
        target: &[Sym],
    ) -> Result<Option<FinFn>, UniversalError> {
        let Some((&letter, rest)) = free.split_first() else {
            let theta = FinFn::new(target.len(), blocks.concat())?;
            return Ok(in_family(family, &theta)?.then_some(theta));
        };
        for &rep in &options[letter].0 {
            gs[letter] = rep;
            let word = &self.words[self.elems[rep].0];
            for block in FinFn::all(word.len(), target.len()) {
                if block.images().iter().zip(word).any(|(&j, s)| target[j - 1] != *s) {
                    continue;
                }
                blocks[letter] = block.images().to_vec();
                if let Some(theta) = self.fill(family, options, rest, gs, blocks, target)? {
                    return Ok(Some(theta));
                }
            }
        }
        Ok(None)
    }

    /// Every factorization of every application through child words, as
    /// (element, signature) pairs.
    fn keys(&self) -> Vec<(usize, Key)> {
        let r = &self.theory.structure;
        let c = self.bounds.max_ctx_len;
        let mut out = Vec::new();
        for (ei, (wi, t)) in self.elems.iter().enumerate() {
            let TermKind::App(op, args) = t.kind() else { continue };
            let letters = self.letters(*wi);
            let n = letters.len();
            let mut per_child: Vec<Vec<(Vec<usize>, usize)>> = Vec::new();
            for a in args {
                let mut opts = Vec::new();
                for u in words_containing(n, &letter_positions(&letters, a), c) {
                    let from: Vec<Letter> = u.iter().map(|&p| letters[p]).collect();
                    let sorts: Vec<Sym> = from.iter().map(|l| l.sort).collect();
                    let Some(&ci) = self.word_index.get(&sorts) else { continue };
                    let canon = a.rename(&from, &context_for_sorts(&sorts));
                    if let Some(&child) = self.index.get(&(ci, canon)) {
                        opts.push((u, child));
                    }
                }
                per_child.push(opts);
            }
            let mut partial: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new())];
            for opts in &per_child {
                partial = partial
                    .iter()
                    .flat_map(|(pos, kids)| {
                        opts.iter().map(move |(u, child)| {
                            let mut pos = pos.clone();
                            pos.extend_from_slice(u);
                            let mut kids = kids.clone();
                            kids.push(*child);
                            (pos, kids)
                        })
                    })
                    .collect();
            }
            for (pos, kids) in partial {
                if holds_positions(r, n, &pos).unwrap_or(false) {
                    out.push((ei, (*op, pos, kids)));
                }
            }
        }
        out
    }

    /// Congruence closure over the factorization keys, to a fixpoint.
    fn close(&mut self, salt: Option<u64>) {
        let mut keys = self.keys();
        if let Some(salt) = salt {
            scramble(&mut keys, salt);
        }
        loop {
            let mut merged = false;
            type Key<'a> = (usize, &'a Sym, &'a Vec<usize>, Vec<usize>);
            let mut table: HashMap<Key, usize> = HashMap::new();
            for (e, (op, pos, kids)) in &keys {
                let roots: Vec<usize> = kids.iter().map(|&k| self.uf.find(k)).collect();
                match table.entry((self.elems[*e].0, op, pos, roots)) {
                    std::collections::hash_map::Entry::Occupied(first) => {
                        merged |= self.uf.union(*first.get(), *e, ());
                    }
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        slot.insert(*e);
                    }
                }
            }
            if !merged {
                break;
            }
        }
    }

    pub fn sigma(&self) -> &SigmaSignature {
        &self.sigma
    }

    pub fn truncation(&self) -> Vec<Truncation> {
        self.truncation.iter().copied().collect()
    }

    pub fn element_count(&self) -> usize {
        self.elems.len()
    }

    pub fn class_count(&self) -> usize {
        self.uf.class_count()
    }

    pub fn class_of(&self, t: &SigmaTerm) -> Result<ClassRef, UniversalError> {
        let sort = t.sort(&self.sigma.base)?;
        let decoded = t.decode(&self.sigma.base)?;
        let found = self.word_index.get(&sort.args).and_then(|&w| self.index.get(&(w, decoded.clone())));
        Ok(match found {
            Some(&e) => ClassRef::Class(self.uf.find(e)),
            None => ClassRef::Outside(sort, decoded),
        })
    }

    /// Whether two closed Σ-terms are identified within the bounds.
    pub fn merged(&self, a: &SigmaTerm, b: &SigmaTerm) -> Result<bool, UniversalError> {
        Ok(self.class_of(a)? == self.class_of(b)?)
    }

    /// Classes of the pure Σ-terms of `hom` up to `sigma_depth`, followed by
    /// `extra` terms, each class listed in enumeration order.
    pub fn hom(&self, hom: &HomSort, sigma_depth: usize, extra: &[SigmaTerm]) -> Result<HomPartition, UniversalError> {
        for t in extra {
            if t.sort(&self.sigma.base)? != *hom {
                return Err(UniversalError::Type(format!("`{t}` is not of sort ({hom})")));
            }
        }
        let mut terms = enumerate_sigma(&self.sigma, hom, sigma_depth, ENUMERATION_LIMIT)?;
        let enumerated = terms.len();
        for t in extra {
            if !terms.contains(t) {
                terms.push(t.clone());
            }
        }
        let mut classes: Vec<Vec<SigmaTerm>> = Vec::new();
        let mut slot: HashMap<ClassRef, usize> = HashMap::new();
        let mut outside = false;
        for t in terms {
            let key = self.class_of(&t)?;
            outside |= matches!(key, ClassRef::Outside(..));
            let i = *slot.entry(key).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            classes[i].push(t);
        }
        let mut truncated = self.truncation.clone();
        if outside {
            truncated.insert(if hom.args.len() > self.bounds.max_ctx_len {
                Truncation::Ctx
            } else {
                Truncation::Depth
            });
        }
        Ok(HomPartition { hom: hom.clone(), enumerated, classes, truncated: truncated.into_iter().collect() })
    }
}

/// Reorders `items` by a salted hash of their positions.
fn scramble<T>(items: &mut Vec<T>, salt: u64) {
    use std::hash::{Hash, Hasher};
    let mut tagged: Vec<(u64, T)> = items
        .drain(..)
        .enumerate()
        .map(|(i, x)| {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            (salt, i).hash(&mut h);
            (h.finish(), x)
        })
        .collect();
    tagged.sort_by_key(|(k, _)| *k);
    items.extend(tagged.into_iter().map(|(_, x)| x));
}

fn occurrence_depth(t: &Term, l: Letter) -> Option<usize> {
    match t.kind() {
        TermKind::Var(x) => (*x == l).then_some(1),
        TermKind::Const(_) => None,
        TermKind::App(_, args) => args.iter().filter_map(|a| occurrence_depth(a, l)).max().map(|d| d + 1),
    }
}

/// The partition of one hom of the bounded universal model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomPartition {
    pub hom: HomSort,
    /// Number of enumerated Σ-terms, before extras.
    pub enumerated: usize,
    pub classes: Vec<Vec<SigmaTerm>>,
    pub truncated: Vec<Truncation>,
}

impl HomPartition {
    pub fn same_class(&self, a: &SigmaTerm, b: &SigmaTerm) -> bool {
        self.classes.iter().any(|c| c.contains(a) && c.contains(b))
    }
}

/// Cap on enumerated Σ-terms; beyond it the enumeration is refused.
pub const ENUMERATION_LIMIT: usize = 200_000;

/// Closed Σ-terms of `hom` with depth at most `depth`, shallowest first.
pub fn enumerate_sigma(
    sigma: &SigmaSignature,
    hom: &HomSort,
    depth: usize,
    limit: usize,
) -> Result<Vec<SigmaTerm>, UniversalError> {
    // by_depth[d] holds terms of depth exactly d + 1, grouped by hom.
    let mut by_depth: Vec<HashMap<HomSort, Vec<SigmaTerm>>> = Vec::new();
    let mut total = 0;
    let mut first: HashMap<HomSort, Vec<SigmaTerm>> = HashMap::new();
    for (op, decl) in sigma.base.ops() {
        if decl.arity.len() <= sigma.max_arity {
            first.entry(HomSort::new(decl.arity.clone(), decl.result)).or_default().push(SigmaTerm::Op(op));
        }
    }
    if sigma.max_arity >= 1 {
        for s in sigma.base.sorts() {
            first.entry(HomSort::new(vec![*s], *s)).or_default().push(SigmaTerm::Id(*s));
        }
    }
    by_depth.push(first);
    let compositions = sigma.compositions();
    let pull = |target: &[Sym], theta: &FinFn| -> Vec<Sym> { theta.images().iter().map(|&j| target[j - 1]).collect() };
    for d in 1..depth {
        let mut layer: HashMap<HomSort, Vec<SigmaTerm>> = HashMap::new();
        let upto = |h: &HomSort| -> Vec<(SigmaTerm, bool)> {
            by_depth
                .iter()
                .enumerate()
                .flat_map(|(k, m)| m.get(h).into_iter().flatten().map(move |t| (t.clone(), k + 1 == d)))
                .collect()
        };
        for theta in &sigma.thetas {
            for target in sort_words(sigma.base.sorts(), theta.cod()).into_iter().filter(|w| w.len() == theta.cod()) {
                if target.len() > sigma.max_arity {
                    continue;
                }
                let inner = pull(&target, theta);
                for res in sigma.base.sorts() {
                    let body_sort = HomSort::new(inner.clone(), *res);
                    for body in by_depth[d - 1].get(&body_sort).into_iter().flatten() {
                        layer.entry(HomSort::new(target.clone(), *res)).or_default().push(SigmaTerm::act(
                            theta.clone(),
                            target.clone(),
                            body.clone(),
                        ));
                    }
                }
            }
        }
        for (h, gs) in &compositions {
            let mut partial: Vec<(Vec<SigmaTerm>, bool)> =
                upto(h).into_iter().map(|(t, fresh)| (vec![t], fresh)).collect();
            for g in gs {
                let options = upto(g);
                partial = partial
                    .iter()
                    .flat_map(|(ts, fresh)| {
                        options.iter().map(move |(t, f)| {
                            let mut ts = ts.clone();
                            ts.push(t.clone());
                            (ts, *fresh || *f)
                        })
                    })
                    .collect();
                if partial.len() > limit {
                    return Err(UniversalError::Bound(format!("more than {limit} Σ-terms at depth {}", d + 1)));
                }
            }
            let res = HomSort::new(gs.iter().flat_map(|g| g.args.iter().copied()).collect(), h.res);
            for (mut ts, fresh) in partial {
                if fresh {
                    let head = ts.remove(0);
                    layer.entry(res.clone()).or_default().push(SigmaTerm::comp(head, ts));
                }
            }
        }
        total += layer.values().map(Vec::len).sum::<usize>();
        if total > limit {
            return Err(UniversalError::Bound(format!("more than {limit} Σ-terms at depth {}", d + 1)));
        }
        by_depth.push(layer);
    }
    Ok(by_depth.into_iter().flat_map(|mut m| m.remove(hom).unwrap_or_default()).collect())
}

/// `universal_hom` with a freshly built bounded model.
pub fn universal_hom(
    theory: &Theory,
    hom: &HomSort,
    bounds: Bounds,
    sigma_depth: usize,
    extra: &[SigmaTerm],
) -> Result<HomPartition, UniversalError> {
    UniversalModel::build(theory, bounds)?.hom(hom, sigma_depth, extra)
}
