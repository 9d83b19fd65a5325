//! Multi-sorted signatures, hash-consed terms, equations, theories and the
//! line-oriented theory language.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use indexmap::IndexMap;
use thiserror::Error;

use crate::context::{self, has_repeats, ContextError, ContextStructure, Letter, FRESH_PREFIX};
use crate::symbol::Sym;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("type error at line {line} in `{subterm}`: {msg}")]
    Type { line: usize, subterm: String, msg: String },
    #[error("context error in equation `{equation}`: {msg}")]
    Context { equation: String, msg: String },
    #[error("declaration error at line {line}: {msg}")]
    Declaration { line: usize, msg: String },
    #[error("renaming maps `{letter}` of sort {expected} to a term of sort {found}")]
    SortMismatch { letter: Letter, expected: Sym, found: Sym },
    #[error("renaming leaves `{0}` unmapped")]
    Unmapped(Letter),
    #[error("renaming shape mismatch: {0}")]
    RenamingShape(String),
    #[error(transparent)]
    Structure(#[from] ContextError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TermKind {
    Var(Letter),
    Const(Sym),
    App(Sym, Vec<Term>),
}

#[derive(Debug)]
struct TermNode {
    kind: TermKind,
    sort: Sym,
    depth: usize,
    hash: u64,
}

/// A hash-consed term. Structurally equal terms share one allocation, so
/// equality is a pointer comparison.
#[derive(Clone)]
pub struct Term(Arc<TermNode>);

type InternTable = DashMap<(TermKind, Sym), Term>;

fn intern_table() -> &'static InternTable {
    static TABLE: OnceLock<InternTable> = OnceLock::new();
    TABLE.get_or_init(DashMap::new)
}

impl Term {
    fn intern(kind: TermKind, sort: Sym) -> Term {
        let key = (kind, sort);
        if let Some(t) = intern_table().get(&key) {
            return t.clone();
        }
        let (kind, sort) = key;
        let depth = match &kind {
            TermKind::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
            _ => 1,
        };
        let mut h = DefaultHasher::new();
        kind.hash(&mut h);
        sort.hash(&mut h);
        let node = TermNode { kind: kind.clone(), sort, depth, hash: h.finish() };
        intern_table().entry((kind, sort)).or_insert_with(|| Term(Arc::new(node))).clone()
    }

    pub fn var(letter: Letter) -> Term {
        Term::intern(TermKind::Var(letter), letter.sort)
    }

    pub fn constant(name: Sym, sort: Sym) -> Term {
        Term::intern(TermKind::Const(name), sort)
    }

    /// Builds `op(args)` without consulting a signature; the caller vouches for typing.
    pub fn app(op: Sym, sort: Sym, args: Vec<Term>) -> Term {
        if args.is_empty() {
            return Term::constant(op, sort);
        }
        Term::intern(TermKind::App(op, args), sort)
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    pub fn sort(&self) -> Sym {
        self.0.sort
    }

    /// Leaves have depth 1.
    pub fn depth(&self) -> usize {
        self.0.depth
    }

    pub fn args(&self) -> &[Term] {
        match &self.0.kind {
            TermKind::App(_, args) => args,
            _ => &[],
        }
    }

    pub fn as_var(&self) -> Option<Letter> {
        match self.0.kind {
            TermKind::Var(l) => Some(l),
            _ => None,
        }
    }

    /// The left-to-right word of variable occurrences.
    pub fn tau(&self) -> Vec<Letter> {
        let mut out = Vec::new();
        self.tau_into(&mut out);
        out
    }

    fn tau_into(&self, out: &mut Vec<Letter>) {
        match &self.0.kind {
            TermKind::Var(l) => out.push(*l),
            TermKind::Const(_) => {}
            TermKind::App(_, args) => args.iter().for_each(|a| a.tau_into(out)),
        }
    }

    /// Distinct variables in order of first occurrence.
    pub fn vars(&self) -> Vec<Letter> {
        context::dedup_first(&self.tau())
    }

    /// Replaces `ctx[i]` by `images[i]`. Letters outside `ctx` stay put.
    pub fn substitute(&self, ctx: &[Letter], images: &[Term]) -> Term {
        match &self.0.kind {
            TermKind::Var(l) => match ctx.iter().position(|x| x == l) {
                Some(i) => images[i].clone(),
                None => self.clone(),
            },
            TermKind::Const(_) => self.clone(),
            TermKind::App(op, args) => {
                Term::app(*op, self.sort(), args.iter().map(|a| a.substitute(ctx, images)).collect())
            }
        }
    }

    /// Renames letter `from[i]` to `to[i]`.
    pub fn rename(&self, from: &[Letter], to: &[Letter]) -> Term {
        let images: Vec<Term> = to.iter().map(|l| Term::var(*l)).collect();
        self.substitute(from, &images)
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

fn kind_rank(k: &TermKind) -> u8 {
    match k {
        TermKind::Var(_) => 0,
        TermKind::Const(_) => 1,
        TermKind::App(..) => 2,
    }
}

impl Ord for Term {
    /// Structural: variables, then constants, then applications by operator
    /// name and then argument-wise.
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let by_kind = match (self.kind(), other.kind()) {
            (TermKind::Var(a), TermKind::Var(b)) => a.name.cmp(&b.name),
            (TermKind::Const(a), TermKind::Const(b)) => a.cmp(b),
            (TermKind::App(f, xs), TermKind::App(g, ys)) => f.cmp(g).then_with(|| xs.cmp(ys)),
            (a, b) => kind_rank(a).cmp(&kind_rank(b)),
        };
        by_kind.then_with(|| self.sort().cmp(&other.sort()))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            TermKind::Var(l) => write!(f, "{}", l.name),
            TermKind::Const(c) => write!(f, "{c}"),
            TermKind::App(op, args) => {
                write!(f, "{op}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpDecl {
    pub arity: Vec<Sym>,
    pub result: Sym,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    sorts: Vec<Sym>,
    ops: IndexMap<Sym, OpDecl>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sort(&mut self, sort: Sym) -> bool {
        if self.sorts.contains(&sort) {
            return false;
        }
        self.sorts.push(sort);
        true
    }

    /// Adds an operation; fails on a duplicate name or an undeclared sort.
    pub fn add_op(&mut self, name: Sym, arity: Vec<Sym>, result: Sym) -> Result<(), String> {
        if self.ops.contains_key(&name) {
            return Err(format!("operation `{name}` declared twice"));
        }
        if let Some(s) = arity.iter().chain([&result]).find(|s| !self.sorts.contains(s)) {
            return Err(format!("undeclared sort `{s}` in operation `{name}`"));
        }
        self.ops.insert(name, OpDecl { arity, result });
        Ok(())
    }

    /// Sorts in declaration order.
    pub fn sorts(&self) -> &[Sym] {
        &self.sorts
    }

    pub fn has_sort(&self, sort: Sym) -> bool {
        self.sorts.contains(&sort)
    }

    /// Operations in declaration order.
    pub fn ops(&self) -> impl Iterator<Item = (Sym, &OpDecl)> {
        self.ops.iter().map(|(k, v)| (*k, v))
    }

    pub fn op(&self, name: Sym) -> Option<&OpDecl> {
        self.ops.get(&name)
    }

    pub fn constants(&self) -> impl Iterator<Item = (Sym, Sym)> + '_ {
        self.ops().filter(|(_, d)| d.arity.is_empty()).map(|(n, d)| (n, d.result))
    }

    /// Builds a term, checking the operation's arity and argument sorts.
    pub fn apply(&self, op: Sym, args: Vec<Term>) -> Result<Term, String> {
        let decl = self.op(op).ok_or_else(|| format!("undeclared operation `{op}`"))?;
        if decl.arity.len() != args.len() {
            return Err(format!("`{op}` expects {} arguments, got {}", decl.arity.len(), args.len()));
        }
        for (i, (a, s)) in args.iter().zip(&decl.arity).enumerate() {
            if a.sort() != *s {
                return Err(format!("argument {} of `{op}` has sort {} but {s} is expected", i + 1, a.sort()));
            }
        }
        Ok(Term::app(op, decl.result, args))
    }

    /// Whether every operation in `t` is declared and applied at its typing.
    pub fn well_typed(&self, t: &Term) -> bool {
        match t.kind() {
            TermKind::Var(l) => self.has_sort(l.sort),
            TermKind::Const(c) => self.op(*c).is_some_and(|d| d.arity.is_empty() && d.result == t.sort()),
            TermKind::App(op, args) => {
                self.op(*op).is_some_and(|d| {
                    d.result == t.sort()
                        && d.arity.len() == args.len()
                        && d.arity.iter().zip(args).all(|(s, a)| a.sort() == *s)
                }) && args.iter().all(|a| self.well_typed(a))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Equation {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
    pub ctx: Vec<Letter>,
}

impl Equation {
    pub fn new(name: impl Into<String>, lhs: Term, rhs: Term, ctx: Vec<Letter>) -> Self {
        Equation { name: name.into(), lhs, rhs, ctx }
    }

    /// The equation with sides exchanged.
    pub fn flipped(&self) -> Equation {
        Equation::new(self.name.clone(), self.rhs.clone(), self.lhs.clone(), self.ctx.clone())
    }

    /// Renames the context to `_v1.._vn`, keeping sorts.
    pub fn canonical(&self) -> Equation {
        let to = canonical_context(&self.ctx);
        Equation::new(self.name.clone(), self.lhs.rename(&self.ctx, &to), self.rhs.rename(&self.ctx, &to), to)
    }

    /// Equal up to a sort-preserving bijective renaming of context letters.
    pub fn same_up_to_renaming(&self, other: &Equation) -> bool {
        let (a, b) = (self.canonical(), other.canonical());
        a.ctx == b.ctx && a.lhs == b.lhs && a.rhs == b.rhs
    }

    /// `lhs ~ rhs ctx [ x:S ... ]`, the body shared by axioms and goals.
    pub fn body(&self) -> String {
        format!("{} ~ {} ctx {}", self.lhs, self.rhs, show_ctx(&self.ctx))
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.body())
    }
}

/// `[ x:S y:T ]`, or `[ ]` when empty.
pub fn show_ctx(ctx: &[Letter]) -> String {
    let mut out = String::from("[");
    for l in ctx {
        out.push_str(&format!(" {}:{}", l.name, l.sort));
    }
    out.push_str(" ]");
    out
}

/// Engine letters `_v1.._vn` with the sorts of `ctx`.
pub fn canonical_context(ctx: &[Letter]) -> Vec<Letter> {
    ctx.iter().enumerate().map(|(i, l)| Letter::fresh(l.sort, i + 1)).collect()
}

/// Engine letters `_v1.._vn` for a sort vector.
pub fn context_for_sorts(sorts: &[Sym]) -> Vec<Letter> {
    sorts.iter().enumerate().map(|(i, s)| Letter::fresh(*s, i + 1)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Theory {
    pub name: String,
    pub signature: Signature,
    pub structure: ContextStructure,
    pub equations: Vec<Equation>,
}

impl Theory {
    /// Checks sort agreement, the context discipline and `R`-contexthood of both sides.
    pub fn check_equation(&self, eq: &Equation) -> Result<(), SyntaxError> {
        let ctx_err = |msg: String| SyntaxError::Context { equation: eq.name.clone(), msg };
        if has_repeats(&eq.ctx) {
            return Err(ctx_err("context repeats a letter".into()));
        }
        for side in [&eq.lhs, &eq.rhs] {
            if !self.signature.well_typed(side) {
                return Err(SyntaxError::Type { line: 0, subterm: side.to_string(), msg: "ill-typed term".into() });
            }
        }
        if eq.lhs.sort() != eq.rhs.sort() {
            return Err(SyntaxError::Type {
                line: 0,
                subterm: eq.body(),
                msg: format!("sides have sorts {} and {}", eq.lhs.sort(), eq.rhs.sort()),
            });
        }
        for side in [&eq.lhs, &eq.rhs] {
            if !is_r_context(&self.structure, &eq.ctx, side)? {
                return Err(ctx_err(format!(
                    "[{}] is not a {} context for `{side}`",
                    context::show_word(&eq.ctx),
                    self.structure
                )));
            }
        }
        Ok(())
    }

    pub fn axiom(&self, name: &str) -> Option<&Equation> {
        self.equations.iter().find(|e| e.name == name)
    }

    /// The same theory read under another context structure.
    pub fn with_structure(&self, structure: ContextStructure) -> Theory {
        Theory { structure, ..self.clone() }
    }

    /// Parses `<term> ~ <term> ctx [...]` against this theory and validates it.
    pub fn parse_goal(&self, text: &str) -> Result<Equation, SyntaxError> {
        let mut p = Parser::new(text, 1)?;
        let eq = p.equation_body("goal", &self.signature)?;
        p.expect_end()?;
        self.check_equation(&eq)?;
        Ok(eq)
    }
}

impl fmt::Display for Theory {
    /// Prints the theory in its source language; parsing the output yields the same theory.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theory {}", self.name)?;
        writeln!(f, "structure {}", self.structure)?;
        let sorts: Vec<&str> = self.signature.sorts().iter().map(|s| s.as_str()).collect();
        if !sorts.is_empty() {
            writeln!(f, "sort {}", sorts.join(" "))?;
        }
        for (name, decl) in self.signature.ops() {
            let arity: Vec<&str> = decl.arity.iter().map(|s| s.as_str()).collect();
            if arity.is_empty() {
                writeln!(f, "op {name} : -> {}", decl.result)?;
            } else {
                writeln!(f, "op {name} : {} -> {}", arity.join(" "), decl.result)?;
            }
        }
        for eq in &self.equations {
            writeln!(f, "eq {} : {}", eq.name, eq.body())?;
        }
        Ok(())
    }
}

pub fn tau(t: &Term) -> Vec<Letter> {
    t.tau()
}

/// Whether `c` is an `R`-context for `t`.
pub fn is_r_context(r: &ContextStructure, c: &[Letter], t: &Term) -> Result<bool, ContextError> {
    context::holds(r, c, &t.tau())
}

/// Applies a sort-preserving renaming to every variable of `t`.
pub fn apply_renaming(s: &HashMap<Letter, Term>, t: &Term) -> Result<Term, SyntaxError> {
    let mut entries: Vec<(&Letter, &Term)> = s.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    for (l, img) in &entries {
        if img.sort() != l.sort {
            return Err(SyntaxError::SortMismatch { letter: **l, expected: l.sort, found: img.sort() });
        }
    }
    if let Some(l) = t.vars().into_iter().find(|l| !s.contains_key(l)) {
        return Err(SyntaxError::Unmapped(l));
    }
    let (from, images): (Vec<Letter>, Vec<Term>) = entries.into_iter().map(|(l, t)| (*l, t.clone())).unzip();
    Ok(t.substitute(&from, &images))
}

/// Whether `(s, ws, w)` is an `R`-renaming of `v`: `w R w₁⋯wₙ` and `wᵢ R τ(s(vᵢ))`.
pub fn is_r_renaming(
    r: &ContextStructure,
    s: &HashMap<Letter, Term>,
    v: &[Letter],
    w: &[Letter],
    ws: &[Vec<Letter>],
) -> Result<bool, SyntaxError> {
    if ws.len() != v.len() {
        return Err(SyntaxError::RenamingShape(format!("{} side contexts for {} letters", ws.len(), v.len())));
    }
    if s.len() != v.len() || v.iter().any(|l| !s.contains_key(l)) {
        return Err(SyntaxError::RenamingShape("renaming domain differs from the context".into()));
    }
    let images: Vec<Term> = v.iter().map(|l| s[l].clone()).collect();
    r_renaming_guard(r, v, &images, w, ws)
}

/// Positional form of [`is_r_renaming`]: `images[i]` is the image of `v[i]`.
pub fn r_renaming_guard(
    r: &ContextStructure,
    v: &[Letter],
    images: &[Term],
    w: &[Letter],
    ws: &[Vec<Letter>],
) -> Result<bool, SyntaxError> {
    if images.len() != v.len() || ws.len() != v.len() {
        return Err(SyntaxError::RenamingShape("image and side-context counts must match the context".into()));
    }
    for (l, img) in v.iter().zip(images) {
        if img.sort() != l.sort {
            return Err(SyntaxError::SortMismatch { letter: *l, expected: l.sort, found: img.sort() });
        }
    }
    if !context::holds(r, w, &ws.concat())? {
        return Ok(false);
    }
    for (wi, img) in ws.iter().zip(images) {
        if !is_r_context(r, wi, img)? {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Punct(&'static str),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    line: usize,
    end_col: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'
}

/// An unresolved term with the column it starts at.
struct Ast {
    name: String,
    col: usize,
    args: Option<Vec<Ast>>,
}

impl Ast {
    fn show(&self) -> String {
        match &self.args {
            None => self.name.clone(),
            Some(args) => {
                let inner: Vec<String> = args.iter().map(Ast::show).collect();
                format!("{}({})", self.name, inner.join(", "))
            }
        }
    }
}

impl Parser {
    fn new(text: &str, line: usize) -> Result<Parser, SyntaxError> {
        let mut toks = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let col = i + 1;
            if chars[i..].starts_with(&['-', '>']) {
                toks.push((Tok::Punct("->"), col));
                i += 2;
                continue;
            }
            let punct = match c {
                '(' => Some("("),
                ')' => Some(")"),
                ',' => Some(","),
                ':' => Some(":"),
                '~' => Some("~"),
                '[' => Some("["),
                ']' => Some("]"),
                _ => None,
            };
            if let Some(p) = punct {
                toks.push((Tok::Punct(p), col));
                i += 1;
            } else if is_ident_char(c) {
                let start = i;
                // An inner hyphen joins words, as in `left-surjective`; `->` never does.
                while i < chars.len()
                    && (is_ident_char(chars[i])
                        || (chars[i] == '-' && chars.get(i + 1).is_some_and(|&n| n.is_alphanumeric())))
                {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            } else {
                return Err(SyntaxError::Parse { line, col, msg: format!("unexpected character `{c}`") });
            }
        }
        Ok(Parser { toks, pos: 0, line, end_col: chars.len() + 1 })
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError::Parse { line: self.line, col: self.col(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn expect_end(&self) -> Result<(), SyntaxError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    fn term(&mut self) -> Result<Ast, SyntaxError> {
        let col = self.col();
        let name = self.ident("a term")?;
        if !self.eat("(") {
            return Ok(Ast { name, col, args: None });
        }
        let mut args = Vec::new();
        if !self.eat(")") {
            loop {
                args.push(self.term()?);
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(Ast { name, col, args: Some(args) })
    }

    fn context(&mut self, sig: &Signature) -> Result<Vec<Letter>, SyntaxError> {
        self.expect("[")?;
        let mut ctx = Vec::new();
        while !self.eat("]") {
            let name = self.ident("a context variable `name:Sort`")?;
            if name.starts_with(FRESH_PREFIX) {
                return self.err(format!("variable names may not start with `{FRESH_PREFIX}`"));
            }
            if sig.op(Sym::new(&name)).is_some() {
                return self.err(format!("variable `{name}` clashes with a declared operation"));
            }
            self.expect(":")?;
            let sort = self.ident("a sort")?;
            if !sig.has_sort(Sym::new(&sort)) {
                return self.err(format!("undeclared sort `{sort}`"));
            }
            ctx.push(Letter::new(&name, &sort));
        }
        Ok(ctx)
    }

    fn resolve(&self, ast: &Ast, sig: &Signature, ctx: &[Letter], equation: &str) -> Result<Term, SyntaxError> {
        let name = Sym::new(&ast.name);
        let type_err = |msg: String| SyntaxError::Type { line: self.line, subterm: ast.show(), msg };
        match sig.op(name) {
            Some(decl) => {
                let args = ast.args.as_deref().unwrap_or(&[]);
                if args.is_empty() {
                    if !decl.arity.is_empty() {
                        return Err(type_err(format!("`{name}` expects {} arguments", decl.arity.len())));
                    }
                    return Ok(Term::constant(name, decl.result));
                }
                let args = args.iter().map(|a| self.resolve(a, sig, ctx, equation)).collect::<Result<Vec<_>, _>>()?;
                sig.apply(name, args).map_err(type_err)
            }
            None if ast.args.is_some() => Err(type_err(format!("undeclared operation `{name}`"))),
            None => match ctx.iter().find(|l| l.name == name) {
                Some(l) => Ok(Term::var(*l)),
                None => Err(SyntaxError::Context {
                    equation: equation.to_string(),
                    msg: format!("variable `{name}` (column {}) is not in the context", ast.col),
                }),
            },
        }
    }

    fn equation_body(&mut self, name: &str, sig: &Signature) -> Result<Equation, SyntaxError> {
        let lhs = self.term()?;
        self.expect("~")?;
        let rhs = self.term()?;
        match self.ident("`ctx`")?.as_str() {
            "ctx" => {}
            _ => {
                self.pos -= 1;
                return self.err("expected `ctx`");
            }
        }
        let ctx = self.context(sig)?;
        if let Some(l) =
            ctx.iter().enumerate().find_map(|(i, l)| ctx[..i].iter().any(|m| m.name == l.name).then_some(l))
        {
            return Err(SyntaxError::Context {
                equation: name.to_string(),
                msg: format!("context repeats `{}`", l.name),
            });
        }
        let lhs = self.resolve(&lhs, sig, &ctx, name)?;
        let rhs = self.resolve(&rhs, sig, &ctx, name)?;
        if lhs.sort() != rhs.sort() {
            return Err(SyntaxError::Type {
                line: self.line,
                subterm: format!("{lhs} ~ {rhs}"),
                msg: format!("sides have sorts {} and {}", lhs.sort(), rhs.sort()),
            });
        }
        Ok(Equation::new(name, lhs, rhs, ctx))
    }
}

/// Parses a theory file.
pub fn parse_theory(text: &str) -> Result<Theory, SyntaxError> {
    let mut name: Option<String> = None;
    let mut structure: Option<ContextStructure> = None;
    let mut signature = Signature::new();
    let mut equations: Vec<Equation> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut p = Parser::new(raw, line)?;
        if p.toks.is_empty() {
            continue;
        }
        let decl_err = |msg: String| SyntaxError::Declaration { line, msg };
        let keyword = p.ident("a statement keyword")?;
        match keyword.as_str() {
            "theory" => {
                let n = p.ident("a theory name")?;
                p.expect_end()?;
                if name.replace(n).is_some() {
                    return Err(decl_err("theory named twice".into()));
                }
            }
            "structure" => {
                let col = p.col();
                let token = p.ident("a structure token")?;
                p.expect_end()?;
                let r: ContextStructure = token.parse().map_err(|_| SyntaxError::Parse {
                    line,
                    col,
                    msg: format!("unknown structure `{token}`"),
                })?;
                if !r.is_modelable() {
                    return Err(decl_err(format!("structure `{r}` is not modelable")));
                }
                if structure.replace(r).is_some() {
                    return Err(decl_err("structure declared twice".into()));
                }
            }
            "sort" => {
                let mut any = false;
                while p.pos < p.toks.len() {
                    let s = p.ident("a sort name")?;
                    if !signature.add_sort(Sym::new(&s)) {
                        return Err(decl_err(format!("sort `{s}` declared twice")));
                    }
                    any = true;
                }
                if !any {
                    return p.err("expected a sort name");
                }
            }
            "op" => {
                let op = p.ident("an operation name")?;
                if op.starts_with(FRESH_PREFIX) {
                    return Err(decl_err(format!("operation names may not start with `{FRESH_PREFIX}`")));
                }
                p.expect(":")?;
                let mut arity = Vec::new();
                while !p.eat("->") {
                    arity.push(Sym::new(&p.ident("a sort or `->`")?));
                }
                let result = Sym::new(&p.ident("a result sort")?);
                p.expect_end()?;
                signature.add_op(Sym::new(&op), arity, result).map_err(decl_err)?;
            }
            "eq" => {
                let eq_name = p.ident("an equation name")?;
                p.expect(":")?;
                if equations.iter().any(|e| e.name == eq_name) {
                    return Err(decl_err(format!("equation `{eq_name}` declared twice")));
                }
                let eq = p.equation_body(&eq_name, &signature)?;
                p.expect_end()?;
                let r = structure.as_ref().ok_or_else(|| decl_err("`structure` must precede equations".into()))?;
                for side in [&eq.lhs, &eq.rhs] {
                    if !is_r_context(r, &eq.ctx, side)? {
                        return Err(SyntaxError::Context {
                            equation: eq_name.clone(),
                            msg: format!("[{}] is not a {r} context for `{side}`", context::show_word(&eq.ctx)),
                        });
                    }
                }
                equations.push(eq);
            }
            other => {
                p.pos -= 1;
                return p.err(format!("unknown statement `{other}`"));
            }
        }
    }
    let structure = structure.ok_or(SyntaxError::Declaration { line: 0, msg: "missing `structure`".into() })?;
    Ok(Theory { name: name.unwrap_or_else(|| "unnamed".into()), signature, structure, equations })
}
