//! Finite sets as a cartesian multicategory: multimaps, the action of
//! finite-ordinal functions, term interpretation and exhaustive model search.
//!
//! A carrier of size `k` is `{0, .., k-1}`. Tables are dense and indexed by
//! the mixed-radix encoding of argument tuples, last coordinate fastest.

use std::fmt;

use indexmap::IndexMap;
use rayon::prelude::*;
use thiserror::Error;

use crate::context::{self, reindexing, terminal_context, ContextStructure, Letter};
use crate::finord::FinFn;
use crate::symbol::Sym;
use crate::syntax::{is_r_context, Equation, Signature, Term, TermKind, Theory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("carrier mismatch: {0}")]
    Carrier(String),
    #[error("table for `{op}` has {got} entries, expected {expected}")]
    TableSize { op: String, got: usize, expected: usize },
    #[error("table value {value} is outside a carrier of size {size}")]
    Value { value: u32, size: usize },
    #[error("[{ctx}] is not a context for `{term}`")]
    Context { ctx: String, term: String },
    #[error("model does not interpret `{0}`")]
    Missing(String),
    #[error("model text, line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A multimorphism `X₁⋯Xₙ → Y` between finite sets, given by carrier sizes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiMap {
    doms: Vec<usize>,
    cod: usize,
    table: Vec<u32>,
}

fn product(sizes: &[usize]) -> usize {
    sizes.iter().product()
}

/// Decodes a mixed-radix index into a tuple.
fn decode(mut index: usize, sizes: &[usize], out: &mut [usize]) {
    for (slot, &s) in out.iter_mut().zip(sizes).rev() {
        *slot = index % s;
        index /= s;
    }
}

fn encode(tuple: impl IntoIterator<Item = usize>, sizes: &[usize]) -> usize {
    tuple.into_iter().zip(sizes).fold(0, |acc, (x, &s)| acc * s + x)
}

impl MultiMap {
    pub fn new(doms: Vec<usize>, cod: usize, table: Vec<u32>) -> Result<MultiMap, ModelError> {
        let expected = product(&doms);
        if table.len() != expected {
            return Err(ModelError::TableSize { op: "multimap".into(), got: table.len(), expected });
        }
        if let Some(&value) = table.iter().find(|&&v| v as usize >= cod) {
            return Err(ModelError::Value { value, size: cod });
        }
        Ok(MultiMap { doms, cod, table })
    }

    pub fn identity(size: usize) -> MultiMap {
        MultiMap { doms: vec![size], cod: size, table: (0..size as u32).collect() }
    }

    /// Builds a table by evaluating `f` on every tuple.
    pub fn from_fn(doms: Vec<usize>, cod: usize, mut f: impl FnMut(&[usize]) -> u32) -> MultiMap {
        let mut tuple = vec![0; doms.len()];
        let table = (0..product(&doms))
            .map(|i| {
                decode(i, &doms, &mut tuple);
                f(&tuple)
            })
            .collect();
        MultiMap { doms, cod, table }
    }

    pub fn doms(&self) -> &[usize] {
        &self.doms
    }

    pub fn cod(&self) -> usize {
        self.cod
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    pub fn apply(&self, tuple: &[usize]) -> u32 {
        self.table[encode(tuple.iter().copied(), &self.doms)]
    }
}

/// `θ_*(f)(x₁..xₙ) = f(x_θ(1)..x_θ(m))`, landing on the carriers `target`.
pub fn theta_action(f: &MultiMap, theta: &FinFn, target: &[usize]) -> Result<MultiMap, ModelError> {
    if f.doms.len() != theta.dom() || target.len() != theta.cod() {
        return Err(ModelError::Arity(format!(
            "function {theta} cannot act on a {}-ary map towards {} carriers",
            f.doms.len(),
            target.len()
        )));
    }
    for (i, &j) in theta.images().iter().enumerate() {
        if f.doms[i] != target[j - 1] {
            return Err(ModelError::Carrier(format!(
                "argument {} has size {} but target slot {j} has size {}",
                i + 1,
                f.doms[i],
                target[j - 1]
            )));
        }
    }
    let images = theta.images();
    let mut inner = vec![0; images.len()];
    Ok(MultiMap::from_fn(target.to_vec(), f.cod, |x| {
        for (slot, &j) in inner.iter_mut().zip(images) {
            *slot = x[j - 1];
        }
        f.apply(&inner)
    }))
}

/// `g ∘ (f₁, .., fₙ)` on the concatenated domains.
pub fn compose_multi(g: &MultiMap, fs: &[MultiMap]) -> Result<MultiMap, ModelError> {
    if g.doms.len() != fs.len() {
        return Err(ModelError::Arity(format!("{}-ary map composed with {} maps", g.doms.len(), fs.len())));
    }
    for (i, f) in fs.iter().enumerate() {
        if f.cod != g.doms[i] {
            return Err(ModelError::Carrier(format!(
                "map {} lands in size {} but slot has size {}",
                i + 1,
                f.cod,
                g.doms[i]
            )));
        }
    }
    let doms: Vec<usize> = fs.iter().flat_map(|f| f.doms.iter().copied()).collect();
    let mut inner = vec![0; fs.len()];
    Ok(MultiMap::from_fn(doms, g.cod, |x| {
        let mut offset = 0;
        for (slot, f) in inner.iter_mut().zip(fs) {
            let k = f.doms.len();
            *slot = f.apply(&x[offset..offset + k]) as usize;
            offset += k;
        }
        g.apply(&inner)
    }))
}

/// A model: carrier sizes per sort and a table per operation, both in signature order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinSetModel {
    pub carriers: IndexMap<Sym, usize>,
    pub tables: IndexMap<Sym, MultiMap>,
}

impl FinSetModel {
    pub fn carrier(&self, sort: Sym) -> Result<usize, ModelError> {
        self.carriers.get(&sort).copied().ok_or_else(|| ModelError::Missing(sort.to_string()))
    }

    pub fn table(&self, op: Sym) -> Result<&MultiMap, ModelError> {
        self.tables.get(&op).ok_or_else(|| ModelError::Missing(op.to_string()))
    }

    fn sizes(&self, ctx: &[Letter]) -> Result<Vec<usize>, ModelError> {
        ctx.iter().map(|l| self.carrier(l.sort)).collect()
    }

    /// Checks the tables against the signature's typing.
    pub fn validate(&self, sig: &Signature) -> Result<(), ModelError> {
        for (op, decl) in sig.ops() {
            let t = self.table(op)?;
            let doms = decl.arity.iter().map(|s| self.carrier(*s)).collect::<Result<Vec<_>, _>>()?;
            if t.doms != doms || t.cod != self.carrier(decl.result)? {
                return Err(ModelError::Carrier(format!("table for `{op}` does not match its typing")));
            }
        }
        Ok(())
    }

    /// Pointwise value of `t` with `ctx[i]` bound to `env[i]`.
    pub fn eval_at(&self, t: &Term, ctx: &[Letter], env: &[usize]) -> u32 {
        match t.kind() {
            TermKind::Var(l) => env[ctx.iter().position(|x| x == l).expect("variable in context")] as u32,
            TermKind::Const(c) => self.tables[c].table[0],
            TermKind::App(op, args) => {
                let xs: Vec<usize> = args.iter().map(|a| self.eval_at(a, ctx, env) as usize).collect();
                self.tables[op].apply(&xs)
            }
        }
    }
}

impl fmt::Display for FinSetModel {
    /// `carrier S = k` lines, then `table op : v₀ v₁ ..` in mixed-radix order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, k) in &self.carriers {
            writeln!(f, "carrier {s} = {k}")?;
        }
        for (op, t) in &self.tables {
            write!(f, "table {op} :")?;
            for v in &t.table {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Reads the text format back against a signature.
pub fn parse_model(sig: &Signature, text: &str) -> Result<FinSetModel, ModelError> {
    let mut carriers = IndexMap::new();
    let mut raw: IndexMap<Sym, Vec<u32>> = IndexMap::new();
    for (i, line) in text.lines().enumerate() {
        let err = |msg: &str| ModelError::Parse { line: i + 1, msg: msg.to_string() };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["carrier", s, "=", k] => {
                let k = k.parse::<usize>().map_err(|_| err("bad carrier size"))?;
                carriers.insert(Sym::new(s), k);
            }
            ["table", op, ":", values @ ..] => {
                let values = values.iter().map(|v| v.parse::<u32>()).collect::<Result<Vec<_>, _>>();
                raw.insert(Sym::new(op), values.map_err(|_| err("bad table value"))?);
            }
            _ => return Err(err("expected `carrier S = k` or `table op : ...`")),
        }
    }
    let mut carriers_sorted = IndexMap::new();
    for s in sig.sorts() {
        let k = carriers.get(s).copied().ok_or_else(|| ModelError::Missing(s.to_string()))?;
        carriers_sorted.insert(*s, k);
    }
    let mut tables = IndexMap::new();
    for (op, decl) in sig.ops() {
        let doms: Vec<usize> = decl.arity.iter().map(|s| carriers_sorted[s]).collect();
        let values = raw.shift_remove(&op).ok_or_else(|| ModelError::Missing(op.to_string()))?;
        let expected = product(&doms);
        if values.len() != expected {
            return Err(ModelError::TableSize { op: op.to_string(), got: values.len(), expected });
        }
        tables.insert(op, MultiMap::new(doms, carriers_sorted[&decl.result], values)?);
    }
    Ok(FinSetModel { carriers: carriers_sorted, tables })
}

/// `m_v(t)`, built from identities, operation tables, composition and the
/// action of the reindexing functions.
pub fn eval_term(m: &FinSetModel, r: &ContextStructure, v: &[Letter], t: &Term) -> Result<MultiMap, ModelError> {
    if !is_r_context(r, v, t).unwrap_or(false) {
        return Err(ModelError::Context { ctx: context::show_word(v), term: t.to_string() });
    }
    let target = m.sizes(v)?;
    let reindex = |w: &[Letter]| reindexing(v, w).expect("governed words use context letters");
    match t.kind() {
        TermKind::Var(l) => theta_action(&MultiMap::identity(m.carrier(l.sort)?), &reindex(&[*l]), &target),
        TermKind::Const(c) => theta_action(m.table(*c)?, &reindex(&[]), &target),
        TermKind::App(op, args) => {
            let mut parts = Vec::with_capacity(args.len());
            let mut ws: Vec<Letter> = Vec::new();
            for a in args {
                let w = terminal_context(r, &a.tau())
                    .ok_or_else(|| ModelError::Context { ctx: context::show_word(v), term: a.to_string() })?;
                parts.push(eval_term(m, r, &w, a)?);
                ws.extend(w);
            }
            let composite = compose_multi(m.table(*op)?, &parts)?;
            theta_action(&composite, &reindex(&ws), &target)
        }
    }
}

/// `m ⊨ t₁ ≈_v t₂`: both sides give the same table.
pub fn satisfies(m: &FinSetModel, r: &ContextStructure, eq: &Equation) -> Result<bool, ModelError> {
    Ok(eval_term(m, r, &eq.ctx, &eq.lhs)? == eval_term(m, r, &eq.ctx, &eq.rhs)?)
}

pub fn satisfies_all(m: &FinSetModel, theory: &Theory) -> Result<bool, ModelError> {
    for eq in &theory.equations {
        if !satisfies(m, &theory.structure, eq)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-sort functions between carriers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelMorphism {
    pub maps: IndexMap<Sym, Vec<u32>>,
}

/// Whether `f(b) ∘ m(α) = n(α) ∘ f(a)` for every operation `α : a → b`.
pub fn check_morphism(
    sig: &Signature,
    f: &ModelMorphism,
    m: &FinSetModel,
    n: &FinSetModel,
) -> Result<bool, ModelError> {
    for (s, &k) in &m.carriers {
        let map = f.maps.get(s).ok_or_else(|| ModelError::Missing(s.to_string()))?;
        let target = n.carrier(*s)?;
        if map.len() != k || map.iter().any(|&x| x as usize >= target) {
            return Err(ModelError::Carrier(format!("map for sort {s} is not a function {k} -> {target}")));
        }
    }
    for (op, decl) in sig.ops() {
        let (mt, nt) = (m.table(op)?, n.table(op)?);
        let mut tuple = vec![0; mt.doms.len()];
        let mut image = vec![0; mt.doms.len()];
        for i in 0..mt.table.len() {
            decode(i, &mt.doms, &mut tuple);
            for ((y, &x), s) in image.iter_mut().zip(&tuple).zip(&decl.arity) {
                *y = f.maps[s][x] as usize;
            }
            if f.maps[&decl.result][mt.table[i] as usize] != nt.apply(&image) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

const UNSET: u32 = u32::MAX;

/// A term flattened against a context: variables become positions.
enum Code {
    Var(usize),
    Op(usize, Vec<Code>),
}

/// The exhaustive search space for one vector of carrier sizes. Cells are
/// ordered constants first, then the remaining operations in signature
/// order, each table row-major; values ascend. The first model met in this
/// order is the lexicographically least.
struct Search {
    ops: Vec<Sym>,
    doms: Vec<Vec<usize>>,
    cods: Vec<usize>,
    offsets: Vec<usize>,
    cells: usize,
    /// Ground instances of every equation of the theory: (lhs, rhs, environment).
    instances: Vec<(usize, Vec<usize>)>,
    equations: Vec<(Code, Code)>,
    avoid: Option<(Code, Code, Vec<Vec<usize>>)>,
}

fn compile(t: &Term, ctx: &[Letter], slot: &IndexMap<Sym, usize>) -> Code {
    match t.kind() {
        TermKind::Var(l) => Code::Var(ctx.iter().position(|x| x == l).expect("variable in context")),
        TermKind::Const(c) => Code::Op(slot[c], Vec::new()),
        TermKind::App(op, args) => Code::Op(slot[op], args.iter().map(|a| compile(a, ctx, slot)).collect()),
    }
}

fn all_tuples(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut tuple = vec![0; sizes.len()];
    (0..product(sizes))
        .map(|i| {
            decode(i, sizes, &mut tuple);
            tuple.clone()
        })
        .collect()
}

impl Search {
    fn new(theory: &Theory, carriers: &IndexMap<Sym, usize>, avoid: Option<&Equation>) -> Search {
        let sig = &theory.signature;
        let mut order: Vec<Sym> = sig.ops().filter(|(_, d)| d.arity.is_empty()).map(|(o, _)| o).collect();
        order.extend(sig.ops().filter(|(_, d)| !d.arity.is_empty()).map(|(o, _)| o));
        let slot: IndexMap<Sym, usize> = order.iter().enumerate().map(|(i, o)| (*o, i)).collect();
        let mut doms = Vec::new();
        let mut cods = Vec::new();
        let mut offsets = Vec::new();
        let mut cells = 0;
        for op in &order {
            let decl = sig.op(*op).expect("declared");
            let d: Vec<usize> = decl.arity.iter().map(|s| carriers[s]).collect();
            offsets.push(cells);
            cells += product(&d);
            doms.push(d);
            cods.push(carriers[&decl.result]);
        }
        let sizes = |ctx: &[Letter]| ctx.iter().map(|l| carriers[&l.sort]).collect::<Vec<_>>();
        let mut instances = Vec::new();
        let mut equations = Vec::new();
        for (i, eq) in theory.equations.iter().enumerate() {
            equations.push((compile(&eq.lhs, &eq.ctx, &slot), compile(&eq.rhs, &eq.ctx, &slot)));
            instances.extend(all_tuples(&sizes(&eq.ctx)).into_iter().map(|env| (i, env)));
        }
        let avoid = avoid.map(|eq| {
            (compile(&eq.lhs, &eq.ctx, &slot), compile(&eq.rhs, &eq.ctx, &slot), all_tuples(&sizes(&eq.ctx)))
        });
        Search { ops: order, doms, cods, offsets, cells, instances, equations, avoid }
    }

    fn eval(&self, code: &Code, env: &[usize], values: &[u32]) -> Option<u32> {
        match code {
            Code::Var(i) => Some(env[*i] as u32),
            Code::Op(op, args) => {
                let mut index = 0;
                for (a, &s) in args.iter().zip(&self.doms[*op]) {
                    index = index * s + self.eval(a, env, values)? as usize;
                }
                let v = values[self.offsets[*op] + index];
                (v != UNSET).then_some(v)
            }
        }
    }

    /// No ground instance is already violated by the assigned cells.
    fn consistent(&self, values: &[u32]) -> bool {
        self.instances.iter().all(|(i, env)| {
            let (l, r) = &self.equations[*i];
            match (self.eval(l, env, values), self.eval(r, env, values)) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            }
        })
    }

    fn avoided(&self, values: &[u32]) -> bool {
        match &self.avoid {
            None => true,
            Some((l, r, envs)) => envs.iter().any(|env| self.eval(l, env, values) != self.eval(r, env, values)),
        }
    }

    fn cod_of_cell(&self, cell: usize) -> usize {
        let op = self.offsets.partition_point(|&o| o <= cell) - 1;
        self.cods[op]
    }

    /// Depth-first from `cell`, calling `found` on each complete model until it returns true.
    fn dfs(&self, cell: usize, values: &mut Vec<u32>, found: &mut dyn FnMut(&[u32]) -> bool) -> bool {
        if cell == self.cells {
            // With no cells nothing was assigned, so consistency is still unchecked.
            let consistent = self.cells > 0 || self.consistent(values);
            return consistent && self.avoided(values) && found(values);
        }
        for v in 0..self.cod_of_cell(cell) as u32 {
            values[cell] = v;
            if self.consistent(values) && self.dfs(cell + 1, values, found) {
                values[cell] = UNSET;
                return true;
            }
        }
        values[cell] = UNSET;
        false
    }

    fn model(&self, carriers: &IndexMap<Sym, usize>, sig: &Signature, values: &[u32]) -> FinSetModel {
        let mut tables = IndexMap::new();
        for (op, _) in sig.ops() {
            let i = self.ops.iter().position(|o| *o == op).expect("searched");
            let start = self.offsets[i];
            let table = values[start..start + product(&self.doms[i])].to_vec();
            tables.insert(op, MultiMap { doms: self.doms[i].clone(), cod: self.cods[i], table });
        }
        FinSetModel { carriers: carriers.clone(), tables }
    }

    /// The least model, splitting the first cell across threads.
    fn first(&self) -> Option<Vec<u32>> {
        let search_from = |values: &mut Vec<u32>, cell: usize| {
            let mut out = None;
            self.dfs(cell, values, &mut |vals| {
                out = Some(vals.to_vec());
                true
            });
            out
        };
        if self.cells == 0 {
            return search_from(&mut Vec::new(), 0);
        }
        (0..self.cod_of_cell(0) as u32).into_par_iter().find_map_first(|v| {
            let mut values = vec![UNSET; self.cells];
            values[0] = v;
            if self.consistent(&values) {
                search_from(&mut values, 1)
            } else {
                None
            }
        })
    }
}

/// Carrier size vectors in lexicographic order, each entry in `0..=max_size`.
fn carrier_vectors(sorts: &[Sym], max_size: usize) -> Vec<IndexMap<Sym, usize>> {
    let radix = vec![max_size + 1; sorts.len()];
    all_tuples(&radix).into_iter().map(|t| sorts.iter().copied().zip(t).collect()).collect()
}

/// The lexicographically least model of the theory with every carrier of
/// size at most `max_size`, optionally also refuting `avoid`.
pub fn find_model(theory: &Theory, max_size: usize, avoid: Option<&Equation>) -> Option<FinSetModel> {
    let sig = &theory.signature;
    carrier_vectors(sig.sorts(), max_size).into_iter().find_map(|carriers| {
        let search = Search::new(theory, &carriers, avoid);
        search.first().map(|values| search.model(&carriers, sig, &values))
    })
}

/// Every model of the theory with the given carrier sizes, in search order.
pub fn models_with_carriers(theory: &Theory, carriers: &IndexMap<Sym, usize>) -> Vec<FinSetModel> {
    let search = Search::new(theory, carriers, None);
    let mut values = vec![UNSET; search.cells];
    let mut out = Vec::new();
    search.dfs(0, &mut values, &mut |vals| {
        out.push(search.model(carriers, &theory.signature, vals));
        false
    });
    out
}
