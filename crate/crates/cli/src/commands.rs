use std::fmt::Display;
use std::fs;

use serde_json::{json, Value};
use thiserror::Error;
use ualg_core::context::{holds, show_word, terminal_context, ContextError, ContextStructure, Letter};
use ualg_core::deduction::{self, refute_by_invariant, Bounds, DeductionError, ProveOutcome};
use ualg_core::finord::{verify_structure_category, DeltaFamily, FinOrdError};
use ualg_core::selftest;
use ualg_core::setmodel::{find_model, FinSetModel};
use ualg_core::syntax::{parse_theory, SyntaxError, Theory};
use ualg_core::universal::{internalize_term, HomSort, UniversalError, UniversalModel};

use crate::{CountermodelArgs, CtxCmd, DeltaCmd, Format, ProveArgs, SelftestArgs, Status, TheoryArgs, UniversalArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    FinOrd(#[from] FinOrdError),
    #[error(transparent)]
    Deduction(#[from] DeductionError),
    #[error(transparent)]
    Universal(#[from] UniversalError),
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

/// Text lines or JSON records, never both.
pub struct Output {
    format: Format,
}

impl Output {
    pub fn new(format: Format) -> Output {
        Output { format }
    }

    fn text(&self, line: impl Display) {
        if self.format == Format::Text {
            println!("{line}");
        }
    }

    fn record(&self, value: Value) {
        if self.format == Format::Json {
            println!("{value}");
        }
    }
}

fn structure(token: &str) -> Result<ContextStructure> {
    Ok(token.parse()?)
}

/// Whitespace-separated letters, each `name` or `name:Sort`; bare names get sort `_`.
fn letters(text: &str) -> Vec<Letter> {
    text.split_whitespace()
        .map(|tok| match tok.split_once(':') {
            Some((name, sort)) => Letter::new(name, sort),
            None => Letter::new(tok, "_"),
        })
        .collect()
}

fn load(args: &TheoryArgs) -> Result<Theory> {
    let path = args.file.display().to_string();
    let text = fs::read_to_string(&args.file).map_err(|source| CliError::Read { path, source })?;
    let mut th = parse_theory(&text)?;
    if let Some(token) = &args.structure {
        th = th.with_structure(structure(token)?);
        for eq in &th.equations {
            th.check_equation(eq)?;
        }
    }
    Ok(th)
}

fn bounds(depth: usize, ctx: usize, rounds: usize) -> Result<Bounds> {
    Ok(Bounds::new(depth, ctx, rounds)?)
}

pub fn delta(out: &Output, cmd: DeltaCmd) -> Result<Status> {
    let DeltaCmd::Check { family, max } = cmd;
    let d: DeltaFamily = family.parse()?;
    let report = verify_structure_category(&d, max);
    out.text(&report);
    out.record(json!({
        "family": report.family,
        "max": report.max_n,
        "members": report.members,
        "passed": report.passed(),
        "violation": report.violation.as_ref().map(|v| v.to_string()),
    }));
    Ok(if report.passed() { Status::Success } else { Status::CheckFailed })
}

pub fn ctx(out: &Output, cmd: CtxCmd) -> Result<Status> {
    match cmd {
        CtxCmd::Rel { structure: token, context, word } => {
            let r = structure(&token)?;
            let (c, v) = (letters(&context), letters(&word));
            let verdict = holds(&r, &c, &v)?;
            out.text(verdict);
            out.record(json!({ "structure": r.to_string(), "context": show_word(&c), "word": show_word(&v), "holds": verdict }));
        }
        CtxCmd::Terminal { structure: token, word } => {
            let r = structure(&token)?;
            let v = letters(&word);
            let t = terminal_context(&r, &v);
            out.text(t.as_deref().map_or("none".to_string(), show_word));
            out.record(
                json!({ "structure": r.to_string(), "word": show_word(&v), "terminal": t.as_deref().map(show_word) }),
            );
        }
    }
    Ok(Status::Success)
}

pub fn prove(out: &Output, args: ProveArgs) -> Result<Status> {
    let th = load(&args.theory)?;
    let goal = th.parse_goal(&args.goal)?;
    let b = bounds(args.bounds.depth, args.bounds.ctx, args.bounds.rounds)?;
    match deduction::prove(&th, &goal, b)? {
        ProveOutcome::Proved(proof) => {
            let trace = proof.render();
            out.text(format!("proved {}", goal.body()));
            out.text(trace.trim_end());
            for line in trace.lines() {
                let depth = (line.len() - line.trim_start().len()) / 2;
                out.record(json!({ "derived": line.trim_start(), "depth": depth }));
            }
            out.record(json!({ "verdict": "proved", "goal": goal.body() }));
            Ok(Status::Success)
        }
        ProveOutcome::NotFound { truncated } => {
            let refuted = matches!(th.structure, ContextStructure::Injective | ContextStructure::StrictlyIncreasing)
                && refute_by_invariant(&th, &goal).unwrap_or(false);
            let cut: Vec<String> = truncated.iter().map(ToString::to_string).collect();
            let verdict = if refuted {
                "refuted-by-invariant".to_string()
            } else if cut.is_empty() {
                "inconclusive (truncated: none)".to_string()
            } else {
                format!("inconclusive (truncated: {})", cut.join(", "))
            };
            out.text(&verdict);
            out.record(json!({
                "verdict": if refuted { "refuted-by-invariant" } else { "inconclusive" },
                "goal": goal.body(),
                "truncated": cut,
            }));
            Ok(Status::Negative)
        }
    }
}

fn model_json(m: &FinSetModel) -> Value {
    let carriers: serde_json::Map<String, Value> = m.carriers.iter().map(|(s, k)| (s.to_string(), json!(k))).collect();
    let tables: serde_json::Map<String, Value> =
        m.tables.iter().map(|(op, t)| (op.to_string(), json!(t.table()))).collect();
    json!({ "carriers": carriers, "tables": tables })
}

pub fn countermodel(out: &Output, args: CountermodelArgs) -> Result<Status> {
    let th = load(&args.theory)?;
    let goal = args.goal.as_deref().map(|g| th.parse_goal(g)).transpose()?;
    match find_model(&th, args.max_size, goal.as_ref()) {
        Some(m) => {
            out.text(m.to_string().trim_end());
            out.record(json!({ "model": model_json(&m) }));
            Ok(Status::Success)
        }
        None => {
            out.text("none");
            out.record(json!({ "model": null }));
            Ok(Status::Negative)
        }
    }
}

pub fn universal(out: &Output, args: UniversalArgs) -> Result<Status> {
    let th = load(&args.theory)?;
    let hom: HomSort = args.hom.parse()?;
    let b = bounds(args.term_depth, args.ctx, args.rounds)?;
    let mut extra = Vec::new();
    if let Some(g) = &args.goal {
        let goal = th.parse_goal(g)?;
        let goal_hom = HomSort::new(goal.ctx.iter().map(|l| l.sort).collect(), goal.lhs.sort());
        if goal_hom != hom {
            return Err(CliError::Usage(format!("goal lives in ({goal_hom}), not in ({hom})")));
        }
        for side in [&goal.lhs, &goal.rhs] {
            extra.push(internalize_term(&th.structure, &goal.ctx, side)?);
        }
    }
    let model = UniversalModel::build(&th, b)?;
    let part = model.hom(&hom, args.depth, &extra)?;
    let cut: Vec<String> = part.truncated.iter().map(ToString::to_string).collect();
    let cut_note = if cut.is_empty() { String::new() } else { format!(" (truncated: {})", cut.join(", ")) };
    out.text(format!(
        "hom {hom}: {} classes over {} terms of depth at most {}{cut_note}",
        part.classes.len(),
        part.enumerated,
        args.depth
    ));
    for (i, class) in part.classes.iter().enumerate() {
        out.text(format!("class {} of size {}: {}", i + 1, class.len(), class[0]));
        out.record(json!({ "class": i + 1, "size": class.len(), "representative": class[0].to_string() }));
    }
    let merged = (extra.len() == 2).then(|| part.same_class(&extra[0], &extra[1]));
    if let Some(m) = merged {
        out.text(format!("goal sides merged: {m}"));
    }
    out.record(json!({
        "hom": hom.to_string(),
        "classes": part.classes.len(),
        "enumerated": part.enumerated,
        "truncated": cut,
        "goal_merged": merged,
    }));
    Ok(if merged == Some(false) { Status::Negative } else { Status::Success })
}

pub fn selftest(out: &Output, args: SelftestArgs) -> Result<Status> {
    let ids: Vec<usize> = if args.only.is_empty() { (1..=11).collect() } else { args.only };
    if let Some(bad) = ids.iter().find(|&&id| !(1..=11).contains(&id)) {
        return Err(CliError::Usage(format!("no criterion {bad}; criteria are 1 to 11")));
    }
    let report = selftest::run(&ids);
    out.text(report.to_string().trim_end());
    for o in &report.outcomes {
        out.record(json!({ "criterion": o.id, "title": o.title, "passed": o.passed, "detail": o.detail }));
    }
    Ok(if report.passed() { Status::Success } else { Status::CheckFailed })
}
