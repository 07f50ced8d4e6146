//! Enumerative program synthesis over a tiny expression language, encoded as
//! a logic program and solved by the engine.
//!
//! The candidate space is described by clauses: `solution/1` ties generation
//! to verification, `term/1` bridges into a size-indexed `term/2` that
//! enumerates ASTs up to a depth bound (the bound is a Peano numeral, plain
//! data to the logic), and `verifies/1` holds one check goal per
//! input/output example. The checks are evaluated by a registered external
//! predicate rather than axiomatized arithmetic clauses, which keeps
//! derivations small enough for guess biasing to matter.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::oracle::IntuitionOracle;
use crate::search::{solve, SearchConfig, SolveError, SolveResult};
use crate::term::{Program, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn name(&self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
        }
    }

    pub fn from_name(name: &str) -> Option<BinOp> {
        match name {
            "add" => Some(BinOp::Add),
            "sub" => Some(BinOp::Sub),
            "mul" => Some(BinOp::Mul),
            _ => None,
        }
    }
}

/// Expression ASTs, carried inside the logic as terms built from exactly the
/// functors `var/1`, `const/1`, `binop/3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprAst {
    Var(String),
    Const(i64),
    BinOp(BinOp, Box<ExprAst>, Box<ExprAst>),
}

impl ExprAst {
    pub fn depth(&self) -> usize {
        match self {
            ExprAst::Var(_) | ExprAst::Const(_) => 1,
            ExprAst::BinOp(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            ExprAst::Var(name) => Term::compound("var", vec![Term::atom(name.clone())]),
            ExprAst::Const(n) => Term::compound("const", vec![Term::Int(*n)]),
            ExprAst::BinOp(op, l, r) => Term::compound(
                "binop",
                vec![Term::atom(op.name()), l.to_term(), r.to_term()],
            ),
        }
    }

    pub fn from_term(t: &Term) -> Result<ExprAst, AstError> {
        match t {
            Term::Compound(f, args) if f == "var" && args.len() == 1 => match &args[0] {
                Term::Atom(name) => Ok(ExprAst::Var(name.clone())),
                other => Err(AstError::BadShape(format!("var({}): name must be an atom", other))),
            },
            Term::Compound(f, args) if f == "const" && args.len() == 1 => match &args[0] {
                Term::Int(n) => Ok(ExprAst::Const(*n)),
                other => {
                    Err(AstError::BadShape(format!("const({}): value must be an integer", other)))
                }
            },
            Term::Compound(f, args) if f == "binop" && args.len() == 3 => {
                let op = match &args[0] {
                    Term::Atom(name) => BinOp::from_name(name)
                        .ok_or_else(|| AstError::BadShape(format!("unknown operator {}", name)))?,
                    other => {
                        return Err(AstError::BadShape(format!(
                            "binop operator must be an atom, got {}",
                            other
                        )));
                    }
                };
                Ok(ExprAst::BinOp(
                    op,
                    Box::new(ExprAst::from_term(&args[1])?),
                    Box::new(ExprAst::from_term(&args[2])?),
                ))
            }
            other => Err(AstError::BadShape(format!("not an expression term: {}", other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AstError {
    #[error("malformed expression: {0}")]
    BadShape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("integer overflow during evaluation")]
    Overflow,
}

/// Standard integer evaluation. Overflow is an error; the grammars used at
/// this scale keep constants small, so hitting it means a malformed input.
pub fn eval_expr(e: &ExprAst, env: &BTreeMap<String, i64>) -> Result<i64, EvalError> {
    match e {
        ExprAst::Var(name) => {
            env.get(name).copied().ok_or_else(|| EvalError::UnboundVariable(name.clone()))
        }
        ExprAst::Const(n) => Ok(*n),
        ExprAst::BinOp(op, l, r) => {
            let a = eval_expr(l, env)?;
            let b = eval_expr(r, env)?;
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
            }
            .ok_or(EvalError::Overflow)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoExample {
    pub env: BTreeMap<String, i64>,
    pub expected: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarConfig {
    pub variables: Vec<String>,
    pub constants: Vec<i64>,
    pub ops: Vec<BinOp>,
    pub max_depth: usize,
}

impl GrammarConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.variables.is_empty() && self.constants.is_empty() {
            return Err(SynthesisError::Config(
                "grammar needs at least one variable or constant".into(),
            ));
        }
        if self.max_depth == 0 {
            return Err(SynthesisError::Config("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// On-disk benchmark format: the grammar fields flattened next to the
/// examples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    #[serde(flatten)]
    pub grammar: GrammarConfig,
    pub examples: Vec<IoExample>,
}

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("invalid synthesis configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("engine reported {answer}, which fails example {example:?}")]
    UnsoundAnswer { answer: String, example: IoExample },
}

pub const SOLUTION_QUERY: &str = "solution(X)";

fn peano(n: usize) -> String {
    let mut s = "zero".to_string();
    for _ in 0..n {
        s = format!("s({})", s);
    }
    s
}

fn env_to_term(env: &BTreeMap<String, i64>) -> Term {
    let mut list = Term::atom("nil");
    // BTreeMap iterates in key order; build the cons list back to front so
    // the rendered environment reads in order
    for (name, value) in env.iter().rev() {
        let bind = Term::compound("bind", vec![Term::atom(name.clone()), Term::Int(*value)]);
        list = Term::compound("cons", vec![bind, list]);
    }
    list
}

fn env_from_term(t: &Term) -> Option<BTreeMap<String, i64>> {
    let mut env = BTreeMap::new();
    let mut cur = t;
    loop {
        match cur {
            Term::Atom(a) if a == "nil" => return Some(env),
            Term::Compound(f, args) if f == "cons" && args.len() == 2 => {
                match &args[0] {
                    Term::Compound(b, bargs) if b == "bind" && bargs.len() == 2 => {
                        match (&bargs[0], &bargs[1]) {
                            (Term::Atom(name), Term::Int(v)) => {
                                env.insert(name.clone(), *v);
                            }
                            _ => return None,
                        }
                    }
                    _ => return None,
                }
                cur = &args[1];
            }
            _ => return None,
        }
    }
}

/// The external check predicate: `check(Env, Candidate, Expected)` succeeds
/// iff the candidate evaluates to the expected value under the environment.
fn check_pred(args: &[Term]) -> bool {
    if args.len() != 3 {
        return false;
    }
    let Some(env) = env_from_term(&args[0]) else { return false };
    let Ok(ast) = ExprAst::from_term(&args[1]) else { return false };
    let Term::Int(expected) = &args[2] else { return false };
    eval_expr(&ast, &env) == Ok(*expected)
}

/// Builds the synthesis program for a grammar and example set:
///
/// ```text
/// solution(X) :- term(X), verifies(X).
/// term(X) :- term(X, s(...(zero))).
/// term(var(V), s(_)) :- is_var(V).
/// term(const(C), s(_)) :- is_const(C).
/// term(binop(Op, A, B), s(D)) :- op(Op), term(A, D), term(B, D).
/// is_var/is_const/op facts from the grammar
/// verifies(X) :- check(env1, X, k1), ..., check(envN, X, kN).
/// ```
///
/// plus the registered `check/3` external. The emitted text parses back to
/// the same clauses.
pub fn make_synthesis_program(
    cfg: &GrammarConfig,
    examples: &[IoExample],
) -> Result<Program, SynthesisError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(SynthesisError::Config("at least one example is required".into()));
    }
    for (i, ex) in examples.iter().enumerate() {
        for v in &cfg.variables {
            if !ex.env.contains_key(v) {
                return Err(SynthesisError::Config(format!(
                    "example {} does not bind grammar variable {}",
                    i, v
                )));
            }
        }
    }

    let mut src = String::new();
    src.push_str("solution(X) :- term(X), verifies(X).\n");
    src.push_str(&format!("term(X) :- term(X, {}).\n", peano(cfg.max_depth)));
    src.push_str("term(var(V), s(_)) :- is_var(V).\n");
    src.push_str("term(const(C), s(_)) :- is_const(C).\n");
    src.push_str("term(binop(Op, A, B), s(D)) :- op(Op), term(A, D), term(B, D).\n");
    for v in &cfg.variables {
        src.push_str(&format!("is_var({}).\n", v));
    }
    for c in &cfg.constants {
        src.push_str(&format!("is_const({}).\n", c));
    }
    for op in &cfg.ops {
        src.push_str(&format!("op({}).\n", op.name()));
    }
    let checks: Vec<String> = examples
        .iter()
        .map(|ex| format!("check({}, X, {})", env_to_term(&ex.env), ex.expected))
        .collect();
    src.push_str(&format!("verifies(X) :- {}.\n", checks.join(", ")));

    let mut program = Program::parse(&src)
        .map_err(|e| SynthesisError::Config(format!("generated program does not parse: {}", e)))?;
    program
        .register_external("check", 3, Arc::new(check_pred))
        .map_err(SynthesisError::Config)?;
    Ok(program)
}

/// End-to-end synthesis: builds the program, solves `solution(X)`, and
/// re-verifies every answer with [`eval_expr`] outside the logic.
pub fn synthesize(
    cfg: &GrammarConfig,
    examples: &[IoExample],
    oracle: &mut dyn IntuitionOracle,
    search: &SearchConfig,
) -> Result<SolveResult, SynthesisError> {
    let program = make_synthesis_program(cfg, examples)?;
    let result = solve(&program, SOLUTION_QUERY, oracle, search)?;
    for answer in &result.answers {
        let var = result.query_vars.first().expect("solution(X) has one variable");
        let term = answer
            .bindings
            .get(var.id)
            .cloned()
            .unwrap_or_else(|| Term::Var(var.clone()));
        let ast = ExprAst::from_term(&term).map_err(|_| SynthesisError::UnsoundAnswer {
            answer: answer.rendered.clone(),
            example: examples[0].clone(),
        })?;
        for ex in examples {
            if eval_expr(&ast, &ex.env) != Ok(ex.expected) {
                return Err(SynthesisError::UnsoundAnswer {
                    answer: answer.rendered.clone(),
                    example: ex.clone(),
                });
            }
        }
    }
    Ok(result)
}
