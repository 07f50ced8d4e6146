//! The symbolic transition system: resolvent states, clause-resolution
//! transitions, and checkable derivation trees.
//!
//! States are immutable; every transition builds a new state. Goal selection
//! is fixed leftmost, so all non-determinism lives in clause choice. Finite
//! failure shows up as an empty successor list, never as an error — the
//! search layer treats it as a first-class refutation signal.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parse::parse_term_in_scope;
use crate::subst::{rename_apart, rename_term, unify, Subst};
use crate::term::{Program, Term, Var, VarGen};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("query must contain at least one goal")]
    EmptyQuery,
    #[error("cannot expand a final state (empty resolvent)")]
    FinalState,
    #[error("answer extraction requires a final state")]
    NonFinalState,
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
}

/// A resolvent (pending goal list) plus the substitution accumulated so
/// far. `depth` counts transitions from the initial state. Goals in the
/// resolvent always carry the current substitution applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicState {
    pub resolvent: Vec<Term>,
    pub subst: Subst,
    pub depth: usize,
}

impl SymbolicState {
    pub fn is_final(&self) -> bool {
        self.resolvent.is_empty()
    }
}

impl fmt::Display for SymbolicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.resolvent.is_empty() {
            write!(f, "<final>")
        } else {
            write!(f, "{}", crate::term::render_goals(&self.resolvent))
        }
    }
}

/// One resolution step: which clause fired on which goal, and the binding
/// delta it introduced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub clause_index: usize,
    pub goal: Term,
    pub mgu: Subst,
    pub label: String,
}

pub fn initial_state(query: &[Term]) -> Result<SymbolicState, EngineError> {
    if query.is_empty() {
        return Err(EngineError::EmptyQuery);
    }
    Ok(SymbolicState { resolvent: query.to_vec(), subst: Subst::new(), depth: 0 })
}

pub fn is_final(s: &SymbolicState) -> bool {
    s.is_final()
}

/// Restriction of a final state's substitution to the query variables.
pub fn answer(s: &SymbolicState, query_vars: &[Var]) -> Result<Subst, EngineError> {
    if !s.is_final() {
        return Err(EngineError::NonFinalState);
    }
    Ok(s.subst.restricted(query_vars))
}

/// A candidate resolution of one goal, shared between [`expand`] and the
/// search engine so both see exactly the same successor semantics.
#[derive(Debug, Clone)]
pub(crate) struct Resolution {
    pub clause_index: usize,
    pub subst: Subst,
    /// Renamed-apart clause body with the new substitution applied.
    pub body: Vec<Term>,
    pub mgu_delta: Subst,
    pub label: String,
}

/// All resolutions of `goal` under `subst`, in program order. External
/// predicates resolve through their pseudo clause index when the (ground)
/// arguments pass the check.
pub(crate) fn resolutions(
    goal: &Term,
    subst: &Subst,
    program: &Program,
    gen: &mut VarGen,
) -> Vec<Resolution> {
    let goal = subst.apply(goal);
    let key = match goal.goal_key() {
        Some(k) => k,
        None => return Vec::new(),
    };
    if let Some(ext_idx) = program.external_for(key) {
        let ext = &program.externals()[ext_idx];
        let args: Vec<Term> = match &goal {
            Term::Compound(_, args) => args.clone(),
            _ => Vec::new(),
        };
        if args.iter().all(Term::is_ground) && (ext.eval)(&args) {
            let clause_index = program.clauses().len() + ext_idx;
            return vec![Resolution {
                clause_index,
                subst: subst.clone(),
                body: Vec::new(),
                mgu_delta: Subst::new(),
                label: format!("checked {} via external {}/{}", goal, ext.name, ext.arity),
            }];
        }
        return Vec::new();
    }
    let mut out = Vec::new();
    for &ci in program.matching_clauses(key) {
        let clause = rename_apart(&program.clauses()[ci], gen);
        if let Some(s2) = unify(&goal, &clause.head, subst) {
            let body: Vec<Term> = clause.body.iter().map(|g| s2.apply(g)).collect();
            let mgu_delta = binding_delta(subst, &s2);
            let label = format!(
                "derived {} via clause {}: {}",
                s2.apply(&goal),
                ci,
                program.clauses()[ci]
            );
            out.push(Resolution { clause_index: ci, subst: s2, body, mgu_delta, label });
        }
    }
    out
}

fn binding_delta(before: &Subst, after: &Subst) -> Subst {
    let mut delta = Subst::new();
    for (id, t) in after.iter() {
        if before.get(id) != Some(t) {
            // reuse extended() to keep the delta idempotent; by
            // construction these bindings never conflict
            if let Some(next) =
                delta.extended(&Var::new(format!("_{}", id), id), t)
            {
                delta = next;
            }
        }
    }
    delta
}

/// Successors of a non-final state: the leftmost goal resolved against every
/// clause whose head unifies, in program order, using renamed-apart clause
/// instances. An empty result is finite failure of this branch.
pub fn expand(
    s: &SymbolicState,
    program: &Program,
    gen: &mut VarGen,
) -> Result<Vec<(Transition, SymbolicState)>, EngineError> {
    if s.is_final() {
        return Err(EngineError::FinalState);
    }
    let goal = &s.resolvent[0];
    let rest = &s.resolvent[1..];
    let out = resolutions(goal, &s.subst, program, gen)
        .into_iter()
        .map(|r| {
            let mut resolvent = r.body.clone();
            resolvent.extend(rest.iter().map(|g| r.subst.apply(g)));
            let next = SymbolicState { resolvent, subst: r.subst.clone(), depth: s.depth + 1 };
            let t = Transition {
                clause_index: r.clause_index,
                goal: s.subst.apply(goal),
                mgu: r.mgu_delta,
                label: r.label,
            };
            (t, next)
        })
        .collect();
    Ok(out)
}

/// A proof object: each node names the goal it proves, the clause that
/// proved it (by position in the program; external predicates use pseudo
/// indices past the clause list), and one child per body goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationTree {
    pub goal: Term,
    pub clause_index: usize,
    pub children: Vec<DerivationTree>,
}

impl DerivationTree {
    pub fn leaf(goal: Term, clause_index: usize) -> Self {
        DerivationTree { goal, clause_index, children: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(DerivationTree::node_count).sum::<usize>()
    }

    /// Root-to-leaf depth; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(DerivationTree::depth).max().unwrap_or(0)
    }

    /// Node addressed by a path of child indices from the root.
    pub fn node_at(&self, path: &[usize]) -> Option<&DerivationTree> {
        let mut node = self;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    pub fn terms(&self) -> Vec<&Term> {
        let mut out = vec![&self.goal];
        let mut stack: Vec<&DerivationTree> = self.children.iter().collect();
        while let Some(n) = stack.pop() {
            out.push(&n.goal);
            stack.extend(n.children.iter());
        }
        out
    }

    /// Structural well-formedness against a program: every node's child
    /// count equals the body length of the clause it cites (externals take
    /// no children). Says nothing about whether the proof is valid.
    pub fn is_well_formed(&self, program: &Program) -> bool {
        if let Some(c) = program.clause(self.clause_index) {
            c.body.len() == self.children.len()
                && self.children.iter().all(|ch| ch.is_well_formed(program))
        } else if program.is_external_ref(self.clause_index) {
            self.children.is_empty()
        } else {
            false
        }
    }

    fn rename_vars(&self, map: &mut HashMap<crate::term::VarId, Var>, gen: &mut VarGen) -> Self {
        DerivationTree {
            goal: rename_term(&self.goal, map, gen),
            clause_index: self.clause_index,
            children: self.children.iter().map(|c| c.rename_vars(map, gen)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DerivationError {
    #[error("root goal {found} does not match the query goal {query}")]
    RootMismatch { query: String, found: String },
    #[error("node {path:?} cites clause {index}, but the program has only {max} clause references")]
    ClauseIndexOutOfRange { path: Vec<usize>, index: usize, max: usize },
    #[error("node {path:?}: goal {goal} does not unify with the head of {clause}")]
    HeadMismatch { path: Vec<usize>, goal: String, clause: String },
    #[error("node {path:?}: {got} children for a clause with {expected} body goals")]
    ChildCountMismatch { path: Vec<usize>, expected: usize, got: usize },
    #[error("node {path:?}: child goal {found} does not match body goal {expected}")]
    ChildGoalMismatch { path: Vec<usize>, expected: String, found: String },
    #[error("node {path:?}: external {name} expects {expected} ground arguments")]
    ExternalArity { path: Vec<usize>, name: String, expected: usize },
    #[error("node {path:?}: external check {goal} failed")]
    ExternalCheckFailed { path: Vec<usize>, goal: String },
}

/// Validates a derivation tree against a program and a query goal, returning
/// the accumulated substitution on success. Pure recursive check,
/// independent of the search engine.
pub fn verify_derivation(
    program: &Program,
    query: &Term,
    tree: &DerivationTree,
) -> Result<Subst, DerivationError> {
    // Rename the tree's variables apart from the query's so that callers can
    // hand us trees from any source (parsed wire data, hand-built tests)
    // without id collisions.
    let mut gen = VarGen::above(tree.terms().into_iter().chain(std::iter::once(query)));
    let tree = tree.rename_vars(&mut HashMap::new(), &mut gen);
    let s = unify(query, &tree.goal, &Subst::new()).ok_or_else(|| {
        DerivationError::RootMismatch { query: query.to_string(), found: tree.goal.to_string() }
    })?;
    verify_node(program, &tree, s, &mut gen, &mut Vec::new())
}

fn verify_node(
    program: &Program,
    node: &DerivationTree,
    s: Subst,
    gen: &mut VarGen,
    path: &mut Vec<usize>,
) -> Result<Subst, DerivationError> {
    if let Some(clause) = program.clause(node.clause_index) {
        let clause = rename_apart(clause, gen);
        let mut s = unify(&node.goal, &clause.head, &s).ok_or_else(|| {
            DerivationError::HeadMismatch {
                path: path.clone(),
                goal: s.apply(&node.goal).to_string(),
                clause: program.describe_clause_ref(node.clause_index),
            }
        })?;
        if clause.body.len() != node.children.len() {
            return Err(DerivationError::ChildCountMismatch {
                path: path.clone(),
                expected: clause.body.len(),
                got: node.children.len(),
            });
        }
        for (i, (child, body_goal)) in node.children.iter().zip(&clause.body).enumerate() {
            path.push(i);
            s = unify(&child.goal, body_goal, &s).ok_or_else(|| {
                DerivationError::ChildGoalMismatch {
                    path: path.clone(),
                    expected: s.apply(body_goal).to_string(),
                    found: s.apply(&child.goal).to_string(),
                }
            })?;
            s = verify_node(program, child, s, gen, path)?;
            path.pop();
        }
        Ok(s)
    } else if let Some(ext) = program.external_by_ref(node.clause_index) {
        if !node.children.is_empty() {
            return Err(DerivationError::ChildCountMismatch {
                path: path.clone(),
                expected: 0,
                got: node.children.len(),
            });
        }
        let goal = s.apply(&node.goal);
        let ok = match &goal {
            Term::Compound(f, args)
                if f == &ext.name
                    && args.len() == ext.arity
                    && args.iter().all(Term::is_ground) =>
            {
                (ext.eval)(args)
            }
            Term::Atom(a) if a == &ext.name && ext.arity == 0 => (ext.eval)(&[]),
            _ => {
                return Err(DerivationError::ExternalArity {
                    path: path.clone(),
                    name: ext.name.clone(),
                    expected: ext.arity,
                });
            }
        };
        if ok {
            Ok(s)
        } else {
            Err(DerivationError::ExternalCheckFailed { path: path.clone(), goal: goal.to_string() })
        }
    } else {
        Err(DerivationError::ClauseIndexOutOfRange {
            path: path.clone(),
            index: node.clause_index,
            max: program.clause_ref_count(),
        })
    }
}

/// True iff `tree` is a valid derivation of an instance of `query` under
/// `program`. Malformed trees are invalid, not errors.
pub fn check_derivation(program: &Program, query: &Term, tree: &DerivationTree) -> bool {
    verify_derivation(program, query, tree).is_ok()
}

/// Wire form of a derivation tree: goals as program-grammar text, clauses by
/// integer index, children nested.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireDerivation {
    pub goal: String,
    pub clause: i64,
    #[serde(default)]
    pub children: Vec<WireDerivation>,
}

impl DerivationTree {
    pub fn to_wire(&self) -> WireDerivation {
        WireDerivation {
            goal: self.goal.to_string(),
            clause: self.clause_index as i64,
            children: self.children.iter().map(DerivationTree::to_wire).collect(),
        }
    }

    /// Decodes a wire tree. All goal texts are parsed in one shared variable
    /// scope, so a name used in two nodes denotes the same variable.
    pub fn from_wire(
        wire: &WireDerivation,
        scope: &mut HashMap<String, Var>,
        gen: &mut VarGen,
    ) -> Result<Self, String> {
        if wire.clause < 0 {
            return Err(format!("negative clause index {}", wire.clause));
        }
        let goal = parse_term_in_scope(&wire.goal, scope, gen)
            .map_err(|e| format!("bad goal text {:?}: {}", wire.goal, e))?;
        let children = wire
            .children
            .iter()
            .map(|c| DerivationTree::from_wire(c, scope, gen))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DerivationTree { goal, clause_index: wire.clause as usize, children })
    }
}
