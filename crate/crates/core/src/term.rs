//! First-order terms, clauses, and programs.
//!
//! Terms are immutable after construction. Variables are identified by a
//! numeric id; the name is kept only for printing. Ids are handed out by a
//! [`VarGen`], which is owned by whoever needs fresh variables (a parser, a
//! solver run) and never shared between runs.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub type VarId = u64;

/// A logic variable. Equality and hashing use both name and id, but the
/// engine only ever compares ids; two variables with the same id are the
/// same variable regardless of display name.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Var {
    pub name: String,
    pub id: VarId,
}

impl Var {
    pub fn new(name: impl Into<String>, id: VarId) -> Self {
        Var { name: name.into(), id }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.name.is_empty() {
            write!(f, "_G{}", self.id)
        } else {
            // anonymous variables print back as `_`; they are never shared,
            // so reparsing preserves structure
            write!(f, "{}", self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    /// An atom constant (arity-0 symbol).
    Atom(String),
    /// An integer constant. Plain data: the engine never evaluates arithmetic.
    Int(i64),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>, id: VarId) -> Term {
        Term::Var(Var::new(name, id))
    }

    pub fn atom(name: impl Into<String>) -> Term {
        Term::Atom(name.into())
    }

    /// Builds a compound term. Arity-0 symbols are constants, so an empty
    /// argument list collapses to an atom.
    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Term {
        let functor = functor.into();
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Atom(_) | Term::Int(_))
    }

    /// `(functor, arity)` key for predicate lookup. Variables and integers
    /// are not callable and have no key.
    pub fn goal_key(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(name) => Some((name, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            Term::Var(_) | Term::Int(_) => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Int(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects the variables of `self` in first-occurrence order.
    pub fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.iter().any(|u| u.id == v.id) {
                    out.push(v.clone());
                }
            }
            Term::Atom(_) | Term::Int(_) => {}
            Term::Compound(_, args) => {
                for a in args {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn max_var_id(&self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(v.id),
            Term::Atom(_) | Term::Int(_) => None,
            Term::Compound(_, args) => args.iter().filter_map(Term::max_var_id).max(),
        }
    }
}

// The display form is exactly the source grammar, so printing a term and
// parsing it back yields a structurally equal term (up to variable ids).
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{}", v),
            Term::Atom(a) => write!(f, "{}", a),
            Term::Int(n) => write!(f, "{}", n),
            Term::Compound(functor, args) => {
                write!(f, "{}(", functor)?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", arg)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Generator of fresh variable ids for one parser or solver run.
#[derive(Debug, Clone, Default)]
pub struct VarGen {
    next: VarId,
}

impl VarGen {
    pub fn new() -> Self {
        VarGen { next: 0 }
    }

    /// A generator whose ids are strictly above every variable in `terms`.
    pub fn above<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Self {
        let max = terms.into_iter().filter_map(Term::max_var_id).max();
        VarGen { next: max.map_or(0, |m| m + 1) }
    }

    pub fn fresh(&mut self, name: &str) -> Var {
        let id = self.next;
        self.next += 1;
        Var::new(name, id)
    }

    pub fn bump_past(&mut self, t: &Term) {
        if let Some(m) = t.max_var_id() {
            self.next = self.next.max(m + 1);
        }
    }
}

/// A definite clause `head :- body`. An empty body is a fact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
}

impl Clause {
    pub fn new(head: Term, body: Vec<Term>) -> Self {
        Clause { head, body }
    }

    pub fn fact(head: Term) -> Self {
        Clause { head, body: Vec::new() }
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        std::iter::once(&self.head).chain(self.body.iter())
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, g) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", g)?;
            }
        }
        write!(f, ".")
    }
}

/// A deterministic, side-effect-free predicate evaluated outside the clause
/// logic. Externals succeed only on ground arguments; they are the single
/// extension point the engine offers (the synthesis demo registers its
/// input/output check through it).
#[derive(Clone)]
pub struct ExternalPred {
    pub name: String,
    pub arity: usize,
    pub eval: Arc<dyn Fn(&[Term]) -> bool + Send + Sync>,
}

impl fmt::Debug for ExternalPred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExternalPred({}/{})", self.name, self.arity)
    }
}

/// An ordered clause list with a `(functor, arity)` index, plus registered
/// external predicates. Clause order is source order and is the engine's
/// tie-breaking order everywhere.
#[derive(Debug, Clone, Default)]
pub struct Program {
    clauses: Vec<Clause>,
    index: HashMap<(String, usize), Vec<usize>>,
    externals: Vec<ExternalPred>,
    ext_index: HashMap<(String, usize), usize>,
}

impl Program {
    pub fn from_clauses(clauses: Vec<Clause>) -> Self {
        let mut p = Program {
            clauses,
            index: HashMap::new(),
            externals: Vec::new(),
            ext_index: HashMap::new(),
        };
        p.rebuild_index();
        p
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (i, c) in self.clauses.iter().enumerate() {
            let (f, a) = c
                .head
                .goal_key()
                .expect("clause heads are atoms or compounds by construction");
            self.index.entry((f.to_string(), a)).or_default().push(i);
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, i: usize) -> Option<&Clause> {
        self.clauses.get(i)
    }

    pub fn externals(&self) -> &[ExternalPred] {
        &self.externals
    }

    /// Positions of clauses whose head could match the key, in source order.
    pub fn matching_clauses(&self, key: (&str, usize)) -> &[usize] {
        self.index
            .get(&(key.0.to_string(), key.1))
            .map_or(&[][..], Vec::as_slice)
    }

    pub fn external_for(&self, key: (&str, usize)) -> Option<usize> {
        self.ext_index.get(&(key.0.to_string(), key.1)).copied()
    }

    /// Total number of clause references: regular clause indices first, then
    /// one pseudo-index per external predicate. Derivation trees cite
    /// externals through those pseudo-indices.
    pub fn clause_ref_count(&self) -> usize {
        self.clauses.len() + self.externals.len()
    }

    pub fn is_external_ref(&self, index: usize) -> bool {
        index >= self.clauses.len() && index < self.clause_ref_count()
    }

    pub fn external_by_ref(&self, index: usize) -> Option<&ExternalPred> {
        if self.is_external_ref(index) {
            self.externals.get(index - self.clauses.len())
        } else {
            None
        }
    }

    /// Registers an external predicate. Fails if the key is already defined
    /// by clauses or another external; mixing the two would make clause
    /// choice ambiguous.
    pub fn register_external(
        &mut self,
        name: impl Into<String>,
        arity: usize,
        eval: Arc<dyn Fn(&[Term]) -> bool + Send + Sync>,
    ) -> Result<(), String> {
        let name = name.into();
        let key = (name.clone(), arity);
        if self.index.contains_key(&key) {
            return Err(format!("{}/{} is already defined by program clauses", name, arity));
        }
        if self.ext_index.contains_key(&key) {
            return Err(format!("external {}/{} is already registered", name, arity));
        }
        self.ext_index.insert(key, self.externals.len());
        self.externals.push(ExternalPred { name, arity, eval });
        Ok(())
    }

    pub fn describe_clause_ref(&self, index: usize) -> String {
        if let Some(c) = self.clauses.get(index) {
            format!("clause {}: {}", index, c)
        } else if let Some(e) = self.external_by_ref(index) {
            format!("external {}/{}", e.name, e.arity)
        } else {
            format!("clause {} (out of range)", index)
        }
    }

    pub fn max_var_id(&self) -> Option<VarId> {
        self.clauses
            .iter()
            .flat_map(|c| c.terms())
            .filter_map(Term::max_var_id)
            .max()
    }

    /// Structural equality of the clause lists up to variable renaming
    /// (separately parsed programs never share variable ids).
    pub fn same_clauses(&self, other: &Program) -> bool {
        self.clauses.len() == other.clauses.len()
            && self.clauses.iter().zip(&other.clauses).all(|(a, b)| {
                let ta: Vec<Term> = a.terms().cloned().collect();
                let tb: Vec<Term> = b.terms().cloned().collect();
                crate::subst::canonical_key(&ta) == crate::subst::canonical_key(&tb)
            })
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.clauses {
            writeln!(f, "{}", c)?;
        }
        Ok(())
    }
}

/// Renders a goal list the way it appears in a query: comma-separated.
pub fn render_goals(goals: &[Term]) -> String {
    goals
        .iter()
        .map(Term::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}
