//! Substitutions, unification, and renaming.
//!
//! Substitutions are kept idempotent at all times: when a binding is added,
//! the bound term is first resolved against the current substitution and the
//! new binding is folded into every existing binding. Applying an idempotent
//! substitution is therefore a single structural pass.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::term::{Clause, Term, Var, VarGen, VarId};

/// An idempotent, occurs-checked substitution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subst {
    bindings: BTreeMap<VarId, Term>,
}

impl Subst {
    pub fn new() -> Self {
        Subst::default()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, id: VarId) -> Option<&Term> {
        self.bindings.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &Term)> {
        self.bindings.iter().map(|(k, v)| (*k, v))
    }

    /// Applies the substitution. Because bindings never mention domain
    /// variables, one pass reaches the fixpoint.
    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        match t {
            Term::Var(v) => self.bindings.get(&v.id).cloned().unwrap_or_else(|| t.clone()),
            Term::Atom(_) | Term::Int(_) => t.clone(),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| self.apply(a)).collect())
            }
        }
    }

    /// Extends with `v -> t`, keeping idempotence. Returns `None` when the
    /// occurs check fails (if enabled). Binding a variable to itself is a
    /// no-op.
    fn extended_impl(&self, v: &Var, t: &Term, occurs_check: bool) -> Option<Subst> {
        let resolved = self.apply(t);
        if let Term::Var(u) = &resolved {
            if u.id == v.id {
                return Some(self.clone());
            }
        }
        if occurs_check && occurs(v.id, &resolved) {
            return None;
        }
        let mut bindings = self.bindings.clone();
        for bound in bindings.values_mut() {
            if occurs(v.id, bound) {
                *bound = substitute_one(bound, v.id, &resolved);
            }
        }
        bindings.insert(v.id, resolved);
        Some(Subst { bindings })
    }

    /// Resolves a variable head against the bindings. Because bindings are
    /// idempotent, one step fully resolves the head; arguments inside a
    /// returned compound are resolved lazily by the callers that walk them.
    fn walk<'t>(&'t self, t: &'t Term) -> &'t Term {
        match t {
            Term::Var(v) => self.bindings.get(&v.id).unwrap_or(t),
            _ => t,
        }
    }

    pub fn extended(&self, v: &Var, t: &Term) -> Option<Subst> {
        self.extended_impl(v, t, true)
    }

    /// Restriction to the given variables (the answer-substitution view).
    pub fn restricted(&self, vars: &[Var]) -> Subst {
        let bindings = vars
            .iter()
            .filter_map(|v| self.bindings.get(&v.id).map(|t| (v.id, t.clone())))
            .collect();
        Subst { bindings }
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (id, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "_{} -> {}", id, t)?;
        }
        write!(f, "}}")
    }
}

fn occurs(id: VarId, t: &Term) -> bool {
    match t {
        Term::Var(v) => v.id == id,
        Term::Atom(_) | Term::Int(_) => false,
        Term::Compound(_, args) => args.iter().any(|a| occurs(id, a)),
    }
}

fn substitute_one(t: &Term, id: VarId, replacement: &Term) -> Term {
    match t {
        Term::Var(v) if v.id == id => replacement.clone(),
        Term::Var(_) | Term::Atom(_) | Term::Int(_) => t.clone(),
        Term::Compound(f, args) => Term::Compound(
            f.clone(),
            args.iter().map(|a| substitute_one(a, id, replacement)).collect(),
        ),
    }
}

/// Most general unifier of `t1` and `t2` extending `s`. `None` means the
/// terms do not unify; the input substitution is never mutated.
pub fn unify(t1: &Term, t2: &Term, s: &Subst) -> Option<Subst> {
    unify_with(t1, t2, s, true)
}

/// Like [`unify`] but with the occurs check optionally disabled. The check
/// is on by default everywhere in the engine; disabling it trades soundness
/// for speed and is exposed for experiments only.
pub fn unify_with(t1: &Term, t2: &Term, s: &Subst, occurs_check: bool) -> Option<Subst> {
    // variable heads are resolved lazily; extended_impl applies the current
    // bindings to whatever gets bound, which preserves idempotence
    let a = s.walk(t1).clone();
    let b = s.walk(t2).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x.id == y.id => Some(s.clone()),
        (Term::Var(x), _) => s.extended_impl(x, &b, occurs_check),
        (_, Term::Var(y)) => s.extended_impl(y, &a, occurs_check),
        (Term::Atom(p), Term::Atom(q)) => (p == q).then(|| s.clone()),
        (Term::Int(m), Term::Int(n)) => (m == n).then(|| s.clone()),
        (Term::Compound(f, xs), Term::Compound(g, ys)) if f == g && xs.len() == ys.len() => {
            let mut acc = s.clone();
            for (x, y) in xs.iter().zip(ys) {
                acc = unify_with(x, y, &acc, occurs_check)?;
            }
            Some(acc)
        }
        _ => None,
    }
}

/// A structurally identical clause whose variables all carry fresh ids.
/// Sharing within the clause is preserved; the original is untouched.
pub fn rename_apart(c: &Clause, gen: &mut VarGen) -> Clause {
    let mut map: HashMap<VarId, Var> = HashMap::new();
    let head = rename_term(&c.head, &mut map, gen);
    let body = c.body.iter().map(|g| rename_term(g, &mut map, gen)).collect();
    Clause::new(head, body)
}

pub fn rename_term(t: &Term, map: &mut HashMap<VarId, Var>, gen: &mut VarGen) -> Term {
    match t {
        Term::Var(v) => {
            let fresh = map.entry(v.id).or_insert_with(|| gen.fresh(&v.name));
            Term::Var(fresh.clone())
        }
        Term::Atom(_) | Term::Int(_) => t.clone(),
        Term::Compound(f, args) => Term::Compound(
            f.clone(),
            args.iter().map(|a| rename_term(a, map, gen)).collect(),
        ),
    }
}

/// Canonical rendering of a term tuple with variables renumbered in
/// first-occurrence order across the whole tuple. Two tuples are equal up to
/// variable renaming iff their canonical keys are equal.
pub fn canonical_key(terms: &[Term]) -> String {
    let mut numbering: HashMap<VarId, usize> = HashMap::new();
    let mut out = String::new();
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        canonical_into(t, &mut numbering, &mut out);
    }
    out
}

fn canonical_into(t: &Term, numbering: &mut HashMap<VarId, usize>, out: &mut String) {
    match t {
        Term::Var(v) => {
            let next = numbering.len();
            let n = *numbering.entry(v.id).or_insert(next);
            out.push_str(&format!("_{}", n));
        }
        Term::Atom(a) => out.push_str(a),
        Term::Int(n) => out.push_str(&n.to_string()),
        Term::Compound(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_into(a, numbering, out);
            }
            out.push(')');
        }
    }
}
