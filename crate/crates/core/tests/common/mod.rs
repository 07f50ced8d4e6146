//! Shared test support: independent reference implementations (a brute-force
//! unifier, an exhaustive resolution enumerator, a second arithmetic
//! evaluator, an AST enumerator) and the program corpus. Everything here is
//! deliberately written against the term representation only, not the
//! engine's unification or search code, so it can serve as an oracle for
//! them.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use nsts_core::{
    canonical_key, parse_query, BinOp, GrammarConfig, IoExample, Program, Term, Var, VarGen, VarId,
};

// ---------------------------------------------------------------------------
// Reference unification: sequential elimination with explicit binding-order
// branching and a fixpoint-based apply.
// ---------------------------------------------------------------------------

/// Bindings applied in sequence, each possibly mentioning variables bound
/// later; `ref_apply` iterates to a fixpoint.
pub type RefBindings = Vec<(VarId, Term)>;

fn subst_var(t: &Term, id: VarId, replacement: &Term) -> Term {
    match t {
        Term::Var(v) if v.id == id => replacement.clone(),
        Term::Var(_) | Term::Atom(_) | Term::Int(_) => t.clone(),
        Term::Compound(f, args) => Term::Compound(
            f.clone(),
            args.iter().map(|a| subst_var(a, id, replacement)).collect(),
        ),
    }
}

pub fn ref_apply(bindings: &RefBindings, t: &Term) -> Term {
    let mut cur = t.clone();
    loop {
        let next = bindings.iter().fold(cur.clone(), |acc, (id, rep)| subst_var(&acc, *id, rep));
        if next == cur {
            return next;
        }
        cur = next;
    }
}

fn ref_occurs(id: VarId, t: &Term) -> bool {
    match t {
        Term::Var(v) => v.id == id,
        Term::Atom(_) | Term::Int(_) => false,
        Term::Compound(_, args) => args.iter().any(|a| ref_occurs(id, a)),
    }
}

fn first_disagreement(a: &Term, b: &Term) -> Option<(Term, Term)> {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) if x.id == y.id => None,
        (Term::Atom(p), Term::Atom(q)) if p == q => None,
        (Term::Int(m), Term::Int(n)) if m == n => None,
        (Term::Compound(f, xs), Term::Compound(g, ys)) if f == g && xs.len() == ys.len() => {
            xs.iter().zip(ys).find_map(|(x, y)| first_disagreement(x, y))
        }
        _ => Some((a.clone(), b.clone())),
    }
}

/// Brute-force unifier: repeatedly eliminates the first disagreement pair,
/// branching over both binding orders when two variables disagree. Returns
/// any unifier found (not necessarily most general in representation).
pub fn ref_unify(t1: &Term, t2: &Term) -> Option<RefBindings> {
    fn go(a: Term, b: Term, acc: RefBindings) -> Option<RefBindings> {
        let (s, u) = match first_disagreement(&a, &b) {
            None => return Some(acc),
            Some(d) => d,
        };
        let mut candidates: Vec<(VarId, Term)> = Vec::new();
        if let Term::Var(v) = &s {
            candidates.push((v.id, u.clone()));
        }
        if let Term::Var(v) = &u {
            candidates.push((v.id, s.clone()));
        }
        for (id, rep) in candidates {
            if ref_occurs(id, &rep) {
                continue;
            }
            let a2 = subst_var(&a, id, &rep);
            let b2 = subst_var(&b, id, &rep);
            let mut acc2 = acc.clone();
            acc2.push((id, rep));
            if let Some(r) = go(a2, b2, acc2) {
                return Some(r);
            }
        }
        None
    }
    go(t1.clone(), t2.clone(), Vec::new())
}

/// One-sided matching: binds pattern-side variables only, consistently.
pub fn match_onto(pattern: &Term, target: &Term, binds: &mut HashMap<VarId, Term>) -> bool {
    match (pattern, target) {
        (Term::Var(v), t) => match binds.get(&v.id) {
            Some(existing) => existing == t,
            None => {
                binds.insert(v.id, t.clone());
                true
            }
        },
        (Term::Atom(a), Term::Atom(b)) => a == b,
        (Term::Int(a), Term::Int(b)) => a == b,
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_onto(x, y, binds))
        }
        _ => false,
    }
}

/// Checks that the reference unifier's result factors through the engine's
/// mgu on the variables of both terms: there is one delta taking every
/// `mgu(v)` to `ref(v)`.
pub fn factors_through(
    t1: &Term,
    t2: &Term,
    mgu: &nsts_core::Subst,
    reference: &RefBindings,
) -> bool {
    let mut vars = t1.vars();
    for v in t2.vars() {
        if !vars.iter().any(|u| u.id == v.id) {
            vars.push(v);
        }
    }
    let mut delta: HashMap<VarId, Term> = HashMap::new();
    vars.iter().all(|v| {
        let via_mgu = mgu.apply(&Term::Var(v.clone()));
        let via_ref = ref_apply(reference, &Term::Var(v.clone()));
        match_onto(&via_mgu, &via_ref, &mut delta)
    })
}

// ---------------------------------------------------------------------------
// Reference resolution: exhaustive breadth-first enumeration built on the
// reference unifier. Only safe on finite instances.
// ---------------------------------------------------------------------------

fn ref_rename(t: &Term, map: &mut HashMap<VarId, Var>, next: &mut VarId) -> Term {
    match t {
        Term::Var(v) => {
            let fresh = map.entry(v.id).or_insert_with(|| {
                let nv = Var::new(v.name.clone(), *next);
                *next += 1;
                nv
            });
            Term::Var(fresh.clone())
        }
        Term::Atom(_) | Term::Int(_) => t.clone(),
        Term::Compound(f, args) => {
            Term::Compound(f.clone(), args.iter().map(|a| ref_rename(a, map, next)).collect())
        }
    }
}

pub fn ref_successors(
    goal: &Term,
    program: &Program,
    next: &mut VarId,
) -> Vec<(usize, RefBindings, Vec<Term>)> {
    let key = match goal.goal_key() {
        Some(k) => k,
        None => return Vec::new(),
    };
    if let Some(ei) = program.external_for(key) {
        let ext = &program.externals()[ei];
        let args: Vec<Term> = match goal {
            Term::Compound(_, args) => args.clone(),
            _ => Vec::new(),
        };
        if args.iter().all(Term::is_ground) && (ext.eval)(&args) {
            return vec![(program.clauses().len() + ei, Vec::new(), Vec::new())];
        }
        return Vec::new();
    }
    let mut out = Vec::new();
    for &ci in program.matching_clauses(key) {
        let clause = &program.clauses()[ci];
        let mut map = HashMap::new();
        let head = ref_rename(&clause.head, &mut map, next);
        let body: Vec<Term> =
            clause.body.iter().map(|g| ref_rename(g, &mut map, next)).collect();
        if let Some(bindings) = ref_unify(goal, &head) {
            let body = body.iter().map(|g| ref_apply(&bindings, g)).collect();
            out.push((ci, bindings, body));
        }
    }
    out
}

/// Exhaustively enumerates all answers of a finite instance and returns the
/// canonical keys of the query-variable instantiations.
pub fn ref_answer_set(program: &Program, query: &str) -> HashSet<String> {
    let mut gen = VarGen::new();
    let (goals, qvars) = parse_query(query, &mut gen).expect("corpus query parses");
    let mut next: VarId = goals
        .iter()
        .filter_map(Term::max_var_id)
        .max()
        .map_or(0, |m| m + 1);
    let mut answers = HashSet::new();
    let mut frontier: Vec<(Vec<Term>, RefBindings)> = vec![(goals, Vec::new())];
    let mut steps: u64 = 0;
    while let Some((resolvent, bindings)) = frontier.pop() {
        steps += 1;
        assert!(steps < 2_000_000, "reference enumeration exceeded the safety cap");
        let Some((goal, rest)) = resolvent.split_first() else {
            let tuple: Vec<Term> =
                qvars.iter().map(|v| ref_apply(&bindings, &Term::Var(v.clone()))).collect();
            answers.insert(canonical_key(&tuple));
            continue;
        };
        for (_ci, step_bindings, body) in ref_successors(goal, program, &mut next) {
            let mut all = bindings.clone();
            all.extend(step_bindings.clone());
            let mut next_resolvent: Vec<Term> = body;
            next_resolvent.extend(rest.iter().map(|g| ref_apply(&all, g)));
            frontier.push((next_resolvent, all));
        }
    }
    answers
}

/// Counts how many goal expansions an exhaustive depth-bounded search
/// performs, using the same tree-depth cut rule as the engine: a goal
/// deeper than the bound kills its branch before being expanded.
pub fn ref_count_expansions(program: &Program, query: &str, bound: usize) -> u64 {
    let mut gen = VarGen::new();
    let (goals, _) = parse_query(query, &mut gen).expect("corpus query parses");
    let mut next: VarId = goals
        .iter()
        .filter_map(Term::max_var_id)
        .max()
        .map_or(0, |m| m + 1);
    let mut count = 0u64;
    let depth_goals: Vec<(Term, usize)> = goals.into_iter().map(|g| (g, 1)).collect();
    let mut frontier: Vec<(Vec<(Term, usize)>, RefBindings)> = vec![(depth_goals, Vec::new())];
    while let Some((resolvent, bindings)) = frontier.pop() {
        let Some(((goal, depth), rest)) = resolvent.split_first() else {
            continue;
        };
        if *depth > bound {
            continue;
        }
        count += 1;
        for (_ci, step_bindings, body) in ref_successors(goal, program, &mut next) {
            let mut all = bindings.clone();
            all.extend(step_bindings.clone());
            let mut next_resolvent: Vec<(Term, usize)> =
                body.into_iter().map(|g| (g, depth + 1)).collect();
            next_resolvent
                .extend(rest.iter().map(|(g, d)| (ref_apply(&all, g), *d)));
            frontier.push((next_resolvent, all));
        }
    }
    count
}

/// Answer set of the engine result, canonicalized the same way as
/// [`ref_answer_set`] so the two are directly comparable.
pub fn engine_answer_set(result: &nsts_core::SolveResult) -> HashSet<String> {
    result
        .answers
        .iter()
        .map(|a| {
            let tuple: Vec<Term> = result
                .query_vars
                .iter()
                .map(|v| a.bindings.get(v.id).cloned().unwrap_or_else(|| Term::Var(v.clone())))
                .collect();
            canonical_key(&tuple)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Independent arithmetic evaluation and AST enumeration
// ---------------------------------------------------------------------------

/// Second evaluator, written directly over terms with i128 arithmetic.
pub fn ref_eval(t: &Term, env: &BTreeMap<String, i64>) -> Option<i64> {
    fn go(t: &Term, env: &BTreeMap<String, i64>) -> Option<i128> {
        match t {
            Term::Compound(f, args) if f == "var" && args.len() == 1 => match &args[0] {
                Term::Atom(name) => env.get(name).map(|v| *v as i128),
                _ => None,
            },
            Term::Compound(f, args) if f == "const" && args.len() == 1 => match &args[0] {
                Term::Int(n) => Some(*n as i128),
                _ => None,
            },
            Term::Compound(f, args) if f == "binop" && args.len() == 3 => {
                let a = go(&args[1], env)?;
                let b = go(&args[2], env)?;
                match &args[0] {
                    Term::Atom(op) if op == "add" => Some(a + b),
                    Term::Atom(op) if op == "sub" => Some(a - b),
                    Term::Atom(op) if op == "mul" => Some(a * b),
                    _ => None,
                }
            }
            _ => None,
        }
    }
    let v = go(t, env)?;
    i64::try_from(v).ok()
}

/// All ASTs of the grammar up to `max_depth`, as terms, in a deterministic
/// order (leaves first, then operators by position).
pub fn enumerate_asts(cfg: &GrammarConfig) -> Vec<Term> {
    let mut by_depth: Vec<Vec<Term>> = Vec::new();
    let mut leaves = Vec::new();
    for v in &cfg.variables {
        leaves.push(Term::compound("var", vec![Term::atom(v.clone())]));
    }
    for c in &cfg.constants {
        leaves.push(Term::compound("const", vec![Term::Int(*c)]));
    }
    by_depth.push(leaves);
    for d in 1..cfg.max_depth {
        let shallower: Vec<Term> = by_depth.iter().flatten().cloned().collect();
        let mut level = Vec::new();
        for op in &cfg.ops {
            for l in &shallower {
                for r in &shallower {
                    // only keep terms whose depth is exactly d + 1 to avoid
                    // duplicates across levels
                    let lt = ast_depth(l);
                    let rt = ast_depth(r);
                    if lt.max(rt) == d {
                        level.push(Term::compound(
                            "binop",
                            vec![Term::atom(op.name()), l.clone(), r.clone()],
                        ));
                    }
                }
            }
        }
        by_depth.push(level);
    }
    by_depth.into_iter().flatten().collect()
}

pub fn ast_depth(t: &Term) -> usize {
    match t {
        Term::Compound(f, args) if f == "binop" && args.len() == 3 => {
            1 + ast_depth(&args[1]).max(ast_depth(&args[2]))
        }
        _ => 1,
    }
}

/// All ASTs satisfying every example, by brute force.
pub fn brute_force_solutions(cfg: &GrammarConfig, examples: &[IoExample]) -> Vec<Term> {
    enumerate_asts(cfg)
        .into_iter()
        .filter(|t| examples.iter().all(|ex| ref_eval(t, &ex.env) == Some(ex.expected)))
        .collect()
}

// ---------------------------------------------------------------------------
// Random term generation (for the unification torture test)
// ---------------------------------------------------------------------------

/// Deterministic xorshift generator; good enough for structural fuzzing and
/// keeps the suite byte-reproducible.
pub struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        XorShift(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Random term over the fixed 3-functor / 3-constant / 3-variable signature
/// used by the unification agreement suite. Functor arities are 1, 2, 3.
pub fn random_term(rng: &mut XorShift, depth: usize) -> Term {
    let leaf = depth == 0 || rng.below(3) == 0;
    if leaf {
        match rng.below(2) {
            0 => Term::atom(["a", "b", "c"][rng.below(3)]),
            _ => {
                let i = rng.below(3);
                Term::var(["X", "Y", "Z"][i], i as VarId)
            }
        }
    } else {
        match rng.below(3) {
            0 => Term::compound("f", vec![random_term(rng, depth - 1)]),
            1 => Term::compound(
                "g",
                vec![random_term(rng, depth - 1), random_term(rng, depth - 1)],
            ),
            _ => Term::compound(
                "h",
                vec![
                    random_term(rng, depth - 1),
                    random_term(rng, depth - 1),
                    random_term(rng, depth - 1),
                ],
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

pub struct CorpusEntry {
    pub name: &'static str,
    pub program: Program,
    pub query: &'static str,
    /// Safe for exhaustive enumeration (the whole derivation space is
    /// finite for the query).
    pub finite: bool,
}

pub fn grammar(vars: &[&str], consts: &[i64], ops: &[BinOp], max_depth: usize) -> GrammarConfig {
    GrammarConfig {
        variables: vars.iter().map(|s| s.to_string()).collect(),
        constants: consts.to_vec(),
        ops: ops.to_vec(),
        max_depth,
    }
}

pub fn io(env_pairs: &[(&str, i64)], expected: i64) -> IoExample {
    IoExample {
        env: env_pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        expected,
    }
}

pub fn add_one_benchmark() -> (GrammarConfig, Vec<IoExample>) {
    (
        grammar(&["x"], &[0, 1], &[BinOp::Add, BinOp::Sub], 3),
        vec![io(&[("x", 0)], 1), io(&[("x", 1)], 2), io(&[("x", 2)], 3)],
    )
}

/// Target `(x + x) + 1`, depth 3.
pub fn double_plus_one_benchmark() -> (GrammarConfig, Vec<IoExample>) {
    (
        grammar(&["x"], &[0, 1], &[BinOp::Add, BinOp::Sub], 3),
        vec![io(&[("x", 0)], 1), io(&[("x", 1)], 3), io(&[("x", 2)], 5)],
    )
}

/// Target `x - (1 + 1)`, depth 3.
pub fn minus_two_benchmark() -> (GrammarConfig, Vec<IoExample>) {
    (
        grammar(&["x"], &[0, 1], &[BinOp::Add, BinOp::Sub], 3),
        vec![io(&[("x", 0)], -2), io(&[("x", 1)], -1), io(&[("x", 2)], 0)],
    )
}

pub const TYPE_INFER_SRC: &str = "\
% typing rules for a small lambda calculus with a subsumption rule,
% so inference is not syntax-directed
type(Ctx, var(X), T) :- lookup(Ctx, X, T).
type(Ctx, lam(X, B), arrow(T1, T2)) :- type(cons(bind(X, T1), Ctx), B, T2).
type(Ctx, app(F, A), T2) :- type(Ctx, F, arrow(T1, T2)), type(Ctx, A, T1).
type(Ctx, E, T2) :- typed_lit(E, T1), sub(T1, T2).
typed_lit(zero, nat).
typed_lit(truth, bool).
sub(T, T).
sub(nat, num).
lookup(cons(bind(X, T), Rest), X, T).
lookup(cons(Skip, Rest), X, T) :- lookup(Rest, X, T).
";

fn chain(n: usize) -> String {
    let mut src = String::new();
    for i in 0..n - 1 {
        src.push_str(&format!("c{} :- c{}.\n", i, i + 1));
    }
    src.push_str(&format!("c{}.\n", n - 1));
    src
}

pub fn corpus() -> Vec<CorpusEntry> {
    let p = |src: &str| Program::parse(src).expect("corpus program parses");
    let mut entries = vec![
        CorpusEntry { name: "single_fact", program: p("p(a)."), query: "p(X)", finite: true },
        CorpusEntry { name: "two_facts", program: p("p(a).\np(b)."), query: "p(X)", finite: true },
        CorpusEntry {
            name: "conjunction",
            program: p("p(a).\nq(a).\nq(b).\nr(X) :- p(X), q(X)."),
            query: "r(X)",
            finite: true,
        },
        CorpusEntry {
            name: "chain_depth_6",
            program: p(&chain(6)),
            query: "c0",
            finite: true,
        },
        CorpusEntry {
            name: "chain_depth_7",
            program: p(&chain(7)),
            query: "c0",
            finite: true,
        },
        CorpusEntry {
            name: "chain_depth_8",
            program: p(&chain(8)),
            query: "c0",
            finite: true,
        },
        CorpusEntry {
            name: "member_of_three",
            program: p("member(X, cons(X, Rest)).\nmember(X, cons(Skip, Rest)) :- member(X, Rest)."),
            query: "member(X, cons(a, cons(b, cons(c, nil))))",
            finite: true,
        },
        CorpusEntry {
            name: "append_splits",
            program: p("append(nil, Ys, Ys).\nappend(cons(H, Xs), Ys, cons(H, Zs)) :- append(Xs, Ys, Zs)."),
            query: "append(X, Y, cons(a, cons(b, nil)))",
            finite: true,
        },
        CorpusEntry {
            name: "ancestor_dag",
            program: p("parent(a, b).\nparent(b, c).\nparent(b, d).\nancestor(X, Y) :- parent(X, Y).\nancestor(X, Y) :- parent(X, Z), ancestor(Z, Y)."),
            query: "ancestor(a, X)",
            finite: true,
        },
        CorpusEntry {
            name: "reverse_two",
            program: p("rev(nil, Acc, Acc).\nrev(cons(H, T), Acc, R) :- rev(T, cons(H, Acc), R)."),
            query: "rev(cons(a, cons(b, nil)), nil, R)",
            finite: true,
        },
        CorpusEntry {
            name: "peano_add",
            program: p("add(zero, Y, Y).\nadd(s(X), Y, s(Z)) :- add(X, Y, Z)."),
            query: "add(s(zero), s(zero), X)",
            finite: true,
        },
        CorpusEntry {
            name: "peano_le",
            program: p("le(zero, Y).\nle(s(X), s(Y)) :- le(X, Y)."),
            query: "le(X, s(s(zero)))",
            finite: true,
        },
        CorpusEntry {
            name: "graph_path",
            program: p("edge(a, b).\nedge(b, c).\nedge(b, d).\npath(X, Y) :- edge(X, Y).\npath(X, Y) :- edge(X, Z), path(Z, Y)."),
            query: "path(a, X)",
            finite: true,
        },
        CorpusEntry {
            name: "fig_term_fragment",
            program: p("term(var(X)) :- is_var(X).\nterm(const(X)) :- is_const(X).\nterm(binop(Op, T1, T2)) :- op(Op), term(T1), term(T2).\nis_var(x).\nis_const(1).\nop(add)."),
            query: "term(binop(add, var(x), const(1)))",
            finite: true,
        },
        CorpusEntry {
            name: "unsat_no_clause",
            program: p("p(a)."),
            query: "q(X)",
            finite: true,
        },
        CorpusEntry {
            name: "unsat_finite_body",
            program: p("r :- p(b).\np(a)."),
            query: "r",
            finite: true,
        },
        CorpusEntry {
            name: "diamond_dedup",
            program: p("p(X) :- q(X).\np(X) :- r(X).\nq(a).\nr(a)."),
            query: "p(X)",
            finite: true,
        },
        CorpusEntry {
            name: "occurs_trap",
            program: p("p(X, f(X))."),
            query: "p(Y, Y)",
            finite: true,
        },
        CorpusEntry {
            name: "type_infer_identity",
            program: p(TYPE_INFER_SRC),
            query: "type(nil, lam(x, var(x)), T)",
            finite: true,
        },
        CorpusEntry {
            name: "type_infer_apply",
            program: p(TYPE_INFER_SRC),
            query: "type(nil, app(lam(x, var(x)), lam(y, var(y))), T)",
            finite: true,
        },
        CorpusEntry {
            name: "type_infer_subsumption",
            program: p(TYPE_INFER_SRC),
            query: "type(nil, zero, num)",
            finite: true,
        },
    ];
    // synthesis instances, including the flagship grammar encoding
    let synth = [
        ("synth_add_one", add_one_benchmark()),
        ("synth_double_plus_one", double_plus_one_benchmark()),
        ("synth_minus_two", minus_two_benchmark()),
        ("synth_identity", (grammar(&["x"], &[0, 1], &[BinOp::Add], 2), vec![io(&[("x", 0)], 0), io(&[("x", 1)], 1)])),
        ("synth_const_seven", (grammar(&["x"], &[0, 7], &[BinOp::Add], 2), vec![io(&[("x", 0)], 7), io(&[("x", 1)], 7)])),
    ];
    for (name, (cfg, examples)) in synth {
        entries.push(CorpusEntry {
            name,
            program: nsts_core::make_synthesis_program(&cfg, &examples)
                .expect("synthesis corpus builds"),
            query: "solution(X)",
            finite: true,
        });
    }
    entries
}

// ---------------------------------------------------------------------------
// Minimal HTTP stub server for oracle fixture tests
// ---------------------------------------------------------------------------

#[allow(unused_imports)]
pub use httpstub::{stub_server, Canned};

mod httpstub {
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    /// One canned HTTP exchange: status line + body.
    pub struct Canned {
        pub status: &'static str,
        pub body: String,
    }

    /// Minimal blocking HTTP stub: accepts one connection per canned reply,
    /// consumes the request, answers, closes. Returns the endpoint URL and a
    /// counter of requests served.
    pub fn stub_server(replies: Vec<Canned>) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let hits_inner = hits.clone();
        let handle = std::thread::spawn(move || {
            for reply in replies {
                let (mut stream, _) = match listener.accept() {
                    Ok(s) => s,
                    Err(_) => return,
                };
                hits_inner.fetch_add(1, Ordering::SeqCst);
                // read headers, then exactly content-length body bytes
                let mut buf = Vec::new();
                let mut byte = [0u8; 1];
                while !buf.ends_with(b"\r\n\r\n") {
                    match stream.read(&mut byte) {
                        Ok(1) => buf.push(byte[0]),
                        _ => break,
                    }
                }
                let headers = String::from_utf8_lossy(&buf).to_string();
                let content_length: usize = headers
                    .lines()
                    .find_map(|l| {
                        let (name, value) = l.split_once(':')?;
                        name.eq_ignore_ascii_case("content-length")
                            .then(|| value.trim().parse().ok())?
                    })
                    .unwrap_or(0);
                let mut body = vec![0u8; content_length];
                if content_length > 0 {
                    let _ = stream.read_exact(&mut body);
                }
                let response = format!(
                    "HTTP/1.1 {}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    reply.status,
                    reply.body.len(),
                    reply.body
                );
                let _ = stream.write_all(response.as_bytes());
            }
        });
        (format!("http://{}", addr), hits, handle)
    }
}
