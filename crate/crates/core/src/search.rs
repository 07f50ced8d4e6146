//! Fair, guess-biased exploration of the derivation space.
//!
//! The default strategy is iterative deepening on derivation-tree depth:
//! each level runs a depth-first pass that refuses to resolve goals deeper
//! than the bound, and the bound grows until an answer set, an exhausted
//! space, or a budget ends the run. Every finite derivation is therefore
//! explored eventually, with any oracle — the guess only reorders clause
//! choice (never prunes), so answers are oracle-independent.
//!
//! Refutations of the current guess are detected during exploration: a
//! guessed node whose goal has no applicable clause, whose cited clause
//! cannot fire (head mismatch), or whose subtree failed within the current
//! depth bound (a soft refutation). Each one is fed back as a counterexample
//! and buys one oracle re-guess while the call budget lasts; a fresh guess
//! restarts the current level so the new bias applies from the root.
//!
//! `run_sequential_baseline` is the contrasting architecture: a pure
//! propose/check loop with no symbolic search, which makes no progress when
//! the oracle keeps hallucinating.

use std::collections::{HashSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::derivation::{
    check_derivation, resolutions, verify_derivation, DerivationError, DerivationTree,
    SymbolicState, Transition,
};
use crate::intuition::{DualState, TextIntuition, DEFAULT_INTUITION_BUDGET};
use crate::oracle::{
    init_intuition, update_guess, Contradiction, ContradictionReason, Guess, IntuitionOracle,
    OracleReport, PromptTemplates,
};
use crate::parse::{parse_query, ParseError};
use crate::subst::{canonical_key, Subst};
use crate::term::{Clause, Program, Term, Var, VarGen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    IterativeDeepening,
    BreadthFirst,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub strategy: Strategy,
    /// First depth bound of iterative deepening.
    pub depth_start: usize,
    /// Bound increment between levels.
    pub depth_step: usize,
    /// Stop after this many node expansions.
    pub node_budget: Option<u64>,
    /// Total oracle calls allowed (the init guess counts). When spent, the
    /// search continues unguided.
    pub oracle_call_budget: Option<u32>,
    /// Stop after this many answers; `usize::MAX` collects the whole set.
    pub max_answers: usize,
    /// Reserved for randomized stress modes; default runs never consume it.
    pub seed: u64,
    /// Hard cap on derivation depth. Ending with this cap still open (deeper
    /// derivations may exist) reports `DepthOpen`.
    pub depth_limit: Option<usize>,
    pub collect_trace: bool,
    pub intuition_budget: usize,
    /// Problem description for the init prompt's context slot.
    pub context: String,
    pub templates: PromptTemplates,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::IterativeDeepening,
            depth_start: 4,
            depth_step: 2,
            node_budget: None,
            oracle_call_budget: Some(16),
            max_answers: 1,
            seed: 0,
            depth_limit: None,
            collect_trace: false,
            intuition_budget: DEFAULT_INTUITION_BUDGET,
            context: "solve the given query".to_string(),
            templates: PromptTemplates::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.depth_start == 0 {
            return Err("depth_start must be positive".into());
        }
        if self.depth_step == 0 {
            return Err("depth_step must be positive".into());
        }
        if self.max_answers == 0 {
            return Err("max_answers must be positive".into());
        }
        if self.node_budget == Some(0) {
            return Err("node_budget must be positive when present".into());
        }
        if self.oracle_call_budget == Some(0) {
            return Err("oracle_call_budget must be positive when present".into());
        }
        Ok(())
    }

    pub fn with_all_answers(mut self) -> Self {
        self.max_answers = usize::MAX;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Solved,
    ExhaustedFiniteSpace,
    BudgetExceeded,
    DepthOpen,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Solved => "solved",
            SolveStatus::ExhaustedFiniteSpace => "exhausted_finite_space",
            SolveStatus::BudgetExceeded => "budget_exceeded",
            SolveStatus::DepthOpen => "depth_open",
        };
        write!(f, "{}", s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub nodes_expanded: u64,
    pub transitions_taken: u64,
    pub oracle_calls: u32,
    pub refutations: u32,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Answer {
    pub bindings: Subst,
    pub derivation: DerivationTree,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Expand { depth: usize, goal: String, successors: usize },
    Step { clause: usize },
    Conclude { atom: String },
    Refute { path: Vec<usize>, reason: ContradictionReason },
    Guess { number: u32 },
    Answer { bindings: String },
    Note { text: String },
}

impl std::fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceEvent::Expand { depth, goal, successors } => {
                write!(f, "EXPAND {} {} {}", depth, goal, successors)
            }
            TraceEvent::Step { clause } => write!(f, "STEP {}", clause),
            TraceEvent::Conclude { atom } => write!(f, "CONCLUDE {}", atom),
            TraceEvent::Refute { path, reason } => {
                let path_text = path
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(",");
                write!(f, "REFUTE [{}] {}", path_text, reason)
            }
            TraceEvent::Guess { number } => write!(f, "GUESS {}", number),
            TraceEvent::Answer { bindings } => write!(f, "ANSWER {}", bindings),
            TraceEvent::Note { text } => write!(f, "NOTE {}", text),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub answers: Vec<Answer>,
    pub status: SolveStatus,
    pub stats: Stats,
    pub trace: Option<Vec<TraceEvent>>,
    pub query_vars: Vec<Var>,
    /// The intuition accumulated over the run, ready for `summarize`.
    pub intuition: TextIntuition,
}

/// The stable stats schema consumed by the CLI and test harnesses.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct StatsJson {
    pub status: String,
    pub answers: Vec<String>,
    pub nodes_expanded: u64,
    pub transitions: u64,
    pub oracle_calls: u32,
    pub refutations: u32,
    pub wall_ms: u64,
}

impl SolveResult {
    pub fn stats_json_value(&self) -> StatsJson {
        StatsJson {
            status: self.status.to_string(),
            answers: self.answers.iter().map(|a| a.rendered.clone()).collect(),
            nodes_expanded: self.stats.nodes_expanded,
            transitions: self.stats.transitions_taken,
            oracle_calls: self.stats.oracle_calls,
            refutations: self.stats.refutations,
            wall_ms: self.stats.wall_time.as_millis() as u64,
        }
    }

    pub fn stats_json(&self) -> String {
        serde_json::to_string(&self.stats_json_value()).expect("stats serialize")
    }

    /// Answer lines, one per answer, in discovery order.
    pub fn answers_text(&self) -> String {
        self.answers.iter().map(|a| a.rendered.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("query does not parse: {0}")]
    Query(#[from] ParseError),
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("query must contain at least one goal")]
    EmptyQuery,
}

pub fn render_answer(bindings: &Subst, query_vars: &[Var]) -> String {
    let parts: Vec<String> = query_vars
        .iter()
        .filter_map(|v| bindings.get(v.id).map(|t| format!("{} = {}", v.name, t)))
        .collect();
    if parts.is_empty() {
        "true".to_string()
    } else {
        parts.join(", ")
    }
}

// ---------------------------------------------------------------------------
// Guess biasing and refutation detection
// ---------------------------------------------------------------------------

/// Stable reorder of expansion successors: those whose clause matches the
/// guessed derivation node at `path` come first; everything else keeps
/// program order. Without a guessed derivation (or past its leaves) the
/// order is unchanged.
pub fn bias_order(
    succs: Vec<(Transition, SymbolicState)>,
    guess: &Guess,
    path: &[usize],
) -> Vec<(Transition, SymbolicState)> {
    let guessed = guess.derivation.as_ref().and_then(|d| d.node_at(path)).map(|n| n.clause_index);
    let clause_indices: Vec<usize> = succs.iter().map(|(t, _)| t.clause_index).collect();
    let perm = bias_permutation(&clause_indices, guessed);
    let mut slots: Vec<Option<(Transition, SymbolicState)>> = succs.into_iter().map(Some).collect();
    perm.into_iter().map(|i| slots[i].take().expect("permutation is a bijection")).collect()
}

pub(crate) fn bias_permutation(clause_indices: &[usize], guessed: Option<usize>) -> Vec<usize> {
    let Some(g) = guessed else {
        return (0..clause_indices.len()).collect();
    };
    let mut order = Vec::with_capacity(clause_indices.len());
    order.extend(clause_indices.iter().enumerate().filter(|(_, &c)| c == g).map(|(i, _)| i));
    order.extend(clause_indices.iter().enumerate().filter(|(_, &c)| c != g).map(|(i, _)| i));
    order
}

/// What the engine observed at a node that sits on the guessed derivation.
#[derive(Debug, Clone)]
pub enum SearchEvent<'a> {
    /// The goal at `path` was expanded; `successor_clauses` are the clause
    /// references that actually fired, in program order.
    Expanded { path: &'a [usize], goal: &'a Term, successor_clauses: &'a [usize] },
    /// The goal at `path` was cut by the current depth bound.
    DepthCut { path: &'a [usize], goal: &'a Term },
}

/// Checks a search event against the guessed derivation. Returns the
/// contradiction it demonstrates, if any: no applicable clause at a guessed
/// node, the guessed clause unable to fire there, or (on a depth cut) the
/// guessed subtree exhausted under the current bound — a soft refutation
/// that triggers re-guessing but never prunes re-exploration at higher
/// bounds.
pub fn detect_refutation(guess: &Guess, event: &SearchEvent<'_>) -> Option<Contradiction> {
    let derivation = guess.derivation.as_ref()?;
    match event {
        SearchEvent::Expanded { path, goal, successor_clauses } => {
            let node = derivation.node_at(path)?;
            if successor_clauses.is_empty() {
                Some(Contradiction {
                    refuted_node: path.to_vec(),
                    goal: (*goal).clone(),
                    reason: ContradictionReason::NoApplicableClause,
                })
            } else if !successor_clauses.contains(&node.clause_index) {
                Some(Contradiction {
                    refuted_node: path.to_vec(),
                    goal: (*goal).clone(),
                    reason: ContradictionReason::ClauseHeadMismatch,
                })
            } else {
                None
            }
        }
        SearchEvent::DepthCut { path, goal } => {
            derivation.node_at(path)?;
            Some(Contradiction {
                refuted_node: path.to_vec(),
                goal: (*goal).clone(),
                reason: ContradictionReason::ExhaustedUnderBound,
            })
        }
    }
}

/// Records a contradiction in the dual state's intuition and asks the oracle
/// for an updated guess carrying the accumulated novel conclusions.
#[allow(clippy::too_many_arguments)]
pub fn on_refutation(
    mut state: DualState,
    c: &Contradiction,
    oracle: &mut dyn IntuitionOracle,
    templates: &PromptTemplates,
    query_text: &str,
    query_vars: &[Var],
    pending_conclusions: Vec<Term>,
    gen: &mut VarGen,
) -> (DualState, Guess) {
    state.record_contradiction(c);
    let report =
        OracleReport { new_conclusions: pending_conclusions, contradictions: vec![c.clone()] };
    let guess = update_guess(
        &mut state.intuition,
        &report,
        oracle,
        templates,
        query_text,
        query_vars,
        gen,
    );
    (state, guess)
}

// ---------------------------------------------------------------------------
// The engine
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Entry {
    Goal { term: Term, tree_depth: usize, guess_path: Option<Vec<usize>>, epoch: usize, node: usize },
    /// Marker placed behind a goal's body: reaching it means the goal's
    /// subproof is complete, which is when the conclusion is recorded.
    Conclude { node: usize },
}

/// Persistent stack of pending entries. Branches share their common tail,
/// so descending into a successor costs the body length, not the resolvent
/// length.
type EntryStack = Option<std::rc::Rc<EntryNode>>;

#[derive(Debug)]
struct EntryNode {
    head: Entry,
    tail: EntryStack,
}

fn push_entry(stack: EntryStack, entry: Entry) -> EntryStack {
    Some(std::rc::Rc::new(EntryNode { head: entry, tail: stack }))
}

fn push_entries(stack: EntryStack, entries: impl DoubleEndedIterator<Item = Entry>) -> EntryStack {
    let mut out = stack;
    for e in entries.rev() {
        out = push_entry(out, e);
    }
    out
}

#[derive(Debug, Clone)]
struct ProofNode {
    goal: Term,
    clause_index: usize,
    children: Vec<usize>,
}

fn materialize(arena: &[ProofNode], node: usize, subst: &Subst) -> DerivationTree {
    let pn = &arena[node];
    DerivationTree {
        goal: subst.apply(&pn.goal),
        clause_index: pn.clause_index,
        children: pn.children.iter().map(|&c| materialize(arena, c, subst)).collect(),
    }
}

enum Flow {
    Continue,
    Stop(StopKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StopKind {
    Done,
    Budget,
    Restart,
}

enum LevelEnd {
    Completed { cut_seen: bool },
    Stopped(StopKind),
}

struct Engine<'a> {
    program: &'a Program,
    root_goal: Term,
    query_vars: Vec<Var>,
    query_text: String,
    oracle: &'a mut dyn IntuitionOracle,
    cfg: &'a SearchConfig,
    gen: VarGen,
    intuition: TextIntuition,
    guess: Option<Guess>,
    guess_epoch: usize,
    refuted: HashSet<Vec<usize>>,
    pending_conclusions: Vec<Term>,
    stats: Stats,
    trace: Option<Vec<TraceEvent>>,
    answers: Vec<Answer>,
    answer_keys: HashSet<String>,
    arena: Vec<ProofNode>,
    level_cut: bool,
    limit_cut: bool,
    /// Guess-path mapping only makes sense when the oracle saw the goal the
    /// engine starts from (single-goal queries).
    biasing_enabled: bool,
}

impl<'a> Engine<'a> {
    fn trace(&mut self, ev: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(ev);
        }
    }

    fn guessed_clause_at(&self, path: &[usize]) -> Option<usize> {
        self.guess
            .as_ref()
            .and_then(|g| g.derivation.as_ref())
            .and_then(|d| d.node_at(path))
            .map(|n| n.clause_index)
    }

    /// The entry's guess path, if it still addresses the installed guess.
    fn active_path(&self, guess_path: &Option<Vec<usize>>, epoch: usize) -> Option<Vec<usize>> {
        let path = guess_path.as_ref()?;
        if epoch != self.guess_epoch || self.refuted.contains(path) {
            return None;
        }
        self.guess.as_ref()?.derivation.as_ref()?;
        Some(path.clone())
    }

    fn install_guess(&mut self, guess: Guess) {
        let ok = self.biasing_enabled
            && guess
                .derivation
                .as_ref()
                .map(|d| d.is_well_formed(self.program))
                .unwrap_or(false);
        if ok {
            self.guess = Some(guess);
            self.guess_epoch += 1;
            self.refuted.clear();
        } else {
            if guess.derivation.is_some() {
                self.trace(TraceEvent::Note {
                    text: "guessed derivation is malformed; ignoring it".to_string(),
                });
            }
            self.guess = None;
        }
    }

    fn clear_guess(&mut self) {
        self.guess = None;
    }

    fn oracle_budget_left(&self) -> bool {
        match self.cfg.oracle_call_budget {
            Some(b) => self.stats.oracle_calls < b,
            None => true,
        }
    }

    /// Feeds a refutation back: records it, re-asks the oracle while budget
    /// lasts, installs a genuinely new guess (requesting a level restart so
    /// the fresh bias applies from the root), or degrades to unguided.
    fn handle_refutation(&mut self, c: Contradiction) -> Flow {
        self.stats.refutations += 1;
        self.trace(TraceEvent::Refute { path: c.refuted_node.clone(), reason: c.reason });
        self.intuition.record_contradiction(&c);
        self.refuted.insert(c.refuted_node.clone());
        if !self.oracle_budget_left() {
            self.trace(TraceEvent::Note {
                text: "oracle call budget exhausted; continuing unguided".to_string(),
            });
            self.clear_guess();
            return Flow::Continue;
        }
        let report = OracleReport {
            new_conclusions: std::mem::take(&mut self.pending_conclusions),
            contradictions: vec![c],
        };
        let next = update_guess(
            &mut self.intuition,
            &report,
            self.oracle,
            &self.cfg.templates,
            &self.query_text,
            &self.query_vars,
            &mut self.gen,
        );
        self.stats.oracle_calls += 1;
        self.trace(TraceEvent::Guess { number: self.stats.oracle_calls });
        let current_raw = self.guess.as_ref().map(|g| g.raw.clone());
        if next.is_no_guess() {
            self.clear_guess();
            Flow::Continue
        } else if next.derivation.is_some() && Some(&next.raw) != current_raw.as_ref() {
            let had_derivation_bias = self.guess.is_some();
            self.install_guess(next);
            if self.guess.is_some() && matches!(self.cfg.strategy, Strategy::IterativeDeepening) {
                Flow::Stop(StopKind::Restart)
            } else {
                let _ = had_derivation_bias;
                Flow::Continue
            }
        } else if next.derivation.is_none() {
            // the oracle replaced its guess with a derivation-less one:
            // nothing left to bias with
            self.clear_guess();
            Flow::Continue
        } else {
            // byte-identical guess: keep it, no restart
            Flow::Continue
        }
    }

    fn conclude_node(&mut self, pn: &ProofNode, subst: &Subst) {
        let instance = subst.apply(&pn.goal);
        let detail = format!(
            "derived {} via {}",
            instance,
            self.program.describe_clause_ref(pn.clause_index)
        );
        if self.intuition.record_conclusion(&instance, detail) {
            self.pending_conclusions.push(instance.clone());
            self.trace(TraceEvent::Conclude { atom: instance.to_string() });
        }
    }

    fn accept_answer(&mut self, tree: DerivationTree, subst: &Subst) -> Flow {
        let restricted = subst.restricted(&self.query_vars);
        let tuple: Vec<Term> = self
            .query_vars
            .iter()
            .map(|v| restricted.get(v.id).cloned().unwrap_or_else(|| Term::Var(v.clone())))
            .collect();
        let key = canonical_key(&tuple);
        if self.answer_keys.insert(key) {
            // soundness gate: nothing leaves the engine unchecked
            if check_derivation(self.program, &self.root_goal, &tree) {
                let rendered = render_answer(&restricted, &self.query_vars);
                self.trace(TraceEvent::Answer { bindings: rendered.clone() });
                self.answers.push(Answer { bindings: restricted, derivation: tree, rendered });
            } else {
                debug_assert!(false, "engine produced an uncheckable derivation");
                self.trace(TraceEvent::Note {
                    text: "answer failed the derivation check; discarded".to_string(),
                });
            }
        }
        if self.answers.len() >= self.cfg.max_answers {
            Flow::Stop(StopKind::Done)
        } else {
            Flow::Continue
        }
    }

    fn dfs(&mut self, entries: EntryStack, subst: Subst, bound: usize) -> Flow {
        let Some(top) = entries else {
            let tree = materialize(&self.arena, 0, &subst);
            return self.accept_answer(tree, &subst);
        };
        let rest = top.tail.clone();
        match &top.head {
            Entry::Conclude { node } => {
                let pn = self.arena[*node].clone();
                self.conclude_node(&pn, &subst);
                self.dfs(rest, subst, bound)
            }
            Entry::Goal { term, tree_depth, guess_path, epoch, node } => {
                let (term, tree_depth, node) = (term.clone(), *tree_depth, *node);
                let active = self.active_path(guess_path, *epoch);
                if tree_depth > bound {
                    self.level_cut = true;
                    if let Some(path) = &active {
                        let goal = subst.apply(&term);
                        let ev = SearchEvent::DepthCut { path, goal: &goal };
                        let guess = self.guess.as_ref().expect("active path implies a guess");
                        if let Some(c) = detect_refutation(guess, &ev) {
                            return self.handle_refutation(c);
                        }
                    }
                    return Flow::Continue;
                }
                if let Some(nb) = self.cfg.node_budget {
                    if self.stats.nodes_expanded >= nb {
                        return Flow::Stop(StopKind::Budget);
                    }
                }
                let goal = subst.apply(&term);
                let rs = resolutions(&goal, &subst, self.program, &mut self.gen);
                self.stats.nodes_expanded += 1;
                self.trace(TraceEvent::Expand {
                    depth: tree_depth,
                    goal: goal.to_string(),
                    successors: rs.len(),
                });
                if let Some(path) = &active {
                    let clause_list: Vec<usize> = rs.iter().map(|r| r.clause_index).collect();
                    let ev = SearchEvent::Expanded {
                        path,
                        goal: &goal,
                        successor_clauses: &clause_list,
                    };
                    let guess = self.guess.as_ref().expect("active path implies a guess");
                    if let Some(c) = detect_refutation(guess, &ev) {
                        match self.handle_refutation(c) {
                            Flow::Continue => {}
                            stop => return stop,
                        }
                    }
                }
                // re-read the guess state: a refutation above may have
                // changed it without a restart
                let active = self.active_path(guess_path, *epoch);
                let guessed = active.as_deref().and_then(|p| self.guessed_clause_at(p));
                let clause_list: Vec<usize> = rs.iter().map(|r| r.clause_index).collect();
                let order = bias_permutation(&clause_list, guessed);
                for i in order {
                    let r = &rs[i];
                    self.stats.transitions_taken += 1;
                    self.trace(TraceEvent::Step { clause: r.clause_index });
                    let on_guess_branch = guessed == Some(r.clause_index);
                    let child_nodes: Vec<usize> = r
                        .body
                        .iter()
                        .map(|g| {
                            self.arena.push(ProofNode {
                                goal: g.clone(),
                                clause_index: usize::MAX,
                                children: Vec::new(),
                            });
                            self.arena.len() - 1
                        })
                        .collect();
                    self.arena[node] = ProofNode {
                        goal: r.subst.apply(&goal),
                        clause_index: r.clause_index,
                        children: child_nodes.clone(),
                    };
                    let body_entries = r.body.iter().enumerate().map(|(j, g)| {
                        let child_path = match (&active, on_guess_branch) {
                            (Some(p), true) => {
                                let mut cp = p.clone();
                                cp.push(j);
                                Some(cp)
                            }
                            _ => None,
                        };
                        Entry::Goal {
                            term: g.clone(),
                            tree_depth: tree_depth + 1,
                            guess_path: child_path,
                            epoch: self.guess_epoch,
                            node: child_nodes[j],
                        }
                    });
                    let next_entries = push_entries(
                        push_entry(rest.clone(), Entry::Conclude { node }),
                        body_entries.collect::<Vec<_>>().into_iter(),
                    );
                    match self.dfs(next_entries, r.subst.clone(), bound) {
                        Flow::Continue => {}
                        stop => return stop,
                    }
                }
                Flow::Continue
            }
        }
    }

    fn initial_entries(&mut self) -> EntryStack {
        self.arena.clear();
        self.arena.push(ProofNode {
            goal: self.root_goal.clone(),
            clause_index: usize::MAX,
            children: Vec::new(),
        });
        push_entry(
            None,
            Entry::Goal {
                term: self.root_goal.clone(),
                tree_depth: 1,
                guess_path: self.biasing_enabled.then(Vec::new),
                epoch: self.guess_epoch,
                node: 0,
            },
        )
    }

    fn run_level(&mut self, bound: usize) -> LevelEnd {
        loop {
            self.level_cut = false;
            let entries = self.initial_entries();
            match self.dfs(entries, Subst::new(), bound) {
                Flow::Continue => return LevelEnd::Completed { cut_seen: self.level_cut },
                Flow::Stop(StopKind::Restart) => continue,
                Flow::Stop(stop) => return LevelEnd::Stopped(stop),
            }
        }
    }

    fn run_iterative_deepening(&mut self) -> SolveStatus {
        let mut bound = self.cfg.depth_start;
        if let Some(limit) = self.cfg.depth_limit {
            bound = bound.min(limit);
        }
        loop {
            match self.run_level(bound) {
                LevelEnd::Stopped(StopKind::Done) => return SolveStatus::Solved,
                LevelEnd::Stopped(StopKind::Budget) => {
                    return if self.answers.is_empty() {
                        SolveStatus::BudgetExceeded
                    } else {
                        SolveStatus::Solved
                    };
                }
                LevelEnd::Stopped(StopKind::Restart) => unreachable!("restarts stay in run_level"),
                LevelEnd::Completed { cut_seen } => {
                    if !cut_seen {
                        return if self.answers.is_empty() {
                            SolveStatus::ExhaustedFiniteSpace
                        } else {
                            SolveStatus::Solved
                        };
                    }
                    let next = bound + self.cfg.depth_step;
                    if let Some(limit) = self.cfg.depth_limit {
                        if next > limit {
                            return if self.answers.is_empty() {
                                SolveStatus::DepthOpen
                            } else {
                                SolveStatus::Solved
                            };
                        }
                    }
                    bound = next;
                }
            }
        }
    }

    /// Breadth-first exploration. Queued branches each carry their own copy
    /// of the proof arena: siblings overwrite the same node slots, so a
    /// shared arena would let one branch clobber another's pending proof.
    fn run_breadth_first(&mut self) -> SolveStatus {
        let entries = self.initial_entries();
        let arena = std::mem::take(&mut self.arena);
        let mut queue: VecDeque<(EntryStack, Subst, Vec<ProofNode>)> = VecDeque::new();
        queue.push_back((entries, Subst::new(), arena));
        while let Some((mut entries, subst, arena)) = queue.pop_front() {
            loop {
                let next = match entries.as_deref() {
                    Some(EntryNode { head: Entry::Conclude { node }, tail }) => {
                        let pn = arena[*node].clone();
                        self.conclude_node(&pn, &subst);
                        tail.clone()
                    }
                    _ => break,
                };
                entries = next;
            }
            let (term, tree_depth, guess_path, epoch, node, rest) = match entries.as_deref() {
                None => {
                    let tree = materialize(&arena, 0, &subst);
                    match self.accept_answer(tree, &subst) {
                        Flow::Stop(StopKind::Done) => return SolveStatus::Solved,
                        _ => continue,
                    }
                }
                Some(EntryNode {
                    head: Entry::Goal { term, tree_depth, guess_path, epoch, node },
                    tail,
                }) => (term.clone(), *tree_depth, guess_path.clone(), *epoch, *node, tail.clone()),
                Some(EntryNode { head: Entry::Conclude { .. }, .. }) => {
                    unreachable!("markers are drained above")
                }
            };
            let active = self.active_path(&guess_path, epoch);
            if let Some(limit) = self.cfg.depth_limit {
                if tree_depth > limit {
                    self.limit_cut = true;
                    if let Some(path) = &active {
                        let goal = subst.apply(&term);
                        let ev = SearchEvent::DepthCut { path, goal: &goal };
                        let guess = self.guess.as_ref().expect("active path implies a guess");
                        if let Some(c) = detect_refutation(guess, &ev) {
                            if let Flow::Stop(StopKind::Budget) = self.handle_refutation(c) {
                                return SolveStatus::BudgetExceeded;
                            }
                        }
                    }
                    continue;
                }
            }
            if let Some(nb) = self.cfg.node_budget {
                if self.stats.nodes_expanded >= nb {
                    return if self.answers.is_empty() {
                        SolveStatus::BudgetExceeded
                    } else {
                        SolveStatus::Solved
                    };
                }
            }
            let goal = subst.apply(&term);
            let rs = resolutions(&goal, &subst, self.program, &mut self.gen);
            self.stats.nodes_expanded += 1;
            self.trace(TraceEvent::Expand {
                depth: tree_depth,
                goal: goal.to_string(),
                successors: rs.len(),
            });
            if let Some(path) = &active {
                let clause_list: Vec<usize> = rs.iter().map(|r| r.clause_index).collect();
                let ev =
                    SearchEvent::Expanded { path, goal: &goal, successor_clauses: &clause_list };
                let guess = self.guess.as_ref().expect("active path implies a guess");
                if let Some(c) = detect_refutation(guess, &ev) {
                    // breadth-first has no level to restart; a fresh guess
                    // simply biases expansions from here on
                    let _ = self.handle_refutation(c);
                }
            }
            let active = self.active_path(&guess_path, epoch);
            let guessed = active.as_deref().and_then(|p| self.guessed_clause_at(p));
            let clause_list: Vec<usize> = rs.iter().map(|r| r.clause_index).collect();
            let order = bias_permutation(&clause_list, guessed);
            for i in order {
                let r = &rs[i];
                self.stats.transitions_taken += 1;
                self.trace(TraceEvent::Step { clause: r.clause_index });
                let on_guess_branch = guessed == Some(r.clause_index);
                let mut branch_arena = arena.clone();
                let child_nodes: Vec<usize> = r
                    .body
                    .iter()
                    .map(|g| {
                        branch_arena.push(ProofNode {
                            goal: g.clone(),
                            clause_index: usize::MAX,
                            children: Vec::new(),
                        });
                        branch_arena.len() - 1
                    })
                    .collect();
                branch_arena[node] = ProofNode {
                    goal: r.subst.apply(&goal),
                    clause_index: r.clause_index,
                    children: child_nodes.clone(),
                };
                let body_entries: Vec<Entry> = r
                    .body
                    .iter()
                    .enumerate()
                    .map(|(j, g)| {
                        let child_path = match (&active, on_guess_branch) {
                            (Some(p), true) => {
                                let mut cp = p.clone();
                                cp.push(j);
                                Some(cp)
                            }
                            _ => None,
                        };
                        Entry::Goal {
                            term: g.clone(),
                            tree_depth: tree_depth + 1,
                            guess_path: child_path,
                            epoch: self.guess_epoch,
                            node: child_nodes[j],
                        }
                    })
                    .collect();
                let next_entries = push_entries(
                    push_entry(rest.clone(), Entry::Conclude { node }),
                    body_entries.into_iter(),
                );
                queue.push_back((next_entries, r.subst.clone(), branch_arena));
            }
        }
        if self.answers.is_empty() {
            if self.limit_cut {
                SolveStatus::DepthOpen
            } else {
                SolveStatus::ExhaustedFiniteSpace
            }
        } else {
            SolveStatus::Solved
        }
    }
}

/// Reserved head functor for internal multi-goal wrappers.
fn wrapper_functor(program: &Program) -> String {
    let mut name = "aux_query_goal".to_string();
    loop {
        let taken = (0..=8).any(|a| {
            !program.matching_clauses((name.as_str(), a)).is_empty()
                || program.external_for((name.as_str(), a)).is_some()
        });
        if !taken {
            return name;
        }
        name.push('_');
    }
}

/// Solves `query` against `program`, guided by `oracle`.
///
/// Multi-goal queries are wrapped in an internal clause so answers carry a
/// single derivation tree; such trees cite the wrapper clause (appended past
/// the program's own clauses) at the root, and guess biasing is disabled
/// because the oracle's derivation cannot address the wrapper.
pub fn solve(
    program: &Program,
    query: &str,
    oracle: &mut dyn IntuitionOracle,
    cfg: &SearchConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate().map_err(SolveError::Config)?;
    let start = Instant::now();
    let mut gen = VarGen::new();
    let (goals, query_vars) = parse_query(query, &mut gen)?;
    if goals.is_empty() {
        return Err(SolveError::EmptyQuery);
    }

    let mut augmented;
    let (program_ref, root_goal, biasing_enabled) = if goals.len() == 1 {
        (program, goals[0].clone(), true)
    } else {
        let head = Term::compound(
            wrapper_functor(program),
            query_vars.iter().map(|v| Term::Var(v.clone())).collect(),
        );
        augmented = program.clone();
        augmented.append_clause(Clause::new(head.clone(), goals.clone()));
        (&augmented as &Program, head, false)
    };

    let (intuition, first_guess) = init_intuition(
        program_ref,
        &goals,
        &query_vars,
        &cfg.context,
        oracle,
        &cfg.templates,
        cfg.intuition_budget,
        &mut gen,
    );

    let mut engine = Engine {
        program: program_ref,
        root_goal,
        query_text: crate::term::render_goals(&goals),
        query_vars: query_vars.clone(),
        oracle,
        cfg,
        gen,
        intuition,
        guess: None,
        guess_epoch: 0,
        refuted: HashSet::new(),
        pending_conclusions: Vec::new(),
        stats: Stats { oracle_calls: 1, ..Stats::default() },
        trace: cfg.collect_trace.then(Vec::new),
        answers: Vec::new(),
        answer_keys: HashSet::new(),
        arena: Vec::new(),
        level_cut: false,
        limit_cut: false,
        biasing_enabled,
    };
    engine.trace(TraceEvent::Guess { number: 1 });
    engine.install_guess(first_guess);

    let status = match cfg.strategy {
        Strategy::IterativeDeepening => engine.run_iterative_deepening(),
        Strategy::BreadthFirst => engine.run_breadth_first(),
    };

    let mut stats = engine.stats;
    stats.wall_time = start.elapsed();
    Ok(SolveResult {
        answers: engine.answers,
        status,
        stats,
        trace: engine.trace,
        query_vars,
        intuition: engine.intuition,
    })
}

impl Program {
    /// Appends one clause, keeping the index consistent. External pseudo
    /// indices shift, so this is for whole-program setup, not for mutation
    /// mid-solve.
    pub fn append_clause(&mut self, clause: Clause) {
        let mut clauses = self.clauses().to_vec();
        clauses.push(clause);
        let externals = self.externals().to_vec();
        *self = Program::from_clauses(clauses);
        for e in externals {
            self.register_external(e.name.clone(), e.arity, e.eval)
                .expect("externals re-register after clause append");
        }
    }
}

// ---------------------------------------------------------------------------
// Sequential baseline
// ---------------------------------------------------------------------------

fn contradiction_from_error(err: &DerivationError, tree: &DerivationTree) -> Contradiction {
    let (path, reason) = match err {
        DerivationError::RootMismatch { .. } => (vec![], ContradictionReason::ClauseHeadMismatch),
        DerivationError::ClauseIndexOutOfRange { path, .. }
        | DerivationError::HeadMismatch { path, .. }
        | DerivationError::ChildCountMismatch { path, .. }
        | DerivationError::ChildGoalMismatch { path, .. } => {
            (path.clone(), ContradictionReason::ClauseHeadMismatch)
        }
        DerivationError::ExternalArity { path, .. }
        | DerivationError::ExternalCheckFailed { path, .. } => {
            (path.clone(), ContradictionReason::NoApplicableClause)
        }
    };
    let goal = tree.node_at(&path).map(|n| n.goal.clone()).unwrap_or_else(|| tree.goal.clone());
    Contradiction { refuted_node: path, goal, reason }
}

/// The pure guess-and-check loop: the oracle proposes a full solution, the
/// derivation checker verifies it, and the counterexample is fed back. No
/// symbolic search happens at all, so nothing guarantees progress — a
/// chronically wrong oracle burns the whole call budget. Exists as the
/// experimental contrast to [`solve`].
pub fn run_sequential_baseline(
    program: &Program,
    query: &str,
    oracle: &mut dyn IntuitionOracle,
    budget: u32,
    cfg: &SearchConfig,
) -> Result<SolveResult, SolveError> {
    if budget == 0 {
        return Err(SolveError::Config("baseline budget must be positive".into()));
    }
    let start = Instant::now();
    let mut gen = VarGen::new();
    let (goals, query_vars) = parse_query(query, &mut gen)?;
    if goals.is_empty() {
        return Err(SolveError::EmptyQuery);
    }
    let mut augmented;
    let (program_ref, root_goal) = if goals.len() == 1 {
        (program, goals[0].clone())
    } else {
        let head = Term::compound(
            wrapper_functor(program),
            query_vars.iter().map(|v| Term::Var(v.clone())).collect(),
        );
        augmented = program.clone();
        augmented.append_clause(Clause::new(head.clone(), goals.clone()));
        (&augmented as &Program, head)
    };

    let query_text = crate::term::render_goals(&goals);
    let mut trace = cfg.collect_trace.then(Vec::<TraceEvent>::new);
    let mut stats = Stats::default();
    let (mut intuition, mut guess) = init_intuition(
        program_ref,
        &goals,
        &query_vars,
        &cfg.context,
        oracle,
        &cfg.templates,
        cfg.intuition_budget,
        &mut gen,
    );
    stats.oracle_calls = 1;
    if let Some(t) = &mut trace {
        t.push(TraceEvent::Guess { number: 1 });
    }

    let mut answers = Vec::new();
    let status = loop {
        if guess.is_no_guess() {
            // without a proposal there is nothing to check and no way to
            // make progress
            break SolveStatus::BudgetExceeded;
        }
        let failure = match &guess.derivation {
            Some(d) => match verify_derivation(program_ref, &root_goal, d) {
                Ok(s) => {
                    let restricted = s.restricted(&query_vars);
                    let rendered = render_answer(&restricted, &query_vars);
                    if let Some(t) = &mut trace {
                        t.push(TraceEvent::Answer { bindings: rendered.clone() });
                    }
                    answers.push(Answer {
                        bindings: restricted,
                        derivation: d.clone(),
                        rendered,
                    });
                    break SolveStatus::Solved;
                }
                Err(e) => contradiction_from_error(&e, d),
            },
            None => Contradiction {
                refuted_node: vec![],
                goal: root_goal.clone(),
                reason: ContradictionReason::NoApplicableClause,
            },
        };
        stats.refutations += 1;
        if let Some(t) = &mut trace {
            t.push(TraceEvent::Refute {
                path: failure.refuted_node.clone(),
                reason: failure.reason,
            });
        }
        intuition.record_contradiction(&failure);
        if stats.oracle_calls >= budget {
            break SolveStatus::BudgetExceeded;
        }
        let report = OracleReport { new_conclusions: vec![], contradictions: vec![failure] };
        guess = update_guess(
            &mut intuition,
            &report,
            oracle,
            &cfg.templates,
            &query_text,
            &query_vars,
            &mut gen,
        );
        stats.oracle_calls += 1;
        if let Some(t) = &mut trace {
            t.push(TraceEvent::Guess { number: stats.oracle_calls });
        }
    };

    stats.wall_time = start.elapsed();
    Ok(SolveResult { answers, status, stats, trace, query_vars, intuition })
}
