//! The oracle boundary: guesses, refutation reports, prompt rendering, reply
//! parsing, and a family of deterministic mock oracles.
//!
//! An oracle proposes an answer substitution and a derivation sketch; the
//! engine only ever uses them to order exploration, so a wrong (or
//! malicious) oracle can cost time but never answers. Replies travel as
//! JSON:
//!
//! ```text
//! { "solution": { "<VarName>": "<term text>", ... } | null,
//!   "derivation": { "goal": "<term text>", "clause": <int>, "children": [...] } | null }
//! ```
//!
//! Prompt templates are plain text files with `{program}`, `{query}`,
//! `{context}`, `{conclusions}`, `{contradictions}` slots, so prompt
//! engineering never requires recompilation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::derivation::{DerivationTree, WireDerivation};
use crate::intuition::{SegmentTag, TextIntuition};
use crate::parse::parse_term_in_scope;
use crate::subst::Subst;
use crate::term::{render_goals, Program, Term, Var, VarGen};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle transport failure: {0}")]
    Transport(String),
    #[error("oracle returned HTTP status {0}")]
    Http(u16),
    #[error("oracle configuration error: {0}")]
    Config(String),
}

/// An oracle's proposal: an optional answer substitution over the query
/// variables and an optional derivation sketch. A present derivation is
/// structurally well-formed, but nothing guarantees it is valid against the
/// program — oracles may be wrong, and the engine checks everything.
#[derive(Debug, Clone)]
pub struct Guess {
    pub solution: Option<Subst>,
    pub derivation: Option<DerivationTree>,
    pub raw: String,
    pub diagnostics: Vec<String>,
}

impl Guess {
    pub fn no_guess(raw: impl Into<String>, diagnostics: Vec<String>) -> Self {
        Guess { solution: None, derivation: None, raw: raw.into(), diagnostics }
    }

    pub fn is_no_guess(&self) -> bool {
        self.solution.is_none() && self.derivation.is_none()
    }

    /// Compact description for intuition segments and traces.
    pub fn summary(&self, query_vars: &[Var]) -> String {
        if self.is_no_guess() {
            if self.diagnostics.is_empty() {
                "no guess".to_string()
            } else {
                format!("no guess ({})", self.diagnostics.join("; "))
            }
        } else {
            let mut parts = Vec::new();
            if let Some(s) = &self.solution {
                let bindings: Vec<String> = query_vars
                    .iter()
                    .filter_map(|v| s.get(v.id).map(|t| format!("{} = {}", v.name, t)))
                    .collect();
                parts.push(format!("solution {{{}}}", bindings.join(", ")));
            }
            if let Some(d) = &self.derivation {
                parts.push(format!(
                    "derivation of {} ({} nodes, depth {})",
                    d.goal,
                    d.node_count(),
                    d.depth()
                ));
            }
            format!("guessed {}", parts.join("; "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContradictionReason {
    NoApplicableClause,
    ExhaustedUnderBound,
    ClauseHeadMismatch,
}

impl fmt::Display for ContradictionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ContradictionReason::NoApplicableClause => "NoApplicableClause",
            ContradictionReason::ExhaustedUnderBound => "ExhaustedUnderBound",
            ContradictionReason::ClauseHeadMismatch => "ClauseHeadMismatch",
        };
        write!(f, "{}", s)
    }
}

/// A demonstrated failure of one node of the guessed derivation. The path
/// addresses the node by child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contradiction {
    pub refuted_node: Vec<usize>,
    pub goal: Term,
    pub reason: ContradictionReason,
}

impl fmt::Display for Contradiction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "the guessed derivation node at path {:?} for goal {} was refuted: {}",
            self.refuted_node, self.goal, self.reason_text()
        )
    }
}

impl Contradiction {
    fn reason_text(&self) -> &'static str {
        match self.reason {
            ContradictionReason::NoApplicableClause => "no program clause applies to this goal",
            ContradictionReason::ExhaustedUnderBound => {
                "every attempt failed within the current depth bound"
            }
            ContradictionReason::ClauseHeadMismatch => {
                "the cited clause's head does not unify with this goal"
            }
        }
    }
}

/// What the engine tells the oracle when it asks for an updated guess.
#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub new_conclusions: Vec<Term>,
    pub contradictions: Vec<Contradiction>,
}

impl OracleReport {
    pub fn is_empty(&self) -> bool {
        self.new_conclusions.is_empty() && self.contradictions.is_empty()
    }

    pub fn conclusions_text(&self) -> String {
        if self.new_conclusions.is_empty() {
            "(none)".to_string()
        } else {
            self.new_conclusions.iter().map(Term::to_string).collect::<Vec<_>>().join("; ")
        }
    }

    pub fn contradictions_text(&self) -> String {
        if self.contradictions.is_empty() {
            "(none)".to_string()
        } else {
            self.contradictions.iter().map(Contradiction::to_string).collect::<Vec<_>>().join("; ")
        }
    }
}

/// Everything an oracle gets for the initial guess. `rendered` is the
/// canonical prompt (init template with slots filled); the raw pieces are
/// alongside for oracles that build their own prompts.
#[derive(Debug, Clone)]
pub struct InitPrompt<'a> {
    pub program: &'a str,
    pub query: &'a str,
    pub context: &'a str,
    pub rendered: &'a str,
}

/// Everything an oracle gets when asked to update its guess: the rendered
/// intuition history and the rendered report.
#[derive(Debug, Clone)]
pub struct UpdatePrompt<'a> {
    pub intuition: &'a str,
    pub report: &'a str,
}

/// The engine's view of an oracle. Implementations must not reach into
/// engine state; everything they know arrives through the prompts.
pub trait IntuitionOracle {
    fn init(&mut self, prompt: &InitPrompt<'_>) -> Result<String, OracleError>;
    fn update(&mut self, prompt: &UpdatePrompt<'_>) -> Result<String, OracleError>;
    fn name(&self) -> &str;
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

pub const DEFAULT_INIT_TEMPLATE: &str = include_str!("../../../prompts/init.txt");
pub const DEFAULT_UPDATE_TEMPLATE: &str = include_str!("../../../prompts/update.txt");

#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub init: String,
    pub update: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            init: DEFAULT_INIT_TEMPLATE.to_string(),
            update: DEFAULT_UPDATE_TEMPLATE.to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `init.txt` and `update.txt` from a directory.
    pub fn from_dir(dir: &std::path::Path) -> std::io::Result<Self> {
        Ok(PromptTemplates {
            init: std::fs::read_to_string(dir.join("init.txt"))?,
            update: std::fs::read_to_string(dir.join("update.txt"))?,
        })
    }

    pub fn render_init(&self, program: &str, query: &str, context: &str) -> String {
        fill_slots(&self.init, &[("program", program), ("query", query), ("context", context)])
    }

    pub fn render_update(&self, conclusions: &str, contradictions: &str, query: &str) -> String {
        fill_slots(
            &self.update,
            &[("conclusions", conclusions), ("contradictions", contradictions), ("query", query)],
        )
    }
}

/// Single-pass slot substitution: `{name}` tokens are replaced from the
/// table, substituted values are never rescanned, unknown tokens stay put.
fn fill_slots(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        match after.find('}') {
            Some(close) => {
                let name = &after[1..close];
                match slots.iter().find(|(k, _)| *k == name) {
                    Some((_, value)) => out.push_str(value),
                    None => out.push_str(&after[..=close]),
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(after);
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireGuess {
    #[serde(default)]
    solution: Option<HashMap<String, String>>,
    #[serde(default)]
    derivation: Option<WireDerivation>,
}

/// Builds the wire JSON for a guess; mock oracles use it to speak the same
/// format a live model is asked for.
pub fn guess_to_wire_json(
    solution: &[(String, Term)],
    derivation: Option<&DerivationTree>,
) -> String {
    let mut solution_map = serde_json::Map::new();
    for (name, t) in solution {
        solution_map.insert(name.clone(), serde_json::Value::String(t.to_string()));
    }
    let wire = serde_json::json!({
        "solution": if solution.is_empty() {
            serde_json::Value::Null
        } else {
            serde_json::Value::Object(solution_map)
        },
        "derivation": derivation.map(|d| serde_json::to_value(d.to_wire()).expect("wire derivation serializes")),
    });
    serde_json::to_string(&wire).expect("guess wire serializes")
}

/// Extracts a [`Guess`] from an oracle reply. The reply may wrap the JSON
/// block in prose; the first parseable block wins. Anything unextractable
/// degrades to a no-guess with diagnostics — this function never fails.
pub fn parse_guess(reply: &str, query_vars: &[Var], gen: &mut VarGen) -> Guess {
    let wire = match extract_wire_guess(reply) {
        Some(w) => w,
        None => {
            let diag = if reply.trim().is_empty() {
                vec!["empty reply".to_string()]
            } else {
                vec!["no guess JSON block found in reply".to_string()]
            };
            return Guess::no_guess(reply, diag);
        }
    };
    let mut diagnostics = Vec::new();
    let mut scope: HashMap<String, Var> = HashMap::new();

    let solution = wire.solution.as_ref().and_then(|m| {
        let mut s = Subst::new();
        let mut any = false;
        // sort for deterministic diagnostics
        let mut entries: Vec<_> = m.iter().collect();
        entries.sort();
        for (name, text) in entries {
            let var = match query_vars.iter().find(|v| &v.name == name) {
                Some(v) => v.clone(),
                None => {
                    diagnostics.push(format!("solution names unknown query variable {}", name));
                    continue;
                }
            };
            match parse_term_in_scope(text, &mut scope, gen) {
                Ok(t) => match s.extended(&var, &t) {
                    Some(next) => {
                        s = next;
                        any = true;
                    }
                    None => diagnostics
                        .push(format!("solution binding {} = {} fails the occurs check", name, text)),
                },
                Err(e) => diagnostics.push(format!("bad solution term for {}: {}", name, e)),
            }
        }
        any.then_some(s)
    });

    let derivation = wire.derivation.as_ref().and_then(|w| {
        match DerivationTree::from_wire(w, &mut scope, gen) {
            Ok(d) => Some(d),
            Err(e) => {
                diagnostics.push(format!("bad derivation: {}", e));
                None
            }
        }
    });

    Guess { solution, derivation, raw: reply.to_string(), diagnostics }
}

fn extract_wire_guess(reply: &str) -> Option<WireGuess> {
    let trimmed = reply.trim();
    if let Ok(w) = serde_json::from_str::<WireGuess>(trimmed) {
        return Some(w);
    }
    // scan balanced-brace blocks starting at each '{'
    let bytes = trimmed.as_bytes();
    for (start, &b) in bytes.iter().enumerate() {
        if b != b'{' {
            continue;
        }
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (i, &c) in bytes.iter().enumerate().skip(start) {
            if in_str {
                if escaped {
                    escaped = false;
                } else if c == b'\\' {
                    escaped = true;
                } else if c == b'"' {
                    in_str = false;
                }
                continue;
            }
            match c {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate = &trimmed[start..=i];
                        if let Ok(w) = serde_json::from_str::<WireGuess>(candidate) {
                            // an object with neither field is prose, not a guess
                            if w.solution.is_some() || w.derivation.is_some() {
                                return Some(w);
                            }
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Protocol operations
// ---------------------------------------------------------------------------

/// Builds the init prompt, seeds the intuition with it, asks the oracle for
/// its first guess, and records the outcome. Oracle failure or an
/// unparseable reply degrades to a no-guess; the solve proceeds unguided.
pub fn init_intuition(
    program: &Program,
    query: &[Term],
    query_vars: &[Var],
    context: &str,
    oracle: &mut dyn IntuitionOracle,
    templates: &PromptTemplates,
    byte_budget: usize,
    gen: &mut VarGen,
) -> (TextIntuition, Guess) {
    let program_text = program.to_string();
    let query_text = render_goals(query);
    let rendered = templates.render_init(&program_text, &query_text, context);
    let mut intuition = TextIntuition::new(byte_budget);
    intuition.push(SegmentTag::Init, rendered.clone());
    let prompt =
        InitPrompt { program: &program_text, query: &query_text, context, rendered: &rendered };
    let guess = match oracle.init(&prompt) {
        Ok(reply) => parse_guess(&reply, query_vars, gen),
        Err(e) => Guess::no_guess("", vec![format!("oracle failure: {}", e)]),
    };
    intuition.push(SegmentTag::Guess, guess.summary(query_vars));
    (intuition, guess)
}

/// Renders a report through the update template, asks the oracle for an
/// updated guess, and records the outcome.
pub fn update_guess(
    intuition: &mut TextIntuition,
    report: &OracleReport,
    oracle: &mut dyn IntuitionOracle,
    templates: &PromptTemplates,
    query_text: &str,
    query_vars: &[Var],
    gen: &mut VarGen,
) -> Guess {
    debug_assert!(!report.is_empty(), "update_guess requires a nonempty report");
    let report_text = templates.render_update(
        &report.conclusions_text(),
        &report.contradictions_text(),
        query_text,
    );
    let rendered_intuition = intuition.render();
    let prompt = UpdatePrompt { intuition: &rendered_intuition, report: &report_text };
    let guess = match oracle.update(&prompt) {
        Ok(reply) => parse_guess(&reply, query_vars, gen),
        Err(e) => Guess::no_guess("", vec![format!("oracle failure: {}", e)]),
    };
    intuition.push(SegmentTag::Guess, guess.summary(query_vars));
    guess
}

/// An informal inference over accumulated intuition: the oracle sees the
/// rendered history (with an empty report) and replies with a guess.
pub fn infer(
    intuition: &mut TextIntuition,
    oracle: &mut dyn IntuitionOracle,
    query_vars: &[Var],
    gen: &mut VarGen,
) -> Guess {
    debug_assert!(intuition.has_init(), "infer requires an INIT segment");
    let rendered = intuition.render();
    let prompt = UpdatePrompt { intuition: &rendered, report: "" };
    let guess = match oracle.update(&prompt) {
        Ok(reply) => parse_guess(&reply, query_vars, gen),
        Err(e) => Guess::no_guess("", vec![format!("oracle failure: {}", e)]),
    };
    intuition.push(SegmentTag::Guess, guess.summary(query_vars));
    guess
}

// ---------------------------------------------------------------------------
// Mock oracles
// ---------------------------------------------------------------------------

/// Never guesses.
#[derive(Debug, Clone, Default)]
pub struct NullOracle;

impl IntuitionOracle for NullOracle {
    fn init(&mut self, _prompt: &InitPrompt<'_>) -> Result<String, OracleError> {
        Ok(String::new())
    }
    fn update(&mut self, _prompt: &UpdatePrompt<'_>) -> Result<String, OracleError> {
        Ok(String::new())
    }
    fn name(&self) -> &str {
        "null"
    }
}

/// Replays a fixed sequence of replies; init consumes the first, each update
/// the next. An exhausted script replies with nothing (a no-guess).
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    replies: Vec<String>,
    cursor: usize,
}

impl ScriptedOracle {
    pub fn new(replies: Vec<String>) -> Self {
        ScriptedOracle { replies, cursor: 0 }
    }

    fn next_reply(&mut self) -> String {
        let r = self.replies.get(self.cursor).cloned().unwrap_or_default();
        self.cursor += 1;
        r
    }
}

impl IntuitionOracle for ScriptedOracle {
    fn init(&mut self, _prompt: &InitPrompt<'_>) -> Result<String, OracleError> {
        Ok(self.next_reply())
    }
    fn update(&mut self, _prompt: &UpdatePrompt<'_>) -> Result<String, OracleError> {
        Ok(self.next_reply())
    }
    fn name(&self) -> &str {
        "scripted"
    }
}

/// Replays one precomputed guess (usually a known-valid derivation) forever.
#[derive(Debug, Clone)]
pub struct PerfectOracle {
    reply: String,
}

impl PerfectOracle {
    pub fn from_reply(reply: impl Into<String>) -> Self {
        PerfectOracle { reply: reply.into() }
    }

    pub fn from_guess(solution: &[(String, Term)], derivation: Option<&DerivationTree>) -> Self {
        PerfectOracle { reply: guess_to_wire_json(solution, derivation) }
    }
}

impl IntuitionOracle for PerfectOracle {
    fn init(&mut self, _prompt: &InitPrompt<'_>) -> Result<String, OracleError> {
        Ok(self.reply.clone())
    }
    fn update(&mut self, _prompt: &UpdatePrompt<'_>) -> Result<String, OracleError> {
        Ok(self.reply.clone())
    }
    fn name(&self) -> &str {
        "perfect"
    }
}

/// Models a chronically hallucinating oracle: every reply carries a
/// well-formed guess that can never be valid. The derivation cites a real
/// fact clause for a goal no program clause can produce, so its head
/// mismatch is discovered immediately; the solution binds every query
/// variable to an equally impossible answer.
#[derive(Debug, Clone)]
pub struct AdversarialOracle {
    reply: String,
}

impl AdversarialOracle {
    pub fn new(program: &Program, query_vars: &[Var]) -> Self {
        // a functor the program cannot define: extend until unused
        let mut functor = "no_such_goal".to_string();
        while !program.matching_clauses((functor.as_str(), 1)).is_empty()
            || program.external_for((functor.as_str(), 1)).is_some()
        {
            functor.push('_');
        }
        let impossible = Term::compound(functor, vec![Term::Int(0)]);
        let solution: Vec<(String, Term)> =
            query_vars.iter().map(|v| (v.name.clone(), impossible.clone())).collect();
        // cite the first fact clause so the tree is well-formed (no children)
        let fact = program.clauses().iter().position(|c| c.body.is_empty());
        let derivation = fact.map(|ci| DerivationTree::leaf(impossible.clone(), ci));
        let reply = guess_to_wire_json(&solution, derivation.as_ref());
        AdversarialOracle { reply }
    }
}

impl IntuitionOracle for AdversarialOracle {
    fn init(&mut self, _prompt: &InitPrompt<'_>) -> Result<String, OracleError> {
        Ok(self.reply.clone())
    }
    fn update(&mut self, _prompt: &UpdatePrompt<'_>) -> Result<String, OracleError> {
        Ok(self.reply.clone())
    }
    fn name(&self) -> &str {
        "adversarial"
    }
}
