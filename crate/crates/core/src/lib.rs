//! A top-down logic programming engine whose search is guided, but never
//! ruled, by an external guessing oracle.
//!
//! The engine pairs standard SLD resolution with an accumulating "intuition"
//! record. An oracle (a deterministic mock, or a live LLM over HTTP) guesses
//! an answer and a derivation for the query; fair iterative-deepening search
//! explores clause choices with the guessed derivation ordered first. When
//! exploration refutes a guessed step, the refutation is fed back as a
//! counterexample and the oracle may re-guess — within a fixed call budget,
//! after which the search simply continues unguided. Because the guess only
//! reorders exploration, answers, soundness, and termination behavior are
//! exactly those of the underlying symbolic search, whatever the oracle
//! does.

pub mod derivation;
pub mod http_oracle;
pub mod intuition;
pub mod oracle;
pub mod parse;
pub mod search;
pub mod subst;
pub mod synthesis;
pub mod term;

pub use derivation::{
    answer, check_derivation, expand, initial_state, is_final, verify_derivation, DerivationError,
    DerivationTree, EngineError, SymbolicState, Transition, WireDerivation,
};
pub use http_oracle::{HttpLlmOracle, LlmConfig, API_KEY_ENV, ENDPOINT_ENV};
pub use intuition::{
    combine, summarize, transition_intuition, DualState, Segment, SegmentTag, TextIntuition,
    DEFAULT_INTUITION_BUDGET,
};
pub use oracle::{
    guess_to_wire_json, infer, init_intuition, parse_guess, update_guess, AdversarialOracle,
    Contradiction, ContradictionReason, Guess, InitPrompt, IntuitionOracle, NullOracle,
    OracleError, OracleReport, PerfectOracle, PromptTemplates, ScriptedOracle, UpdatePrompt,
};
pub use parse::{parse_program, parse_query, parse_term_in_scope, ParseError};
pub use search::{
    bias_order, detect_refutation, on_refutation, render_answer, run_sequential_baseline, solve,
    Answer, SearchConfig, SearchEvent, SolveError, SolveResult, SolveStatus, Stats, StatsJson,
    Strategy, TraceEvent,
};
pub use subst::{canonical_key, rename_apart, unify, unify_with, Subst};
pub use synthesis::{
    eval_expr, make_synthesis_program, synthesize, AstError, BenchmarkSpec, BinOp, EvalError,
    ExprAst, GrammarConfig, IoExample, SynthesisError, SOLUTION_QUERY,
};
pub use term::{Clause, ExternalPred, Program, Term, Var, VarGen, VarId};
