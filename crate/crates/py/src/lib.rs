//! Python bindings: programs, solving, synthesis, the sequential baseline,
//! and derivation checking, driven from Python in-process.
//!
//! The oracle argument accepted by the run functions is flexible:
//! - `"null"` or `"adversarial"` pick the built-in mocks;
//! - a list of reply strings becomes a scripted oracle;
//! - a dict with a `"perfect"` key replays that guess JSON forever;
//! - any object with `init(program, query, context)` and
//!   `update(intuition, report)` methods is called back directly, which is
//!   how a Python-side LLM client plugs in. Exceptions raised by the
//!   callback degrade to a no-guess; they never abort the solve.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use nsts_core::{
    check_derivation as core_check_derivation, parse_query, solve as core_solve,
    AdversarialOracle, DerivationTree, InitPrompt, IntuitionOracle, NullOracle, OracleError,
    PerfectOracle, ScriptedOracle, SearchConfig, SolveResult, Strategy, UpdatePrompt, VarGen,
    WireDerivation,
};

/// A parsed logic program.
#[pyclass(name = "Program")]
#[derive(Clone)]
struct PyProgram {
    inner: nsts_core::Program,
}

#[pymethods]
impl PyProgram {
    /// Parse program text (the same grammar the CLI reads from files).
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        nsts_core::Program::parse(text)
            .map(|p| PyProgram { inner: p })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Canonical text of the program; reparsing it yields the same clauses.
    fn text(&self) -> String {
        self.inner.to_string()
    }

    fn clause_count(&self) -> usize {
        self.inner.clauses().len()
    }

    fn __repr__(&self) -> String {
        format!("Program({} clauses)", self.inner.clauses().len())
    }
}

/// Result of a run: answers, status, statistics, and optional trace.
#[pyclass(name = "SolveOutcome")]
struct PySolveOutcome {
    #[pyo3(get)]
    answers: Vec<String>,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    nodes_expanded: u64,
    #[pyo3(get)]
    transitions: u64,
    #[pyo3(get)]
    oracle_calls: u32,
    #[pyo3(get)]
    refutations: u32,
    #[pyo3(get)]
    wall_ms: u64,
    /// Wire-format JSON of each answer's derivation tree, parallel to
    /// `answers`.
    #[pyo3(get)]
    derivations_json: Vec<String>,
    #[pyo3(get)]
    trace: Option<Vec<String>>,
    /// Rendered intuition history of the run.
    #[pyo3(get)]
    intuition: String,
}

#[pymethods]
impl PySolveOutcome {
    fn stats_json(&self) -> String {
        serde_json::json!({
            "status": self.status,
            "answers": self.answers,
            "nodes_expanded": self.nodes_expanded,
            "transitions": self.transitions,
            "oracle_calls": self.oracle_calls,
            "refutations": self.refutations,
            "wall_ms": self.wall_ms,
        })
        .to_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveOutcome(status={}, answers={}, nodes_expanded={}, oracle_calls={})",
            self.status,
            self.answers.len(),
            self.nodes_expanded,
            self.oracle_calls
        )
    }
}

fn outcome(result: SolveResult) -> PySolveOutcome {
    PySolveOutcome {
        answers: result.answers.iter().map(|a| a.rendered.clone()).collect(),
        status: result.status.to_string(),
        nodes_expanded: result.stats.nodes_expanded,
        transitions: result.stats.transitions_taken,
        oracle_calls: result.stats.oracle_calls,
        refutations: result.stats.refutations,
        wall_ms: result.stats.wall_time.as_millis() as u64,
        derivations_json: result
            .answers
            .iter()
            .map(|a| serde_json::to_string(&a.derivation.to_wire()).expect("wire serializes"))
            .collect(),
        trace: result.trace.map(|t| t.iter().map(|e| e.to_string()).collect()),
        intuition: result.intuition.render(),
    }
}

/// Oracle driven by a Python object with `init`/`update` methods.
struct PyCallbackOracle {
    obj: PyObject,
}

impl IntuitionOracle for PyCallbackOracle {
    fn init(&mut self, prompt: &InitPrompt<'_>) -> Result<String, OracleError> {
        Python::with_gil(|py| {
            self.obj
                .call_method1(py, "init", (prompt.program, prompt.query, prompt.context))
                .and_then(|r| r.extract::<String>(py))
                .map_err(|e| OracleError::Transport(format!("python oracle: {}", e)))
        })
    }

    fn update(&mut self, prompt: &UpdatePrompt<'_>) -> Result<String, OracleError> {
        Python::with_gil(|py| {
            self.obj
                .call_method1(py, "update", (prompt.intuition, prompt.report))
                .and_then(|r| r.extract::<String>(py))
                .map_err(|e| OracleError::Transport(format!("python oracle: {}", e)))
        })
    }

    fn name(&self) -> &str {
        "python"
    }
}

fn build_oracle(
    oracle: &Bound<'_, PyAny>,
    program: &nsts_core::Program,
    query: &str,
) -> PyResult<Box<dyn IntuitionOracle + Send>> {
    if let Ok(kind) = oracle.extract::<String>() {
        return match kind.as_str() {
            "null" => Ok(Box::new(NullOracle)),
            "adversarial" => {
                let mut gen = VarGen::new();
                let (_, qvars) = parse_query(query, &mut gen)
                    .map_err(|e| PyValueError::new_err(e.to_string()))?;
                Ok(Box::new(AdversarialOracle::new(program, &qvars)))
            }
            other => Err(PyValueError::new_err(format!(
                "unknown oracle kind {:?}; pass \"null\", \"adversarial\", a list of replies, \
                 {{\"perfect\": guess_json}}, or an object with init/update methods",
                other
            ))),
        };
    }
    if let Ok(list) = oracle.downcast::<PyList>() {
        let replies: Vec<String> = list.extract()?;
        return Ok(Box::new(ScriptedOracle::new(replies)));
    }
    if let Ok(dict) = oracle.downcast::<PyDict>() {
        if let Some(reply) = dict.get_item("perfect")? {
            return Ok(Box::new(PerfectOracle::from_reply(reply.extract::<String>()?)));
        }
        return Err(PyValueError::new_err("oracle dict must carry a \"perfect\" key"));
    }
    if oracle.hasattr("init")? && oracle.hasattr("update")? {
        return Ok(Box::new(PyCallbackOracle { obj: oracle.clone().unbind() }));
    }
    Err(PyValueError::new_err(
        "oracle must be a kind string, a list of replies, a {\"perfect\": ...} dict, \
         or an object with init/update methods",
    ))
}

#[allow(clippy::too_many_arguments)]
fn build_config(
    strategy: &str,
    depth_start: usize,
    depth_step: usize,
    depth_limit: Option<usize>,
    node_budget: Option<u64>,
    oracle_budget: u32,
    max_answers: usize,
    all_answers: bool,
    seed: u64,
    trace: bool,
    context: Option<String>,
) -> PyResult<SearchConfig> {
    let cfg = SearchConfig {
        strategy: match strategy {
            "iterative-deepening" => Strategy::IterativeDeepening,
            "breadth-first" => Strategy::BreadthFirst,
            other => {
                return Err(PyValueError::new_err(format!("unknown strategy {:?}", other)));
            }
        },
        depth_start,
        depth_step,
        depth_limit,
        node_budget,
        oracle_call_budget: Some(oracle_budget),
        max_answers: if all_answers { usize::MAX } else { max_answers },
        seed,
        collect_trace: trace,
        context: context.unwrap_or_else(|| "solve the given query".to_string()),
        ..SearchConfig::default()
    };
    cfg.validate().map_err(PyValueError::new_err)?;
    Ok(cfg)
}

/// Solve a query against a program, guided by the given oracle.
#[pyfunction]
#[pyo3(signature = (program, query, oracle=None, *, strategy="iterative-deepening",
       depth_start=4, depth_step=2, depth_limit=None, node_budget=None, oracle_budget=16,
       max_answers=1, all_answers=false, seed=0, trace=false, context=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    program: &PyProgram,
    query: &str,
    oracle: Option<&Bound<'_, PyAny>>,
    strategy: &str,
    depth_start: usize,
    depth_step: usize,
    depth_limit: Option<usize>,
    node_budget: Option<u64>,
    oracle_budget: u32,
    max_answers: usize,
    all_answers: bool,
    seed: u64,
    trace: bool,
    context: Option<String>,
) -> PyResult<PySolveOutcome> {
    let cfg = build_config(
        strategy,
        depth_start,
        depth_step,
        depth_limit,
        node_budget,
        oracle_budget,
        max_answers,
        all_answers,
        seed,
        trace,
        context,
    )?;
    let mut boxed: Box<dyn IntuitionOracle + Send> = match oracle {
        Some(o) => build_oracle(o, &program.inner, query)?,
        None => Box::new(NullOracle),
    };
    // release the GIL for the search itself; callback oracles reacquire it
    // per call
    let result = py
        .allow_threads(|| core_solve(&program.inner, query, boxed.as_mut(), &cfg))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(outcome(result))
}

/// Run an enumerative synthesis benchmark (the JSON benchmark format).
#[pyfunction]
#[pyo3(signature = (benchmark_json, oracle=None, *, strategy="iterative-deepening",
       depth_start=4, depth_step=2, depth_limit=None, node_budget=None, oracle_budget=16,
       max_answers=1, all_answers=false, seed=0, trace=false, context=None))]
#[allow(clippy::too_many_arguments)]
fn synthesize(
    py: Python<'_>,
    benchmark_json: &str,
    oracle: Option<&Bound<'_, PyAny>>,
    strategy: &str,
    depth_start: usize,
    depth_step: usize,
    depth_limit: Option<usize>,
    node_budget: Option<u64>,
    oracle_budget: u32,
    max_answers: usize,
    all_answers: bool,
    seed: u64,
    trace: bool,
    context: Option<String>,
) -> PyResult<PySolveOutcome> {
    let spec: nsts_core::BenchmarkSpec = serde_json::from_str(benchmark_json)
        .map_err(|e| PyValueError::new_err(format!("bad benchmark: {}", e)))?;
    let program = nsts_core::make_synthesis_program(&spec.grammar, &spec.examples)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let cfg = build_config(
        strategy,
        depth_start,
        depth_step,
        depth_limit,
        node_budget,
        oracle_budget,
        max_answers,
        all_answers,
        seed,
        trace,
        context,
    )?;
    let mut boxed: Box<dyn IntuitionOracle + Send> = match oracle {
        Some(o) => build_oracle(o, &program, nsts_core::SOLUTION_QUERY)?,
        None => Box::new(NullOracle),
    };
    let result = py
        .allow_threads(|| {
            nsts_core::synthesize(&spec.grammar, &spec.examples, boxed.as_mut(), &cfg)
        })
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(outcome(result))
}

/// Build the synthesis program for a benchmark without solving it.
#[pyfunction]
fn synthesis_program(benchmark_json: &str) -> PyResult<PyProgram> {
    let spec: nsts_core::BenchmarkSpec = serde_json::from_str(benchmark_json)
        .map_err(|e| PyValueError::new_err(format!("bad benchmark: {}", e)))?;
    nsts_core::make_synthesis_program(&spec.grammar, &spec.examples)
        .map(|p| PyProgram { inner: p })
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// The sequential guess-and-check loop, for contrast experiments.
#[pyfunction]
#[pyo3(signature = (program, query, oracle, budget=50))]
fn sequential_baseline(
    py: Python<'_>,
    program: &PyProgram,
    query: &str,
    oracle: &Bound<'_, PyAny>,
    budget: u32,
) -> PyResult<PySolveOutcome> {
    let mut boxed = build_oracle(oracle, &program.inner, query)?;
    let cfg = SearchConfig::default();
    let result = py
        .allow_threads(|| {
            nsts_core::run_sequential_baseline(&program.inner, query, boxed.as_mut(), budget, &cfg)
        })
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(outcome(result))
}

/// Validate a derivation tree (wire JSON) against a program and query goal.
#[pyfunction]
fn check_derivation(program: &PyProgram, query: &str, derivation_json: &str) -> PyResult<bool> {
    let mut gen = VarGen::new();
    let (goals, _) =
        parse_query(query, &mut gen).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if goals.len() != 1 {
        return Err(PyValueError::new_err("check_derivation expects a single-goal query"));
    }
    let wire: WireDerivation = serde_json::from_str(derivation_json)
        .map_err(|e| PyValueError::new_err(format!("bad derivation JSON: {}", e)))?;
    let tree = DerivationTree::from_wire(&wire, &mut Default::default(), &mut gen)
        .map_err(PyValueError::new_err)?;
    Ok(core_check_derivation(&program.inner, &goals[0], &tree))
}

#[pymodule]
fn nsts(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyProgram>()?;
    m.add_class::<PySolveOutcome>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(synthesis_program, m)?)?;
    m.add_function(wrap_pyfunction!(sequential_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(check_derivation, m)?)?;
    Ok(())
}
