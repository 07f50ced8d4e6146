//! Command-line driver: solve queries, run synthesis benchmarks, and compare
//! guided search against the sequential guess-and-check baseline.
//!
//! Exit codes: 0 when the run ends `solved`, 1 for a no-answer terminal
//! status, 2 for usage or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use nsts_core::{
    make_synthesis_program, run_sequential_baseline, solve, AdversarialOracle, BenchmarkSpec,
    HttpLlmOracle, IntuitionOracle, LlmConfig, NullOracle, PerfectOracle, Program,
    PromptTemplates, ScriptedOracle, SearchConfig, SolveResult, SolveStatus, Strategy, VarGen,
    ENDPOINT_ENV, SOLUTION_QUERY,
};

#[derive(Parser)]
#[command(name = "nsts", version, about = "Oracle-guided logic programming engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a query against a logic program.
    Solve(SolveArgs),
    /// Run an enumerative synthesis benchmark.
    Synth(SynthArgs),
    /// Run the engine and the sequential guess-and-check baseline side by side.
    Compare(CompareArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Path to the program file.
    #[arg(long)]
    program: PathBuf,
    /// Query text, e.g. "p(X)" or "p(X), q(X)".
    #[arg(long)]
    query: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Path to the benchmark spec (JSON).
    #[arg(long)]
    benchmark: PathBuf,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CompareArgs {
    /// Path to the benchmark spec (JSON).
    #[arg(long)]
    benchmark: PathBuf,
    /// Oracle call budget for the sequential baseline.
    #[arg(long, default_value_t = 50)]
    budget: u32,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Oracle kind: null | scripted:<file> | perfect:<file> | adversarial | llm.
    #[arg(long, default_value = "null")]
    oracle: String,
    /// Search strategy.
    #[arg(long, value_enum, default_value_t = StrategyArg::IterativeDeepening)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 4)]
    depth_start: usize,
    #[arg(long, default_value_t = 2)]
    depth_step: usize,
    /// Hard depth cap; runs that stop on it report status depth_open.
    #[arg(long)]
    depth_limit: Option<usize>,
    #[arg(long)]
    node_budget: Option<u64>,
    /// Total oracle calls allowed, counting the initial guess.
    #[arg(long, default_value_t = 16)]
    oracle_budget: u32,
    /// Number of answers to collect; "all" collects the full set.
    #[arg(long, default_value = "1", value_parser = parse_max_answers)]
    max_answers: usize,
    /// Reserved for randomized stress modes; default runs ignore it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trace event stream to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the stats JSON to this file (it is always printed to stdout).
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Directory holding init.txt / update.txt prompt templates.
    #[arg(long)]
    prompts_dir: Option<PathBuf>,
    /// Context text for the init prompt.
    #[arg(long)]
    context: Option<String>,
    /// TOML file with the LLM oracle configuration.
    #[arg(long)]
    llm_config: Option<PathBuf>,
    /// Chat-completions endpoint (overrides config file and environment).
    #[arg(long)]
    llm_endpoint: Option<String>,
    /// Model name (overrides the config file).
    #[arg(long)]
    llm_model: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    IterativeDeepening,
    BreadthFirst,
}

fn parse_max_answers(s: &str) -> Result<usize, String> {
    if s == "all" {
        return Ok(usize::MAX);
    }
    s.parse::<usize>().map_err(|e| e.to_string())
}

/// LLM settings file; flags override these, and these override environment
/// variables. The API key itself only ever comes from the environment.
#[derive(Debug, Default, Deserialize)]
struct LlmFileConfig {
    endpoint: Option<String>,
    model: Option<String>,
    temperature: Option<f64>,
    max_tokens: Option<u32>,
    timeout_secs: Option<u64>,
    require_api_key: Option<bool>,
}

impl RunArgs {
    fn search_config(&self) -> Result<SearchConfig> {
        let templates = match &self.prompts_dir {
            Some(dir) => PromptTemplates::from_dir(dir)
                .with_context(|| format!("loading prompt templates from {}", dir.display()))?,
            None => PromptTemplates::default(),
        };
        let cfg = SearchConfig {
            strategy: match self.strategy {
                StrategyArg::IterativeDeepening => Strategy::IterativeDeepening,
                StrategyArg::BreadthFirst => Strategy::BreadthFirst,
            },
            depth_start: self.depth_start,
            depth_step: self.depth_step,
            node_budget: self.node_budget,
            oracle_call_budget: Some(self.oracle_budget),
            max_answers: self.max_answers,
            seed: self.seed,
            depth_limit: self.depth_limit,
            collect_trace: self.trace.is_some(),
            context: self
                .context
                .clone()
                .unwrap_or_else(|| "solve the given query".to_string()),
            templates,
            ..SearchConfig::default()
        };
        cfg.validate().map_err(|e| anyhow!(e))?;
        Ok(cfg)
    }

    fn llm_oracle(&self) -> Result<HttpLlmOracle> {
        let file: LlmFileConfig = match &self.llm_config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => LlmFileConfig::default(),
        };
        let endpoint = self
            .llm_endpoint
            .clone()
            .or(file.endpoint)
            .or_else(|| std::env::var(ENDPOINT_ENV).ok())
            .ok_or_else(|| {
                anyhow!("the llm oracle needs an endpoint (--llm-endpoint, config file, or {})", ENDPOINT_ENV)
            })?;
        let defaults = LlmConfig::default();
        let cfg = LlmConfig {
            endpoint,
            model: self.llm_model.clone().or(file.model).unwrap_or(defaults.model),
            temperature: file.temperature.unwrap_or(defaults.temperature),
            max_tokens: file.max_tokens.unwrap_or(defaults.max_tokens),
            timeout: file.timeout_secs.map(Duration::from_secs).unwrap_or(defaults.timeout),
            require_api_key: file.require_api_key.unwrap_or(true),
            api_key: None,
            retry_base: defaults.retry_base,
        };
        HttpLlmOracle::new(cfg).map_err(|e| anyhow!(e))
    }

    /// Instantiates the oracle named by `--oracle`. The adversarial mock
    /// needs the program and query to build its impossible guess.
    fn oracle(&self, program: &Program, query: &str) -> Result<Box<dyn IntuitionOracle>> {
        let kind = self.oracle.as_str();
        if kind == "null" {
            return Ok(Box::new(NullOracle));
        }
        if kind == "adversarial" {
            let mut gen = VarGen::new();
            let (_, qvars) = nsts_core::parse_query(query, &mut gen)
                .map_err(|e| anyhow!("query does not parse: {}", e))?;
            return Ok(Box::new(AdversarialOracle::new(program, &qvars)));
        }
        if kind == "llm" {
            return Ok(Box::new(self.llm_oracle()?));
        }
        if let Some(path) = kind.strip_prefix("scripted:") {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path))?;
            let replies: Vec<String> = serde_json::from_str(&text)
                .with_context(|| format!("{}: expected a JSON array of reply strings", path))?;
            return Ok(Box::new(ScriptedOracle::new(replies)));
        }
        if let Some(path) = kind.strip_prefix("perfect:") {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("{}: expected guess JSON", path))?;
            // accept either a full guess or a bare derivation
            let reply = if value.get("solution").is_some() || value.get("derivation").is_some() {
                text
            } else if value.get("goal").is_some() {
                serde_json::json!({ "solution": null, "derivation": value }).to_string()
            } else {
                bail!("{}: neither a guess nor a derivation", path);
            };
            return Ok(Box::new(PerfectOracle::from_reply(reply)));
        }
        bail!("unknown oracle kind {:?} (expected null, scripted:<file>, perfect:<file>, adversarial, llm)", kind)
    }
}

fn emit(result: &SolveResult, args: &RunArgs) -> Result<ExitCode> {
    let answers = result.answers_text();
    if !answers.is_empty() {
        println!("{}", answers);
    }
    let stats = result.stats_json();
    println!("{}", stats);
    if let Some(path) = &args.stats {
        std::fs::write(path, &stats).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.trace {
        let lines: Vec<String> =
            result.trace.as_ref().map_or_else(Vec::new, |t| t.iter().map(|e| e.to_string()).collect());
        std::fs::write(path, lines.join("\n") + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(match result.status {
        SolveStatus::Solved => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    })
}

fn load_program(path: &Path) -> Result<Program> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Program::parse(&text).map_err(|e| anyhow!("{}: {}", path.display(), e))
}

fn load_benchmark(path: &Path) -> Result<BenchmarkSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing benchmark {}", path.display()))
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let program = load_program(&args.program)?;
    let cfg = args.run.search_config()?;
    let mut oracle = args.run.oracle(&program, &args.query)?;
    let result = solve(&program, &args.query, oracle.as_mut(), &cfg)?;
    emit(&result, &args.run)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let spec = load_benchmark(&args.benchmark)?;
    let program = make_synthesis_program(&spec.grammar, &spec.examples)?;
    let cfg = args.run.search_config()?;
    let mut oracle = args.run.oracle(&program, SOLUTION_QUERY)?;
    // synthesize re-verifies every reported AST against the examples,
    // outside the logic
    let result = nsts_core::synthesize(&spec.grammar, &spec.examples, oracle.as_mut(), &cfg)?;
    emit(&result, &args.run)
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let spec = load_benchmark(&args.benchmark)?;
    let program = make_synthesis_program(&spec.grammar, &spec.examples)?;
    let cfg = args.run.search_config()?;

    let mut engine_oracle = args.run.oracle(&program, SOLUTION_QUERY)?;
    let engine = solve(&program, SOLUTION_QUERY, engine_oracle.as_mut(), &cfg)?;

    let mut baseline_oracle = args.run.oracle(&program, SOLUTION_QUERY)?;
    let baseline =
        run_sequential_baseline(&program, SOLUTION_QUERY, baseline_oracle.as_mut(), args.budget, &cfg)?;

    println!(
        "{:<10} {:<24} {:>8} {:>13} {:>15} {:>9}",
        "mode", "status", "answers", "oracle_calls", "nodes_expanded", "wall_ms"
    );
    for (name, r) in [("engine", &engine), ("baseline", &baseline)] {
        println!(
            "{:<10} {:<24} {:>8} {:>13} {:>15} {:>9}",
            name,
            r.status.to_string(),
            r.answers.len(),
            r.stats.oracle_calls,
            r.stats.nodes_expanded,
            r.stats.wall_time.as_millis()
        );
    }
    for (name, r) in [("engine", &engine), ("baseline", &baseline)] {
        if let Some(answer) = r.answers.first() {
            println!("{} answer: {}", name, answer.rendered);
        }
    }
    Ok(if engine.status == SolveStatus::Solved || baseline.status == SolveStatus::Solved {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Compare(args) => cmd_compare(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {:#}", err);
            ExitCode::from(2)
        }
    }
}
