//! The `findbench` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use findbench_core::blackbox::Session;
use findbench_core::mlp::TrainConfig;
use findbench_core::Category;

use crate::agent::client::{HttpClient, RateLimiter};
use crate::agent::{self, AgentConfig, DialogueTranscript, Mode};
use crate::config::{pick, RunConfig};
use crate::dataset::Dataset;
use crate::evaluate::{self, EndpointSettings, EvalConfig, JudgeChoice, Report};
use crate::generate::{self, GenerateConfig};
use crate::interpret::{self, Budgets, Header, InterpreterKind};
use crate::data;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A command failure, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "findbench", version, about = "Function-interpretation benchmark engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a dataset and write it to a directory.
    Generate(GenerateArgs),
    /// Query one function: `exec <dataset>/<id> -- <input>...`.
    Exec(ExecArgs),
    /// Run an interpreter over a dataset and write interpretations.
    Interpret(InterpretArgs),
    /// Run language-model dialogues, or replay stored ones.
    Agent(AgentArgs),
    /// Score interpretations and write a report.
    Evaluate(EvaluateArgs),
    /// Check a stored report and print its table.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
pub struct EndpointArgs {
    /// Full chat-completions URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    /// aia, milan or aia+milan.
    #[arg(long)]
    pub mode: Option<String>,
    /// Exemplar file; defaults to the dataset's exemplars.json.
    #[arg(long)]
    pub exemplars: Option<PathBuf>,
    /// Requests started per second across workers.
    #[arg(long)]
    pub rate_limit: Option<f64>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// numeric, strings, relations or all; repeatable.
    #[arg(long = "category")]
    pub categories: Vec<String>,
    /// Functions per sampled category.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub numeric_count: Option<usize>,
    #[arg(long)]
    pub string_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory of fact-table files replacing the shipped tables.
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct ExecArgs {
    /// `<dataset-dir>/<function-id>`.
    pub target: PathBuf,
    /// Session nonce; 0 is the reproducible benchmark stream.
    #[arg(long, default_value_t = 0)]
    pub nonce: u64,
    #[arg(last = true)]
    pub inputs: Vec<String>,
}

#[derive(Args, Debug)]
pub struct InterpretArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// numeric-ref, string-ref, relation-ref, reference, ground-truth or lm-agent.
    #[arg(long)]
    pub interpreter: Option<String>,
    /// Interpretations file (JSONL).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Query transcripts file (JSONL).
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
    /// Evaluations allowed per function.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long = "category")]
    pub categories: Vec<String>,
    #[arg(long = "id")]
    pub ids: Vec<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct AgentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long = "id")]
    pub ids: Vec<String>,
    #[arg(long = "category")]
    pub categories: Vec<String>,
    #[arg(long)]
    pub limit: Option<usize>,
    /// Transcripts file to write, or to read with --replay.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
    /// Interpretations file to write alongside the transcripts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay the transcripts and check every response line.
    #[arg(long)]
    pub replay: bool,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub interpretations: Option<PathBuf>,
    /// Report file (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// simulation, random or endpoint.
    #[arg(long)]
    pub judge: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(format!("{e:#}"))),
        None => Ok(RunConfig::default()),
    }
}

fn parse_categories(names: &[String]) -> Result<Vec<Category>, Failure> {
    let mut out = Vec::new();
    for n in names {
        let cats = match n.as_str() {
            "all" => vec![Category::Numeric, Category::Strings, Category::Relations],
            other => match Category::from_name(other) {
                Some(c) => vec![c],
                None => return usage(format!("unknown category {other:?} (numeric, strings, relations, all)")),
            },
        };
        for c in cats {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing {what}")))
}

fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Outcome {
    let cfg = load_config(&a.config)?;
    let dir = need(pick(a.out, &cfg.dataset), "--out")?;
    let names = if a.categories.is_empty() { cfg.categories.clone().unwrap_or_default() } else { a.categories };
    let categories = parse_categories(&names)?;
    if categories.is_empty() {
        return usage("missing --category");
    }
    let count = pick(a.count, &cfg.count);
    let numeric_count = pick(a.numeric_count, &cfg.numeric_count).or(count);
    let string_count = pick(a.string_count, &cfg.string_count).or(count);
    for (cat, n) in [(Category::Numeric, numeric_count), (Category::Strings, string_count)] {
        if categories.contains(&cat) {
            match n {
                None => return usage(format!("missing --count for {cat}")),
                Some(0) => return usage("--count must be at least 1"),
                _ => {}
            }
        }
    }
    let tables = match pick(a.tables, &cfg.tables) {
        Some(p) => data::load_fact_tables(&p).map_err(|e| Failure::Runtime(e.into()))?,
        None => data::shipped_tables(),
    };
    let gen = GenerateConfig {
        categories,
        numeric_count: numeric_count.unwrap_or(0),
        string_count: string_count.unwrap_or(0),
        seed: pick(a.seed, &cfg.seed).unwrap_or(0),
        tables,
        lexicon: data::shipped_lexicon(),
        train: TrainConfig::default(),
        jobs: pick(a.jobs, &cfg.jobs).unwrap_or(0),
    };
    let ds = generate::generate(&gen).map_err(|e| match e.downcast_ref::<findbench_core::Error>() {
        Some(findbench_core::Error::CountTooSmall { .. }) => Failure::Usage(format!("{e:#}")),
        _ => Failure::Runtime(e),
    })?;
    ds.write(&dir, a.force).map_err(|e| {
        if e.to_string().contains("--force") {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e)
        }
    })?;
    writeln!(out, "wrote {} functions to {}", ds.specs.len(), dir.display()).map_err(anyhow::Error::from)?;
    for (cat, subs) in &ds.meta.counts {
        let parts: Vec<String> = subs.iter().map(|(s, n)| format!("{s} {n}")).collect();
        writeln!(out, "  {cat}: {}", parts.join(", ")).map_err(anyhow::Error::from)?;
    }
    Ok(())
}

/// Splits `<dataset-dir>/<id>` into its two parts.
pub fn split_target(target: &Path) -> Result<(PathBuf, String), Failure> {
    let id = target.file_name().and_then(|s| s.to_str()).map(str::to_string);
    let dir = target.parent().map(Path::to_path_buf);
    match (dir, id) {
        (Some(d), Some(id)) if !id.is_empty() => Ok((if d.as_os_str().is_empty() { PathBuf::from(".") } else { d }, id)),
        _ => usage(format!("target {} is not <dataset-dir>/<function-id>", target.display())),
    }
}

/// The response line for one exec call.
pub fn exec_line(dir: &Path, id: &str, inputs: &[String], nonce: u64) -> Result<String, Failure> {
    if inputs.is_empty() {
        return usage("no inputs given (write them after `--`)");
    }
    let ds = Dataset::read(dir)?;
    if ds.spec(id).is_none() {
        return usage(format!("function {id:?} is not in {}", dir.display()));
    }
    let func = ds.bind_id(id)?;
    let mut session = Session::open(&func, nonce, findbench_core::blackbox::Budget { max_inputs: usize::MAX, ..Default::default() });
    session.query(inputs).map_err(|e| Failure::Usage(e.to_string()))
}

fn cmd_exec(a: ExecArgs, out: &mut dyn Write) -> Outcome {
    let (dir, id) = split_target(&a.target)?;
    let line = exec_line(&dir, &id, &a.inputs, a.nonce)?;
    writeln!(out, "{line}").map_err(anyhow::Error::from)?;
    Ok(())
}

fn agent_config(e: &EndpointArgs, cfg: &RunConfig, budget: Option<usize>) -> Result<AgentConfig, Failure> {
    let ec = &cfg.endpoint;
    let mode_name = pick(e.mode.clone(), &ec.mode).unwrap_or_else(|| "aia".into());
    let Some(mode) = Mode::parse(&mode_name) else {
        return usage(format!("unknown mode {mode_name:?} (aia, milan, aia+milan)"));
    };
    let d = AgentConfig::default();
    let c = AgentConfig {
        endpoint: need(pick(e.endpoint.clone(), &ec.url), "--endpoint for the language-model agent")?,
        model: need(pick(e.model.clone(), &ec.model), "--model for the language-model agent")?,
        api_key_env: pick(e.api_key_env.clone(), &ec.api_key_env),
        temperature: pick(e.temperature, &ec.temperature).unwrap_or(d.temperature),
        max_turns: pick(e.max_turns, &ec.max_turns).unwrap_or(d.max_turns),
        mode,
        budget: budget.unwrap_or(d.budget),
        rate_limit: pick(e.rate_limit, &ec.rate_limit).unwrap_or(d.rate_limit),
        ..d
    };
    c.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(c)
}

fn exemplar_set(
    e: &EndpointArgs,
    cfg: &RunConfig,
    ds: &Dataset,
    mode: Mode,
) -> Result<std::collections::BTreeMap<String, Vec<String>>, Failure> {
    let set = match pick(e.exemplars.clone(), &cfg.endpoint.exemplars) {
        Some(p) => agent::load_exemplars(&p).map_err(|e| Failure::Usage(format!("{e:#}")))?,
        None => ds.exemplars.clone(),
    };
    if mode.uses_exemplars() && set.is_empty() {
        return usage(format!("mode {} needs a non-empty exemplar set", mode.name()));
    }
    Ok(set)
}

/// Runs dialogues for `specs` in parallel, sharing one rate limit.
fn run_dialogues(
    ds: &Dataset,
    specs: &[&findbench_core::FunctionSpec],
    acfg: &AgentConfig,
    exemplars: &std::collections::BTreeMap<String, Vec<String>>,
    jobs: usize,
) -> anyhow::Result<Vec<DialogueTranscript>> {
    let limiter = (acfg.rate_limit > 0.0).then(|| RateLimiter::new(acfg.rate_limit));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let failures = Arc::new(Mutex::new(Vec::new()));
    let res: Vec<anyhow::Result<DialogueTranscript>> = pool.install(|| {
        specs
            .par_iter()
            .map(|s| {
                let func = ds.bind(s)?;
                let mut client =
                    HttpClient::new(&acfg.endpoint, &acfg.model, acfg.temperature, acfg.api_key_env.as_deref(), limiter.clone());
                let ex = exemplars.get(&s.id).map(Vec::as_slice);
                let t = agent::run_agent(acfg, &mut client, &func, ex)?;
                if let Some(e) = &t.error {
                    failures.lock().expect("failure log").push(format!("{}: {e}", s.id));
                }
                Ok(t)
            })
            .collect()
    });
    for f in failures.lock().expect("failure log").iter() {
        eprintln!("warning: {f}");
    }
    res.into_iter().collect()
}

fn header(ds: &Dataset, interpreter: &str) -> Header {
    Header {
        provenance: ds.meta.provenance.clone(),
        interpreter: interpreter.to_string(),
        dataset_id: ds.meta.dataset_id.clone(),
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct TranscriptLine {
    id: String,
    exchanges: Vec<findbench_core::blackbox::Exchange>,
}

fn cmd_interpret(a: InterpretArgs, out: &mut dyn Write) -> Outcome {
    let cfg = load_config(&a.config)?;
    let name = need(pick(a.interpreter, &cfg.interpreter), "--interpreter")?;
    let Some(kind) = InterpreterKind::parse(&name) else {
        return usage(format!("unknown interpreter {name:?} (one of {})", InterpreterKind::NAMES.join(", ")));
    };
    let budget = pick(a.budget, &cfg.budget);
    if budget == Some(0) {
        return usage("--budget must be positive");
    }
    let acfg = if kind == InterpreterKind::LmAgent { Some(agent_config(&a.endpoint, &cfg, budget)?) } else { None };
    let dir = need(pick(a.dataset, &cfg.dataset), "--dataset")?;
    let out_path = need(pick(a.out, &cfg.interpretations), "--out")?;
    let ds = Dataset::read(&dir)?;
    let categories = parse_categories(&a.categories)?;
    let specs = interpret::select(&ds, kind, &categories, &a.ids, a.limit).map_err(|e| Failure::Usage(e.to_string()))?;
    let jobs = pick(a.jobs, &cfg.jobs).unwrap_or(0);
    let h = header(&ds, &name);
    let (interps, transcripts): (Vec<_>, Vec<TranscriptLine>) = if let Some(acfg) = acfg {
        let ex = exemplar_set(&a.endpoint, &cfg, &ds, acfg.mode)?;
        let ts = run_dialogues(&ds, &specs, &acfg, &ex, jobs)?;
        let lines = ts.iter().map(|t| TranscriptLine { id: t.function_id.clone(), exchanges: Vec::new() }).collect();
        (ts.into_iter().map(|t| t.interpretation).collect(), lines)
    } else {
        let budgets = budget.map_or_else(Budgets::default, Budgets::uniform);
        let res = interpret::interpret_all(&ds, &specs, kind, &budgets, jobs)?;
        res.into_iter()
            .map(|(i, ex)| {
                let t = TranscriptLine { id: i.id.clone(), exchanges: ex };
                (i, t)
            })
            .unzip()
    };
    interpret::write_with_header(&out_path, &h, &interps)?;
    if let Some(p) = pick(a.transcripts, &cfg.transcripts) {
        interpret::write_with_header(&p, &h, &transcripts)?;
    }
    let max_evals = interps.iter().map(|i| i.evaluations).max().unwrap_or(0);
    writeln!(out, "wrote {} interpretations to {} (max evaluations {max_evals})", interps.len(), out_path.display())
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_agent(a: AgentArgs, out: &mut dyn Write) -> Outcome {
    let cfg = load_config(&a.config)?;
    let dir = need(pick(a.dataset, &cfg.dataset), "--dataset")?;
    let tpath = need(pick(a.transcripts, &cfg.transcripts), "--transcripts")?;
    let ds = Dataset::read(&dir)?;
    let budget = pick(a.budget, &cfg.budget);
    if a.replay {
        let (_, ts): (_, Vec<DialogueTranscript>) = interpret::read_with_header(&tpath)?;
        let mut bad = 0;
        for t in &ts {
            let func = ds.bind_id(&t.function_id)?;
            let got = agent::replay(t, &func, budget.unwrap_or(AgentConfig::default().budget))?;
            let want = agent::recorded_responses(t);
            if got != want {
                bad += 1;
                writeln!(out, "{}: replay differs", t.function_id).map_err(anyhow::Error::from)?;
            }
        }
        writeln!(out, "replayed {} transcripts, {bad} differ", ts.len()).map_err(anyhow::Error::from)?;
        return if bad == 0 { Ok(()) } else { Err(Failure::Runtime(anyhow!("{bad} transcripts failed to replay"))) };
    }
    let acfg = agent_config(&a.endpoint, &cfg, budget)?;
    let ex = exemplar_set(&a.endpoint, &cfg, &ds, acfg.mode)?;
    let categories = parse_categories(&a.categories)?;
    let specs = interpret::select(&ds, InterpreterKind::LmAgent, &categories, &a.ids, a.limit)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let ts = run_dialogues(&ds, &specs, &acfg, &ex, pick(a.jobs, &cfg.jobs).unwrap_or(0))?;
    let h = header(&ds, agent::NAME);
    interpret::write_with_header(&tpath, &h, &ts)?;
    if let Some(p) = pick(a.out, &cfg.interpretations) {
        let interps: Vec<_> = ts.iter().map(|t| t.interpretation.clone()).collect();
        interpret::write_with_header(&p, &h, &interps)?;
    }
    let partial = ts.iter().filter(|t| t.partial).count();
    writeln!(out, "wrote {} transcripts to {} ({partial} partial)", ts.len(), tpath.display())
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn judge_choice(name: &str, e: &EndpointArgs, cfg: &RunConfig) -> Result<JudgeChoice, Failure> {
    match name {
        "simulation" => Ok(JudgeChoice::Simulation),
        "random" => Ok(JudgeChoice::Random),
        "endpoint" => Ok(JudgeChoice::Endpoint(EndpointSettings {
            url: need(pick(e.endpoint.clone(), &cfg.endpoint.url), "--endpoint for the endpoint judge")?,
            model: need(pick(e.model.clone(), &cfg.endpoint.model), "--model for the endpoint judge")?,
            api_key_env: pick(e.api_key_env.clone(), &cfg.endpoint.api_key_env),
            rate_limit: pick(e.rate_limit, &cfg.endpoint.rate_limit).unwrap_or(0.0),
        })),
        other => usage(format!("unknown judge {other:?} (simulation, random, endpoint)")),
    }
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Outcome {
    let cfg = load_config(&a.config)?;
    let dir = need(pick(a.dataset, &cfg.dataset), "--dataset")?;
    let ipath = need(pick(a.interpretations, &cfg.interpretations), "--interpretations")?;
    let rpath = need(pick(a.out, &cfg.report), "--out")?;
    let judge = judge_choice(&pick(a.judge, &cfg.judge).unwrap_or_else(|| "simulation".into()), &a.endpoint, &cfg)?;
    let trials = pick(a.trials, &cfg.trials).unwrap_or(evaluate::TRIALS);
    if trials == 0 {
        return usage("--trials must be positive");
    }
    let ds = Dataset::read(&dir)?;
    let (_, interps) = interpret::read_with_header(&ipath)?;
    let ecfg = EvalConfig { judge, trials, seed: pick(a.seed, &cfg.seed).unwrap_or(0), jobs: pick(a.jobs, &cfg.jobs).unwrap_or(0) };
    let report = evaluate::evaluate(&ds, &interps, &ecfg)?;
    let mut text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    text.push('\n');
    std::fs::write(&rpath, text).with_context(|| format!("writing {}", rpath.display()))?;
    if let Some(c) = pick(a.csv, &cfg.csv) {
        evaluate::write_csv(&report, &c)?;
    }
    write!(out, "{}", evaluate::render_table(&report)).map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_report(a: ReportArgs, out: &mut dyn Write) -> Outcome {
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report: Report = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.report.display()))?;
    evaluate::check_aggregates(&report)?;
    if let Some(c) = &a.csv {
        evaluate::write_csv(&report, c)?;
    }
    write!(out, "{}", evaluate::render_table(&report)).map_err(anyhow::Error::from)?;
    Ok(())
}

/// Runs the command line and returns the exit code. Standard output goes to `out`.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Exec(a) => cmd_exec(a, out),
        Command::Interpret(a) => cmd_interpret(a, out),
        Command::Agent(a) => cmd_agent(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}
