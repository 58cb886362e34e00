//! Language-model interpretation agent.
//!
//! The agent converses with a chat endpoint. Calls written as
//! `COMMAND: PYTHON(script in1 in2 ...)` are run against a black-box
//! session and answered with `Response: <line>`; the dialogue ends when a
//! reply carries `[DESCRIPTION]` and no command, or at the turn limit.

pub mod client;
pub mod prompts;
pub mod protocol;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use findbench_core::blackbox::{Budget, BoundFunction, Session};
use findbench_core::interpret::{Interpretation, NoiseVerdict};
use findbench_core::Payload;

use client::{complete_with_retries, ChatClient, Message};
use protocol::{extract_calls, has_description, parse_sections, Call, Sections, RESPONSE_PREFIX};

pub const NAME: &str = "lm-agent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "aia")]
    Aia,
    #[serde(rename = "milan")]
    Milan,
    #[serde(rename = "aia+milan")]
    AiaMilan,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "aia" => Some(Mode::Aia),
            "milan" => Some(Mode::Milan),
            "aia+milan" => Some(Mode::AiaMilan),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Aia => "aia",
            Mode::Milan => "milan",
            Mode::AiaMilan => "aia+milan",
        }
    }

    pub fn uses_exemplars(self) -> bool {
        self != Mode::Aia
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_turns: usize,
    pub mode: Mode,
    /// How the function is named in prompts and calls.
    pub handle: String,
    /// Evaluations allowed per dialogue.
    pub budget: usize,
    pub attempts: usize,
    pub retry_delay_ms: u64,
    /// Requests started per second across all dialogues; 0 disables the limit.
    pub rate_limit: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: None,
            temperature: 0.0,
            max_turns: 16,
            mode: Mode::Aia,
            handle: "function.py".into(),
            budget: 1000,
            attempts: 3,
            retry_delay_ms: 1000,
            rate_limit: 0.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_turns == 0 {
            bail!("max turns must be at least 1");
        }
        if self.budget == 0 {
            bail!("agent budget must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRecord {
    /// Index of the assistant reply that issued the command.
    pub turn: usize,
    pub raw: String,
    pub inputs: Vec<String>,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueTranscript {
    pub function_id: String,
    pub mode: Mode,
    pub messages: Vec<Message>,
    /// Inputs run before the dialogue in exemplar modes, and their response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<(Vec<String>, String)>,
    pub commands: Vec<CommandRecord>,
    pub sections: Sections,
    pub interpretation: Interpretation,
    /// Number of executed commands.
    pub interactions: usize,
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn usage_hint(handle: &str) -> String {
    format!(
        "{RESPONSE_PREFIX}The command could not be run. Write it as COMMAND: PYTHON({handle} input1 input2 ...) \
         with at least one input."
    )
}

const SKIPPED: &str = "The command could not be run and was skipped.";

fn run_inputs(session: &mut Session, inputs: &[String]) -> String {
    match session.query(inputs) {
        Ok(line) => line,
        Err(e) => format!("Error: {e}"),
    }
}

/// Turns the answer sections into an interpretation. `[CODE]` becomes a
/// structured program only if it parses in the engine grammar.
pub fn interpretation_from(id: &str, sections: &Sections) -> Interpretation {
    let mut i = Interpretation::new(id, NAME);
    i.description = sections.description.clone().unwrap_or_default();
    if let Some(d) = sections.domain.as_deref().filter(|d| !d.is_empty()) {
        i.domain_note = d.to_string();
    }
    i.program = sections.code.as_deref().and_then(|c| Payload::parse(c).ok());
    i.noise = NoiseVerdict::Unknown;
    i
}

/// Runs one dialogue. In exemplar modes `exemplars` must hold the inputs to pre-run.
pub fn run_agent(
    cfg: &AgentConfig,
    client: &mut dyn ChatClient,
    func: &BoundFunction,
    exemplars: Option<&[String]>,
) -> Result<DialogueTranscript> {
    cfg.validate()?;
    let mut session = Session::open(func, 0, Budget::evaluations(cfg.budget));
    let category = func.spec.category;
    let mut messages = Vec::new();
    let mut pre = None;
    if cfg.mode.uses_exemplars() {
        let ex = match exemplars {
            Some(e) if !e.is_empty() => e,
            _ => bail!("mode {} needs exemplars for {}", cfg.mode.name(), func.spec.id),
        };
        let line = session.query(ex).context("running exemplars")?;
        pre = Some((ex.to_vec(), format!("{RESPONSE_PREFIX}{line}")));
    }
    let handle = cfg.handle.as_str();
    match (cfg.mode, &pre) {
        (Mode::Milan, Some((_, resp))) => {
            let head = prompts::render(prompts::EXEMPLARS_ONLY, handle, resp);
            messages.push(Message::user(format!("{head}\n{}", prompts::answer_format(category))));
        }
        (_, pre) => {
            messages.push(Message::system(prompts::SYSTEM));
            let mut user = prompts::render(prompts::category_prompt(category), handle, "");
            if let Some((_, resp)) = pre {
                user.push_str("\n\n");
                user.push_str(&prompts::render(prompts::EXEMPLAR_START, handle, resp));
            }
            messages.push(Message::user(user));
        }
    }

    let interactive = cfg.mode != Mode::Milan;
    let max_turns = if interactive { cfg.max_turns } else { 1 };
    let delay = Duration::from_millis(cfg.retry_delay_ms);
    let mut commands = Vec::new();
    let mut final_reply = None;
    let mut error = None;
    let mut malformed_streak = 0;
    for turn in 0..max_turns {
        let reply = match complete_with_retries(client, &messages, cfg.attempts, delay) {
            Ok(r) => r,
            Err(e) => {
                error = Some(format!("endpoint failed after {} attempts: {e}", cfg.attempts));
                break;
            }
        };
        messages.push(Message::assistant(reply.clone()));
        let calls = if interactive { extract_calls(&reply) } else { Vec::new() };
        if calls.is_empty() {
            if has_description(&reply) {
                final_reply = Some(reply);
                break;
            }
            if turn + 1 < max_turns {
                messages.push(Message::user(usage_hint(handle)));
            }
            continue;
        }
        let mut lines = Vec::new();
        let mut bad = false;
        for call in calls {
            match call {
                Call::Valid { raw, inputs, .. } => {
                    let response = format!("{RESPONSE_PREFIX}{}", run_inputs(&mut session, &inputs));
                    lines.push(response.clone());
                    commands.push(CommandRecord { turn, raw, inputs, response });
                }
                Call::Malformed { .. } => bad = true,
            }
        }
        if lines.is_empty() && bad {
            malformed_streak += 1;
            let msg = if malformed_streak == 1 { usage_hint(handle) } else { format!("{RESPONSE_PREFIX}{SKIPPED}") };
            messages.push(Message::user(msg));
        } else {
            malformed_streak = 0;
            messages.push(Message::user(lines.join("\n")));
        }
    }

    let sections = final_reply.as_deref().map(parse_sections).unwrap_or_default();
    let mut interp = interpretation_from(&func.spec.id, &sections);
    interp.queries = session.query_count();
    interp.evaluations = session.evaluations();
    let partial = final_reply.is_none();
    interp.partial = partial;
    Ok(DialogueTranscript {
        function_id: func.spec.id.clone(),
        mode: cfg.mode,
        messages,
        exemplars: pre,
        interactions: commands.len(),
        commands,
        sections,
        interpretation: interp,
        partial,
        error,
    })
}

/// Re-runs a transcript's exemplars and commands on a fresh nonce-0 session
/// and returns every `Response:` line in order.
pub fn replay(t: &DialogueTranscript, func: &BoundFunction, budget: usize) -> Result<Vec<String>> {
    let mut session = Session::open(func, 0, Budget::evaluations(budget));
    let mut out = Vec::new();
    if let Some((inputs, _)) = &t.exemplars {
        out.push(format!("{RESPONSE_PREFIX}{}", session.query(inputs)?));
    }
    for c in &t.commands {
        out.push(format!("{RESPONSE_PREFIX}{}", run_inputs(&mut session, &c.inputs)));
    }
    Ok(out)
}

/// The response lines stored in a transcript, in replay order.
pub fn recorded_responses(t: &DialogueTranscript) -> Vec<String> {
    t.exemplars.iter().map(|(_, r)| r.clone()).chain(t.commands.iter().map(|c| c.response.clone())).collect()
}

/// Loads exemplar lists keyed by function id; each list must hold exactly ten inputs.
/// An empty file gives an empty set.
pub fn load_exemplars(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let set: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    for (id, list) in &set {
        if list.len() != 10 {
            bail!("{}: exemplars for {id} have {} items, expected 10", path.display(), list.len());
        }
    }
    Ok(set)
}
