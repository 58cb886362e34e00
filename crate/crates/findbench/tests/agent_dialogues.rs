use std::path::PathBuf;

use findbench::agent::client::ScriptedClient;
use findbench::agent::protocol::RESPONSE_PREFIX;
use findbench::agent::{self, AgentConfig, Mode};
use findbench::cli::exec_line;
use findbench::Dataset;
use serde::Deserialize;

#[derive(Deserialize)]
struct Expect {
    commands: Vec<Vec<String>>,
    description: Option<String>,
    domain: Option<String>,
    code: Option<String>,
    partial: bool,
    program: bool,
}

#[derive(Deserialize)]
struct Dialogue {
    name: String,
    function: String,
    mode: Mode,
    replies: Vec<String>,
    fail_after: Option<usize>,
    max_turns: usize,
    expect: Expect,
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn dialogues() -> Vec<Dialogue> {
    let text = std::fs::read_to_string(fixtures().join("dialogues.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn config(d: &Dialogue) -> AgentConfig {
    AgentConfig { mode: d.mode, max_turns: d.max_turns, retry_delay_ms: 0, ..AgentConfig::default() }
}

fn client(d: &Dialogue) -> ScriptedClient {
    let mut replies: Vec<Result<String, String>> = d.replies.iter().cloned().map(Ok).collect();
    if let Some(n) = d.fail_after {
        replies.truncate(n);
        replies.extend(std::iter::repeat_n(Err("503 service unavailable".to_string()), 3));
    }
    ScriptedClient::with_results(replies)
}

#[test]
fn fixture_suite_has_at_least_ten_dialogues() {
    assert!(dialogues().len() >= 10);
}

#[test]
fn stub_dialogues_run_exactly_the_embedded_commands() {
    let golden = fixtures().join("golden");
    let ds = Dataset::read(&golden).unwrap();
    for d in dialogues() {
        let func = ds.bind_id(&d.function).unwrap();
        let ex = ds.exemplars.get(&d.function).map(Vec::as_slice);
        let mut c = client(&d);
        let t = agent::run_agent(&config(&d), &mut c, &func, ex).unwrap();
        let ctx = &d.name;

        let ran: Vec<Vec<String>> = t.commands.iter().map(|c| c.inputs.clone()).collect();
        assert_eq!(ran, d.expect.commands, "{ctx}: commands");
        assert_eq!(t.interactions, d.expect.commands.len(), "{ctx}");
        for cmd in &t.commands {
            let direct = exec_line(&golden, &d.function, &cmd.inputs, 0).unwrap();
            assert_eq!(cmd.response, format!("{RESPONSE_PREFIX}{direct}"), "{ctx}: response line");
        }

        let replayed = agent::replay(&t, &func, AgentConfig::default().budget).unwrap();
        assert_eq!(replayed, agent::recorded_responses(&t), "{ctx}: replay");

        assert_eq!(t.sections.description, d.expect.description, "{ctx}: description");
        assert_eq!(t.sections.domain, d.expect.domain, "{ctx}: domain");
        assert_eq!(t.sections.code, d.expect.code, "{ctx}: code");
        assert_eq!(t.interpretation.program.is_some(), d.expect.program, "{ctx}: program");
        assert_eq!(t.partial, d.expect.partial, "{ctx}: partial");
        assert_eq!(t.interpretation.partial, d.expect.partial, "{ctx}");
        assert_eq!(t.error.is_some(), d.fail_after.is_some(), "{ctx}: error");
        if let Some(desc) = &d.expect.description {
            assert_eq!(&t.interpretation.description, desc, "{ctx}");
        }
    }
}

#[test]
fn responses_follow_their_commands_in_the_conversation() {
    let ds = Dataset::read(&fixtures().join("golden")).unwrap();
    for d in dialogues().into_iter().filter(|d| d.mode == Mode::Aia) {
        let func = ds.bind_id(&d.function).unwrap();
        let mut c = client(&d);
        let t = agent::run_agent(&config(&d), &mut c, &func, None).unwrap();
        for turn in t.commands.iter().map(|c| c.turn).collect::<std::collections::BTreeSet<_>>() {
            let want: Vec<&str> = t.commands.iter().filter(|c| c.turn == turn).map(|c| c.response.as_str()).collect();
            // system, first user, then assistant/user pairs.
            let msg = &t.messages[2 + 2 * turn + 1];
            assert_eq!(msg.role, "user");
            assert_eq!(msg.content, want.join("\n"), "{}", d.name);
        }
        assert_eq!(c.requests.len(), t.messages.iter().filter(|m| m.role == "assistant").count()
            + usize::from(d.fail_after.is_some()) * 3, "{}", d.name);
    }
}

#[test]
fn malformed_calls_get_a_hint_then_are_skipped() {
    let ds = Dataset::read(&fixtures().join("golden")).unwrap();
    let all = dialogues();
    let d = all.iter().find(|d| d.name == "second malformed call is skipped").unwrap();
    let func = ds.bind_id(&d.function).unwrap();
    let t = agent::run_agent(&config(d), &mut client(d), &func, None).unwrap();
    let users: Vec<&str> = t.messages.iter().filter(|m| m.role == "user").map(|m| m.content.as_str()).collect();
    assert_eq!(users[1], agent::usage_hint("function.py"));
    assert_eq!(users[2], format!("{RESPONSE_PREFIX}The command could not be run and was skipped."));
    assert!(users[3].starts_with(RESPONSE_PREFIX));
}

#[test]
fn exemplar_modes_show_the_prerun_response() {
    let ds = Dataset::read(&fixtures().join("golden")).unwrap();
    for d in dialogues().into_iter().filter(|d| d.mode != Mode::Aia) {
        let func = ds.bind_id(&d.function).unwrap();
        let ex = ds.exemplars[&d.function].clone();
        assert_eq!(ex.len(), 10);
        let t = agent::run_agent(&config(&d), &mut client(&d), &func, Some(&ex)).unwrap();
        let (inputs, resp) = t.exemplars.clone().unwrap();
        assert_eq!(inputs, ex);
        let first_user = t.messages.iter().find(|m| m.role == "user").unwrap();
        assert!(first_user.content.contains(&resp), "{}", d.name);
        if d.mode == Mode::Milan {
            assert_eq!(t.messages.iter().filter(|m| m.role == "system").count(), 0);
            assert_eq!(t.messages.len(), 2);
        }
        // Without exemplars the exemplar modes refuse to start.
        assert!(agent::run_agent(&config(&d), &mut client(&d), &func, None).is_err());
    }
}

#[test]
fn transcripts_survive_a_jsonl_round_trip() {
    let ds = Dataset::read(&fixtures().join("golden")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut ts = Vec::new();
    for d in dialogues() {
        let func = ds.bind_id(&d.function).unwrap();
        let ex = ds.exemplars.get(&d.function).map(Vec::as_slice);
        ts.push(agent::run_agent(&config(&d), &mut client(&d), &func, ex).unwrap());
    }
    let path = dir.path().join("t.jsonl");
    let header = findbench::interpret::Header {
        provenance: ds.meta.provenance.clone(),
        interpreter: agent::NAME.into(),
        dataset_id: ds.meta.dataset_id.clone(),
    };
    findbench::interpret::write_with_header(&path, &header, &ts).unwrap();
    let (h, back): (_, Vec<agent::DialogueTranscript>) = findbench::interpret::read_with_header(&path).unwrap();
    assert_eq!(h, Some(header));
    assert_eq!(back, ts);

    // The CLI replay check accepts them.
    let mut out = Vec::new();
    let code = findbench::cli::run(
        ["findbench", "agent", "--replay", "--dataset", fixtures().join("golden").to_str().unwrap(), "--transcripts", path.to_str().unwrap()],
        &mut out,
    );
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&out));
}
