//! Wire protocol between an agent and the black box: `COMMAND:` markers,
//! `PYTHON(...)` calls and the `[DESCRIPTION]`/`[DOMAIN]`/`[CODE]` answer.

use serde::{Deserialize, Serialize};

pub const COMMAND_MARKER: &str = "COMMAND:";
pub const CALL_OPEN: &str = "PYTHON(";
pub const RESPONSE_PREFIX: &str = "Response: ";

/// One `PYTHON(...)` occurrence after a command marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Call {
    /// Script name followed by at least one input.
    Valid { raw: String, script: String, inputs: Vec<String> },
    /// No closing parenthesis, or no inputs.
    Malformed { raw: String, reason: String },
}

/// Splits call arguments on whitespace and commas; single or double quotes group words.
pub fn tokenize(args: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut quoted = false;
    for c in args.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => cur.push(c),
            None if c == '"' || c == '\'' => {
                quote = Some(c);
                quoted = true;
            }
            None if c.is_whitespace() || c == ',' => {
                if !cur.is_empty() || quoted {
                    out.push(std::mem::take(&mut cur));
                }
                quoted = false;
            }
            None => cur.push(c),
        }
    }
    if quote.is_some() {
        return Err("unbalanced quote".into());
    }
    if !cur.is_empty() || quoted {
        out.push(cur);
    }
    Ok(out)
}

/// Every `PYTHON(...)` call written after the first `COMMAND:` marker.
/// Text elsewhere in the reply is never executed.
pub fn extract_calls(reply: &str) -> Vec<Call> {
    let Some(start) = reply.find(COMMAND_MARKER) else { return Vec::new() };
    let mut rest = &reply[start + COMMAND_MARKER.len()..];
    let mut calls = Vec::new();
    while let Some(open) = rest.find(CALL_OPEN) {
        let body_start = open + CALL_OPEN.len();
        let Some(close) = rest[body_start..].find(')') else {
            let raw = rest[open..].lines().next().unwrap_or("").to_string();
            calls.push(Call::Malformed { raw, reason: "missing closing parenthesis".into() });
            break;
        };
        let body = &rest[body_start..body_start + close];
        let raw = rest[open..body_start + close + 1].to_string();
        calls.push(match tokenize(body) {
            Err(reason) => Call::Malformed { raw, reason },
            Ok(tokens) if tokens.len() < 2 => Call::Malformed { raw, reason: "no inputs given".into() },
            Ok(mut tokens) => {
                let script = tokens.remove(0);
                Call::Valid { raw, script, inputs: tokens }
            }
        });
        rest = &rest[body_start + close + 1..];
    }
    calls
}

/// The three answer sections; absent ones are `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub description: Option<String>,
    pub domain: Option<String>,
    pub code: Option<String>,
}

const TAGS: [&str; 3] = ["[DESCRIPTION]", "[DOMAIN]", "[CODE]"];

fn section(text: &str, tag: &str) -> Option<String> {
    let at = text.rfind(tag)? + tag.len();
    let body = &text[at..];
    let end = TAGS.iter().filter_map(|t| body.find(t)).min().unwrap_or(body.len());
    let s = body[..end].trim_start_matches([':', ' ', '\t']).trim();
    Some(s.to_string())
}

pub fn parse_sections(text: &str) -> Sections {
    Sections {
        description: section(text, TAGS[0]),
        domain: section(text, TAGS[1]),
        code: section(text, TAGS[2]).map(|c| strip_fences(&c)),
    }
}

/// Removes a surrounding Markdown code fence.
pub fn strip_fences(code: &str) -> String {
    let t = code.trim();
    let Some(inner) = t.strip_prefix("```") else { return t.to_string() };
    let inner = inner.split_once('\n').map_or("", |(_, rest)| rest);
    inner.trim_end().trim_end_matches("```").trim().to_string()
}

pub fn has_description(reply: &str) -> bool {
    reply.contains(TAGS[0])
}
