use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::scripted::decode_payload;
use super::{Payload, Proposer, ProposerContext, ProposerError, ProposerResponse};
use crate::pddl_io::serialize_operator;
use crate::symbolic::{State, Vocabulary};

/// Where an external proposer lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Shell command speaking one JSON object per line on stdin/stdout.
    Exec(String),
    /// URL accepting one JSON request per POST.
    Http(String),
}

impl Endpoint {
    /// `exec:<command>` or an `http://` / `https://` URL.
    pub fn parse(text: &str) -> Option<Endpoint> {
        let text = text.trim();
        if let Some(cmd) = text.strip_prefix("exec:") {
            let cmd = cmd.trim();
            return (!cmd.is_empty()).then(|| Endpoint::Exec(cmd.to_string()));
        }
        if text.starts_with("http://") || text.starts_with("https://") {
            return Some(Endpoint::Http(text.to_string()));
        }
        None
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Exec(c) => write!(f, "exec:{c}"),
            Endpoint::Http(u) => f.write_str(u),
        }
    }
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Forwards requests to a process or HTTP service. One request is in
/// flight at a time; a child process is reused until it fails or times out.
pub struct ExternalProposer {
    endpoint: Endpoint,
    timeout: Duration,
    vocabulary: Option<Vocabulary>,
    session: Option<Session>,
}

impl fmt::Debug for ExternalProposer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalProposer")
            .field("endpoint", &self.endpoint)
            .field("timeout", &self.timeout)
            .finish()
    }
}

#[derive(Deserialize)]
struct Reply {
    #[serde(default)]
    rationale: String,
    #[serde(default)]
    payload: Option<String>,
    #[serde(default)]
    decline: bool,
}

impl ExternalProposer {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        ExternalProposer {
            endpoint,
            timeout,
            vocabulary: None,
            session: None,
        }
    }

    /// Vocabulary that patch payloads must conform to.
    pub fn with_vocabulary(mut self, vocab: Vocabulary) -> Self {
        self.vocabulary = Some(vocab);
        self
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    fn spawn(cmd: &str) -> Result<Session, ProposerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ProposerError::Transport(format!("cannot start `{cmd}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exchange_exec(&mut self, cmd: &str, body: &str) -> Result<String, ProposerError> {
        if self.session.is_none() {
            self.session = Some(Self::spawn(cmd)?);
        }
        let session = self.session.as_mut().expect("session present");
        let sent = writeln!(session.stdin, "{body}").and_then(|_| session.stdin.flush());
        if let Err(e) = sent {
            self.session = None;
            return Err(ProposerError::Transport(format!("write to proposer failed: {e}")));
        }
        match session.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => {
                self.session = None;
                Err(ProposerError::Transport(format!("read from proposer failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.session = None;
                Err(ProposerError::Timeout(self.timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                self.session = None;
                Err(ProposerError::Transport("proposer closed its output".into()))
            }
        }
    }

    fn exchange_http(&self, url: &str, body: &str) -> Result<String, ProposerError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let resp = agent
            .post(url)
            .set("Content-Type", "application/json")
            .send_string(body)
            .map_err(|e| match e {
                ureq::Error::Transport(t)
                    if t.kind() == ureq::ErrorKind::Io
                        && t.to_string().to_lowercase().contains("timed out") =>
                {
                    ProposerError::Timeout(self.timeout)
                }
                other => ProposerError::Transport(other.to_string()),
            })?;
        resp.into_string()
            .map_err(|e| ProposerError::Transport(format!("reading response body: {e}")))
    }

    fn decode(&self, raw: String, ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError> {
        let malformed = |reason: String| ProposerError::Malformed {
            raw: raw.clone(),
            reason,
        };
        let reply: Reply = serde_json::from_str(raw.trim()).map_err(|e| malformed(e.to_string()))?;
        if reply.decline {
            return Ok(ProposerResponse {
                payload: Payload::Decline,
                rationale: reply.rationale,
            });
        }
        let text = reply
            .payload
            .ok_or_else(|| malformed("response has neither payload nor decline".into()))?;
        let vocab = match ctx {
            ProposerContext::Operator(c) => Some(&c.vocabulary),
            ProposerContext::Patch(_) => self.vocabulary.as_ref(),
        };
        let mut payload = decode_payload(&text, vocab).map_err(|e| malformed(e.to_string()))?;
        if let Payload::Patch(p) = &mut payload {
            p.rationale = reply.rationale.clone();
        }
        Ok(ProposerResponse {
            payload,
            rationale: reply.rationale,
        })
    }
}

fn atoms(state: &State) -> Value {
    Value::from(state.iter().map(|a| a.to_string()).collect::<Vec<_>>())
}

/// The JSON request for `ctx`.
pub fn request_body(ctx: &ProposerContext) -> Value {
    let mut m = Map::new();
    m.insert("kind".into(), json!(ctx.kind()));
    match ctx {
        ProposerContext::Patch(c) => {
            let blocks = |ops: &[crate::symbolic::OpRef]| {
                Value::from(ops.iter().map(|o| serialize_operator(o)).collect::<Vec<_>>())
            };
            m.insert("instruction".into(), json!(c.instruction));
            m.insert(
                "objects".into(),
                Value::from(c.universe.names().map(|o| o.to_string()).collect::<Vec<_>>()),
            );
            m.insert("executed_actions".into(), blocks(c.executed()));
            m.insert(
                "erroneous_action".into(),
                c.erroneous().map_or(Value::Null, |o| json!(serialize_operator(o))),
            );
            m.insert("remaining_actions".into(), blocks(c.remaining()));
            m.insert("error_state".into(), atoms(&c.state));
            m.insert(
                "unfulfilled_preconditions".into(),
                Value::from(c.violated.iter().map(|l| l.to_string()).collect::<Vec<_>>()),
            );
            if let Some(r) = &c.rejection_reason {
                m.insert("rejection_reason".into(), json!(r));
            }
        }
        ProposerContext::Operator(c) => {
            m.insert("instruction".into(), json!(c.instruction));
            m.insert(
                "objects".into(),
                Value::from(c.universe.names().map(|o| o.to_string()).collect::<Vec<_>>()),
            );
            m.insert(
                "predicates".into(),
                Value::from(
                    c.vocabulary
                        .iter()
                        .map(|p| format!("{}/{}", p.name, p.arity()))
                        .collect::<Vec<_>>(),
                ),
            );
            m.insert("transition".into(), json!(c.transition + 1));
            m.insert("prev_state".into(), atoms(&c.prev));
            m.insert("next_state".into(), atoms(&c.next));
            if let Some(r) = &c.rejection_reason {
                m.insert("rejection_reason".into(), json!(r));
            }
        }
    }
    Value::Object(m)
}

impl Proposer for ExternalProposer {
    fn propose(&mut self, ctx: &ProposerContext) -> Result<ProposerResponse, ProposerError> {
        let body = request_body(ctx).to_string();
        let raw = match self.endpoint.clone() {
            Endpoint::Exec(cmd) => self.exchange_exec(&cmd, &body)?,
            Endpoint::Http(url) => self.exchange_http(&url, &body)?,
        };
        self.decode(raw, ctx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_forms() {
        assert_eq!(Endpoint::parse("exec: cat"), Some(Endpoint::Exec("cat".into())));
        assert_eq!(
            Endpoint::parse("http://127.0.0.1:9/x"),
            Some(Endpoint::Http("http://127.0.0.1:9/x".into()))
        );
        assert_eq!(Endpoint::parse("exec:"), None);
        assert_eq!(Endpoint::parse("ftp://x"), None);
    }
}
