use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::transcript::{Message, Role, ToolCall, Transcript, TranscriptError};

pub const API_KEY_ENV: &str = "PLANNER_LLM_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("replay transcript has no further assistant turns")]
    ReplayExhausted,
    #[error("invalid backend configuration: {0}")]
    Config(String),
    #[error("request failed: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

/// Source of assistant turns for a planning session.
pub trait Backend {
    /// Produces the next assistant message given the conversation so far and
    /// the tool definitions on offer.
    fn complete(&mut self, transcript: &Transcript, tools: &Value) -> Result<Message, BackendError>;
}

/// Plays back the assistant turns of a recorded transcript in order.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    turns: Vec<Message>,
    next: usize,
}

impl ReplayBackend {
    pub fn new(recorded: &Transcript) -> Self {
        Self {
            turns: recorded
                .messages
                .iter()
                .filter(|m| m.role == Role::Assistant)
                .cloned()
                .collect(),
            next: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.turns.len() - self.next
    }
}

impl Backend for ReplayBackend {
    fn complete(&mut self, _transcript: &Transcript, _tools: &Value) -> Result<Message, BackendError> {
        let turn = self.turns.get(self.next).cloned().ok_or(BackendError::ReplayExhausted)?;
        self.next += 1;
        Ok(turn)
    }
}

pub fn load_replay(path: &Path) -> Result<ReplayBackend, TranscriptError> {
    Ok(ReplayBackend::new(&Transcript::load(path)?))
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
}

/// Chat-completions client. The bearer token, if any, is read from
/// `PLANNER_LLM_API_KEY`.
#[derive(Debug)]
pub struct LiveBackend {
    config: LiveConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, BackendError> {
        let api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: LiveConfig, api_key: Option<String>) -> Result<Self, BackendError> {
        if config.timeout_seconds == 0 {
            return Err(BackendError::Config("timeout_seconds must be at least 1".into()));
        }
        if config.endpoint.trim().is_empty() || config.model.trim().is_empty() {
            return Err(BackendError::Config("endpoint and model are required".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_seconds))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self { config, api_key, client })
    }

    pub fn request_body(&self, transcript: &Transcript, tools: &Value) -> Value {
        json!({
            "model": self.config.model,
            "messages": transcript.messages.iter().map(wire_message).collect::<Vec<_>>(),
            "tools": tools,
            "tool_choice": "auto",
        })
    }
}

fn wire_message(m: &Message) -> Value {
    match m.role {
        Role::Function => json!({
            "role": "tool",
            "tool_call_id": m.tool_call_id,
            "content": m.content,
        }),
        Role::Assistant if !m.tool_calls.is_empty() => json!({
            "role": "assistant",
            "content": if m.content.is_empty() { Value::Null } else { Value::String(m.content.clone()) },
            "tool_calls": m.tool_calls.iter().map(|c| json!({
                "id": c.id,
                "type": "function",
                "function": {
                    "name": c.name,
                    "arguments": match &c.arguments {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    },
                },
            })).collect::<Vec<_>>(),
        }),
        role => json!({"role": role, "content": m.content}),
    }
}

fn parse_reply(body: &Value) -> Result<Message, BackendError> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::Protocol("response has no choices[0].message".into()))?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or_default();
    let mut calls = Vec::new();
    if let Some(list) = message.get("tool_calls").and_then(Value::as_array) {
        for (i, call) in list.iter().enumerate() {
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .ok_or_else(|| BackendError::Protocol(format!("tool_calls[{i}] has no function name")))?;
            let id = call
                .get("id")
                .and_then(Value::as_str)
                .map_or_else(|| format!("call_{i}"), str::to_string);
            // Arguments arrive as a JSON string; keep the raw text if it does
            // not parse so the error can be reported back to the model.
            let arguments = match call.pointer("/function/arguments") {
                Some(Value::String(s)) => serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.clone())),
                Some(other) => other.clone(),
                None => Value::Null,
            };
            calls.push(ToolCall {
                id,
                name: name.to_string(),
                arguments,
            });
        }
    }
    Ok(Message::assistant(content, calls))
}

impl Backend for LiveBackend {
    fn complete(&mut self, transcript: &Transcript, tools: &Value) -> Result<Message, BackendError> {
        let mut request = self.client.post(&self.config.endpoint).json(&self.request_body(transcript, tools));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Http {
                status: status.as_u16(),
                body: text,
            });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        parse_reply(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves one canned HTTP response and hands back the request body.
    fn serve_once(status: &'static str, body: String) -> (String, thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut request = vec![0; length];
            reader.read_exact(&mut request).unwrap();
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            format!("{auth}\n{}", String::from_utf8(request).unwrap())
        });
        (url, handle)
    }

    fn config(endpoint: String) -> LiveConfig {
        LiveConfig {
            endpoint,
            model: "test-model".into(),
            timeout_seconds: 5,
        }
    }

    fn history() -> Transcript {
        let call = ToolCall {
            id: "c1".into(),
            name: "printTree".into(),
            arguments: json!({}),
        };
        Transcript {
            messages: vec![
                Message::system("sys"),
                Message::user("mission"),
                Message::assistant("", vec![call.clone()]),
                Message::function_result(&call, "tree"),
            ],
        }
    }

    #[test]
    fn live_backend_speaks_chat_completions() {
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
            {"id": "c2", "type": "function", "function": {"name": "plotTree", "arguments": "{}"}}
        ]}}]});
        let (url, server) = serve_once("200 OK", reply.to_string());
        let mut backend = LiveBackend::with_api_key(config(url), Some("secret".into())).unwrap();
        let message = backend.complete(&history(), &json!([{"type": "function"}])).unwrap();
        assert_eq!(message.tool_calls.len(), 1);
        assert_eq!(message.tool_calls[0].name, "plotTree");
        assert_eq!(message.tool_calls[0].arguments, json!({}));

        let captured = server.join().unwrap();
        let (auth, body) = captured.split_once('\n').unwrap();
        assert_eq!(auth, "authorization: Bearer secret");
        let body: Value = serde_json::from_str(body).unwrap();
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["tools"][0]["type"], "function");
        assert_eq!(body["messages"][3]["role"], "tool");
        assert_eq!(body["messages"][3]["tool_call_id"], "c1");
        assert_eq!(body["messages"][2]["tool_calls"][0]["function"]["arguments"], "{}");
    }

    #[test]
    fn http_errors_are_reported() {
        let (url, server) = serve_once("500 Internal Server Error", "{\"error\": \"boom\"}".into());
        let mut backend = LiveBackend::with_api_key(config(url), None).unwrap();
        let err = backend.complete(&history(), &json!([])).unwrap_err();
        assert!(matches!(err, BackendError::Http { status: 500, .. }), "{err}");
        server.join().unwrap();
    }

    #[test]
    fn unresponsive_endpoint_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/", listener.local_addr().unwrap());
        let mut cfg = config(url);
        cfg.timeout_seconds = 1;
        let mut backend = LiveBackend::with_api_key(cfg, None).unwrap();
        let started = std::time::Instant::now();
        let err = backend.complete(&history(), &json!([])).unwrap_err();
        assert!(matches!(err, BackendError::Transport(_)), "{err}");
        assert!(started.elapsed() < Duration::from_secs(10));
        drop(listener);
    }

    #[test]
    fn zero_timeout_is_rejected() {
        let mut cfg = config("http://localhost/".into());
        cfg.timeout_seconds = 0;
        assert!(matches!(LiveBackend::with_api_key(cfg, None), Err(BackendError::Config(_))));
    }

    #[test]
    fn replay_yields_assistant_turns_then_exhausts() {
        let mut backend = ReplayBackend::new(&history());
        assert_eq!(backend.remaining(), 1);
        let t = Transcript::default();
        assert_eq!(backend.complete(&t, &Value::Null).unwrap().tool_calls[0].id, "c1");
        assert!(matches!(backend.complete(&t, &Value::Null), Err(BackendError::ReplayExhausted)));
    }
}
