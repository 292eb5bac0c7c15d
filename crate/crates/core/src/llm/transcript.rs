use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Function,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    /// Set on function messages: the id of the call being answered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    /// Set on function messages: the tool that produced the result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl Message {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
            name: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Self {
            tool_calls,
            ..Self::plain(Role::Assistant, content)
        }
    }

    pub fn function_result(call: &ToolCall, content: impl Into<String>) -> Self {
        Self {
            tool_call_id: Some(call.id.clone()),
            name: Some(call.name.clone()),
            ..Self::plain(Role::Function, content)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("cannot access {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed transcript: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("message {index}, field '{field}': {message}")]
    Invalid {
        index: usize,
        field: &'static str,
        message: String,
    },
}

/// Ordered chat messages of one planning session, serialized as a bare JSON
/// array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    pub messages: Vec<Message>,
}

impl Transcript {
    pub fn push(&mut self, message: Message) {
        self.messages.push(message);
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn assistant_turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }

    pub fn tool_calls(&self) -> impl Iterator<Item = &ToolCall> {
        self.messages.iter().flat_map(|m| m.tool_calls.iter())
    }

    /// Checks that the transcript opens with the system message, that tool
    /// call ids are unique, and that every function message answers exactly
    /// one pending call of the latest assistant turn.
    pub fn validate(&self) -> Result<(), TranscriptError> {
        let invalid = |index, field, message: String| TranscriptError::Invalid { index, field, message };
        match self.messages.first() {
            None => return Err(invalid(0, "role", "transcript is empty; expected a system message".into())),
            Some(m) if m.role != Role::System => {
                return Err(invalid(0, "role", "the first message must be the system message".into()))
            }
            _ => {}
        }
        let mut seen = BTreeSet::new();
        let mut pending: BTreeSet<&str> = BTreeSet::new();
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 && m.role == Role::System {
                return Err(invalid(i, "role", "only the first message may be a system message".into()));
            }
            match m.role {
                Role::Assistant => {
                    pending.clear();
                    for call in &m.tool_calls {
                        if !seen.insert(call.id.as_str()) {
                            return Err(invalid(i, "tool_calls", format!("duplicate tool call id '{}'", call.id)));
                        }
                        pending.insert(call.id.as_str());
                    }
                }
                Role::Function => {
                    let id = m
                        .tool_call_id
                        .as_deref()
                        .ok_or_else(|| invalid(i, "tool_call_id", "function message without tool_call_id".into()))?;
                    if !pending.remove(id) {
                        return Err(invalid(i, "tool_call_id", format!("'{id}' does not answer a pending tool call")));
                    }
                }
                _ if !m.tool_calls.is_empty() => {
                    return Err(invalid(i, "tool_calls", "only assistant messages may request tool calls".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TranscriptError> {
        let transcript: Transcript = serde_json::from_str(text)?;
        transcript.validate()?;
        Ok(transcript)
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| TranscriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Writes a transcript in the replay file format.
pub fn record_session(transcript: &Transcript, path: &Path) -> Result<(), TranscriptError> {
    std::fs::write(path, transcript.to_json() + "\n").map_err(|source| TranscriptError::Io {
        path: path.to_path_buf(),
        source,
    })
}
