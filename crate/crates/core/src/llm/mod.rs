//! Function-calling planning sessions: the model is offered the tree-building
//! operations as tools and the session executes whatever it requests.

mod backend;
mod tools;
mod transcript;

pub use backend::{load_replay, Backend, BackendError, LiveBackend, LiveConfig, ReplayBackend, API_KEY_ENV};
pub use tools::{decode_tool_call, tool_schema, ToolExecutor, ToolRequest, INIT_TOOL};
pub use transcript::{record_session, Message, Role, ToolCall, Transcript, TranscriptError};

use crate::model::{validate_tree, Fleet, TaskTree, ValidationReport};

pub const DEFAULT_MAX_TURNS: usize = 20;

const SYSTEM_PROMPT: &str = include_str!("../../fixtures/system_prompt.txt");

pub fn system_prompt() -> &'static str {
    SYSTEM_PROMPT.trim_end()
}

pub fn user_prompt(mission: &str) -> String {
    format!(
        "Create a Hierarchical Tree with the mission - '{}'. Think how to use the functions and subTrees to create a logical Hierarchical tree.",
        mission.trim()
    )
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("mission must not be empty")]
    EmptyMission,
    #[error("max_turns must be at least 1")]
    NoTurns,
    #[error("backend failed after {} messages: {source}", transcript.len())]
    Backend {
        #[source]
        source: BackendError,
        transcript: Transcript,
    },
}

#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub tree: TaskTree,
    pub transcript: Transcript,
    pub report: ValidationReport,
    /// The turn budget ran out before the model stopped calling tools.
    pub turns_exhausted: bool,
}

/// Runs one planning dialogue. Each backend reply is appended to the
/// transcript and its tool calls are executed in order, one function message
/// per call. The session ends on a reply without tool calls, except that a
/// text-only first reply (the model's step-by-step plan) lets the dialogue
/// continue.
pub fn run_planning_session(
    mission: &str,
    fleet: &Fleet,
    backend: &mut dyn Backend,
    max_turns: usize,
) -> Result<SessionOutcome, SessionError> {
    if mission.trim().is_empty() {
        return Err(SessionError::EmptyMission);
    }
    if max_turns == 0 {
        return Err(SessionError::NoTurns);
    }
    let tools = tool_schema(fleet);
    let mut transcript = Transcript::default();
    transcript.push(Message::system(system_prompt()));
    transcript.push(Message::user(user_prompt(mission)));
    let mut executor = ToolExecutor::new(fleet.clone());

    let mut finished = false;
    for turn in 0..max_turns {
        let mut reply = match backend.complete(&transcript, &tools) {
            Ok(reply) => reply,
            Err(source) => return Err(SessionError::Backend { source, transcript }),
        };
        reply.role = Role::Assistant;
        for (i, call) in reply.tool_calls.iter_mut().enumerate() {
            if call.id.is_empty() {
                call.id = format!("call_{turn}_{i}");
            }
        }
        let calls = reply.tool_calls.clone();
        transcript.push(reply);
        if calls.is_empty() {
            if turn == 0 {
                continue;
            }
            finished = true;
            break;
        }
        for call in &calls {
            let content = match executor.execute(&call.name, &call.arguments) {
                Ok(text) => text,
                Err(err) => format!("Error: {err}"),
            };
            transcript.push(Message::function_result(call, content));
        }
    }

    let tree = executor
        .into_session()
        .map(|s| s.into_tree())
        .unwrap_or_else(|| TaskTree::new(mission.trim()));
    let report = validate_tree(&tree);
    Ok(SessionOutcome {
        tree,
        transcript,
        report,
        turns_exhausted: !finished,
    })
}
