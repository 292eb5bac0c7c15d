//! Tool definitions offered to the model and decoding of its tool calls into
//! builder calls.

use serde_json::{json, Map, Value};

use crate::builder::{BuilderCall, BuilderSession, PrecedencePair};
use crate::model::{Constraint, Fleet};
use crate::subtree::eligible_routines;

pub const INIT_TOOL: &str = "HierarchicalTree_init";
const INIT_ALIAS: &str = "HierarchicalTreeConstructor";

/// Keys under which models have been seen to send precedence pairs, compared
/// after [`key`] folding.
const PAIR_KEYS: &[&str] = &["constraintpairs", "contraintspairs", "constraintspairs", "contraintpairs"];

fn constraint_param() -> Value {
    json!({
        "type": "string",
        "enum": ["AND", "XOR"],
        "description": "Logical constraint relating the children of the parent: AND (all required) or XOR (exactly one)."
    })
}

fn pairs_param() -> Value {
    json!({
        "type": "array",
        "description": "Precedence constraints among the new children, each as [before, after, \"Precedence\"].",
        "items": {
            "type": "array",
            "items": {"type": "string"},
            "minItems": 2,
            "maxItems": 3
        }
    })
}

fn function(name: &str, description: &str, properties: Value, required: &[&str]) -> Value {
    json!({
        "type": "function",
        "function": {
            "name": name,
            "description": description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": required,
            }
        }
    })
}

/// Chat-completions `tools` array for the six tree-building operations. The
/// subtree names offered to `attachMultiSubTrees` are those the fleet can
/// execute.
pub fn tool_schema(fleet: &Fleet) -> Value {
    let routines = eligible_routines(fleet);
    let tree_names: Vec<String> = routines.iter().map(|r| r.tool_name()).collect();
    let catalog: Vec<String> = routines
        .iter()
        .map(|r| format!("{}({}): {}", r.tool_name(), r.parameters().join(", "), r.description()))
        .collect();
    Value::Array(vec![
        function(
            INIT_TOOL,
            "Create the hierarchical tree with the mission objective as its root node.",
            json!({"objective": {"type": "string", "description": "Mission objective."}}),
            &["objective"],
        ),
        function(
            "CreateAndAddSubtask",
            "Add one subtask under an existing node.",
            json!({
                "parentString": {"type": "string", "description": "Name of the parent node."},
                "isPrimitive": {"type": "boolean", "description": "Whether the subtask is a primitive action."},
                "taskName": {"type": "string", "description": "Name of the new subtask."},
                "LogicalConstraint": constraint_param(),
            }),
            &["parentString", "isPrimitive", "taskName", "LogicalConstraint"],
        ),
        function(
            "addMultiSubtasks",
            "Add several subtasks under an existing node in one call.",
            json!({
                "parentString": {"type": "string", "description": "Name of the parent node."},
                "isPrimitiveList": {"type": "array", "items": {"type": "boolean"}},
                "taskNameList": {"type": "array", "items": {"type": "string"}},
                "LogicalConstraint": constraint_param(),
                "constraintPairs": pairs_param(),
            }),
            &["parentString", "isPrimitiveList", "taskNameList", "LogicalConstraint"],
        ),
        function(
            "attachMultiSubTrees",
            &format!(
                "Attach predefined subtrees under an existing node. Available subtrees: {}",
                catalog.join("; ")
            ),
            json!({
                "parentString": {"type": "string", "description": "Name of the parent node."},
                "treeNames": {"type": "array", "items": {"type": "string", "enum": tree_names}},
                "treeArguments": {
                    "type": "array",
                    "description": "One argument list per subtree, e.g. [[\"Child\"], [\"Child\", \"Mom\"]].",
                    "items": {"type": "array", "items": {"type": "string"}}
                },
                "LogicalConstraint": constraint_param(),
                "contraintsPairs": pairs_param(),
            }),
            &["parentString", "treeNames", "treeArguments", "LogicalConstraint"],
        ),
        function("plotTree", "Render the current tree as a Graphviz DOT graph.", json!({}), &[]),
        function("printTree", "Print the current tree as indented text.", json!({}), &[]),
    ])
}

fn key(k: &str) -> String {
    k.trim().trim_end_matches(':').trim().to_ascii_lowercase()
}

struct Args(Map<String, Value>);

impl Args {
    fn parse(arguments: &Value) -> Result<Self, String> {
        let value = match arguments {
            Value::String(text) if text.trim().is_empty() => Value::Object(Map::new()),
            Value::String(text) => {
                serde_json::from_str(text).map_err(|e| format!("arguments are not valid JSON: {e}"))?
            }
            Value::Null => Value::Object(Map::new()),
            other => other.clone(),
        };
        match value {
            Value::Object(map) => Ok(Args(map.into_iter().map(|(k, v)| (key(&k), v)).collect())),
            _ => Err("arguments must be a JSON object".into()),
        }
    }

    fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(&key(name))
    }

    fn any(&self, names: &[&str]) -> Option<&Value> {
        names.iter().find_map(|n| self.get(n))
    }

    fn required(&self, name: &str) -> Result<&Value, String> {
        self.get(name).ok_or_else(|| format!("missing argument '{name}'"))
    }

    fn string(&self, name: &str) -> Result<String, String> {
        match self.required(name)? {
            Value::String(s) => Ok(s.clone()),
            _ => Err(format!("argument '{name}' must be a string")),
        }
    }

    fn boolean(&self, name: &str) -> Result<bool, String> {
        as_bool(self.required(name)?).ok_or_else(|| format!("argument '{name}' must be a boolean"))
    }

    fn constraint(&self) -> Result<Constraint, String> {
        let raw = self.string("LogicalConstraint")?;
        Constraint::parse(&raw).ok_or_else(|| format!("unknown logical constraint '{raw}'"))
    }

    fn strings(&self, name: &str) -> Result<Vec<String>, String> {
        strings(self.required(name)?).ok_or_else(|| format!("argument '{name}' must be a list of strings"))
    }

    fn pairs(&self) -> Result<Vec<PrecedencePair>, String> {
        match self.any(PAIR_KEYS) {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Object(m)) if m.is_empty() => Ok(Vec::new()),
            Some(Value::Array(items)) => items.iter().map(pair).collect(),
            Some(_) => Err("precedence pairs must be a list".into()),
        }
    }
}

fn as_bool(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::String(s) if s.eq_ignore_ascii_case("true") => Some(true),
        Value::String(s) if s.eq_ignore_ascii_case("false") => Some(false),
        _ => None,
    }
}

fn strings(v: &Value) -> Option<Vec<String>> {
    v.as_array()?
        .iter()
        .map(|s| s.as_str().map(str::to_string))
        .collect()
}

fn pair(v: &Value) -> Result<PrecedencePair, String> {
    if let Value::Object(m) = v {
        let field = |k: &str| m.get(k).and_then(Value::as_str).map(str::to_string);
        return match (field("before"), field("after")) {
            (Some(b), Some(a)) => Ok(PrecedencePair::new(b, a)),
            _ => Err("precedence pair objects need 'before' and 'after'".into()),
        };
    }
    let items = strings(v).ok_or("each precedence pair must be a list of strings")?;
    match items.as_slice() {
        [b, a] => Ok(PrecedencePair::new(b, a)),
        [b, a, kind] if kind.trim().eq_ignore_ascii_case("precedence") => Ok(PrecedencePair::new(b, a)),
        [_, _, kind] => Err(format!("unsupported constraint kind '{kind}'")),
        _ => Err("each precedence pair needs exactly two task names".into()),
    }
}

/// A decoded tool request.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolRequest {
    Init { objective: String },
    Builder(BuilderCall),
}

pub fn decode_tool_call(name: &str, arguments: &Value) -> Result<ToolRequest, String> {
    let args = Args::parse(arguments)?;
    let call = match name.trim() {
        INIT_TOOL | INIT_ALIAS => {
            return Ok(ToolRequest::Init {
                objective: args.string("objective")?,
            })
        }
        "CreateAndAddSubtask" => BuilderCall::CreateAndAddSubtask {
            parent: args.string("parentString")?,
            is_primitive: args.boolean("isPrimitive")?,
            task_name: args.string("taskName")?,
            constraint: args.constraint()?,
        },
        "addMultiSubtasks" => {
            let flags = args.required("isPrimitiveList")?;
            let is_primitive = flags
                .as_array()
                .and_then(|a| a.iter().map(as_bool).collect::<Option<Vec<_>>>())
                .ok_or("argument 'isPrimitiveList' must be a list of booleans")?;
            BuilderCall::AddMultiSubtasks {
                parent: args.string("parentString")?,
                is_primitive,
                task_names: args.strings("taskNameList")?,
                constraint: args.constraint()?,
                pairs: args.pairs()?,
            }
        }
        "attachMultiSubTrees" => {
            let lists = args.required("treeArguments")?;
            let tree_arguments = lists
                .as_array()
                .and_then(|a| a.iter().map(strings).collect::<Option<Vec<_>>>())
                .ok_or("argument 'treeArguments' must be a list of string lists")?;
            BuilderCall::AttachMultiSubtrees {
                parent: args.string("parentString")?,
                tree_names: args.strings("treeNames")?,
                tree_arguments,
                constraint: args.constraint()?,
                pairs: args.pairs()?,
            }
        }
        "plotTree" => BuilderCall::PlotTree,
        "printTree" => BuilderCall::PrintTree,
        other => return Err(format!("unknown function '{other}'")),
    };
    Ok(ToolRequest::Builder(call))
}

/// Runs decoded tool calls against a lazily created builder session.
#[derive(Debug)]
pub struct ToolExecutor {
    fleet: Fleet,
    session: Option<BuilderSession>,
}

impl ToolExecutor {
    pub fn new(fleet: Fleet) -> Self {
        Self { fleet, session: None }
    }

    pub fn session(&self) -> Option<&BuilderSession> {
        self.session.as_ref()
    }

    pub fn into_session(self) -> Option<BuilderSession> {
        self.session
    }

    /// Executes one call. Errors are returned as text to be shown to the
    /// model; they never change the tree.
    pub fn execute(&mut self, name: &str, arguments: &Value) -> Result<String, String> {
        match decode_tool_call(name, arguments)? {
            ToolRequest::Init { objective } => {
                if self.session.is_some() {
                    return Err("the tree is already initialized".into());
                }
                let session = BuilderSession::init(&objective, self.fleet.clone()).map_err(|e| e.to_string())?;
                let message = session.log()[0].outcome.clone().unwrap_or_default();
                self.session = Some(session);
                Ok(message)
            }
            ToolRequest::Builder(call) => {
                let session = self
                    .session
                    .as_mut()
                    .ok_or_else(|| format!("the tree is not initialized; call {INIT_TOOL} first"))?;
                session.apply(call).map_err(|e| e.to_string())
            }
        }
    }
}
