//! Incremental tree construction through the six builder operations exposed
//! to the LLM. Every call is transactional: it either applies completely or
//! leaves the tree untouched, and every attempt is logged.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{name_key, normalize_name, Constraint, Fleet, NodeId, TaskNode, TaskTree};
use crate::render;
use crate::subtree::{generate_subtree, SubtreeError, SubtreeSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("objective must not be empty")]
    EmptyObjective,
    #[error("no node named '{0}'")]
    NameNotFound(String),
    #[error("name '{name}' is ambiguous: matches {}", candidates.join(", "))]
    AmbiguousName { name: String, candidates: Vec<String> },
    #[error("a node named '{0}' already exists")]
    DuplicateName(String),
    #[error("'{parent}' already relates its children with {existing}, cannot add {requested}")]
    ConstraintConflict {
        parent: String,
        existing: Constraint,
        requested: Constraint,
    },
    #[error("'{0}' is a primitive task and cannot have children")]
    NotComposite(String),
    #[error("invalid arguments: {0}")]
    Argument(String),
    #[error(transparent)]
    Subtree(SubtreeError),
    #[error("precedence would create a cycle: {0}")]
    PrecedenceCycle(String),
}

impl From<SubtreeError> for BuildError {
    fn from(err: SubtreeError) -> Self {
        match err {
            SubtreeError::UnknownRoutine(name) => BuildError::NameNotFound(name),
            other => BuildError::Subtree(other),
        }
    }
}

/// `before` must finish before `after` starts. Names are node names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecedencePair {
    pub before: String,
    pub after: String,
}

impl PrecedencePair {
    pub fn new(before: impl Into<String>, after: impl Into<String>) -> Self {
        Self {
            before: before.into(),
            after: after.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BuilderCall {
    Init {
        objective: String,
    },
    CreateAndAddSubtask {
        parent: String,
        is_primitive: bool,
        task_name: String,
        constraint: Constraint,
    },
    AddMultiSubtasks {
        parent: String,
        is_primitive: Vec<bool>,
        task_names: Vec<String>,
        constraint: Constraint,
        pairs: Vec<PrecedencePair>,
    },
    AttachMultiSubtrees {
        parent: String,
        tree_names: Vec<String>,
        tree_arguments: Vec<Vec<String>>,
        constraint: Constraint,
        pairs: Vec<PrecedencePair>,
    },
    PlotTree,
    PrintTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub call: BuilderCall,
    pub outcome: Result<String, String>,
}

const STOPWORDS: &[&str] = &["a", "an", "the", "and", "with", "to", "of", "for", "in", "on", "at", "by"];

fn content_words(name: &str) -> BTreeSet<String> {
    name_key(name)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !STOPWORDS.contains(w))
        .map(str::to_string)
        .collect()
}

/// Looks a node up by name. Tries, in order, an exact match after
/// normalization, a case-insensitive match and a match on the set of content
/// words; the first tier with any hit decides, and more than one hit is an
/// error.
pub fn resolve_name(tree: &TaskTree, name: &str) -> Result<NodeId, BuildError> {
    let wanted = normalize_name(name);
    let tiers: [&dyn Fn(&TaskNode) -> bool; 3] = [
        &|node| normalize_name(&node.name) == wanted,
        &|node| name_key(&node.name) == wanted.to_lowercase(),
        &|node| {
            let words = content_words(name);
            !words.is_empty() && content_words(&node.name) == words
        },
    ];
    for matches in tiers {
        let hits: Vec<(&NodeId, &TaskNode)> = tree.nodes.iter().filter(|(_, n)| matches(n)).collect();
        match hits.len() {
            0 => continue,
            1 => return Ok(hits[0].0.clone()),
            _ => {
                return Err(BuildError::AmbiguousName {
                    name: name.to_string(),
                    candidates: hits.iter().map(|(_, n)| n.name.clone()).collect(),
                })
            }
        }
    }
    Err(BuildError::NameNotFound(name.to_string()))
}

fn establish_constraint(tree: &mut TaskTree, parent: &NodeId, constraint: Constraint) -> Result<(), BuildError> {
    let node = tree.node_mut(parent).expect("resolved");
    if node.is_primitive() {
        return Err(BuildError::NotComposite(node.name.clone()));
    }
    match node.constraint {
        Some(existing) if existing != constraint => Err(BuildError::ConstraintConflict {
            parent: node.name.clone(),
            existing,
            requested: constraint,
        }),
        _ => {
            node.constraint = Some(constraint);
            Ok(())
        }
    }
}

fn add_child(
    tree: &mut TaskTree,
    parent: &NodeId,
    is_primitive: bool,
    task_name: &str,
    constraint: Constraint,
) -> Result<NodeId, BuildError> {
    let name = task_name.trim();
    if normalize_name(name).is_empty() {
        return Err(BuildError::Argument("task name is empty".into()));
    }
    if tree.has_name(name) {
        return Err(BuildError::DuplicateName(name.to_string()));
    }
    establish_constraint(tree, parent, constraint)?;
    let node = if is_primitive {
        TaskNode::primitive(name, None)
    } else {
        TaskNode::composite(name, None)
    };
    Ok(tree.push_child(parent, node))
}

fn check_acyclic(tree: &TaskTree) -> Result<(), BuildError> {
    match tree.check_invariants() {
        Ok(()) => Ok(()),
        Err(msg) if msg.starts_with("precedence cycle") => Err(BuildError::PrecedenceCycle(
            msg.trim_start_matches("precedence cycle: ").to_string(),
        )),
        Err(msg) => Err(BuildError::Argument(msg)),
    }
}

/// A tree under construction for one mission.
#[derive(Debug, Clone)]
pub struct BuilderSession {
    tree: TaskTree,
    fleet: Fleet,
    log: Vec<LogEntry>,
}

impl BuilderSession {
    /// `HierarchicalTree_init`: a session whose tree is a single composite
    /// root named after the objective.
    pub fn init(objective: &str, fleet: Fleet) -> Result<Self, BuildError> {
        let objective = objective.trim();
        if normalize_name(objective).is_empty() {
            return Err(BuildError::EmptyObjective);
        }
        Ok(Self {
            tree: TaskTree::new(objective),
            fleet,
            log: vec![LogEntry {
                call: BuilderCall::Init {
                    objective: objective.to_string(),
                },
                outcome: Ok(format!("HierarchicalTree constructor was successfully called with root '{objective}'")),
            }],
        })
    }

    pub fn tree(&self) -> &TaskTree {
        &self.tree
    }

    pub fn into_tree(self) -> TaskTree {
        self.tree
    }

    pub fn fleet(&self) -> &Fleet {
        &self.fleet
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Rebuilds a session by re-applying a log. Recorded outcomes are ignored.
    pub fn replay(fleet: Fleet, log: &[LogEntry]) -> Result<Self, BuildError> {
        let Some(LogEntry {
            call: BuilderCall::Init { objective },
            ..
        }) = log.first()
        else {
            return Err(BuildError::Argument("log must start with an init call".into()));
        };
        let mut session = Self::init(objective, fleet)?;
        for entry in &log[1..] {
            let _ = session.apply(entry.call.clone());
        }
        Ok(session)
    }

    /// Executes one call and records it. On error the tree is unchanged.
    pub fn apply(&mut self, call: BuilderCall) -> Result<String, BuildError> {
        let mut draft = self.tree.clone();
        let result = Self::execute(&mut draft, &self.fleet, &call);
        if result.is_ok() {
            self.tree = draft;
        }
        self.log.push(LogEntry {
            call,
            outcome: result.clone().map_err(|e| e.to_string()),
        });
        result
    }

    fn execute(tree: &mut TaskTree, fleet: &Fleet, call: &BuilderCall) -> Result<String, BuildError> {
        match call {
            BuilderCall::Init { .. } => Err(BuildError::Argument(
                "the hierarchical tree is already initialized".into(),
            )),
            BuilderCall::CreateAndAddSubtask {
                parent,
                is_primitive,
                task_name,
                constraint,
            } => {
                let parent_id = resolve_name(tree, parent)?;
                add_child(tree, &parent_id, *is_primitive, task_name, *constraint)?;
                check_acyclic(tree)?;
                Ok(format!(
                    "added '{}' under '{}'",
                    task_name.trim(),
                    tree.nodes[&parent_id].name
                ))
            }
            BuilderCall::AddMultiSubtasks {
                parent,
                is_primitive,
                task_names,
                constraint,
                pairs,
            } => {
                if task_names.is_empty() {
                    return Err(BuildError::Argument("taskNameList is empty".into()));
                }
                if is_primitive.len() != task_names.len() {
                    return Err(BuildError::Argument(format!(
                        "isPrimitiveList has {} entries but taskNameList has {}",
                        is_primitive.len(),
                        task_names.len()
                    )));
                }
                let parent_id = resolve_name(tree, parent)?;
                let mut added = Vec::new();
                for (name, primitive) in task_names.iter().zip(is_primitive) {
                    added.push(add_child(tree, &parent_id, *primitive, name, *constraint)?);
                }
                let lookup = |name: &str| -> Result<NodeId, BuildError> {
                    let key = name_key(name);
                    task_names
                        .iter()
                        .position(|n| name_key(n) == key)
                        .map(|i| added[i].clone())
                        .ok_or_else(|| {
                            BuildError::Argument(format!(
                                "constraint pair references '{name}', which is not in taskNameList"
                            ))
                        })
                };
                for pair in pairs {
                    let before = lookup(&pair.before)?;
                    let after = lookup(&pair.after)?;
                    tree.add_precedence(before, after);
                }
                check_acyclic(tree)?;
                Ok(format!(
                    "added {} subtask(s) and {} precedence pair(s) under '{}'",
                    added.len(),
                    pairs.len(),
                    tree.nodes[&parent_id].name
                ))
            }
            BuilderCall::AttachMultiSubtrees {
                parent,
                tree_names,
                tree_arguments,
                constraint,
                pairs,
            } => {
                if tree_names.is_empty() {
                    return Err(BuildError::Argument("treeNames is empty".into()));
                }
                if tree_names.len() != tree_arguments.len() {
                    return Err(BuildError::Argument(format!(
                        "treeNames has {} entries but treeArguments has {}",
                        tree_names.len(),
                        tree_arguments.len()
                    )));
                }
                let parent_id = resolve_name(tree, parent)?;
                establish_constraint(tree, &parent_id, *constraint)?;
                let mut roots = Vec::new();
                for (name, args) in tree_names.iter().zip(tree_arguments) {
                    let spec = SubtreeSpec::parse(name, args.clone())?;
                    let fragment = generate_subtree(&spec, fleet)?;
                    let root = tree
                        .graft(&parent_id, &fragment)
                        .map_err(|e| BuildError::Argument(e.to_string()))?;
                    roots.push(tree.nodes[&root].name.clone());
                }
                for pair in pairs {
                    let before = resolve_name(tree, &pair.before)?;
                    let after = resolve_name(tree, &pair.after)?;
                    tree.add_precedence(before, after);
                }
                check_acyclic(tree)?;
                Ok(format!(
                    "attached {} under '{}'",
                    roots.join(", "),
                    tree.nodes[&parent_id].name
                ))
            }
            BuilderCall::PlotTree => Ok(render::to_dot(tree)),
            BuilderCall::PrintTree => Ok(render::to_text(tree)),
        }
    }

    pub fn create_and_add_subtask(
        &mut self,
        parent: &str,
        is_primitive: bool,
        task_name: &str,
        constraint: Constraint,
    ) -> Result<String, BuildError> {
        self.apply(BuilderCall::CreateAndAddSubtask {
            parent: parent.to_string(),
            is_primitive,
            task_name: task_name.to_string(),
            constraint,
        })
    }

    pub fn add_multi_subtasks(
        &mut self,
        parent: &str,
        is_primitive: &[bool],
        task_names: &[&str],
        constraint: Constraint,
        pairs: &[PrecedencePair],
    ) -> Result<String, BuildError> {
        self.apply(BuilderCall::AddMultiSubtasks {
            parent: parent.to_string(),
            is_primitive: is_primitive.to_vec(),
            task_names: task_names.iter().map(|s| s.to_string()).collect(),
            constraint,
            pairs: pairs.to_vec(),
        })
    }

    pub fn attach_multi_subtrees(
        &mut self,
        parent: &str,
        tree_names: &[&str],
        tree_arguments: &[&[&str]],
        constraint: Constraint,
        pairs: &[PrecedencePair],
    ) -> Result<String, BuildError> {
        self.apply(BuilderCall::AttachMultiSubtrees {
            parent: parent.to_string(),
            tree_names: tree_names.iter().map(|s| s.to_string()).collect(),
            tree_arguments: tree_arguments
                .iter()
                .map(|args| args.iter().map(|s| s.to_string()).collect())
                .collect(),
            constraint,
            pairs: pairs.to_vec(),
        })
    }

    pub fn plot_tree(&mut self) -> String {
        self.apply(BuilderCall::PlotTree).expect("plotting never fails")
    }

    pub fn print_tree(&mut self) -> String {
        self.apply(BuilderCall::PrintTree).expect("printing never fails")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_tree;

    const MISSION: &str = "Reunite mom with her lost child";

    fn session() -> BuilderSession {
        BuilderSession::init(MISSION, Fleet::table_i()).unwrap()
    }

    #[test]
    fn init_creates_bare_root() {
        let s = session();
        assert_eq!(s.tree().len(), 1);
        assert_eq!(s.tree().root_node().name, MISSION);
        assert_eq!(BuilderSession::init("  ", Fleet::table_i()).unwrap_err(), BuildError::EmptyObjective);
        let mut a = session();
        let b = session();
        a.create_and_add_subtask(MISSION, false, "Locate the Lost Child", Constraint::And).unwrap();
        assert_eq!(b.tree().len(), 1);
    }

    #[test]
    fn create_and_add_errors() {
        let mut s = session();
        s.create_and_add_subtask(MISSION, false, "Locate the Lost Child", Constraint::And).unwrap();
        assert_eq!(
            s.create_and_add_subtask("Nonexistent", false, "X", Constraint::And).unwrap_err(),
            BuildError::NameNotFound("Nonexistent".into())
        );
        assert_eq!(
            s.create_and_add_subtask(MISSION, false, "Locate the Lost Child", Constraint::And)
                .unwrap_err(),
            BuildError::DuplicateName("Locate the Lost Child".into())
        );
        assert!(matches!(
            s.create_and_add_subtask(MISSION, false, "Other", Constraint::Xor).unwrap_err(),
            BuildError::ConstraintConflict { .. }
        ));
        s.create_and_add_subtask(MISSION, true, "Leaf", Constraint::And).unwrap();
        assert_eq!(
            s.create_and_add_subtask("Leaf", false, "Under leaf", Constraint::And).unwrap_err(),
            BuildError::NotComposite("Leaf".into())
        );
        assert_eq!(s.log().len(), 7);
        assert_eq!(s.tree().len(), 3);
    }

    #[test]
    fn add_multi_with_precedence() {
        let mut s = session();
        s.add_multi_subtasks(
            MISSION,
            &[false, false],
            &["Locate the Lost Child", "Reunite the child and mom"],
            Constraint::And,
            &[PrecedencePair::new("Locate the Lost Child", "Reunite the child and mom")],
        )
        .unwrap();
        assert_eq!(s.tree().root_node().children.len(), 2);
        assert_eq!(s.tree().precedence.len(), 1);
    }

    #[test]
    fn add_multi_is_atomic() {
        let mut s = session();
        let before = s.tree().clone();
        let err = s
            .add_multi_subtasks(MISSION, &[false], &["A", "B"], Constraint::And, &[])
            .unwrap_err();
        assert!(matches!(err, BuildError::Argument(_)));
        let err = s
            .add_multi_subtasks(
                MISSION,
                &[false, false],
                &["A", "B"],
                Constraint::And,
                &[PrecedencePair::new("A", "C")],
            )
            .unwrap_err();
        assert!(matches!(err, BuildError::Argument(_)));
        let err = s
            .add_multi_subtasks(MISSION, &[false, false], &["A", "a"], Constraint::And, &[])
            .unwrap_err();
        assert_eq!(err, BuildError::DuplicateName("a".into()));
        let err = s
            .add_multi_subtasks(
                MISSION,
                &[false, false],
                &["A", "B"],
                Constraint::And,
                &[PrecedencePair::new("A", "B"), PrecedencePair::new("B", "A")],
            )
            .unwrap_err();
        assert!(matches!(err, BuildError::PrecedenceCycle(_)));
        assert_eq!(s.tree(), &before);
    }

    #[test]
    fn attach_subtrees_and_resolve_loose_names() {
        let mut s = session();
        s.add_multi_subtasks(
            MISSION,
            &[false, false],
            &["Locate the Lost Child", "Reunite the child and mom"],
            Constraint::And,
            &[PrecedencePair::new("Locate the Lost Child", "Reunite the child and mom")],
        )
        .unwrap();
        s.attach_multi_subtrees("Locate the Lost Child", &["SearchTree"], &[&["Child"]], Constraint::And, &[])
            .unwrap();
        s.attach_multi_subtrees(
            "Reunite the Child with Mom",
            &["ReachAndTransportTree"],
            &[&["Child", "Mom"]],
            Constraint::And,
            &[],
        )
        .unwrap();
        assert!(validate_tree(s.tree()).complete);
        let text = s.print_tree();
        assert!(text.lines().any(|l| l.trim() == "Locate the Lost Child [AND]"));
    }

    #[test]
    fn attach_errors() {
        let mut s = session();
        let err = s
            .attach_multi_subtrees(MISSION, &["SearchTree"], &[&["A", "B"]], Constraint::And, &[])
            .unwrap_err();
        assert!(matches!(err, BuildError::Subtree(SubtreeError::Arity { .. })));
        let err = s
            .attach_multi_subtrees(MISSION, &["FlyTree"], &[&["A"]], Constraint::And, &[])
            .unwrap_err();
        assert_eq!(err, BuildError::NameNotFound("FlyTree".into()));
        let mut s = BuilderSession::init("m", Fleet::default()).unwrap();
        let err = s
            .attach_multi_subtrees("m", &["SearchTree"], &[&["cat"]], Constraint::And, &[])
            .unwrap_err();
        assert!(matches!(err, BuildError::Subtree(SubtreeError::RoutineInfeasible { .. })));
        assert_eq!(s.tree().len(), 1);
    }

    #[test]
    fn ambiguous_names_error() {
        let mut s = session();
        s.add_multi_subtasks(
            MISSION,
            &[false, false],
            &["Find the cat", "Find cat"],
            Constraint::And,
            &[],
        )
        .unwrap();
        assert!(matches!(
            resolve_name(s.tree(), "find a cat"),
            Err(BuildError::AmbiguousName { .. })
        ));
        assert!(resolve_name(s.tree(), "find the CAT").is_ok());
    }

    #[test]
    fn replay_reproduces_tree() {
        let mut s = session();
        s.add_multi_subtasks(MISSION, &[false, false], &["A", "B"], Constraint::And, &[]).unwrap();
        let _ = s.create_and_add_subtask("missing", false, "x", Constraint::And);
        s.attach_multi_subtrees("A", &["Follow"], &[&["Mom"]], Constraint::Xor, &[]).unwrap();
        let replayed = BuilderSession::replay(Fleet::table_i(), s.log()).unwrap();
        assert_eq!(replayed.tree(), s.tree());
        assert_eq!(replayed.log().len(), s.log().len());
    }

    #[test]
    fn single_root_renders() {
        let mut s = session();
        let text = s.print_tree();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text, s.print_tree());
        let dot = s.plot_tree();
        assert_eq!(dot.matches("shape=").count(), 1);
    }
}
