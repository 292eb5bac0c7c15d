//! Predefined capability subtrees.
//!
//! Each routine expands to an XOR over one branch per eligible robot type.
//! A branch is an AND node marked with its robot type, so every action in it
//! is executed by the same robot instance; consecutive actions are chained by
//! precedence edges. Two-stage routines (search then follow, reach then
//! transport) keep both stages on one robot and order the stages.

use serde::{Deserialize, Serialize};

use crate::model::{Constraint, Fleet, NodeId, PrimitiveAction, RobotSpec, TaskNode, TaskTree};

pub const SEARCH: &str = "Search";
pub const FOLLOW: &str = "Follow";
pub const REACH: &str = "Reach";
pub const CARRY: &str = "Carry";
pub const MESSAGE_DISPLAY: &str = "Message Display";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubtreeError {
    #[error("unknown subtree routine '{0}'")]
    UnknownRoutine(String),
    #[error("{routine} takes {expected} argument(s), got {got}")]
    Arity {
        routine: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{routine}: argument {index} is empty")]
    EmptyArgument { routine: &'static str, index: usize },
    #[error("{routine} is infeasible: no robot in the fleet has {missing}")]
    RoutineInfeasible { routine: &'static str, missing: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Routine {
    Search,
    Follow,
    Reach,
    SearchAndFollow,
    Transport,
    ReachAndTransport,
}

impl Routine {
    pub const ALL: [Routine; 6] = [
        Routine::Search,
        Routine::Follow,
        Routine::Reach,
        Routine::SearchAndFollow,
        Routine::Transport,
        Routine::ReachAndTransport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Routine::Search => "Search",
            Routine::Follow => "Follow",
            Routine::Reach => "Reach",
            Routine::SearchAndFollow => "SearchAndFollow",
            Routine::Transport => "Transport",
            Routine::ReachAndTransport => "ReachAndTransport",
        }
    }

    /// Name under which the routine is offered to the LLM.
    pub fn tool_name(self) -> String {
        format!("{}Tree", self.name())
    }

    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            Routine::Transport | Routine::ReachAndTransport => &["agent", "destination"],
            _ => &["agent"],
        }
    }

    pub fn arity(self) -> usize {
        self.parameters().len()
    }

    pub fn description(self) -> &'static str {
        match self {
            Routine::Search => "Search for a specific agent.",
            Routine::Follow => "Follow a specific agent.",
            Routine::Reach => "Reach a specific agent.",
            Routine::SearchAndFollow => "Search for and then follow an agent.",
            Routine::Transport => "Transport an agent to a destination.",
            Routine::ReachAndTransport => {
                "Reach an agent and then transport them to a destination."
            }
        }
    }

    /// Capabilities the routine draws on. For the transport stage either
    /// `Carry` or `Message Display` suffices.
    pub fn capabilities(self) -> &'static [&'static str] {
        match self {
            Routine::Search => &[SEARCH],
            Routine::Follow => &[FOLLOW],
            Routine::Reach => &[REACH],
            Routine::SearchAndFollow => &[SEARCH, FOLLOW],
            Routine::Transport => &[CARRY, MESSAGE_DISPLAY],
            Routine::ReachAndTransport => &[REACH, CARRY, MESSAGE_DISPLAY],
        }
    }

    fn missing_description(self) -> String {
        match self {
            Routine::SearchAndFollow => "both Search and Follow".to_string(),
            Routine::Transport => "Carry or Message Display".to_string(),
            Routine::ReachAndTransport => "Reach together with Carry or Message Display".to_string(),
            other => other.capabilities()[0].to_string(),
        }
    }

    /// Accepts `Search`, `SearchTree`, `SearchSubtree` (any case).
    pub fn parse(name: &str) -> Option<Routine> {
        let lowered = name.trim().to_ascii_lowercase();
        let stem = lowered
            .strip_suffix("subtree")
            .or_else(|| lowered.strip_suffix("tree"))
            .unwrap_or(&lowered);
        Routine::ALL
            .into_iter()
            .find(|r| r.name().to_ascii_lowercase() == stem)
    }
}

/// How a transport stage moves the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TransportMode {
    Carry,
    Lead,
}

impl TransportMode {
    fn capability(self) -> &'static str {
        match self {
            TransportMode::Carry => CARRY,
            TransportMode::Lead => MESSAGE_DISPLAY,
        }
    }

    fn label(self) -> &'static str {
        match self {
            TransportMode::Carry => "carry",
            TransportMode::Lead => "message",
        }
    }
}

/// Robot-branch realizations of a routine, in fleet order.
fn branches(routine: Routine, fleet: &Fleet) -> Vec<(&RobotSpec, Option<TransportMode>)> {
    let modes = [TransportMode::Carry, TransportMode::Lead];
    let mut out = Vec::new();
    for robot in &fleet.robots {
        match routine {
            Routine::Search | Routine::Follow | Routine::Reach => {
                if robot.has_capability(routine.capabilities()[0]) {
                    out.push((robot, None));
                }
            }
            Routine::SearchAndFollow => {
                if robot.has_capability(SEARCH) && robot.has_capability(FOLLOW) {
                    out.push((robot, None));
                }
            }
            Routine::Transport => {
                for mode in modes {
                    if robot.has_capability(mode.capability()) {
                        out.push((robot, Some(mode)));
                    }
                }
            }
            Routine::ReachAndTransport => {
                if robot.has_capability(REACH) {
                    for mode in modes {
                        if robot.has_capability(mode.capability()) {
                            out.push((robot, Some(mode)));
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtreeSpec {
    pub routine: Routine,
    pub args: Vec<String>,
}

impl SubtreeSpec {
    pub fn new(routine: Routine, args: Vec<String>) -> Result<Self, SubtreeError> {
        if args.len() != routine.arity() {
            return Err(SubtreeError::Arity {
                routine: routine.name(),
                expected: routine.arity(),
                got: args.len(),
            });
        }
        if let Some(index) = args.iter().position(|a| bare(a).is_empty()) {
            return Err(SubtreeError::EmptyArgument {
                routine: routine.name(),
                index,
            });
        }
        Ok(Self { routine, args })
    }

    pub fn parse(name: &str, args: Vec<String>) -> Result<Self, SubtreeError> {
        let routine = Routine::parse(name).ok_or_else(|| SubtreeError::UnknownRoutine(name.to_string()))?;
        Self::new(routine, args)
    }

    pub fn required_capabilities(&self) -> &'static [&'static str] {
        self.routine.capabilities()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutineInfo {
    pub name: String,
    pub tool_name: String,
    pub arity: usize,
    pub parameters: Vec<String>,
    pub required_capabilities: Vec<String>,
    pub description: String,
}

pub fn list_routines() -> Vec<RoutineInfo> {
    Routine::ALL
        .into_iter()
        .map(|r| RoutineInfo {
            name: r.name().to_string(),
            tool_name: r.tool_name(),
            arity: r.arity(),
            parameters: r.parameters().iter().map(|p| p.to_string()).collect(),
            required_capabilities: r.capabilities().iter().map(|c| c.to_string()).collect(),
            description: r.description().to_string(),
        })
        .collect()
}

/// Routines with at least one eligible robot in `fleet`.
pub fn eligible_routines(fleet: &Fleet) -> Vec<Routine> {
    Routine::ALL
        .into_iter()
        .filter(|r| !branches(*r, fleet).is_empty())
        .collect()
}

fn bare(arg: &str) -> String {
    crate::model::normalize_name(arg)
}

fn braced(arg: &str) -> String {
    format!("{{{}}}", bare(arg))
}

fn search_script(agent: &str) -> Vec<String> {
    vec![
        format!("Get search path to find {agent}"),
        format!("Detect {agent}"),
        format!("Report detection of {agent} to server"),
    ]
}

fn follow_script(agent: &str) -> Vec<String> {
    vec![
        format!("Get follow path for {agent}"),
        format!("Follow {agent}"),
        "Send location to server".to_string(),
    ]
}

fn reach_script(agent: &str) -> Vec<String> {
    vec![
        format!("Get {agent} location to reach"),
        format!("Get to {agent} location"),
    ]
}

fn transport_script(mode: TransportMode, agent: &str, destination: &str, robot: &str) -> Vec<String> {
    match mode {
        TransportMode::Carry => vec![
            format!("Carry {agent}"),
            format!("Get to {destination} location"),
        ],
        TransportMode::Lead => vec![
            format!("Display message to {agent} to follow {robot} to {destination}"),
            format!("Get to {destination} location"),
        ],
    }
}

struct FragmentBuilder {
    tree: TaskTree,
}

impl FragmentBuilder {
    fn composite(&mut self, parent: &NodeId, name: &str, constraint: Constraint) -> NodeId {
        let name = self.tree.unique_name(name);
        self.tree
            .push_child(parent, TaskNode::composite(name, Some(constraint)))
    }

    /// Adds `actions` as chained primitives under `parent`.
    fn script(&mut self, parent: &NodeId, robot: &str, capability: &str, subject: &str, actions: Vec<String>) {
        let mut previous: Option<NodeId> = None;
        for action_name in actions {
            let name = self.tree.unique_name(&format!("{action_name} [{robot}]"));
            let action = PrimitiveAction::new(action_name, robot, capability).with_subject(subject);
            let id = self.tree.push_child(parent, TaskNode::primitive(name, Some(action)));
            if let Some(prev) = previous.replace(id.clone()) {
                self.tree.add_precedence(prev, id);
            }
        }
    }
}

pub fn generate_subtree(spec: &SubtreeSpec, fleet: &Fleet) -> Result<TaskTree, SubtreeError> {
    let routine = spec.routine;
    let options = branches(routine, fleet);
    if options.is_empty() {
        return Err(SubtreeError::RoutineInfeasible {
            routine: routine.name(),
            missing: routine.missing_description(),
        });
    }
    let agent = braced(&spec.args[0]);
    let destination = spec.args.get(1).map(|d| braced(d));
    let title = match &destination {
        Some(dest) => format!("{} {agent} to {dest}", routine.name()),
        None => format!("{} {agent}", routine.name()),
    };

    let mut b = FragmentBuilder {
        tree: TaskTree::new(title.clone()),
    };
    let root = b.tree.root.clone();
    b.tree.node_mut(&root).expect("root").constraint = Some(Constraint::Xor);
    b.tree.objective = title.clone();

    for (robot, mode) in options {
        let robot_name = robot.type_name.as_str();
        let label = match mode {
            Some(mode) => format!("{title} [{robot_name}, {}]", mode.label()),
            None => format!("{title} [{robot_name}]"),
        };
        let branch = b.composite(&root, &label, Constraint::And);
        b.tree.node_mut(&branch).expect("branch").robot_branch = Some(robot_name.to_string());

        match routine {
            Routine::Search => b.script(&branch, robot_name, SEARCH, &agent, search_script(&agent)),
            Routine::Follow => b.script(&branch, robot_name, FOLLOW, &agent, follow_script(&agent)),
            Routine::Reach => b.script(&branch, robot_name, REACH, &agent, reach_script(&agent)),
            Routine::Transport => {
                let mode = mode.expect("transport branch has a mode");
                let dest = destination.as_deref().expect("arity checked");
                b.script(
                    &branch,
                    robot_name,
                    mode.capability(),
                    &agent,
                    transport_script(mode, &agent, dest, robot_name),
                );
            }
            Routine::SearchAndFollow => {
                let first = b.composite(&branch, &format!("Search {agent} [{robot_name}]"), Constraint::And);
                b.script(&first, robot_name, SEARCH, &agent, search_script(&agent));
                let second = b.composite(&branch, &format!("Follow {agent} [{robot_name}]"), Constraint::And);
                b.script(&second, robot_name, FOLLOW, &agent, follow_script(&agent));
                b.tree.add_precedence(first, second);
            }
            Routine::ReachAndTransport => {
                let mode = mode.expect("transport branch has a mode");
                let dest = destination.as_deref().expect("arity checked");
                let first = b.composite(
                    &branch,
                    &format!("Reach {agent} [{robot_name}, {}]", mode.label()),
                    Constraint::And,
                );
                b.script(&first, robot_name, REACH, &agent, reach_script(&agent));
                let second = b.composite(
                    &branch,
                    &format!("Transport {agent} to {dest} [{robot_name}, {}]", mode.label()),
                    Constraint::And,
                );
                b.script(
                    &second,
                    robot_name,
                    mode.capability(),
                    &agent,
                    transport_script(mode, &agent, dest, robot_name),
                );
                b.tree.add_precedence(first, second);
            }
        }
    }
    Ok(b.tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_tree, RobotSpec};

    fn spec(routine: Routine, args: &[&str]) -> SubtreeSpec {
        SubtreeSpec::new(routine, args.iter().map(|a| a.to_string()).collect()).unwrap()
    }

    fn branch_robots(tree: &TaskTree) -> Vec<String> {
        tree.root_node()
            .children
            .iter()
            .map(|c| tree.nodes[c].robot_branch.clone().unwrap())
            .collect()
    }

    #[test]
    fn follow_has_four_branches_on_table_i() {
        let tree = generate_subtree(&spec(Routine::Follow, &["agent"]), &Fleet::table_i()).unwrap();
        assert_eq!(tree.root_node().constraint, Some(Constraint::Xor));
        assert_eq!(tree.root_node().name, "Follow {agent}");
        assert_eq!(
            branch_robots(&tree),
            ["Mobile Scooter", "Tele-Robot", "Transportation Robot", "Social Robot"]
        );
        assert!(validate_tree(&tree).complete);
    }

    #[test]
    fn search_without_capability_is_infeasible() {
        let fleet = Fleet {
            robots: vec![RobotSpec::new("Walker", 1).with_capability("Follow", 1.0)],
        };
        let err = generate_subtree(&spec(Routine::Search, &["cat"]), &fleet).unwrap_err();
        assert_eq!(
            err,
            SubtreeError::RoutineInfeasible {
                routine: "Search",
                missing: "Search".into()
            }
        );
    }

    #[test]
    fn reach_and_transport_branches() {
        let tree =
            generate_subtree(&spec(Routine::ReachAndTransport, &["Child", "Mom"]), &Fleet::table_i()).unwrap();
        assert_eq!(branch_robots(&tree), ["Transportation Robot", "Social Robot"]);
        let carry_branch = &tree.root_node().children[0];
        let actions: Vec<_> = tree
            .primitives_under(carry_branch)
            .iter()
            .map(|id| tree.nodes[id].action.clone().unwrap().action_name)
            .collect();
        assert_eq!(
            actions,
            [
                "Get {Child} location to reach",
                "Get to {Child} location",
                "Carry {Child}",
                "Get to {Mom} location"
            ]
        );
        let lead_branch = &tree.root_node().children[1];
        let actions: Vec<_> = tree
            .primitives_under(lead_branch)
            .iter()
            .map(|id| tree.nodes[id].action.clone().unwrap().action_name)
            .collect();
        assert_eq!(actions[2], "Display message to {Child} to follow Social Robot to {Mom}");
        assert!(validate_tree(&tree).complete);
    }

    #[test]
    fn catalog() {
        let catalog = list_routines();
        assert_eq!(catalog.len(), 6);
        let transport = catalog.iter().find(|r| r.name == "Transport").unwrap();
        assert_eq!(transport.arity, 2);
        assert_eq!(catalog, list_routines());
    }

    #[test]
    fn routine_name_aliases() {
        assert_eq!(Routine::parse("SearchTree"), Some(Routine::Search));
        assert_eq!(Routine::parse("reachandtransportTree"), Some(Routine::ReachAndTransport));
        assert_eq!(Routine::parse("FollowSubtree"), Some(Routine::Follow));
        assert_eq!(Routine::parse("Fly"), None);
    }

    #[test]
    fn arity_is_enforced() {
        assert!(matches!(
            SubtreeSpec::parse("SearchTree", vec!["A".into(), "B".into()]),
            Err(SubtreeError::Arity { expected: 1, got: 2, .. })
        ));
        assert!(matches!(
            SubtreeSpec::parse("Transport", vec!["A".into(), " {} ".into()]),
            Err(SubtreeError::EmptyArgument { index: 1, .. })
        ));
    }

    #[test]
    fn braces_are_not_doubled() {
        let tree = generate_subtree(&spec(Routine::Search, &["{cat}"]), &Fleet::table_i()).unwrap();
        assert_eq!(tree.root_node().name, "Search {cat}");
    }
}
