//! Decomposition of a task tree into ranked multi-robot task allocation
//! alternatives.
//!
//! The search is bottom-up: a primitive yields itself, an AND node takes the
//! cartesian product of its children's alternatives and drops combinations
//! that need more robots than the fleet has, an XOR node takes the union, and
//! every node keeps only its `rho` highest-utility alternatives. Pruning is
//! greedy, so a bounded `rho` can miss the global optimum when resources are
//! tight.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{
    compute_utility, validate_tree, Constraint, Fleet, ModelError, NodeId, NodeRef, PrimitiveAction,
    TaskTree, UtilityModel,
};

pub use oracle::{brute_force_alternatives, satisfies, ORACLE_LEAF_LIMIT};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("tree is not decomposable ({0})")]
    Validation(String),
    #[error("node '{0}' does not exist")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tree has {leaves} primitive leaves; the exhaustive search is limited to {limit}")]
    TooLarge { leaves: usize, limit: usize },
}

/// Maximum number of alternatives kept per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rho {
    Bounded(NonZeroUsize),
    Unbounded,
}

impl Rho {
    pub const DEFAULT: Rho = Rho::Bounded(NonZeroUsize::new(10).unwrap());

    pub fn bounded(n: usize) -> Option<Rho> {
        NonZeroUsize::new(n).map(Rho::Bounded)
    }

    pub fn limit(self) -> Option<usize> {
        match self {
            Rho::Bounded(n) => Some(n.get()),
            Rho::Unbounded => None,
        }
    }
}

impl Default for Rho {
    fn default() -> Self {
        Rho::DEFAULT
    }
}

impl fmt::Display for Rho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho::Bounded(n) => write!(f, "{n}"),
            Rho::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl FromStr for Rho {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unbounded" | "inf" | "none" => Ok(Rho::Unbounded),
            other => other
                .parse::<usize>()
                .ok()
                .and_then(Rho::bounded)
                .ok_or_else(|| format!("rho must be a positive integer or 'unbounded', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RobotInstance {
    #[serde(rename = "type")]
    pub robot_type: String,
    /// 1-based index among the instances of this type.
    pub instance: usize,
}

impl fmt::Display for RobotInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.robot_type, self.instance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub robot: RobotInstance,
    pub node: NodeId,
    pub action: PrimitiveAction,
}

/// Robot instances consumed, per robot type.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceUsage(pub BTreeMap<String, usize>);

impl ResourceUsage {
    pub fn get(&self, robot_type: &str) -> usize {
        self.0.get(robot_type).copied().unwrap_or(0)
    }

    pub fn add(&mut self, robot_type: &str, n: usize) {
        *self.0.entry(robot_type.to_string()).or_default() += n;
    }

    pub fn merged(&self, other: &ResourceUsage) -> ResourceUsage {
        let mut out = self.clone();
        for (t, n) in &other.0 {
            out.add(t, *n);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.0.values().all(|n| *n == 0)
    }
}

/// One instance of the action's robot type.
pub fn check_consumption(action: &PrimitiveAction, fleet: &Fleet) -> Result<ResourceUsage, EngineError> {
    if fleet.robot(&action.robot_type).is_none() {
        return Err(ModelError::UnknownRobotType(action.robot_type.clone()).into());
    }
    let mut usage = ResourceUsage::default();
    usage.add(&action.robot_type, 1);
    Ok(usage)
}

/// True when some robot type is used more often than the fleet provides.
pub fn resource_fail(usage: &ResourceUsage, fleet: &Fleet) -> bool {
    usage.0.iter().any(|(t, n)| *n > fleet.count(t))
}

/// An unordered set of robot-bound actions that completes a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    /// Sorted by the tree's depth-first order.
    pub assignments: Vec<Assignment>,
    pub usage: ResourceUsage,
    pub utility: f64,
}

impl Alternative {
    /// Actions grouped per robot instance, robots in order of their first
    /// action.
    pub fn robots(&self) -> Vec<(RobotInstance, Vec<&Assignment>)> {
        let mut groups: Vec<(RobotInstance, Vec<&Assignment>)> = Vec::new();
        for a in &self.assignments {
            match groups.iter_mut().find(|(r, _)| *r == a.robot) {
                Some((_, list)) => list.push(a),
                None => groups.push((a.robot.clone(), vec![a])),
            }
        }
        groups
    }

    pub fn instances(&self) -> BTreeSet<&RobotInstance> {
        self.assignments.iter().map(|a| &a.robot).collect()
    }

    /// Deterministic tie-break key: sorted (robot type, action name, node).
    pub fn tie_key(&self) -> Vec<(&str, &str, &str)> {
        let mut key: Vec<_> = self
            .assignments
            .iter()
            .map(|a| (a.robot.robot_type.as_str(), a.action.action_name.as_str(), a.node.as_str()))
            .collect();
        key.sort();
        key
    }
}

/// Utilities are compared on a 1e-9 grid so that equal sums reached in a
/// different order still tie.
pub(crate) fn utility_rank(u: f64) -> i64 {
    (u * 1e9).round() as i64
}

pub(crate) fn rank_order(a: &Alternative, b: &Alternative) -> std::cmp::Ordering {
    utility_rank(b.utility)
        .cmp(&utility_rank(a.utility))
        .then_with(|| a.tie_key().cmp(&b.tie_key()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// Best first.
    pub alternatives: Vec<Alternative>,
    /// AND nodes at which every combination of child alternatives exceeded
    /// the fleet.
    pub failures: Vec<NodeRef>,
    /// Number of alternatives each visited node kept after pruning.
    pub kept: BTreeMap<NodeId, usize>,
}

impl Decomposition {
    pub fn is_failure(&self) -> bool {
        self.alternatives.is_empty()
    }
}

struct Indexed<'a> {
    tree: &'a TaskTree,
    order: Vec<NodeId>,
    position: BTreeMap<NodeId, usize>,
    /// Per node position: binding unit position for primitives.
    unit_of: BTreeMap<usize, usize>,
    /// Robot type of each binding unit.
    unit_type: BTreeMap<usize, String>,
    utility: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone)]
struct Partial {
    prims: Vec<usize>,
    units: Vec<usize>,
    utility: f64,
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

struct Search<'a> {
    ix: Indexed<'a>,
    fleet: &'a Fleet,
    model: &'a UtilityModel,
    rho: Rho,
    failures: Vec<NodeRef>,
    kept: BTreeMap<NodeId, usize>,
}

impl Search<'_> {
    fn usage(&self, units: &[usize]) -> ResourceUsage {
        let mut usage = ResourceUsage::default();
        for u in units {
            usage.add(&self.ix.unit_type[u], 1);
        }
        usage
    }

    fn finalize(&self, p: &Partial) -> Result<Alternative, EngineError> {
        let mut next_index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut instance_of: BTreeMap<usize, RobotInstance> = BTreeMap::new();
        for u in &p.units {
            let robot_type = self.ix.unit_type[u].as_str();
            let n = next_index.entry(robot_type).or_insert(0);
            *n += 1;
            instance_of.insert(
                *u,
                RobotInstance {
                    robot_type: robot_type.to_string(),
                    instance: *n,
                },
            );
        }
        let mut assignments = Vec::with_capacity(p.prims.len());
        let mut utility = 0.0;
        for prim in &p.prims {
            let id = &self.ix.order[*prim];
            let action = self.ix.tree.nodes[id].action.clone().expect("validated");
            utility += compute_utility(&action, self.model)?;
            assignments.push(Assignment {
                robot: instance_of[&self.ix.unit_of[prim]].clone(),
                node: id.clone(),
                action,
            });
        }
        Ok(Alternative {
            assignments,
            usage: self.usage(&p.units),
            utility,
        })
    }

    fn tie_key(&self, p: &Partial) -> Vec<(String, String, String)> {
        let mut key: Vec<_> = p
            .prims
            .iter()
            .map(|prim| {
                let id = &self.ix.order[*prim];
                let action = self.ix.tree.nodes[id].action.as_ref().expect("validated");
                (action.robot_type.clone(), action.action_name.clone(), id.0.clone())
            })
            .collect();
        key.sort();
        key
    }

    fn rank(&self, list: &mut Vec<Partial>) {
        let mut keyed: Vec<_> = list
            .drain(..)
            .map(|p| ((-utility_rank(p.utility), self.tie_key(&p)), p))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        list.extend(keyed.into_iter().map(|(_, p)| p));
    }

    fn alternatives(&mut self, id: &NodeId) -> Vec<Partial> {
        let pos = self.ix.position[id];
        let node = &self.ix.tree.nodes[id];
        let mut list = if node.is_primitive() {
            let action = node.action.as_ref().expect("validated");
            if self.fleet.count(&action.robot_type) == 0 {
                Vec::new()
            } else {
                vec![Partial {
                    prims: vec![pos],
                    units: vec![self.ix.unit_of[&pos]],
                    utility: self.ix.utility[&pos],
                }]
            }
        } else {
            let children: Vec<Vec<Partial>> =
                node.children.iter().map(|c| self.alternatives(c)).collect();
            match node.constraint.expect("validated") {
                Constraint::Xor => children.into_iter().flatten().collect(),
                Constraint::And => {
                    let mut acc = vec![Partial {
                        prims: Vec::new(),
                        units: Vec::new(),
                        utility: 0.0,
                    }];
                    let mut dropped = false;
                    for child in &children {
                        let mut next = Vec::with_capacity(acc.len() * child.len());
                        for a in &acc {
                            for b in child {
                                let units = merge_sorted(&a.units, &b.units);
                                if resource_fail(&self.usage(&units), self.fleet) {
                                    dropped = true;
                                    continue;
                                }
                                next.push(Partial {
                                    prims: merge_sorted(&a.prims, &b.prims),
                                    units,
                                    utility: a.utility + b.utility,
                                });
                            }
                        }
                        acc = next;
                        if acc.is_empty() {
                            break;
                        }
                    }
                    if acc.is_empty() && dropped {
                        self.failures.push(NodeRef {
                            id: id.clone(),
                            name: node.name.clone(),
                        });
                    }
                    acc
                }
            }
        };
        self.rank(&mut list);
        if let Some(limit) = self.rho.limit() {
            list.truncate(limit);
        }
        self.kept.insert(id.clone(), list.len());
        list
    }
}

fn index<'a>(tree: &'a TaskTree, model: &UtilityModel, fleet: &Fleet) -> Result<Indexed<'a>, EngineError> {
    let order = tree.preorder();
    let position: BTreeMap<NodeId, usize> =
        order.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
    let parents = tree.parents();
    let mut unit_of = BTreeMap::new();
    let mut unit_type = BTreeMap::new();
    let mut utility = BTreeMap::new();
    for (i, id) in order.iter().enumerate() {
        let node = &tree.nodes[id];
        let Some(action) = &node.action else { continue };
        let unit = position[&tree.binding_unit_with(id, &parents)];
        unit_of.insert(i, unit);
        unit_type.insert(unit, action.robot_type.clone());
        if fleet.count(&action.robot_type) > 0 {
            utility.insert(i, compute_utility(action, model)?);
        }
    }
    Ok(Indexed {
        tree,
        order,
        position,
        unit_of,
        unit_type,
        utility,
    })
}

/// Ranked alternatives for the subtree rooted at `node`.
pub fn get_alternatives(
    tree: &TaskTree,
    node: &NodeId,
    fleet: &Fleet,
    model: &UtilityModel,
    rho: Rho,
) -> Result<Decomposition, EngineError> {
    let report = validate_tree(tree);
    if !report.complete {
        return Err(EngineError::Validation(report.summary()));
    }
    if !tree.nodes.contains_key(node) {
        return Err(EngineError::UnknownNode(node.clone()));
    }
    let mut search = Search {
        ix: index(tree, model, fleet)?,
        fleet,
        model,
        rho,
        failures: Vec::new(),
        kept: BTreeMap::new(),
    };
    let partials = search.alternatives(node);
    let alternatives = partials
        .iter()
        .map(|p| search.finalize(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Decomposition {
        alternatives,
        failures: search.failures,
        kept: search.kept,
    })
}

/// Alternatives for the whole tree.
pub fn decompose(
    tree: &TaskTree,
    fleet: &Fleet,
    model: &UtilityModel,
    rho: Rho,
) -> Result<Decomposition, EngineError> {
    get_alternatives(tree, &tree.root, fleet, model, rho)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub node: NodeId,
    #[serde(flatten)]
    pub action: PrimitiveAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotActions {
    #[serde(flatten)]
    pub robot: RobotInstance,
    pub actions: Vec<ActionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAlternative {
    pub rank: usize,
    pub utility: f64,
    pub usage: ResourceUsage,
    pub robots: Vec<RobotActions>,
}

/// On-disk form of a ranked alternatives list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativesFile {
    pub objective: String,
    pub rho: String,
    pub alternatives: Vec<RankedAlternative>,
    #[serde(default)]
    pub failures: Vec<NodeRef>,
}

impl AlternativesFile {
    pub fn new(tree: &TaskTree, rho: Rho, decomposition: &Decomposition) -> Self {
        let alternatives = decomposition
            .alternatives
            .iter()
            .enumerate()
            .map(|(i, alt)| RankedAlternative {
                rank: i + 1,
                utility: alt.utility,
                usage: alt.usage.clone(),
                robots: alt
                    .robots()
                    .into_iter()
                    .map(|(robot, actions)| RobotActions {
                        robot,
                        actions: actions
                            .into_iter()
                            .map(|a| ActionEntry {
                                node: a.node.clone(),
                                action: a.action.clone(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        Self {
            objective: tree.objective.clone(),
            rho: rho.to_string(),
            alternatives,
            failures: decomposition.failures.clone(),
        }
    }

    /// Rebuilds the alternatives, restoring depth-first assignment order from
    /// `tree`.
    pub fn alternatives(&self, tree: &TaskTree) -> Vec<Alternative> {
        let position: BTreeMap<NodeId, usize> = tree
            .preorder()
            .into_iter()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        self.alternatives
            .iter()
            .map(|ranked| {
                let mut assignments: Vec<Assignment> = ranked
                    .robots
                    .iter()
                    .flat_map(|r| {
                        r.actions.iter().map(|a| Assignment {
                            robot: r.robot.clone(),
                            node: a.node.clone(),
                            action: a.action.clone(),
                        })
                    })
                    .collect();
                assignments.sort_by_key(|a| position.get(&a.node).copied().unwrap_or(usize::MAX));
                Alternative {
                    assignments,
                    usage: ranked.usage.clone(),
                    utility: ranked.utility,
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("alternatives serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }
}
