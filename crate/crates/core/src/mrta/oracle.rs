//! Exhaustive reference enumeration and an independent satisfaction check,
//! used to cross-examine the pruned search.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{compute_utility, Constraint, Fleet, NodeId, TaskTree, UtilityModel};

use super::{rank_order, Alternative, Assignment, EngineError, ResourceUsage, RobotInstance};

pub const ORACLE_LEAF_LIMIT: usize = 20;

/// Every way of completing `tree`'s root: all children at AND nodes, exactly
/// one at XOR nodes, with every selection checked for an injective binding of
/// branches to robot instances. Sorted best first.
pub fn brute_force_alternatives(
    tree: &TaskTree,
    fleet: &Fleet,
    model: &UtilityModel,
) -> Result<Vec<Alternative>, EngineError> {
    let leaves = tree.nodes.values().filter(|n| n.is_primitive()).count();
    if leaves > ORACLE_LEAF_LIMIT {
        return Err(EngineError::TooLarge {
            leaves,
            limit: ORACLE_LEAF_LIMIT,
        });
    }
    let report = crate::model::validate_tree(tree);
    if !report.complete {
        return Err(EngineError::Validation(report.summary()));
    }

    // Worklist enumeration of selections.
    let mut selections: Vec<BTreeSet<NodeId>> = Vec::new();
    let mut states: Vec<(BTreeSet<NodeId>, Vec<NodeId>)> = vec![(BTreeSet::new(), vec![tree.root.clone()])];
    while let Some((chosen, mut pending)) = states.pop() {
        let Some(next) = pending.pop() else {
            selections.push(chosen);
            continue;
        };
        let node = &tree.nodes[&next];
        if node.is_primitive() {
            let mut chosen = chosen;
            chosen.insert(next);
            states.push((chosen, pending));
            continue;
        }
        match node.constraint {
            Some(Constraint::And) => {
                pending.extend(node.children.iter().cloned());
                states.push((chosen, pending));
            }
            Some(Constraint::Xor) => {
                for child in &node.children {
                    let mut p = pending.clone();
                    p.push(child.clone());
                    states.push((chosen.clone(), p));
                }
            }
            None => unreachable!("validated trees have no bare composites"),
        }
    }

    let parent: BTreeMap<&NodeId, &NodeId> = tree
        .nodes
        .iter()
        .flat_map(|(id, n)| n.children.iter().map(move |c| (c, id)))
        .collect();
    let order: BTreeMap<NodeId, usize> = tree
        .preorder()
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i))
        .collect();

    let mut out = Vec::new();
    for selection in selections {
        // Binding unit: nearest ancestor branch of the same robot type.
        let mut unit_of: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        for prim in &selection {
            let robot_type = &tree.nodes[prim].action.as_ref().expect("validated").robot_type;
            let mut unit = prim.clone();
            let mut cursor = prim;
            while let Some(p) = parent.get(cursor) {
                if tree.nodes[*p].robot_branch.as_ref() == Some(robot_type) {
                    unit = (*p).clone();
                    break;
                }
                cursor = p;
            }
            unit_of.insert(prim.clone(), unit);
        }
        let mut units: Vec<(NodeId, String)> = unit_of
            .iter()
            .map(|(prim, unit)| {
                let robot_type = tree.nodes[prim].action.as_ref().unwrap().robot_type.clone();
                (unit.clone(), robot_type)
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        units.sort_by_key(|(u, _)| order[u]);

        let Some(binding) = bind(&units, fleet) else { continue };

        // Relabel instances per type by first appearance.
        let mut relabel: BTreeMap<(String, usize), usize> = BTreeMap::new();
        let mut seen_per_type: BTreeMap<String, usize> = BTreeMap::new();
        for ((_, robot_type), instance) in units.iter().zip(&binding) {
            relabel.entry((robot_type.clone(), *instance)).or_insert_with(|| {
                let n = seen_per_type.entry(robot_type.clone()).or_insert(0);
                *n += 1;
                *n
            });
        }
        let instance_of: BTreeMap<&NodeId, RobotInstance> = units
            .iter()
            .zip(&binding)
            .map(|((unit, robot_type), instance)| {
                (
                    unit,
                    RobotInstance {
                        robot_type: robot_type.clone(),
                        instance: relabel[&(robot_type.clone(), *instance)],
                    },
                )
            })
            .collect();

        let mut prims: Vec<&NodeId> = selection.iter().collect();
        prims.sort_by_key(|p| order[*p]);
        let mut utility = 0.0;
        let mut assignments = Vec::new();
        for prim in prims {
            let action = tree.nodes[prim].action.clone().unwrap();
            utility += compute_utility(&action, model)?;
            assignments.push(Assignment {
                robot: instance_of[&unit_of[prim]].clone(),
                node: prim.clone(),
                action,
            });
        }
        let mut usage = ResourceUsage::default();
        for (_, robot_type) in &units {
            usage.add(robot_type, 1);
        }
        out.push(Alternative {
            assignments,
            usage,
            utility,
        });
    }
    out.sort_by(rank_order);
    Ok(out)
}

/// Assigns each unit a distinct instance (1-based) of its type, trying lower
/// indices first. `None` when the fleet is too small.
fn bind(units: &[(NodeId, String)], fleet: &Fleet) -> Option<Vec<usize>> {
    fn go(i: usize, units: &[(NodeId, String)], fleet: &Fleet, used: &mut BTreeSet<(String, usize)>, out: &mut Vec<usize>) -> bool {
        if i == units.len() {
            return true;
        }
        let robot_type = &units[i].1;
        for instance in 1..=fleet.count(robot_type) {
            if used.insert((robot_type.clone(), instance)) {
                out.push(instance);
                if go(i + 1, units, fleet, used, out) {
                    return true;
                }
                out.pop();
                used.remove(&(robot_type.clone(), instance));
            }
        }
        false
    }
    let mut out = Vec::new();
    go(0, units, fleet, &mut BTreeSet::new(), &mut out).then_some(out)
}

/// Whether the actions of `alt` complete `node`: at AND nodes every child is
/// completed, at XOR nodes exactly one child is completed and the others are
/// untouched, and no action lies outside the chosen structure.
pub fn satisfies(tree: &TaskTree, node: &NodeId, alt: &Alternative) -> bool {
    let used: BTreeSet<&NodeId> = alt.assignments.iter().map(|a| &a.node).collect();
    if used.len() != alt.assignments.len() {
        return false;
    }
    let within: BTreeSet<NodeId> = tree.primitives_under(node).into_iter().collect();
    if used.iter().any(|n| !within.contains(*n)) {
        return false;
    }
    fn touched(tree: &TaskTree, id: &NodeId, used: &BTreeSet<&NodeId>) -> bool {
        tree.primitives_under(id).iter().any(|p| used.contains(p))
    }
    fn complete(tree: &TaskTree, id: &NodeId, used: &BTreeSet<&NodeId>) -> bool {
        let n = &tree.nodes[id];
        if n.is_primitive() {
            return used.contains(id);
        }
        match n.constraint {
            Some(Constraint::And) => n.children.iter().all(|c| complete(tree, c, used)),
            Some(Constraint::Xor) => {
                let hit: Vec<_> = n.children.iter().filter(|c| touched(tree, c, used)).collect();
                hit.len() == 1 && complete(tree, hit[0], used)
            }
            None => false,
        }
    }
    complete(tree, node, &used)
}
