//! Action utility `u = alpha * quality - beta * duration - gamma * cost`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Fleet, ModelError, PrimitiveAction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// Quality, duration (seconds) and cost of one action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityTriple {
    pub quality: f64,
    pub duration: f64,
    pub cost: f64,
}

/// Per-action override of the default triple. `quality: None` keeps the
/// capability quality from the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub robot_type: String,
    pub action_name: String,
    #[serde(default)]
    pub quality: Option<f64>,
    #[serde(default)]
    pub duration: f64,
    #[serde(default)]
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub weights: UtilityWeights,
    /// robot type -> capability -> quality, taken from the fleet.
    qualities: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub profiles: Vec<ActionProfile>,
}

impl UtilityModel {
    /// Default weights (1, 1, 1) and zero duration/cost, so every action is
    /// worth its capability quality.
    pub fn from_fleet(fleet: &Fleet) -> Self {
        let qualities = fleet
            .robots
            .iter()
            .map(|r| (r.type_name.clone(), r.capabilities.clone()))
            .collect();
        Self {
            weights: UtilityWeights::default(),
            qualities,
            profiles: Vec::new(),
        }
    }

    pub fn with_weights(mut self, weights: UtilityWeights) -> Result<Self, ModelError> {
        for w in [weights.alpha, weights.beta, weights.gamma] {
            if !w.is_finite() || w < 0.0 {
                return Err(ModelError::InvalidWeights(format!(
                    "weights must be finite and non-negative, got ({}, {}, {})",
                    weights.alpha, weights.beta, weights.gamma
                )));
            }
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn with_profile(mut self, profile: ActionProfile) -> Result<Self, ModelError> {
        let values = [profile.quality.unwrap_or(0.0), profile.duration, profile.cost];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidWeights(format!(
                "non-finite utility triple for '{}' on '{}'",
                profile.action_name, profile.robot_type
            )));
        }
        self.profiles
            .retain(|p| !(p.robot_type == profile.robot_type && p.action_name == profile.action_name));
        self.profiles.push(profile);
        Ok(self)
    }

    pub fn triple(&self, action: &PrimitiveAction) -> Result<UtilityTriple, ModelError> {
        let capabilities = self
            .qualities
            .get(&action.robot_type)
            .ok_or_else(|| ModelError::UnknownRobotType(action.robot_type.clone()))?;
        let quality = capabilities.get(&action.capability).copied().ok_or_else(|| {
            ModelError::UnknownCapability {
                robot_type: action.robot_type.clone(),
                capability: action.capability.clone(),
            }
        })?;
        let profile = self
            .profiles
            .iter()
            .find(|p| p.robot_type == action.robot_type && p.action_name == action.action_name);
        Ok(match profile {
            Some(p) => UtilityTriple {
                quality: p.quality.unwrap_or(quality),
                duration: p.duration,
                cost: p.cost,
            },
            None => UtilityTriple {
                quality,
                duration: 0.0,
                cost: 0.0,
            },
        })
    }
}

pub fn compute_utility(action: &PrimitiveAction, model: &UtilityModel) -> Result<f64, ModelError> {
    let t = model.triple(action)?;
    let w = model.weights;
    Ok(w.alpha * t.quality - w.beta * t.duration - w.gamma * t.cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_uses_quality() {
        let model = UtilityModel::from_fleet(&Fleet::table_i());
        let detect = PrimitiveAction::new("Detect {Child}", "Tele-Robot", "Search");
        assert_eq!(compute_utility(&detect, &model).unwrap(), 1.0);
    }

    #[test]
    fn zero_weights_give_zero() {
        let model = UtilityModel::from_fleet(&Fleet::table_i())
            .with_weights(UtilityWeights {
                alpha: 0.0,
                beta: 0.0,
                gamma: 0.0,
            })
            .unwrap();
        let reach = PrimitiveAction::new("Get to {Mom} location", "Social Robot", "Reach");
        assert_eq!(compute_utility(&reach, &model).unwrap(), 0.0);
    }

    #[test]
    fn full_triple() {
        let model = UtilityModel::from_fleet(&Fleet::table_i())
            .with_weights(UtilityWeights {
                alpha: 1.0,
                beta: 0.01,
                gamma: 0.05,
            })
            .unwrap()
            .with_profile(ActionProfile {
                robot_type: "Social Robot".into(),
                action_name: "Get to {Child} location".into(),
                quality: Some(0.3),
                duration: 10.0,
                cost: 2.0,
            })
            .unwrap();
        let reach = PrimitiveAction::new("Get to {Child} location", "Social Robot", "Reach");
        let u = compute_utility(&reach, &model).unwrap();
        assert!((u - 0.1).abs() < 1e-12, "{u}");
    }

    #[test]
    fn unknown_keys_are_named() {
        let model = UtilityModel::from_fleet(&Fleet::table_i());
        let err = compute_utility(&PrimitiveAction::new("x", "Drone", "Fly"), &model).unwrap_err();
        assert!(err.to_string().contains("Drone"));
        let err =
            compute_utility(&PrimitiveAction::new("x", "Social Robot", "Carry"), &model).unwrap_err();
        assert!(err.to_string().contains("Carry"));
    }

    #[test]
    fn rejects_negative_weights() {
        let model = UtilityModel::from_fleet(&Fleet::table_i());
        assert!(model
            .with_weights(UtilityWeights {
                alpha: 1.0,
                beta: -1.0,
                gamma: 0.0
            })
            .is_err());
    }
}
