//! Robot fleet description: robot types, instance counts, capability
//! qualities and free-form limitations.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// One robot type together with the number of identical instances available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSpec {
    #[serde(rename = "type")]
    pub type_name: String,
    pub count: usize,
    /// Capability name to quality score.
    #[serde(default)]
    pub capabilities: BTreeMap<String, f64>,
    #[serde(default)]
    pub limitations: BTreeMap<String, serde_json::Value>,
}

impl RobotSpec {
    pub fn new(type_name: impl Into<String>, count: usize) -> Self {
        Self {
            type_name: type_name.into(),
            count,
            capabilities: BTreeMap::new(),
            limitations: BTreeMap::new(),
        }
    }

    pub fn with_capability(mut self, name: impl Into<String>, quality: f64) -> Self {
        self.capabilities.insert(name.into(), quality);
        self
    }

    pub fn has_capability(&self, capability: &str) -> bool {
        self.capabilities.contains_key(capability)
    }

    pub fn quality(&self, capability: &str) -> Option<f64> {
        self.capabilities.get(capability).copied()
    }
}

/// The set of robots available to a mission. Order is significant: it fixes
/// the branch order of generated subtrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub robots: Vec<RobotSpec>,
}

impl Fleet {
    pub fn new(robots: Vec<RobotSpec>) -> Result<Self, ModelError> {
        let fleet = Self { robots };
        fleet.validate()?;
        Ok(fleet)
    }

    /// The fleet used throughout the reference missions: a mobile scooter, two
    /// tele-robots, a transportation robot and a social robot.
    pub fn table_i() -> Self {
        Self {
            robots: vec![
                RobotSpec::new("Mobile Scooter", 1)
                    .with_capability("Follow", 0.5)
                    .with_capability("Reach", 1.0),
                RobotSpec::new("Tele-Robot", 2)
                    .with_capability("Search", 1.0)
                    .with_capability("Follow", 0.5)
                    .with_capability("Reach", 1.0),
                RobotSpec::new("Transportation Robot", 1)
                    .with_capability("Search", 0.3)
                    .with_capability("Follow", 0.3)
                    .with_capability("Reach", 0.3)
                    .with_capability("Carry", 1.0),
                RobotSpec::new("Social Robot", 1)
                    .with_capability("Follow", 0.3)
                    .with_capability("Reach", 0.3)
                    .with_capability("Message Display", 1.0),
            ],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let fleet: Fleet = serde_json::from_str(text)?;
        fleet.validate()?;
        Ok(fleet)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fleet serializes")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for robot in &self.robots {
            if robot.type_name.trim().is_empty() {
                return Err(ModelError::InvalidFleet("robot type name is empty".into()));
            }
            if !seen.insert(robot.type_name.as_str()) {
                return Err(ModelError::InvalidFleet(format!(
                    "duplicate robot type '{}'",
                    robot.type_name
                )));
            }
            if robot.count == 0 {
                return Err(ModelError::InvalidFleet(format!(
                    "robot type '{}' has count 0",
                    robot.type_name
                )));
            }
            for (capability, quality) in &robot.capabilities {
                if capability.trim().is_empty() {
                    return Err(ModelError::InvalidFleet(format!(
                        "robot type '{}' has an empty capability name",
                        robot.type_name
                    )));
                }
                if !quality.is_finite() || *quality < 0.0 {
                    return Err(ModelError::InvalidFleet(format!(
                        "robot type '{}' capability '{}' has invalid quality {}",
                        robot.type_name, capability, quality
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn robot(&self, type_name: &str) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.type_name == type_name)
    }

    /// Number of instances of `type_name`; zero when the type is absent.
    pub fn count(&self, type_name: &str) -> usize {
        self.robot(type_name).map_or(0, |r| r.count)
    }

    pub fn total_instances(&self) -> usize {
        self.robots.iter().map(|r| r.count).sum()
    }

    /// Robot types offering `capability`, in fleet order.
    pub fn with_capability<'a>(&'a self, capability: &'a str) -> impl Iterator<Item = &'a RobotSpec> {
        self.robots.iter().filter(move |r| r.has_capability(capability))
    }

    pub fn without(&self, type_name: &str) -> Fleet {
        Fleet {
            robots: self
                .robots
                .iter()
                .filter(|r| r.type_name != type_name)
                .cloned()
                .collect(),
        }
    }

    pub fn with_count(&self, type_name: &str, count: usize) -> Fleet {
        let mut fleet = self.clone();
        for robot in &mut fleet.robots {
            if robot.type_name == type_name {
                robot.count = count;
            }
        }
        fleet
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_i_totals() {
        let fleet = Fleet::table_i();
        assert_eq!(fleet.robots.len(), 4);
        assert_eq!(fleet.total_instances(), 5);
        assert_eq!(fleet.count("Tele-Robot"), 2);
        assert_eq!(fleet.robot("Social Robot").unwrap().quality("Message Display"), Some(1.0));
        fleet.validate().unwrap();
    }

    #[test]
    fn parses_wire_format() {
        let text = r#"{"robots":[{"type":"Tele-Robot","count":2,"capabilities":{"Search":1.0,"Follow":0.5,"Reach":1.0},"limitations":{"max speed":"2 m/s"}}]}"#;
        let fleet = Fleet::from_json(text).unwrap();
        assert_eq!(fleet.robots[0].type_name, "Tele-Robot");
        assert_eq!(fleet.robots[0].limitations["max speed"], "2 m/s");
    }

    #[test]
    fn rejects_bad_fleets() {
        let dup = Fleet {
            robots: vec![RobotSpec::new("A", 1), RobotSpec::new("A", 2)],
        };
        assert!(matches!(dup.validate(), Err(ModelError::InvalidFleet(_))));
        let zero = Fleet { robots: vec![RobotSpec::new("A", 0)] };
        assert!(zero.validate().is_err());
        let nan = Fleet {
            robots: vec![RobotSpec::new("A", 1).with_capability("Search", f64::NAN)],
        };
        assert!(nan.validate().is_err());
        let negative = Fleet {
            robots: vec![RobotSpec::new("A", 1).with_capability("Search", -0.1)],
        };
        assert!(negative.validate().is_err());
        // qualities above 1 are allowed
        let high = Fleet {
            robots: vec![RobotSpec::new("A", 1).with_capability("Search", 3.5)],
        };
        high.validate().unwrap();
    }

    #[test]
    fn empty_fleet_is_valid() {
        Fleet::from_json(r#"{"robots":[]}"#).unwrap();
    }
}
