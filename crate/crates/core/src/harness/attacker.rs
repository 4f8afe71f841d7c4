//! Declarative attacker scripts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a compromised node does once its script entry starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    /// Silently drops this fraction of forwarded packets.
    DropPackets { ratio: f64 },
    /// Announces a self-made key pair instead of its certified one.
    ForgeKey,
    /// Replays stale ToD stamps, up to `offset_ns` old.
    ReplayTod { offset_ns: f64 },
    /// Stops answering ranging requests from the given sector.
    Hide { sector: u8 },
}

impl Behavior {
    pub fn name(&self) -> &'static str {
        match self {
            Behavior::DropPackets { .. } => "drop_packets",
            Behavior::ForgeKey => "forge_key",
            Behavior::ReplayTod { .. } => "replay_tod",
            Behavior::Hide { .. } => "hide",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Behavior::DropPackets { ratio } if !(0.0..=1.0).contains(&ratio) => Err(
                Error::InvalidConfig(format!("drop_packets ratio {ratio} outside [0, 1]")),
            ),
            Behavior::ReplayTod { offset_ns } if !(offset_ns > 0.0 && offset_ns.is_finite()) => Err(
                Error::InvalidConfig(format!("replay_tod offset_ns {offset_ns} must be positive")),
            ),
            Behavior::Hide { sector } if !(1..=6).contains(&sector) => Err(
                Error::InvalidConfig(format!("hide sector {sector} outside 1..=6")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    /// Simulated second the behaviour switches on.
    pub start_t: f64,
    pub behavior: Behavior,
}

/// Share of compromised nodes and what they do. The i-th attacker (in id
/// order) follows `script[i % script.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackerConfig {
    pub fraction: f64,
    pub script: Vec<ScriptEntry>,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        Self {
            fraction: 0.1,
            script: vec![
                ScriptEntry {
                    start_t: 5.0,
                    behavior: Behavior::ForgeKey,
                },
                ScriptEntry {
                    start_t: 5.0,
                    behavior: Behavior::ReplayTod { offset_ns: 200.0 },
                },
            ],
        }
    }
}

impl AttackerConfig {
    pub fn none() -> Self {
        Self {
            fraction: 0.0,
            script: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.fraction) {
            return Err(Error::InvalidConfig(format!(
                "attacker fraction {} outside [0, 1)",
                self.fraction
            )));
        }
        if self.fraction > 0.0 && self.script.is_empty() {
            return Err(Error::InvalidConfig(
                "attackers requested but the script is empty".into(),
            ));
        }
        for e in &self.script {
            if !(e.start_t >= 0.0 && e.start_t.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "script start_t {} must be non-negative",
                    e.start_t
                )));
            }
            e.behavior.validate()?;
        }
        Ok(())
    }

    /// Script entry followed by the `index`-th attacker.
    pub fn entry_for(&self, index: usize) -> Option<ScriptEntry> {
        if self.script.is_empty() {
            None
        } else {
            Some(self.script[index % self.script.len()])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_script_json() {
        let cfg: AttackerConfig = serde_json::from_str(
            r#"{"fraction": 0.2, "script": [
                {"start_t": 0, "behavior": "forge_key"},
                {"start_t": 12.5, "behavior": {"replay_tod": {"offset_ns": 150}}},
                {"start_t": 3, "behavior": {"hide": {"sector": 4}}}
            ]}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.entry_for(1).unwrap().behavior, Behavior::ReplayTod { offset_ns: 150.0 });
        assert_eq!(cfg.entry_for(3).unwrap().behavior, Behavior::ForgeKey);
    }

    #[test]
    fn rejects_bad_entries() {
        let mut cfg = AttackerConfig {
            fraction: 1.0,
            ..AttackerConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.fraction = 0.1;
        cfg.script[0].behavior = Behavior::Hide { sector: 7 };
        assert!(cfg.validate().is_err());
        cfg.script[0].behavior = Behavior::DropPackets { ratio: 1.5 };
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<AttackerConfig>(r#"{"fraction": 0.1, "colour": 1}"#).is_err());
    }
}
