use std::fmt;

use serde::{Deserialize, Serialize};

/// What a run is trying to reduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Median wall-clock time of the workload.
    Time,
    /// Peak resident memory of the workload.
    Memory,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Time => "time",
            Objective::Memory => "memory",
        }
    }

    pub fn inefficient_adjective(self) -> &'static str {
        match self {
            Objective::Time => "time-inefficient",
            Objective::Memory => "memory-inefficient",
        }
    }

    pub fn efficient_adjective(self) -> &'static str {
        match self {
            Objective::Time => "time-efficient",
            Objective::Memory => "memory-efficient",
        }
    }

    /// Suffix for the name of the rewritten function in the prompt.
    pub fn fast_suffix(self) -> &'static str {
        match self {
            Objective::Time => "_fast",
            Objective::Memory => "_efficient",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time" => Ok(Objective::Time),
            "memory" => Ok(Objective::Memory),
            other => Err(format!("unknown objective {other:?} (expected \"time\" or \"memory\")")),
        }
    }
}
