use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ranking::{GnnConfig, Ranker, DEFAULT_BANZHAF_SAMPLES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    Flat,
    Leafs,
    #[serde(rename = "lbyl")]
    LevelByLevel,
}

impl Search {
    pub const ALL: [Search; 3] = [Search::Flat, Search::Leafs, Search::LevelByLevel];

    pub fn name(&self) -> &'static str {
        match self {
            Search::Flat => "flat",
            Search::Leafs => "leafs",
            Search::LevelByLevel => "lbyl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Addition {
    Greedy,
    Heuristic(Ranker),
}

impl Addition {
    pub fn all() -> [Addition; 6] {
        [
            Addition::Greedy,
            Addition::Heuristic(Ranker::Grad),
            Addition::Heuristic(Ranker::Banzhaf {
                n_samples: DEFAULT_BANZHAF_SAMPLES,
            }),
            Addition::Heuristic(Ranker::Gnn(GnnConfig::published())),
            Addition::Heuristic(Ranker::Gnn(GnnConfig::tuned())),
            Addition::Heuristic(Ranker::Random),
        ]
    }
}

impl fmt::Display for Addition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addition::Greedy => f.write_str("greedy"),
            Addition::Heuristic(r) => r.fmt(f),
        }
    }
}

impl FromStr for Addition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "greedy" => Addition::Greedy,
            "grad" => Addition::Heuristic(Ranker::Grad),
            "banz" => Addition::Heuristic(Ranker::Banzhaf {
                n_samples: DEFAULT_BANZHAF_SAMPLES,
            }),
            "gnn" => Addition::Heuristic(Ranker::Gnn(GnnConfig::published())),
            "gnn2" => Addition::Heuristic(Ranker::Gnn(GnnConfig::tuned())),
            "rand" => Addition::Heuristic(Ranker::Random),
            other => return Err(format!("unknown ranking {other:?}")),
        })
    }
}

/// Stages after the mandatory addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stages {
    pub random_removal: bool,
    pub fine_tune: bool,
}

impl Stages {
    pub const ALL: [Stages; 3] = [
        Stages {
            random_removal: false,
            fine_tune: false,
        },
        Stages {
            random_removal: true,
            fine_tune: false,
        },
        Stages {
            random_removal: true,
            fine_tune: true,
        },
    ];
}

impl fmt::Display for Stages {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("add")?;
        if self.random_removal {
            f.write_str("+rr")?;
        }
        if self.fine_tune {
            f.write_str("+ft")?;
        }
        Ok(())
    }
}

impl FromStr for Stages {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut parts = s.split(['+', '-']);
        if parts.next() != Some("add") {
            return Err("stages must start with \"add\"".into());
        }
        let mut stages = Stages::default();
        for part in parts {
            let flag = match part {
                "rr" => &mut stages.random_removal,
                "ft" => &mut stages.fine_tune,
                other => return Err(format!("unknown stage {other:?}")),
            };
            if *flag {
                return Err(format!("stage {part:?} given twice"));
            }
            *flag = true;
        }
        Ok(stages)
    }
}

/// `<search>-<ranking>-<stages>`, for example `lbyl-banz-add+rr+ft`. Stages
/// may also be separated by dashes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub search: Search,
    pub addition: Addition,
    pub stages: Stages,
}

impl MethodSpec {
    /// Every search, ranking and stage combination.
    pub fn matrix() -> Vec<MethodSpec> {
        let mut out = Vec::new();
        for search in Search::ALL {
            for addition in Addition::all() {
                for stages in Stages::ALL {
                    out.push(MethodSpec {
                        search,
                        addition,
                        stages,
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}-{}",
            self.search.name(),
            self.addition,
            self.stages
        )
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self, Error> {
        let invalid = |reason: String| Error::InvalidMethod {
            spec: spec.to_string(),
            reason,
        };
        let parts: Vec<&str> = spec.trim().splitn(3, '-').collect();
        let [search, ranking, stages] = parts[..] else {
            return Err(invalid("expected <search>-<ranking>-<stages>".into()));
        };
        let search = match search {
            "flat" => Search::Flat,
            "leafs" | "leaf" => Search::Leafs,
            "lbyl" => Search::LevelByLevel,
            other => return Err(invalid(format!("unknown search {other:?}"))),
        };
        Ok(MethodSpec {
            search,
            addition: ranking.parse().map_err(invalid)?,
            stages: stages.parse().map_err(invalid)?,
        })
    }
}
