//! Shipped scenario library and contract checking over whole runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Mode;
use crate::engine::{EngineError, WorldConfig, run_checked};
use crate::monitors::{Contract, ContractOutcome, MonitorError, MonitorKind};
use crate::sampling::Seed;
use crate::suite::supermartingale_suite;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'")]
    Unknown(String),
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("invalid scenario {0}: {1}")]
    Parse(String, serde_json::Error),
    #[error("scenario {0} must have exactly one of 'config' and 'randomized'")]
    Shape(String),
    #[error("scenario {0} is a randomized suite and has no single run")]
    NotARun(String),
}

/// Randomized suite parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizedSpec {
    pub modes: Vec<Mode>,
    pub trials: u64,
    pub steps: u64,
    #[serde(default)]
    pub seed: Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub contracts: Vec<Contract>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub config: Option<WorldConfig>,
    #[serde(default)]
    pub randomized: Option<RandomizedSpec>,
}

const LIBRARY: &[&str] = &[
    include_str!("../scenarios/z_counterexample.json"),
    include_str!("../scenarios/thm1_harmonic.json"),
    include_str!("../scenarios/thm1_stubborn_path.json"),
    include_str!("../scenarios/thm2_complete.json"),
    include_str!("../scenarios/thm2_cocktail.json"),
    include_str!("../scenarios/thm3_pair_gossip.json"),
    include_str!("../scenarios/deffuant_cycle.json"),
    include_str!("../scenarios/async_hk_path.json"),
    include_str!("../scenarios/sync_hk_delta.json"),
    include_str!("../scenarios/lemma6_random.json"),
];

impl Scenario {
    pub fn parse(origin: &str, text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse(origin.to_string(), e))?;
        if s.config.is_some() == s.randomized.is_some() {
            return Err(ScenarioError::Shape(s.name));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(origin.clone(), e))?;
        Self::parse(&origin, &text)
    }

    /// Config with overrides applied; errors for randomized suites.
    pub fn run_config(&self, ov: &Overrides) -> Result<WorldConfig, ScenarioError> {
        let mut cfg = self.config.clone().ok_or_else(|| ScenarioError::NotARun(self.name.clone()))?;
        ov.apply(&mut cfg);
        Ok(cfg)
    }
}

/// Every shipped scenario, in library order.
pub fn library() -> Vec<Scenario> {
    LIBRARY
        .iter()
        .map(|text| Scenario::parse("<library>", text).expect("shipped scenarios parse"))
        .collect()
}

pub fn find(name: &str) -> Result<Scenario, ScenarioError> {
    library()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ScenarioError::Unknown(name.to_string()))
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub steps: Option<u64>,
    pub seed: Option<Seed>,
    pub trials: Option<u64>,
    pub monitors: Option<Vec<MonitorKind>>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut WorldConfig) {
        if let Some(s) = self.steps {
            cfg.horizon = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.monitors {
            cfg.monitors = m.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractTally {
    pub checked: u64,
    pub failed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub pass: bool,
    pub tally: BTreeMap<Contract, ContractTally>,
    pub first_failure: Option<ContractOutcome>,
    /// Every failing evaluation, capped at 100 entries.
    pub failures: Vec<ContractOutcome>,
}

const FAILURE_CAP: usize = 100;

impl ScenarioReport {
    fn from_outcomes(name: &str, outcomes: impl IntoIterator<Item = ContractOutcome>) -> Self {
        let mut tally: BTreeMap<Contract, ContractTally> = BTreeMap::new();
        let mut failures = Vec::new();
        let mut first_failure = None;
        for o in outcomes {
            let entry = tally.entry(o.contract).or_insert(ContractTally { checked: 0, failed: 0 });
            entry.checked += 1;
            if !o.pass {
                entry.failed += 1;
                if first_failure.is_none() {
                    first_failure = Some(o.clone());
                }
                if failures.len() < FAILURE_CAP {
                    failures.push(o);
                }
            }
        }
        ScenarioReport {
            scenario: name.to_string(),
            pass: first_failure.is_none(),
            tally,
            first_failure,
            failures,
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}

/// Run a scenario with its declared contracts.
pub fn check(s: &Scenario, ov: &Overrides) -> Result<ScenarioReport, CheckError> {
    if let Some(r) = &s.randomized {
        let trials = ov.trials.unwrap_or(r.trials);
        let seed = ov.seed.unwrap_or(r.seed);
        let steps = ov.steps.unwrap_or(r.steps);
        let mut checked = 0;
        let mut failed = Vec::new();
        for &mode in &r.modes {
            let res = supermartingale_suite(mode, trials, steps, seed)?;
            checked += res.steps_checked;
            failed.extend(res.failures.into_iter().map(|(_, o)| o));
        }
        let mut report = ScenarioReport::from_outcomes(&s.name, failed);
        report.tally.entry(Contract::Supermartingale).or_insert(ContractTally { checked: 0, failed: 0 }).checked = checked;
        return Ok(report);
    }
    let cfg = s.run_config(ov).expect("shape checked at parse time");
    let (_, outcomes) = run_checked(&cfg, &s.contracts, s.delta)?;
    Ok(ScenarioReport::from_outcomes(&s.name, outcomes))
}
