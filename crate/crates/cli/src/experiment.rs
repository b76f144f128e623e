//! Experiment description shared by flags and JSON config files.

use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use conductance_core::graph::Family;
use conductance_core::tester::Overrides;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Run tester trials and aggregate verdicts.
    Test,
    /// Check the trap-probability bounds on the minimum-conductance cut.
    VerifyLemmas,
    /// Check the Cheeger sandwich against brute-force conductance.
    VerifyCheeger,
    /// Check pairwise mixing against the second eigenvalue.
    Mixing,
    /// Print the minimum-conductance cut.
    BruteConductance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    /// Edge-list file.
    File(PathBuf),
    /// Generator in `family:param[:param]` form.
    Gen(#[serde(serialize_with = "family_out", deserialize_with = "family_in")] Family),
}

fn family_out<S: Serializer>(family: &Family, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(family)
}

fn family_in<'de, D: Deserializer<'de>>(d: D) -> Result<Family, D::Error> {
    let text = String::deserialize(d)?;
    Family::from_str(&text).map_err(serde::de::Error::custom)
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub graph: GraphSource,
    /// Seed for randomized generators; the graph is the same in every trial.
    #[serde(default)]
    pub graph_seed: u64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Trial `t` runs with seed `seed + t`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: u32,
    #[serde(default)]
    pub overrides: Overrides,
    /// Longest walk checked by `verify-lemmas` (default 50).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell_max: Option<u64>,
    /// Subset slack for sticky-vertex extraction in `verify-lemmas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Walk lengths checked by `mixing` (default 1, 5, 20).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<u64>>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}
