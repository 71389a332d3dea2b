//! Run configuration shared by the library suites and the CLI, and its
//! digest.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{MCConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::kernel::Method;
use crate::oracle::OracleConfig;
use crate::potential::Potential;
use crate::verify::{DaviesGaffney, Sweep};

/// Size the global worker pool; `0` keeps the default of one worker per
/// core. Results do not depend on the pool size.
pub fn init_jobs(jobs: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot size the worker pool: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ClosedForm,
    Potential,
    Main,
    Weighted,
    DaviesGaffney,
    CrossMethod,
    Counterexample,
    Oracle,
    All,
}

impl Suite {
    pub const EVERY: [Suite; 8] = [
        Suite::ClosedForm,
        Suite::Potential,
        Suite::Main,
        Suite::Weighted,
        Suite::DaviesGaffney,
        Suite::CrossMethod,
        Suite::Counterexample,
        Suite::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::ClosedForm => "closed-form",
            Suite::Potential => "potential",
            Suite::Main => "main",
            Suite::Weighted => "weighted",
            Suite::DaviesGaffney => "davies-gaffney",
            Suite::CrossMethod => "cross-method",
            Suite::Counterexample => "counterexample",
            Suite::Oracle => "oracle",
            Suite::All => "all",
        }
    }

    /// Demonstration suites report but never fail.
    pub fn is_demo(&self) -> bool {
        *self == Suite::Counterexample
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EVERY
            .iter()
            .chain(&[Suite::All])
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown suite `{s}`")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Time lists of the solver-backed checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedules {
    pub l1_exponential_t: Vec<f64>,
    pub l1_boundary_t: Vec<f64>,
    pub cross_method_t: Vec<f64>,
    pub davies_gaffney_t: Vec<f64>,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            l1_exponential_t: vec![0.1, 1.0],
            l1_boundary_t: vec![0.1, 1.0, 5.0],
            cross_method_t: vec![0.1, 0.5, 1.0],
            davies_gaffney_t: vec![0.25, 1.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    /// The rate `ξ > 0`; the suite also runs `-ξ` and 0.
    pub xi: f64,
    pub t: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig { xi: 1.0, t: vec![1.0, 4.0, 16.0], lengths: vec![10.0, 20.0, 40.0] }
    }
}

fn potential_from_text_or_object<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Potential, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Spec {
        Text(String),
        Full(Potential),
    }
    match Spec::deserialize(d)? {
        Spec::Text(s) => s.parse().map_err(serde::de::Error::custom),
        Spec::Full(p) => p.validate().map(|_| p).map_err(serde::de::Error::custom),
    }
}

fn default_potential() -> Potential {
    Potential::well(0.4, 1.0, 2.0).expect("builtin well is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub suite: Suite,
    /// A spec such as `"well:0.4:1:2"` or the JSON object form.
    #[serde(deserialize_with = "potential_from_text_or_object")]
    pub potential: Potential,
    pub method: Method,
    pub solver: SolverConfig,
    /// Also the master seed of the oracle.
    pub mc: MCConfig,
    pub sweep: Sweep,
    pub schedules: Schedules,
    pub davies_gaffney: DaviesGaffney,
    pub counterexample: CounterexampleConfig,
    pub oracle: OracleConfig,
    /// Check name to tolerance; the threshold becomes `1 + tolerance`.
    pub tolerances: BTreeMap<String, f64>,
    /// Where the report goes; not part of the digest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            suite: Suite::All,
            potential: default_potential(),
            method: Method::Duhamel,
            solver: SolverConfig::default(),
            mc: MCConfig::default(),
            sweep: Sweep::default(),
            schedules: Schedules::default(),
            davies_gaffney: DaviesGaffney::default(),
            counterexample: CounterexampleConfig::default(),
            oracle: OracleConfig::default(),
            tolerances: BTreeMap::new(),
            output: None,
        }
    }
}

fn positive_list(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        Some(x) => Err(Error::invalid(format!("{name} must hold positive values, got {x}"))),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        self.solver.validate()?;
        self.mc.validate()?;
        if self.method == Method::ClosedForm && !self.potential.is_zero() {
            return Err(Error::invalid("the closed form needs V = 0"));
        }
        positive_list("sweep.t", &self.sweep.t)?;
        positive_list("schedules.l1_exponential_t", &self.schedules.l1_exponential_t)?;
        positive_list("schedules.l1_boundary_t", &self.schedules.l1_boundary_t)?;
        positive_list("schedules.cross_method_t", &self.schedules.cross_method_t)?;
        positive_list("schedules.davies_gaffney_t", &self.schedules.davies_gaffney_t)?;
        positive_list("counterexample.t", &self.counterexample.t)?;
        positive_list("counterexample.lengths", &self.counterexample.lengths)?;
        if let Some(x) = self.sweep.xi.iter().find(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("sweep.xi must be finite, got {x}")));
        }
        if self.sweep.n < 8 {
            return Err(Error::invalid("sweep.n must be at least 8"));
        }
        if !(self.sweep.x_max > 0.0) || !self.sweep.x_max.is_finite() {
            return Err(Error::invalid("sweep.x_max must be positive"));
        }
        if !(self.counterexample.xi > 0.0) || !self.counterexample.xi.is_finite() {
            return Err(Error::invalid("counterexample.xi must be positive"));
        }
        self.davies_gaffney.validate()?;
        for (name, tol) in &self.tolerances {
            if !crate::suite::CHECK_NAMES.contains(&name.as_str()) {
                return Err(Error::invalid(format!("tolerance override for unknown check `{name}`")));
            }
            if !(*tol >= 0.0) || !tol.is_finite() {
                return Err(Error::invalid(format!("tolerance for `{name}` must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of everything except `output`.
    pub fn digest(&self) -> Result<String> {
        let mut c = self.clone();
        c.output = None;
        let bytes = serde_json::to_vec(&c)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
