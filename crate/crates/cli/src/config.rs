use std::path::Path;

use anyhow::{bail, Context, Result};
use lnfee::beliefs::BeliefParams;
use lnfee::game::oracle::OracleConfig;
use lnfee::htlc2::Htlc2Scenario;
use lnfee::probe::ProbeScenario;
use lnfee::topology::synthetic::SyntheticConfig;
use lnfee::{ChannelParams, FeeModel, SimConfig};
use serde::{Deserialize, Serialize};

use crate::cli::CommonArgs;

/// Everything an experiment can be configured with. Every section and field
/// is optional; command-line flags override the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub simulation: SimConfig,
    pub probe: ProbeSection,
    pub game_oracle: OracleConfig,
    pub htlc2: Htlc2Scenario,
}

/// Synthetic network used when no snapshot is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub nodes: usize,
    pub max_links_per_node: usize,
    pub median_capacity: f64,
    pub capacity_sigma: f64,
    pub policy_coverage: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let d = SyntheticConfig::default();
        NetworkSection {
            nodes: d.nodes,
            max_links_per_node: d.max_links_per_node,
            median_capacity: d.median_capacity,
            capacity_sigma: d.capacity_sigma,
            policy_coverage: d.policy_coverage,
        }
    }
}

impl NetworkSection {
    pub fn synthetic(&self) -> SyntheticConfig {
        SyntheticConfig {
            nodes: self.nodes,
            max_links_per_node: self.max_links_per_node,
            median_capacity: self.median_capacity,
            capacity_sigma: self.capacity_sigma,
            policy_coverage: self.policy_coverage,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub capacity: u64,
    pub timelock: u32,
    pub risk_factor: f64,
    pub fee_model: FeeModel,
    pub target_params: ChannelParams,
    pub beliefs: BeliefParams,
    pub delay_range: [f64; 2],
    pub granularity: u64,
    /// Distance between sampled balances when `balances` is empty.
    pub balance_step: u64,
    pub balances: Vec<u64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let d = ProbeScenario::default();
        ProbeSection {
            capacity: d.capacity,
            timelock: d.timelock,
            risk_factor: d.risk_factor,
            fee_model: d.fee_model,
            target_params: d.target_params,
            beliefs: d.beliefs,
            delay_range: d.delay_range,
            granularity: 1,
            balance_step: 50_000,
            balances: Vec::new(),
        }
    }
}

impl ProbeSection {
    pub fn scenario(&self, seed: u64) -> ProbeScenario {
        ProbeScenario {
            capacity: self.capacity,
            balance: 0,
            timelock: self.timelock,
            target_params: self.target_params,
            risk_factor: self.risk_factor,
            fee_model: self.fee_model,
            beliefs: self.beliefs,
            delay_range: self.delay_range,
            seed,
        }
    }

    /// Explicit balances, or `0, step, 2 step, ...` up to the capacity.
    pub fn sampled_balances(&self) -> Vec<u64> {
        if !self.balances.is_empty() {
            return self.balances.clone();
        }
        let step = self.balance_step.max(1);
        (0..=self.capacity / step).map(|k| k * step).collect()
    }
}

impl ExperimentConfig {
    /// Reads TOML, falling back to JSON. A `.json` extension skips TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            return serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON config {}", path.display()));
        }
        match toml::from_str(&text) {
            Ok(config) => Ok(config),
            Err(toml_err) => match serde_json::from_str(&text) {
                Ok(config) => Ok(config),
                Err(_) => {
                    Err(toml_err).with_context(|| format!("invalid config {}", path.display()))
                }
            },
        }
    }

    /// Applies command-line overrides and the mandatory seed.
    pub fn apply(&mut self, args: &CommonArgs, seed: u64) -> Result<()> {
        self.simulation.seed = seed;
        self.htlc2.seed = seed;
        if let Some(r) = args.risk {
            if !(r >= 0.0 && r.is_finite()) {
                bail!("--risk must be a non-negative number, got {r}");
            }
            self.simulation.risk_factor = r;
            self.probe.risk_factor = r;
            self.game_oracle.risk_factor = Some(r);
        }
        if let Some(model) = args.model {
            self.simulation.fee_model = model;
            self.probe.fee_model = model;
            self.game_oracle.models = vec![model];
        }
        if let Some(n) = args.payments {
            self.simulation.num_payments = n;
        }
        if let Some(n) = args.runs {
            self.simulation.num_runs = n;
        }
        if let Some(n) = args.pool {
            self.simulation.pool_size = n;
        }
        if let Some(c) = args.capacity {
            self.probe.capacity = c;
        }
        if let Some(t) = args.timelock {
            self.probe.timelock = t;
        }
        if let Some(g) = args.granularity {
            if g == 0 {
                bail!("--granularity must be at least 1");
            }
            self.probe.granularity = g;
        }
        self.simulation
            .validate()
            .context("invalid simulation settings")?;
        Ok(())
    }
}
