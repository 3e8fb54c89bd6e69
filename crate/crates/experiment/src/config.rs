use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use bundleneg_core::background::{LambdaSchedule, Method, OracleParams};
use bundleneg_core::negotiation::{SessionConfig, StrategyKind, StrategyParams};
use bundleneg_core::preferences::PopulationParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub num_customers: usize,
    /// Independent runs, each with its own population and shop.
    pub num_distributions: usize,
    pub breakdown_prob: f64,
    pub customer_strategy: StrategyKind,
    pub method: Method,
    pub customer_tdf: StrategyParams,
    pub customer_tftm: StrategyParams,
    pub shop: StrategyParams,
    /// Population family; defaults to `PopulationParams::for_catalog(n)`.
    pub population: Option<PopulationParams>,
    pub lambda: LambdaSchedule,
    pub oracle: OracleParams,
    pub window: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub max_rounds: usize,
    /// Also write every session's offer trace to `traces.jsonl`.
    pub traces: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 6,
            num_customers: 2000,
            num_distributions: 3,
            breakdown_prob: 0.02,
            customer_strategy: StrategyKind::Tdf,
            method: Method::Mu,
            customer_tdf: StrategyParams::customer_tdf(),
            customer_tftm: StrategyParams::customer_tftm(),
            shop: StrategyParams::shop_tdf(),
            population: None,
            lambda: LambdaSchedule::default(),
            oracle: OracleParams::default(),
            window: 100,
            seed: 1,
            output_dir: PathBuf::from("out"),
            max_rounds: 10_000,
            traces: false,
        }
    }
}

impl ExperimentConfig {
    /// Ten goods, 12000 customers, ten runs.
    pub fn full_scale() -> Self {
        Self {
            n: 10,
            num_customers: 12_000,
            num_distributions: 10,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn population(&self) -> PopulationParams {
        self.population
            .clone()
            .unwrap_or_else(|| PopulationParams::for_catalog(self.n))
    }

    pub fn customer_params(&self, kind: StrategyKind) -> StrategyParams {
        match kind {
            StrategyKind::Tdf => self.customer_tdf,
            StrategyKind::Tftm => self.customer_tftm,
        }
    }

    pub fn session(&self, kind: StrategyKind) -> SessionConfig {
        SessionConfig {
            breakdown_prob: self.breakdown_prob,
            customer: self.customer_params(kind),
            shop: self.shop,
            max_rounds: self.max_rounds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_customers == 0 || self.num_distributions == 0 || self.window == 0 {
            bail!("num_customers, num_distributions and window must all be at least 1");
        }
        if self.max_rounds == 0 {
            bail!("max_rounds must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.breakdown_prob) {
            bail!("breakdown_prob must lie in [0, 1]");
        }
        if self.customer_tdf.kind != StrategyKind::Tdf || self.customer_tftm.kind != StrategyKind::Tftm {
            bail!("customer_tdf and customer_tftm must use their own strategy kinds");
        }
        if self.shop.kind != StrategyKind::Tdf {
            bail!("the shop bargains with TDF");
        }
        for p in [self.customer_tdf, self.customer_tftm, self.shop] {
            if !p.is_valid() {
                bail!("invalid strategy parameters {p:?}");
            }
        }
        self.population().validate(self.n)?;
        self.lambda.validate()?;
        self.oracle.validate()?;
        Ok(())
    }
}
