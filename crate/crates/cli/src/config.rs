//! Pipeline configuration: versioned JSON schema with unknown keys rejected,
//! preset overlays, and seed plumbing.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use iuq_core::pipeline::{Method, PcaMethod, SurrogateKind};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    pub grid: GridConfig,
    pub design: DesignConfig,
    pub prior: PriorConfig,
    pub pca: PcaConfig,
    pub surrogate: SurrogateConfig,
    pub likelihood: LikelihoodConfig,
    pub mcmc: McmcSection,
    pub experiment: ExperimentConfig,
    pub fuq: FuqConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaConfig {
    pub method: PcaMethod,
    /// Explicit conventional component count; the variance target applies
    /// when absent.
    #[serde(default)]
    pub conventional_k: Option<usize>,
    pub variance_target: f64,
    pub amplitude_k: usize,
    pub phase_k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub seed: u64,
    pub split_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LikelihoodConfig {
    pub use_code_uncertainty: bool,
    pub sigma_exp: f64,
    pub phase_inflation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theta_true: [f64; 4],
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuqConfig {
    pub n_posterior_draws: usize,
    /// Full-model prior samples for the reference band.
    pub n_prior_draws: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            grid: GridConfig { t_start: 0.0, t_end: 1000.0, n_points: 500 },
            design: DesignConfig { n: 500, seed: 2024 },
            prior: PriorConfig { lo: 0.0, hi: 5.0 },
            pca: PcaConfig {
                method: PcaMethod::Fpca,
                conventional_k: None,
                variance_target: 0.95,
                amplitude_k: 2,
                phase_k: 4,
            },
            surrogate: SurrogateConfig { kind: SurrogateKind::Bnn, seed: 7, split_seed: 11 },
            likelihood: LikelihoodConfig {
                use_code_uncertainty: true,
                sigma_exp: 10.0,
                phase_inflation: 0.1,
            },
            mcmc: McmcSection {
                n_samples: 25_000,
                burn_in: 5_000,
                thin: 20,
                seed: 42,
                chains: 1,
            },
            experiment: ExperimentConfig {
                theta_true: [1.2, 1.1, 0.8, 1.0],
                noise_std: 10.0,
                seed: 555,
            },
            fuq: FuqConfig { n_posterior_draws: 1000, n_prior_draws: 1000 },
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: PipelineConfig = serde_json::from_str(&raw)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("unsupported config version {} (expected {CONFIG_VERSION})", self.version);
        }
        if !(self.grid.t_start < self.grid.t_end) || self.grid.n_points < 3 {
            bail!("invalid grid");
        }
        if self.design.n == 0 {
            bail!("design.n must be positive");
        }
        if !(self.prior.lo < self.prior.hi) {
            bail!("prior bounds must satisfy lo < hi");
        }
        if !(0.0 < self.pca.variance_target && self.pca.variance_target <= 1.0) {
            bail!("pca.variance_target must lie in (0, 1]");
        }
        if self.pca.amplitude_k == 0 || self.pca.phase_k == 0 {
            bail!("pca component counts must be >= 1");
        }
        if self.likelihood.sigma_exp <= 0.0 {
            bail!("likelihood.sigma_exp must be positive");
        }
        if self.mcmc.burn_in >= self.mcmc.n_samples || self.mcmc.thin == 0 {
            bail!("invalid mcmc settings");
        }
        if self.mcmc.chains == 0 {
            bail!("mcmc.chains must be >= 1");
        }
        if self.experiment.noise_std < 0.0 {
            bail!("experiment.noise_std must be >= 0");
        }
        for x in self.experiment.theta_true {
            if !(self.prior.lo..=self.prior.hi).contains(&x) {
                bail!("experiment.theta_true outside the prior box");
            }
        }
        if self.fuq.n_posterior_draws < 50 || self.fuq.n_prior_draws < 50 {
            bail!("fuq draw counts must be >= 50");
        }
        Ok(())
    }

    /// Applies a method preset: only the (PCA method, surrogate kind,
    /// code-uncertainty) triple changes.
    pub fn apply_preset(&mut self, preset: Method) {
        let (pca, kind, code) = preset.triple();
        self.pca.method = pca;
        self.surrogate.kind = kind;
        self.likelihood.use_code_uncertainty = code;
    }

    /// Re-bases every stage seed on a single override.
    pub fn apply_seed(&mut self, seed: u64) {
        self.design.seed = seed;
        self.surrogate.seed = seed.wrapping_add(1);
        self.surrogate.split_seed = seed.wrapping_add(2);
        self.mcmc.seed = seed.wrapping_add(3);
        self.experiment.seed = seed.wrapping_add(4);
    }

    /// Hash of the canonical serialized config, recorded in manifests.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canon);
        hex_string(&hasher.finalize())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
