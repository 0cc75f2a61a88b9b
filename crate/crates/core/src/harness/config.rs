use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::equilibrium::{BidGrid, SearchMode};
use crate::error::{Error, Result};
use crate::instances::{build_instance, InstanceParams, NamedInstance};
use crate::mechanism::{Interface, Pricing};
use crate::valuation::ValuationClass;

/// Config schema version understood by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    VerifyInstance,
    SweepKeyLemma,
    CertifySmoothness,
    FindPne,
    VerifyBne,
    BoundTable,
    TemplateFrontier,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::VerifyInstance => "verify-instance",
            ExperimentKind::SweepKeyLemma => "sweep-key-lemma",
            ExperimentKind::CertifySmoothness => "certify-smoothness",
            ExperimentKind::FindPne => "find-pne",
            ExperimentKind::VerifyBne => "verify-bne",
            ExperimentKind::BoundTable => "bound-table",
            ExperimentKind::TemplateFrontier => "template-frontier",
        }
    }

    fn randomized(self) -> bool {
        matches!(
            self,
            ExperimentKind::SweepKeyLemma
                | ExperimentKind::CertifySmoothness
                | ExperimentKind::FindPne
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InstanceSource {
    Named {
        id: String,
        #[serde(default)]
        params: InstanceParams,
    },
    /// A JSON file holding a named instance.
    File { path: PathBuf },
}

impl InstanceSource {
    pub fn load(&self) -> Result<NamedInstance> {
        match self {
            InstanceSource::Named { id, params } => build_instance(id, params),
            InstanceSource::File { path } => {
                let text = std::fs::read_to_string(path)?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// Random sweep dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub cases: usize,
    pub max_n: usize,
    pub max_k: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub instance: Option<InstanceSource>,
    #[serde(default)]
    pub grid: Option<BidGrid>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub pricing: Option<Pricing>,
    #[serde(default)]
    pub interface: Option<Interface>,
    #[serde(default)]
    pub class: Option<ValuationClass>,
    #[serde(default)]
    pub sweep: Option<SweepParams>,
    #[serde(default)]
    pub search: Option<SearchMode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            version: CONFIG_VERSION,
            kind,
            instance: None,
            grid: None,
            alphas: Vec::new(),
            pricing: None,
            interface: None,
            class: None,
            sweep: None,
            search: None,
            seed: None,
            threads: None,
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.kind.randomized() && self.seed.is_none() && self.instance.is_none() {
            return Err(Error::Config(format!("{} needs a seed", self.kind.name())));
        }
        if matches!(
            self.kind,
            ExperimentKind::VerifyInstance | ExperimentKind::VerifyBne
        ) && self.instance.is_none()
        {
            return Err(Error::Config(format!(
                "{} needs an instance",
                self.kind.name()
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("alpha must be positive, got {a}")));
        }
        if let Some(s) = &self.sweep {
            if s.cases == 0 || s.max_n < 2 || s.max_k == 0 || !(s.scale > 0.0) {
                return Err(Error::Config(
                    "sweep needs cases >= 1, max_n >= 2, max_k >= 1, scale > 0".into(),
                ));
            }
        }
        if let Some(g) = &self.grid {
            g.validate()
                .map_err(|e| Error::Config(format!("grid: {e}")))?;
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}
