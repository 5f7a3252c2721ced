//! Scenario files: one system plus analysis parameters and output
//! directives. TOML by default; `.json` files are read as JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bohl::BohlParams;
use crate::dichotomy::{DichotomyParams, SpectrumParams};
use crate::error::{Error, Result};
use crate::seqmodel::{MatrixSequence, SequenceDescription};
use crate::theorems::{HarnessParams, VerifyParams};
use crate::triangular::SignificanceParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analysis {
    /// Dichotomy window `N` (the analysis covers `[−N, N]`).
    pub window: usize,
    pub grid_points: usize,
    pub refine_tol: f64,
    pub grid_margin: f64,
    pub theta_min: f64,
    pub rho_split: f64,
    pub delta_fit: f64,
    pub bohl_window: usize,
    pub gap_min: usize,
    pub tail_fraction: f64,
    pub two_sided: bool,
    pub seed: u64,
    pub samples_per_fiber: usize,
    pub samples: usize,
    pub escalate: bool,
    pub endpoint_tol: f64,
}

impl Default for Analysis {
    fn default() -> Self {
        let d = DichotomyParams::default();
        let s = SpectrumParams::default();
        let b = BohlParams::default();
        let h = HarnessParams::default();
        Analysis {
            window: d.window,
            grid_points: s.grid_points,
            refine_tol: s.refine_tol,
            grid_margin: s.grid_margin,
            theta_min: d.theta_min,
            rho_split: d.rho_split,
            delta_fit: d.delta_fit,
            bohl_window: b.window,
            gap_min: b.gap_min,
            tail_fraction: b.tail_fraction,
            two_sided: b.two_sided,
            seed: h.seed,
            samples_per_fiber: h.samples_per_fiber,
            samples: h.samples,
            escalate: h.escalate,
            endpoint_tol: VerifyParams::default().endpoint_tol,
        }
    }
}

impl Analysis {
    pub fn dichotomy(&self) -> DichotomyParams {
        DichotomyParams {
            window: self.window,
            theta_min: self.theta_min,
            rho_split: self.rho_split,
            delta_fit: self.delta_fit,
            seed: self.seed,
            ..DichotomyParams::default()
        }
    }

    pub fn spectrum(&self) -> SpectrumParams {
        SpectrumParams {
            dichotomy: self.dichotomy(),
            grid_points: self.grid_points,
            refine_tol: self.refine_tol,
            grid_margin: self.grid_margin,
        }
    }

    pub fn bohl(&self) -> BohlParams {
        BohlParams {
            window: self.bohl_window,
            gap_min: self.gap_min,
            tail_fraction: self.tail_fraction,
            two_sided: self.two_sided,
        }
    }

    pub fn verify(&self) -> VerifyParams {
        VerifyParams {
            spectrum: self.spectrum(),
            harness: HarnessParams {
                bohl: self.bohl(),
                samples_per_fiber: self.samples_per_fiber,
                samples: self.samples,
                seed: self.seed,
                tol: None,
                escalate: self.escalate,
            },
            endpoint_tol: self.endpoint_tol,
        }
    }

    pub fn significance(&self) -> SignificanceParams {
        SignificanceParams {
            spectrum: self.spectrum(),
            bohl: self.bohl(),
            tol: self.endpoint_tol,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.dichotomy().check()?;
        self.bohl().check()?;
        if self.grid_points < 2 || !(self.refine_tol > 0.0) {
            return Err(Error::InvalidParams("grid_points ≥ 2 and refine_tol > 0 required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: PathBuf::from("out"),
            format: Format::Json,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SequenceDescription,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub output: Output,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    /// TOML with every default spelled out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn sequence(&self) -> Result<MatrixSequence> {
        MatrixSequence::new(self.system.clone())
    }
}
