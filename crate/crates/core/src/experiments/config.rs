//! Experiment configuration, read from TOML.
//!
//! Every grid is optional in the file; missing values fall back to the
//! desk-scale defaults of the chosen experiment. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Environment variable naming the design-file directory.
pub const DESIGN_DIR_ENV: &str = "DKI_DESIGN_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sim1Ki,
    Sim1Dki,
    Sim2,
    Sim3,
    Sim4,
    AppendixB,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Sim1Ki => "sim1_ki",
            ExperimentKind::Sim1Dki => "sim1_dki",
            ExperimentKind::Sim2 => "sim2",
            ExperimentKind::Sim3 => "sim3",
            ExperimentKind::Sim4 => "sim4",
            ExperimentKind::AppendixB => "appendix_b",
        }
    }

    fn tag(&self) -> u64 {
        *self as u64 + 1
    }
}

/// Kernel selection in a config file: either a bare name (`"wendland"`,
/// or `"gaussian"` with a top-level `sigma`) or a full [`KernelSpec`] table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelChoice {
    Name(KernelName),
    Spec(KernelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Wendland,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Division {
    Rotation,
    Saj,
    Random,
}

/// The target `Σ_i ψ(‖x − z_i‖/c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub kappa: usize,
    pub width: f64,
    /// File of `kappa` centers; spiral points when absent.
    #[serde(default)]
    pub centers_file: Option<PathBuf>,
}

/// Evenly spaced values on a log scale, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl LogGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    self.min
                } else if i + 1 == self.count {
                    self.max
                } else {
                    (a + (b - a) * i as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: Option<u64>,
    pub repetitions: Option<usize>,
    /// Gaussian noise levels δ.
    pub noise: Option<Vec<f64>>,
    pub kernel: Option<KernelChoice>,
    /// Width for `kernel = "gaussian"`.
    pub sigma: Option<f64>,
    pub target: Option<TargetConfig>,
    pub test_points: Option<usize>,
    pub design_dir: Option<PathBuf>,
    /// Design strengths for `sim1_ki`.
    pub t_grid: Option<Vec<usize>>,
    /// Design strength of the base set for the rotated-copy experiments.
    pub design_t: Option<usize>,
    /// Copy counts for `sim1_dki`.
    pub copies: Option<Vec<usize>>,
    /// Number of rotated copies forming the data of `sim2`–`sim4`.
    pub rotations: Option<usize>,
    pub m_grid: Option<Vec<usize>>,
    pub division: Option<Division>,
    pub c0_grid: Option<Vec<f64>>,
    pub cap_factor: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub s_grid: Option<Vec<usize>>,
    /// Sphere dimension for `appendix_b`.
    pub dim: Option<usize>,
    pub n_train: Option<usize>,
    pub sigma_grid: Option<LogGrid>,
    /// Compute condition numbers (a full eigendecomposition per matrix).
    pub conditioning: Option<bool>,
    /// Record wall-clock times; when false the column holds zeros so that
    /// reruns give byte-identical output.
    pub timing: Option<bool>,
}

fn step(from: usize, to: usize, by: usize) -> Vec<usize> {
    (from..=to).step_by(by).collect()
}

fn c0_default() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

fn lambda_default() -> Vec<f64> {
    (0..)
        .map(|q| 0.5f64.powi(q))
        .take_while(|&l| l > 1e-10)
        .collect()
}

impl ExperimentConfig {
    /// A config holding only the experiment kind; all accessors return
    /// that experiment's defaults.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: None,
            repetitions: None,
            noise: None,
            kernel: None,
            sigma: None,
            target: None,
            test_points: None,
            design_dir: None,
            t_grid: None,
            design_t: None,
            copies: None,
            rotations: None,
            m_grid: None,
            division: None,
            c0_grid: None,
            cap_factor: None,
            lambda_grid: None,
            s_grid: None,
            dim: None,
            n_train: None,
            sigma_grid: None,
            conditioning: None,
            timing: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.repetitions() == 0 {
            return bad("repetitions must be >= 1".into());
        }
        let noise = self.noise();
        if noise.is_empty() {
            return bad("noise grid is empty".into());
        }
        if noise.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return bad("noise levels must be finite and nonnegative".into());
        }
        let t = self.target();
        if t.kappa == 0 || !(t.width > 0.0) {
            return bad("target needs kappa >= 1 and width > 0".into());
        }
        if self.test_points() == 0 {
            return bad("test_points must be >= 1".into());
        }
        match self.experiment {
            ExperimentKind::Sim1Ki if self.t_grid().is_empty() => bad("t_grid is empty".into()),
            ExperimentKind::Sim1Dki if self.copies().is_empty() || self.copies().contains(&0) => {
                bad("copies must be a nonempty list of positive counts".into())
            }
            ExperimentKind::Sim2 | ExperimentKind::Sim3 | ExperimentKind::Sim4
                if self.rotations() == 0 =>
            {
                bad("rotations must be >= 1".into())
            }
            ExperimentKind::Sim2 if self.division() == Division::Saj && self.c0_grid().is_empty() => {
                bad("c0_grid is empty".into())
            }
            ExperimentKind::Sim2 if self.division() != Division::Saj && self.m_grid().is_empty() => {
                bad("m_grid is empty".into())
            }
            ExperimentKind::Sim3 if self.m_grid().is_empty() || self.c0_grid().is_empty() => {
                bad("sim3 needs nonempty m_grid and c0_grid".into())
            }
            ExperimentKind::Sim4
                if self.m_grid().is_empty()
                    || self.lambda_grid().is_empty()
                    || self.s_grid().is_empty() =>
            {
                bad("sim4 needs nonempty m_grid, lambda_grid and s_grid".into())
            }
            ExperimentKind::AppendixB
                if self.m_grid().is_empty()
                    || self.sigma_grid().count == 0
                    || !(self.sigma_grid().min > 0.0)
                    || self.sigma_grid().max < self.sigma_grid().min =>
            {
                bad("appendix_b needs a nonempty m_grid and a valid sigma_grid".into())
            }
            _ => Ok(()),
        }?;
        if let Some(sigma) = self.sigma {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return bad(format!("sigma must be positive, got {sigma}"));
            }
            if self.kernel() == KernelSpec::Wendland {
                return bad("sigma given for the wendland kernel".into());
            }
        }
        if let KernelSpec::Gaussian { sigma } = self.kernel() {
            if !(sigma > 0.0) || !sigma.is_finite() {
                return bad(format!("sigma must be positive, got {sigma}"));
            }
        }
        if self.c0_grid().iter().any(|c| !(*c > 0.0)) {
            return bad("c0 values must be positive".into());
        }
        if self.lambda_grid().iter().any(|l| !(*l > 0.0)) {
            return bad("lambda values must be positive".into());
        }
        if self.m_grid().contains(&0) {
            return bad("m values must be positive".into());
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(20_240_601)
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions.unwrap_or(30)
    }

    pub fn noise(&self) -> Vec<f64> {
        self.noise
            .clone()
            .unwrap_or_else(|| vec![0.001, 0.01, 0.1, 0.3, 0.5])
    }

    pub fn kernel(&self) -> KernelSpec {
        let sigma = self.sigma.unwrap_or(1.0);
        match &self.kernel {
            Some(KernelChoice::Spec(k)) => k.clone(),
            Some(KernelChoice::Name(KernelName::Wendland)) => KernelSpec::Wendland,
            Some(KernelChoice::Name(KernelName::Gaussian)) => KernelSpec::Gaussian { sigma },
            None => match self.experiment {
                ExperimentKind::AppendixB => KernelSpec::Gaussian { sigma },
                _ => KernelSpec::Wendland,
            },
        }
    }

    pub fn target(&self) -> TargetConfig {
        self.target.clone().unwrap_or(match self.experiment {
            // in high dimension pairwise chords concentrate near √2, so the
            // bumps must be wide to leave a visible signal
            ExperimentKind::AppendixB => TargetConfig {
                kappa: 20,
                width: 3.0,
                centers_file: None,
            },
            _ => TargetConfig {
                kappa: 20,
                width: 0.6,
                centers_file: None,
            },
        })
    }

    pub fn test_points(&self) -> usize {
        self.test_points.unwrap_or(2000)
    }

    /// Config value, then `DKI_DESIGN_DIR`, then the repository's bundled
    /// `data/designs`.
    pub fn design_dir(&self) -> PathBuf {
        if let Some(d) = &self.design_dir {
            return d.clone();
        }
        if let Ok(d) = std::env::var(DESIGN_DIR_ENV) {
            if !d.is_empty() {
                return d.into();
            }
        }
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/designs")
    }

    pub fn t_grid(&self) -> Vec<usize> {
        self.t_grid.clone().unwrap_or_else(|| step(1, 45, 2))
    }

    pub fn design_t(&self) -> usize {
        self.design_t.unwrap_or(match self.experiment {
            ExperimentKind::Sim1Dki => 45,
            _ => 21,
        })
    }

    pub fn copies(&self) -> Vec<usize> {
        self.copies.clone().unwrap_or_else(|| step(2, 40, 2))
    }

    pub fn rotations(&self) -> usize {
        self.rotations.unwrap_or(10)
    }

    pub fn m_grid(&self) -> Vec<usize> {
        self.m_grid.clone().unwrap_or_else(|| match self.experiment {
            ExperimentKind::AppendixB => vec![2, 4, 10, 20, 50, 100, 200],
            ExperimentKind::Sim2 => [step(10, 20, 2), vec![25, 30, 40, 50, 60, 80, 100]].concat(),
            _ => step(10, 100, 2),
        })
    }

    pub fn division(&self) -> Division {
        self.division.unwrap_or(match self.experiment {
            ExperimentKind::AppendixB => Division::Random,
            _ => Division::Rotation,
        })
    }

    pub fn c0_grid(&self) -> Vec<f64> {
        self.c0_grid.clone().unwrap_or_else(c0_default)
    }

    pub fn cap_factor(&self) -> f64 {
        self.cap_factor.unwrap_or(crate::partition::DEFAULT_CAP_FACTOR)
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(lambda_default)
    }

    pub fn s_grid(&self) -> Vec<usize> {
        self.s_grid.clone().unwrap_or_else(|| step(1, 45, 2))
    }

    pub fn dim(&self) -> usize {
        self.dim.unwrap_or(match self.experiment {
            ExperimentKind::AppendixB => 50,
            _ => 2,
        })
    }

    pub fn n_train(&self) -> usize {
        self.n_train.unwrap_or(1000)
    }

    pub fn sigma_grid(&self) -> LogGrid {
        self.sigma_grid.clone().unwrap_or(LogGrid {
            min: 0.1,
            max: 100.0,
            count: 20,
        })
    }

    pub fn conditioning(&self) -> bool {
        self.conditioning.unwrap_or(true)
    }

    pub fn timing(&self) -> bool {
        self.timing.unwrap_or(true)
    }

    pub(crate) fn tag(&self) -> u64 {
        self.experiment.tag()
    }
}
