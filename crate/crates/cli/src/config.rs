//! Experiment configuration: a flat TOML file whose keys mirror
//! [`ExperimentConfig`], with command-line overrides on top.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use eimvr::estimator::DEFAULT_ALPHA;
use eimvr::fullfield::{Scheme, SolverConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use eimvr::microstructure::{McConfig, CLOSE_PACKING_FRACTION};

use crate::error::{CliError, IoContext, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    /// Fixed point below two decades of contrast, conjugate gradients above.
    Auto,
    BasicFixedPoint,
    ConjugateGradient,
}

/// Every knob of a run. The cell side is always 1; radii follow from
/// `n_disks` and the fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n_disks: usize,
    /// Final inclusion fraction `f`.
    pub fraction: f64,
    /// Fraction `f'` at which the ensemble is equilibrated before shrinking.
    pub initial_fraction: f64,
    pub mc_cycles: u64,
    pub sigma0: f64,
    /// Contrast of `estimate` and `discriminate`.
    pub chi: f64,
    /// Contrasts of `sweep-contrast`.
    pub chi_list: Vec<f64>,
    /// Number `M` of full-field solves.
    pub full_field_samples: usize,
    /// Number of surrogate evaluations used for `E(Y)`.
    pub surrogate_samples: usize,
    pub truncation_p: usize,
    /// Truncations reported by `sweep-contrast`.
    pub truncation_list: Vec<usize>,
    /// `f'` of each family compared by `discriminate`.
    pub family_initial_fractions: Vec<f64>,
    pub grid: usize,
    pub solver_scheme: SchemeChoice,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
    pub alpha: f64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 2024,
            n_disks: 32,
            fraction: 0.5,
            initial_fraction: 0.5,
            mc_cycles: 10_000,
            sigma0: 1.0,
            chi: 10.0,
            chi_list: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6],
            full_field_samples: 100,
            surrogate_samples: 10_000,
            truncation_p: 2,
            truncation_list: vec![1, 2, 3],
            family_initial_fractions: vec![0.40, 0.45, 0.50],
            grid: 256,
            solver_scheme: SchemeChoice::Auto,
            solver_tolerance: DEFAULT_TOLERANCE,
            solver_max_iterations: DEFAULT_MAX_ITERATIONS,
            alpha: DEFAULT_ALPHA,
            out_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

/// Values given on the command line; `None` keeps the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub grid: Option<usize>,
    pub truncation_p: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| CliError::ConfigParse { path: origin.to_path_buf(), source })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Self::from_toml_str(&text, path)
    }

    /// File (or defaults) plus overrides, validated.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.master_seed = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = o.threads {
            self.threads = v;
        }
        if let Some(v) = o.grid {
            self.grid = v;
        }
        if let Some(v) = o.truncation_p {
            self.truncation_p = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.n_disks == 0 {
            return fail("n_disks must be at least 1".into());
        }
        if !(self.fraction > 0.0 && self.fraction <= self.initial_fraction && self.initial_fraction < CLOSE_PACKING_FRACTION) {
            return fail(format!(
                "need 0 < fraction <= initial_fraction < {CLOSE_PACKING_FRACTION:.4}, got {} and {}",
                self.fraction, self.initial_fraction
            ));
        }
        if let Some(fp) = self.family_initial_fractions.iter().find(|&&fp| !(fp > 0.0 && fp < CLOSE_PACKING_FRACTION)) {
            return fail(format!("family initial fraction {fp} must lie in (0, close packing)"));
        }
        if !(self.sigma0 > 0.0) {
            return fail(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if let Some(c) = std::iter::once(&self.chi).chain(&self.chi_list).find(|c| !(**c > 0.0 && c.is_finite())) {
            return fail(format!("contrasts must be positive, got {c}"));
        }
        if self.full_field_samples < 2 {
            return fail("full_field_samples must be at least 2".into());
        }
        if self.surrogate_samples < self.full_field_samples {
            return fail(format!(
                "surrogate_samples ({}) must be at least full_field_samples ({})",
                self.surrogate_samples, self.full_field_samples
            ));
        }
        if self.truncation_p == 0 || self.truncation_list.contains(&0) {
            return fail("truncation P must be at least 1".into());
        }
        if self.grid < 16 {
            return fail(format!("grid must be at least 16, got {}", self.grid));
        }
        if !(self.solver_tolerance > 0.0) {
            return fail("solver_tolerance must be positive".into());
        }
        if !(self.alpha > 0.0) {
            return fail("alpha must be positive".into());
        }
        Ok(())
    }

    pub fn mc_config(&self, initial_fraction: f64, seed: u64) -> McConfig {
        McConfig::new(self.n_disks, self.fraction, initial_fraction, self.mc_cycles, seed)
    }

    pub fn solver_config(&self, chi: f64) -> SolverConfig {
        let base = SolverConfig::for_contrast(chi);
        let scheme = match self.solver_scheme {
            SchemeChoice::Auto => base.scheme,
            SchemeChoice::BasicFixedPoint => Scheme::BasicFixedPoint,
            SchemeChoice::ConjugateGradient => Scheme::ConjugateGradient,
        };
        SolverConfig {
            scheme,
            reference_sigma: None,
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
        }
    }

    /// The settings that determine the numbers produced by a run; used to
    /// refuse resuming into an output directory written by another run.
    pub fn fingerprint(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("configuration serialises");
        if let Some(map) = v.as_object_mut() {
            map.remove("out_dir");
            map.remove("threads");
        }
        v
    }
}
