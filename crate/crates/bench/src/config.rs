//! Run configuration.
//!
//! A TOML document with one table per section. Every key is optional and
//! falls back to the shipped default; unknown keys are rejected.
//!
//! ```toml
//! [scenario]
//! n_antennas = 4
//! n_users = 4
//! modulation_order = 4
//! noise_power = 1.0
//!
//! [data]
//! train_samples = 5000
//! test_samples = 2000
//! seed = 1
//!
//! [train]
//! batch_size = 200
//! optimizer = "adam"
//! weight_initializer = "xavier"
//! learning_rate = 0.001
//! decay = 0.65
//! blocks = 2
//! pum_iterations = 15
//! apb_iterations = 10
//! sinr_low_db = 0.0
//! sinr_high_db = 45.0
//!
//! [sweep]
//! sinr_grid_db = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0]
//! error_bound_grid = [0.0, 1e-4, 2e-4, 1e-3]   # ς²
//! ```
//!
//! See `configs/default.toml` for the full key list.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slp_core::model::ModulationSpec;
use slp_core::net::{NetConfig, TrainConfig};
use slp_core::solvers::{SlpKind, SolverOptions};

use crate::error::{BenchError, Result};
use crate::scheme::SchemeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n_antennas: usize,
    pub n_users: usize,
    pub modulation_order: u32,
    /// Receiver noise power v0.
    pub noise_power: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self { n_antennas: 4, n_users: 4, modulation_order: 4, noise_power: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train_samples: usize,
    pub test_samples: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { train_samples: 5000, test_samples: 2000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub optimizer: String,
    pub weight_initializer: String,
    pub learning_rate: f64,
    pub decay: f64,
    pub vartheta: f64,
    pub blocks: usize,
    pub pum_iterations: usize,
    pub apb_iterations: usize,
    pub sinr_low_db: f64,
    pub sinr_high_db: f64,
    pub penalty_weight: f64,
    /// ς² used when training the robust network.
    pub robust_error_bound_sq: f64,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            batch_size: t.batch_size,
            optimizer: "adam".into(),
            weight_initializer: "xavier".into(),
            learning_rate: t.learning_rate,
            decay: t.decay,
            vartheta: t.vartheta,
            blocks: 2,
            pum_iterations: t.pum_iterations,
            apb_iterations: t.apb_iterations,
            sinr_low_db: t.sinr_range_db.0,
            sinr_high_db: t.sinr_range_db.1,
            penalty_weight: NetConfig::new(SlpKind::Relaxed, 1, 1).hinge_weight,
            robust_error_bound_sq: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sinr_grid_db: Vec<f64>,
    pub test_sinr_low_db: f64,
    pub test_sinr_high_db: f64,
    pub schemes: Vec<String>,
    pub error_bound_sinr_db: f64,
    /// ς² values.
    pub error_bound_grid: Vec<f64>,
    pub error_bound_schemes: Vec<String>,
    /// Scale network outputs up to feasibility before measuring power.
    pub rescale: bool,
    pub feasibility_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sinr_grid_db: (0..8).map(|i| 5.0 * i as f64).collect(),
            test_sinr_low_db: 0.0,
            test_sinr_high_db: 35.0,
            schemes: ["BLP", "SLP-strict", "SLP-relaxed", "SLP-DNet-strict", "SLP-DNet-relaxed"]
                .map(String::from)
                .to_vec(),
            error_bound_sinr_db: 30.0,
            error_bound_grid: vec![0.0, 1e-4, 2e-4, 1e-3],
            error_bound_schemes: ["SLP-relaxed", "Robust-SLP", "Robust-SLP-DNet"].map(String::from).to_vec(),
            rescale: true,
            feasibility_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub decrease: f64,
    pub mu0: f64,
    pub max_outer: usize,
    pub max_newton_per_stage: usize,
    pub max_backtracks: usize,
    pub centering_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            epsilon: o.epsilon,
            decrease: o.decrease,
            mu0: o.mu0,
            max_outer: o.max_outer,
            max_newton_per_stage: o.max_newton_per_stage,
            max_backtracks: o.max_backtracks,
            centering_tol: o.centering_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub n_antennas: usize,
    pub users: Vec<usize>,
    pub samples: usize,
    pub warmup: usize,
    pub sinr_db: f64,
    pub schemes: Vec<String>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            n_antennas: 4,
            users: (2..=8).collect(),
            samples: 200,
            warmup: 5,
            sinr_db: 20.0,
            schemes: ["BLP", "SLP-relaxed", "SLP-DNet-relaxed"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub data: DataConfig,
    pub train: TrainSection,
    pub sweep: SweepConfig,
    pub solver: SolverConfig,
    pub timing: TimingConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|source| BenchError::Parse { path: origin.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Overrides every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        let s = &self.scenario;
        if s.n_antennas == 0 || s.n_users == 0 {
            return bad("scenario.n_antennas and scenario.n_users must be positive".into());
        }
        if !(s.noise_power > 0.0 && s.noise_power.is_finite()) {
            return bad(format!("scenario.noise_power = {} must be positive", s.noise_power));
        }
        ModulationSpec::new(s.modulation_order)
            .map_err(|e| BenchError::Config(format!("scenario.modulation_order: {e}")))?;
        if self.data.train_samples == 0 || self.data.test_samples == 0 {
            return bad("data.train_samples and data.test_samples must be positive".into());
        }
        let t = &self.train;
        if !t.optimizer.eq_ignore_ascii_case("adam") {
            return bad(format!("train.optimizer = {:?}: only \"adam\" is implemented", t.optimizer));
        }
        if !t.weight_initializer.eq_ignore_ascii_case("xavier") {
            return bad(format!("train.weight_initializer = {:?}: only \"xavier\" is implemented", t.weight_initializer));
        }
        if t.blocks == 0 {
            return bad("train.blocks must be positive".into());
        }
        if !(t.robust_error_bound_sq >= 0.0) {
            return bad(format!("train.robust_error_bound_sq = {} must be nonnegative", t.robust_error_bound_sq));
        }
        self.train_config(SlpKind::Relaxed).validate().map_err(|e| BenchError::Config(format!("train: {e}")))?;
        self.net_config(SlpKind::Relaxed).validate().map_err(|e| BenchError::Config(format!("train: {e}")))?;
        let w = &self.sweep;
        if w.sinr_grid_db.is_empty() || w.error_bound_grid.is_empty() {
            return bad("sweep grids must be nonempty".into());
        }
        if let Some(g) = w.sinr_grid_db.iter().find(|g| !g.is_finite()) {
            return bad(format!("sweep.sinr_grid_db contains {g}"));
        }
        if let Some(g) = w.sinr_grid_db.iter().find(|&&g| g < w.test_sinr_low_db || g > w.test_sinr_high_db) {
            return bad(format!(
                "sweep.sinr_grid_db value {g} outside the test range [{}, {}] dB",
                w.test_sinr_low_db, w.test_sinr_high_db
            ));
        }
        if let Some(g) = w.error_bound_grid.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
            return bad(format!("sweep.error_bound_grid contains {g}"));
        }
        if !(w.feasibility_tol >= 0.0) {
            return bad("sweep.feasibility_tol must be nonnegative".into());
        }
        self.schemes()?;
        self.error_bound_schemes()?;
        self.timing_schemes()?;
        self.solver_options().validate().map_err(|e| BenchError::Config(format!("solver: {e}")))?;
        let tm = &self.timing;
        if tm.users.is_empty() || tm.users.contains(&0) || tm.n_antennas == 0 || tm.samples == 0 {
            return bad("timing.users must be nonempty and every count positive".into());
        }
        Ok(())
    }

    pub fn modulation(&self) -> ModulationSpec {
        ModulationSpec::new(self.scenario.modulation_order).expect("validated modulation order")
    }

    fn parse_schemes(list: &[String], key: &str) -> Result<Vec<SchemeId>> {
        if list.is_empty() {
            return Err(BenchError::Config(format!("{key} must be nonempty")));
        }
        list.iter()
            .map(|s| s.parse().map_err(|_| BenchError::Config(format!("{key}: unknown scheme {s:?}"))))
            .collect()
    }

    pub fn schemes(&self) -> Result<Vec<SchemeId>> {
        Self::parse_schemes(&self.sweep.schemes, "sweep.schemes")
    }

    pub fn error_bound_schemes(&self) -> Result<Vec<SchemeId>> {
        Self::parse_schemes(&self.sweep.error_bound_schemes, "sweep.error_bound_schemes")
    }

    pub fn timing_schemes(&self) -> Result<Vec<SchemeId>> {
        Self::parse_schemes(&self.timing.schemes, "timing.schemes")
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            epsilon: s.epsilon,
            decrease: s.decrease,
            mu0: s.mu0,
            max_outer: s.max_outer,
            max_newton_per_stage: s.max_newton_per_stage,
            max_backtracks: s.max_backtracks,
            centering_tol: s.centering_tol,
        }
    }

    pub fn train_config(&self, kind: SlpKind) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            decay: t.decay,
            vartheta: t.vartheta,
            pum_iterations: t.pum_iterations,
            apb_iterations: t.apb_iterations,
            sinr_range_db: (t.sinr_low_db, t.sinr_high_db),
            noise: self.scenario.noise_power,
            error_bound: if kind == SlpKind::Robust { t.robust_error_bound_sq.sqrt() } else { 0.0 },
            seed: t.seed,
        }
    }

    pub fn net_config(&self, kind: SlpKind) -> NetConfig {
        let mut c = NetConfig::new(kind, self.scenario.n_antennas, self.scenario.n_users);
        c.blocks = self.train.blocks;
        c.hinge_weight = self.train.penalty_weight;
        c.seed = self.train.seed;
        c
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.output.dir.join("checkpoints")
    }

    pub fn checkpoint_path(&self, kind: SlpKind) -> PathBuf {
        self.checkpoint_dir().join(format!("{}.ckpt", SchemeId::Dnet(kind).name()))
    }
}
