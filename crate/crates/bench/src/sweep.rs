//! Power sweeps and the result CSV.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use slp_core::model::{linear_to_db, SlpInstance};
use slp_core::net::{infer, load_checkpoint, SlpDnet};
use slp_core::solvers::{constraint_residuals, solve_blp, solve_slp, SlpKind, SolveReport, SolverOptions, UserSlack};

use crate::config::RunConfig;
use crate::data::{self, Draw};
use crate::error::{BenchError, Result};
use crate::scheme::SchemeId;

pub const CSV_HEADER: [&str; 10] = [
    "scheme",
    "grid_param_name",
    "grid_value",
    "mean_power_db",
    "mean_power_linear",
    "feasibility_rate",
    "mean_residual",
    "time_per_symbol_s",
    "n_samples",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: String,
    pub grid_param_name: String,
    pub grid_value: f64,
    pub mean_power_db: Option<f64>,
    pub mean_power_linear: Option<f64>,
    pub feasibility_rate: f64,
    pub mean_residual: Option<f64>,
    pub time_per_symbol_s: Option<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// True when there is at least one row and no row has a feasible sample.
    pub fn infeasible_only(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.feasibility_rate == 0.0)
    }

    pub fn row(&self, scheme: SchemeId, grid_value: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.scheme == scheme.name() && r.grid_value == grid_value)
    }

    pub fn scheme_rows(&self, scheme: SchemeId) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.scheme == scheme.name()).collect()
    }
}

/// Outcome of one sample: power when feasible, largest constraint violation when a precoder exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub power: Option<f64>,
    pub residual: Option<f64>,
    pub seconds: f64,
}

impl Sample {
    fn failed() -> Self {
        Sample { power: None, residual: None, seconds: 0.0 }
    }
}

pub fn summarize(
    scheme: SchemeId,
    grid_param_name: &str,
    grid_value: f64,
    samples: &[Sample],
    seed: u64,
) -> SweepRow {
    let n = samples.len();
    let feasible: Vec<f64> = samples.iter().filter_map(|s| s.power).collect();
    let residuals: Vec<f64> = samples.iter().filter_map(|s| s.residual).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let power = mean(&feasible);
    SweepRow {
        scheme: scheme.name().to_string(),
        grid_param_name: grid_param_name.to_string(),
        grid_value,
        mean_power_db: power.map(linear_to_db),
        mean_power_linear: power,
        feasibility_rate: if n == 0 { 0.0 } else { feasible.len() as f64 / n as f64 },
        mean_residual: mean(&residuals),
        time_per_symbol_s: (n > 0).then(|| samples.iter().map(|s| s.seconds).sum::<f64>() / n as f64),
        n_samples: n,
        seed,
    }
}

fn max_violation(res: &[UserSlack]) -> f64 {
    res.iter().map(UserSlack::violation).fold(0.0, f64::max)
}

fn from_report(r: &SolveReport, tol: f64) -> Sample {
    Sample {
        power: r.is_feasible(tol).then_some(r.power),
        residual: r.precoder.is_some().then(|| r.max_violation()),
        seconds: r.wall_time,
    }
}

/// Evaluates schemes on instance sets; holds the trained networks.
pub struct Evaluator<'a> {
    cfg: &'a RunConfig,
    opts: SolverOptions,
    models: HashMap<SlpKind, SlpDnet>,
    /// Samples whose solver call returned an error; they count as infeasible.
    pub failures: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Self { cfg, opts: cfg.solver_options(), models: HashMap::new(), failures: 0 }
    }

    pub fn insert_model(&mut self, model: SlpDnet) {
        self.models.insert(model.config.kind, model);
    }

    /// Loads the checkpoint of every network scheme in `schemes` that is not already present.
    pub fn load_models(&mut self, schemes: &[SchemeId]) -> Result<()> {
        for &s in schemes {
            if let SchemeId::Dnet(kind) = s {
                if self.models.contains_key(&kind) {
                    continue;
                }
                let path = self.cfg.checkpoint_path(kind);
                if !path.exists() {
                    return Err(BenchError::MissingCheckpoint { scheme: s.name().to_string(), path });
                }
                self.insert_model(load_checkpoint(&path)?);
            }
        }
        Ok(())
    }

    pub fn evaluate(&mut self, scheme: SchemeId, draw: &Draw, instances: &[SlpInstance]) -> Result<Vec<Sample>> {
        let tol = self.cfg.sweep.feasibility_tol;
        let opts = &self.opts;
        let (samples, failures): (Vec<Sample>, usize) = match scheme {
            SchemeId::Blp => {
                let out: Vec<Option<Sample>> = draw
                    .channels
                    .samples
                    .par_iter()
                    .zip(instances.par_iter())
                    .map(|(h, inst)| solve_blp(h, &inst.targets, inst.noise, opts).ok().map(|r| from_report(&r, tol)))
                    .collect();
                collect_failures(out)
            }
            SchemeId::Slp(kind) => {
                let out: Vec<Option<Sample>> = instances
                    .par_iter()
                    .map(|inst| solve_slp(kind, inst, opts).ok().map(|r| from_report(&r, tol)))
                    .collect();
                collect_failures(out)
            }
            SchemeId::Dnet(kind) => {
                let rescale = self.cfg.sweep.rescale;
                let model = self.models.get_mut(&kind).ok_or_else(|| BenchError::MissingCheckpoint {
                    scheme: scheme.name().to_string(),
                    path: self.cfg.checkpoint_path(kind),
                })?;
                (network_samples(model, instances, rescale, tol)?, 0)
            }
        };
        if failures > 0 {
            eprintln!("warning: {failures} {scheme} solves failed and count as infeasible");
        }
        self.failures += failures;
        Ok(samples)
    }
}

fn collect_failures(out: Vec<Option<Sample>>) -> (Vec<Sample>, usize) {
    let failures = out.iter().filter(|s| s.is_none()).count();
    (out.into_iter().map(|s| s.unwrap_or_else(Sample::failed)).collect(), failures)
}

const INFER_CHUNK: usize = 250;

/// Network inference over `instances`, optionally rescaled to feasibility.
pub fn network_samples(model: &mut SlpDnet, instances: &[SlpInstance], rescale: bool, tol: f64) -> Result<Vec<Sample>> {
    let kind = model.config.kind;
    let mut out = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(INFER_CHUNK) {
        let start = Instant::now();
        let rep = infer(model, chunk, rescale)?;
        let seconds = start.elapsed().as_secs_f64() / chunk.len() as f64;
        for (i, inst) in chunk.iter().enumerate() {
            let raw = max_violation(&rep.residuals[i]);
            let sample = match &rep.rescaled {
                Some(r) => match &r[i] {
                    Some(sc) => {
                        let w: DVector<f64> = &rep.precoders[i].w1 * sc.factor;
                        let v = max_violation(&constraint_residuals(kind, inst, &w)?);
                        Sample { power: (v <= tol).then_some(sc.power), residual: Some(v), seconds }
                    }
                    None => Sample { power: None, residual: Some(raw), seconds },
                },
                None => Sample { power: (raw <= tol).then_some(rep.power[i]), residual: Some(raw), seconds },
            };
            out.push(sample);
        }
    }
    Ok(out)
}

/// Mean power per scheme and SINR grid point on the test draw.
pub fn run_power_vs_sinr(cfg: &RunConfig, ev: &mut Evaluator) -> Result<SweepResult> {
    let schemes = cfg.schemes()?;
    ev.load_models(&schemes)?;
    let draw = data::test_draw(cfg)?;
    let mut rows = Vec::new();
    for &scheme in &schemes {
        let bound = if scheme.is_robust() { cfg.train.robust_error_bound_sq } else { 0.0 };
        for &g in &cfg.sweep.sinr_grid_db {
            let inst = data::instances(cfg, &draw, g, bound)?;
            let samples = ev.evaluate(scheme, &draw, &inst)?;
            rows.push(summarize(scheme, "sinr_db", g, &samples, cfg.data.seed));
        }
    }
    Ok(SweepResult { rows })
}

/// Mean power per scheme and ς² at the fixed error-bound SINR.
///
/// Nonrobust schemes are evaluated on the nominal instances at every grid point.
pub fn run_power_vs_errorbound(cfg: &RunConfig, ev: &mut Evaluator) -> Result<SweepResult> {
    let schemes = cfg.error_bound_schemes()?;
    ev.load_models(&schemes)?;
    let draw = data::test_draw(cfg)?;
    let g = cfg.sweep.error_bound_sinr_db;
    let mut rows = Vec::new();
    for &scheme in &schemes {
        for &e in &cfg.sweep.error_bound_grid {
            let inst = data::instances(cfg, &draw, g, if scheme.is_robust() { e } else { 0.0 })?;
            let samples = ev.evaluate(scheme, &draw, &inst)?;
            rows.push(summarize(scheme, "error_bound_sq", e, &samples, cfg.data.seed));
        }
    }
    Ok(SweepResult { rows })
}

/// One scheme at one SINR.
pub fn run_single(cfg: &RunConfig, ev: &mut Evaluator, scheme: SchemeId, sinr_db: f64) -> Result<SweepResult> {
    ev.load_models(&[scheme])?;
    let draw = data::test_draw(cfg)?;
    let bound = if scheme.is_robust() { cfg.train.robust_error_bound_sq } else { 0.0 };
    let inst = data::instances(cfg, &draw, sinr_db, bound)?;
    let samples = ev.evaluate(scheme, &draw, &inst)?;
    Ok(SweepResult { rows: vec![summarize(scheme, "sinr_db", sinr_db, &samples, cfg.data.seed)] })
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let to_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(to_err)?;
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for row in &result.rows {
        w.serialize(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<SweepResult> {
    let to_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(to_err)?;
    let header = r.headers().map_err(to_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(BenchError::Config(format!("{}: unexpected header {header:?}", path.display())));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>().map_err(to_err)?;
    Ok(SweepResult { rows })
}
