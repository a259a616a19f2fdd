//! Per-symbol execution time against the number of users.

use std::time::Instant;

use slp_core::model::SlpInstance;
use slp_core::net::{infer, SlpDnet};
use slp_core::solvers::{solve_blp, solve_slp, SolverOptions};

use crate::config::RunConfig;
use crate::data::{self, Draw, Split};
use crate::error::Result;
use crate::scheme::SchemeId;
use crate::sweep::{summarize, Sample, SweepResult, SweepRow};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingSummary {
    pub scheme: SchemeId,
    pub n_users: usize,
    /// `None` when the scheme cannot serve `n_users`.
    pub mean_s: Option<f64>,
    pub median_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingResult {
    pub summaries: Vec<TimingSummary>,
    /// Sweep rows with `time_per_symbol_s` holding the median.
    pub rows: Vec<SweepRow>,
}

impl TimingResult {
    pub fn sweep(&self) -> SweepResult {
        SweepResult { rows: self.rows.clone() }
    }

    pub fn median(&self, scheme: SchemeId, n_users: usize) -> Option<f64> {
        self.summaries.iter().find(|s| s.scheme == scheme && s.n_users == n_users).and_then(|s| s.median_s)
    }
}

pub fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

fn time_one(scheme: SchemeId, d: &Draw, i: usize, inst: &SlpInstance, opts: &SolverOptions, net: Option<&mut SlpDnet>, cfg: &RunConfig) -> Result<Sample> {
    let tol = cfg.sweep.feasibility_tol;
    let start = Instant::now();
    let (power, residual) = match scheme {
        SchemeId::Blp => {
            let r = solve_blp(&d.channels.samples[i], &inst.targets, inst.noise, opts)?;
            (r.is_feasible(tol).then_some(r.power), r.precoder.is_some().then(|| r.max_violation()))
        }
        SchemeId::Slp(kind) => {
            let r = solve_slp(kind, inst, opts)?;
            (r.is_feasible(tol).then_some(r.power), r.precoder.is_some().then(|| r.max_violation()))
        }
        SchemeId::Dnet(_) => {
            let model = net.expect("network scheme without a model");
            let rep = infer(model, std::slice::from_ref(inst), cfg.sweep.rescale)?;
            let power = match &rep.rescaled {
                Some(r) => r[0].as_ref().map(|s| s.power),
                None => rep.feasible(0, tol).then_some(rep.power[0]),
            };
            (power, None)
        }
    };
    Ok(Sample { power, residual, seconds: start.elapsed().as_secs_f64() })
}

/// Times every configured scheme for each user count, one symbol per call on the current thread.
///
/// Network schemes use an untrained model of the configured architecture; BLP rows beyond
/// `n_antennas` users are marked infeasible without timing.
pub fn run_timing(cfg: &RunConfig) -> Result<TimingResult> {
    let t = &cfg.timing;
    let schemes = cfg.timing_schemes()?;
    let opts = cfg.solver_options();
    let mut out = TimingResult::default();
    for &scheme in &schemes {
        for &k in &t.users {
            let mut net = match scheme {
                SchemeId::Dnet(kind) => {
                    let mut nc = cfg.net_config(kind);
                    nc.n_antennas = t.n_antennas;
                    nc.n_users = k;
                    Some(SlpDnet::new(nc)?)
                }
                _ => None,
            };
            if scheme == SchemeId::Blp && k > t.n_antennas {
                out.summaries.push(TimingSummary { scheme, n_users: k, mean_s: None, median_s: None });
                let mut row = summarize(scheme, "n_users", k as f64, &[], cfg.data.seed);
                row.n_samples = t.samples;
                out.rows.push(row);
                continue;
            }
            let d = data::draw(cfg, Split::Timing(k), t.warmup + t.samples, k, t.n_antennas)?;
            let bound = if scheme.is_robust() { cfg.train.robust_error_bound_sq } else { 0.0 };
            let inst = data::instances(cfg, &d, t.sinr_db, bound)?;
            let mut samples = Vec::with_capacity(t.samples);
            for (i, x) in inst.iter().enumerate() {
                let s = time_one(scheme, &d, i, x, &opts, net.as_mut(), cfg)?;
                if i >= t.warmup {
                    samples.push(s);
                }
            }
            let secs: Vec<f64> = samples.iter().map(|s| s.seconds).collect();
            let mean = (!secs.is_empty()).then(|| secs.iter().sum::<f64>() / secs.len() as f64);
            let med = median(&secs);
            out.summaries.push(TimingSummary { scheme, n_users: k, mean_s: mean, median_s: med });
            let mut row = summarize(scheme, "n_users", k as f64, &samples, cfg.data.seed);
            row.time_per_symbol_s = med;
            out.rows.push(row);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn blp_beyond_antennas_is_marked() {
        let mut cfg = RunConfig::default();
        cfg.timing.users = vec![2, 5];
        cfg.timing.samples = 2;
        cfg.timing.warmup = 1;
        cfg.timing.schemes = vec!["BLP".into()];
        let r = run_timing(&cfg).unwrap();
        assert!(r.median(SchemeId::Blp, 2).is_some());
        assert_eq!(r.median(SchemeId::Blp, 5), None);
        assert_eq!(r.rows[1].feasibility_rate, 0.0);
        assert_eq!(r.rows[1].n_samples, 2);
    }
}
