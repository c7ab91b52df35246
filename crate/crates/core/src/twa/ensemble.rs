use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{evolve_leapfrog, LatticeSpec, Step};
use super::sampling::{sample_initial, InitialEnsemble};
use crate::error::{Error, Result};
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableConfig {
    pub samples_per_period: usize,
    /// Length of the trailing window for the `⟨cos 2φ⟩` oscillation amplitude,
    /// in drive periods; shorter runs use the whole record.
    pub window_periods: f64,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self { samples_per_period: 16, window_periods: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n_traj: usize,
    /// Sample times in drive periods.
    pub t_over_t: Vec<f64>,
    pub sigma_kin: Vec<f64>,
    pub cos2phi: Vec<f64>,
    pub delta_cos: f64,
    /// `+∞` when any trajectory blew up.
    pub sigma_final: f64,
    /// Standard error of `sigma_final` over trajectories.
    pub d_sigma: f64,
    pub blowup_fraction: f64,
    pub window_periods: f64,
    #[serde(skip)]
    per_traj: Vec<TrajectoryRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct TrajectoryRecord {
    /// `(1/K)⟨(∂xφ)²⟩` per sample.
    e_kin: Vec<f64>,
    cos2phi: Vec<f64>,
    blowup_sample: Option<usize>,
}

/// Leapfrog steps per drive period: the default step, rounded so that every
/// sample lands on a step.
pub fn steps_per_period(spec: &LatticeSpec, params: &ModelParams, samples: usize) -> usize {
    let dt = spec.default_dt(params);
    let steps = (params.period() / dt - 1e-9).ceil() as usize;
    steps.div_ceil(samples) * samples
}

/// Evolve `n_traj` Wigner samples for `periods` drive periods. Trajectory
/// `i` uses seed `base_seed ^ i`; reductions run in trajectory order.
pub fn run_ensemble(
    spec: &LatticeSpec,
    params: &ModelParams,
    ensemble: InitialEnsemble,
    n_traj: usize,
    periods: f64,
    cfg: &ObservableConfig,
    base_seed: u64,
) -> Result<EnsembleStats> {
    spec.check(params)?;
    if n_traj < 2 {
        return Err(Error::InvalidParams("need at least two trajectories".into()));
    }
    if cfg.samples_per_period == 0 || !(periods > 0.0) {
        return Err(Error::InvalidParams("sampling rate and duration must be positive".into()));
    }
    let spp = steps_per_period(spec, params, cfg.samples_per_period);
    let stride = spp / cfg.samples_per_period;
    let dt = params.period() / spp as f64;
    let n_samples = (periods * cfg.samples_per_period as f64).round() as usize;
    let total_steps = n_samples * stride;

    let per_traj: Vec<TrajectoryRecord> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut field = sample_initial(spec, params.k, ensemble, base_seed ^ i as u64);
            let mut rec = TrajectoryRecord::default();
            rec.e_kin.push(field.mean_gradient_sq(spec) / params.k);
            rec.cos2phi.push(field.mean_cos2phi());
            let outcome = evolve_leapfrog(&mut field, params, spec, dt, total_steps, |s, f| {
                if s % stride == 0 {
                    rec.e_kin.push(f.mean_gradient_sq(spec) / params.k);
                    rec.cos2phi.push(f.mean_cos2phi());
                }
                Step::Continue
            });
            if outcome.is_err() {
                rec.blowup_sample = Some(rec.e_kin.len());
                rec.e_kin.resize(n_samples + 1, f64::INFINITY);
                rec.cos2phi.resize(n_samples + 1, f64::NAN);
            }
            rec
        })
        .collect();
    let times = (0..=n_samples).map(|j| j as f64 / cfg.samples_per_period as f64).collect();
    Ok(summarise(times, per_traj, n_samples, cfg.window_periods))
}

fn summarise(times: Vec<f64>, mut per_traj: Vec<TrajectoryRecord>, last: usize, window: f64) -> EnsembleStats {
    for r in &mut per_traj {
        r.e_kin.truncate(last + 1);
        r.cos2phi.truncate(last + 1);
        r.blowup_sample = r.blowup_sample.filter(|&s| s <= last);
    }
    let n_traj = per_traj.len();
    let t_over_t: Vec<f64> = times[..=last].to_vec();
    let e: Vec<f64> = (0..=last).map(|j| per_traj.iter().map(|r| r.e_kin[j]).sum::<f64>() / n_traj as f64).collect();
    let cos2phi: Vec<f64> = (0..=last)
        .map(|j| {
            let alive: Vec<f64> = per_traj.iter().map(|r| r.cos2phi[j]).filter(|c| c.is_finite()).collect();
            if alive.is_empty() {
                f64::NAN
            } else {
                alive.iter().sum::<f64>() / alive.len() as f64
            }
        })
        .collect();
    let sigma_kin: Vec<f64> = e.iter().map(|v| v / e[0] - 1.0).collect();
    let blown = per_traj.iter().filter(|r| r.blowup_sample.is_some()).count();
    let blowup_fraction = blown as f64 / n_traj as f64;
    let (sigma_final, d_sigma) = if blown > 0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let finals: Vec<f64> = per_traj.iter().map(|r| r.e_kin[last] / e[0]).collect();
        let mean = finals.iter().sum::<f64>() / n_traj as f64;
        let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_traj as f64 - 1.0);
        (sigma_kin[last], (var / n_traj as f64).sqrt())
    };
    let t_end = t_over_t[last];
    let start = t_end - window;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (t, c) in t_over_t.iter().zip(&cos2phi) {
        if *t >= start - 1e-9 && c.is_finite() {
            lo = lo.min(*c);
            hi = hi.max(*c);
        }
    }
    let delta_cos = if hi >= lo { hi - lo } else { f64::NAN };
    EnsembleStats {
        n_traj,
        t_over_t,
        sigma_kin,
        cos2phi,
        delta_cos,
        sigma_final,
        d_sigma,
        blowup_fraction,
        window_periods: window,
        per_traj,
    }
}

impl EnsembleStats {
    /// Statistics as if the run had stopped after `periods` drive periods.
    pub fn truncated(&self, periods: f64) -> Result<EnsembleStats> {
        let last = self
            .t_over_t
            .iter()
            .rposition(|&t| t <= periods + 1e-9)
            .filter(|&j| j > 0)
            .ok_or_else(|| Error::InsufficientData(format!("no samples up to {periods} periods")))?;
        Ok(summarise(self.t_over_t.clone(), self.per_traj.clone(), last, self.window_periods))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Reduced;
    use std::f64::consts::PI;

    fn small() -> (LatticeSpec, ModelParams) {
        let spec = LatticeSpec::new(20.0, 40).unwrap();
        let params = spec.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.1, lambda: 0.1 }).unwrap();
        (spec, params)
    }

    #[test]
    fn starts_at_zero_and_is_deterministic() {
        let (spec, params) = small();
        let cfg = ObservableConfig::default();
        let a = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 4, 3.0, &cfg, 11).unwrap();
        let b = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 4, 3.0, &cfg, 11).unwrap();
        assert_eq!(a.sigma_kin[0], 0.0);
        assert_eq!(a.t_over_t.len(), 49);
        assert_eq!(a, b);
        assert_eq!(a.sigma_kin.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.sigma_kin.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let c = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 4, 3.0, &cfg, 12).unwrap();
        assert_ne!(a.sigma_final, c.sigma_final);
    }

    #[test]
    fn truncation_matches_shorter_run() {
        let (spec, params) = small();
        let cfg = ObservableConfig { samples_per_period: 8, window_periods: 1.0 };
        let long = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 4, 4.0, &cfg, 3).unwrap();
        let short = run_ensemble(&spec, &params, InitialEnsemble::Gapless, 4, 2.0, &cfg, 3).unwrap();
        assert_eq!(long.truncated(2.0).unwrap(), short);
        assert!(long.truncated(0.0).is_err());
    }

    #[test]
    fn blowup_is_absorbing() {
        let ok = TrajectoryRecord { e_kin: vec![1.0, 1.5, 2.0], cos2phi: vec![0.9, 0.8, 0.7], blowup_sample: None };
        let bad = TrajectoryRecord {
            e_kin: vec![1.0, f64::INFINITY, f64::INFINITY],
            cos2phi: vec![0.9, f64::NAN, f64::NAN],
            blowup_sample: Some(1),
        };
        let s = summarise(vec![0.0, 1.0, 2.0], vec![ok.clone(), bad], 2, 30.0);
        assert_eq!(s.sigma_final, f64::INFINITY);
        assert_eq!(s.blowup_fraction, 0.5);
        assert!((s.delta_cos - 0.2).abs() < 1e-12);
        let s = summarise(vec![0.0, 1.0, 2.0], vec![ok.clone(), ok], 2, 1.0);
        assert_eq!((s.sigma_final, s.d_sigma, s.blowup_fraction), (1.0, 0.0, 0.0));
        assert!((s.delta_cos - 0.1).abs() < 1e-12);
    }
}
