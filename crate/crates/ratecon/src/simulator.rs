//! Monte Carlo execution of quantized consensus with real quantizers and
//! subtractive dither, for validating the analytic state-evolution
//! predictions.
//!
//! Each trial holds an `m x L` state matrix: `L` i.i.d. samples per node,
//! initialized as a shared signal plus per-node noise. Trials run in
//! parallel; every random draw comes from a counter-based stream keyed by
//! `(master seed, trial, node, iteration, role)`, so results are identical
//! regardless of thread count.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::linalg::{signal_plus_noise_cov, Matrix};
use crate::quantizers::{
    empirical_entropy_rate, fixed_rate_quantizer_for, UniformQuantizer,
};
use crate::rng::{role, stream};
use crate::state_evolution::{evolve_covariance, DistortionSchedule};
use crate::stats;
use crate::Real;

/// Quantization scheme driving a simulation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimScheme<T> {
    /// Exact (unquantized) consensus.
    Lossless,
    /// Fixed-rate subtractively dithered uniform quantization with integer
    /// rates shared by all nodes.
    FixedRate { rates: Vec<u32> },
    /// Dithered uniform quantization realizing a target distortion schedule
    /// (bin size `sqrt(12 D)` so the error variance is exactly `D`).
    DitheredSchedule { schedule: DistortionSchedule<T> },
    /// Entropy-coded scalar quantization: unbounded mid-tread quantizer with
    /// ideal-codelength (empirical entropy) rate accounting.
    Ecsq { schedule: DistortionSchedule<T>, dithered: bool },
}

impl<T: Real> SimScheme<T> {
    pub fn horizon(&self) -> Option<usize> {
        match self {
            SimScheme::Lossless => None,
            SimScheme::FixedRate { rates } => Some(rates.len()),
            SimScheme::DitheredSchedule { schedule } => Some(schedule.horizon()),
            SimScheme::Ecsq { schedule, .. } => Some(schedule.horizon()),
        }
    }
}

/// Monte Carlo configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig<T> {
    pub horizon: usize,
    /// Samples per node (vector length).
    pub samples: usize,
    pub sigma_x2: T,
    pub sigma_n2: T,
    pub trials: usize,
    pub master_seed: u64,
}

impl<T: Real> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 || self.trials < 1 {
            return Err(Error::InvalidConfig(
                "samples and trials must be at least 1".into(),
            ));
        }
        if self.sigma_x2 < T::zero() || self.sigma_n2 < T::zero() {
            return Err(Error::InvalidConfig("variances must be nonnegative".into()));
        }
        if self.sigma_x2 == T::zero() && self.sigma_n2 == T::zero() {
            return Err(Error::InvalidConfig(
                "signal and noise variances cannot both be zero".into(),
            ));
        }
        Ok(())
    }
}

/// Aggregated Monte Carlo output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimResult<T> {
    /// Empirical network MSE indexed `[trial][t]`, `t = 0 ..= T`.
    pub trial_network_mse: Vec<Vec<T>>,
    /// Empirical node MSE indexed `[trial][t][i]`.
    pub trial_node_mse: Vec<Vec<Vec<T>>>,
    /// Across-trial mean of the network MSE per iteration.
    pub mean_network_mse: Vec<T>,
    /// Across-trial standard error per iteration.
    pub se_network_mse: Vec<T>,
    /// Measured aggregate rate in bits: `m * sum_t R(t)` for fixed-rate,
    /// summed empirical entropy for ECSQ, `None` for lossless.
    pub aggregate_rate: Option<T>,
}

impl<T: Real> SimResult<T> {
    pub fn final_mse(&self) -> T {
        *self.mean_network_mse.last().unwrap()
    }
}

/// Initial `m x L` states: shared signal `x ~ N(0, sigma_x2)` per column plus
/// per-node noise `n_i ~ N(0, sigma_n2)`.
pub fn init_states<T: Real>(
    m: usize,
    config: &SimConfig<T>,
    trial: u64,
) -> Matrix<T> {
    let l = config.samples;
    let sx = config.sigma_x2.sqrt();
    let sn = config.sigma_n2.sqrt();
    let mut signal_rng = stream(config.master_seed, &[trial, role::SIGNAL]);
    let signal: Vec<T> = (0..l)
        .map(|_| T::of({ let v: f64 = StandardNormal.sample(&mut signal_rng); v }) * sx)
        .collect();
    let mut states = Matrix::zeros(m, l);
    for i in 0..m {
        let mut noise_rng = stream(config.master_seed, &[trial, i as u64, role::NOISE]);
        for c in 0..l {
            let n = T::of({ let v: f64 = StandardNormal.sample(&mut noise_rng); v });
            states[(i, c)] = signal[c] + n * sn;
        }
    }
    states
}

/// One consensus update `z(t+1) = z(t) + (W - I) q` where `q` holds the
/// quantized states (`q = z` when no quantizers are given). Quantizer `i`
/// processes row `i`; dither streams are provided per node.
pub fn consensus_step<T: Real>(
    states: &Matrix<T>,
    w: &WeightMatrix<T>,
    quantizers: Option<&[UniformQuantizer<T>]>,
    master_seed: u64,
    trial: u64,
    t: usize,
) -> Matrix<T> {
    let m = states.rows();
    let l = states.cols();
    assert_eq!(m, w.size(), "state/weight dimension mismatch");
    // quantized transmissions
    let q = match quantizers {
        None => states.clone(),
        Some(qs) => {
            assert_eq!(qs.len(), m);
            let mut out = Matrix::zeros(m, l);
            for i in 0..m {
                let mut rng =
                    stream(master_seed, &[trial, i as u64, t as u64, role::DITHER]);
                for c in 0..l {
                    out[(i, c)] = qs[i].transmit(states[(i, c)], &mut rng);
                }
            }
            out
        }
    };
    // z + (W - I) q = z + W q - q
    let wq = w.matrix().matmul(&q);
    let mut next = Matrix::zeros(m, l);
    for i in 0..m {
        for c in 0..l {
            next[(i, c)] = states[(i, c)] + wq[(i, c)] - q[(i, c)];
        }
    }
    next
}

/// Build the per-(node, iteration) quantizers implied by a scheme, using the
/// state-evolution predicted variances (open-loop design). Returns
/// `quantizers[t][i]`, or `None` for lossless.
fn build_quantizers<T: Real>(
    scheme: &SimScheme<T>,
    w: &WeightMatrix<T>,
    cov0: &Matrix<T>,
) -> Result<Option<Vec<Vec<UniformQuantizer<T>>>>> {
    let m = w.size();
    let twelve = T::of(12.0);
    match scheme {
        SimScheme::Lossless => Ok(None),
        SimScheme::FixedRate { rates } => {
            let mut out = Vec::with_capacity(rates.len());
            let mut rows: Vec<Vec<T>> = Vec::new();
            let model = crate::rd_models::RdModel::dithered_uniform_default();
            for (t, &r) in rates.iter().enumerate() {
                let partial = DistortionSchedule::Variable(rows.clone());
                let cov = evolve_covariance(w, cov0, &partial, t)?;
                let mut qt = Vec::with_capacity(m);
                let mut drow = Vec::with_capacity(m);
                for i in 0..m {
                    qt.push(fixed_rate_quantizer_for(cov[(i, i)], r)?);
                    drow.push(model.distortion_for_rate(cov[(i, i)], T::of(r as f64))?);
                }
                rows.push(drow);
                out.push(qt);
            }
            Ok(Some(out))
        }
        SimScheme::DitheredSchedule { schedule } => {
            schedule.validate(m)?;
            let mut out = Vec::with_capacity(schedule.horizon());
            for t in 0..schedule.horizon() {
                let qt = (0..m)
                    .map(|i| {
                        let b = (twelve * schedule.get(t, i)).sqrt();
                        UniformQuantizer::mid_tread(b, true)
                    })
                    .collect::<Result<_>>()?;
                out.push(qt);
            }
            Ok(Some(out))
        }
        SimScheme::Ecsq { schedule, dithered } => {
            schedule.validate(m)?;
            let mut out = Vec::with_capacity(schedule.horizon());
            for t in 0..schedule.horizon() {
                let qt = (0..m)
                    .map(|i| {
                        let b = (twelve * schedule.get(t, i)).sqrt();
                        UniformQuantizer::mid_tread(b, *dithered)
                    })
                    .collect::<Result<_>>()?;
                out.push(qt);
            }
            Ok(Some(out))
        }
    }
}

fn node_mse_row<T: Real>(states: &Matrix<T>) -> (Vec<T>, T) {
    let m = states.rows();
    let l = states.cols();
    let inv_m = T::one() / T::of(m as f64);
    let inv_l = T::one() / T::of(l as f64);
    // per-column sample mean
    let mut node = vec![T::zero(); m];
    for c in 0..l {
        let mean: T = (0..m).map(|i| states[(i, c)]).sum::<T>() * inv_m;
        for (i, acc) in node.iter_mut().enumerate() {
            let d = states[(i, c)] - mean;
            *acc = *acc + d * d;
        }
    }
    for acc in node.iter_mut() {
        *acc = *acc * inv_l;
    }
    let network = node.iter().copied().sum::<T>() * inv_m;
    (node, network)
}

/// Run the Monte Carlo experiment. The deviation is always measured against
/// the per-column initial sample mean (the quantity consensus preserves).
pub fn run<T: Real>(
    config: &SimConfig<T>,
    w: &WeightMatrix<T>,
    scheme: &SimScheme<T>,
) -> Result<SimResult<T>> {
    config.validate()?;
    if let Some(h) = scheme.horizon() {
        if h != config.horizon {
            return Err(Error::DimensionMismatch(format!(
                "scheme horizon {h} does not match config horizon {}",
                config.horizon
            )));
        }
    }
    let m = w.size();
    let cov0 = signal_plus_noise_cov(m, config.sigma_x2, config.sigma_n2);
    let quantizers = build_quantizers(scheme, w, &cov0)?;
    let per_trial: Vec<(Vec<Vec<T>>, Vec<T>, T)> = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut states = init_states(m, config, trial);
            let mut node_traj = Vec::with_capacity(config.horizon + 1);
            let mut net_traj = Vec::with_capacity(config.horizon + 1);
            let (n0, nw0) = node_mse_row(&states);
            node_traj.push(n0);
            net_traj.push(nw0);
            let mut entropy_bits = T::zero();
            for t in 0..config.horizon {
                let qs = quantizers.as_ref().map(|q| q[t].as_slice());
                if let (Some(qs), SimScheme::Ecsq { .. }) = (qs, scheme) {
                    // ideal codelength: empirical entropy of each node's
                    // transmitted levels this iteration
                    for (i, q) in qs.iter().enumerate() {
                        let mut rng = stream(
                            config.master_seed,
                            &[trial, i as u64, t as u64, role::DITHER],
                        );
                        let sent: Vec<T> = (0..config.samples)
                            .map(|c| {
                                let x = states[(i, c)];
                                if q.is_dithered() {
                                    let half = q.bin_size().as_f64() / 2.0;
                                    let dith = T::of(rand::Rng::gen_range(
                                        &mut rng,
                                        -half..half,
                                    ));
                                    q.quantize(x + dith)
                                } else {
                                    q.quantize(x)
                                }
                            })
                            .collect();
                        entropy_bits = entropy_bits + empirical_entropy_rate(&sent)?;
                    }
                }
                states =
                    consensus_step(&states, w, qs, config.master_seed, trial, t);
                let (ni, nw) = node_mse_row(&states);
                node_traj.push(ni);
                net_traj.push(nw);
            }
            Ok((node_traj, net_traj, entropy_bits))
        })
        .collect::<Result<_>>()?;
    let trial_node_mse: Vec<Vec<Vec<T>>> =
        per_trial.iter().map(|(n, _, _)| n.clone()).collect();
    let trial_network_mse: Vec<Vec<T>> =
        per_trial.iter().map(|(_, n, _)| n.clone()).collect();
    let mut mean_network_mse = Vec::with_capacity(config.horizon + 1);
    let mut se_network_mse = Vec::with_capacity(config.horizon + 1);
    for t in 0..=config.horizon {
        let col: Vec<T> = trial_network_mse.iter().map(|tr| tr[t]).collect();
        mean_network_mse.push(stats::mean(&col));
        se_network_mse.push(if col.len() > 1 {
            stats::standard_error(&col)
        } else {
            T::zero()
        });
    }
    let aggregate_rate = match scheme {
        SimScheme::Lossless => None,
        SimScheme::FixedRate { rates } => Some(
            T::of(m as f64) * T::of(rates.iter().map(|&r| r as u64).sum::<u64>() as f64),
        ),
        SimScheme::DitheredSchedule { schedule } => {
            // model-predicted rate for the realized distortions
            let model = crate::rd_models::RdModel::dithered_uniform_default();
            let mut total = T::zero();
            let mut rows: Vec<Vec<T>> = Vec::new();
            for t in 0..schedule.horizon() {
                let partial = DistortionSchedule::Variable(rows.clone());
                let cov = evolve_covariance(w, &cov0, &partial, t)?;
                let mut drow = Vec::with_capacity(m);
                for i in 0..m {
                    total = total
                        + model.rate_for_distortion(cov[(i, i)], schedule.get(t, i))?;
                    drow.push(schedule.get(t, i));
                }
                rows.push(drow);
            }
            Some(total)
        }
        SimScheme::Ecsq { .. } => {
            let mean_entropy = per_trial
                .iter()
                .map(|&(_, _, e)| e)
                .sum::<T>()
                / T::of(config.trials as f64);
            Some(mean_entropy)
        }
    };
    Ok(SimResult {
        trial_network_mse,
        trial_node_mse,
        mean_network_mse,
        se_network_mse,
        aggregate_rate,
    })
}

/// Excess MSE in decibels over the lossless baseline.
pub fn emse<T: Real>(mse: T, lossless_final: T) -> Result<T> {
    if !(mse > T::zero()) || !(lossless_final > T::zero()) {
        return Err(Error::InvalidConfig("EMSE needs positive MSE values".into()));
    }
    Ok(T::of(10.0) * (mse / lossless_final).log10())
}

/// One operating point of a rate/EMSE trade-off curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RdCurvePoint<T> {
    pub scheme: String,
    pub target_emse_db: T,
    pub predicted_rate: T,
    pub predicted_emse_db: T,
    pub simulated_rate: Option<T>,
    pub simulated_emse_db: Option<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_rgg_torus, max_degree_weights, Topology};
    use crate::state_evolution::lossless_mse;

    fn complete2() -> WeightMatrix<f64> {
        let t = Topology::from_positions(vec![[0.1, 0.1], [0.2, 0.1]], 0.2).unwrap();
        max_degree_weights(&t).unwrap()
    }

    fn base_config(horizon: usize) -> SimConfig<f64> {
        SimConfig {
            horizon,
            samples: 2000,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 20,
            master_seed: 42,
        }
    }

    #[test]
    fn config_rejects_degenerate_variances() {
        let mut c = base_config(1);
        c.sigma_x2 = 0.0;
        c.sigma_n2 = 0.0;
        assert!(c.validate().is_err());
        c.sigma_n2 = 0.5;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn init_states_share_signal_when_noiseless() {
        let mut c = base_config(1);
        c.sigma_n2 = 0.0;
        let s = init_states(4, &c, 0);
        for col in 0..10 {
            for i in 1..4 {
                assert_eq!(s[(i, col)], s[(0, col)]);
            }
        }
    }

    #[test]
    fn init_states_covariance_matches_model() {
        let c = SimConfig {
            horizon: 0,
            samples: 1,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 1,
            master_seed: 7,
        };
        let m = 3;
        let n_trials = 20_000u64;
        let mut acc = Matrix::<f64>::zeros(m, m);
        for trial in 0..n_trials {
            let s = init_states(m, &c, trial);
            for i in 0..m {
                for j in 0..m {
                    acc[(i, j)] += s[(i, 0)] * s[(j, 0)];
                }
            }
        }
        let scale = 1.0 / n_trials as f64;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.5 } else { 1.0 };
                assert!(
                    (acc[(i, j)] * scale - want).abs() < 0.05 * want,
                    "cov[{i}{j}] = {}",
                    acc[(i, j)] * scale
                );
            }
        }
    }

    #[test]
    fn lossless_step_is_exact_averaging() {
        let w = complete2();
        let mut states = Matrix::zeros(2, 1);
        states[(0, 0)] = 1.0;
        let next = consensus_step(&states, &w, None, 0, 0, 0);
        assert!((next[(0, 0)] - 0.1).abs() < 1e-15);
        assert!((next[(1, 0)] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sample_mean_preserved_under_quantization() {
        let t: Topology<f64> = generate_rgg_torus(8, 0.5, 11).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let c = SimConfig {
            horizon: 4,
            samples: 50,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 1,
            master_seed: 3,
        };
        let cov0 = signal_plus_noise_cov(8, 1.0, 0.5);
        let scheme = SimScheme::FixedRate { rates: vec![2, 2, 2, 2] };
        let qs = build_quantizers(&scheme, &w, &cov0).unwrap().unwrap();
        let mut states = init_states(8, &c, 0);
        for t_it in 0..4 {
            let before: Vec<f64> =
                (0..50).map(|col| (0..8).map(|i| states[(i, col)]).sum::<f64>() / 8.0).collect();
            states = consensus_step(&states, &w, Some(&qs[t_it]), 3, 0, t_it);
            for (col, b) in before.iter().enumerate() {
                let after: f64 = (0..8).map(|i| states[(i, col)]).sum::<f64>() / 8.0;
                let scale = b.abs().max(1.0);
                assert!((after - b).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn lossless_monte_carlo_matches_analytic() {
        let t: Topology<f64> = generate_rgg_torus(10, 0.45, 2).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let c = base_config(5);
        let res = run(&c, &w, &SimScheme::Lossless).unwrap();
        let cov0 = signal_plus_noise_cov(10, 1.0, 0.5);
        let mean0 = vec![0.0; 10];
        for t_it in 0..=5 {
            let want = lossless_mse(&w, &mean0, &cov0, t_it).unwrap();
            let got = res.mean_network_mse[t_it];
            let se = res.se_network_mse[t_it].max(1e-12);
            assert!(
                (got - want).abs() < 3.0 * se + 0.02 * want,
                "t={t_it}: {got} vs {want} (se {se})"
            );
        }
        assert!(res.aggregate_rate.is_none());
    }

    #[test]
    fn high_rate_fixed_quantizer_approaches_lossless() {
        let w = complete2();
        let c = SimConfig {
            horizon: 3,
            samples: 200,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 5,
            master_seed: 9,
        };
        let lossless = run(&c, &w, &SimScheme::Lossless).unwrap();
        let fine = run(&c, &w, &SimScheme::FixedRate { rates: vec![28, 28, 28] }).unwrap();
        for t in 0..=3 {
            assert!(
                (lossless.mean_network_mse[t] - fine.mean_network_mse[t]).abs() < 1e-6
            );
        }
    }

    #[test]
    fn dithered_schedule_tracks_prediction() {
        let t: Topology<f64> = generate_rgg_torus(8, 0.5, 6).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let c = SimConfig {
            horizon: 3,
            samples: 5000,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 30,
            master_seed: 15,
        };
        let sched = DistortionSchedule::Constant(vec![0.02, 0.02, 0.02]);
        let res = run(&c, &w, &SimScheme::DitheredSchedule { schedule: sched.clone() })
            .unwrap();
        let cov0 = signal_plus_noise_cov(8, 1.0, 0.5);
        let mean0 = vec![0.0; 8];
        let want = crate::state_evolution::error_stats(&w, &mean0, &cov0, &sched, 3)
            .unwrap()
            .network_mse;
        let got = res.final_mse();
        assert!((got - want).abs() < 0.05 * want, "{got} vs {want}");
    }

    #[test]
    fn ecsq_entropy_rate_beats_fixed_rate_at_equal_distortion() {
        let t: Topology<f64> = generate_rgg_torus(6, 0.55, 4).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let c = SimConfig {
            horizon: 2,
            samples: 4000,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 4,
            master_seed: 77,
        };
        // distortion schedule equivalent to 3-bit fixed-rate quantization
        let cov0 = signal_plus_noise_cov(6, 1.0, 0.5);
        let model = crate::rd_models::RdModel::dithered_uniform_default();
        let mut rows = Vec::new();
        for t_it in 0..2usize {
            let partial = DistortionSchedule::Variable(rows.clone());
            let cov = evolve_covariance(&w, &cov0, &partial, t_it).unwrap();
            rows.push(
                (0..6)
                    .map(|i| model.distortion_for_rate(cov[(i, i)], 3.0).unwrap())
                    .collect::<Vec<_>>(),
            );
        }
        let sched = DistortionSchedule::Variable(rows);
        let ecsq = run(
            &c,
            &w,
            &SimScheme::Ecsq { schedule: sched, dithered: true },
        )
        .unwrap();
        let fixed = run(&c, &w, &SimScheme::FixedRate { rates: vec![3, 3] }).unwrap();
        assert!(ecsq.aggregate_rate.unwrap() < fixed.aggregate_rate.unwrap());
        // at matched distortion the error trajectories agree closely
        let e = ecsq.final_mse();
        let f = fixed.final_mse();
        assert!((e - f).abs() < 0.15 * f, "{e} vs {f}");
    }

    #[test]
    fn quantization_error_whiteness() {
        let t: Topology<f64> = generate_rgg_torus(5, 0.6, 31).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let c = SimConfig {
            horizon: 2,
            samples: 200_000,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 1,
            master_seed: 55,
        };
        let cov0 = signal_plus_noise_cov(5, 1.0, 0.5);
        let scheme = SimScheme::FixedRate { rates: vec![4, 4] };
        let qs = build_quantizers(&scheme, &w, &cov0).unwrap().unwrap();
        let states = init_states(5, &c, 0);
        // reconstruct per-node error sequences at t=0
        let mut errs: Vec<Vec<f64>> = Vec::new();
        for i in 0..5 {
            let mut rng = stream(55, &[0, i as u64, 0, role::DITHER]);
            let e: Vec<f64> = (0..c.samples)
                .map(|col| qs[0][i].transmit(states[(i, col)], &mut rng) - states[(i, col)])
                .collect();
            errs.push(e);
        }
        for i in 0..5 {
            // lag-1 autocorrelation
            let a = &errs[i][..c.samples - 1];
            let b = &errs[i][1..];
            assert!(stats::correlation(a, &b.to_vec()).abs() < 0.01);
            for j in (i + 1)..5 {
                assert!(stats::correlation(&errs[i], &errs[j]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn emse_known_ratios() {
        assert!((emse(0.2_f64, 0.2).unwrap()).abs() < 1e-12);
        assert!((emse(0.4_f64, 0.2).unwrap() - 3.0102999566398).abs() < 1e-10);
        assert!((emse(2.0_f64, 0.2).unwrap() - 10.0).abs() < 1e-12);
        assert!(emse(0.0_f64, 0.2).is_err());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let t: Topology<f64> = generate_rgg_torus(6, 0.5, 8).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let c = SimConfig {
            horizon: 2,
            samples: 100,
            sigma_x2: 1.0,
            sigma_n2: 0.5,
            trials: 8,
            master_seed: 21,
        };
        let scheme = SimScheme::FixedRate { rates: vec![3, 3] };
        let a = run(&c, &w, &scheme).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run(&c, &w, &scheme).unwrap());
        assert_eq!(a.mean_network_mse, b.mean_network_mse);
    }
}
