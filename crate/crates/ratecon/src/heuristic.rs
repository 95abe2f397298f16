//! Integer fixed-rate schedules for dithered uniform quantization, found by
//! searching a trellis of rounded perturbations around the relaxed
//! (real-valued) optimizer output, plus an exhaustive oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ggp::RateAllocation;
use crate::graph::WeightMatrix;
use crate::linalg::Matrix;
use crate::rd_models::RdModel;
use crate::state_evolution::DistortionSchedule;
use crate::Real;

/// Hard cap on the number of sequences the exhaustive oracle will enumerate.
const ENUMERATION_GUARD: u64 = 10_000_000;

/// A node-constant integer rate schedule `R(t)`, one bit or more per entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegerSchedule<T> {
    pub rates: Vec<u32>,
    /// Total bits across nodes and iterations: `m * sum_t R(t)`.
    pub aggregate: u64,
    /// Final network MSE predicted by state evolution, if evaluated.
    pub predicted_mse: Option<T>,
}

impl<T: Real> IntegerSchedule<T> {
    fn new(rates: Vec<u32>, m: usize) -> Self {
        let sum: u64 = rates.iter().map(|&r| r as u64).sum();
        IntegerSchedule { rates, aggregate: m as u64 * sum, predicted_mse: None }
    }
}

/// Outcome of the trellis search: either a feasible optimum or, when nothing
/// in the candidate set meets the target, the lowest-MSE infeasible
/// candidate for diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum SearchOutcome<T> {
    Feasible(IntegerSchedule<T>),
    Infeasible { best_candidate: IntegerSchedule<T>, mse_target: T },
}

impl<T: Real> SearchOutcome<T> {
    pub fn feasible(self) -> Result<IntegerSchedule<T>> {
        match self {
            SearchOutcome::Feasible(s) => Ok(s),
            SearchOutcome::Infeasible { best_candidate, mse_target } => {
                Err(Error::InfeasibleTarget {
                    target: mse_target.as_f64(),
                    floor: best_candidate
                        .predicted_mse
                        .map(|m| m.as_f64())
                        .unwrap_or(f64::NAN),
                })
            }
        }
    }
}

/// Per-iteration average of the relaxed rates: `R(t) = (1/m) sum_i R_i(t)`.
pub fn average_ggp_rates<T: Real>(alloc: &RateAllocation<T>) -> Vec<T> {
    alloc
        .rates
        .iter()
        .map(|row| row.iter().copied().sum::<T>() / T::of(row.len() as f64))
        .collect()
}

/// Candidate schedules around a real-valued sequence: every +/-1
/// perturbation, clamped below at 1, then every floor/ceil rounding pattern;
/// duplicates removed. At most `4^T` candidates.
pub fn build_trellis<T: Real>(rggp: &[T], m: usize) -> Vec<IntegerSchedule<T>> {
    let horizon = rggp.len();
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for sign_bits in 0u64..(1 << horizon) {
        // perturbed real sequence, clamped to >= 1 before rounding
        let perturbed: Vec<f64> = (0..horizon)
            .map(|t| {
                let delta = if sign_bits >> t & 1 == 1 { 1.0 } else { -1.0 };
                (rggp[t].as_f64() + delta).max(1.0)
            })
            .collect();
        for round_bits in 0u64..(1 << horizon) {
            let rates: Vec<u32> = (0..horizon)
                .map(|t| {
                    let v = if round_bits >> t & 1 == 1 {
                        perturbed[t].ceil()
                    } else {
                        perturbed[t].floor()
                    };
                    (v as u32).max(1)
                })
                .collect();
            if seen.insert(rates.clone()) {
                out.push(IntegerSchedule::new(rates, m));
            }
        }
    }
    out
}

/// Final network MSE of an integer schedule under the given RD model: the
/// distortion at iteration `t` follows from the predicted variance at `t`,
/// which itself depends on the distortions injected before `t`, so the
/// recursion runs forward.
pub fn predict_schedule_mse<T: Real>(
    rates: &[u32],
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    model: &RdModel<T>,
) -> Result<(T, DistortionSchedule<T>)> {
    let m = w.size();
    let horizon = rates.len();
    let mut rows: Vec<Vec<T>> = Vec::with_capacity(horizon);
    for (t, &r) in rates.iter().enumerate() {
        let partial = DistortionSchedule::Variable(rows.clone());
        let cov = crate::state_evolution::evolve_covariance(w, cov0, &partial, t)?;
        let row: Vec<T> = (0..m)
            .map(|i| model.distortion_for_rate(cov[(i, i)], T::of(r as f64)))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let schedule = DistortionSchedule::Variable(rows);
    let mse = crate::state_evolution::error_stats(w, mean0, cov0, &schedule, horizon)?
        .network_mse;
    Ok((mse, schedule))
}

/// Pick the feasible candidate with minimum aggregate rate; ties broken by
/// lowest predicted MSE, then lexicographically for determinism.
pub fn search<T: Real>(
    candidates: &[IntegerSchedule<T>],
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    model: &RdModel<T>,
    mse_target: T,
) -> Result<SearchOutcome<T>> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("empty candidate set".into()));
    }
    let mut best_feasible: Option<IntegerSchedule<T>> = None;
    let mut best_infeasible: Option<IntegerSchedule<T>> = None;
    for cand in candidates {
        let (mse, _) = predict_schedule_mse(&cand.rates, w, mean0, cov0, model)?;
        let mut scored = cand.clone();
        scored.predicted_mse = Some(mse);
        if mse <= mse_target {
            let better = match &best_feasible {
                None => true,
                Some(b) => {
                    let bm = b.predicted_mse.unwrap();
                    scored.aggregate < b.aggregate
                        || (scored.aggregate == b.aggregate && mse < bm)
                        || (scored.aggregate == b.aggregate
                            && mse == bm
                            && scored.rates < b.rates)
                }
            };
            if better {
                best_feasible = Some(scored);
            }
        } else {
            let better = match &best_infeasible {
                None => true,
                Some(b) => mse < b.predicted_mse.unwrap(),
            };
            if better {
                best_infeasible = Some(scored);
            }
        }
    }
    Ok(match best_feasible {
        Some(s) => SearchOutcome::Feasible(s),
        None => SearchOutcome::Infeasible {
            best_candidate: best_infeasible.unwrap(),
            mse_target,
        },
    })
}

/// True optimum over all integer sequences with entries >= 1 and per-node
/// total `sum_t R(t) <= budget`, under the same feasibility and tie-break
/// rules as [`search`].
pub fn exhaustive_search<T: Real>(
    horizon: usize,
    budget: u32,
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    model: &RdModel<T>,
    mse_target: T,
) -> Result<SearchOutcome<T>> {
    if (budget as usize) < horizon {
        return Err(Error::InvalidConfig(format!(
            "budget {budget} cannot give {horizon} iterations one bit each"
        )));
    }
    // number of sequences: C(budget, horizon) compositions; guard first
    let count = count_sequences(horizon as u64, budget as u64);
    if count > ENUMERATION_GUARD {
        return Err(Error::SearchTooLarge(count));
    }
    let m = w.size();
    let mut candidates = Vec::new();
    let mut rates = vec![1u32; horizon];
    loop {
        candidates.push(IntegerSchedule::new(rates.clone(), m));
        // odometer over sequences with sum <= budget, entries >= 1
        let mut k = 0;
        loop {
            if k == horizon {
                let out = search(&candidates, w, mean0, cov0, model, mse_target)?;
                return Ok(out);
            }
            rates[k] += 1;
            if rates.iter().map(|&r| r as u64).sum::<u64>() <= budget as u64 {
                break;
            }
            rates[k] = 1;
            k += 1;
        }
    }
}

/// Number of integer sequences of the given length with entries >= 1 summing
/// to at most `budget` (saturating).
fn count_sequences(len: u64, budget: u64) -> u64 {
    if budget < len {
        return 0;
    }
    // sum_{s=len}^{budget} C(s-1, len-1) = C(budget, len)
    let mut c: u64 = 1;
    for k in 1..=len {
        c = c.saturating_mul(budget + 1 - k) / k;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ggp::{build_problem, solve, Mode};
    use crate::graph::{generate_rgg_torus, max_degree_weights, Topology};
    use crate::linalg::signal_plus_noise_cov;

    fn complete2() -> WeightMatrix<f64> {
        let t = Topology::from_positions(vec![[0.1, 0.1], [0.2, 0.1]], 0.2).unwrap();
        max_degree_weights(&t).unwrap()
    }

    #[test]
    fn average_of_equal_rates_is_identity() {
        let alloc: RateAllocation<f64> = RateAllocation {
            distortions: DistortionSchedule::Constant(vec![0.1, 0.1]),
            rates: vec![vec![2.0, 4.0], vec![3.0, 3.0]],
            aggregate_rate: 12.0,
            predicted_mse: vec![],
            status: crate::ggp::SolverStatus::Optimal,
            iterations: 0,
        };
        assert_eq!(average_ggp_rates(&alloc), vec![3.0, 3.0]);
    }

    #[test]
    fn trellis_hand_enumerations() {
        let c: Vec<u32> = build_trellis(&[2.4_f64], 2)
            .into_iter()
            .map(|s| s.rates[0])
            .collect();
        let mut sorted = c.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![1, 2, 3, 4]);

        let c: Vec<u32> = build_trellis(&[0.2_f64], 2)
            .into_iter()
            .map(|s| s.rates[0])
            .collect();
        let mut sorted = c.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![1, 2]);
    }

    #[test]
    fn trellis_is_deduplicated_and_clamped() {
        let cands = build_trellis(&[1.5_f64, 0.3, 4.7], 5);
        assert!(cands.len() <= 64);
        let mut seen = std::collections::BTreeSet::new();
        for c in &cands {
            assert!(c.rates.iter().all(|&r| r >= 1));
            assert!(seen.insert(c.rates.clone()));
            assert_eq!(
                c.aggregate,
                5 * c.rates.iter().map(|&r| r as u64).sum::<u64>()
            );
        }
    }

    #[test]
    fn huge_target_yields_all_ones() {
        let w = complete2();
        let cov0 = signal_plus_noise_cov(2, 1.0, 0.5);
        let mean0 = vec![0.0; 2];
        let model = RdModel::dithered_uniform_default();
        let cands = build_trellis(&[2.0_f64, 2.0, 2.0], 2);
        let out = search(&cands, &w, &mean0, &cov0, &model, 1e9).unwrap();
        let s = out.feasible().unwrap();
        assert_eq!(s.rates, vec![1, 1, 1]);
    }

    #[test]
    fn infeasible_search_reports_best_candidate() {
        let w = complete2();
        let cov0 = signal_plus_noise_cov(2, 1.0, 0.5);
        let mean0 = vec![0.0; 2];
        let model = RdModel::dithered_uniform_default();
        let cands = build_trellis(&[1.0_f64], 2);
        let out = search(&cands, &w, &mean0, &cov0, &model, 1e-12).unwrap();
        match out {
            SearchOutcome::Infeasible { best_candidate, .. } => {
                assert!(best_candidate.predicted_mse.unwrap() > 1e-12);
            }
            SearchOutcome::Feasible(_) => panic!("expected infeasible"),
        }
    }

    #[test]
    fn raising_a_rate_keeps_feasibility() {
        let w = complete2();
        let cov0 = signal_plus_noise_cov(2, 1.0, 0.5);
        let mean0 = vec![0.0; 2];
        let model = RdModel::dithered_uniform_default();
        let (mse_lo, _) =
            predict_schedule_mse(&[3, 3, 3], &w, &mean0, &cov0, &model).unwrap();
        let (mse_hi, _) =
            predict_schedule_mse(&[3, 4, 3], &w, &mean0, &cov0, &model).unwrap();
        assert!(mse_hi <= mse_lo + 1e-15);
    }

    #[test]
    fn heuristic_matches_exhaustive_on_small_instances() {
        let t: Topology<f64> = generate_rgg_torus(4, 0.6, 19).unwrap();
        let w = max_degree_weights(&t).unwrap();
        let cov0 = signal_plus_noise_cov(4, 1.0, 0.5);
        let mean0 = vec![0.0; 4];
        let model = RdModel::dithered_uniform_default();
        for horizon in 2..=4usize {
            let floor =
                crate::state_evolution::lossless_mse(&w, &mean0, &cov0, horizon).unwrap();
            let target = floor * 1.25;
            let p = build_problem(
                &w,
                &mean0,
                &cov0,
                horizon,
                target,
                model.clone(),
                Mode::Constant,
            )
            .unwrap();
            let alloc = solve(&p, 1e-8, 500).unwrap();
            let rggp = average_ggp_rates(&alloc);
            let cands = build_trellis(&rggp, 4);
            let heur = search(&cands, &w, &mean0, &cov0, &model, target)
                .unwrap()
                .feasible()
                .unwrap();
            let budget = rggp.iter().sum::<f64>().ceil().max(horizon as f64) as u32 + 1;
            let exact =
                exhaustive_search(horizon, budget, &w, &mean0, &cov0, &model, target)
                    .unwrap()
                    .feasible()
                    .unwrap();
            assert_eq!(
                heur.aggregate, exact.aggregate,
                "h={horizon}: {:?} vs {:?}",
                heur.rates, exact.rates
            );
        }
    }

    #[test]
    fn exhaustive_guards() {
        let w = complete2();
        let cov0 = signal_plus_noise_cov(2, 1.0, 0.5);
        let mean0 = vec![0.0; 2];
        let model: RdModel<f64> = RdModel::dithered_uniform_default();
        assert!(matches!(
            exhaustive_search(3, 2, &w, &mean0, &cov0, &model, 0.2),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            exhaustive_search(10, 200, &w, &mean0, &cov0, &model, 0.2),
            Err(Error::SearchTooLarge(_))
        ));
    }

    #[test]
    fn sequence_count_formula() {
        assert_eq!(count_sequences(1, 4), 4);
        assert_eq!(count_sequences(2, 3), 3); // (1,1),(1,2),(2,1)
        assert_eq!(count_sequences(3, 3), 1);
        assert_eq!(count_sequences(3, 2), 0);
    }
}
