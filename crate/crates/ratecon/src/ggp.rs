//! Aggregate-rate minimization as a generalized geometric program.
//!
//! Node variances and the network MSE are posynomials (here: affine with
//! positive coefficients) in the distortions `D_i(t)`. Minimizing the total
//! coding rate subject to a final-MSE cap therefore becomes, after the log
//! change of variables `y = ln D`, a smooth convex program:
//!
//! * each rate factor `max{sigma_i^2(D,t)/D_i(t), k}` is handled with an
//!   epigraph variable `u` bounded below by the log of both branches, and
//! * the MSE cap becomes a log-sum-exp inequality.
//!
//! The resulting problem is solved with a log-barrier interior method whose
//! inner iterations use BFGS with Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::linalg::Matrix;
use crate::rd_models::RdModel;
use crate::state_evolution::{error_stats, lossless_mse, DistortionSchedule};
use crate::Real;

/// Relative threshold below which posynomial coefficients are dropped.
const PRUNE_REL: f64 = 1e-14;

/// Posynomial in the distortions, affine form: `constant + sum_j a_j D_{idx_j}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Posynomial<T> {
    pub constant: T,
    /// `(variable index, coefficient)` pairs with strictly positive coefficients.
    pub terms: Vec<(usize, T)>,
}

impl<T: Real> Posynomial<T> {
    fn pruned(constant: T, mut terms: Vec<(usize, T)>) -> Self {
        let mut largest = constant;
        for &(_, a) in &terms {
            largest = largest.max(a);
        }
        let cut = largest * T::of(PRUNE_REL);
        terms.retain(|&(_, a)| a > cut);
        Posynomial { constant, terms }
    }

    /// Evaluate at a dense distortion vector.
    pub fn eval(&self, d: &[T]) -> T {
        self.constant + self.terms.iter().map(|&(j, a)| a * d[j]).sum::<T>()
    }

    /// Total linear-coefficient mass.
    pub fn coefficient_mass(&self) -> T {
        self.terms.iter().map(|&(_, a)| a).sum()
    }

    /// Remap variable indices, merging coefficients that collide.
    fn remapped(&self, map: impl Fn(usize) -> usize, nvars: usize) -> Posynomial<T> {
        let mut acc = vec![T::zero(); nvars];
        for &(j, a) in &self.terms {
            acc[map(j)] = acc[map(j)] + a;
        }
        let terms = acc
            .into_iter()
            .enumerate()
            .filter(|&(_, a)| a > T::zero())
            .collect();
        Posynomial { constant: self.constant, terms }
    }
}

/// Whether all nodes share one distortion per iteration or each node gets
/// its own.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Constant,
    Variable,
}

/// Variable index of `D_i(t)` in variable mode (`t*m + i`).
fn var_of(t: usize, i: usize, m: usize) -> usize {
    t * m + i
}

/// Node variance `sigma_i^2(D, t)` as a posynomial over variable-mode
/// indices: constant `[W^t cov0 W^t]_ii` plus `[Ŵ(t,s)]_ik^2 D_k(s)` terms
/// with `Ŵ(t,s) = W^{t-s-1}(W - I)`.
pub fn build_variance_posynomial<T: Real>(
    w: &WeightMatrix<T>,
    cov0: &Matrix<T>,
    i: usize,
    t: usize,
) -> Posynomial<T> {
    let m = w.size();
    let wm = w.matrix();
    let wt = wm.pow(t);
    let constant = wt.matmul(cov0).matmul(&wt)[(i, i)];
    let w_minus_i = wm.sub(&Matrix::identity(m));
    let mut terms = Vec::new();
    for s in 0..t {
        let w_hat = wm.pow(t - s - 1).matmul(&w_minus_i);
        for k in 0..m {
            let a = w_hat[(i, k)] * w_hat[(i, k)];
            if a > T::zero() {
                terms.push((var_of(s, k, m), a));
            }
        }
    }
    Posynomial::pruned(constant, terms)
}

/// Network MSE at iteration `t` as a posynomial over variable-mode indices:
/// constant equal to the lossless MSE plus `(1/m) sum_i [W̌(t,s)]_ik^2`
/// terms with `W̌(t,s) = (I - avg) W^{t-s-1}(W - I)`.
pub fn build_mse_posynomial<T: Real>(
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    t: usize,
) -> Result<Posynomial<T>> {
    let m = w.size();
    let wm = w.matrix();
    let constant = lossless_mse(w, mean0, cov0, t)?;
    let proj = Matrix::identity(m).sub(&Matrix::average_operator(m));
    let w_minus_i = wm.sub(&Matrix::identity(m));
    let inv_m = T::one() / T::of(m as f64);
    let mut terms = Vec::new();
    for s in 0..t {
        let w_check = proj.matmul(&wm.pow(t - s - 1)).matmul(&w_minus_i);
        for k in 0..m {
            let a: T = (0..m).map(|i| w_check[(i, k)] * w_check[(i, k)]).sum();
            if a > T::zero() {
                terms.push((var_of(s, k, m), a * inv_m));
            }
        }
    }
    Ok(Posynomial::pruned(constant, terms))
}

/// The assembled rate-minimization program.
#[derive(Clone, Debug)]
pub struct GgpProblem<T> {
    pub mode: Mode,
    pub m: usize,
    pub horizon: usize,
    pub model: RdModel<T>,
    pub mse_target: T,
    pub lossless_floor: T,
    nvars: usize,
    /// One variance posynomial per rate factor, index `j = t*m + i`,
    /// expressed over the problem variables (condensed in constant mode).
    var_posys: Vec<Posynomial<T>>,
    /// Problem variable that divides factor `j`.
    divisor: Vec<usize>,
    /// Final-iteration network MSE over the problem variables.
    mse_posy: Posynomial<T>,
}

impl<T: Real> GgpProblem<T> {
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// `ln` of the product of rate factors at distortions `d` (problem
    /// variables); proportional to the aggregate rate up to the additive
    /// per-factor offset. Exposed for oracle comparisons.
    pub fn objective_log(&self, d: &[T]) -> T {
        let k = self.model.floor_k();
        self.var_posys
            .iter()
            .zip(&self.divisor)
            .map(|(p, &j)| (p.eval(d) / d[j]).max(k).ln())
            .sum()
    }

    /// Aggregate rate in bits at distortions `d`.
    pub fn aggregate_rate(&self, d: &[T]) -> T {
        let ln2 = T::of(std::f64::consts::LN_2);
        let f = T::of(self.var_posys.len() as f64);
        self.objective_log(d) / (T::of(2.0) * ln2) + f * self.model.rate_offset()
    }

    /// Final-iteration network MSE at distortions `d`.
    pub fn mse_value(&self, d: &[T]) -> T {
        self.mse_posy.eval(d)
    }

    /// Expand problem variables to a full schedule.
    pub fn schedule_of(&self, d: &[T]) -> DistortionSchedule<T> {
        match self.mode {
            Mode::Constant => DistortionSchedule::Constant(d.to_vec()),
            Mode::Variable => DistortionSchedule::Variable(
                (0..self.horizon)
                    .map(|t| (0..self.m).map(|i| d[var_of(t, i, self.m)]).collect())
                    .collect(),
            ),
        }
    }
}

/// Assemble the program; rejects targets at or below the lossless floor.
pub fn build_problem<T: Real>(
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    horizon: usize,
    mse_target: T,
    model: RdModel<T>,
    mode: Mode,
) -> Result<GgpProblem<T>> {
    let m = w.size();
    let floor = lossless_mse(w, mean0, cov0, horizon)?;
    if !(mse_target > floor) {
        return Err(Error::InfeasibleTarget {
            target: mse_target.as_f64(),
            floor: floor.as_f64(),
        });
    }
    let nvars = match mode {
        Mode::Constant => horizon,
        Mode::Variable => m * horizon,
    };
    let condense = |p: Posynomial<T>| match mode {
        Mode::Variable => p,
        Mode::Constant => p.remapped(|j| j / m, nvars),
    };
    let mut var_posys = Vec::with_capacity(m * horizon);
    let mut divisor = Vec::with_capacity(m * horizon);
    for t in 0..horizon {
        for i in 0..m {
            var_posys.push(condense(build_variance_posynomial(w, cov0, i, t)));
            divisor.push(match mode {
                Mode::Constant => t,
                Mode::Variable => var_of(t, i, m),
            });
        }
    }
    let mse_posy = condense(build_mse_posynomial(w, mean0, cov0, horizon)?);
    Ok(GgpProblem {
        mode,
        m,
        horizon,
        model,
        mse_target,
        lossless_floor: floor,
        nvars,
        var_posys,
        divisor,
        mse_posy,
    })
}

/// Solver termination condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Optimal,
    MaxIterations,
}

/// Solution of a [`GgpProblem`]: the distortion schedule, the induced rates,
/// and the predicted network-MSE trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateAllocation<T> {
    pub distortions: DistortionSchedule<T>,
    /// Rate in bits per symbol for node `i` at iteration `t`, indexed `[t][i]`.
    pub rates: Vec<Vec<T>>,
    pub aggregate_rate: T,
    /// Network MSE at `t = 0 ..= T`.
    pub predicted_mse: Vec<T>,
    pub status: SolverStatus,
    /// Total inner solver iterations (deterministic effort measure).
    pub iterations: usize,
}

/// Barrier value and gradient at `x = (y, u)`, or `None` if infeasible.
fn barrier_eval<T: Real>(
    p: &GgpProblem<T>,
    t_bar: T,
    x: &[T],
) -> Option<(T, Vec<T>)> {
    let n = p.nvars;
    let f_count = p.var_posys.len();
    let (y, u) = x.split_at(n);
    let ey: Vec<T> = y.iter().map(|&v| v.exp()).collect();
    let ln_k = p.model.floor_k().ln();
    // scaled barrier f + (1/t_bar) * sum -ln(-g): keeps the function at the
    // objective's magnitude so line searches stay resolvable in floating point
    let inv_t = T::one() / t_bar;
    let mut val = T::zero();
    let mut grad = vec![T::zero(); x.len()];
    // objective: sum(u)
    for j in 0..f_count {
        val = val + u[j];
        grad[n + j] = grad[n + j] + T::one();
    }
    // u_j >= ln k
    for j in 0..f_count {
        let g = ln_k - u[j];
        if !(g < T::zero()) {
            return None;
        }
        val = val - inv_t * (-g).ln();
        grad[n + j] = grad[n + j] - inv_t / (-g);
    }
    // u_j >= ln sigma_j^2(e^y) - y_{divisor(j)}
    for (j, posy) in p.var_posys.iter().enumerate() {
        let s = posy.constant + posy.terms.iter().map(|&(l, a)| a * ey[l]).sum::<T>();
        let dj = p.divisor[j];
        let gval = s.ln() - y[dj] - u[j];
        if !(gval < T::zero()) {
            return None;
        }
        val = val - inv_t * (-gval).ln();
        let scale = inv_t / (-gval);
        for &(l, a) in &posy.terms {
            grad[l] = grad[l] + scale * (a * ey[l] / s);
        }
        grad[dj] = grad[dj] - scale;
        grad[n + j] = grad[n + j] - scale;
    }
    // ln MSE(e^y) <= ln MSE*
    let s = p.mse_posy.constant
        + p.mse_posy.terms.iter().map(|&(l, a)| a * ey[l]).sum::<T>();
    let g = s.ln() - p.mse_target.ln();
    if !(g < T::zero()) {
        return None;
    }
    val = val - inv_t * (-g).ln();
    let scale = inv_t / (-g);
    for &(l, a) in &p.mse_posy.terms {
        grad[l] = grad[l] + scale * (a * ey[l] / s);
    }
    Some((val, grad))
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// BFGS with Armijo backtracking on the barrier at fixed `t_bar`.
/// Returns `(converged, iterations_used)`.
fn center<T: Real>(
    p: &GgpProblem<T>,
    t_bar: T,
    x: &mut Vec<T>,
    max_iters: usize,
    grad_tol: T,
) -> (bool, usize) {
    let dim = x.len();
    let (mut fx, mut gx) = barrier_eval(p, t_bar, x).expect("interior start point");
    // inverse-Hessian approximation, dense row-major
    let mut h = vec![T::zero(); dim * dim];
    for i in 0..dim {
        h[i * dim + i] = T::one();
    }
    let mut first_update = true;
    for it in 0..max_iters {
        if norm(&gx) <= grad_tol {
            return (true, it);
        }
        // direction = -H g
        let mut dir = vec![T::zero(); dim];
        for i in 0..dim {
            dir[i] = -(0..dim).map(|j| h[i * dim + j] * gx[j]).sum::<T>();
        }
        let slope = dot(&dir, &gx);
        if !(slope < T::zero()) {
            // reset a corrupted approximation to steepest descent
            for i in 0..dim {
                for j in 0..dim {
                    h[i * dim + j] = if i == j { T::one() } else { T::zero() };
                }
                dir[i] = -gx[i];
            }
        }
        let slope = dot(&dir, &gx);
        let mut alpha = T::one();
        let c1 = T::of(1e-4);
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<T> =
                x.iter().zip(&dir).map(|(&xi, &di)| xi + alpha * di).collect();
            if let Some((fc, gc)) = barrier_eval(p, t_bar, &cand) {
                if fc <= fx + c1 * alpha * slope {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            alpha = alpha * T::of(0.5);
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no admissible step: already at numerical stationarity
            return (norm(&gx) <= grad_tol * T::of(1e3), it);
        };
        // BFGS update
        let s: Vec<T> = xn.iter().zip(x.iter()).map(|(&a, &b)| a - b).collect();
        let yv: Vec<T> = gn.iter().zip(&gx).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > T::of(1e-12) * norm(&s) * norm(&yv) {
            if first_update {
                // Shanno scaling: start from a well-conditioned multiple of I
                let gamma = sy / dot(&yv, &yv);
                for i in 0..dim {
                    for j in 0..dim {
                        h[i * dim + j] = if i == j { gamma } else { T::zero() };
                    }
                }
                first_update = false;
            }
            let rho = T::one() / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let mut hy = vec![T::zero(); dim];
            for i in 0..dim {
                hy[i] = (0..dim).map(|j| h[i * dim + j] * yv[j]).sum();
            }
            let yhy = dot(&yv, &hy);
            for i in 0..dim {
                for j in 0..dim {
                    h[i * dim + j] = h[i * dim + j]
                        - rho * (s[i] * hy[j] + hy[i] * s[j])
                        + rho * rho * yhy * s[i] * s[j]
                        + rho * s[i] * s[j];
                }
            }
        }
        *x = xn;
        fx = fn_;
        gx = gn;
    }
    (norm(&gx) <= grad_tol, max_iters)
}

/// Solve the program with a log-barrier interior method (barrier parameter
/// grows tenfold per stage until the duality measure falls below `tol`).
pub fn solve<T: Real>(
    p: &GgpProblem<T>,
    tol: T,
    max_iters: usize,
) -> Result<RateAllocation<T>> {
    if p.nvars == 0 {
        // T = 0 and the target already holds: nothing to transmit
        return Ok(RateAllocation {
            distortions: p.schedule_of(&[]),
            rates: vec![],
            aggregate_rate: T::zero(),
            predicted_mse: vec![p.lossless_floor],
            status: SolverStatus::Optimal,
            iterations: 0,
        });
    }
    let n = p.nvars;
    let f_count = p.var_posys.len();
    // interior start: uniform distortion using half the MSE slack
    let slack = p.mse_target - p.mse_posy.constant;
    let mass = p.mse_posy.coefficient_mass();
    let d0 = if mass > T::zero() {
        slack * T::of(0.5) / mass
    } else {
        T::one()
    };
    let mut x = vec![d0.ln(); n];
    let ln_k = p.model.floor_k().ln();
    let d_init = vec![d0; n];
    for j in 0..f_count {
        let s = p.var_posys[j].eval(&d_init);
        let lower = (s.ln() - d0.ln()).max(ln_k);
        x.push(lower + T::one());
    }
    let n_c = T::of((2 * f_count + 1) as f64);
    let mut t_bar = T::one();
    let mut iterations = 0usize;
    let mut status = SolverStatus::Optimal;
    for _stage in 0..60 {
        let grad_tol = T::of(1e-7) * T::of(f_count as f64).max(T::one());
        let (converged, used) = center(p, t_bar, &mut x, max_iters, grad_tol);
        iterations += used;
        let gap_ok = n_c / t_bar <= tol * T::of(f_count as f64).max(T::one());
        if gap_ok {
            status = if converged {
                SolverStatus::Optimal
            } else {
                SolverStatus::MaxIterations
            };
            break;
        }
        t_bar = t_bar * T::of(10.0);
    }
    let d: Vec<T> = x[..n].iter().map(|&y| y.exp()).collect();
    allocation_from(p, &d, status, iterations)
}

fn allocation_from<T: Real>(
    p: &GgpProblem<T>,
    d: &[T],
    status: SolverStatus,
    iterations: usize,
) -> Result<RateAllocation<T>> {
    let mut rates = Vec::with_capacity(p.horizon);
    let mut aggregate = T::zero();
    for t in 0..p.horizon {
        let mut row = Vec::with_capacity(p.m);
        for i in 0..p.m {
            let j = t * p.m + i;
            let sigma2 = p.var_posys[j].eval(d);
            let r = p.model.rate_for_distortion(sigma2, d[p.divisor[j]])?;
            aggregate = aggregate + r;
            row.push(r);
        }
        rates.push(row);
    }
    let schedule = p.schedule_of(d);
    Ok(RateAllocation {
        rates,
        aggregate_rate: aggregate,
        predicted_mse: vec![],
        distortions: schedule,
        status,
        iterations,
    })
}

/// Fill in the predicted network-MSE trajectory for an allocation.
pub fn predicted_trajectory<T: Real>(
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    alloc: &mut RateAllocation<T>,
) -> Result<()> {
    let horizon = alloc.distortions.horizon();
    alloc.predicted_mse = (0..=horizon)
        .map(|t| Ok(error_stats(w, mean0, cov0, &alloc.distortions, t)?.network_mse))
        .collect::<Result<_>>()?;
    Ok(())
}

/// Minimize `K1 * R_agg(T) + K2 * T` over a horizon range, skipping
/// infeasible horizons. Returns the winning horizon and its allocation.
#[allow(clippy::too_many_arguments)]
pub fn sweep_total_cost<T: Real>(
    w: &WeightMatrix<T>,
    mean0: &[T],
    cov0: &Matrix<T>,
    model: &RdModel<T>,
    mse_target: T,
    k1: T,
    k2: T,
    t_range: std::ops::Range<usize>,
    mode: Mode,
) -> Result<(usize, RateAllocation<T>)> {
    if t_range.is_empty() {
        return Err(Error::InvalidConfig("empty horizon range".into()));
    }
    if k1 < T::zero() || k2 < T::zero() {
        return Err(Error::InvalidConfig("cost weights must be nonnegative".into()));
    }
    let mut best: Option<(T, usize, RateAllocation<T>)> = None;
    for t in t_range.clone() {
        let problem = match build_problem(w, mean0, cov0, t, mse_target, model.clone(), mode) {
            Ok(p) => p,
            Err(Error::InfeasibleTarget { .. }) => continue,
            Err(e) => return Err(e),
        };
        let alloc = solve(&problem, T::of(1e-8), 500)?;
        let cost = k1 * alloc.aggregate_rate + k2 * T::of(t as f64);
        if best.as_ref().map_or(true, |(c, _, _)| cost < *c) {
            best = Some((cost, t, alloc));
        }
    }
    match best {
        Some((_, t, mut alloc)) => {
            predicted_trajectory(w, mean0, cov0, &mut alloc)?;
            Ok((t, alloc))
        }
        None => Err(Error::InfeasibleSweep(t_range)),
    }
}
