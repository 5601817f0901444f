//! Runtime checks of the entropy inequalities satisfied by the Hedge map and
//! of the identities that hold along a recorded trajectory.

use serde::Serialize;

use super::dynamics::{hedge_map_log, Snapshot, Trace, TrajectoryState};
use super::entropy::relative_entropy_log;
use crate::error::{Error, Result};
use crate::game::{dot, MixedStrategy, SymmetricGame};
use crate::rng::SeededRng;

/// Tolerance for inequalities evaluated at a single point.
pub const POINTWISE_TOL: f64 = 1e-9;
/// Tolerance for quantities accumulated along a trajectory.
pub const ACCUMULATED_TOL: f64 = 1e-8;

const ALPHA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 1.0, 2.0];
const RANDOM_ALPHAS: usize = 10;
const ALPHA_MAX: f64 = 2.0;
const SHORT_TRAJECTORY: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &str, tolerance: f64) -> Self {
        CheckResult { name: name.to_string(), samples: 0, max_violation: 0.0, tolerance, passed: true }
    }

    fn record(&mut self, violation: f64) {
        self.samples += 1;
        let v = if violation.is_nan() { f64::INFINITY } else { violation.max(0.0) };
        if v > self.max_violation {
            self.max_violation = v;
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.max_violation <= self.tolerance;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    /// No samples were evaluated, so `passed` holds trivially.
    pub vacuous: bool,
}

impl DiagnosticsReport {
    fn from_checks(checks: Vec<CheckResult>) -> Self {
        let checks: Vec<CheckResult> = checks.into_iter().map(CheckResult::finish).collect();
        DiagnosticsReport {
            passed: checks.iter().all(|c| c.passed),
            vacuous: checks.iter().all(|c| c.samples == 0),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_violation(&self) -> f64 {
        self.checks.iter().map(|c| c.max_violation).fold(0.0, f64::max)
    }
}

/// `RE(Y, T_α(X))` through log-probabilities so that vanishing `Y` entries
/// and tiny `T_α(X)` entries are both handled exactly.
fn re_after_step(game: &SymmetricGame, y: &[f64], x: &[f64], alpha: f64) -> f64 {
    let (_, log_t) = hedge_map_log(game, x, alpha);
    relative_entropy_log(y, &log_t)
}

fn sample_target(rng: &mut SeededRng, n: usize, sample: usize) -> Vec<f64> {
    match sample % 4 {
        // Vertices are the comparison points used for best responses.
        3 => MixedStrategy::pure(n, rng.index(n)).into_vec(),
        _ => rng.interior_simplex(n),
    }
}

/// Samples random interior `X`, targets `Y` and learning rates and checks
/// convexity of `α ↦ RE(Y, T_α X)`, the one-step upper and lower bounds, and
/// the cumulative log-mass bound along short random-rate trajectories.
pub fn diagnose_entropy_bounds(game: &SymmetricGame, samples: usize, seed: u64) -> Result<DiagnosticsReport> {
    if !game.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let n = game.n();
    let mut rng = SeededRng::new(seed);
    let mut convexity = CheckResult::new("convexity_in_alpha", POINTWISE_TOL);
    let mut upper = CheckResult::new("upper_bound", POINTWISE_TOL);
    let mut lower = CheckResult::new("lower_bound", POINTWISE_TOL);
    let mut log_mass = CheckResult::new("log_mass_bound", ACCUMULATED_TOL);

    for s in 0..samples {
        let x = rng.interior_simplex(n);
        let y = sample_target(&mut rng, n, s);
        let mut alphas = ALPHA_GRID.to_vec();
        alphas.extend((0..RANDOM_ALPHAS).map(|_| rng.uniform_range(0.0, ALPHA_MAX)));

        let cx = game.apply(&x);
        let log_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let re_yx = relative_entropy_log(&y, &log_x);
        let drift = dot(&y, &cx) - dot(&x, &cx);
        let re_at: Vec<f64> = alphas.iter().map(|&a| re_after_step(game, &y, &x, a)).collect();

        for (&a, &re) in alphas.iter().zip(&re_at) {
            let linear = re_yx - a * drift;
            upper.record(re - (linear + a * a.exp_m1()));
            lower.record(linear - re);
        }
        for i in 0..alphas.len() {
            for j in i + 1..alphas.len() {
                let mid = re_after_step(game, &y, &x, 0.5 * (alphas[i] + alphas[j]));
                convexity.record(mid - 0.5 * (re_at[i] + re_at[j]));
            }
        }

        let x0 = MixedStrategy::from_unchecked(rng.interior_simplex(n));
        let mut state = TrajectoryState::new(&x0)?;
        for _ in 0..SHORT_TRAJECTORY {
            let alpha = ALPHA_MAX * rng.uniform_open();
            state.advance(game, alpha);
            let a_k = state.average().weight_sum();
            let avg_payoffs = game.apply(&state.average().average());
            let mean_realized = state.realized_payoff() / a_k;
            for ((log_x, x0_i), payoff) in state.log_iterate().iter().zip(x0.probs()).zip(&avg_payoffs) {
                let lhs = (log_x - x0_i.ln()) / a_k;
                log_mass.record(lhs - (payoff - mean_realized));
            }
        }
    }
    Ok(DiagnosticsReport::from_checks(vec![convexity, upper, lower, log_mass]))
}

/// Checks along a recorded trace:
/// the payoff/log-ratio identity for uniform starts, the lower bound on
/// `(CX̄^K)_i − (CX̄^K)_max` in terms of `ln X^{K+1}(i)`, and the
/// best-response bound `X^{K+1}·CX̄^K − P_K/A_K ≥ RE(X^{K+1}, X^0)/A_K ≥ 0`.
///
/// Errors with [`Error::NonUniformStart`] unless the trace started at the
/// uniform strategy; [`diagnose_trajectory_bounds`] skips that check.
pub fn diagnose_trajectory_identities(game: &SymmetricGame, trace: &Trace) -> Result<DiagnosticsReport> {
    if !trace.uniform_start {
        return Err(Error::NonUniformStart);
    }
    trajectory_report(game, trace, true)
}

pub fn diagnose_trajectory_bounds(game: &SymmetricGame, trace: &Trace) -> Result<DiagnosticsReport> {
    trajectory_report(game, trace, false)
}

fn trajectory_report(game: &SymmetricGame, trace: &Trace, with_ratio: bool) -> Result<DiagnosticsReport> {
    game.check_dim(trace.x0.len())?;
    let mut ratio = CheckResult::new("log_ratio_identity", ACCUMULATED_TOL);
    let mut payoff_floor = CheckResult::new("payoff_floor", ACCUMULATED_TOL);
    let mut best_response = CheckResult::new("best_response_bound", ACCUMULATED_TOL);
    let mut contraction = CheckResult::new("average_contraction", ACCUMULATED_TOL);

    let log_x0: Vec<f64> = trace.x0.iter().map(|v| v.ln()).collect();
    let x0_max = trace.x0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x0_min = trace.x0.iter().copied().fold(f64::INFINITY, f64::min);
    let log_c = (x0_min / x0_max).ln();

    for snap in &trace.snapshots {
        let a_k = snap.weight_sum;
        let cxbar = &snap.average_payoffs;
        let log_next = &snap.next_log_iterate;
        if with_ratio {
            for i in 0..cxbar.len() {
                for j in i + 1..cxbar.len() {
                    let lhs = (log_next[i] - log_next[j]) / a_k;
                    ratio.record((lhs - (cxbar[i] - cxbar[j])).abs());
                }
            }
        }
        let best = cxbar.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..cxbar.len() {
            let rhs = (log_c + log_next[i]) / a_k;
            payoff_floor.record(rhs - (cxbar[i] - best));
        }
        let re: f64 = snap
            .next_iterate
            .iter()
            .zip(log_next.iter().zip(&log_x0))
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, (l, l0))| p * (l - l0))
            .sum();
        let margin = dot(&snap.next_iterate, cxbar) - snap.realized_payoff / a_k;
        best_response.record(re.max(0.0) / a_k - margin);
        contraction.record(contraction_violation(snap));
    }
    let mut checks = vec![payoff_floor, best_response, contraction];
    if with_ratio {
        checks.insert(0, ratio);
    }
    Ok(DiagnosticsReport::from_checks(checks))
}

/// Amount by which `‖X̄^K − X̄^{K−1}‖₂` exceeds `√2 α_K / A_K`.
pub fn contraction_violation(snap: &Snapshot) -> f64 {
    if snap.step == 0 {
        return 0.0;
    }
    (snap.avg_step_norm - std::f64::consts::SQRT_2 * snap.alpha / snap.weight_sum).max(0.0)
}
