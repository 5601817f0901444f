use serde::Serialize;

use super::schedule::{validate_schedule, LearningRateSchedule, ScheduleValidity};
use crate::equilibrium::epsilon_gap_raw;
use crate::error::{Error, Result};
use crate::game::{dot, MixedStrategy, SymmetricGame};

/// One application of the Hedge map
/// `T_i(X) = X(i) exp(α (CX)_i) / Σ_j X(j) exp(α (CX)_j)`.
///
/// Evaluated in log space: `α·CX` is added to `ln X` and the result is
/// renormalized after subtracting its maximum.
pub fn hedge_step(game: &SymmetricGame, x: &MixedStrategy, alpha: f64) -> Result<MixedStrategy> {
    game.check_dim(x.len())?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::BadLearningRate(alpha));
    }
    check_interior(x.probs())?;
    let (probs, _) = hedge_map_log(game, x.probs(), alpha);
    Ok(MixedStrategy::from_unchecked(probs))
}

fn check_interior(x: &[f64]) -> Result<()> {
    match x.iter().position(|&p| p <= 0.0) {
        Some(index) => Err(Error::NotInterior { index, value: x[index] }),
        None => Ok(()),
    }
}

/// `T_α(X)` and `ln T_α(X)` for any `α ≥ 0`, without validation.
pub(crate) fn hedge_map_log(game: &SymmetricGame, x: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let cx = game.apply(x);
    let mut logits: Vec<f64> = x.iter().zip(&cx).map(|(p, c)| p.ln() + alpha * c).collect();
    let probs = normalize_logits(&mut logits);
    (probs, logits)
}

/// Shifts `logits` so that they become log-probabilities and returns the
/// probabilities.
fn normalize_logits(logits: &mut [f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logits.iter_mut().for_each(|l| *l -= max);
    let mut probs: Vec<f64> = logits.iter().map(|l| l.exp()).collect();
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    let log_sum = sum.ln();
    logits.iter_mut().for_each(|l| *l -= log_sum);
    probs
}

/// Weighted running mean `X̄ = S / A` with `S = Σ α_k X^k`, `A = Σ α_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAverage {
    weight_sum: f64,
    accumulator: Vec<f64>,
}

impl WeightedAverage {
    pub fn new(n: usize) -> Self {
        WeightedAverage { weight_sum: 0.0, accumulator: vec![0.0; n] }
    }

    pub fn update(&mut self, alpha: f64, x: &[f64]) {
        self.weight_sum += alpha;
        self.accumulator.iter_mut().zip(x).for_each(|(s, v)| *s += alpha * v);
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    pub fn accumulator(&self) -> &[f64] {
        &self.accumulator
    }

    /// `S / A`; uniform weights are meaningless before the first update, so
    /// this returns all zeros then.
    pub fn average(&self) -> Vec<f64> {
        if self.weight_sum == 0.0 {
            return vec![0.0; self.accumulator.len()];
        }
        self.accumulator.iter().map(|s| s / self.weight_sum).collect()
    }
}

/// Live state of a Hedge trajectory positioned at iterate `X^K`.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    /// `ln X^K` (logits shifted to log-probabilities).
    log_iterate: Vec<f64>,
    iterate: Vec<f64>,
    step: usize,
    average: WeightedAverage,
    /// `Σ_{k<K} α_k X^k·CX^k`.
    realized_payoff: f64,
    payoffs: Vec<f64>,
}

impl TrajectoryState {
    pub fn new(x0: &MixedStrategy) -> Result<Self> {
        check_interior(x0.probs())?;
        let log_iterate: Vec<f64> = x0.probs().iter().map(|p| p.ln()).collect();
        Ok(TrajectoryState {
            log_iterate,
            iterate: x0.probs().to_vec(),
            step: 0,
            average: WeightedAverage::new(x0.len()),
            realized_payoff: 0.0,
            payoffs: vec![0.0; x0.len()],
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn iterate(&self) -> &[f64] {
        &self.iterate
    }

    pub fn log_iterate(&self) -> &[f64] {
        &self.log_iterate
    }

    pub fn average(&self) -> &WeightedAverage {
        &self.average
    }

    pub fn realized_payoff(&self) -> f64 {
        self.realized_payoff
    }

    /// Folds `X^K` into the average with weight `α_K`, then moves to
    /// `X^{K+1} = T_{α_K}(X^K)`.
    pub fn advance(&mut self, game: &SymmetricGame, alpha: f64) {
        game.apply_into(&self.iterate, &mut self.payoffs);
        self.average.update(alpha, &self.iterate);
        self.realized_payoff += alpha * dot(&self.iterate, &self.payoffs);
        for (l, c) in self.log_iterate.iter_mut().zip(&self.payoffs) {
            *l += alpha * c;
        }
        self.iterate = normalize_logits(&mut self.log_iterate);
        self.step += 1;
    }
}

/// Everything known about step `K` once `X^K` has been folded into the
/// average and `X^{K+1}` computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub alpha: f64,
    /// `A_K = Σ_{k≤K} α_k`.
    pub weight_sum: f64,
    pub gap_avg: f64,
    pub gap_iter: f64,
    /// `‖X̄^K − X̄^{K−1}‖₂` (zero at `K = 0`).
    pub avg_step_norm: f64,
    /// `X^K`.
    pub iterate: Vec<f64>,
    /// `X̄^K`.
    pub average: Vec<f64>,
    /// `C X̄^K`.
    pub average_payoffs: Vec<f64>,
    /// `Σ_{k≤K} α_k X^k·CX^k`.
    pub realized_payoff: f64,
    /// `X^{K+1}`.
    pub next_iterate: Vec<f64>,
    /// `ln X^{K+1}`, exact even where `X^{K+1}` underflows.
    pub next_log_iterate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub x0: Vec<f64>,
    pub uniform_start: bool,
    pub schedule: LearningRateSchedule,
    pub validity: ScheduleValidity,
    pub snapshots: Vec<Snapshot>,
}

impl Trace {
    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.binary_search_by_key(&step, |s| s.step).ok().map(|i| &self.snapshots[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub validity: ScheduleValidity,
    pub forced: bool,
    pub final_snapshot: Snapshot,
}

/// Runs Hedge from `x0` for steps `K = 0..=k_max`, reporting every
/// `emit_every`-th step plus the final one.
#[derive(Debug, Clone)]
pub struct TrajectoryRunner<'g> {
    game: &'g SymmetricGame,
    x0: MixedStrategy,
    schedule: LearningRateSchedule,
    k_max: usize,
    emit_every: usize,
    force: bool,
}

impl<'g> TrajectoryRunner<'g> {
    pub fn new(game: &'g SymmetricGame, x0: MixedStrategy, schedule: LearningRateSchedule, k_max: usize) -> Self {
        TrajectoryRunner { game, x0, schedule, k_max, emit_every: 1, force: false }
    }

    pub fn emit_every(mut self, stride: usize) -> Self {
        self.emit_every = stride;
        self
    }

    /// Allow schedules that fail validation.
    pub fn force(mut self, force: bool) -> Self {
        self.force = force;
        self
    }

    pub fn run(&self) -> Result<Trace> {
        let mut snapshots = Vec::new();
        let summary = self.run_with(|s| snapshots.push(s.clone()))?;
        Ok(Trace {
            x0: self.x0.probs().to_vec(),
            uniform_start: self.x0.is_uniform(),
            schedule: self.schedule.clone(),
            validity: summary.validity,
            snapshots,
        })
    }

    /// Streams each emitted snapshot into `sink` instead of storing it.
    pub fn run_with(&self, mut sink: impl FnMut(&Snapshot)) -> Result<RunSummary> {
        self.game.check_dim(self.x0.len())?;
        if self.k_max < 1 {
            return Err(Error::NoSteps);
        }
        if self.emit_every == 0 {
            return Err(Error::InvalidArgument("emit_every must be at least 1".into()));
        }
        let validity = validate_schedule(&self.schedule);
        if validity.is_invalid() && !self.force {
            if let ScheduleValidity::Invalid(reason) = &validity {
                return Err(Error::InvalidSchedule(reason.clone()));
            }
        }
        let mut state = TrajectoryState::new(&self.x0)?;
        let mut last = None;
        for k in 0..=self.k_max {
            let alpha = self.schedule.rate(k)?;
            let emit = k % self.emit_every == 0 || k == self.k_max;
            let prev_average = if emit { Some(state.average().average()) } else { None };
            let iterate = if emit { Some(state.iterate().to_vec()) } else { None };
            state.advance(self.game, alpha);
            if let (Some(prev), Some(iterate)) = (prev_average, iterate) {
                let snap = snapshot(self.game, &state, k, alpha, &prev, iterate);
                sink(&snap);
                if k == self.k_max {
                    last = Some(snap);
                }
            }
        }
        Ok(RunSummary {
            steps: self.k_max,
            forced: self.force && validity.is_invalid(),
            validity,
            final_snapshot: last.expect("final step is always emitted"),
        })
    }
}

fn snapshot(
    game: &SymmetricGame,
    state: &TrajectoryState,
    k: usize,
    alpha: f64,
    prev_average: &[f64],
    iterate: Vec<f64>,
) -> Snapshot {
    let average = state.average().average();
    let average_payoffs = game.apply(&average);
    let avg_step_norm = if k == 0 {
        0.0
    } else {
        average.iter().zip(prev_average).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    Snapshot {
        step: k,
        alpha,
        weight_sum: state.average().weight_sum(),
        gap_avg: epsilon_gap_raw(game, &average),
        gap_iter: epsilon_gap_raw(game, &iterate),
        avg_step_norm,
        iterate,
        average,
        average_payoffs,
        realized_payoff: state.realized_payoff(),
        next_iterate: state.iterate().to_vec(),
        next_log_iterate: state.log_iterate().to_vec(),
    }
}

/// Convenience wrapper over [`TrajectoryRunner`] for valid schedules.
pub fn run_trajectory(
    game: &SymmetricGame,
    x0: &MixedStrategy,
    schedule: &LearningRateSchedule,
    k_max: usize,
    emit_every: usize,
) -> Result<Trace> {
    TrajectoryRunner::new(game, x0.clone(), schedule.clone(), k_max).emit_every(emit_every).run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id2() -> SymmetricGame {
        SymmetricGame::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn rps() -> SymmetricGame {
        SymmetricGame::from_rows(&[vec![0.5, 0.0, 1.0], vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.5]]).unwrap()
    }

    #[test]
    fn step_examples() {
        let g = id2();
        let u = MixedStrategy::uniform(2);
        for a in [0.1, 1.0, 5.0] {
            assert_eq!(hedge_step(&g, &u, a).unwrap().probs(), &[0.5, 0.5]);
        }
        // 0.75 e^{0.75} / (0.75 e^{0.75} + 0.25 e^{0.25}).
        let x = MixedStrategy::new(vec![0.75, 0.25]).unwrap();
        let t = hedge_step(&g, &x, 1.0).unwrap();
        let expected = 0.75 * 0.75f64.exp() / (0.75 * 0.75f64.exp() + 0.25 * 0.25f64.exp());
        assert!((t.probs()[0] - expected).abs() < 1e-15);
        assert!((t.probs()[0] - 0.83182).abs() < 5e-6);

        let t = hedge_step(&g, &x, 1e-12).unwrap();
        assert!(t.probs().iter().zip(x.probs()).all(|(a, b)| (a - b).abs() <= 1e-10));
    }

    #[test]
    fn step_errors() {
        let g = id2();
        let x = MixedStrategy::pure(2, 0);
        assert!(matches!(hedge_step(&g, &x, 1.0), Err(Error::NotInterior { index: 1, .. })));
        let u = MixedStrategy::uniform(2);
        assert!(matches!(hedge_step(&g, &u, 0.0), Err(Error::BadLearningRate(_))));
        assert!(matches!(hedge_step(&g, &u, -1.0), Err(Error::BadLearningRate(_))));
        assert!(matches!(hedge_step(&g, &u, f64::INFINITY), Err(Error::BadLearningRate(_))));
    }

    #[test]
    fn average_updates() {
        let mut w = WeightedAverage::new(3);
        w.update(1.0, &[1.0 / 3.0; 3]);
        assert_eq!(w.weight_sum(), 1.0);
        assert_eq!(w.average(), vec![1.0 / 3.0; 3]);

        let mut w = WeightedAverage::new(2);
        w.update(1.0, &[0.9, 0.1]);
        w.update(1.0, &[0.5, 0.5]);
        let a = w.average();
        assert!((a[0] - 0.7).abs() < 1e-15 && (a[1] - 0.3).abs() < 1e-15);

        let mut w = WeightedAverage::new(2);
        w.update(1.0, &[0.9, 0.1]);
        w.update(3.0, &[0.5, 0.5]);
        let a = w.average();
        assert!((a[0] - 0.6).abs() < 1e-15 && (a[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_runs() {
        for (g, n) in [(id2(), 2), (rps(), 3)] {
            let tr = run_trajectory(&g, &MixedStrategy::uniform(n), &LearningRateSchedule::default(), 100, 1).unwrap();
            assert_eq!(tr.snapshots.len(), 101);
            for s in &tr.snapshots {
                for v in s.iterate.iter().chain(&s.average) {
                    assert!((v - 1.0 / n as f64).abs() <= 1e-12);
                }
                assert!(s.gap_avg.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn emission_stride() {
        let x0 = MixedStrategy::new(vec![0.6, 0.2, 0.2]).unwrap();
        let tr = run_trajectory(&rps(), &x0, &LearningRateSchedule::default(), 25, 10).unwrap();
        let steps: Vec<usize> = tr.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
        assert!(!tr.uniform_start);
        assert_eq!(tr.at(20).unwrap().step, 20);
        assert!(tr.at(21).is_none());
    }

    #[test]
    fn runner_rejects_bad_inputs() {
        let g = rps();
        let u = MixedStrategy::uniform(3);
        let bad = LearningRateSchedule::Power { exponent: 0.4 };
        assert!(matches!(run_trajectory(&g, &u, &bad, 10, 1), Err(Error::InvalidSchedule(_))));
        let forced = TrajectoryRunner::new(&g, u.clone(), bad, 10).force(true).run().unwrap();
        assert!(forced.validity.is_invalid());
        assert!(matches!(run_trajectory(&g, &u, &LearningRateSchedule::default(), 0, 1), Err(Error::NoSteps)));
        assert!(run_trajectory(&g, &u, &LearningRateSchedule::default(), 5, 0).is_err());
        let edge = MixedStrategy::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(run_trajectory(&g, &edge, &LearningRateSchedule::default(), 5, 1), Err(Error::NotInterior { .. })));
        let short = LearningRateSchedule::Custom { rates: vec![1.0; 3] };
        assert_eq!(run_trajectory(&g, &u, &short, 5, 1), Err(Error::ScheduleExhausted(3)));
    }

    #[test]
    fn deterministic() {
        let x0 = MixedStrategy::new(vec![0.6, 0.2, 0.2]).unwrap();
        let a = run_trajectory(&rps(), &x0, &LearningRateSchedule::Harmonic, 500, 7).unwrap();
        let b = run_trajectory(&rps(), &x0, &LearningRateSchedule::Harmonic, 500, 7).unwrap();
        assert_eq!(a, b);
    }
}
