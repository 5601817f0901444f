//! Turning trajectory rankings into exact equilibrium certificates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{epsilon_gap_raw, verify_support, EquilibriumCertificate, Method, Tolerances};
use crate::error::{Error, Result};
use crate::game::{dot, SymmetricGame};
use crate::hedge::{Snapshot, Trace, TraceRow};
use crate::rng::SeededRng;

const MUTUAL_BR_TOL: f64 = 1e-8;
const HULL_GAP_TOL: f64 = 1e-7;
const FOREIGN_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    AverageMass,
    AveragePayoff,
    IterateMass,
}

impl Criterion {
    pub const DEFAULT_ORDER: [Criterion; 3] = [Criterion::AveragePayoff, Criterion::AverageMass, Criterion::IterateMass];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::AverageMass => "average_mass",
            Criterion::AveragePayoff => "average_payoff",
            Criterion::IterateMass => "iterate_mass",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average_mass" => Ok(Criterion::AverageMass),
            "average_payoff" => Ok(Criterion::AveragePayoff),
            "iterate_mass" => Ok(Criterion::IterateMass),
            other => Err(Error::Parse(format!("unknown ranking criterion `{other}`"))),
        }
    }
}

/// The data extraction needs from one step of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub step: usize,
    /// `X̄^K`.
    pub average: Vec<f64>,
    /// The iterate paired with `X̄^K` for the iterate-mass ranking.
    pub iterate: Vec<f64>,
    pub uniform_start: bool,
}

impl TracePoint {
    /// Uses `X^{K+1}`, the iterate whose log-ratios track `CX̄^K` exactly.
    pub fn from_snapshot(trace: &Trace, snap: &Snapshot) -> Self {
        TracePoint {
            step: snap.step,
            average: snap.average.clone(),
            iterate: snap.next_iterate.clone(),
            uniform_start: trace.uniform_start,
        }
    }

    /// Trace files store `X^K` beside `X̄^K`; `X^K` tracks `CX̄^{K−1}`.
    pub fn from_row(row: &TraceRow, uniform_start: bool) -> Self {
        TracePoint { step: row.step, average: row.average.clone(), iterate: row.iterate.clone(), uniform_start }
    }

    /// The final snapshot of a trace.
    pub fn last(trace: &Trace) -> Option<Self> {
        trace.last().map(|s| Self::from_snapshot(trace, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub criterion: Criterion,
    /// Indices by descending score, ties by ascending index.
    pub order: Vec<usize>,
    pub scores: Vec<f64>,
    pub step: usize,
}

impl Ranking {
    fn new(criterion: Criterion, scores: Vec<f64>, step: usize) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ranking { criterion, order, scores, step }
    }
}

pub fn rank_by_average_mass(point: &TracePoint) -> Ranking {
    Ranking::new(Criterion::AverageMass, point.average.clone(), point.step)
}

pub fn rank_by_average_payoff(game: &SymmetricGame, point: &TracePoint) -> Result<Ranking> {
    game.check_dim(point.average.len())?;
    Ok(Ranking::new(Criterion::AveragePayoff, game.apply(&point.average), point.step))
}

/// Requires a uniform start, where this order coincides with the
/// average-payoff order.
pub fn rank_by_iterate_mass(point: &TracePoint) -> Result<Ranking> {
    if !point.uniform_start {
        return Err(Error::NonUniformStart);
    }
    Ok(Ranking::new(Criterion::IterateMass, point.iterate.clone(), point.step))
}

pub fn rank(game: &SymmetricGame, point: &TracePoint, criterion: Criterion) -> Result<Ranking> {
    match criterion {
        Criterion::AverageMass => Ok(rank_by_average_mass(point)),
        Criterion::AveragePayoff => rank_by_average_payoff(game, point),
        Criterion::IterateMass => rank_by_iterate_mass(point),
    }
}

/// Pure strategies whose payoff against `X̄^K` is within `eps` of the best.
pub fn approx_best_response_set(game: &SymmetricGame, point: &TracePoint, eps: f64) -> Result<Vec<usize>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    game.check_dim(point.average.len())?;
    let cx = game.apply(&point.average);
    let best = cx.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..cx.len()).filter(|&i| best - cx[i] <= eps).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attempt {
    pub criterion: Criterion,
    /// Prefix length `m`; zero when the criterion could not be ranked.
    pub prefix: usize,
    pub candidate: Vec<usize>,
    pub verified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionOutcome {
    pub certificate: Option<EquilibriumCertificate>,
    pub attempts: Vec<Attempt>,
}

/// For each criterion in turn, tries every top-`m` prefix of its ranking as a
/// candidate support and returns the first that the subequalizer program
/// certifies.
pub fn extract_certificate(
    game: &SymmetricGame,
    point: &TracePoint,
    criteria: &[Criterion],
    tol: &Tolerances,
) -> Result<ExtractionOutcome> {
    let mut attempts = Vec::new();
    for &criterion in criteria {
        let ranking = match rank(game, point, criterion) {
            Ok(r) => r,
            Err(Error::NonUniformStart) => {
                attempts.push(Attempt {
                    criterion,
                    prefix: 0,
                    candidate: Vec::new(),
                    verified: false,
                    note: Some("skipped: trajectory did not start at the uniform strategy".into()),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        for m in 1..=ranking.order.len() {
            let mut candidate = ranking.order[..m].to_vec();
            candidate.sort_unstable();
            let found = verify_support(game, &candidate, tol)?;
            attempts.push(Attempt { criterion, prefix: m, candidate, verified: found.is_some(), note: None });
            if let Some(mut cert) = found {
                cert.method = Method::Extraction { criterion: criterion.name().to_string(), prefix: m, step: point.step };
                return Ok(ExtractionOutcome { certificate: Some(cert), attempts });
            }
        }
    }
    Ok(ExtractionOutcome { certificate: None, attempts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub a: usize,
    pub b: usize,
    pub mutual_best_response: bool,
    /// Worst shortfall `(CX_b)_max − X_a·CX_b` over both directions.
    pub best_response_shortfall: f64,
    pub samples: usize,
    pub max_hull_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolytopeReport {
    pub pairs: Vec<PairCheck>,
    pub passed: bool,
}

/// Range of `t` with `t·a + (1 − t)·b` on the simplex.
fn hull_interval(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&ai, &bi) in a.iter().zip(b) {
        let d = ai - bi;
        if d > 0.0 {
            lo = lo.max(-bi / d);
        } else if d < 0.0 {
            hi = hi.min(-bi / d);
        }
    }
    (lo, hi)
}

/// For every pair of certificates, checks whether each is a best response
/// to the other; for pairs that are, samples the affine line through them
/// (restricted to the simplex) and checks that every sample is an equilibrium.
pub fn check_polytope_property(
    game: &SymmetricGame,
    certificates: &[EquilibriumCertificate],
    samples: usize,
    seed: u64,
) -> Result<PolytopeReport> {
    for (k, c) in certificates.iter().enumerate() {
        if c.strategy.len() != game.n() {
            return Err(Error::ForeignCertificate(format!("certificate {k} has dimension {}", c.strategy.len())));
        }
        let gap = epsilon_gap_raw(game, c.strategy.probs());
        if (gap - c.gap).abs() > FOREIGN_GAP_TOL {
            return Err(Error::ForeignCertificate(format!("certificate {k} records gap {} but has gap {gap}", c.gap)));
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut pairs = Vec::new();
    for a in 0..certificates.len() {
        for b in a + 1..certificates.len() {
            let xa = certificates[a].strategy.probs();
            let xb = certificates[b].strategy.probs();
            let (ca, cb) = (game.apply(xa), game.apply(xb));
            let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let shortfall = (max(&cb) - dot(xa, &cb)).max(max(&ca) - dot(xb, &ca)).max(0.0);
            let mutual = shortfall <= MUTUAL_BR_TOL;
            let mut max_hull_gap = 0.0f64;
            let mut taken = 0;
            if mutual {
                let (lo, hi) = hull_interval(xa, xb);
                for _ in 0..samples {
                    let t = rng.uniform_range(lo, hi);
                    let mut x: Vec<f64> = xa.iter().zip(xb).map(|(p, q)| (t * p + (1.0 - t) * q).max(0.0)).collect();
                    let sum: f64 = x.iter().sum();
                    x.iter_mut().for_each(|v| *v /= sum);
                    max_hull_gap = max_hull_gap.max(epsilon_gap_raw(game, &x));
                    taken += 1;
                }
            }
            pairs.push(PairCheck {
                a,
                b,
                mutual_best_response: mutual,
                best_response_shortfall: shortfall,
                samples: taken,
                max_hull_gap,
                passed: max_hull_gap <= HULL_GAP_TOL,
            });
        }
    }
    Ok(PolytopeReport { passed: pairs.iter().all(|p| p.passed), pairs })
}
