//! Equilibrium quality measures, equalizer and subequalizer programs, and a
//! support-enumeration oracle for small games.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{payoff_vector_raw, MixedStrategy, SymmetricGame, DEFAULT_SUPPORT_TOL};
use crate::lp::{assemble_equalizer_lp, solve_lp, LpStatus, Sense, StandardFormLp};

/// Gap at or below which a strategy counts as an exact equilibrium.
pub const DEFAULT_CERTIFICATE_TOL: f64 = 1e-8;
/// Environment variable overriding [`DEFAULT_CERTIFICATE_TOL`].
pub const TOL_ENV: &str = "HEDGE_NASH_TOL";
/// Largest game accepted by [`enumerate_symmetric_equilibria`] by default.
pub const DEFAULT_ENUMERATION_MAX: usize = 6;

const SINGULAR_CUTOFF: f64 = 1e-10;
const NULL_SAMPLES: usize = 10;
const ENUM_NONNEG_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub support: f64,
    pub certificate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { support: DEFAULT_SUPPORT_TOL, certificate: DEFAULT_CERTIFICATE_TOL }
    }
}

impl Tolerances {
    /// Defaults, with the certificate tolerance taken from `HEDGE_NASH_TOL`
    /// when it is set to a nonnegative number.
    pub fn from_env() -> Result<Self> {
        let mut tol = Tolerances::default();
        if let Ok(raw) = std::env::var(TOL_ENV) {
            let v: f64 = raw.trim().parse().map_err(|e| Error::Parse(format!("{TOL_ENV}=`{raw}`: {e}")))?;
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{TOL_ENV} must be a nonnegative number, got {raw}")));
            }
            tol.certificate = v;
        }
        Ok(tol)
    }
}

/// How a certificate was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    EqualizerLp,
    SubequalizerLp { candidate: Vec<usize> },
    SupportEnumeration,
    Extraction { criterion: String, prefix: usize, step: usize },
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumCertificate {
    pub strategy: MixedStrategy,
    /// 0-based indices of `support(strategy, tol.support)`.
    pub support: Vec<usize>,
    /// `(CX)_max − X·CX` on the game's own scale.
    pub gap: f64,
    /// Smallest `ε` for which the strategy is ε-well-supported.
    pub well_supported_eps: f64,
    pub method: Method,
    /// `gap` expressed in the units the game was loaded in.
    pub game_units_gap: f64,
}

impl EquilibriumCertificate {
    pub fn new(game: &SymmetricGame, strategy: MixedStrategy, method: Method, support_tol: f64) -> Result<Self> {
        game.check_dim(strategy.len())?;
        let pv = payoff_vector_raw(game, strategy.probs());
        let supp = strategy.support(support_tol);
        let gap = (pv.max - pv.self_payoff).max(0.0);
        let worst = supp.iter().map(|&i| pv.values[i]).fold(f64::INFINITY, f64::min);
        Ok(EquilibriumCertificate {
            support: supp,
            gap,
            well_supported_eps: (pv.max - worst).max(0.0),
            method,
            game_units_gap: gap / game.units().scale,
            strategy,
        })
    }
}

pub(crate) fn epsilon_gap_raw(game: &SymmetricGame, x: &[f64]) -> f64 {
    let pv = payoff_vector_raw(game, x);
    (pv.max - pv.self_payoff).max(0.0)
}

/// `(CX)_max − X·CX`, zero exactly at symmetric equilibria.
pub fn epsilon_gap(game: &SymmetricGame, x: &MixedStrategy) -> Result<f64> {
    game.check_dim(x.len())?;
    Ok(epsilon_gap_raw(game, x.probs()))
}

/// True when every supported pure strategy earns within `eps` of the best
/// reply payoff against `x`.
pub fn is_well_supported(game: &SymmetricGame, x: &MixedStrategy, eps: f64) -> Result<bool> {
    game.check_dim(x.len())?;
    let pv = payoff_vector_raw(game, x.probs());
    Ok(x.support(DEFAULT_SUPPORT_TOL).iter().all(|&i| pv.values[i] >= pv.max - eps))
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Clamps tiny negatives left by the solver and rescales onto the simplex.
fn project(mut probs: Vec<f64>) -> MixedStrategy {
    probs.iter_mut().for_each(|p| *p = p.max(0.0));
    let sum: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= sum);
    MixedStrategy::from_unchecked(probs)
}

/// An equalizer (all `(CX)_i` equal) found by the feasibility program, if any.
pub fn find_equalizer(game: &SymmetricGame) -> Result<Option<EquilibriumCertificate>> {
    let n = game.n();
    let res = solve_lp(&assemble_equalizer_lp(game))?;
    let Some(y) = res.solution.filter(|_| res.status == LpStatus::Optimal) else {
        return Ok(None);
    };
    let x = project(y[..n].to_vec());
    if spread(&game.apply(x.probs())) > DEFAULT_CERTIFICATE_TOL {
        return Ok(None);
    }
    let cert = EquilibriumCertificate::new(game, x, Method::EqualizerLp, DEFAULT_SUPPORT_TOL)?;
    Ok((cert.gap <= DEFAULT_CERTIFICATE_TOL).then_some(cert))
}

/// Rows `(CX)_i − (CX)_j − ε + s = 0` over ordered pairs of `rows`, restricted
/// to the columns in `cols`. Variable layout: `X(cols)`, `ε`, then slacks.
struct PairProgram {
    rows: Vec<Vec<f64>>,
    width: usize,
}

impl PairProgram {
    fn new(width: usize) -> Self {
        PairProgram { rows: Vec::new(), width }
    }

    /// Appends `Σ_k coef_k X(cols_k) + eps·ε + s = 0` with a fresh slack.
    fn push_inequality(&mut self, coefs: Vec<f64>, eps: f64) {
        let mut row = coefs;
        row.push(eps);
        self.rows.push(row);
    }

    fn into_lp(self) -> Result<StandardFormLp> {
        let k = self.width;
        let m = self.rows.len();
        let mut a = Vec::with_capacity(m + 1);
        for (r, mut row) in self.rows.into_iter().enumerate() {
            row.extend((0..m).map(|s| if s == r { 1.0 } else { 0.0 }));
            a.push(row);
        }
        let mut sum = vec![1.0; k];
        sum.extend(std::iter::repeat_n(0.0, 1 + m));
        a.push(sum);
        let mut b = vec![0.0; m];
        b.push(1.0);
        let mut objective = vec![0.0; k + 1 + m];
        objective[k] = 1.0;
        Ok(StandardFormLp::new(a, b, objective, Sense::Minimize)?)
    }
}

fn pair_row(game: &SymmetricGame, i: usize, j: usize, cols: &[usize]) -> Vec<f64> {
    cols.iter().map(|&c| game.entry(i, c) - game.entry(j, c)).collect()
}

/// Minimizes `(CX)_max − (CX)_min` over the simplex; the minimum is zero
/// exactly when an equalizer exists.
pub fn min_equalizer_gap(game: &SymmetricGame) -> Result<(MixedStrategy, f64)> {
    let n = game.n();
    let cols: Vec<usize> = (0..n).collect();
    let mut prog = PairProgram::new(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                prog.push_inequality(pair_row(game, i, j, &cols), -1.0);
            }
        }
    }
    let res = solve_lp(&prog.into_lp()?)?;
    let y = res.solution.ok_or_else(|| Error::InvalidArgument("spread program has no optimum".into()))?;
    let x = project(y[..n].to_vec());
    let gap = spread(&game.apply(x.probs()));
    Ok((x, gap))
}

fn check_index_set(game: &SymmetricGame, set: &[usize]) -> Result<Vec<usize>> {
    if set.is_empty() {
        return Err(Error::EmptySupport);
    }
    let n = game.n();
    if let Some(&index) = set.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index, n });
    }
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    Ok(s)
}

/// Minimizes the payoff spread inside carrier `l` subject to every strategy in
/// `l` weakly beating every strategy outside it, with `X` supported on `l`.
/// Returns `None` when those dominance constraints cannot be met.
pub fn best_subequalizer(game: &SymmetricGame, l: &[usize]) -> Result<Option<(MixedStrategy, f64)>> {
    let l = check_index_set(game, l)?;
    let n = game.n();
    let outside: Vec<usize> = (0..n).filter(|j| !l.contains(j)).collect();
    let mut prog = PairProgram::new(l.len());
    for &i in &l {
        for &j in &l {
            if i != j {
                prog.push_inequality(pair_row(game, i, j, &l), -1.0);
            }
        }
    }
    for &i in &l {
        for &j in &outside {
            prog.push_inequality(pair_row(game, j, i, &l), 0.0);
        }
    }
    let res = solve_lp(&prog.into_lp()?)?;
    if res.status != LpStatus::Optimal {
        return Ok(None);
    }
    let y = res.solution.expect("optimal result carries a solution");
    let mut probs = vec![0.0; n];
    for (k, &i) in l.iter().enumerate() {
        probs[i] = y[k];
    }
    Ok(Some((project(probs), y[l.len()].max(0.0))))
}

/// A certificate for an equilibrium supported inside `s`, if the
/// subequalizer program reaches zero spread (within `tol.certificate`) and the
/// recomputed gap agrees.
pub fn verify_support(game: &SymmetricGame, s: &[usize], tol: &Tolerances) -> Result<Option<EquilibriumCertificate>> {
    let Some((x, eps)) = best_subequalizer(game, s)? else {
        return Ok(None);
    };
    if eps > tol.certificate {
        return Ok(None);
    }
    let candidate = check_index_set(game, s)?;
    let cert = EquilibriumCertificate::new(game, x, Method::SubequalizerLp { candidate }, tol.support)?;
    Ok((cert.gap <= tol.certificate).then_some(cert))
}

/// Solves `[C_SS −𝟙; 𝟙ᵀ 0]·[x; v] = [0; 1]` by least squares, returning a
/// particular solution and the numerical null space.
fn indifference_system(game: &SymmetricGame, s: &[usize]) -> (DVector<f64>, Vec<DVector<f64>>) {
    let k = s.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in s.iter().enumerate() {
        for (c, &j) in s.iter().enumerate() {
            m[(r, c)] = game.entry(i, j);
        }
        m[(r, k)] = -1.0;
    }
    for c in 0..k {
        m[(k, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k + 1);
    b[k] = 1.0;
    let svd = m.svd(true, true);
    let cutoff = SINGULAR_CUTOFF * svd.singular_values.max().max(1.0);
    let particular = svd.solve(&b, cutoff).expect("both factors were computed");
    let v_t = svd.v_t.as_ref().expect("right singular vectors were computed");
    let null = (0..svd.singular_values.len())
        .filter(|&r| svd.singular_values[r] <= cutoff)
        .map(|r| v_t.row(r).transpose())
        .collect();
    (particular, null)
}

/// Range of `t` keeping `base + t·dir` (first `k` entries) nonnegative.
fn feasible_interval(base: &DVector<f64>, dir: &DVector<f64>, k: usize) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..k {
        let (b, d) = (base[i] + ENUM_NONNEG_TOL, dir[i]);
        if d.abs() <= SINGULAR_CUTOFF {
            if b < 0.0 {
                return None;
            }
        } else if d > 0.0 {
            lo = lo.max(-b / d);
        } else {
            hi = hi.min(-b / d);
        }
    }
    (lo <= hi && lo.is_finite() && hi.is_finite()).then_some((lo, hi))
}

/// All symmetric equilibria found by solving the indifference system on every
/// nonempty support. Continua are represented by sampled points.
pub fn enumerate_symmetric_equilibria(game: &SymmetricGame, n_max: usize) -> Result<Vec<EquilibriumCertificate>> {
    let n = game.n();
    if n > n_max {
        return Err(Error::TooLargeForEnumeration { n, max: n_max });
    }
    let mut supports: Vec<Vec<usize>> = (1u32..1 << n)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect();
    supports.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let mut found: Vec<EquilibriumCertificate> = Vec::new();
    for s in &supports {
        let k = s.len();
        let (particular, null) = indifference_system(game, s);
        let mut candidates = vec![particular.clone()];
        for dir in &null {
            if let Some((lo, hi)) = feasible_interval(&particular, dir, k) {
                for t in 0..NULL_SAMPLES {
                    let frac = t as f64 / (NULL_SAMPLES - 1) as f64;
                    candidates.push(&particular + dir * (lo + frac * (hi - lo)));
                }
            }
        }
        for cand in candidates {
            if (0..k).any(|i| cand[i] < -ENUM_NONNEG_TOL) {
                continue;
            }
            let mut probs = vec![0.0; n];
            for (idx, &i) in s.iter().enumerate() {
                probs[i] = cand[idx];
            }
            if probs.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let x = project(probs);
            if epsilon_gap_raw(game, x.probs()) > DEFAULT_CERTIFICATE_TOL {
                continue;
            }
            let dup = found.iter().any(|c| {
                c.strategy.probs().iter().zip(x.probs()).all(|(a, b)| (a - b).abs() <= DEDUP_TOL)
            });
            if !dup {
                found.push(EquilibriumCertificate::new(game, x, Method::SupportEnumeration, DEFAULT_SUPPORT_TOL)?);
            }
        }
    }
    Ok(found)
}
