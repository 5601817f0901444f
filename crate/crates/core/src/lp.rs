//! Dense linear programming in standard form: `A y = b`, `y ≥ 0`.
//!
//! Two-phase tableau simplex with Bland's smallest-index rule for both the
//! entering and the leaving variable, so degenerate programs terminate.

use serde::Serialize;
use thiserror::Error;

use crate::game::SymmetricGame;

/// Entries with magnitude at or below this are treated as zero when pivoting.
pub const PIVOT_TOL: f64 = 1e-9;
/// Residual allowed on `A y = b` for a reported solution.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Most negative component allowed in a reported solution.
pub const NONNEG_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("constraint matrix has {rows} rows but rhs has {rhs} entries")]
    RhsMismatch { rows: usize, rhs: usize },
    #[error("row {row} has {len} columns, expected {expected}")]
    RowMismatch { row: usize, len: usize, expected: usize },
    #[error("objective has {len} entries, expected {expected}")]
    ObjectiveMismatch { len: usize, expected: usize },
    #[error("program must have at least one row and one column")]
    Empty,
    #[error("non-finite coefficient in program")]
    NonFinite,
    #[error("solution failed verification: residual {residual:e}, min component {min_component:e}")]
    Verification { residual: f64, min_component: f64 },
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
    Feasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLp {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    objective: Vec<f64>,
    sense: Sense,
}

impl StandardFormLp {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, objective: Vec<f64>, sense: Sense) -> Result<Self, LpError> {
        if a.is_empty() || a[0].is_empty() {
            return Err(LpError::Empty);
        }
        if a.len() != b.len() {
            return Err(LpError::RhsMismatch { rows: a.len(), rhs: b.len() });
        }
        let cols = a[0].len();
        for (row, r) in a.iter().enumerate() {
            if r.len() != cols {
                return Err(LpError::RowMismatch { row, len: r.len(), expected: cols });
            }
        }
        if objective.len() != cols {
            return Err(LpError::ObjectiveMismatch { len: objective.len(), expected: cols });
        }
        let finite = a.iter().flatten().chain(&b).chain(&objective).all(|v| v.is_finite());
        if !finite {
            return Err(LpError::NonFinite);
        }
        Ok(StandardFormLp { a, b, objective, sense })
    }

    /// A pure feasibility program (zero objective).
    pub fn feasibility(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self, LpError> {
        let cols = a.first().map_or(0, Vec::len);
        Self::new(a, b, vec![0.0; cols], Sense::Feasibility)
    }

    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn cols(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Largest violation of `A y = b`.
    pub fn residual(&self, y: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| (row.iter().zip(y).map(|(a, v)| a * v).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    pub solution: Option<Vec<f64>>,
    pub objective_value: f64,
}

impl LpResult {
    fn without_solution(status: LpStatus) -> Self {
        let objective_value = match status {
            LpStatus::Infeasible => f64::NAN,
            _ => f64::INFINITY,
        };
        LpResult { status, solution: None, objective_value }
    }
}

struct Tableau {
    width: usize,
    /// Constraint rows followed by the reduced-cost row.
    data: Vec<f64>,
    rows: usize,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn cost_row(&self) -> usize {
        self.rows
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        self.data[pr * w + pc] = 1.0;
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                let v = self.data[pr * w + c];
                if v != 0.0 {
                    self.data[r * w + c] -= f * v;
                }
            }
            self.data[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations over columns `0..allowed`. Returns `false` on
    /// an unbounded direction.
    fn optimize(&mut self, allowed: usize, max_iter: usize) -> Result<bool, LpError> {
        let z = self.cost_row();
        for _ in 0..max_iter {
            let Some(pc) = (0..allowed).find(|&c| self.at(z, c) < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(f64, usize, usize)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match best {
                        None => true,
                        Some((br, _, bvar)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[r] < bvar)
                        }
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            match best {
                Some((_, pr, _)) => self.pivot(pr, pc),
                None => return Ok(false),
            }
        }
        Err(LpError::IterationLimit)
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

pub fn solve_lp(lp: &StandardFormLp) -> Result<LpResult, LpError> {
    let m = lp.rows();
    let n = lp.cols();
    let width = n + m + 1;
    let mut data = vec![0.0; (m + 1) * width];
    for r in 0..m {
        let sign = if lp.b[r] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..n {
            data[r * width + c] = sign * lp.a[r][c];
        }
        data[r * width + n + r] = 1.0;
        data[r * width + width - 1] = sign * lp.b[r];
    }
    // Phase one: minimize the sum of artificials, expressed in reduced costs.
    for c in 0..n {
        data[m * width + c] = -(0..m).map(|r| data[r * width + c]).sum::<f64>();
    }
    data[m * width + width - 1] = -(0..m).map(|r| data[r * width + width - 1]).sum::<f64>();
    let mut t = Tableau { width, data, rows: m, basis: (n..n + m).collect() };
    let max_iter = 50_000 + 200 * (m + n);

    t.optimize(n + m, max_iter)?;
    let scale = lp.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let infeasibility = -t.at(t.cost_row(), width - 1);
    if infeasibility > PIVOT_TOL * scale {
        return Ok(LpResult::without_solution(LpStatus::Infeasible));
    }

    // Drive remaining (zero-level) artificials out of the basis.
    let mut r = 0;
    while r < t.rows {
        if t.basis[r] >= n {
            match (0..n).find(|&c| t.at(r, c).abs() > PIVOT_TOL) {
                Some(c) => {
                    t.pivot(r, c);
                    r += 1;
                }
                None => t.remove_row(r),
            }
        } else {
            r += 1;
        }
    }

    if lp.sense != Sense::Feasibility {
        let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let cost: Vec<f64> = lp.objective.iter().map(|c| sign * c).collect();
        let z = t.cost_row();
        for c in 0..width {
            let mut d = if c < n { cost[c] } else { 0.0 };
            for r in 0..t.rows {
                let bv = t.basis[r];
                d -= cost[bv] * t.at(r, c);
            }
            t.data[z * width + c] = d;
        }
        if !t.optimize(n, max_iter)? {
            return Ok(LpResult::without_solution(LpStatus::Unbounded));
        }
    }

    let mut y = vec![0.0; n];
    for r in 0..t.rows {
        if t.basis[r] < n {
            y[t.basis[r]] = t.rhs(r);
        }
    }
    let min_component = y.iter().copied().fold(f64::INFINITY, f64::min);
    y.iter_mut().filter(|v| **v < 0.0 && **v >= -NONNEG_TOL).for_each(|v| *v = 0.0);
    let residual = lp.residual(&y);
    if residual > RESIDUAL_TOL * scale || min_component < -NONNEG_TOL {
        return Err(LpError::Verification { residual, min_component });
    }
    let objective_value = lp.objective.iter().zip(&y).map(|(c, v)| c * v).sum();
    Ok(LpResult { status: LpStatus::Optimal, solution: Some(y), objective_value })
}

/// Constant added to every payoff before building the equalizer program so
/// that all entries are strictly positive. Equalizers are unchanged by it.
pub fn equalizer_shift(game: &SymmetricGame) -> f64 {
    if game.min_entry() <= 0.0 {
        1.0 - game.min_entry()
    } else {
        0.0
    }
}

/// The feasibility program `[C − 𝟙; 𝟙ᵀ 0]·[X; c] = [0; 1]`, `X, c ≥ 0`, on the
/// shifted matrix. Its feasible `X` are exactly the equalizers of the game.
/// Variables are ordered `X(0..n)` then `c`.
pub fn assemble_equalizer_lp(game: &SymmetricGame) -> StandardFormLp {
    let n = game.n();
    let shift = equalizer_shift(game);
    let mut a = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row: Vec<f64> = game.row(i).iter().map(|c| c + shift).collect();
        row.push(-1.0);
        a.push(row);
    }
    let mut last = vec![1.0; n];
    last.push(0.0);
    a.push(last);
    let mut b = vec![0.0; n];
    b.push(1.0);
    StandardFormLp::feasibility(a, b).expect("equalizer program is well formed")
}
