//! Symmetric bimatrix games `(C, Cᵀ)` and mixed strategies over them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Default threshold below which probability mass is treated as absent.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-9;

const SIMPLEX_TOL: f64 = 1e-12;

/// Positive-affine payoff map `x ↦ scale·x + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub scale: f64,
    pub offset: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap { scale: 1.0, offset: 0.0 };

    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    /// The map that applies `self` first and `next` second.
    pub fn then(&self, next: &AffineMap) -> AffineMap {
        AffineMap {
            scale: next.scale * self.scale,
            offset: next.scale * self.offset + next.offset,
        }
    }
}

impl Default for AffineMap {
    fn default() -> Self {
        AffineMap::IDENTITY
    }
}

/// An `n × n` payoff matrix `C`; entry `(i, j)` is the payoff of pure
/// strategy `i` against pure strategy `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricGame {
    n: usize,
    payoff: Vec<f64>,
    max_entry: f64,
    min_entry: f64,
    /// Map from the payoffs the game was loaded with to the current ones.
    units: AffineMap,
}

impl SymmetricGame {
    /// Validates a square, finite matrix of at least two strategies.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::TooSmall(n));
        }
        let mut payoff = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NonSquare { row: i, len: row.len(), expected: n });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                payoff.push(v);
            }
        }
        Ok(Self::from_flat(n, payoff, AffineMap::IDENTITY))
    }

    fn from_flat(n: usize, payoff: Vec<f64>, units: AffineMap) -> Self {
        let max_entry = payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_entry = payoff.iter().copied().fold(f64::INFINITY, f64::min);
        SymmetricGame { n, payoff, max_entry, min_entry, units }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.payoff[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.max_entry
    }

    pub fn min_entry(&self) -> f64 {
        self.min_entry
    }

    pub fn is_nonnegative(&self) -> bool {
        self.min_entry >= 0.0
    }

    pub fn is_normalized(&self) -> bool {
        self.min_entry >= 0.0 && self.max_entry <= 1.0
    }

    /// Map from original (load-time) payoff units to the current matrix.
    pub fn units(&self) -> AffineMap {
        self.units
    }

    /// Writes `C x` into `out` without any validation.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(c, v)| c * v).sum();
        }
    }

    /// `C x` for a raw vector of matching length.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        out
    }

    /// Returns `a·C + b·𝟙𝟙ᵀ`, keeping track of the composed unit map.
    pub fn affine(&self, map: AffineMap) -> SymmetricGame {
        let payoff = self.payoff.iter().map(|&c| map.apply(c)).collect();
        Self::from_flat(self.n, payoff, self.units.then(&map))
    }

    pub fn to_file(&self) -> GameFile {
        GameFile { n: self.n, payoff: self.rows() }
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    /// Accepts nonnegative entries summing to one within `1e-12`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::within(probs, SIMPLEX_TOL)
    }

    /// Accepts entries within `tol` of the simplex and renormalizes them.
    /// Negative entries are rejected regardless of `tol`.
    pub fn within(mut probs: Vec<f64>, tol: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::NotOnSimplex("empty vector".into()));
        }
        if let Some((i, v)) = probs.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::NotOnSimplex(format!("entry {i} is {v}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(MixedStrategy(probs))
    }

    pub(crate) fn from_unchecked(probs: Vec<f64>) -> Self {
        MixedStrategy(probs)
    }

    pub fn uniform(n: usize) -> Self {
        MixedStrategy(vec![1.0 / n as f64; n])
    }

    /// The pure strategy `E_i` (0-based).
    pub fn pure(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        MixedStrategy(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0)
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().all(|&p| (p - u).abs() <= 1e-15)
    }

    pub fn support(&self, tol: f64) -> Vec<usize> {
        support(&self.0, tol)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(x: MixedStrategy) -> Self {
        x.0
    }
}

/// `C X` together with its extremes and the self-payoff `X·CX`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffVector {
    pub values: Vec<f64>,
    pub max: f64,
    pub min: f64,
    pub self_payoff: f64,
}

pub fn payoff_vector(game: &SymmetricGame, x: &MixedStrategy) -> Result<PayoffVector> {
    game.check_dim(x.len())?;
    Ok(payoff_vector_raw(game, x.probs()))
}

pub(crate) fn payoff_vector_raw(game: &SymmetricGame, x: &[f64]) -> PayoffVector {
    let values = game.apply(x);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let self_payoff = dot(x, &values);
    PayoffVector { values, max, min, self_payoff }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices carrying more than `tol` probability mass.
pub fn support(x: &[f64], tol: f64) -> Vec<usize> {
    x.iter().enumerate().filter(|(_, &p)| p > tol).map(|(i, _)| i).collect()
}

/// Rescales payoffs into `[0, 1]` with maximum entry exactly 1.
///
/// Returns the new game and the map `(a, b)` with `C' = a·C + b`. A constant
/// matrix maps to the all-zero game with `a = 1`.
pub fn normalize_payoffs(game: &SymmetricGame) -> (SymmetricGame, AffineMap) {
    let (lo, hi) = (game.min_entry, game.max_entry);
    let map = if hi > lo {
        let scale = 1.0 / (hi - lo);
        AffineMap { scale, offset: -lo * scale }
    } else {
        AffineMap { scale: 1.0, offset: -lo }
    };
    let mut out = game.affine(map);
    // Pin the extremes so rounding cannot push them outside [0, 1].
    if hi > lo {
        for (c, &orig) in out.payoff.iter_mut().zip(&game.payoff) {
            if orig == hi {
                *c = 1.0;
            } else if orig == lo {
                *c = 0.0;
            } else {
                *c = c.clamp(0.0, 1.0);
            }
        }
        out.max_entry = 1.0;
        out.min_entry = 0.0;
    }
    (out, map)
}

/// Splits `C` into its symmetric part `½(C + Cᵀ)` and antisymmetric part `½(C − Cᵀ)`.
pub fn decompose(game: &SymmetricGame) -> (SymmetricGame, SymmetricGame) {
    let n = game.n;
    let mut sym = vec![0.0; n * n];
    let mut anti = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (game.entry(i, j), game.entry(j, i));
            sym[i * n + j] = 0.5 * (a + b);
            anti[i * n + j] = 0.5 * (a - b);
        }
    }
    (
        SymmetricGame::from_flat(n, sym, AffineMap::IDENTITY),
        SymmetricGame::from_flat(n, anti, AffineMap::IDENTITY),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    RandomUniform,
    ZeroSumSymmetric,
    DoublySymmetric,
    Coordination,
}

impl FromStr for GameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_uniform" => Ok(GameKind::RandomUniform),
            "zero_sum_symmetric" => Ok(GameKind::ZeroSumSymmetric),
            "doubly_symmetric" => Ok(GameKind::DoublySymmetric),
            "coordination" => Ok(GameKind::Coordination),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GameKind::RandomUniform => "random_uniform",
            GameKind::ZeroSumSymmetric => "zero_sum_symmetric",
            GameKind::DoublySymmetric => "doubly_symmetric",
            GameKind::Coordination => "coordination",
        };
        f.write_str(s)
    }
}

/// Deterministic test-corpus generator.
///
/// * `random_uniform`: i.i.d. entries in `[0, 1)`.
/// * `zero_sum_symmetric`: antisymmetric entries in `[-1, 1)`, then normalized
///   (the pre-normalization matrix is recoverable through [`SymmetricGame::units`]).
/// * `doubly_symmetric`: `C = Cᵀ` with entries in `[0, 1)`.
/// * `coordination`: the identity matrix.
pub fn generate_game(kind: GameKind, n: usize, seed: u64) -> Result<SymmetricGame> {
    if n < 2 {
        return Err(Error::TooSmall(n));
    }
    let mut rng = SeededRng::new(seed);
    let mut c = vec![0.0; n * n];
    match kind {
        GameKind::RandomUniform => c.iter_mut().for_each(|v| *v = rng.uniform()),
        GameKind::DoublySymmetric => {
            for i in 0..n {
                for j in i..n {
                    let v = rng.uniform();
                    c[i * n + j] = v;
                    c[j * n + i] = v;
                }
            }
        }
        GameKind::ZeroSumSymmetric => {
            for i in 0..n {
                for j in i + 1..n {
                    let v = rng.uniform_range(-1.0, 1.0);
                    c[i * n + j] = v;
                    c[j * n + i] = -v;
                }
            }
        }
        GameKind::Coordination => (0..n).for_each(|i| c[i * n + i] = 1.0),
    }
    let game = SymmetricGame::from_flat(n, c, AffineMap::IDENTITY);
    Ok(match kind {
        GameKind::ZeroSumSymmetric => normalize_payoffs(&game).0,
        _ => game,
    })
}

/// On-disk JSON form: `{"n": 3, "payoff": [[...], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub n: usize,
    pub payoff: Vec<Vec<f64>>,
}

impl TryFrom<GameFile> for SymmetricGame {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        if file.payoff.len() != file.n {
            return Err(Error::DimensionMismatch { expected: file.n, got: file.payoff.len() });
        }
        SymmetricGame::from_rows(&file.payoff)
    }
}

/// Parses either the JSON form or the plain-text form (first line `n`,
/// then `n` whitespace-separated rows).
pub fn parse_game(text: &str) -> Result<SymmetricGame> {
    if text.trim_start().starts_with('{') {
        let file: GameFile = serde_json::from_str(text)?;
        return file.try_into();
    }
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::Parse("empty game file".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad dimension line: {e}")))?;
    let mut rows = Vec::with_capacity(n);
    for line in lines {
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad entry `{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: rows.len() });
    }
    SymmetricGame::from_rows(&rows)
}

pub fn load_game(path: impl AsRef<Path>) -> Result<SymmetricGame> {
    parse_game(&std::fs::read_to_string(path)?)
}

pub fn game_to_json(game: &SymmetricGame) -> String {
    serde_json::to_string(&game.to_file()).expect("game serializes")
}

pub fn game_to_text(game: &SymmetricGame) -> String {
    let mut s = format!("{}\n", game.n);
    for i in 0..game.n {
        let row: Vec<String> = game.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(rows: &[&[f64]]) -> SymmetricGame {
        SymmetricGame::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn validate_flags() {
        let id = g(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(id.is_nonnegative() && id.is_normalized());
        let zs = g(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert!(!zs.is_nonnegative());
        let err = SymmetricGame::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::NonSquare { row: 1, .. }));
        let err = SymmetricGame::from_rows(&[vec![1.0, f64::NAN], vec![3.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn normalize_rps() {
        let rps = g(&[&[0.0, -1.0, 1.0], &[1.0, 0.0, -1.0], &[-1.0, 1.0, 0.0]]);
        let (out, map) = normalize_payoffs(&rps);
        assert_eq!(map, AffineMap { scale: 0.5, offset: 0.5 });
        assert_eq!(out.rows(), vec![vec![0.5, 0.0, 1.0], vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 0.5]]);
    }

    #[test]
    fn normalize_already_normalized_and_constant() {
        let h = g(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (out, map) = normalize_payoffs(&h);
        assert_eq!(map, AffineMap::IDENTITY);
        assert_eq!(out.rows(), h.rows());

        let c = g(&[&[5.0, 5.0], &[5.0, 5.0]]);
        let (out, map) = normalize_payoffs(&c);
        assert_eq!(map, AffineMap { scale: 1.0, offset: -5.0 });
        assert_eq!(out.rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn decompose_examples() {
        let (s, a) = decompose(&g(&[&[0.0, 2.0], &[0.0, 0.0]]));
        assert_eq!(s.rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(a.rows(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);

        let (s, a) = decompose(&g(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(s.rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(a.rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);

        let (s, a) = decompose(&g(&[&[0.0, -1.0], &[1.0, 0.0]]));
        assert_eq!(s.rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(a.rows(), vec![vec![0.0, -1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn payoff_vector_examples() {
        let rps = g(&[&[0.5, 0.0, 1.0], &[1.0, 0.5, 0.0], &[0.0, 1.0, 0.5]]);
        let p = payoff_vector(&rps, &MixedStrategy::uniform(3)).unwrap();
        assert_eq!(p.values, vec![0.5, 0.5, 0.5]);

        let rps1 = g(&[&[1.0, 0.0, 2.0], &[2.0, 1.0, 0.0], &[0.0, 2.0, 1.0]]);
        let p = payoff_vector(&rps1, &MixedStrategy::pure(3, 0)).unwrap();
        assert_eq!(p.values, vec![1.0, 2.0, 0.0]);
        assert_eq!((p.max, p.min, p.self_payoff), (2.0, 0.0, 1.0));

        let id = g(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let p = payoff_vector(&id, &MixedStrategy::new(vec![0.75, 0.25]).unwrap()).unwrap();
        assert_eq!(p.values, vec![0.75, 0.25]);

        let err = payoff_vector(&id, &MixedStrategy::uniform(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 3 }));
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(&[0.5, 0.5, 0.0], 1e-9), vec![0, 1]);
        assert_eq!(support(&[1.0 / 3.0; 3], 1e-9), vec![0, 1, 2]);
        assert_eq!(support(&[1.0 - 2e-12, 1e-12, 1e-12], 1e-9), vec![0]);
    }

    #[test]
    fn mixed_strategy_validation() {
        assert!(MixedStrategy::new(vec![0.5, 0.6]).is_err());
        assert!(MixedStrategy::new(vec![1.5, -0.5]).is_err());
        assert!(MixedStrategy::within(vec![0.5, 0.5 + 1e-7], 1e-6).is_ok());
        assert!(MixedStrategy::within(vec![0.5, 0.5 + 1e-5], 1e-6).is_err());
        assert!(MixedStrategy::uniform(4).is_uniform());
        assert!(!MixedStrategy::pure(3, 1).is_interior());
    }

    #[test]
    fn generator_examples() {
        let c = generate_game(GameKind::Coordination, 2, 99).unwrap();
        assert_eq!(c.rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let z = generate_game(GameKind::ZeroSumSymmetric, 3, 11).unwrap();
        let u = z.units();
        for i in 0..3 {
            for j in 0..3 {
                let a = u.invert(z.entry(i, j));
                let b = u.invert(z.entry(j, i));
                assert!((a + b).abs() < 1e-12, "C != -Cᵀ at ({i},{j})");
            }
        }

        let a = generate_game(GameKind::RandomUniform, 4, 7).unwrap();
        let b = generate_game(GameKind::RandomUniform, 4, 7).unwrap();
        assert_eq!(a, b);

        let d = generate_game(GameKind::DoublySymmetric, 5, 1).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d.entry(i, j), d.entry(j, i));
            }
        }
        assert!(matches!("bogus".parse::<GameKind>(), Err(Error::UnknownKind(_))));
    }

    #[test]
    fn parse_both_formats() {
        let j = parse_game(r#"{"n": 2, "payoff": [[1, 0], [0, 1]]}"#).unwrap();
        let t = parse_game("2\n1 0\n0 1\n").unwrap();
        assert_eq!(j, t);
        assert!(parse_game(r#"{"n": 3, "payoff": [[1, 0], [0, 1]]}"#).is_err());
        assert!(parse_game("2\n1 0\n").is_err());
        assert_eq!(parse_game(&game_to_json(&j)).unwrap(), j);
        assert_eq!(parse_game(&game_to_text(&j)).unwrap(), j);
    }
}
