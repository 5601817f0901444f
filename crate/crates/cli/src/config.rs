use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hedge_nash::game::load_game;
use hedge_nash::hedge::TraceFormat;
use hedge_nash::{generate_game, normalize_payoffs, GameKind, LearningRateSchedule, MixedStrategy, SeededRng, SymmetricGame};
use serde::{Deserialize, Serialize};

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Path to a game file or `gen:<kind>:<n>[:<seed>]`.
    pub game: String,
    #[serde(default = "default_schedule")]
    pub schedule: String,
    /// `uniform`, `random` (drawn from `seed`) or `csv:<p1>,<p2>,...`.
    #[serde(default = "default_x0")]
    pub x0: String,
    pub steps: usize,
    #[serde(default = "default_emit_every")]
    pub emit_every: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
    #[serde(default)]
    pub format: TraceFormat,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub force: bool,
}

fn default_schedule() -> String {
    "power:0.6666666666666666".into()
}

fn default_x0() -> String {
    "uniform".into()
}

fn default_emit_every() -> usize {
    1
}

/// Reads a single config object or a JSON array of them.
pub fn load_configs(path: &Path) -> Result<Vec<RunConfig>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let configs = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    Ok(configs)
}

/// The game as given, before normalization.
pub fn load_raw_game(spec: &str) -> Result<SymmetricGame> {
    if let Some(rest) = spec.strip_prefix("gen:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            bail!("generator spec must be gen:<kind>:<n>[:<seed>], got `{spec}`");
        }
        let kind: GameKind = parts[0].parse()?;
        let n: usize = parts[1].parse().with_context(|| format!("bad size in `{spec}`"))?;
        let seed: u64 = match parts.get(2) {
            Some(s) => s.parse().with_context(|| format!("bad seed in `{spec}`"))?,
            None => 0,
        };
        return Ok(generate_game(kind, n, seed)?);
    }
    load_game(spec).with_context(|| format!("loading game `{spec}`"))
}

/// The game rescaled to `[0, 1]`; the map back to the loaded units is kept
/// inside the game.
pub fn load_normalized_game(spec: &str) -> Result<SymmetricGame> {
    Ok(normalize_payoffs(&load_raw_game(spec)?).0)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad number `{t}`")))
        .collect()
}

pub fn parse_x0(spec: &str, n: usize, seed: u64) -> Result<MixedStrategy> {
    let x0 = match spec {
        "uniform" => MixedStrategy::uniform(n),
        "random" => MixedStrategy::new(SeededRng::new(seed).interior_simplex(n))?,
        other => {
            let Some(list) = other.strip_prefix("csv:") else {
                bail!("--x0 must be uniform, random or csv:<p1>,<p2>,..., got `{other}`");
            };
            MixedStrategy::new(parse_vector(list)?)?
        }
    };
    if x0.len() != n {
        bail!("starting point has {} entries but the game has {n} strategies", x0.len());
    }
    if !x0.is_interior() {
        bail!("starting point must have every entry positive");
    }
    Ok(x0)
}

pub fn parse_schedule(spec: &str) -> Result<LearningRateSchedule> {
    Ok(spec.parse()?)
}
