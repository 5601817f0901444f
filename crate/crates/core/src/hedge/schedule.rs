//! Learning-rate schedules `k ↦ α_k` and their validation against the
//! convergence conditions `α_k → 0`, `Σ α_k = ∞`, `Σ α_k (e^{α_k} − 1) < ∞`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the default schedule `α_k = (k + 1)^{-2/3}`.
pub const DEFAULT_POWER: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LearningRateSchedule {
    /// `α_k = (k + 1)^{-p}`.
    Power { exponent: f64 },
    /// `α_0 = 1`, `α_k = 1/k` for `k ≥ 1`.
    Harmonic,
    /// `α_k = rate` for every `k`.
    Constant { rate: f64 },
    /// Explicit rates; running past the end of the list is an error.
    Custom { rates: Vec<f64> },
}

impl Default for LearningRateSchedule {
    fn default() -> Self {
        LearningRateSchedule::Power { exponent: DEFAULT_POWER }
    }
}

impl LearningRateSchedule {
    pub fn rate(&self, k: usize) -> Result<f64> {
        let a = match self {
            LearningRateSchedule::Power { exponent } => ((k + 1) as f64).powf(-exponent),
            LearningRateSchedule::Harmonic => {
                if k == 0 {
                    1.0
                } else {
                    1.0 / k as f64
                }
            }
            LearningRateSchedule::Constant { rate } => *rate,
            LearningRateSchedule::Custom { rates } => *rates.get(k).ok_or(Error::ScheduleExhausted(k))?,
        };
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::BadLearningRate(a));
        }
        Ok(a)
    }

    /// Parses `power:<p>`, `harmonic`, `constant:<rate>` or `file:<path>`;
    /// the file holds rates separated by whitespace or commas.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (family, arg) = match spec.split_once(':') {
            Some((f, a)) => (f, Some(a)),
            None => (spec, None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Parse(format!("schedule `{spec}` needs a parameter")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("schedule `{spec}`: {e}")))
        };
        match family {
            "power" => Ok(LearningRateSchedule::Power { exponent: number(arg)? }),
            "harmonic" => Ok(LearningRateSchedule::Harmonic),
            "constant" => Ok(LearningRateSchedule::Constant { rate: number(arg)? }),
            "file" => {
                let path = arg.ok_or_else(|| Error::Parse("file schedule needs a path".into()))?;
                let text = std::fs::read_to_string(path)?;
                Ok(LearningRateSchedule::Custom { rates: parse_rates(&text)? })
            }
            other => Err(Error::Parse(format!("unknown schedule family `{other}`"))),
        }
    }
}

fn parse_rates(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad rate `{t}`: {e}"))))
        .collect()
}

impl FromStr for LearningRateSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_spec(s)
    }
}

impl fmt::Display for LearningRateSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearningRateSchedule::Power { exponent } => write!(f, "power:{exponent}"),
            LearningRateSchedule::Harmonic => f.write_str("harmonic"),
            LearningRateSchedule::Constant { rate } => write!(f, "constant:{rate}"),
            LearningRateSchedule::Custom { rates } => write!(f, "custom[{}]", rates.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum ScheduleValidity {
    Valid,
    Invalid(String),
    /// Positive rates whose asymptotics cannot be checked from a finite list.
    UnverifiedAsymptotics(String),
}

impl ScheduleValidity {
    pub fn is_invalid(&self) -> bool {
        matches!(self, ScheduleValidity::Invalid(_))
    }
}

pub fn validate_schedule(schedule: &LearningRateSchedule) -> ScheduleValidity {
    use ScheduleValidity::*;
    match schedule {
        LearningRateSchedule::Power { exponent: p } => {
            if !p.is_finite() {
                Invalid(format!("exponent {p} is not finite"))
            } else if *p <= 0.0 {
                Invalid(format!("α_k = (k+1)^-{p} does not tend to 0"))
            } else if *p <= 0.5 {
                Invalid(format!(
                    "Σ α_k(e^α_k − 1) diverges: the terms behave like α_k² = (k+1)^-{} and {} ≤ 1",
                    2.0 * p,
                    2.0 * p
                ))
            } else if *p > 1.0 {
                Invalid(format!("Σ α_k converges for exponent {p} > 1"))
            } else {
                Valid
            }
        }
        LearningRateSchedule::Harmonic => Valid,
        LearningRateSchedule::Constant { rate } => {
            if *rate > 0.0 && rate.is_finite() {
                Invalid(format!("constant rate {rate} does not tend to 0"))
            } else {
                Invalid(format!("rate {rate} is not positive"))
            }
        }
        LearningRateSchedule::Custom { rates } => {
            if rates.is_empty() {
                return Invalid("empty rate list".into());
            }
            match rates.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
                Some(k) => Invalid(format!("rate {k} is {} (must be positive)", rates[k])),
                None => UnverifiedAsymptotics(format!("{} explicit rates; limits not checkable", rates.len())),
            }
        }
    }
}
