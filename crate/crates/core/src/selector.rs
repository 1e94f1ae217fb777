//! Picking the best `k` sensors out of a repository response.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SelectError;
use crate::model::{ContextVector, GenericSensor};
use crate::topsis::{self, CriterionSpec, DecisionMatrix, Direction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    #[default]
    Topsis,
    Random,
}

impl FromStr for SelectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topsis" => Ok(SelectorKind::Topsis),
            "random" => Ok(SelectorKind::Random),
            other => Err(format!(
                "unknown selector `{other}` (expected topsis or random)"
            )),
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectorKind::Topsis => "topsis",
            SelectorKind::Random => "random",
        })
    }
}

/// Battery and frequency are better when high; price, drift, energy
/// consumption and response time when low.
pub fn default_criteria() -> Vec<CriterionSpec> {
    ContextVector::FIELDS
        .iter()
        .map(|&name| {
            let direction = match name {
                "battery" | "frequency" => Direction::Maximize,
                _ => Direction::Minimize,
            };
            CriterionSpec::new(name, direction)
        })
        .collect()
}

/// Decision matrix over the sensors' context vectors, one row per sensor.
pub fn context_matrix(
    sensors: &[GenericSensor],
    criteria: &[CriterionSpec],
) -> Result<DecisionMatrix<f64>, SelectError> {
    if sensors.is_empty() {
        return Err(SelectError::EmptySensorList);
    }
    let columns = criteria
        .iter()
        .map(|c| {
            ContextVector::FIELDS
                .iter()
                .position(|f| *f == c.name)
                .ok_or_else(|| SelectError::UnknownCriterion(c.name.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut values = Vec::with_capacity(sensors.len() * columns.len());
    for s in sensors {
        let row = s.context.values();
        values.extend(columns.iter().map(|&c| row[c]));
    }
    let options = sensors.iter().map(|s| s.id.to_string()).collect();
    Ok(DecisionMatrix::new(options, criteria.to_vec(), values)?)
}

/// Indices of the best `min(k, n)` sensors, best first.
pub fn select_top_indices(
    sensors: &[GenericSensor],
    criteria: &[CriterionSpec],
    k: usize,
) -> Result<Vec<usize>, SelectError> {
    if k == 0 {
        return Err(SelectError::ZeroCount);
    }
    let matrix = context_matrix(sensors, criteria)?;
    let mut order = topsis::rank(&matrix).order;
    order.truncate(k);
    Ok(order)
}

pub fn select_top(
    sensors: &[GenericSensor],
    criteria: &[CriterionSpec],
    k: usize,
) -> Result<Vec<GenericSensor>, SelectError> {
    Ok(select_top_indices(sensors, criteria, k)?
        .into_iter()
        .map(|i| sensors[i].clone())
        .collect())
}

/// Uniform sample without replacement, reproducible for a given seed.
pub fn select_random_indices(len: usize, k: usize, seed: u64) -> Result<Vec<usize>, SelectError> {
    if len == 0 {
        return Err(SelectError::EmptySensorList);
    }
    if k == 0 {
        return Err(SelectError::ZeroCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, len, k.min(len)).into_vec())
}

pub fn select_random(
    sensors: &[GenericSensor],
    k: usize,
    seed: u64,
) -> Result<Vec<GenericSensor>, SelectError> {
    Ok(select_random_indices(sensors.len(), k, seed)?
        .into_iter()
        .map(|i| sensors[i].clone())
        .collect())
}
