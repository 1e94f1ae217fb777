//! Weather suitability rankings for rheumatic diseases.
//!
//! Each disease maps to TOPSIS criteria over temperature, humidity and
//! pressure: cold always hurts, humidity hurts osteoarthritis and
//! arthritis, high pressure hurts arthritis and fibromyalgia.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::topsis::{self, CriterionSpec, DecisionMatrix, TopsisResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityReading {
    pub city: String,
    pub country: String,
    #[serde(rename = "temp_k")]
    pub temperature: f64,
    #[serde(rename = "pressure_hpa")]
    pub pressure: f64,
    #[serde(rename = "humidity_pct")]
    pub humidity: f64,
}

impl CityReading {
    fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |reason: &str| AnalysisError::InvalidReading {
            city: self.city.clone(),
            reason: reason.into(),
        };
        if ![self.temperature, self.pressure, self.humidity]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(bad("non-finite value"));
        }
        if !(0.0..=100.0).contains(&self.humidity) {
            return Err(bad("humidity outside [0, 100]"));
        }
        Ok(())
    }

    fn value(&self, criterion: &str) -> f64 {
        match criterion {
            "temperature" => self.temperature,
            "humidity" => self.humidity,
            "pressure" => self.pressure,
            other => unreachable!("profiles only use weather criteria, got {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disease {
    Osteoarthritis,
    Arthritis,
    Fibromyalgia,
}

impl Disease {
    pub const ALL: [Disease; 3] = [
        Disease::Osteoarthritis,
        Disease::Arthritis,
        Disease::Fibromyalgia,
    ];
}

impl FromStr for Disease {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "osteoarthritis" => Ok(Disease::Osteoarthritis),
            "arthritis" => Ok(Disease::Arthritis),
            "fibromyalgia" => Ok(Disease::Fibromyalgia),
            _ => Err(AnalysisError::UnknownDisease(s.to_string())),
        }
    }
}

impl fmt::Display for Disease {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Disease::Osteoarthritis => "osteoarthritis",
            Disease::Arthritis => "arthritis",
            Disease::Fibromyalgia => "fibromyalgia",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiseaseProfile {
    pub disease: Disease,
    pub criteria: Vec<CriterionSpec>,
}

impl DiseaseProfile {
    pub fn for_disease(disease: Disease) -> Self {
        let criteria = match disease {
            Disease::Osteoarthritis => vec![
                CriterionSpec::maximize("temperature"),
                CriterionSpec::minimize("humidity"),
            ],
            Disease::Arthritis => vec![
                CriterionSpec::maximize("temperature"),
                CriterionSpec::minimize("humidity"),
                CriterionSpec::minimize("pressure"),
            ],
            Disease::Fibromyalgia => vec![
                CriterionSpec::maximize("temperature"),
                CriterionSpec::minimize("pressure"),
            ],
        };
        DiseaseProfile { disease, criteria }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCity {
    pub city: String,
    pub country: String,
    pub closeness: f64,
}

/// The decision matrix `rank_cities` ranks, one row per reading.
pub fn city_matrix(
    readings: &[CityReading],
    profile: &DiseaseProfile,
) -> Result<DecisionMatrix<f64>, AnalysisError> {
    if readings.is_empty() {
        return Err(AnalysisError::EmptyReadings);
    }
    let mut seen = HashSet::new();
    for r in readings {
        r.validate()?;
        if !seen.insert(r.city.as_str()) {
            return Err(AnalysisError::DuplicateCity(r.city.clone()));
        }
    }
    let values = readings
        .iter()
        .flat_map(|r| profile.criteria.iter().map(|c| r.value(&c.name)))
        .collect();
    let options = readings.iter().map(|r| r.city.clone()).collect();
    Ok(DecisionMatrix::new(
        options,
        profile.criteria.clone(),
        values,
    )?)
}

/// Cities ordered from most to least suitable.
pub fn rank_cities(
    readings: &[CityReading],
    profile: &DiseaseProfile,
) -> Result<Vec<RankedCity>, AnalysisError> {
    let matrix = city_matrix(readings, profile)?;
    let TopsisResult {
        order, closeness, ..
    } = topsis::rank(&matrix);
    Ok(order
        .into_iter()
        .map(|i| RankedCity {
            city: readings[i].city.clone(),
            country: readings[i].country.clone(),
            closeness: closeness[i],
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedReading {
    /// Unix epoch seconds.
    pub at: i64,
    pub reading: CityReading,
}

/// Per-city arithmetic means over samples with `start <= at <= end`.
/// Cities appear in order of their first sample; an empty or inverted
/// window yields no cities.
pub fn windowed_means(samples: &[TimedReading], start: i64, end: i64) -> Vec<CityReading> {
    if start >= end {
        return Vec::new();
    }
    struct Acc {
        country: String,
        sums: [f64; 3],
        n: usize,
    }
    let mut order: Vec<&str> = Vec::new();
    let mut acc: HashMap<&str, Acc> = HashMap::new();
    for s in samples.iter().filter(|s| (start..=end).contains(&s.at)) {
        let r = &s.reading;
        let entry = acc.entry(r.city.as_str()).or_insert_with(|| {
            order.push(r.city.as_str());
            Acc {
                country: r.country.clone(),
                sums: [0.0; 3],
                n: 0,
            }
        });
        entry.sums[0] += r.temperature;
        entry.sums[1] += r.pressure;
        entry.sums[2] += r.humidity;
        entry.n += 1;
    }
    order
        .into_iter()
        .map(|city| {
            let a = &acc[city];
            let n = a.n as f64;
            CityReading {
                city: city.to_string(),
                country: a.country.clone(),
                temperature: a.sums[0] / n,
                pressure: a.sums[1] / n,
                humidity: a.sums[2] / n,
            }
        })
        .collect()
}

/// Reads `city,country,temp_k,pressure_hpa,humidity_pct` rows.
pub fn read_readings_csv<R: Read>(reader: R) -> Result<Vec<CityReading>, AnalysisError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .collect::<Result<Vec<CityReading>, _>>()
        .map_err(AnalysisError::from)
}

/// Writes `rank,city,country,closeness` rows.
pub fn write_ranking_csv<W: Write>(writer: W, ranking: &[RankedCity]) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rank", "city", "country", "closeness"])?;
    for (i, r) in ranking.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.city.clone(),
            r.country.clone(),
            format!("{:.6}", r.closeness),
        ])?;
    }
    w.flush().map_err(|e| AnalysisError::Csv(e.into()))
}
