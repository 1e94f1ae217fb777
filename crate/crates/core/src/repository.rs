//! Repository adapters: fetch raw sensor metadata (`send`) and turn it into
//! [`GenericSensor`]s (`unmarshal`).
//!
//! Three sources are provided:
//!
//! * [`FixtureRepository`] replays newline-delimited weather-service JSON
//!   files from a directory, post-filtering records by region.
//! * [`SyntheticRepository`] generates sensors with uniformly random
//!   coordinates and context properties under a seed.
//! * `LiveRepository` (feature `live`) queries the weather service directly.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use tracing::debug;

use crate::error::RepositoryError;
use crate::model::{ContextVector, GenericSensor, GeoPoint, Measurements, Region};

pub const OWM_BASE_URL: &str = "http://api.openweathermap.org";
pub const MEDIA_JSON: &str = "application/json";
pub const MEDIA_NDJSON: &str = "application/x-ndjson";
/// Array of canonical [`GenericSensor`] objects.
pub const MEDIA_SENSORS: &str = "application/vnd.sensedeploy.sensors+json";
pub const FIXTURE_SUFFIX: &str = ".owm.ndjson";

/// Epoch used for generated readings: 2015-02-07T00:00:00Z.
pub const SYNTHETIC_EPOCH: i64 = 1_423_267_200;

const CONTEXT_SEED: u64 = 0x5EED_C0DE_CAFE_F00D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryQuery {
    pub region: Region,
    #[serde(default)]
    pub limit: Option<usize>,
    pub source: String,
    /// Only consulted by generating sources.
    #[serde(default)]
    pub seed: u64,
}

impl RepositoryQuery {
    pub fn new(region: Region, source: impl Into<String>) -> Self {
        RepositoryQuery {
            region,
            limit: None,
            source: source.into(),
            seed: 0,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), RepositoryError> {
        if self.limit == Some(0) {
            return Err(RepositoryError::InvalidQuery(
                "limit must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBatch {
    pub payload: Vec<u8>,
    pub media_type: String,
    pub fetched_at: i64,
}

/// A cloud sensor repository.
pub trait RepositorySource: Send + Sync {
    fn name(&self) -> &str;

    fn send(&self, query: &RepositoryQuery) -> Result<RawBatch, RepositoryError>;
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Unmarshaled {
    pub sensors: Vec<GenericSensor>,
    pub skipped: usize,
}

impl Unmarshaled {
    pub fn records_in(&self) -> usize {
        self.sensors.len() + self.skipped
    }
}

pub fn owm_url_by_id(base: &str, id: u64) -> String {
    format!("{}/data/2.5/weather?id={id}", base.trim_end_matches('/'))
}

pub fn owm_url_by_coord(base: &str, lat: f64, lon: f64) -> String {
    format!(
        "{}/data/2.5/weather?lat={lat}&lon={lon}",
        base.trim_end_matches('/')
    )
}

#[derive(Debug, Deserialize)]
struct OwmCoord {
    lon: f64,
    lat: f64,
}

#[derive(Debug, Default, Deserialize)]
struct OwmSys {
    #[serde(default)]
    country: Option<String>,
}

#[derive(Debug, Deserialize)]
struct OwmMain {
    temp: f64,
    humidity: f64,
    pressure: f64,
    #[serde(default)]
    sea_level: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct OwmRecord {
    coord: OwmCoord,
    #[serde(default)]
    sys: OwmSys,
    main: OwmMain,
    #[serde(default)]
    base: Option<String>,
    #[serde(default)]
    dt: Option<i64>,
    id: u64,
    name: String,
    /// Not part of the weather-service schema; honoured when present.
    #[serde(default)]
    context: Option<ContextVector>,
}

impl OwmRecord {
    fn into_sensor(self) -> Result<GenericSensor, String> {
        let location = GeoPoint::new(self.coord.lat, self.coord.lon).map_err(|e| e.to_string())?;
        let sensor = GenericSensor {
            id: self.id,
            name: self.name.clone(),
            location,
            measurements: Measurements {
                city: self.name,
                country: self.sys.country.unwrap_or_default(),
                base: self.base.unwrap_or_else(|| "stations".into()),
                temperature: self.main.temp,
                sea_level: self.main.sea_level,
                pressure: self.main.pressure,
                humidity: self.main.humidity,
            },
            context: self.context.unwrap_or_else(|| context_for_id(self.id)),
            source_url: owm_url_by_id(OWM_BASE_URL, self.id),
            observed_at: self.dt.unwrap_or(SYNTHETIC_EPOCH),
        };
        sensor.validate().map_err(|e| e.to_string())?;
        Ok(sensor)
    }
}

/// Uniform draws over each context property's documented range.
fn sample_context(rng: &mut ChaCha8Rng) -> ContextVector {
    ContextVector {
        battery: rng.random_range(0.0..=100.0),
        price: rng.random_range(0.0..=10.0),
        drift: rng.random_range(0.0..=0.05),
        frequency: rng.random_range(0.1..=10.0),
        energy_consumption: rng.random_range(0.0..=500.0),
        response_time: rng.random_range(0.0..=2000.0),
    }
}

/// Context properties for a repository record that carries none, derived
/// only from the sensor id.
pub fn context_for_id(id: u64) -> ContextVector {
    let mut rng = ChaCha8Rng::seed_from_u64(CONTEXT_SEED ^ id);
    sample_context(&mut rng)
}

fn decode_one(raw: &str, media_type: &str) -> Result<GenericSensor, String> {
    if media_type == MEDIA_SENSORS {
        serde_json::from_str::<GenericSensor>(raw).map_err(|e| e.to_string())
    } else {
        serde_json::from_str::<OwmRecord>(raw)
            .map_err(|e| e.to_string())?
            .into_sensor()
    }
}

/// Decodes a raw batch. Individual records that fail validation (or repeat
/// an id already seen in the batch) are skipped and counted.
pub fn unmarshal(batch: &RawBatch) -> Result<Unmarshaled, RepositoryError> {
    let media = batch
        .media_type
        .split(';')
        .next()
        .unwrap_or_default()
        .trim()
        .to_ascii_lowercase();
    let text = std::str::from_utf8(&batch.payload)
        .map_err(|e| RepositoryError::UnparseablePayload(e.to_string()))?;

    let records: Vec<&str> = match media.as_str() {
        MEDIA_NDJSON => text.lines().filter(|l| !l.trim().is_empty()).collect(),
        MEDIA_JSON | MEDIA_SENSORS => {
            let trimmed = text.trim_start();
            if trimmed.starts_with('[') {
                let items: Vec<&RawValue> = serde_json::from_str(text)
                    .map_err(|e| RepositoryError::UnparseablePayload(e.to_string()))?;
                items.into_iter().map(RawValue::get).collect()
            } else {
                let single: &RawValue = serde_json::from_str(text)
                    .map_err(|e| RepositoryError::UnparseablePayload(e.to_string()))?;
                vec![single.get()]
            }
        }
        other => return Err(RepositoryError::MalformedMediaType(other.to_string())),
    };

    let mut out = Unmarshaled {
        sensors: Vec::with_capacity(records.len()),
        skipped: 0,
    };
    let mut seen = HashSet::with_capacity(records.len());
    for raw in &records {
        match decode_one(raw, &media) {
            Ok(sensor) if seen.insert(sensor.id) => out.sensors.push(sensor),
            Ok(sensor) => {
                debug!(id = sensor.id, "skipping duplicate sensor id");
                out.skipped += 1;
            }
            Err(reason) => {
                debug!(%reason, "skipping malformed sensor record");
                out.skipped += 1;
            }
        }
    }
    if !records.is_empty() && out.sensors.is_empty() {
        return Err(RepositoryError::UnparseablePayload(format!(
            "none of {} records could be decoded",
            records.len()
        )));
    }
    Ok(out)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the generator inputs into one stream seed so different
/// `(seed, count, region)` triples never share a stream.
fn synthetic_stream_seed(count: usize, region: &Region, seed: u64) -> u64 {
    [
        count as u64,
        region.min_lon().to_bits(),
        region.max_lon().to_bits(),
        region.min_lat().to_bits(),
        region.max_lat().to_bits(),
    ]
    .into_iter()
    .fold(mix(seed), |acc, v| mix(acc ^ v))
}

/// Generates `count` valid sensors with uniform coordinates inside `region`.
/// Same arguments, same output.
pub fn generate_synthetic(count: usize, region: &Region, seed: u64) -> Vec<GenericSensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(synthetic_stream_seed(count, region, seed));
    (0..count)
        .map(|i| {
            let id = i as u64 + 1;
            let lat = rng.random_range(region.min_lat()..=region.max_lat());
            let lon = rng.random_range(region.min_lon()..=region.max_lon());
            let name = format!("Sensor{id}");
            GenericSensor {
                id,
                name: name.clone(),
                location: GeoPoint::new(lat, lon).expect("sampled inside a valid region"),
                measurements: Measurements {
                    city: name,
                    country: "ZZ".into(),
                    base: "stations".into(),
                    temperature: rng.random_range(230.0..=310.0),
                    sea_level: None,
                    pressure: rng.random_range(950.0..=1050.0),
                    humidity: rng.random_range(0.0..=100.0),
                },
                context: sample_context(&mut rng),
                source_url: owm_url_by_id(OWM_BASE_URL, id),
                observed_at: SYNTHETIC_EPOCH,
            }
        })
        .collect()
}

/// Weather-service-shaped JSON lines for a generated station set, used to
/// build fixture files. Ids start at `first_id`.
pub fn owm_fixture_lines(region: &Region, count: usize, seed: u64, first_id: u64) -> Vec<String> {
    generate_synthetic(count, region, seed)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let id = first_id + i as u64;
            serde_json::json!({
                "coord": { "lon": s.location.longitude(), "lat": s.location.latitude() },
                "sys": { "country": "ZZ" },
                "main": {
                    "temp": (s.measurements.temperature * 100.0).round() / 100.0,
                    "humidity": s.measurements.humidity.round(),
                    "pressure": s.measurements.pressure.round(),
                },
                "base": "stations",
                "dt": s.observed_at,
                "id": id,
                "name": format!("Station{id}"),
                "cod": 200,
            })
            .to_string()
        })
        .collect()
}

pub fn now_epoch() -> i64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

/// Replays `<region-slug>.owm.ndjson` files from a directory.
#[derive(Debug, Clone)]
pub struct FixtureRepository {
    dir: PathBuf,
}

#[derive(Deserialize)]
struct CoordOnly {
    coord: OwmCoord,
}

impl FixtureRepository {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureRepository { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn fixture_files(&self) -> Result<Vec<PathBuf>, RepositoryError> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(FIXTURE_SUFFIX))
            })
            .collect();
        files.sort();
        Ok(files)
    }
}

impl RepositorySource for FixtureRepository {
    fn name(&self) -> &str {
        "fixture"
    }

    fn send(&self, query: &RepositoryQuery) -> Result<RawBatch, RepositoryError> {
        query.validate()?;
        let limit = query.limit.unwrap_or(usize::MAX);
        let mut payload = Vec::new();
        let mut kept = 0usize;
        'files: for path in self.fixture_files()? {
            let text = fs::read_to_string(&path)?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                if kept == limit {
                    break 'files;
                }
                // rows without usable coordinates are left for unmarshal to count
                let inside = match serde_json::from_str::<CoordOnly>(line) {
                    Ok(c) => GeoPoint::new(c.coord.lat, c.coord.lon)
                        .map(|p| query.region.contains(&p))
                        .unwrap_or(false),
                    Err(_) => false,
                };
                if inside {
                    payload.extend_from_slice(line.as_bytes());
                    payload.push(b'\n');
                    kept += 1;
                }
            }
        }
        if kept == 0 {
            return Err(RepositoryError::NoFixtureForRegion);
        }
        Ok(RawBatch {
            payload,
            media_type: MEDIA_NDJSON.into(),
            fetched_at: SYNTHETIC_EPOCH,
        })
    }
}

/// Generates sensors on demand. `query.limit` sets the count, falling back
/// to `default_count`.
#[derive(Debug, Clone)]
pub struct SyntheticRepository {
    pub default_count: usize,
}

impl Default for SyntheticRepository {
    fn default() -> Self {
        SyntheticRepository {
            default_count: 1000,
        }
    }
}

impl RepositorySource for SyntheticRepository {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn send(&self, query: &RepositoryQuery) -> Result<RawBatch, RepositoryError> {
        query.validate()?;
        let count = query.limit.unwrap_or(self.default_count).max(1);
        let sensors = generate_synthetic(count, &query.region, query.seed);
        let payload = serde_json::to_vec(&sensors)
            .map_err(|e| RepositoryError::UnparseablePayload(e.to_string()))?;
        Ok(RawBatch {
            payload,
            media_type: MEDIA_SENSORS.into(),
            fetched_at: SYNTHETIC_EPOCH,
        })
    }
}

#[cfg(feature = "live")]
pub use live::LiveRepository;

#[cfg(feature = "live")]
mod live {
    use super::*;

    /// Fetches a fixed list of stations by id from the live service and
    /// keeps those inside the query region.
    pub struct LiveRepository {
        base_url: String,
        api_key: Option<String>,
        station_ids: Vec<u64>,
        client: reqwest::blocking::Client,
    }

    impl LiveRepository {
        pub fn new(
            base_url: impl Into<String>,
            api_key: Option<String>,
            station_ids: Vec<u64>,
        ) -> Self {
            LiveRepository {
                base_url: base_url.into(),
                api_key,
                station_ids,
                client: reqwest::blocking::Client::new(),
            }
        }
    }

    impl RepositorySource for LiveRepository {
        fn name(&self) -> &str {
            "live"
        }

        fn send(&self, query: &RepositoryQuery) -> Result<RawBatch, RepositoryError> {
            query.validate()?;
            let limit = query.limit.unwrap_or(usize::MAX);
            let mut items = Vec::new();
            for &id in &self.station_ids {
                if items.len() == limit {
                    break;
                }
                let mut url = owm_url_by_id(&self.base_url, id);
                if let Some(key) = &self.api_key {
                    url.push_str("&appid=");
                    url.push_str(key);
                }
                let resp = self
                    .client
                    .get(&url)
                    .send()
                    .map_err(|e| RepositoryError::Unreachable(e.to_string()))?;
                let media = resp
                    .headers()
                    .get(reqwest::header::CONTENT_TYPE)
                    .and_then(|v| v.to_str().ok())
                    .unwrap_or_default()
                    .to_string();
                if !media.starts_with(MEDIA_JSON) {
                    return Err(RepositoryError::MalformedMediaType(media));
                }
                let value: serde_json::Value = resp
                    .json()
                    .map_err(|e| RepositoryError::UnparseablePayload(e.to_string()))?;
                let inside = serde_json::from_value::<CoordOnly>(value.clone())
                    .ok()
                    .and_then(|c| GeoPoint::new(c.coord.lat, c.coord.lon).ok())
                    .is_some_and(|p| query.region.contains(&p));
                if inside {
                    items.push(value);
                }
            }
            Ok(RawBatch {
                payload: serde_json::to_vec(&items)
                    .map_err(|e| RepositoryError::UnparseablePayload(e.to_string()))?,
                media_type: MEDIA_JSON.into(),
                fetched_at: now_epoch(),
            })
        }
    }
}
