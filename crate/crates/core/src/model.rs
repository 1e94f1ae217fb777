//! Repository-neutral sensor types shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// A WGS84 coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    latitude: f64,
    longitude: f64,
}

#[derive(Deserialize)]
struct RawGeoPoint {
    latitude: f64,
    longitude: f64,
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = ModelError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.latitude, raw.longitude)
    }
}

impl GeoPoint {
    pub fn new(latitude: f64, longitude: f64) -> Result<Self, ModelError> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(ModelError::Latitude(latitude));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(ModelError::Longitude(longitude));
        }
        Ok(GeoPoint {
            latitude,
            longitude,
        })
    }

    /// Convenience constructor taking `(longitude, latitude)`, the order used
    /// by map tooling and the repository's `coord` object.
    pub fn lon_lat(longitude: f64, latitude: f64) -> Result<Self, ModelError> {
        Self::new(latitude, longitude)
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }
}

/// Axis-aligned bounding box given by its north-west (`initial`) and
/// south-east (`final`) corners. Boxes never wrap the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    initial: GeoPoint,
    #[serde(rename = "final")]
    final_: GeoPoint,
}

#[derive(Deserialize)]
struct RawRegion {
    initial: GeoPoint,
    #[serde(rename = "final")]
    final_: GeoPoint,
}

impl TryFrom<RawRegion> for Region {
    type Error = ModelError;

    fn try_from(raw: RawRegion) -> Result<Self, Self::Error> {
        Region::new(raw.initial, raw.final_)
    }
}

impl Region {
    pub fn new(initial: GeoPoint, final_: GeoPoint) -> Result<Self, ModelError> {
        if initial.latitude < final_.latitude {
            return Err(ModelError::RegionLatitudeOrder {
                north: initial.latitude,
                south: final_.latitude,
            });
        }
        if initial.longitude > final_.longitude {
            return Err(ModelError::RegionLongitudeOrder {
                west: initial.longitude,
                east: final_.longitude,
            });
        }
        Ok(Region { initial, final_ })
    }

    /// Builds a region from the bounding-box query parameters used by the
    /// preview endpoint.
    pub fn from_bounds(
        min_lon: f64,
        max_lon: f64,
        min_lat: f64,
        max_lat: f64,
    ) -> Result<Self, ModelError> {
        Region::new(
            GeoPoint::new(max_lat, min_lon)?,
            GeoPoint::new(min_lat, max_lon)?,
        )
    }

    /// Europe as used in the qualitative experiment: (-30, 80) to (30, 40).
    pub fn europe() -> Self {
        Region::from_bounds(-30.0, 30.0, 40.0, 80.0).expect("valid constant region")
    }

    /// North America as used in the qualitative experiment: (-170, 70) to (-60, 30).
    pub fn north_america() -> Self {
        Region::from_bounds(-170.0, -60.0, 30.0, 70.0).expect("valid constant region")
    }

    /// The whole globe.
    pub fn world() -> Self {
        Region::from_bounds(-180.0, 180.0, -90.0, 90.0).expect("valid constant region")
    }

    /// Resolves a well-known region name (`europe`, `north-america`, `world`).
    pub fn named(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "europe" | "eu" => Some(Self::europe()),
            "north-america" | "na" => Some(Self::north_america()),
            "world" => Some(Self::world()),
            _ => None,
        }
    }

    pub fn initial(&self) -> GeoPoint {
        self.initial
    }

    pub fn final_point(&self) -> GeoPoint {
        self.final_
    }

    pub fn min_lon(&self) -> f64 {
        self.initial.longitude
    }

    pub fn max_lon(&self) -> f64 {
        self.final_.longitude
    }

    pub fn min_lat(&self) -> f64 {
        self.final_.latitude
    }

    pub fn max_lat(&self) -> f64 {
        self.initial.latitude
    }

    /// Closed-box containment.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        region_contains(self, p)
    }

    /// True when `other` lies entirely inside `self`.
    pub fn encloses(&self, other: &Region) -> bool {
        self.contains(&other.initial) && self.contains(&other.final_)
    }
}

pub fn region_contains(region: &Region, p: &GeoPoint) -> bool {
    region.final_.latitude <= p.latitude
        && p.latitude <= region.initial.latitude
        && region.initial.longitude <= p.longitude
        && p.longitude <= region.final_.longitude
}

/// The six context properties that drive sensor selection.
///
/// Units are conventions: price in currency units, drift as a unit fraction,
/// frequency in hertz, energy consumption in milliwatts and response time in
/// milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextVector {
    pub battery: f64,
    pub price: f64,
    pub drift: f64,
    pub frequency: f64,
    pub energy_consumption: f64,
    pub response_time: f64,
}

impl ContextVector {
    pub const FIELDS: [&'static str; 6] = [
        "battery",
        "price",
        "drift",
        "frequency",
        "energy_consumption",
        "response_time",
    ];

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in Self::FIELDS.iter().zip(self.values()) {
            if !value.is_finite() {
                return Err(ModelError::Context { field: name, value });
            }
        }
        let bad = |field: &'static str, value: f64| Err(ModelError::Context { field, value });
        if !(0.0..=100.0).contains(&self.battery) {
            return bad("battery", self.battery);
        }
        if self.price < 0.0 {
            return bad("price", self.price);
        }
        if self.drift < 0.0 {
            return bad("drift", self.drift);
        }
        if self.frequency <= 0.0 {
            return bad("frequency", self.frequency);
        }
        if self.energy_consumption < 0.0 {
            return bad("energy_consumption", self.energy_consumption);
        }
        if self.response_time < 0.0 {
            return bad("response_time", self.response_time);
        }
        Ok(())
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.battery,
            self.price,
            self.drift,
            self.frequency,
            self.energy_consumption,
            self.response_time,
        ]
    }

    /// Looks up a property by its field name.
    pub fn get(&self, name: &str) -> Option<f64> {
        Self::FIELDS
            .iter()
            .position(|f| *f == name)
            .map(|i| self.values()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub city: String,
    pub country: String,
    pub base: String,
    /// Kelvin.
    pub temperature: f64,
    /// hPa; absent from most repository responses.
    pub sea_level: Option<f64>,
    /// hPa.
    pub pressure: f64,
    /// Percent.
    pub humidity: f64,
}

impl Measurements {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(ModelError::Measurement {
                field: "temperature",
                value: self.temperature,
            });
        }
        if !(self.pressure.is_finite() && self.pressure > 0.0) {
            return Err(ModelError::Measurement {
                field: "pressure",
                value: self.pressure,
            });
        }
        if let Some(sea) = self.sea_level {
            if !(sea.is_finite() && sea > 0.0) {
                return Err(ModelError::Measurement {
                    field: "sea_level",
                    value: sea,
                });
            }
        }
        if !(0.0..=100.0).contains(&self.humidity) {
            return Err(ModelError::Measurement {
                field: "humidity",
                value: self.humidity,
            });
        }
        Ok(())
    }
}

/// A sensor as seen by the rest of the pipeline, independent of which
/// repository it came from.
///
/// On the wire this is a single flat JSON object; see [`SensorRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SensorRecord", into = "SensorRecord")]
pub struct GenericSensor {
    pub id: u64,
    pub name: String,
    pub location: GeoPoint,
    pub measurements: Measurements,
    pub context: ContextVector,
    /// Repository query that refreshes this sensor.
    pub source_url: String,
    /// Unix epoch seconds.
    pub observed_at: i64,
}

impl GenericSensor {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.source_url.trim().is_empty() {
            return Err(ModelError::EmptySourceUrl(self.id));
        }
        self.measurements.validate()?;
        self.context.validate()
    }
}

/// Flat interchange encoding of [`GenericSensor`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    pub id: u64,
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub city: String,
    pub country: String,
    pub base: String,
    pub temperature: f64,
    #[serde(default)]
    pub sea_level: Option<f64>,
    pub pressure: f64,
    pub humidity: f64,
    pub battery: f64,
    pub price: f64,
    pub drift: f64,
    pub frequency: f64,
    pub energy_consumption: f64,
    pub response_time: f64,
    pub source_url: String,
    pub observed_at: i64,
}

impl TryFrom<SensorRecord> for GenericSensor {
    type Error = ModelError;

    fn try_from(r: SensorRecord) -> Result<Self, Self::Error> {
        let sensor = GenericSensor {
            id: r.id,
            name: r.name,
            location: GeoPoint::new(r.latitude, r.longitude)?,
            measurements: Measurements {
                city: r.city,
                country: r.country,
                base: r.base,
                temperature: r.temperature,
                sea_level: r.sea_level,
                pressure: r.pressure,
                humidity: r.humidity,
            },
            context: ContextVector {
                battery: r.battery,
                price: r.price,
                drift: r.drift,
                frequency: r.frequency,
                energy_consumption: r.energy_consumption,
                response_time: r.response_time,
            },
            source_url: r.source_url,
            observed_at: r.observed_at,
        };
        sensor.validate()?;
        Ok(sensor)
    }
}

impl From<GenericSensor> for SensorRecord {
    fn from(s: GenericSensor) -> Self {
        SensorRecord {
            id: s.id,
            name: s.name,
            latitude: s.location.latitude,
            longitude: s.location.longitude,
            city: s.measurements.city,
            country: s.measurements.country,
            base: s.measurements.base,
            temperature: s.measurements.temperature,
            sea_level: s.measurements.sea_level,
            pressure: s.measurements.pressure,
            humidity: s.measurements.humidity,
            battery: s.context.battery,
            price: s.context.price,
            drift: s.context.drift,
            frequency: s.context.frequency,
            energy_consumption: s.context.energy_consumption,
            response_time: s.context.response_time,
            source_url: s.source_url,
            observed_at: s.observed_at,
        }
    }
}
