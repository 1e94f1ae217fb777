//! Marshaling generic sensors into GSN virtual-sensor XML descriptors and
//! persisting them in the local artifact store.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MarshalError;
use crate::model::GenericSensor;

/// Structure description all descriptors are validated against.
pub const SKELETON: &str = include_str!("../schema/virtual-sensor.skeleton.xml");

pub const PROCESSING_CLASS: &str = "gsn.vsensor.BridgeVirtualSensor";
pub const WRAPPER: &str = "openweathermap";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementType {
    Temperature,
    Humidity,
    Pressure,
}

impl MeasurementType {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeasurementType::Temperature => "temperature",
            MeasurementType::Humidity => "humidity",
            MeasurementType::Pressure => "pressure",
        }
    }
}

impl FromStr for MeasurementType {
    type Err = MarshalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "temperature" => Ok(MeasurementType::Temperature),
            "humidity" => Ok(MeasurementType::Humidity),
            "pressure" => Ok(MeasurementType::Pressure),
            other => Err(MarshalError::InvalidMeasurementType(other.to_string())),
        }
    }
}

impl fmt::Display for MeasurementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarshalOptions {
    pub measurement_type: MeasurementType,
    pub history_hours: u32,
    #[serde(default = "default_priority")]
    pub priority: u32,
    #[serde(default = "default_sampling_rate")]
    pub sampling_rate: u32,
}

fn default_priority() -> u32 {
    10
}

fn default_sampling_rate() -> u32 {
    1
}

impl MarshalOptions {
    pub fn new(measurement_type: MeasurementType, history_hours: u32) -> Self {
        MarshalOptions {
            measurement_type,
            history_hours,
            priority: default_priority(),
            sampling_rate: default_sampling_rate(),
        }
    }
}

impl Default for MarshalOptions {
    fn default() -> Self {
        MarshalOptions::new(MeasurementType::Temperature, 168)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualSensorDescriptor {
    pub name: String,
    pub file_name: String,
    pub content: Vec<u8>,
}

impl VirtualSensorDescriptor {
    pub fn text(&self) -> &str {
        std::str::from_utf8(&self.content).expect("descriptors are generated as utf-8")
    }
}

/// Sensor name and id concatenated, whitespace removed and path separators
/// replaced so the result is a safe file stem.
pub fn descriptor_name(sensor: &GenericSensor) -> String {
    format!("{}{}", sensor.name, sensor.id)
        .chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '/' | '\\' | ':' | '\0' => '_',
            c if c.is_control() => '_',
            c => c,
        })
        .collect()
}

/// Shortest decimal that round-trips, never in exponent notation.
pub fn format_decimal(v: f64) -> String {
    format!("{v}")
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn render(sensor: &GenericSensor, name: &str, opts: &MarshalOptions) -> String {
    let history = format!("{}h", opts.history_hours);
    format!(
        r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>
<virtual-sensor name="{name}" priority="{priority}">
  <processing-class>
    <class-name>{class}</class-name>
    <init-params/>
    <output-structure>
      <field name="city" type="varchar(255)"/>
      <field name="country" type="varchar(255)"/>
      <field name="base" type="varchar(255)"/>
      <field name="temp" type="double"/>
      <field name="sea_level" type="double"/>
      <field name="pressure" type="double"/>
      <field name="humidity" type="double"/>
    </output-structure>
  </processing-class>
  <description/>
  <addressing>
    <predicate key="geographical">{geo}</predicate>
    <predicate key="LATITUDE">{lat}</predicate>
    <predicate key="LONGITUDE">{lon}</predicate>
  </addressing>
  <storage history-size="{history}"/>
  <streams>
    <stream name="stream1">
      <source alias="source1" sampling-rate="{rate}" storage-size="{history}">
        <address wrapper="{wrapper}">
          <predicate key="url">{url}</predicate>
          <predicate key="type">{kind}</predicate>
        </address>
        <query>Select city, country, base, sea_level, temp, humidity, pressure from wrapper</query>
      </source>
      <query>Select * from source1</query>
    </stream>
  </streams>
</virtual-sensor>
"#,
        name = escape(name),
        priority = opts.priority,
        class = PROCESSING_CLASS,
        geo = escape(&format!("{} {}", sensor.name, sensor.id)),
        lat = format_decimal(sensor.location.latitude()),
        lon = format_decimal(sensor.location.longitude()),
        history = history,
        rate = opts.sampling_rate,
        wrapper = WRAPPER,
        url = escape(&sensor.source_url),
        kind = opts.measurement_type,
    )
}

fn check(sensor: &GenericSensor, opts: &MarshalOptions) -> Result<(), MarshalError> {
    if opts.history_hours == 0 {
        return Err(MarshalError::ZeroHistory);
    }
    sensor
        .validate()
        .map_err(|source| MarshalError::InvalidSensor {
            id: sensor.id,
            source,
        })
}

pub fn marshal(
    sensor: &GenericSensor,
    opts: &MarshalOptions,
) -> Result<VirtualSensorDescriptor, MarshalError> {
    check(sensor, opts)?;
    Ok(build(sensor, descriptor_name(sensor), opts))
}

fn build(sensor: &GenericSensor, name: String, opts: &MarshalOptions) -> VirtualSensorDescriptor {
    let content = render(sensor, &name, opts).into_bytes();
    VirtualSensorDescriptor {
        file_name: format!("{name}.xml"),
        name,
        content,
    }
}

/// Unique names in input order: the second occurrence of `X` becomes `X-1`,
/// the third `X-2`, skipping any suffix already taken.
fn unique_names(sensors: &[GenericSensor]) -> Vec<String> {
    let mut taken: HashSet<String> = HashSet::with_capacity(sensors.len());
    sensors
        .iter()
        .map(|s| {
            let base = descriptor_name(s);
            if taken.insert(base.clone()) {
                return base;
            }
            let mut n = 1usize;
            loop {
                let candidate = format!("{base}-{n}");
                if taken.insert(candidate.clone()) {
                    return candidate;
                }
                n += 1;
            }
        })
        .collect()
}

/// Marshals every sensor, failing the whole batch on the first invalid one.
pub fn marshal_batch(
    sensors: &[GenericSensor],
    opts: &MarshalOptions,
) -> Result<Vec<VirtualSensorDescriptor>, MarshalError> {
    if sensors.is_empty() {
        return Err(MarshalError::EmptyBatch);
    }
    for s in sensors {
        check(s, opts)?;
    }
    let names = unique_names(sensors);
    Ok(sensors
        .par_iter()
        .zip(names.into_par_iter())
        .map(|(s, name)| build(s, name, opts))
        .collect())
}

/// Local artifact store: `<root>/<job-id>/<descriptor-name>.xml`.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ArtifactStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn job_dir(&self, job_id: &str) -> PathBuf {
        self.root.join(job_id)
    }

    pub fn persist(
        &self,
        job_id: &str,
        descriptors: &[VirtualSensorDescriptor],
    ) -> Result<PathBuf, MarshalError> {
        let dir = self.job_dir(job_id);
        fs::create_dir_all(&dir)?;
        descriptors
            .par_iter()
            .try_for_each(|d| fs::write(dir.join(&d.file_name), &d.content))?;
        Ok(dir)
    }

    pub fn remove(&self, job_id: &str) -> std::io::Result<()> {
        match fs::remove_dir_all(self.job_dir(job_id)) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }
}

/// `marshal_batch` followed by persisting into the store.
pub fn marshal_batch_into(
    store: &ArtifactStore,
    job_id: &str,
    sensors: &[GenericSensor],
    opts: &MarshalOptions,
) -> Result<Vec<VirtualSensorDescriptor>, MarshalError> {
    let descriptors = marshal_batch(sensors, opts)?;
    store.persist(job_id, &descriptors)?;
    Ok(descriptors)
}

/// Values recovered from a descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSummary {
    pub name: String,
    pub geographical: String,
    pub latitude: f64,
    pub longitude: f64,
    pub url: String,
    pub measurement_type: String,
    pub history: String,
    pub storage_size: String,
}

fn predicate<'a>(parent: roxmltree::Node<'a, 'a>, key: &str) -> Option<&'a str> {
    parent
        .children()
        .find(|n| n.has_tag_name("predicate") && n.attribute("key") == Some(key))
        .map(|n| n.text().unwrap_or_default())
}

fn child<'a>(
    parent: roxmltree::Node<'a, 'a>,
    tag: &str,
) -> Result<roxmltree::Node<'a, 'a>, MarshalError> {
    parent
        .children()
        .find(|n| n.has_tag_name(tag))
        .ok_or_else(|| MarshalError::Structure(format!("missing <{tag}>")))
}

/// Parses a descriptor and extracts the sensor-specific values.
pub fn parse_descriptor(xml: &str) -> Result<DescriptorSummary, MarshalError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| MarshalError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if !root.has_tag_name("virtual-sensor") {
        return Err(MarshalError::Structure(format!(
            "root is <{}>",
            root.tag_name().name()
        )));
    }
    let missing = |what: &str| MarshalError::Structure(format!("missing {what}"));
    let addressing = child(root, "addressing")?;
    let number = |key: &str| -> Result<f64, MarshalError> {
        predicate(addressing, key)
            .ok_or_else(|| missing(key))?
            .trim()
            .parse()
            .map_err(|_| MarshalError::Structure(format!("{key} is not a number")))
    };
    let source = child(child(child(root, "streams")?, "stream")?, "source")?;
    let address = child(source, "address")?;
    Ok(DescriptorSummary {
        name: root
            .attribute("name")
            .ok_or_else(|| missing("name"))?
            .to_string(),
        geographical: predicate(addressing, "geographical")
            .ok_or_else(|| missing("geographical"))?
            .to_string(),
        latitude: number("LATITUDE")?,
        longitude: number("LONGITUDE")?,
        url: predicate(address, "url")
            .ok_or_else(|| missing("url"))?
            .trim()
            .to_string(),
        measurement_type: predicate(address, "type")
            .ok_or_else(|| missing("type"))?
            .to_string(),
        history: child(root, "storage")?
            .attribute("history-size")
            .ok_or_else(|| missing("history-size"))?
            .to_string(),
        storage_size: source
            .attribute("storage-size")
            .ok_or_else(|| missing("storage-size"))?
            .to_string(),
    })
}

/// Well-formedness check used by device agents: parses and requires the
/// `virtual-sensor` root.
pub fn check_well_formed(xml: &str) -> Result<(), MarshalError> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| MarshalError::Xml(e.to_string()))?;
    if doc.root_element().has_tag_name("virtual-sensor") {
        Ok(())
    } else {
        Err(MarshalError::Structure(
            "root is not <virtual-sensor>".into(),
        ))
    }
}

#[derive(Debug, PartialEq)]
struct Shape {
    tag: String,
    attrs: Vec<(String, Option<String>)>,
    children: Vec<Shape>,
}

fn shape(node: roxmltree::Node, wildcard: bool) -> Shape {
    let mut attrs: Vec<(String, Option<String>)> = node
        .attributes()
        .map(|a| {
            let value = (!(wildcard && a.value() == "*")).then(|| a.value().to_string());
            (a.name().to_string(), value)
        })
        .collect();
    attrs.sort();
    Shape {
        tag: node.tag_name().name().to_string(),
        attrs,
        children: node
            .children()
            .filter(|n| n.is_element())
            .map(|n| shape(n, wildcard))
            .collect(),
    }
}

fn conforms(expected: &Shape, actual: &Shape, path: &str) -> Result<(), String> {
    let here = format!("{path}/{}", expected.tag);
    if expected.tag != actual.tag {
        return Err(format!("{here}: found <{}>", actual.tag));
    }
    let names = |s: &Shape| s.attrs.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    if names(expected) != names(actual) {
        return Err(format!("{here}: attributes {:?}", names(actual)));
    }
    for ((name, want), (_, got)) in expected.attrs.iter().zip(&actual.attrs) {
        if want.is_some() && want != got {
            return Err(format!("{here}@{name}: {got:?}"));
        }
    }
    if expected.children.len() != actual.children.len() {
        return Err(format!(
            "{here}: {} children, expected {}",
            actual.children.len(),
            expected.children.len()
        ));
    }
    for (e, a) in expected.children.iter().zip(&actual.children) {
        conforms(e, a, &here)?;
    }
    Ok(())
}

/// Checks element nesting, attribute names and fixed attribute values
/// against [`SKELETON`].
pub fn validate_structure(xml: &str) -> Result<(), MarshalError> {
    let skeleton = roxmltree::Document::parse(SKELETON).expect("shipped skeleton parses");
    let doc = roxmltree::Document::parse(xml).map_err(|e| MarshalError::Xml(e.to_string()))?;
    conforms(
        &shape(skeleton.root_element(), true),
        &shape(doc.root_element(), false),
        "",
    )
    .map_err(MarshalError::Structure)
}
