//! Per-cell means, normal-approximation confidence intervals and the shape
//! checks applied to them.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::BenchError;
use crate::run::TrialRecord;

pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Half-width of the 95% interval.
    pub ci95: f64,
}

impl Estimate {
    /// Mean and `z * s / sqrt(n)` with the sample standard deviation.
    pub fn from_samples(xs: &[f64]) -> Option<Estimate> {
        let n = xs.len();
        if n < 2 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some(Estimate {
            mean,
            ci95: Z95 * var.sqrt() / (n as f64).sqrt(),
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.mean - self.ci95..=self.mean + self.ci95).contains(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub devices: usize,
    pub sensors: usize,
    pub n: usize,
    pub unmarshal_ms: Estimate,
    pub select_ms: Estimate,
    pub marshal_ms: Estimate,
    pub deploy_ms: Estimate,
    pub setup_ms: Estimate,
    pub bytes_per_device: Estimate,
}

pub const PHASES: [&str; 6] = [
    "unmarshal_ms",
    "select_ms",
    "marshal_ms",
    "deploy_ms",
    "setup_ms",
    "bytes_per_device",
];

impl CellSummary {
    pub fn phase(&self, name: &str) -> Option<Estimate> {
        Some(match name {
            "unmarshal_ms" => self.unmarshal_ms,
            "select_ms" => self.select_ms,
            "marshal_ms" => self.marshal_ms,
            "deploy_ms" => self.deploy_ms,
            "setup_ms" => self.setup_ms,
            "bytes_per_device" => self.bytes_per_device,
            _ => return None,
        })
    }
}

/// Groups records by (devices, sensors), sorted by both.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<CellSummary>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::NoRecords);
    }
    let mut cells: BTreeMap<(usize, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.devices, r.sensors)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((devices, sensors), rs)| {
            let est = |f: fn(&TrialRecord) -> f64| {
                let xs: Vec<f64> = rs.iter().map(|r| f(r)).collect();
                Estimate::from_samples(&xs).ok_or(BenchError::InsufficientReplications {
                    devices,
                    sensors,
                    n: rs.len(),
                })
            };
            Ok(CellSummary {
                devices,
                sensors,
                n: rs.len(),
                unmarshal_ms: est(|r| r.unmarshal_ms)?,
                select_ms: est(|r| r.select_ms)?,
                marshal_ms: est(|r| r.marshal_ms)?,
                deploy_ms: est(|r| r.deploy_ms)?,
                setup_ms: est(|r| r.setup_ms)?,
                bytes_per_device: est(|r| r.bytes_per_device)?,
            })
        })
        .collect()
}

/// `devices,sensors,n,` then `<phase>_mean,<phase>_ci95` per phase.
pub fn write_summary<W: Write>(out: W, cells: &[CellSummary]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["devices".to_string(), "sensors".into(), "n".into()];
    for p in PHASES {
        header.push(format!("{p}_mean"));
        header.push(format!("{p}_ci95"));
    }
    w.write_record(&header)?;
    for c in cells {
        let mut row = vec![
            c.devices.to_string(),
            c.sensors.to_string(),
            c.n.to_string(),
        ];
        for p in PHASES {
            let e = c.phase(p).expect("known phase");
            row.push(format!("{:.3}", e.mean));
            row.push(format!("{:.3}", e.ci95));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Device-scaling checks at one sensor level.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceScaling {
    pub sensors: usize,
    /// `(devices, mean bytes per device)` in ascending device order.
    pub bytes: Vec<(usize, f64)>,
    pub bytes_strictly_decreasing: bool,
    /// `(phase, (max - min) / min)` of the means across device levels.
    pub spread: Vec<(&'static str, f64)>,
}

pub const DEVICE_INDEPENDENT: [&str; 3] = ["unmarshal_ms", "select_ms", "marshal_ms"];

/// Relative spread `(max - min) / min` of positive values.
pub fn relative_spread(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min) / min
}

pub fn device_scaling(cells: &[CellSummary], sensors: usize) -> Option<DeviceScaling> {
    let mut at: Vec<&CellSummary> = cells.iter().filter(|c| c.sensors == sensors).collect();
    if at.len() < 2 {
        return None;
    }
    at.sort_by_key(|c| c.devices);
    let bytes: Vec<(usize, f64)> = at
        .iter()
        .map(|c| (c.devices, c.bytes_per_device.mean))
        .collect();
    let spread = DEVICE_INDEPENDENT
        .iter()
        .map(|&p| {
            let means: Vec<f64> = at.iter().map(|c| c.phase(p).unwrap().mean).collect();
            (p, relative_spread(&means))
        })
        .collect();
    Some(DeviceScaling {
        sensors,
        bytes_strictly_decreasing: bytes.windows(2).all(|w| w[1].1 < w[0].1),
        bytes,
        spread,
    })
}

impl DeviceScaling {
    pub fn independent_within(&self, tolerance: f64) -> bool {
        self.spread.iter().all(|&(_, s)| s < tolerance)
    }
}

/// For each device level and phase, the worst ratio of
/// `mean(n) / mean(n0)` to `n / n0` over the sensor ladder, where `n0` is
/// the smallest level. Values at or below 1 mean at most linear growth.
pub fn growth_ratios(cells: &[CellSummary]) -> Vec<(usize, &'static str, f64)> {
    let mut by_devices: BTreeMap<usize, Vec<&CellSummary>> = BTreeMap::new();
    for c in cells {
        by_devices.entry(c.devices).or_default().push(c);
    }
    let mut out = Vec::new();
    for (devices, mut cs) in by_devices {
        cs.sort_by_key(|c| c.sensors);
        let base = cs[0];
        for p in ["unmarshal_ms", "select_ms", "marshal_ms", "deploy_ms"] {
            let m0 = base.phase(p).unwrap().mean;
            let worst = cs[1..]
                .iter()
                .map(|c| (c.phase(p).unwrap().mean / m0) / (c.sensors as f64 / base.sensors as f64))
                .fold(0.0, f64::max);
            out.push((devices, p, worst));
        }
    }
    out
}
