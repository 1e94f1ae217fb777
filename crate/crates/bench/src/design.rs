use serde::{Deserialize, Serialize};

pub const DEFAULT_DEVICE_LEVELS: [usize; 3] = [1, 4, 16];
pub const DEFAULT_SENSOR_LEVELS: [usize; 6] = [1000, 20_000, 40_000, 60_000, 80_000, 100_000];
pub const DEFAULT_REPLICATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub device_levels: Vec<usize>,
    pub sensor_levels: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

impl Default for ExperimentDesign {
    fn default() -> Self {
        ExperimentDesign {
            device_levels: DEFAULT_DEVICE_LEVELS.to_vec(),
            sensor_levels: DEFAULT_SENSOR_LEVELS.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            seed: 42,
        }
    }
}

/// One trial of the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trial {
    pub devices: usize,
    pub sensors: usize,
    pub rep: usize,
    pub seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sensor-generation seed for a trial. Device count is left out so every
/// device level sees the same sensors.
pub fn trial_seed(seed: u64, sensors: usize, rep: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ sensors as u64) ^ rep as u64)
}

impl ExperimentDesign {
    pub fn new(
        device_levels: Vec<usize>,
        sensor_levels: Vec<usize>,
        replications: usize,
        seed: u64,
    ) -> Self {
        ExperimentDesign {
            device_levels,
            sensor_levels,
            replications,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.device_levels.is_empty() || self.device_levels.contains(&0) {
            return Err("device levels must be non-empty and positive".into());
        }
        if self.sensor_levels.is_empty() || self.sensor_levels.contains(&0) {
            return Err("sensor levels must be non-empty and positive".into());
        }
        if self.replications == 0 {
            return Err("replications must be at least 1".into());
        }
        Ok(())
    }

    pub fn trial_count(&self) -> usize {
        self.device_levels.len() * self.sensor_levels.len() * self.replications
    }

    /// Trials in execution order: replication blocks, each sweeping every
    /// sensor and device level, so slow drift in the host spreads over all
    /// cells instead of piling up on the last ones.
    pub fn trials(&self) -> Vec<Trial> {
        let mut out = Vec::with_capacity(self.trial_count());
        for rep in 0..self.replications {
            for &sensors in &self.sensor_levels {
                for &devices in &self.device_levels {
                    out.push(Trial {
                        devices,
                        sensors,
                        rep,
                        seed: trial_seed(self.seed, sensors, rep),
                    });
                }
            }
        }
        out
    }
}
