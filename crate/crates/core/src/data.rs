use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};

/// One labeled example with the device it was recorded on. Labels are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub class: usize,
    pub device: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub num_classes: usize,
    pub num_devices: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn devices(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.device).collect()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class).collect()
    }

    /// Checks that every label is in range.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(DdscError::EmptyDataset);
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.device >= self.num_devices {
                return Err(DdscError::DeviceOutOfRange { sample: i, device: s.device, devices: self.num_devices });
            }
            if s.class >= self.num_classes {
                return Err(DdscError::ClassOutOfRange { class: s.class, classes: self.num_classes });
            }
        }
        Ok(())
    }

    /// Samples whose device satisfies `keep`.
    pub fn filter_devices(&self, keep: impl Fn(usize) -> bool) -> Dataset {
        Dataset {
            samples: self.samples.iter().filter(|s| keep(s.device)).cloned().collect(),
            num_classes: self.num_classes,
            num_devices: self.num_devices,
        }
    }
}
