use crate::error::{Error, Result};
use crate::layers::POOL_WINDOW;

/// Architecture hyperparameters. The stage count is derived: each stage
/// halves the map, and stages stop when the map reaches `target_map`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub input_size: usize,
    pub kernel_size: usize,
    pub base_filters: usize,
    pub filter_growth: usize,
    pub pool: usize,
    pub target_map: usize,
    pub classes: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { input_size: 256, kernel_size: 5, base_filters: 8, filter_growth: 2, pool: 2, target_map: 4, classes: 2 }
    }
}

impl NetworkConfig {
    pub fn with_input_size(input_size: usize) -> Self {
        Self { input_size, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(Error::Config(format!("kernel_size must be odd, got {}", self.kernel_size)));
        }
        if self.base_filters == 0 || self.filter_growth == 0 {
            return Err(Error::Config("base_filters and filter_growth must be positive".into()));
        }
        if self.pool != POOL_WINDOW {
            return Err(Error::Config(format!("pool must be {POOL_WINDOW}, got {}", self.pool)));
        }
        if self.classes != 2 {
            return Err(Error::Config(format!("classes must be 2, got {}", self.classes)));
        }
        self.stages().map(|_| ())
    }

    /// `k >= 1` with `input_size == target_map * 2^k`.
    pub fn stages(&self) -> Result<usize> {
        let err = || {
            Error::Config(format!(
                "input_size {} is not target_map {} times a positive power of two",
                self.input_size, self.target_map
            ))
        };
        if self.target_map == 0 || self.input_size % self.target_map != 0 {
            return Err(err());
        }
        let ratio = self.input_size / self.target_map;
        if ratio < 2 || !ratio.is_power_of_two() {
            return Err(err());
        }
        Ok(ratio.trailing_zeros() as usize)
    }

    pub fn filters_at(&self, stage: usize) -> usize {
        self.base_filters * self.filter_growth.pow(stage as u32)
    }

    pub fn filter_counts(&self) -> Result<Vec<usize>> {
        Ok((0..self.stages()?).map(|i| self.filters_at(i)).collect())
    }

    /// Length of the flattened final feature map fed to the dense head.
    pub fn dense_inputs(&self) -> Result<usize> {
        let k = self.stages()?;
        Ok(self.target_map * self.target_map * self.filters_at(k - 1))
    }

    pub fn parameter_count(&self) -> Result<usize> {
        let mut total = 0;
        let mut in_ch = 1;
        for f in self.filter_counts()? {
            total += f * in_ch * self.kernel_size * self.kernel_size + f;
            in_ch = f;
        }
        Ok(total + self.classes * self.dense_inputs()? + self.classes)
    }
}
