use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of H rows (columns of A) one kernel pass can hold along the
/// grid's y axis with `max_v_per_pe = 64`.
pub const MAX_ROWS: usize = 65536;

/// Parameter bundle shared by the format encoders and the kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Matrix dimension N (A is N x N).
    pub n: usize,
    /// Dense feature width.
    pub d: usize,
    pub max_y_chunk: usize,
    pub max_v_per_pe: usize,
    #[serde(default = "one")]
    pub max_col_per_pe: usize,
    #[serde(default = "default_mnz")]
    pub max_nonzeros: usize,
    #[serde(default = "default_tile")]
    pub local_width: usize,
    #[serde(default = "default_tile")]
    pub local_height: usize,
    /// Host channels available for streaming A; `None` means one per worker row.
    #[serde(default)]
    pub io_channels: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_mnz() -> usize {
    512
}

fn default_tile() -> usize {
    64
}

impl KernelConfig {
    pub fn spmm(n: usize, d: usize, max_y_chunk: usize, max_v_per_pe: usize) -> Self {
        Self {
            n,
            d,
            max_y_chunk,
            max_v_per_pe,
            max_col_per_pe: 1,
            max_nonzeros: default_mnz(),
            local_width: default_tile(),
            local_height: default_tile(),
            io_channels: None,
        }
    }

    pub fn sddmm(n: usize, d: usize, tile: usize, max_nonzeros: usize) -> Self {
        Self {
            n,
            d,
            max_y_chunk: 64,
            max_v_per_pe: 64,
            max_col_per_pe: 1,
            max_nonzeros,
            local_width: tile,
            local_height: tile,
            io_channels: None,
        }
    }

    pub fn with_mcpp(mut self, mcpp: usize) -> Self {
        self.max_col_per_pe = mcpp;
        self
    }

    pub fn with_io_channels(mut self, channels: usize) -> Self {
        self.io_channels = Some(channels);
        self
    }

    /// `max_rows = min(n, 65536)`.
    pub fn max_rows(&self) -> usize {
        self.n.min(MAX_ROWS)
    }

    pub fn worker_rows(&self) -> usize {
        self.max_rows().div_ceil(self.max_v_per_pe.max(1))
    }

    pub fn worker_cols(&self) -> usize {
        self.d / self.max_col_per_pe.max(1)
    }

    pub fn chunk_count(&self) -> usize {
        self.n.div_ceil(self.max_y_chunk.max(1))
    }

    /// Rows in chunk `k` (the last chunk may be partial).
    pub fn chunk_rows(&self, k: usize) -> usize {
        let start = k * self.max_y_chunk;
        self.max_y_chunk.min(self.n.saturating_sub(start))
    }

    pub fn io_channels(&self) -> usize {
        self.io_channels.unwrap_or_else(|| self.worker_rows()).max(1)
    }

    /// Checks shared by the SELLPACK encoder and every SpMM variant.
    pub fn validate_chunking(&self) -> Result<()> {
        if !self.max_y_chunk.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(self.max_y_chunk));
        }
        if self.max_v_per_pe == 0 {
            return Err(Error::InvalidConfig("max_v_per_pe must be positive".into()));
        }
        // Local indices travel as u16 and 0xFFFF is the DONE token.
        if self.max_v_per_pe > super::DONE as usize {
            return Err(Error::InvalidConfig(format!(
                "max_v_per_pe = {} does not fit a 16-bit local index",
                self.max_v_per_pe
            )));
        }
        Ok(())
    }

    pub fn validate_spmm(&self) -> Result<()> {
        self.validate_chunking()?;
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        if self.d == 0 || self.max_col_per_pe == 0 {
            return Err(Error::InvalidConfig("d and max_col_per_pe must be positive".into()));
        }
        if !self.d.is_multiple_of(self.max_col_per_pe) {
            return Err(Error::InvalidConfig(format!(
                "d = {} is not divisible by max_col_per_pe = {}",
                self.d, self.max_col_per_pe
            )));
        }
        if self.io_channels == Some(0) {
            return Err(Error::InvalidConfig("io_channels must be positive".into()));
        }
        Ok(())
    }

    pub fn validate_sddmm(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("n and d must be positive".into()));
        }
        if self.local_width == 0 || self.local_height == 0 || self.max_nonzeros == 0 {
            return Err(Error::InvalidConfig(
                "local_width, local_height and max_nonzeros must be positive".into(),
            ));
        }
        if !self.n.is_multiple_of(self.local_width) || !self.n.is_multiple_of(self.local_height) {
            return Err(Error::InvalidConfig(format!(
                "n = {} must be divisible by local_height = {} and local_width = {}",
                self.n, self.local_height, self.local_width
            )));
        }
        if self.io_channels == Some(0) {
            return Err(Error::InvalidConfig("io_channels must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_counts() {
        let c = KernelConfig::spmm(4096, 256, 512, 64).with_mcpp(4);
        assert_eq!(c.worker_rows(), 64);
        assert_eq!(c.worker_cols(), 64);
        assert_eq!(c.chunk_count(), 8);
        assert_eq!(c.io_channels(), 64);

        let big = KernelConfig::spmm(262144, 16, 1024, 64);
        assert_eq!(big.max_rows(), 65536);
        assert_eq!(big.worker_rows(), 1024);

        let ragged = KernelConfig::spmm(100, 4, 64, 64);
        assert_eq!(ragged.chunk_count(), 2);
        assert_eq!(ragged.chunk_rows(0), 64);
        assert_eq!(ragged.chunk_rows(1), 36);
        assert_eq!(ragged.worker_rows(), 2);
    }

    #[test]
    fn rejects_bad_configs() {
        assert_eq!(
            KernelConfig::spmm(1024, 4, 100, 64).validate_spmm(),
            Err(Error::NotPowerOfTwo(100))
        );
        assert!(KernelConfig::spmm(1024, 6, 64, 64)
            .with_mcpp(4)
            .validate_spmm()
            .is_err());
        assert!(KernelConfig::spmm(1024, 4, 64, 70000).validate_spmm().is_err());
        assert!(KernelConfig::sddmm(100, 2, 64, 512).validate_sddmm().is_err());
        assert!(KernelConfig::sddmm(128, 2, 64, 512).validate_sddmm().is_ok());
    }

    #[test]
    fn json_defaults() {
        let c: KernelConfig =
            serde_json::from_str(r#"{"n": 256, "d": 4, "max_y_chunk": 64, "max_v_per_pe": 64}"#)
                .unwrap();
        assert_eq!(c.max_col_per_pe, 1);
        assert_eq!(c.max_nonzeros, 512);
        assert_eq!(c.io_channels, None);
    }
}
