//! Persisted collections of channel realizations.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! b"FLEXDUP1"                      8-byte magic
//! u32 header_len                   length of the JSON header in bytes
//! header_len bytes                 UTF-8 JSON `DatasetHeader`
//! sample_count × (n_nodes)² × f64  row-major gain blocks, IEEE-754 LE
//! ```
//!
//! Noise power and power budget are uniform across samples and live in
//! the header.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelConfig, ChannelError, GainMatrix};
use crate::rng::derive_seed;

pub const MAGIC: &[u8; 8] = b"FLEXDUP1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("corrupt dataset header: {0}")]
    CorruptHeader(String),
    #[error("dataset payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("unsupported dataset version {0}")]
    UnsupportedVersion(u32),
    #[error("sample count must be at least 1")]
    EmptyDataset,
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Generation metadata stored ahead of the sample blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub version: u32,
    pub n_nodes: usize,
    pub sample_count: usize,
    pub p_max: f64,
    pub noise_power: f64,
    pub seed: u64,
    pub area_side_m: f64,
    pub min_distance_m: f64,
    pub frequency_hz: f64,
    pub shadow_sigma_db: f64,
}

impl DatasetHeader {
    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            area_side_m: self.area_side_m,
            min_distance_m: self.min_distance_m,
            frequency_hz: self.frequency_hz,
            shadow_sigma_db: self.shadow_sigma_db,
            n_pairs: self.n_nodes / 2,
            p_max_w: self.p_max,
            noise_w: self.noise_power,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    header: DatasetHeader,
    samples: Vec<GainMatrix<f64>>,
}

impl Dataset {
    /// Wraps existing samples; all must share the header's size, budget and
    /// noise.
    pub fn new(header: DatasetHeader, samples: Vec<GainMatrix<f64>>) -> Result<Self, DatasetError> {
        if header.sample_count != samples.len() {
            return Err(DatasetError::Inconsistent(format!(
                "header declares {} samples, got {}",
                header.sample_count,
                samples.len()
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.n_nodes() != header.n_nodes
                || s.p_max() != header.p_max
                || s.noise_powers().iter().any(|&x| x != header.noise_power)
            {
                return Err(DatasetError::Inconsistent(format!(
                    "sample {i} does not match the header"
                )));
            }
        }
        Ok(Self { header, samples })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn samples(&self) -> &[GainMatrix<f64>] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<GainMatrix<f64>> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `sample_count` independent networks. Sample `i` uses its own seed
/// derived from `(seed, i)`, so any subset can be regenerated alone.
pub fn generate_dataset(config: &ChannelConfig, sample_count: usize, seed: u64) -> Result<Dataset, DatasetError> {
    config.validate()?;
    if sample_count == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    let samples = (0..sample_count)
        .map(|i| config.sample(derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let header = DatasetHeader {
        version: FORMAT_VERSION,
        n_nodes: 2 * config.n_pairs,
        sample_count,
        p_max: config.p_max_w,
        noise_power: config.noise_w,
        seed,
        area_side_m: config.area_side_m,
        min_distance_m: config.min_distance_m,
        frequency_hz: config.frequency_hz,
        shadow_sigma_db: config.shadow_sigma_db,
    };
    Dataset::new(header, samples)
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<(), DatasetError> {
    let header = serde_json::to_vec(&dataset.header).map_err(|e| DatasetError::CorruptHeader(e.to_string()))?;
    let header_len = u32::try_from(header.len()).map_err(|_| DatasetError::CorruptHeader("header too large".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&header_len.to_le_bytes())?;
    out.write_all(&header)?;
    for sample in &dataset.samples {
        for g in sample.gains() {
            out.write_all(&g.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<Dataset, DatasetError> {
    let mut magic = [0u8; 8];
    read_exact_or(&mut input, &mut magic, || {
        DatasetError::CorruptHeader("file shorter than the magic bytes".into())
    })?;
    if &magic != MAGIC {
        return Err(DatasetError::CorruptHeader("bad magic bytes".into()));
    }
    let mut len = [0u8; 4];
    read_exact_or(&mut input, &mut len, || {
        DatasetError::CorruptHeader("missing header length".into())
    })?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    read_exact_or(&mut input, &mut header, || {
        DatasetError::CorruptHeader("header shorter than declared".into())
    })?;

    // Check the version before the full schema so newer files report it.
    let raw: serde_json::Value =
        serde_json::from_slice(&header).map_err(|e| DatasetError::CorruptHeader(e.to_string()))?;
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(DatasetError::UnsupportedVersion(v as u32)),
        None => return Err(DatasetError::CorruptHeader("missing version".into())),
    }
    let header: DatasetHeader = serde_json::from_value(raw).map_err(|e| DatasetError::CorruptHeader(e.to_string()))?;
    if header.n_nodes < 2 || !header.n_nodes.is_multiple_of(2) {
        return Err(DatasetError::CorruptHeader(format!(
            "invalid node count {}",
            header.n_nodes
        )));
    }

    let block = header.n_nodes * header.n_nodes;
    let expected = header
        .sample_count
        .checked_mul(block * 8)
        .ok_or_else(|| DatasetError::CorruptHeader("sample count overflows".into()))?;
    let mut payload = Vec::with_capacity(expected.min(1 << 30));
    input.take(expected as u64 + 1).read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(DatasetError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(DatasetError::Inconsistent("trailing bytes after payload".into()));
    }

    let mut samples = Vec::with_capacity(header.sample_count);
    for chunk in payload.chunks_exact(block * 8) {
        let gains = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        samples.push(GainMatrix::with_uniform_noise(
            header.n_nodes,
            gains,
            header.noise_power,
            header.p_max,
        )?);
    }
    Dataset::new(header, samples)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    write_dataset(dataset, BufWriter::new(File::create(path)?))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    read_dataset(BufReader::new(File::open(path)?))
}

fn read_exact_or<R: Read>(
    input: &mut R,
    buf: &mut [u8],
    err: impl FnOnce() -> DatasetError,
) -> Result<(), DatasetError> {
    match input.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(err()),
        Err(e) => Err(e.into()),
    }
}
