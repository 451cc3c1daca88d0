//! Exchange format for externally captured data: a directory of raw cube
//! files (`M_r x S x A` complex f32, interleaved `(re, im)`, little endian,
//! row-major) plus a CSV label index with a `file,label` header.

use std::fs;
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Sample, SampleMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSchema {
    pub cube_shape: [usize; 3],
    pub n_beams: usize,
    pub label_file: String,
}

impl Default for ExternalSchema {
    fn default() -> Self {
        Self { cube_shape: [4, 256, 128], n_beams: 64, label_file: "labels.csv".into() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    file: String,
    label: i64,
}

/// Reads and validates an external export. Samples keep the index order;
/// only labels and raw cubes are available, other metadata is zero.
pub fn ingest_external(dir: &Path, schema: &ExternalSchema) -> Result<Vec<Sample>, DatasetError> {
    let index = dir.join(&schema.label_file);
    if !index.is_file() {
        return Err(DatasetError::Schema(format!("label file {} not found", index.display())));
    }
    let mut reader =
        csv::Reader::from_path(&index).map_err(|e| DatasetError::Schema(format!("{}: {e}", index.display())))?;
    let cube_len: usize = schema.cube_shape.iter().product();
    let mut samples = Vec::new();
    for (i, row) in reader.deserialize::<LabelRow>().enumerate() {
        let row = row.map_err(|e| DatasetError::Schema(format!("{} row {}: {e}", schema.label_file, i + 1)))?;
        if row.label < 0 || row.label as usize >= schema.n_beams {
            return Err(DatasetError::LabelOutOfRange {
                sample: i,
                label: row.label.max(0) as usize,
                n_beams: schema.n_beams,
            });
        }
        let path = dir.join(&row.file);
        let bytes = fs::read(&path).map_err(DatasetError::io(&path))?;
        if bytes.len() != cube_len * 8 {
            return Err(DatasetError::Schema(format!(
                "sample {i} ({}): {} bytes, shape {:?} needs {}",
                row.file,
                bytes.len(),
                schema.cube_shape,
                cube_len * 8
            )));
        }
        let raw: Vec<Complex32> = bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..].try_into().unwrap()),
                )
            })
            .collect();
        if raw.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(DatasetError::Schema(format!("sample {i} ({}): non-finite values", row.file)));
        }
        let meta = SampleMeta { label: row.label as usize, timestamp_index: i as u64, ..Default::default() };
        samples.push(Sample { meta, raw: Some(raw), features: Default::default() });
    }
    if samples.is_empty() {
        return Err(DatasetError::Schema(format!("{} lists no samples", schema.label_file)));
    }
    Ok(samples)
}

/// Writes a stored dataset's raw cubes and labels in the external format.
pub fn export_external(dataset: &Dataset, dir: &Path, schema: &ExternalSchema) -> Result<(), DatasetError> {
    if schema.cube_shape != dataset.manifest.cube_shape {
        return Err(DatasetError::Schema(format!(
            "schema shape {:?} differs from dataset shape {:?}",
            schema.cube_shape, dataset.manifest.cube_shape
        )));
    }
    fs::create_dir_all(dir).map_err(DatasetError::io(dir))?;
    let index = dir.join(&schema.label_file);
    let mut writer =
        csv::Writer::from_path(&index).map_err(|e| DatasetError::Schema(format!("{}: {e}", index.display())))?;
    for (i, meta) in dataset.samples.iter().enumerate() {
        let file = format!("cube_{i:06}.bin");
        let mut bytes = Vec::with_capacity(schema.cube_shape.iter().product::<usize>() * 8);
        for v in dataset.raw_cube_f32(i)? {
            bytes.extend_from_slice(&v.re.to_le_bytes());
            bytes.extend_from_slice(&v.im.to_le_bytes());
        }
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(DatasetError::io(&path))?;
        writer
            .serialize(LabelRow { file, label: meta.label as i64 })
            .map_err(|e| DatasetError::Schema(format!("{}: {e}", index.display())))?;
    }
    writer.flush().map_err(DatasetError::io(&index))?;
    Ok(())
}
