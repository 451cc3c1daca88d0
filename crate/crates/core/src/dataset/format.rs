use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::{split_dataset, Dataset, DatasetError, FeatureSet, Sample, SampleMeta, SplitTag};
use crate::codec::{fnv1a, ByteReader, PutLe, FNV_OFFSET};
use crate::config::SplitConfig;
use crate::dsp::FeatureKind;
use crate::oracle::CommConfig;
use crate::sim::{RadarConfig, RadarFrame, ScenarioConfig, UserTruth};

pub const FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "radarbeam-dataset";
const MANIFEST: &str = "manifest.toml";
const RECORDS: &str = "records.bin";
const RAW: &str = "raw.bin";

const MAGIC_RECORDS: &[u8; 8] = b"RBRECS\0\0";
const MAGIC_RAW: &[u8; 8] = b"RBRAW\0\0\0";
const MAGIC_FEATURES: &[u8; 8] = b"RBFEAT\0\0";
const HEADER_LEN: u64 = 28;
/// `u16 label | u8 split | u8 pad | u32 n_clutter | u32 n_distractors |
/// u32 pad | u64 scene_seed | u64 timestamp | f64 range | f64 velocity |
/// f64 azimuth | u64 raw offset`
const RECORD_LEN: usize = 64;

/// Length and checksum of one binary file. The checksum is 64-bit FNV-1a
/// over everything after the 28-byte header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub file: String,
    pub bytes: u64,
    pub fnv1a: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureEntry {
    pub kind: FeatureKind,
    pub clutter_removal: bool,
    pub shape: [usize; 3],
    pub file: String,
    pub bytes: u64,
    pub fnv1a: String,
}

/// Contents of `manifest.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub samples: usize,
    pub cube_shape: [usize; 3],
    pub n_beams: usize,
    pub clutter_removal: bool,
    pub records: FileEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar: Option<RadarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm: Option<CommConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default)]
    pub features: Vec<FeatureEntry>,
}

/// Dataset-wide settings fixed when writing starts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetHeader {
    pub cube_shape: [usize; 3],
    pub n_beams: usize,
    pub clutter_removal: bool,
    /// Split assigned at finish; `None` keeps each sample's own tag.
    pub split: Option<SplitConfig>,
    pub radar: Option<RadarConfig>,
    pub comm: Option<CommConfig>,
    pub scenario: Option<ScenarioConfig>,
}

fn hex(hash: u64) -> String {
    format!("{hash:016x}")
}

fn features_file(kind: FeatureKind) -> String {
    format!("features-{kind}.bin")
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), DatasetError> {
    let text = toml::to_string(manifest).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    fs::write(&tmp, text).map_err(DatasetError::io(&tmp))?;
    let path = dir.join(MANIFEST);
    fs::rename(&tmp, &path).map_err(DatasetError::io(&path))
}

/// Streams one binary file, hashing its body.
struct BlobWriter {
    path: PathBuf,
    out: BufWriter<File>,
    hash: u64,
    bytes: u64,
}

impl BlobWriter {
    fn create(path: PathBuf, magic: &[u8; 8], shape: [usize; 3]) -> Result<Self, DatasetError> {
        let file = File::create(&path).map_err(DatasetError::io(&path))?;
        let mut w = BlobWriter { out: BufWriter::new(file), path, hash: FNV_OFFSET, bytes: 0 };
        let mut header = Vec::with_capacity(HEADER_LEN as usize);
        header.extend_from_slice(magic);
        header.put_u32(FORMAT_VERSION);
        header.put_u32(0); // sample count, patched in finish()
        shape.iter().for_each(|&d| header.put_u32(d as u32));
        w.out.write_all(&header).map_err(DatasetError::io(&w.path))?;
        w.bytes = HEADER_LEN;
        Ok(w)
    }

    fn write(&mut self, body: &[u8]) -> Result<(), DatasetError> {
        self.hash = fnv1a(body, self.hash);
        self.bytes += body.len() as u64;
        self.out.write_all(body).map_err(DatasetError::io(&self.path))
    }

    fn finish(self, count: usize) -> Result<(String, u64, String), DatasetError> {
        let path = self.path;
        let mut file = self.out.into_inner().map_err(|e| DatasetError::io(&path)(e.into_error()))?;
        file.seek(SeekFrom::Start(12)).map_err(DatasetError::io(&path))?;
        file.write_all(&(count as u32).to_le_bytes()).map_err(DatasetError::io(&path))?;
        file.sync_all().map_err(DatasetError::io(&path))?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        Ok((name, self.bytes, hex(self.hash)))
    }
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    values.iter().for_each(|&v| out.put_f32(v));
    out
}

fn complex_bytes(values: &[Complex32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.put_f32(v.re);
        out.put_f32(v.im);
    }
    out
}

fn encode_record(meta: &SampleMeta, raw_offset: u64) -> [u8; RECORD_LEN] {
    let mut buf = Vec::with_capacity(RECORD_LEN);
    buf.put_u16(meta.label as u16);
    buf.push(meta.split.code());
    buf.push(0);
    buf.put_u32(meta.n_clutter);
    buf.put_u32(meta.n_distractors);
    buf.put_u32(0);
    buf.put_u64(meta.scene_seed);
    buf.put_u64(meta.timestamp_index);
    buf.put_f64(meta.user.range_m);
    buf.put_f64(meta.user.radial_velocity_mps);
    buf.put_f64(meta.user.azimuth_deg);
    buf.put_u64(raw_offset);
    buf.try_into().expect("record layout")
}

fn decode_record(bytes: &[u8]) -> Option<(SampleMeta, u64)> {
    let mut r = ByteReader::new(bytes);
    let label = r.u16()? as usize;
    let split = SplitTag::from_code(r.take(2)?[0])?;
    let n_clutter = r.u32()?;
    let n_distractors = r.u32()?;
    r.u32()?;
    let scene_seed = r.u64()?;
    let timestamp_index = r.u64()?;
    let user = UserTruth { range_m: r.f64()?, radial_velocity_mps: r.f64()?, azimuth_deg: r.f64()? };
    let offset = r.u64()?;
    Some((SampleMeta { label, split, scene_seed, timestamp_index, user, n_clutter, n_distractors }, offset))
}

/// Writes a dataset sample by sample into a temporary directory that is
/// renamed into place by [`DatasetWriter::finish`].
pub struct DatasetWriter {
    final_path: PathBuf,
    tmp_dir: PathBuf,
    header: DatasetHeader,
    records: Vec<(SampleMeta, u64)>,
    raw: Option<BlobWriter>,
    features: Vec<(FeatureKind, [usize; 3], BlobWriter)>,
}

impl DatasetWriter {
    pub fn create(
        path: &Path,
        header: DatasetHeader,
        kinds: &[FeatureKind],
        keep_raw: bool,
    ) -> Result<Self, DatasetError> {
        if path.exists() {
            return Err(DatasetError::AlreadyExists(path.display().to_string()));
        }
        if header.n_beams == 0 || header.n_beams > u16::MAX as usize {
            return Err(DatasetError::Manifest(format!("n_beams = {}", header.n_beams)));
        }
        let name = path.file_name().ok_or_else(|| DatasetError::Manifest(format!("bad path {}", path.display())))?;
        let tmp_dir = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
        if tmp_dir.exists() {
            fs::remove_dir_all(&tmp_dir).map_err(DatasetError::io(&tmp_dir))?;
        }
        fs::create_dir_all(&tmp_dir).map_err(DatasetError::io(&tmp_dir))?;
        let raw = keep_raw.then(|| BlobWriter::create(tmp_dir.join(RAW), MAGIC_RAW, header.cube_shape)).transpose()?;
        let mut features = Vec::new();
        for &kind in kinds {
            if features.iter().any(|(k, _, _)| *k == kind) {
                continue;
            }
            let shape = kind.shape(header.cube_shape);
            features.push((kind, shape, BlobWriter::create(tmp_dir.join(features_file(kind)), MAGIC_FEATURES, shape)?));
        }
        Ok(DatasetWriter { final_path: path.to_path_buf(), tmp_dir, header, records: Vec::new(), raw, features })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, sample: &Sample) -> Result<(), DatasetError> {
        let index = self.records.len();
        let n_beams = self.header.n_beams;
        if sample.meta.label >= n_beams {
            return Err(DatasetError::LabelOutOfRange { sample: index, label: sample.meta.label, n_beams });
        }
        let mut offset = 0;
        match (&mut self.raw, &sample.raw) {
            (Some(w), Some(raw)) => {
                let expected = self.header.cube_shape.iter().product::<usize>();
                if raw.len() != expected {
                    return Err(DatasetError::Schema(format!(
                        "sample {index}: raw cube of {} values, expected {expected}",
                        raw.len()
                    )));
                }
                offset = w.bytes;
                w.write(&complex_bytes(raw))?;
            }
            (Some(_), None) => return Err(DatasetError::Schema(format!("sample {index}: missing raw cube"))),
            (None, _) => {}
        }
        for (kind, shape, w) in &mut self.features {
            let map = sample
                .features
                .get(kind)
                .ok_or_else(|| DatasetError::Schema(format!("sample {index}: missing {kind} features")))?;
            if map.len() != shape.iter().product::<usize>() {
                return Err(DatasetError::Schema(format!("sample {index}: {kind} map has {} values", map.len())));
            }
            w.write(&f32_bytes(map))?;
        }
        self.records.push((sample.meta, offset));
        Ok(())
    }

    pub fn finish(mut self) -> Result<Manifest, DatasetError> {
        let n = self.records.len();
        if let Some(cfg) = &self.header.split {
            let split = split_dataset(n, cfg)?;
            for (tag, idx) in
                [(SplitTag::Train, &split.train), (SplitTag::Val, &split.val), (SplitTag::Test, &split.test)]
            {
                for &i in idx {
                    self.records[i].0.split = tag;
                }
            }
        }
        let mut rec = BlobWriter::create(self.tmp_dir.join(RECORDS), MAGIC_RECORDS, [RECORD_LEN, 1, 1])?;
        for (meta, offset) in &self.records {
            rec.write(&encode_record(meta, *offset))?;
        }
        let (file, bytes, fnv1a) = rec.finish(n)?;
        let records = FileEntry { file, bytes, fnv1a };
        let raw = match self.raw.take() {
            Some(w) => {
                let (file, bytes, fnv1a) = w.finish(n)?;
                Some(FileEntry { file, bytes, fnv1a })
            }
            None => None,
        };
        let mut features = Vec::new();
        for (kind, shape, w) in std::mem::take(&mut self.features) {
            let (file, bytes, fnv1a) = w.finish(n)?;
            features.push(FeatureEntry {
                kind,
                clutter_removal: self.header.clutter_removal,
                shape,
                file,
                bytes,
                fnv1a,
            });
        }
        let h = &self.header;
        let manifest = Manifest {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            samples: n,
            cube_shape: h.cube_shape,
            n_beams: h.n_beams,
            clutter_removal: h.clutter_removal,
            records,
            raw,
            split: h.split.clone(),
            radar: h.radar.clone(),
            comm: h.comm.clone(),
            scenario: h.scenario.clone(),
            features,
        };
        write_manifest(&self.tmp_dir, &manifest)?;
        if self.final_path.exists() {
            return Err(DatasetError::AlreadyExists(self.final_path.display().to_string()));
        }
        fs::rename(&self.tmp_dir, &self.final_path).map_err(DatasetError::io(&self.final_path))?;
        Ok(manifest)
    }
}

impl Drop for DatasetWriter {
    fn drop(&mut self) {
        // Leftovers of an unfinished write; after finish() the directory
        // has been renamed away and this is a no-op.
        let _ = fs::remove_dir_all(&self.tmp_dir);
    }
}

/// Writes in-memory samples. Feature kinds and raw storage follow the
/// first sample.
pub fn write_dataset(path: &Path, header: DatasetHeader, samples: &[Sample]) -> Result<Manifest, DatasetError> {
    let kinds: Vec<FeatureKind> = samples.first().map(|s| s.features.keys().copied().collect()).unwrap_or_default();
    let keep_raw = samples.first().is_some_and(|s| s.raw.is_some());
    let mut writer = DatasetWriter::create(path, header, &kinds, keep_raw)?;
    for s in samples {
        writer.push(s)?;
    }
    writer.finish()
}

/// Reads a whole binary file and validates it against its manifest entry,
/// returning the body.
#[allow(clippy::too_many_arguments)]
fn read_blob(
    dir: &Path,
    file: &str,
    bytes: u64,
    fnv: &str,
    magic: &[u8; 8],
    n: usize,
    shape: [usize; 3],
    elem_bytes: usize,
) -> Result<Vec<u8>, DatasetError> {
    let path = dir.join(file);
    let mut data = Vec::new();
    File::open(&path).and_then(|mut f| f.read_to_end(&mut data)).map_err(DatasetError::io(&path))?;
    check_header(file, &data, magic, n, shape)?;
    let found = data.len() as u64;
    if found < bytes {
        return Err(DatasetError::Truncated { file: file.into(), expected: bytes, found });
    }
    if found > bytes {
        return Err(DatasetError::Integrity(format!("{file}: {found} bytes, manifest says {bytes}")));
    }
    let expected_body = (n * shape.iter().product::<usize>() * elem_bytes) as u64;
    if found - HEADER_LEN != expected_body {
        return Err(DatasetError::Integrity(format!(
            "{file}: body of {} bytes, {n} samples need {expected_body}",
            found - HEADER_LEN
        )));
    }
    let body = data.split_off(HEADER_LEN as usize);
    if hex(fnv1a(&body, FNV_OFFSET)) != fnv {
        return Err(DatasetError::Integrity(format!("{file}: checksum mismatch")));
    }
    Ok(body)
}

fn check_header(file: &str, data: &[u8], magic: &[u8; 8], n: usize, shape: [usize; 3]) -> Result<(), DatasetError> {
    let mut r = ByteReader::new(data);
    let truncated = || DatasetError::Truncated { file: file.into(), expected: HEADER_LEN, found: data.len() as u64 };
    if r.take(8).ok_or_else(truncated)? != magic {
        return Err(DatasetError::BadMagic { file: file.into() });
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch { file: file.into(), found: version, expected: FORMAT_VERSION });
    }
    let count = r.u32().ok_or_else(truncated)? as usize;
    let mut found = [0usize; 3];
    for d in &mut found {
        *d = r.u32().ok_or_else(truncated)? as usize;
    }
    if found != shape {
        return Err(DatasetError::ShapeMismatch { file: file.into(), expected: shape, found });
    }
    if count != n {
        return Err(DatasetError::Integrity(format!("{file} holds {count} samples, manifest says {n}")));
    }
    Ok(())
}

pub(crate) fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(DatasetError::io(&path))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if manifest.format != FORMAT_NAME {
        return Err(DatasetError::Manifest(format!("format `{}`, expected `{FORMAT_NAME}`", manifest.format)));
    }
    if manifest.version != FORMAT_VERSION {
        return Err(DatasetError::VersionMismatch {
            file: MANIFEST.into(),
            found: manifest.version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(manifest)
}

fn decode_f32(body: &[u8]) -> Vec<f32> {
    body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()
}

/// Loads the manifest, records and all feature sets, verifying sizes,
/// shapes and checksums. Raw cubes are only size-checked.
pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let manifest = read_manifest(path)?;
    let n = manifest.samples;
    let r = &manifest.records;
    let body = read_blob(path, &r.file, r.bytes, &r.fnv1a, MAGIC_RECORDS, n, [RECORD_LEN, 1, 1], 1)?;
    let mut samples = Vec::with_capacity(n);
    let mut raw_offsets = Vec::with_capacity(n);
    for (i, chunk) in body.chunks_exact(RECORD_LEN).enumerate() {
        let (meta, offset) =
            decode_record(chunk).ok_or_else(|| DatasetError::Integrity(format!("record {i} is malformed")))?;
        if meta.label >= manifest.n_beams {
            return Err(DatasetError::LabelOutOfRange { sample: i, label: meta.label, n_beams: manifest.n_beams });
        }
        samples.push(meta);
        raw_offsets.push(offset);
    }
    if let Some(raw) = &manifest.raw {
        let p = path.join(&raw.file);
        let mut head = Vec::new();
        let found = File::open(&p)
            .and_then(|f| {
                let len = f.metadata()?.len();
                f.take(HEADER_LEN).read_to_end(&mut head)?;
                Ok(len)
            })
            .map_err(DatasetError::io(&p))?;
        check_header(&raw.file, &head, MAGIC_RAW, n, manifest.cube_shape)?;
        let cube_bytes = manifest.cube_shape.iter().product::<usize>() as u64 * 8;
        if found < raw.bytes {
            return Err(DatasetError::Truncated { file: raw.file.clone(), expected: raw.bytes, found });
        }
        if found != raw.bytes || raw_offsets.iter().any(|&o| o < HEADER_LEN || o + cube_bytes > found) {
            return Err(DatasetError::Integrity(format!("{}: size or offsets inconsistent", raw.file)));
        }
    }
    let mut features = BTreeMap::new();
    for entry in &manifest.features {
        let expected_shape = entry.kind.shape(manifest.cube_shape);
        if entry.shape != expected_shape {
            return Err(DatasetError::ShapeMismatch {
                file: entry.file.clone(),
                expected: expected_shape,
                found: entry.shape,
            });
        }
        let body = read_blob(path, &entry.file, entry.bytes, &entry.fnv1a, MAGIC_FEATURES, n, entry.shape, 4)?;
        features.insert(
            entry.kind,
            FeatureSet {
                kind: entry.kind,
                shape: entry.shape,
                clutter_removal: entry.clutter_removal,
                data: decode_f32(&body),
            },
        );
    }
    Ok(Dataset { root: Some(path.to_path_buf()), manifest, samples, features, raw_offsets })
}

impl Dataset {
    /// Reads sample `i`'s raw cube from disk.
    pub fn raw_cube_f32(&self, i: usize) -> Result<Vec<Complex32>, DatasetError> {
        let raw = self.manifest.raw.as_ref().ok_or_else(|| DatasetError::Schema("dataset has no raw cubes".into()))?;
        let root = self.root.as_ref().ok_or_else(|| DatasetError::Schema("dataset has no directory".into()))?;
        let offset = *self.raw_offsets.get(i).ok_or_else(|| DatasetError::Schema(format!("no sample {i}")))?;
        let path = root.join(&raw.file);
        let len = self.manifest.cube_shape.iter().product::<usize>();
        let mut bytes = vec![0u8; len * 8];
        File::open(&path)
            .and_then(|mut f| {
                f.seek(SeekFrom::Start(offset))?;
                f.read_exact(&mut bytes)
            })
            .map_err(DatasetError::io(&path))?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| {
                Complex32::new(
                    f32::from_le_bytes(c[..4].try_into().unwrap()),
                    f32::from_le_bytes(c[4..].try_into().unwrap()),
                )
            })
            .collect())
    }

    pub fn raw_cube(&self, i: usize) -> Result<RadarFrame, DatasetError> {
        Ok(RadarFrame::from_f32(self.manifest.cube_shape, &self.raw_cube_f32(i)?))
    }
}

/// Adds one feature set to an existing dataset: the new blob is written
/// under a temporary name and renamed, then the manifest is replaced
/// atomically. Existing files are never modified. Re-adding identical data
/// is a no-op; returns whether anything was written.
pub fn add_features(path: &Path, set: &FeatureSet) -> Result<bool, DatasetError> {
    let mut manifest = read_manifest(path)?;
    let expected = set.kind.shape(manifest.cube_shape);
    if set.shape != expected {
        return Err(DatasetError::ShapeMismatch { file: features_file(set.kind), expected, found: set.shape });
    }
    if set.len() != manifest.samples || set.data.len() != manifest.samples * set.sample_len() {
        return Err(DatasetError::Integrity(format!("{} maps for {} samples", set.len(), manifest.samples)));
    }
    let body = f32_bytes(&set.data);
    let hash = hex(fnv1a(&body, FNV_OFFSET));
    if let Some(existing) = manifest.features.iter().find(|e| e.kind == set.kind) {
        if existing.fnv1a == hash && existing.clutter_removal == set.clutter_removal {
            return Ok(false);
        }
    }
    // A replaced kind gets a fresh file name so the old blob stays intact.
    let name = if manifest.features.iter().any(|e| e.kind == set.kind) {
        format!("features-{}-{}.bin", set.kind, &hash[..8])
    } else {
        features_file(set.kind)
    };
    let tmp = path.join(format!("{name}.tmp"));
    let mut w = BlobWriter::create(tmp.clone(), MAGIC_FEATURES, set.shape)?;
    w.write(&body)?;
    let (_, bytes, fnv1a) = w.finish(manifest.samples)?;
    let final_path = path.join(&name);
    if final_path.exists() {
        return Err(DatasetError::AlreadyExists(final_path.display().to_string()));
    }
    fs::rename(&tmp, &final_path).map_err(DatasetError::io(&final_path))?;
    manifest.features.retain(|e| e.kind != set.kind);
    manifest.features.push(FeatureEntry {
        kind: set.kind,
        clutter_removal: set.clutter_removal,
        shape: set.shape,
        file: name,
        bytes,
        fnv1a,
    });
    write_manifest(path, &manifest)?;
    Ok(true)
}

impl Dataset {
    /// Assembles an in-memory dataset (no directory, no raw cubes) from
    /// pipeline samples, applying the header's split. Feature kinds follow
    /// the first sample.
    pub fn from_samples(header: DatasetHeader, samples: Vec<Sample>) -> Result<Dataset, DatasetError> {
        let n = samples.len();
        let mut metas: Vec<SampleMeta> = samples.iter().map(|s| s.meta).collect();
        for (i, m) in metas.iter().enumerate() {
            if m.label >= header.n_beams {
                return Err(DatasetError::LabelOutOfRange { sample: i, label: m.label, n_beams: header.n_beams });
            }
        }
        if let Some(cfg) = &header.split {
            let split = split_dataset(n, cfg)?;
            for (tag, idx) in
                [(SplitTag::Train, &split.train), (SplitTag::Val, &split.val), (SplitTag::Test, &split.test)]
            {
                for &i in idx {
                    metas[i].split = tag;
                }
            }
        }
        let kinds: Vec<FeatureKind> = samples.first().map(|s| s.features.keys().copied().collect()).unwrap_or_default();
        let mut features = BTreeMap::new();
        let mut entries = Vec::new();
        for kind in kinds {
            let shape = kind.shape(header.cube_shape);
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n * len);
            for (i, s) in samples.iter().enumerate() {
                let map =
                    s.features.get(&kind).filter(|m| m.len() == len).ok_or_else(|| {
                        DatasetError::Schema(format!("sample {i}: missing or misshaped {kind} features"))
                    })?;
                data.extend_from_slice(map);
            }
            entries.push(FeatureEntry {
                kind,
                clutter_removal: header.clutter_removal,
                shape,
                file: String::new(),
                bytes: 0,
                fnv1a: String::new(),
            });
            features.insert(kind, FeatureSet { kind, shape, clutter_removal: header.clutter_removal, data });
        }
        let manifest = Manifest {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            samples: n,
            cube_shape: header.cube_shape,
            n_beams: header.n_beams,
            clutter_removal: header.clutter_removal,
            records: FileEntry { file: String::new(), bytes: 0, fnv1a: String::new() },
            raw: None,
            split: header.split,
            radar: header.radar,
            comm: header.comm,
            scenario: header.scenario,
            features: entries,
        };
        Ok(Dataset { root: None, manifest, samples: metas, features, raw_offsets: vec![0; n] })
    }

    /// The stored split as index lists.
    pub fn split(&self) -> super::Split {
        super::Split {
            train: self.indices(SplitTag::Train),
            val: self.indices(SplitTag::Val),
            test: self.indices(SplitTag::Test),
        }
    }
}
