//! Lookup-table baseline: the argmax pixel of a range-angle map indexes a
//! per-pixel beam histogram learned from the training set.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::codec::{ByteReader, PutLe};
use crate::dsp::{FeatureKind, FeatureMap};

#[derive(Debug, Error)]
pub enum LutError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("expected a range-angle map, got {0}")]
    NotRangeAngle(FeatureKind),
    #[error("map shape {found:?} differs from table shape {expected:?}")]
    ShapeMismatch { found: [usize; 2], expected: [usize; 2] },
    #[error("label {label} out of range for {n_beams} beams")]
    LabelOutOfRange { label: usize, n_beams: usize },
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("bad lookup-table file: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const MAGIC: &[u8; 8] = b"RBLUT\0\0\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    /// `[S, M_F]`: range bins by angle bins.
    pub shape: [usize; 2],
    pub n_beams: usize,
    /// Per pixel, beams seen there ordered by count (descending, ties to
    /// the lower index). Empty for pixels never seen in training.
    pub ranked: Vec<Vec<u16>>,
    /// All beams ordered by overall training frequency.
    pub fallback_rank: Vec<u16>,
}

fn rank_counts(counts: &[u32], keep_zero: bool) -> Vec<u16> {
    let mut idx: Vec<u16> = (0..counts.len() as u16).filter(|&b| keep_zero || counts[b as usize] > 0).collect();
    idx.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    idx
}

fn ra_shape(map: &FeatureMap) -> Result<[usize; 2], LutError> {
    match map.kind {
        FeatureKind::RangeAngle { .. } => Ok([map.shape[1], map.shape[2]]),
        other => Err(LutError::NotRangeAngle(other)),
    }
}

/// Builds a table from `(argmax pixel, label)` pairs over an `[S, M_F]` grid.
pub fn fit_lut_pixels(shape: [usize; 2], n_beams: usize, samples: &[(usize, usize)]) -> Result<LookupTable, LutError> {
    if samples.is_empty() {
        return Err(LutError::EmptyTrainingSet);
    }
    if n_beams == 0 || n_beams > u16::MAX as usize {
        return Err(LutError::BadFormat(format!("{n_beams} beams")));
    }
    let n_pixels = shape[0] * shape[1];
    let mut counts = vec![0u32; n_pixels * n_beams];
    let mut global = vec![0u32; n_beams];
    for &(pixel, label) in samples {
        if label >= n_beams {
            return Err(LutError::LabelOutOfRange { label, n_beams });
        }
        if pixel >= n_pixels {
            return Err(LutError::BadFormat(format!("pixel {pixel} outside {shape:?}")));
        }
        counts[pixel * n_beams + label] += 1;
        global[label] += 1;
    }
    let ranked = counts.chunks(n_beams).map(|c| rank_counts(c, false)).collect();
    Ok(LookupTable { shape, n_beams, ranked, fallback_rank: rank_counts(&global, true) })
}

/// Fits a table on labeled range-angle maps (standardized or not; only the
/// argmax is used).
pub fn fit_lut(samples: &[(&FeatureMap, usize)], n_beams: usize) -> Result<LookupTable, LutError> {
    let first = samples.first().ok_or(LutError::EmptyTrainingSet)?;
    let shape = ra_shape(first.0)?;
    let mut pixels = Vec::with_capacity(samples.len());
    for (map, label) in samples {
        let found = ra_shape(map)?;
        if found != shape {
            return Err(LutError::ShapeMismatch { found, expected: shape });
        }
        pixels.push((map.argmax(), *label));
    }
    fit_lut_pixels(shape, n_beams, &pixels)
}

/// Flat indices of the `k` largest values, descending, ties to the lower
/// index.
fn top_pixels<T: PartialOrd + Copy>(values: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp =
        |&a: &usize, &b: &usize| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx
}

impl LookupTable {
    /// Stored parameters when each pixel is collapsed to its top beam.
    pub fn param_count(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    /// Top-k beams for a flattened `[S, M_F]` map. Each of the k strongest
    /// pixels, in descending order, contributes one slot: its top beam, or
    /// the best unchosen fallback beam when the pixel is unseen or its beam
    /// is already taken. Slots beyond the pixel count also come from the
    /// fallback. The list for k+1 therefore extends the list for k.
    pub fn predict_values<T: PartialOrd + Copy>(&self, values: &[T], k: usize) -> Result<Vec<usize>, LutError> {
        if k < 1 || k > self.n_beams {
            return Err(LutError::KOutOfRange { k, n: self.n_beams });
        }
        if values.len() != self.ranked.len() {
            return Err(LutError::ShapeMismatch { found: [values.len(), 1], expected: self.shape });
        }
        let mut chosen = vec![false; self.n_beams];
        let mut fallback = self.fallback_rank.iter().map(|&b| b as usize);
        let mut out = Vec::with_capacity(k);
        for pixel in top_pixels(values, k) {
            let beam = match self.ranked[pixel].first() {
                Some(&b) if !chosen[b as usize] => b as usize,
                _ => fallback.by_ref().find(|&b| !chosen[b]).expect("fallback ranks every beam"),
            };
            chosen[beam] = true;
            out.push(beam);
        }
        // Maps with fewer than k pixels.
        while out.len() < k {
            let beam = fallback.by_ref().find(|&b| !chosen[b]).expect("fallback ranks every beam");
            chosen[beam] = true;
            out.push(beam);
        }
        Ok(out)
    }

    pub fn predict_topk(&self, map: &FeatureMap, k: usize) -> Result<Vec<usize>, LutError> {
        let found = ra_shape(map)?;
        if found != self.shape {
            return Err(LutError::ShapeMismatch { found, expected: self.shape });
        }
        self.predict_values(&map.data, k)
    }

    /// Layout (little endian): magic, u32 version, u32 S, u32 M_F, u32 N,
    /// then per pixel `u16 len` + `len x u16` ranked beams, then `N x u16`
    /// fallback ranking.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), LutError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        for v in [VERSION, self.shape[0] as u32, self.shape[1] as u32, self.n_beams as u32] {
            buf.put_u32(v);
        }
        for list in &self.ranked {
            buf.put_u16(list.len() as u16);
            list.iter().for_each(|&b| buf.put_u16(b));
        }
        self.fallback_rank.iter().for_each(|&b| buf.put_u16(b));
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, LutError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let bad = |m: &str| LutError::BadFormat(m.to_string());
        let mut rd = ByteReader::new(&bytes);
        if rd.take(8) != Some(MAGIC.as_slice()) {
            return Err(bad("bad magic"));
        }
        let truncated = || bad("truncated");
        let version = rd.u32().ok_or_else(truncated)?;
        if version != VERSION {
            return Err(LutError::BadFormat(format!("unsupported version {version}")));
        }
        let s = rd.u32().ok_or_else(truncated)? as usize;
        let m_f = rd.u32().ok_or_else(truncated)? as usize;
        let n = rd.u32().ok_or_else(truncated)? as usize;
        if n == 0 || n > u16::MAX as usize || s.checked_mul(m_f).is_none_or(|p| p > 1 << 24) {
            return Err(bad("implausible dimensions"));
        }
        let read_list = |rd: &mut ByteReader, len: usize| -> Result<Vec<u16>, LutError> {
            let list = (0..len).map(|_| rd.u16()).collect::<Option<Vec<u16>>>().ok_or_else(truncated)?;
            if list.iter().any(|&b| b as usize >= n) {
                return Err(bad("beam index out of range"));
            }
            Ok(list)
        };
        let mut ranked = Vec::with_capacity(s * m_f);
        for _ in 0..s * m_f {
            let len = rd.u16().ok_or_else(truncated)? as usize;
            ranked.push(read_list(&mut rd, len)?);
        }
        let fallback_rank = read_list(&mut rd, n)?;
        let mut seen = vec![false; n];
        if !fallback_rank.iter().all(|&b| !std::mem::replace(&mut seen[b as usize], true)) {
            return Err(bad("fallback ranking is not a permutation"));
        }
        if rd.remaining() != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(LookupTable { shape: [s, m_f], n_beams: n, ranked, fallback_rank })
    }

    pub fn save(&self, path: &Path) -> Result<(), LutError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LutError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
